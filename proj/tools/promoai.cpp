// promoai command-line tool: generate, refine, convert, check, serve, oracle.

#include <promoai/convert.hpp>
#include <promoai/llm.hpp>
#include <promoai/pcl.hpp>
#include <promoai/providers.hpp>
#include <promoai/semantics.hpp>
#include <promoai/serialize.hpp>
#include <promoai/service.hpp>

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

namespace fs = std::filesystem;
using namespace promoai;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Output format from a file name.
std::string format_of(const fs::path& p) {
    const auto name = p.filename().string();
    if (ends_with(name, ".powl.json")) return "powl-json";
    if (ends_with(name, ".pnml")) return "pnml";
    if (ends_with(name, ".bpmn")) return "bpmn";
    if (ends_with(name, ".pcl")) return "pcl";
    throw std::runtime_error("cannot infer a format from '" + name + "'; use .powl.json, .pnml, .bpmn or .pcl");
}

PowlNode load_model(const fs::path& p) {
    const auto format = format_of(p);
    if (format == "powl-json") return powl_json_import(read_file(p));
    if (format == "pcl") return run_pcl(read_file(p));
    throw std::runtime_error(p.string() + " is not a POWL model; expected .powl.json or .pcl");
}

struct ProviderOptions {
    std::string config;
    std::string provider;
    std::string script;
    std::string endpoint;
    std::string model;
    std::string api_key_env;
    std::string prompts;
    std::size_t max_iterations = 0;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--config", config, "Config file supplying provider settings")->check(CLI::ExistingFile);
        cmd.add_option("--provider", provider, "Provider backend")->check(CLI::IsMember({"mock", "http"}));
        cmd.add_option("--script", script, "Scripted responses for the mock provider (JSON array)")
            ->check(CLI::ExistingFile);
        cmd.add_option("--endpoint", endpoint, "Chat-completions endpoint URL");
        cmd.add_option("--model", model, "Model name sent to the endpoint");
        cmd.add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
        cmd.add_option("--prompts", prompts, "Prompt template directory")->check(CLI::ExistingDirectory);
        cmd.add_option("--max-iterations", max_iterations, "Attempts before giving up")->check(CLI::PositiveNumber);
    }

    // Config file first, then command-line overrides.
    AppConfig resolve() const {
        AppConfig cfg;
        if (!config.empty()) {
            cfg = load_config(config);
        }
        if (!provider.empty()) cfg.provider = provider;
        if (!script.empty()) cfg.mock_script = script;
        if (!endpoint.empty()) cfg.provider_config.endpoint = endpoint;
        if (!model.empty()) cfg.provider_config.model_name = model;
        if (!api_key_env.empty()) cfg.provider_config.api_key_ref = api_key_env;
        if (!prompts.empty()) cfg.prompt_dir = prompts;
        if (max_iterations > 0) cfg.max_iterations = max_iterations;
        if (cfg.provider == "mock" && cfg.mock_script.empty()) {
            throw std::runtime_error("the mock provider needs --script or a config file with mock_script");
        }
        return cfg;
    }
};

GenerationSettings settings_for(const AppConfig& cfg) {
    return {cfg.provider_config, PromptLibrary::load(cfg.prompt_dir), cfg.max_iterations, cfg.state_budget};
}

void print_result(const GenerationResult& r) {
    const auto st = stats(r.model);
    std::cout << "model accepted after " << r.attempts << (r.attempts == 1 ? " attempt" : " attempts") << ": "
              << st.activity_count << " activities, " << st.operator_count << " operators, depth " << st.depth << "\n";
}

void report_exhausted(const GenerationExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
}

int cmd_generate(const std::string& description_file, const ProviderOptions& opts, const std::string& out,
                 const std::string& session_dir) {
    const auto cfg = opts.resolve();
    const auto description = read_file(description_file);
    const auto format = out.empty() ? std::string() : format_of(out);
    auto provider = make_provider(cfg);
    Session s;
    s.id = new_session_id();
    s.description = description;
    s.created = s.updated = utc_timestamp();
    try {
        auto result = generate(description, *provider, settings_for(cfg));
        print_result(result);
        if (!out.empty()) write_file(out, export_model(result.model, format));
        s.conversation = result.conversation;
        s.current_model = result.model;
        s.source = result.source;
        s.history.push_back({s.updated, EventKind::generated, result.attempts, "", ""});
        if (!session_dir.empty()) SessionStore::save_dir(s, session_dir);
        return 0;
    } catch (const GenerationExhausted& e) {
        report_exhausted(e);
        s.conversation = e.conversation();
        s.history.push_back({s.updated, EventKind::failed, e.attempts(), "", e.last_error().message});
        if (!session_dir.empty()) SessionStore::save_dir(s, session_dir);
        return 1;
    }
}

int cmd_refine(const std::string& session_dir, const std::string& feedback, const ProviderOptions& opts,
               const std::string& out) {
    const auto cfg = opts.resolve();
    auto s = SessionStore::load_dir(session_dir);
    if (!s) throw std::runtime_error("no session found in " + session_dir);
    if (!s->current_model) throw std::runtime_error("the session in " + session_dir + " has no model to refine");
    auto provider = make_provider(cfg);
    const GenerationResult previous{*s->current_model, s->conversation, s->history.back().attempts, s->source};
    s->updated = utc_timestamp();
    try {
        auto result = refine(previous, feedback, *provider, settings_for(cfg));
        print_result(result);
        s->conversation = result.conversation;
        s->current_model = result.model;
        s->source = result.source;
        s->history.push_back({s->updated, EventKind::refined, result.attempts, feedback, ""});
        SessionStore::save_dir(*s, session_dir);
        if (!out.empty()) write_file(out, export_model(result.model, format_of(out)));
        return 0;
    } catch (const GenerationExhausted& e) {
        report_exhausted(e);
        s->history.push_back({s->updated, EventKind::failed, e.attempts(), feedback, e.last_error().message});
        SessionStore::save_dir(*s, session_dir);
        return 1;
    }
}

int cmd_convert(const std::string& in, const std::string& to, const std::string& out) {
    const auto document = export_model(load_model(in), to);
    if (out.empty()) {
        std::cout << document;
    } else {
        write_file(out, document);
    }
    return 0;
}

int cmd_check(const std::string& in) {
    PetriNet net;
    if (ends_with(fs::path(in).filename().string(), ".pnml")) {
        net = pnml_import(read_file(in));
    } else {
        const auto model = load_model(in);
        if (const auto report = validate(model); !report.ok()) {
            for (const auto& v : report.violations) std::cout << "invalid: " << v.path << ": " << v.message << "\n";
            return 1;
        }
        net = powl_to_pn(model);
    }
    const auto r = check_soundness(net);
    const auto dead = r.dead_transitions.size();
    if (r.sound()) {
        std::cout << "sound, " << dead << " dead transitions\n";
        return 0;
    }
    std::cout << "unsound:";
    if (r.truncated) std::cout << " state budget exhausted after " << r.explored_states << " states;";
    if (!r.option_to_complete) std::cout << " no option to complete;";
    if (!r.proper_completion) std::cout << " improper completion;";
    std::cout << " " << dead << " dead transitions\n";
    for (const auto& t : r.dead_transitions) std::cout << "  dead: " << t << "\n";
    return 1;
}

int cmd_oracle(const std::string& in, std::size_t max_len) {
    for (const auto& trace : powl_traces(load_model(in), max_len)) {
        std::cout << "<";
        for (std::size_t i = 0; i < trace.size(); ++i) std::cout << (i ? ", " : "") << trace[i];
        std::cout << ">\n";
    }
    return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const std::string& config_file) {
    const auto cfg = load_config(config_file);
    std::shared_ptr<Provider> provider = make_provider(cfg);
    Service service(cfg, provider, std::cerr);
    httplib::Server server;
    mount(server, service);
    int port = cfg.port;
    if (port == 0) {
        port = server.bind_to_any_port(cfg.host);
    } else if (!server.bind_to_port(cfg.host, port)) {
        port = -1;
    }
    if (port < 0) throw std::runtime_error("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    std::thread watcher([&server] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        server.stop();
    });
    std::cout << "listening on " << cfg.host << ":" << port << std::endl;
    server.listen_after_bind();
    g_stop = true;
    watcher.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Process modeling from natural-language descriptions via POWL"};
    app.require_subcommand(1);

    ProviderOptions gen_opts, refine_opts;
    std::string description, out, session, feedback, in, to, config;
    std::size_t max_len = 0;

    auto* gen = app.add_subcommand("generate", "Generate a model from a process description");
    gen->add_option("--description", description, "Text file with the process description")
        ->required()
        ->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output file (.powl.json, .pnml, .bpmn, .pcl)");
    gen->add_option("--session", session, "Directory to store the session for later refinement");
    gen_opts.add_to(*gen);

    auto* ref = app.add_subcommand("refine", "Refine a stored session with feedback");
    ref->add_option("--session", session, "Session directory written by generate")->required()->check(CLI::ExistingDirectory);
    ref->add_option("--feedback", feedback, "Feedback on the current model")->required();
    ref->add_option("--out", out, "Output file (.powl.json, .pnml, .bpmn, .pcl)");
    refine_opts.add_to(*ref);

    auto* conv = app.add_subcommand("convert", "Convert a POWL model to another format");
    conv->add_option("--in", in, "Model file (.powl.json or .pcl)")->required()->check(CLI::ExistingFile);
    conv->add_option("--to", to, "Target format")->required()->check(CLI::IsMember({"pnml", "bpmn", "pcl", "powl-json"}));
    conv->add_option("--out", out, "Output file (default: standard output)");

    auto* chk = app.add_subcommand("check", "Validate a model and check soundness of its Petri net");
    chk->add_option("--in", in, "Model file (.powl.json, .pcl or .pnml)")->required()->check(CLI::ExistingFile);

    auto* srv = app.add_subcommand("serve", "Run the HTTP service");
    srv->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

    auto* orc = app.add_subcommand("oracle", "Print the trace set of a model up to a length bound");
    orc->add_option("--in", in, "Model file (.powl.json or .pcl)")->required()->check(CLI::ExistingFile);
    orc->add_option("--max-len", max_len, "Maximum trace length")
        ->required()
        ->check(CLI::Range(std::size_t{0}, kMaxOracleLength));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(description, gen_opts, out, session);
        if (*ref) return cmd_refine(session, feedback, refine_opts, out);
        if (*conv) return cmd_convert(in, to, out);
        if (*chk) return cmd_check(in);
        if (*srv) return cmd_serve(config);
        if (*orc) return cmd_oracle(in, max_len);
    } catch (const PclError& e) {
        std::cerr << "error: " << e.describe() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}
