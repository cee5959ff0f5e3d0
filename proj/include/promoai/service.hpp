#pragma once

// Session-oriented service: configuration, on-disk session store, and the
// HTTP+JSON API. Request handling is transport-independent (Service::handle)
// and bound to an httplib server by mount().

#include <promoai/convert.hpp>
#include <promoai/llm.hpp>
#include <promoai/providers.hpp>
#include <promoai/serialize.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace promoai {

// ---------------------------------------------------------------------------
// Configuration

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct AppConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string provider = "mock";  // mock | http
    std::filesystem::path mock_script;
    ProviderConfig provider_config;
    std::filesystem::path session_dir = "sessions";
    std::filesystem::path prompt_dir = default_asset_dir() / "prompts";
    std::size_t max_iterations = kDefaultMaxIterations;
    std::size_t state_budget = kDefaultStateBudget;
    std::vector<std::string> cors_allow;
    std::chrono::seconds lock_timeout{300};
};

namespace detail {

inline std::string trim_ws(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (in.fail() || !in.eof()) throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    return out;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment line. Relative paths are
/// resolved against `base_dir`. API keys are never accepted here; the file
/// names the environment variable that holds the key.
inline AppConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
    AppConfig cfg;
    auto path_of = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base_dir / p;
    };
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = detail::trim_ws(line);
        if (content.empty() || content.front() == '#') continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = detail::trim_ws(content.substr(0, eq));
        const auto value = detail::trim_ws(content.substr(eq + 1));
        if (key == "listen") {
            const auto colon = value.rfind(':');
            if (colon == std::string::npos) throw ConfigError("config key 'listen' expects host:port");
            cfg.host = value.substr(0, colon);
            cfg.port = detail::parse_number<int>(key, value.substr(colon + 1));
            if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("config key 'listen' has an invalid port");
        } else if (key == "provider") {
            if (value != "mock" && value != "http") throw ConfigError("config key 'provider' must be mock or http");
            cfg.provider = value;
        } else if (key == "mock_script") {
            cfg.mock_script = path_of(value);
        } else if (key == "endpoint") {
            cfg.provider_config.endpoint = value;
        } else if (key == "model") {
            cfg.provider_config.model_name = value;
        } else if (key == "api_key_env") {
            cfg.provider_config.api_key_ref = value;
        } else if (key == "temperature") {
            const auto t = detail::parse_number<double>(key, value);
            if (t < 0.0 || t > 2.0) throw ConfigError("config key 'temperature' must be in [0, 2]");
            cfg.provider_config.temperature = t;
        } else if (key == "timeout_seconds") {
            cfg.provider_config.timeout = std::chrono::seconds(detail::parse_number<unsigned>(key, value));
        } else if (key == "max_retries_transport") {
            cfg.provider_config.max_retries_transport = detail::parse_number<std::size_t>(key, value);
        } else if (key == "session_dir") {
            cfg.session_dir = path_of(value);
        } else if (key == "prompt_dir") {
            cfg.prompt_dir = path_of(value);
        } else if (key == "max_iterations") {
            cfg.max_iterations = detail::parse_number<std::size_t>(key, value);
            if (cfg.max_iterations < 1) throw ConfigError("config key 'max_iterations' must be at least 1");
        } else if (key == "state_budget") {
            cfg.state_budget = detail::parse_number<std::size_t>(key, value);
        } else if (key == "lock_timeout_seconds") {
            cfg.lock_timeout = std::chrono::seconds(detail::parse_number<unsigned>(key, value));
        } else if (key == "cors_allow") {
            cfg.cors_allow.clear();
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) {
                if (auto o = detail::trim_ws(item); !o.empty()) cfg.cors_allow.push_back(o);
            }
        } else if (key == "api_key" || key == "key" || key == "secret" || key == "token") {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": secrets are not read from the config file; set api_key_env to the name of an "
                              "environment variable instead");
        } else {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (cfg.provider == "mock" && cfg.mock_script.empty()) {
        throw ConfigError("provider 'mock' requires mock_script");
    }
    return cfg;
}

inline AppConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::ostringstream s;
    s << in.rdbuf();
    return parse_config(s.str(), file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

inline std::unique_ptr<Provider> make_provider(const AppConfig& cfg) {
    if (cfg.provider == "mock") return std::make_unique<MockProvider>(MockProvider::read_script(cfg.mock_script));
    return std::make_unique<HttpChatProvider>();
}

// ---------------------------------------------------------------------------
// Sessions

enum class EventKind { generated, refined, failed };

inline std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::generated: return "generated";
    case EventKind::refined: return "refined";
    case EventKind::failed: return "failed";
    }
    return "failed";
}

inline EventKind event_kind_from_string(std::string_view s) {
    if (s == "generated") return EventKind::generated;
    if (s == "refined") return EventKind::refined;
    if (s == "failed") return EventKind::failed;
    throw std::invalid_argument("unknown history event '" + std::string(s) + "'");
}

struct HistoryEvent {
    std::string timestamp;
    EventKind kind;
    std::size_t attempts = 0;
    std::string feedback;  // refinement requests only
    std::string error;     // failed events only
};

struct Session {
    std::string id;
    std::string description;
    Conversation conversation;
    std::optional<PowlNode> current_model;
    std::string source;
    std::vector<HistoryEvent> history;
    std::string created;
    std::string updated;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

/// 128 random bits as 32 lowercase hex characters.
inline std::string new_session_id() {
    static thread_local std::random_device rd;
    std::string id;
    for (int i = 0; i < 4; ++i) {
        char buf[9];
        std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
        id += buf;
    }
    return id;
}

inline bool valid_session_id(std::string_view id) {
    return id.size() == 32 && std::all_of(id.begin(), id.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

inline nlohmann::json to_json(const HistoryEvent& e) {
    nlohmann::json j{{"timestamp", e.timestamp}, {"kind", to_string(e.kind)}, {"attempts", e.attempts}};
    if (!e.feedback.empty()) j["feedback"] = e.feedback;
    if (!e.error.empty()) j["error"] = e.error;
    return j;
}

inline nlohmann::json to_json(const Session& s) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : s.history) history.push_back(to_json(e));
    return {
        {"id", s.id},
        {"description", s.description},
        {"conversation", to_json(s.conversation)},
        {"model", s.current_model ? powl_to_json(*s.current_model) : nlohmann::json(nullptr)},
        {"source", s.source},
        {"history", std::move(history)},
        {"created", s.created},
        {"updated", s.updated},
    };
}

inline Session session_from_json(const nlohmann::json& j) {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.description = j.at("description").get<std::string>();
    s.conversation = conversation_from_json(j.at("conversation"));
    if (!j.at("model").is_null()) s.current_model = powl_from_json(j.at("model"));
    s.source = j.value("source", "");
    for (const auto& e : j.at("history")) {
        s.history.push_back({e.at("timestamp").get<std::string>(), event_kind_from_string(e.at("kind").get<std::string>()),
                             e.at("attempts").get<std::size_t>(), e.value("feedback", ""), e.value("error", "")});
    }
    s.created = j.at("created").get<std::string>();
    s.updated = j.at("updated").get<std::string>();
    return s;
}

/// Export document for a model; `format` is one of powl-json, pnml, bpmn, pcl.
inline std::string export_model(const PowlNode& model, std::string_view format) {
    if (format == "powl-json") return powl_json_export(model);
    if (format == "pnml") return pnml_export(powl_to_pn(model));
    if (format == "bpmn") return bpmn_export(powl_to_bpmn(model));
    if (format == "pcl") return emit_pcl(model);
    throw std::invalid_argument("unknown export format '" + std::string(format) + "'");
}

inline nlohmann::json to_json(const RenderGraph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"kind", n.kind}, {"label", n.label}, {"rank", n.rank}});
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges) edges.push_back({{"source", e.source}, {"target", e.target}});
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

/// One directory per session holding session.json and the latest exports.
/// Files are replaced atomically (write to a temporary file, then rename).
class SessionStore {
  public:
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kExports{{
        {"powl-json", "model.powl.json"},
        {"pnml", "model.pnml"},
        {"bpmn", "model.bpmn"},
        {"pcl", "model.pcl"},
    }};

    explicit SessionStore(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_);
    }

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }
    [[nodiscard]] std::filesystem::path dir_of(const std::string& id) const { return root_ / id; }

    void save(const Session& s) const { save_dir(s, dir_of(s.id)); }

    static void save_dir(const Session& s, const std::filesystem::path& dir) {
        std::filesystem::create_directories(dir);
        if (s.current_model) {
            for (const auto& [format, file] : kExports) write_atomic(dir / file, export_model(*s.current_model, format));
        }
        write_atomic(dir / "session.json", to_json(s).dump(2) + "\n");
    }

    [[nodiscard]] std::optional<Session> load(const std::string& id) const {
        if (!valid_session_id(id)) return std::nullopt;
        return load_dir(dir_of(id));
    }

    static std::optional<Session> load_dir(const std::filesystem::path& dir) {
        std::ifstream in(dir / "session.json");
        if (!in) return std::nullopt;
        return session_from_json(nlohmann::json::parse(in));
    }

    /// Stored export document, if this session has one for `format`.
    [[nodiscard]] std::optional<std::string> stored_export(const std::string& id, std::string_view format) const {
        for (const auto& [f, file] : kExports) {
            if (f != format) continue;
            std::ifstream in(dir_of(id) / file, std::ios::binary);
            if (!in) return std::nullopt;
            std::ostringstream s;
            s << in.rdbuf();
            return s.str();
        }
        return std::nullopt;
    }

    static void write_atomic(const std::filesystem::path& target, const std::string& content) {
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write " + tmp.string());
            out << content;
            out.flush();
            if (!out) throw std::runtime_error("cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
    }

  private:
    std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// HTTP API

struct Request {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string origin;
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;
};

inline Response json_response(int status, const nlohmann::json& body) {
    return {status, body.dump(2) + "\n", "application/json", {}};
}

inline Response error_response(int status, std::string_view kind, const std::string& message,
                               std::optional<SourceLocation> location = std::nullopt) {
    nlohmann::json body{{"kind", kind}, {"message", message}};
    if (location) body["location"] = {{"line", location->line}, {"column", location->column}};
    return json_response(status, body);
}

/// Writes one JSON object per line; safe to share between threads.
class JsonLogger {
  public:
    explicit JsonLogger(std::ostream& out) : out_(&out) {}

    void log(nlohmann::json entry) {
        entry["ts"] = utc_timestamp();
        const auto line = entry.dump();
        std::lock_guard lock(mutex_);
        *out_ << line << '\n';
        out_->flush();
    }

  private:
    std::ostream* out_;
    std::mutex mutex_;
};

class Service {
  public:
    Service(AppConfig config, std::shared_ptr<Provider> provider, std::ostream& log = std::cerr)
        : config_(std::move(config)),
          provider_(std::move(provider)),
          settings_{config_.provider_config, PromptLibrary::load(config_.prompt_dir), config_.max_iterations,
                    config_.state_budget},
          store_(config_.session_dir),
          log_(log) {}

    [[nodiscard]] const AppConfig& config() const noexcept { return config_; }
    [[nodiscard]] const SessionStore& store() const noexcept { return store_; }

    Response handle(const Request& req) {
        const auto started = std::chrono::steady_clock::now();
        Response res;
        try {
            res = route(req);
        } catch (const std::exception& e) {
            log_.log({{"level", "error"}, {"event", "unhandled"}, {"path", req.path}, {"message", e.what()}});
            res = error_response(500, "internal-error", e.what());
        }
        add_cors(req, res);
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        log_.log({{"level", "info"},
                  {"event", "request"},
                  {"method", req.method},
                  {"path", req.path},
                  {"status", res.status},
                  {"duration_ms", ms.count()}});
        return res;
    }

  private:
    static std::vector<std::string> split_path(const std::string& path) {
        std::vector<std::string> parts;
        std::istringstream in(path);
        std::string part;
        while (std::getline(in, part, '/')) {
            if (!part.empty()) parts.push_back(part);
        }
        return parts;
    }

    Response route(const Request& req) {
        if (req.method == "OPTIONS") return {204, "", "text/plain", {}};
        const auto parts = split_path(req.path);
        if (parts.size() < 2 || parts[0] != "api") return error_response(404, "not-found", "no route for " + req.path);
        if (parts.size() == 2 && parts[1] == "health") {
            if (req.method != "GET") return method_not_allowed(req);
            return json_response(200, {{"status", "ok"}});
        }
        if (parts[1] != "sessions") return error_response(404, "not-found", "no route for " + req.path);
        if (parts.size() == 2) {
            if (req.method != "POST") return method_not_allowed(req);
            return create_session(req);
        }
        if (parts.size() != 4) return error_response(404, "not-found", "no route for " + req.path);
        const auto& id = parts[2];
        if (parts[3] == "feedback") {
            if (req.method != "POST") return method_not_allowed(req);
            return submit_feedback(id, req);
        }
        if (parts[3] == "model") {
            if (req.method != "GET") return method_not_allowed(req);
            return get_model(id, req);
        }
        if (parts[3] == "history") {
            if (req.method != "GET") return method_not_allowed(req);
            return get_history(id, req);
        }
        return error_response(404, "not-found", "no route for " + req.path);
    }

    static Response method_not_allowed(const Request& req) {
        return error_response(405, "method-not-allowed", req.method + " is not supported on " + req.path);
    }

    static std::optional<std::string> text_field(const Request& req, const char* field, Response& error) {
        if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) {
            error = error_response(400, "malformed-request", std::string("request body must be a JSON object with a '") +
                                                                 field + "' field");
            return std::nullopt;
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            error = error_response(400, "malformed-request", "request body is not valid JSON");
            return std::nullopt;
        }
        if (!body.is_object() || !body.contains(field) || !body.at(field).is_string()) {
            error = error_response(400, "malformed-request",
                                   std::string("request body must be a JSON object with a '") + field + "' text field");
            return std::nullopt;
        }
        return body.at(field).get<std::string>();
    }

    static nlohmann::json summary(const Session& s) {
        nlohmann::json history = nlohmann::json::array();
        for (const auto& e : s.history) history.push_back(to_json(e));
        nlohmann::json j{{"id", s.id},
                         {"description", s.description},
                         {"history", std::move(history)},
                         {"created", s.created},
                         {"updated", s.updated}};
        if (s.current_model) {
            const auto st = stats(*s.current_model);
            j["stats"] = {{"activities", st.activity_count},
                          {"operators", st.operator_count},
                          {"depth", st.depth},
                          {"silent", st.silent_count}};
            j["source"] = s.source;
            j["attempts"] = s.history.back().attempts;
        }
        return j;
    }

    static Response exhausted_response(const GenerationExhausted& e, const std::string& id) {
        nlohmann::json body{{"kind", "generation-exhausted"},
                            {"message", e.last_error().message},
                            {"error_kind", e.last_error().kind},
                            {"attempts", e.attempts()},
                            {"session_id", id}};
        if (e.last_error().location) {
            body["location"] = {{"line", e.last_error().location->line}, {"column", e.last_error().location->column}};
        }
        return json_response(422, body);
    }

    Response create_session(const Request& req) {
        Response error;
        const auto description = text_field(req, "description", error);
        if (!description) return error;
        Session s;
        s.id = new_session_id();
        s.description = *description;
        s.created = s.updated = utc_timestamp();
        try {
            auto result = generate(*description, *provider_, settings_);
            s.conversation = std::move(result.conversation);
            s.current_model = result.model;
            s.source = std::move(result.source);
            s.history.push_back({s.updated, EventKind::generated, result.attempts, "", ""});
        } catch (const InputError& e) {
            return error_response(400, e.kind(), e.what());
        } catch (const GenerationExhausted& e) {
            s.conversation = e.conversation();
            s.history.push_back({s.updated, EventKind::failed, e.attempts(), "", e.last_error().message});
            store_.save(s);
            log_.log({{"level", "warn"}, {"event", "generation-exhausted"}, {"session", s.id}, {"attempts", e.attempts()}});
            return exhausted_response(e, s.id);
        } catch (const ProviderError& e) {
            log_.log({{"level", "error"}, {"event", "provider-error"}, {"message", e.what()}});
            return error_response(502, "provider-error", e.what());
        }
        store_.save(s);
        log_.log({{"level", "info"}, {"event", "session-created"}, {"session", s.id}, {"attempts", s.history.back().attempts}});
        return json_response(201, summary(s));
    }

    std::shared_ptr<std::timed_mutex> lock_for(const std::string& id) {
        std::lock_guard guard(locks_mutex_);
        auto& slot = locks_[id];
        if (!slot) slot = std::make_shared<std::timed_mutex>();
        return slot;
    }

    Response submit_feedback(const std::string& id, const Request& req) {
        if (!store_.load(id)) return error_response(404, "unknown-session", "no session '" + id + "'");
        Response error;
        const auto feedback = text_field(req, "feedback", error);
        if (!feedback) return error;
        const auto mutex = lock_for(id);
        std::unique_lock lock(*mutex, std::defer_lock);
        if (!lock.try_lock_for(config_.lock_timeout)) {
            return error_response(409, "session-busy", "session '" + id + "' is still processing a previous request");
        }
        auto s = *store_.load(id);
        if (!s.current_model) return error_response(409, "no-model", "session '" + id + "' has no model to refine");
        const GenerationResult previous{*s.current_model, s.conversation, s.history.back().attempts, s.source};
        try {
            auto result = refine(previous, *feedback, *provider_, settings_);
            s.conversation = std::move(result.conversation);
            s.current_model = result.model;
            s.source = std::move(result.source);
            s.updated = utc_timestamp();
            s.history.push_back({s.updated, EventKind::refined, result.attempts, *feedback, ""});
        } catch (const InputError& e) {
            return error_response(400, e.kind(), e.what());
        } catch (const GenerationExhausted& e) {
            // The conversation stays at its last consistent state; the attempt is recorded in the history.
            s.updated = utc_timestamp();
            s.history.push_back({s.updated, EventKind::failed, e.attempts(), *feedback, e.last_error().message});
            store_.save(s);
            return exhausted_response(e, s.id);
        } catch (const ProviderError& e) {
            log_.log({{"level", "error"}, {"event", "provider-error"}, {"session", id}, {"message", e.what()}});
            return error_response(502, "provider-error", e.what());
        }
        store_.save(s);
        log_.log({{"level", "info"}, {"event", "session-refined"}, {"session", id}, {"attempts", s.history.back().attempts}});
        return json_response(200, summary(s));
    }

    Response get_model(const std::string& id, const Request& req) {
        const auto s = store_.load(id);
        if (!s) return error_response(404, "unknown-session", "no session '" + id + "'");
        const auto it = req.query.find("format");
        const std::string format = it == req.query.end() ? "powl-json" : it->second;
        static const std::map<std::string, std::string> content_types{
            {"powl-json", "application/json"},
            {"pnml", "application/xml"},
            {"bpmn", "application/xml"},
            {"pcl", "text/plain; charset=utf-8"},
            {"render-json", "application/json"},
        };
        const auto type = content_types.find(format);
        if (type == content_types.end()) {
            return error_response(400, "unknown-format",
                                  "format must be one of powl-json, pnml, bpmn, pcl, render-json; got '" + format + "'");
        }
        if (!s->current_model) return error_response(409, "no-model", "session '" + id + "' has no model");
        if (format == "render-json") {
            const auto v = req.query.find("view");
            const std::string view = v == req.query.end() ? "pn" : v->second;
            if (view != "pn" && view != "bpmn") {
                return error_response(400, "unknown-view", "view must be pn or bpmn; got '" + view + "'");
            }
            return json_response(200, to_json(to_render_graph(*s->current_model,
                                                              view == "pn" ? RenderView::pn : RenderView::bpmn)));
        }
        auto body = store_.stored_export(id, format);
        if (!body) body = export_model(*s->current_model, format);
        return {200, std::move(*body), type->second, {}};
    }

    Response get_history(const std::string& id, const Request& req) {
        const auto s = store_.load(id);
        if (!s) return error_response(404, "unknown-session", "no session '" + id + "'");
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : s->history) events.push_back(to_json(e));
        nlohmann::json body{{"id", s->id}, {"events", std::move(events)}};
        if (const auto it = req.query.find("include_conversation"); it != req.query.end() && it->second == "true") {
            body["conversation"] = to_json(s->conversation);
        }
        return json_response(200, body);
    }

    void add_cors(const Request& req, Response& res) const {
        if (req.origin.empty()) return;
        const bool any = std::find(config_.cors_allow.begin(), config_.cors_allow.end(), "*") != config_.cors_allow.end();
        const bool listed =
            std::find(config_.cors_allow.begin(), config_.cors_allow.end(), req.origin) != config_.cors_allow.end();
        if (!any && !listed) return;
        res.headers["Access-Control-Allow-Origin"] = any ? "*" : req.origin;
        res.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
        res.headers["Access-Control-Allow-Headers"] = "Content-Type";
        if (!any) res.headers["Vary"] = "Origin";
    }

    AppConfig config_;
    std::shared_ptr<Provider> provider_;
    GenerationSettings settings_;
    SessionStore store_;
    JsonLogger log_;
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::timed_mutex>> locks_;
};

/// Routes every request on `server` through `service`.
inline void mount(httplib::Server& server, Service& service) {
    auto adapter = [&service](const httplib::Request& in, httplib::Response& out) {
        Request req{in.method, in.path, {}, in.body, in.get_header_value("Origin")};
        for (const auto& [k, v] : in.params) req.query[k] = v;
        const auto res = service.handle(req);
        out.status = res.status;
        for (const auto& [k, v] : res.headers) out.set_header(k, v);
        if (res.status != 204) out.set_content(res.body, res.content_type);
    };
    server.Get(".*", adapter);
    server.Post(".*", adapter);
    server.Options(".*", adapter);
    server.Put(".*", adapter);
    server.Delete(".*", adapter);
    server.Patch(".*", adapter);
}

}  // namespace promoai
