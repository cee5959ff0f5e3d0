#include <promoai/service.hpp>

#include "order_predicates.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace promoai;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = PROMOAI_FIXTURE_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "promoai-test-XXXXXX").string();
        path = ::mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

AppConfig config_for(const fs::path& sessions) {
    AppConfig cfg;
    cfg.session_dir = sessions;
    cfg.mock_script = kFixtures / "mock" / "order_process.json";
    cfg.provider_config.retry_backoff = std::chrono::milliseconds(1);
    return cfg;
}

std::shared_ptr<MockProvider> script(const std::string& name) {
    return std::make_shared<MockProvider>(MockProvider::read_script(kFixtures / "mock" / name));
}

Request post(const std::string& path, const json& body) { return {"POST", path, {}, body.dump(), ""}; }
Request get(const std::string& path, std::map<std::string, std::string> query = {}) {
    return {"GET", path, std::move(query), "", ""};
}

json body_of(const Response& r) { return json::parse(r.body); }

const std::string kDescription = "An online shop order process.";

}  // namespace

TEST_CASE("config file parsing", "[service][config]") {
    SECTION("full file") {
        const auto cfg = parse_config(R"(# comment
listen = 0.0.0.0:9000
provider = http
endpoint = https://llm.example.com/v1/chat/completions
model = some-model
api_key_env = MY_KEY
temperature = 0.5
timeout_seconds = 30
max_retries_transport = 4
session_dir = data/sessions
max_iterations = 3
state_budget = 5000
lock_timeout_seconds = 2
cors_allow = http://localhost:5173, http://127.0.0.1:5173
)",
                                      "/srv/promoai");
        REQUIRE(cfg.host == "0.0.0.0");
        REQUIRE(cfg.port == 9000);
        REQUIRE(cfg.provider == "http");
        REQUIRE(cfg.provider_config.model_name == "some-model");
        REQUIRE(cfg.provider_config.api_key_ref == "MY_KEY");
        REQUIRE(cfg.provider_config.temperature == 0.5);
        REQUIRE(cfg.provider_config.timeout == std::chrono::seconds(30));
        REQUIRE(cfg.provider_config.max_retries_transport == 4);
        REQUIRE(cfg.session_dir == fs::path("/srv/promoai/data/sessions"));
        REQUIRE(cfg.max_iterations == 3);
        REQUIRE(cfg.state_budget == 5000);
        REQUIRE(cfg.lock_timeout == std::chrono::seconds(2));
        REQUIRE(cfg.cors_allow == std::vector<std::string>{"http://localhost:5173", "http://127.0.0.1:5173"});
    }
    SECTION("rejections") {
        REQUIRE_THROWS_AS(parse_config("provider = http\napi_key = sk-123\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\ntoken = abc\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\ncolour = blue\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = mock\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\ntemperature = 3\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\nlisten = nowhere\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\nmax_iterations = 0\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\nstate_budget = lots\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("provider = http\njust words\n"), ConfigError);
    }
    SECTION("the secret rejection does not echo the value") {
        try {
            parse_config("provider = http\napi_key = sk-should-not-echo\n");
            FAIL("accepted");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("sk-should-not-echo") == std::string::npos);
        }
    }
}

TEST_CASE("session ids", "[service]") {
    const auto a = new_session_id();
    REQUIRE(valid_session_id(a));
    REQUIRE(a != new_session_id());
    REQUIRE_FALSE(valid_session_id("../etc/passwd"));
    REQUIRE_FALSE(valid_session_id(std::string(32, 'G')));
}

TEST_CASE("session lifecycle through the handler", "[service]") {
    TempDir tmp;
    std::ostringstream log;
    Service service(config_for(tmp.path), script("order_process.json"), log);

    const auto created = service.handle(post("/api/sessions", {{"description", kDescription}}));
    REQUIRE(created.status == 201);
    const auto summary = body_of(created);
    const std::string id = summary["id"];
    REQUIRE(valid_session_id(id));
    REQUIRE(summary["attempts"] == 1);
    REQUIRE(summary["stats"]["activities"].get<int>() > 0);
    REQUIRE(summary["history"].size() == 1);
    REQUIRE(summary["history"][0]["kind"] == "generated");

    const auto base = "/api/sessions/" + id;
    SECTION("history and conversation") {
        auto h = body_of(service.handle(get(base + "/history")));
        REQUIRE(h["events"].size() == 1);
        REQUIRE_FALSE(h.contains("conversation"));
        h = body_of(service.handle(get(base + "/history", {{"include_conversation", "true"}})));
        REQUIRE(h["conversation"]["messages"].size() == 3);
    }
    SECTION("feedback advances the model") {
        const auto before = service.handle(get(base + "/model", {{"format", "powl-json"}})).body;
        const auto fb = service.handle(post(base + "/feedback", {{"feedback", slurp(kFixtures / "order_process" / "feedback.txt")}}));
        REQUIRE(fb.status == 200);
        REQUIRE(body_of(fb)["history"].size() == 2);
        REQUIRE(body_of(fb)["history"][1]["kind"] == "refined");
        const auto after = service.handle(get(base + "/model"));
        REQUIRE(after.status == 200);
        REQUIRE(after.body != before);
        const auto model = powl_json_import(after.body);
        REQUIRE(testing::loop_around(model, "select items"));

        const auto h = body_of(service.handle(get(base + "/history", {{"include_conversation", "true"}})));
        REQUIRE(h["events"].size() == 2);
        REQUIRE(h["conversation"]["messages"].size() == 5);
    }
    SECTION("feedback errors") {
        REQUIRE(service.handle(post("/api/sessions/" + std::string(32, 'a') + "/feedback", {{"feedback", "x"}})).status == 404);
        REQUIRE(body_of(service.handle(post(base + "/feedback", {{"feedback", "   "}})))["kind"] == "empty-feedback");
        REQUIRE(body_of(service.handle(post(base + "/feedback", {{"text", "x"}})))["kind"] == "malformed-request");
        REQUIRE(service.handle({"POST", base + "/feedback", {}, "{nope", ""}).status == 400);
    }
    SECTION("model formats") {
        const auto pnml = service.handle(get(base + "/model", {{"format", "pnml"}}));
        REQUIRE(pnml.status == 200);
        REQUIRE(pnml.content_type == "application/xml");
        REQUIRE(pnml_import(pnml.body).transitions.size() > 0);
        const auto bpmn = service.handle(get(base + "/model", {{"format", "bpmn"}}));
        REQUIRE(bpmn_check_references(bpmn.body).problems.empty());
        const auto pcl = service.handle(get(base + "/model", {{"format", "pcl"}}));
        REQUIRE(run_pcl(pcl.body) == powl_json_import(service.handle(get(base + "/model")).body));
        const auto render = body_of(service.handle(get(base + "/model", {{"format", "render-json"}, {"view", "bpmn"}})));
        REQUIRE(render["nodes"].size() > 0);
        REQUIRE(render["edges"].size() > 0);
        REQUIRE(service.handle(get(base + "/model", {{"format", "svg"}})).status == 400);
        REQUIRE(body_of(service.handle(get(base + "/model", {{"format", "render-json"}, {"view", "dot"}})))["kind"] ==
                "unknown-view");
        REQUIRE(service.handle(get("/api/sessions/" + std::string(32, 'b') + "/model")).status == 404);
    }
    SECTION("exports are stored on disk") {
        for (const auto& [format, file] : SessionStore::kExports) {
            REQUIRE(fs::exists(tmp.path / id / file));
            REQUIRE(slurp(tmp.path / id / file) == service.handle(get(base + "/model", {{"format", std::string(format)}})).body);
        }
    }
    SECTION("restart keeps exports byte-identical") {
        std::map<std::string, std::string> before;
        for (const auto& [format, file] : SessionStore::kExports) {
            before[std::string(format)] = service.handle(get(base + "/model", {{"format", std::string(format)}})).body;
        }
        std::ostringstream log2;
        Service restarted(config_for(tmp.path), script("order_process.json"), log2);
        for (const auto& [format, doc] : before) {
            REQUIRE(restarted.handle(get(base + "/model", {{"format", format}})).body == doc);
        }
        REQUIRE(body_of(restarted.handle(get(base + "/history")))["events"].size() == 1);
    }
    SECTION("request log is JSON lines") {
        std::istringstream lines(log.str());
        std::string line;
        std::size_t n = 0;
        while (std::getline(lines, line)) {
            const auto entry = json::parse(line);
            REQUIRE(entry.contains("ts"));
            REQUIRE(entry.contains("event"));
            ++n;
        }
        REQUIRE(n >= 2);
    }
}

TEST_CASE("session creation errors", "[service]") {
    TempDir tmp;
    std::ostringstream log;
    SECTION("bad requests") {
        Service service(config_for(tmp.path), script("order_process.json"), log);
        REQUIRE(body_of(service.handle(post("/api/sessions", {{"description", ""}})))["kind"] == "empty-description");
        REQUIRE(body_of(service.handle(post("/api/sessions", {{"description", std::string(kMaxDescriptionChars + 1, 'x')}})))["kind"] ==
                "description-too-long");
        REQUIRE(body_of(service.handle(post("/api/sessions", {{"description", 7}})))["kind"] == "malformed-request");
        REQUIRE(service.handle({"POST", "/api/sessions", {}, "", ""}).status == 400);
        REQUIRE(fs::is_empty(tmp.path));
    }
    SECTION("exhaustion keeps a failed session") {
        Service service(config_for(tmp.path), script("garbage.json"), log);
        const auto r = service.handle(post("/api/sessions", {{"description", kDescription}}));
        REQUIRE(r.status == 422);
        const auto body = body_of(r);
        REQUIRE(body["kind"] == "generation-exhausted");
        REQUIRE(body["attempts"] == 5);
        REQUIRE(body["error_kind"] == "bad-edge");
        REQUIRE(body.contains("location"));
        const std::string id = body["session_id"];
        const auto h = body_of(service.handle(get("/api/sessions/" + id + "/history")));
        REQUIRE(h["events"].size() == 1);
        REQUIRE(h["events"][0]["kind"] == "failed");
        REQUIRE(body_of(service.handle(get("/api/sessions/" + id + "/model")))["kind"] == "no-model");
        REQUIRE(body_of(service.handle(post("/api/sessions/" + id + "/feedback", {{"feedback", "x"}})))["kind"] == "no-model");
    }
    SECTION("provider failure") {
        Service service(config_for(tmp.path), std::make_shared<MockProvider>(std::vector<MockProvider::Entry>{}), log);
        const auto r = service.handle(post("/api/sessions", {{"description", kDescription}}));
        REQUIRE(r.status == 502);
        REQUIRE(body_of(r)["kind"] == "provider-error");
        REQUIRE(fs::is_empty(tmp.path));
    }
}

TEST_CASE("routing and CORS", "[service]") {
    TempDir tmp;
    std::ostringstream log;
    auto cfg = config_for(tmp.path);
    cfg.cors_allow = {"http://localhost:5173"};
    Service service(cfg, script("order_process.json"), log);

    REQUIRE(body_of(service.handle(get("/api/health")))["status"] == "ok");
    REQUIRE(service.handle(get("/api/sessions")).status == 405);
    REQUIRE(service.handle(post("/api/health", {})).status == 405);
    REQUIRE(service.handle(get("/nothing")).status == 404);
    REQUIRE(service.handle(get("/api/sessions/x/y/z")).status == 404);

    auto preflight = service.handle({"OPTIONS", "/api/sessions", {}, "", "http://localhost:5173"});
    REQUIRE(preflight.status == 204);
    REQUIRE(preflight.headers["Access-Control-Allow-Origin"] == "http://localhost:5173");
    auto foreign = service.handle({"GET", "/api/health", {}, "", "http://evil.example"});
    REQUIRE_FALSE(foreign.headers.contains("Access-Control-Allow-Origin"));
}

TEST_CASE("concurrent feedback on one session", "[service][concurrency]") {
    // A provider that blocks until released lets two requests overlap.
    class Gate : public Provider {
      public:
        explicit Gate(std::vector<std::string> replies) : replies_(std::move(replies)) {}
        std::string complete(const std::vector<Message>&, const ProviderConfig&) override {
            std::unique_lock lock(m_);
            const auto n = calls_++;
            if (n > 0) {
                entered_ = true;
                cv_.notify_all();
                cv_.wait(lock, [&] { return released_; });
            }
            return replies_.at(n);
        }
        void wait_entered() {
            std::unique_lock lock(m_);
            cv_.wait(lock, [&] { return entered_; });
        }
        void release() {
            std::lock_guard lock(m_);
            released_ = true;
            cv_.notify_all();
        }

      private:
        std::vector<std::string> replies_;
        std::mutex m_;
        std::condition_variable cv_;
        std::size_t calls_ = 0;
        bool entered_ = false, released_ = false;
    };

    const auto scripted = MockProvider::read_script(kFixtures / "mock" / "order_process.json");
    auto gate = std::make_shared<Gate>(std::vector<std::string>{scripted[0].text, scripted[1].text, scripted[2].text});
    TempDir tmp;
    std::ostringstream log;
    auto cfg = config_for(tmp.path);
    cfg.lock_timeout = std::chrono::seconds(0);
    Service service(cfg, gate, log);
    const std::string id = body_of(service.handle(post("/api/sessions", {{"description", kDescription}})))["id"];
    const auto path = "/api/sessions/" + id + "/feedback";

    Response first;
    std::thread t([&] { first = service.handle(post(path, {{"feedback", "model the item selection as a loop"}})); });
    gate->wait_entered();
    const auto second = service.handle(post(path, {{"feedback", "another change"}}));
    gate->release();
    t.join();
    REQUIRE(second.status == 409);
    REQUIRE(body_of(second)["kind"] == "session-busy");
    REQUIRE(first.status == 200);
    REQUIRE(body_of(service.handle(get("/api/sessions/" + id + "/history")))["events"].size() == 2);
}

TEST_CASE("the API key never leaves the process", "[service][secrets][property]") {
    const std::string key = "sk-live-" + std::string(24, 'Q') + "-zz";
    ::setenv("PROMOAI_SERVICE_TEST_KEY", key.c_str(), 1);
    const auto scripted = MockProvider::read_script(kFixtures / "mock" / "order_process.json");

    // Fake endpoint: answers normally on some calls, fails echoing the key on others.
    httplib::Server fake;
    std::atomic<int> calls{0};
    fake.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = calls++;
        if (n % 3 == 2) {
            res.status = 401;
            res.set_content("bad credential " + req.get_header_value("Authorization"), "text/plain");
            return;
        }
        const auto& text = scripted[static_cast<std::size_t>(n) % 2].text;
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump(),
                        "application/json");
    });
    const int port = fake.bind_to_any_port("127.0.0.1");
    std::thread server([&] { fake.listen_after_bind(); });
    fake.wait_until_ready();

    TempDir tmp;
    std::ostringstream log;
    auto cfg = config_for(tmp.path);
    cfg.provider = "http";
    cfg.provider_config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.provider_config.api_key_ref = "PROMOAI_SERVICE_TEST_KEY";
    cfg.provider_config.max_retries_transport = 0;
    Service service(cfg, make_provider(cfg), log);

    std::vector<std::string> bodies;
    std::vector<std::string> ids;
    for (int round = 0; round < 4; ++round) {
        const auto r = service.handle(post("/api/sessions", {{"description", kDescription}}));
        bodies.push_back(r.body);
        if (r.status == 201) ids.push_back(body_of(r)["id"]);
    }
    for (const auto& id : ids) {
        bodies.push_back(service.handle(post("/api/sessions/" + id + "/feedback", {{"feedback", "loop the selection"}})).body);
        bodies.push_back(service.handle(get("/api/sessions/" + id + "/history", {{"include_conversation", "true"}})).body);
    }
    fake.stop();
    server.join();

    REQUIRE(calls > 3);
    REQUIRE_FALSE(ids.empty());
    REQUIRE(std::any_of(bodies.begin(), bodies.end(), [](const std::string& b) { return b.find("provider-error") != std::string::npos; }));
    for (const auto& b : bodies) REQUIRE(b.find(key) == std::string::npos);
    REQUIRE(log.str().find(key) == std::string::npos);
    for (const auto& entry : fs::recursive_directory_iterator(tmp.path)) {
        if (entry.is_regular_file()) {
            INFO(entry.path());
            REQUIRE(slurp(entry.path()).find(key) == std::string::npos);
        }
    }
}

TEST_CASE("HTTP transport", "[service][http]") {
    TempDir tmp;
    std::ostringstream log;
    Service service(config_for(tmp.path), script("order_process.json"), log);
    httplib::Server server;
    mount(server, service);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/api/sessions", json{{"description", kDescription}}.dump(), "application/json");
    REQUIRE(created);
    REQUIRE(created->status == 201);
    const std::string id = json::parse(created->body)["id"];
    auto model = client.Get("/api/sessions/" + id + "/model?format=pnml");
    REQUIRE(model);
    REQUIRE(model->status == 200);
    REQUIRE(model->get_header_value("Content-Type") == "application/xml");
    auto render = client.Get("/api/sessions/" + id + "/model?format=render-json&view=pn");
    REQUIRE(render->status == 200);
    REQUIRE(json::parse(render->body).contains("nodes"));
    auto missing = client.Get("/api/sessions/" + std::string(32, 'c') + "/history");
    REQUIRE(missing->status == 404);
    REQUIRE(json::parse(missing->body)["kind"] == "unknown-session");
    auto wrong = client.Delete("/api/sessions");
    REQUIRE(wrong->status == 405);

    server.stop();
    t.join();
}

TEST_CASE("render-json of a single activity", "[service][render]") {
    const auto j = to_json(to_render_graph(make_activity("a"), RenderView::bpmn));
    REQUIRE(j["nodes"].size() == 3);
    REQUIRE(j["edges"].size() == 2);
}

TEST_CASE("sessions progress independently", "[service][concurrency]") {
    // Blocks any call whose last message mentions "slow" until released.
    class Selective : public Provider {
      public:
        Selective(std::string create, std::string refine) : create_(std::move(create)), refine_(std::move(refine)) {}
        std::string complete(const std::vector<Message>& messages, const ProviderConfig&) override {
            const auto& last = messages.back().content;
            if (last.find("slow") != std::string::npos) {
                std::unique_lock lock(m_);
                entered_ = true;
                cv_.notify_all();
                cv_.wait(lock, [&] { return released_; });
            }
            return messages.size() <= 2 ? create_ : refine_;
        }
        void wait_entered() {
            std::unique_lock lock(m_);
            cv_.wait(lock, [&] { return entered_; });
        }
        void release() {
            std::lock_guard lock(m_);
            released_ = true;
            cv_.notify_all();
        }

      private:
        std::string create_, refine_;
        std::mutex m_;
        std::condition_variable cv_;
        bool entered_ = false, released_ = false;
    };

    const auto scripted = MockProvider::read_script(kFixtures / "mock" / "order_process.json");
    auto provider = std::make_shared<Selective>(scripted[0].text, scripted[1].text);
    TempDir tmp;
    std::ostringstream log;
    Service service(config_for(tmp.path), provider, log);
    const std::string a = body_of(service.handle(post("/api/sessions", {{"description", kDescription}})))["id"];
    const std::string b = body_of(service.handle(post("/api/sessions", {{"description", kDescription}})))["id"];

    Response slow;
    std::thread t([&] { slow = service.handle(post("/api/sessions/" + a + "/feedback", {{"feedback", "slow change"}})); });
    provider->wait_entered();
    // Session a is mid-refinement; b is neither blocked nor refused.
    const auto fast = service.handle(post("/api/sessions/" + b + "/feedback", {{"feedback", "loop the selection"}}));
    REQUIRE(fast.status == 200);
    REQUIRE(body_of(service.handle(get("/api/sessions/" + a + "/history")))["events"].size() == 1);
    provider->release();
    t.join();
    REQUIRE(slow.status == 200);
    REQUIRE(body_of(service.handle(get("/api/sessions/" + a + "/history")))["events"].size() == 2);
}

TEST_CASE("feedback that cannot be repaired", "[service]") {
    const auto scripted = MockProvider::read_script(kFixtures / "mock" / "order_process.json");
    auto entries = MockProvider::read_script(kFixtures / "mock" / "garbage.json");
    entries.insert(entries.begin(), scripted[0]);
    TempDir tmp;
    std::ostringstream log;
    Service service(config_for(tmp.path), std::make_shared<MockProvider>(entries), log);
    const std::string id = body_of(service.handle(post("/api/sessions", {{"description", kDescription}})))["id"];
    const auto before = service.handle(get("/api/sessions/" + id + "/model")).body;
    const auto conversation =
        body_of(service.handle(get("/api/sessions/" + id + "/history", {{"include_conversation", "true"}})))["conversation"];

    const auto r = service.handle(post("/api/sessions/" + id + "/feedback", {{"feedback", "loop the selection"}}));
    REQUIRE(r.status == 422);
    REQUIRE(body_of(r)["error_kind"] == "bad-edge");
    const auto h = body_of(service.handle(get("/api/sessions/" + id + "/history", {{"include_conversation", "true"}})));
    REQUIRE(h["events"].size() == 2);
    REQUIRE(h["events"][1]["kind"] == "failed");
    REQUIRE(h["events"][1]["feedback"] == "loop the selection");
    // The model and conversation stay at the last accepted state.
    REQUIRE(h["conversation"] == conversation);
    REQUIRE(service.handle(get("/api/sessions/" + id + "/model")).body == before);
}
