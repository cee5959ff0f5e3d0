#include <promoai/pcl.hpp>

#include "io_recorder.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/socket.h>
#include <unistd.h>

using namespace promoai;

namespace {

const std::filesystem::path kFixtures = PROMOAI_FIXTURE_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

PclError error_of(std::string_view source) {
    try {
        run_pcl(source);
    } catch (const PclError& e) {
        return e;
    }
    FAIL("program was accepted: " << source);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("basic programs", "[pcl]") {
    SECTION("single activity") {
        REQUIRE(run_pcl("a = activity(\"x\")\nfinal(a)\n") == make_activity("x"));
    }
    SECTION("one-line statements without separators") {
        REQUIRE(run_pcl("a = activity(\"x\") b = activity(\"y\") c = xor(a, b) final(c)") ==
                make_xor({make_activity("x"), make_activity("y")}));
    }
    SECTION("semicolons, comments, multi-line calls") {
        const auto m = run_pcl(
            "# comment\n"
            "a = activity(\"x\"); b = silent()\n"
            "c = partial_order(\n"
            "    [a, b],   # children\n"
            "    [(0, 1)]\n"
            ")\n"
            "final(c)\n");
        REQUIRE(m == make_partial_order({make_activity("x"), make_silent()}, {{0, 1}}));
    }
    SECTION("nested expressions and loops") {
        const auto m = run_pcl("l = loop(activity(\"do\"), silent())\nfinal(l)");
        REQUIRE(m == make_loop(make_activity("do"), make_silent()));
    }
    SECTION("string escapes") {
        REQUIRE(run_pcl(R"(a = activity("say \"hi\" \\ bye")
final(a))") == make_activity("say \"hi\" \\ bye"));
    }
    SECTION("transitive edges are reduced") {
        const auto m = run_pcl(
            "a = activity(\"a\")\nb = activity(\"b\")\nc = activity(\"c\")\n"
            "p = partial_order([a, b, c], [(0,1), (1,2), (0,2)])\nfinal(p)");
        REQUIRE(m.as<PartialOrder>()->order == EdgeSet{{0, 1}, {1, 2}});
    }
}

TEST_CASE("parse and check are separate phases", "[pcl]") {
    const auto program = parse("a = activity(\"x\")\nb = activity(\"y\")\nfinal(a)\n");
    REQUIRE(program.statements.size() == 2);
    REQUIRE(program.final_ident == "a");
    const auto problem = check(program);
    REQUIRE(problem.has_value());
    REQUIRE(problem->kind() == PclErrorKind::unused_submodel);
    REQUIRE_FALSE(check(parse("a = activity(\"x\")\nfinal(a)")).has_value());
}

TEST_CASE("error kinds and locations", "[pcl]") {
    SECTION("reuse names the identifier and both lines") {
        const auto e = error_of(
            "a = activity(\"x\")\n"
            "b = xor(a, silent())\n"
            "c = partial_order([a, b], [])\n"
            "final(c)\n");
        REQUIRE(e.kind() == PclErrorKind::reuse_of_submodel);
        REQUIRE(e.location() == SourceLocation{3, 20});
        REQUIRE(e.message().find("'a'") != std::string::npos);
        REQUIRE(e.message().find("line 2") != std::string::npos);
        REQUIRE(e.describe().starts_with("reuse-of-submodel at line 3, column 20: "));
    }
    SECTION("cyclic order names the edges and points at the closing one") {
        const auto e = error_of(
            "a = activity(\"a\")\nb = activity(\"b\")\n"
            "p = partial_order([a, b], [(0,1), (1,0)])\nfinal(p)");
        REQUIRE(e.kind() == PclErrorKind::cyclic_order);
        REQUIRE(e.message().find("(0,1)") != std::string::npos);
        REQUIRE(e.message().find("(1,0)") != std::string::npos);
        REQUIRE(e.location() == SourceLocation{3, 35});
    }
    SECTION("empty program") {
        REQUIRE(error_of("").kind() == PclErrorKind::parse);
        REQUIRE(error_of("  \n# nothing\n").kind() == PclErrorKind::parse);
    }
    SECTION("final must name a defined identifier") {
        REQUIRE(error_of("a = activity(\"x\")\nfinal(b)").kind() == PclErrorKind::undefined_ident);
    }
    SECTION("final of an already consumed submodel") {
        const auto e = error_of("a = activity(\"x\")\nb = xor(a, silent())\nfinal(a)");
        REQUIRE((e.kind() == PclErrorKind::reuse_of_submodel || e.kind() == PclErrorKind::unused_submodel));
    }
    SECTION("statements after final") {
        REQUIRE(error_of("a = activity(\"x\")\nfinal(a)\nb = activity(\"y\")").kind() == PclErrorKind::parse);
    }
    SECTION("two finals") {
        REQUIRE(error_of("a = activity(\"x\")\nfinal(a)\nfinal(a)").kind() == PclErrorKind::parse);
    }
    SECTION("reserved names cannot be assigned") {
        REQUIRE(error_of("xor = activity(\"x\")\nfinal(xor)").kind() == PclErrorKind::parse);
    }
    SECTION("invalid labels") {
        REQUIRE(error_of("a = activity(\"\")\nfinal(a)").kind() == PclErrorKind::parse);
        REQUIRE(error_of("a = activity(\"" + std::string(kMaxLabelLength + 1, 'x') + "\")\nfinal(a)").kind() ==
                PclErrorKind::parse);
    }
    SECTION("argument types") {
        REQUIRE(error_of("a = activity(42)\nfinal(a)").kind() == PclErrorKind::parse);
        REQUIRE(error_of("a = activity(\"x\")\nb = xor(a, \"y\")\nfinal(b)").kind() == PclErrorKind::parse);
        REQUIRE(error_of("a = silent(\"x\")\nfinal(a)").kind() == PclErrorKind::arity);
        REQUIRE(error_of("a = activity(\"x\")\np = partial_order([a])\nfinal(p)").kind() == PclErrorKind::arity);
    }
    SECTION("a call as a statement") {
        REQUIRE(error_of("activity(\"x\")\na = activity(\"y\")\nfinal(a)").kind() == PclErrorKind::parse);
    }
    SECTION("model too large") {
        std::string src = "p = partial_order([";
        for (std::size_t i = 0; i < kMaxModelNodes; ++i) src += (i ? ", " : "") + std::string("silent()");
        src += "], [])\nfinal(p)";
        REQUIRE(error_of(src).kind() == PclErrorKind::limit_exceeded);
    }
}

TEST_CASE("sandbox corpus yields the designated kinds", "[pcl][sandbox]") {
    const auto dir = kFixtures / "sandbox";
    const auto expected = nlohmann::json::parse(slurp(dir / "expected.json"));
    REQUIRE(expected.size() >= 20);
    for (const auto& [file, kind] : expected.items()) {
        INFO(file);
        const auto e = error_of(slurp(dir / file));
        REQUIRE(std::string(to_string(e.kind())) == kind.get<std::string>());
        REQUIRE_FALSE(e.message().empty());
    }
}

TEST_CASE("the I/O recorder sees I/O", "[pcl][sandbox]") {
    io_recorder::Scope scope;
    if (FILE* f = std::fopen("/nonexistent/promoai", "r")) std::fclose(f);
    [[maybe_unused]] const char* home = std::getenv("HOME");
    (void)std::time(nullptr);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd >= 0) ::close(fd);
    const auto events = io_recorder::events();
    auto seen = [&](std::string_view prefix) {
        return std::any_of(events.begin(), events.end(), [&](const std::string& e) { return e.starts_with(prefix); });
    };
    REQUIRE(seen("fopen(/nonexistent/promoai)"));
    REQUIRE(seen("getenv(HOME)"));
    REQUIRE(seen("time("));
    REQUIRE(seen("socket("));
}

TEST_CASE("the interpreter performs no I/O", "[pcl][sandbox]") {
    const auto dir = kFixtures / "sandbox";
    const auto expected = nlohmann::json::parse(slurp(dir / "expected.json"));
    std::vector<std::string> sources{slurp(kFixtures / "order_process" / "order_process.pcl")};
    for (const auto& [file, kind] : expected.items()) sources.push_back(slurp(dir / file));
    for (const auto& src : sources) {
        std::vector<std::string> events;
        {
            io_recorder::Scope scope;
            try {
                run_pcl(src);
            } catch (const PclError&) {
            }
            events = io_recorder::events();
        }
        INFO(src.substr(0, 60));
        REQUIRE(events.empty());
    }
}

TEST_CASE("interpretation is deterministic", "[pcl]") {
    const auto src = slurp(kFixtures / "order_process" / "order_process.pcl");
    const auto first = run_pcl(src);
    for (int i = 0; i < 5; ++i) REQUIRE(run_pcl(src) == first);
}
