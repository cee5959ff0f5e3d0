#include <promoai/convert.hpp>
#include <promoai/semantics.hpp>
#include <promoai/serialize.hpp>

#include "random_models.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace promoai;

namespace {

PowlNode act(const char* label) { return make_activity(label); }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

PowlNode order_process() {
    return run_pcl(slurp(std::filesystem::path(PROMOAI_FIXTURE_DIR) / "order_process" / "order_process.pcl"));
}

FormatErrorKind pnml_error(const std::string& doc) {
    try {
        pnml_import(doc);
    } catch (const FormatError& e) {
        return e.kind();
    }
    FAIL("document was accepted");
    throw std::logic_error("unreachable");
}

FormatErrorKind json_error(const std::string& doc) {
    try {
        powl_json_import(doc);
    } catch (const FormatError& e) {
        return e.kind();
    }
    FAIL("document was accepted");
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("PNML export", "[serialize][pnml]") {
    const auto doc = pnml_export(powl_to_pn(make_xor({act("a & b"), make_silent()})));
    REQUIRE(doc.find(std::string(kPtNetType)) != std::string::npos);
    REQUIRE(doc.find("<text>a &amp; b</text>") != std::string::npos);
    REQUIRE(doc.find("<initialMarking>") != std::string::npos);
    REQUIRE(pnml_export(powl_to_pn(order_process())) == pnml_export(powl_to_pn(order_process())));
}

TEST_CASE("PNML import of documents written elsewhere", "[serialize][pnml]") {
    SECTION("nested pages, tool-specific data, no initial marking") {
        const std::string doc = R"(<?xml version="1.0"?>
<pnml xmlns="http://www.pnml.org/version-2009/grammar/pnml">
  <net id="n" type="http://www.pnml.org/version-2009/grammar/ptnet">
    <page id="outer">
      <place id="start"/>
      <page id="inner">
        <transition id="t1"><name><text>check order</text></name></transition>
        <transition id="tau"><toolspecific tool="x" version="1"/></transition>
        <place id="mid"/>
      </page>
      <place id="end"/>
      <arc id="a1" source="start" target="t1"/>
      <arc id="a2" source="t1" target="mid"/>
      <arc id="a3" source="mid" target="tau"/>
      <arc id="a4" source="tau" target="end"/>
    </page>
  </net>
</pnml>)";
        const auto net = pnml_import(doc);
        REQUIRE(net.initial_place == "start");
        REQUIRE(net.final_place == "end");
        REQUIRE(net.find_transition("t1")->label->text() == "check order");
        REQUIRE(net.find_transition("tau")->silent());
        REQUIRE(pn_traces(net, 3).traces == TraceSet{{"check order"}});
    }
    SECTION("malformed XML") {
        REQUIRE(pnml_error("<pnml><net>") == FormatErrorKind::malformed_xml);
        REQUIRE(pnml_error("<other/>") == FormatErrorKind::malformed_xml);
    }
    SECTION("two sinks") {
        const std::string doc = R"(<pnml><net id="n"><page id="p">
  <place id="i"><initialMarking><text>1</text></initialMarking></place>
  <place id="o1"/><place id="o2"/>
  <transition id="t"/>
  <arc id="a" source="i" target="t"/><arc id="b" source="t" target="o1"/><arc id="c" source="t" target="o2"/>
</page></net></pnml>)";
        REQUIRE(pnml_error(doc) == FormatErrorKind::invalid_net);
    }
    SECTION("disconnected transition") {
        const std::string doc = R"(<pnml><net id="n"><page id="p">
  <place id="i"/><place id="o"/>
  <transition id="t"/><transition id="lost"/>
  <arc id="a" source="i" target="t"/><arc id="b" source="t" target="o"/>
</page></net></pnml>)";
        REQUIRE(pnml_error(doc) == FormatErrorKind::invalid_net);
    }
}

TEST_CASE("PNML round trip on random models", "[serialize][pnml][property]") {
    testing::RandomModels gen(31);
    for (int i = 0; i < 200; ++i) {
        const auto net = powl_to_pn(gen.next());
        const auto back = pnml_import(pnml_export(net));
        REQUIRE(structurally_equal(net, back));
        REQUIRE(pnml_export(back) == pnml_export(net));
    }
}

TEST_CASE("BPMN export is referentially intact", "[serialize][bpmn]") {
    const auto graph = powl_to_bpmn(order_process());
    const auto doc = bpmn_export(graph);
    REQUIRE(doc.find(std::string(kBpmnNamespace)) != std::string::npos);
    const auto summary = bpmn_check_references(doc);
    REQUIRE(summary.problems.empty());
    REQUIRE(summary.element_counts.at("task") == 8);
    REQUIRE(summary.element_counts.at("sequenceFlow") == graph.flows.size());
    REQUIRE(summary.element_counts.at("startEvent") == 1);
    REQUIRE(summary.element_counts.at("endEvent") == 1);

    SECTION("a dangling reference is found") {
        auto broken = doc;
        const auto at = broken.find("targetRef=\"end\"");
        REQUIRE(at != std::string::npos);
        broken.replace(at, 15, "targetRef=\"nowhere\"");
        REQUIRE_FALSE(bpmn_check_references(broken).problems.empty());
    }
    SECTION("random models") {
        testing::RandomModels gen(5);
        for (int i = 0; i < 100; ++i) REQUIRE(bpmn_check_references(bpmn_export(powl_to_bpmn(gen.next()))).problems.empty());
    }
}

TEST_CASE("PCL emission", "[serialize][pcl]") {
    SECTION("post-order numbering") {
        REQUIRE(emit_pcl(make_xor({act("a"), make_silent()})) ==
                "n0 = activity(\"a\")\nn1 = silent()\nn2 = xor(n0, n1)\nfinal(n2)\n");
    }
    SECTION("labels with quotes and backslashes") {
        const auto m = act("say \"hi\" \\o/");
        REQUIRE(run_pcl(emit_pcl(m)) == m);
    }
    SECTION("depth-4 random models round trip") {
        testing::RandomModelOptions options;
        options.max_depth = 4;
        testing::RandomModels gen(17, options);
        for (int i = 0; i < 200; ++i) {
            const auto m = gen.next();
            INFO(to_text(m));
            REQUIRE(run_pcl(emit_pcl(m)) == m);
        }
    }
}

TEST_CASE("JSON model documents", "[serialize][json]") {
    SECTION("shape") {
        const auto j = powl_to_json(make_partial_order({act("a"), make_loop(act("b"), make_silent())}, {{0, 1}}));
        REQUIRE(j["type"] == "partial_order");
        REQUIRE(j["children"][1]["type"] == "loop");
        REQUIRE(j["children"][1]["redo"]["type"] == "silent");
        REQUIRE(j["order"] == nlohmann::json::parse("[[0, 1]]"));
    }
    SECTION("round trip") {
        testing::RandomModelOptions options;
        options.max_depth = 4;
        testing::RandomModels gen(23, options);
        for (int i = 0; i < 200; ++i) {
            const auto m = gen.next();
            REQUIRE(powl_json_import(powl_json_export(m)) == m);
        }
    }
    SECTION("errors") {
        REQUIRE(json_error("{") == FormatErrorKind::malformed_document);
        REQUIRE(json_error(R"({"type": "sequence", "children": []})") == FormatErrorKind::malformed_document);
        REQUIRE(json_error(R"({"type": "loop", "do": {"type": "silent"}})") == FormatErrorKind::malformed_document);
        REQUIRE(json_error(R"({"type": "activity", "label": ""})") == FormatErrorKind::invariant_violation);
        REQUIRE(json_error(R"({"type": "xor", "children": [{"type": "silent"}]})") ==
                FormatErrorKind::invariant_violation);
        REQUIRE(json_error(R"({"type": "partial_order", "children": [{"type": "silent"}, {"type": "silent"}],
                                "order": [[0, 1], [1, 0]]})") == FormatErrorKind::invariant_violation);
        REQUIRE(json_error(R"({"type": "partial_order", "children": [{"type": "silent"}], "order": [[0, -1]]})") ==
                FormatErrorKind::malformed_document);
    }
}
