#pragma once

// File formats: PNML (export + import), BPMN 2.0 XML (export + reference
// check), PCL text emission and the JSON model document (.powl.json).

#include <promoai/convert.hpp>
#include <promoai/pcl.hpp>
#include <promoai/petri_net.hpp>
#include <promoai/powl.hpp>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace promoai {

enum class FormatErrorKind { malformed_xml, invalid_net, malformed_document, invariant_violation };

inline std::string_view to_string(FormatErrorKind k) {
    switch (k) {
    case FormatErrorKind::malformed_xml: return "malformed-xml";
    case FormatErrorKind::invalid_net: return "invalid-net";
    case FormatErrorKind::malformed_document: return "malformed-document";
    case FormatErrorKind::invariant_violation: return "invariant-violation";
    }
    return "unknown";
}

class FormatError : public std::runtime_error {
  public:
    FormatError(FormatErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    [[nodiscard]] FormatErrorKind kind() const noexcept { return kind_; }

  private:
    FormatErrorKind kind_;
};

inline constexpr std::string_view kPtNetType = "http://www.pnml.org/version-2009/grammar/ptnet";
inline constexpr std::string_view kBpmnNamespace = "http://www.omg.org/spec/BPMN/20100524/MODEL";

namespace xml {

inline std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

using boost::property_tree::ptree;

inline ptree parse(const std::string& text) {
    ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::read_xml(in, tree, boost::property_tree::xml_parser::trim_whitespace);
    } catch (const boost::property_tree::xml_parser_error& e) {
        throw FormatError(FormatErrorKind::malformed_xml, std::string("XML parse error: ") + e.message() +
                                                              " at line " + std::to_string(e.line()));
    }
    return tree;
}

inline std::string attr(const ptree& node, const std::string& name) {
    return node.get<std::string>("<xmlattr>." + name, "");
}

}  // namespace xml

// ---------------------------------------------------------------------------
// PNML

/// Single-page place/transition net. Silent transitions carry no name.
inline std::string pnml_export(const PetriNet& net) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<pnml>\n";
    out << "  <net id=\"net1\" type=\"" << kPtNetType << "\">\n";
    out << "    <name>\n      <text>generated process model</text>\n    </name>\n";
    out << "    <page id=\"page1\">\n";
    for (const auto& p : net.places) {
        out << "      <place id=\"" << xml::escape(p) << "\">\n";
        out << "        <name>\n          <text>" << xml::escape(p) << "</text>\n        </name>\n";
        if (p == net.initial_place) out << "        <initialMarking>\n          <text>1</text>\n        </initialMarking>\n";
        out << "      </place>\n";
    }
    for (const auto& t : net.transitions) {
        if (t.label) {
            out << "      <transition id=\"" << xml::escape(t.id) << "\">\n";
            out << "        <name>\n          <text>" << xml::escape(t.label->text()) << "</text>\n        </name>\n";
            out << "      </transition>\n";
        } else {
            out << "      <transition id=\"" << xml::escape(t.id) << "\"/>\n";
        }
    }
    std::size_t n = 0;
    for (const auto& a : net.arcs) {
        out << "      <arc id=\"arc" << ++n << "\" source=\"" << xml::escape(a.source) << "\" target=\""
            << xml::escape(a.target) << "\"/>\n";
    }
    out << "    </page>\n";
    out << "  </net>\n";
    out << "</pnml>\n";
    return out.str();
}

namespace detail {

inline void collect_pnml(const xml::ptree& container, PetriNet& net, std::map<std::string, unsigned>& marking) {
    for (const auto& [tag, child] : container) {
        if (tag == "place") {
            const auto id = xml::attr(child, "id");
            if (id.empty()) throw FormatError(FormatErrorKind::malformed_xml, "place without id");
            net.places.push_back(id);
            if (const auto m = child.get_optional<std::string>("initialMarking.text")) {
                try {
                    marking[id] = static_cast<unsigned>(std::stoul(*m));
                } catch (const std::exception&) {
                    throw FormatError(FormatErrorKind::malformed_xml, "initial marking of '" + id + "' is not a number");
                }
            }
        } else if (tag == "transition") {
            const auto id = xml::attr(child, "id");
            if (id.empty()) throw FormatError(FormatErrorKind::malformed_xml, "transition without id");
            Transition t{id, std::nullopt};
            if (const auto name = child.get_optional<std::string>("name.text"); name && !name->empty()) {
                try {
                    t.label = Label::make(*name);
                } catch (const ModelError& e) {
                    throw FormatError(FormatErrorKind::invalid_net, "transition '" + id + "': " + e.what());
                }
            }
            net.transitions.push_back(std::move(t));
        } else if (tag == "arc") {
            const auto source = xml::attr(child, "source");
            const auto target = xml::attr(child, "target");
            if (source.empty() || target.empty()) {
                throw FormatError(FormatErrorKind::malformed_xml, "arc without source or target");
            }
            net.arcs.push_back({source, target});
        } else if (tag == "page") {
            collect_pnml(child, net, marking);
        }
    }
}

}  // namespace detail

/// Reads the first net of a PNML document. The initial place is the marked
/// one; the final place is the unique place without outgoing arcs.
inline PetriNet pnml_import(const std::string& text) {
    const auto tree = xml::parse(text);
    const auto root = tree.get_child_optional("pnml");
    if (!root) throw FormatError(FormatErrorKind::malformed_xml, "document has no <pnml> root element");
    const auto net_node = root->get_child_optional("net");
    if (!net_node) throw FormatError(FormatErrorKind::malformed_xml, "document has no <net> element");

    PetriNet net;
    std::map<std::string, unsigned> marking;
    detail::collect_pnml(*net_node, net, marking);

    std::set<std::string> has_out, has_in;
    for (const auto& a : net.arcs) {
        has_out.insert(a.source);
        has_in.insert(a.target);
    }
    std::vector<std::string> marked, sinks, sources;
    for (const auto& p : net.places) {
        if (auto it = marking.find(p); it != marking.end() && it->second > 0) {
            if (it->second != 1) {
                throw FormatError(FormatErrorKind::invalid_net, "place '" + p + "' starts with more than one token");
            }
            marked.push_back(p);
        }
        if (!has_out.contains(p)) sinks.push_back(p);
        if (!has_in.contains(p)) sources.push_back(p);
    }
    if (marked.size() > 1) throw FormatError(FormatErrorKind::invalid_net, "more than one initially marked place");
    if (marked.empty()) {
        if (sources.size() != 1) {
            throw FormatError(FormatErrorKind::invalid_net,
                              "no initial marking and " + std::to_string(sources.size()) + " source places");
        }
        marked = sources;
    }
    if (sinks.size() != 1) {
        throw FormatError(FormatErrorKind::invalid_net,
                          "expected exactly one place without outgoing arcs, found " + std::to_string(sinks.size()));
    }
    net.initial_place = marked.front();
    net.final_place = sinks.front();
    if (const auto problems = net_problems(net); !problems.empty()) {
        throw FormatError(FormatErrorKind::invalid_net, "not a workflow net: " + problems.front());
    }
    return net;
}

// ---------------------------------------------------------------------------
// BPMN

/// Semantic BPMN 2.0 XML without diagram interchange.
inline std::string bpmn_export(const BpmnGraph& graph) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<definitions xmlns=\"" << kBpmnNamespace
        << "\" id=\"definitions\" targetNamespace=\"http://promoai.local/bpmn\">\n";
    out << "  <process id=\"process\" isExecutable=\"false\">\n";
    for (const auto& n : graph.nodes) {
        const auto id = xml::escape(n.id);
        switch (n.kind) {
        case BpmnKind::start_event: out << "    <startEvent id=\"" << id << "\"/>\n"; break;
        case BpmnKind::end_event: out << "    <endEvent id=\"" << id << "\"/>\n"; break;
        case BpmnKind::task:
            out << "    <task id=\"" << id << "\" name=\"" << xml::escape(n.label) << "\"/>\n";
            break;
        case BpmnKind::exclusive_gateway: out << "    <exclusiveGateway id=\"" << id << "\"/>\n"; break;
        case BpmnKind::parallel_gateway: out << "    <parallelGateway id=\"" << id << "\"/>\n"; break;
        }
    }
    for (const auto& f : graph.flows) {
        out << "    <sequenceFlow id=\"" << xml::escape(f.id) << "\" sourceRef=\"" << xml::escape(f.source)
            << "\" targetRef=\"" << xml::escape(f.target) << "\"/>\n";
    }
    out << "  </process>\n";
    out << "</definitions>\n";
    return out.str();
}

struct BpmnDocumentSummary {
    std::map<std::string, std::size_t> element_counts;  // by tag name
    std::vector<std::string> problems;                    // unresolved refs, duplicate ids, unknown tags
};

/// Re-parses a BPMN document and checks that every sequence flow's
/// sourceRef/targetRef names an element of the process.
inline BpmnDocumentSummary bpmn_check_references(const std::string& text) {
    static const std::set<std::string> vocabulary{"startEvent",       "endEvent",        "task",
                                                  "exclusiveGateway", "parallelGateway", "sequenceFlow"};
    const auto tree = xml::parse(text);
    const auto defs = tree.get_child_optional("definitions");
    if (!defs) throw FormatError(FormatErrorKind::malformed_xml, "document has no <definitions> root element");
    const auto process = defs->get_child_optional("process");
    if (!process) throw FormatError(FormatErrorKind::malformed_xml, "document has no <process> element");

    BpmnDocumentSummary summary;
    std::set<std::string> ids;
    std::vector<std::pair<std::string, std::string>> refs;
    for (const auto& [tag, child] : *process) {
        if (tag == "<xmlattr>") continue;
        if (!vocabulary.contains(tag)) summary.problems.push_back("unexpected element <" + tag + ">");
        ++summary.element_counts[tag];
        const auto id = xml::attr(child, "id");
        if (id.empty()) summary.problems.push_back("<" + tag + "> without id");
        if (!ids.insert(id).second) summary.problems.push_back("duplicate id '" + id + "'");
        if (tag == "sequenceFlow") refs.emplace_back(xml::attr(child, "sourceRef"), xml::attr(child, "targetRef"));
    }
    for (const auto& [src, tgt] : refs) {
        if (!ids.contains(src)) summary.problems.push_back("sourceRef '" + src + "' does not resolve");
        if (!ids.contains(tgt)) summary.problems.push_back("targetRef '" + tgt + "' does not resolve");
    }
    return summary;
}

// ---------------------------------------------------------------------------
// PCL text

namespace detail {

inline std::string pcl_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string emit_node(const PowlNode& node, std::vector<std::string>& lines) {
    std::string rhs;
    if (const auto* a = node.as<Activity>()) {
        rhs = "activity(" + pcl_string(a->label.text()) + ")";
    } else if (node.as<Silent>()) {
        rhs = "silent()";
    } else if (const auto* x = node.as<Xor>()) {
        rhs = "xor(";
        for (std::size_t i = 0; i < x->children.size(); ++i) rhs += (i ? ", " : "") + emit_node(x->children[i], lines);
        rhs += ")";
    } else if (const auto* l = node.as<Loop>()) {
        const auto body = emit_node(l->body, lines);
        const auto redo = emit_node(l->redo, lines);
        rhs = "loop(" + body + ", " + redo + ")";
    } else {
        const auto& po = *node.as<PartialOrder>();
        rhs = "partial_order([";
        for (std::size_t i = 0; i < po.children.size(); ++i) rhs += (i ? ", " : "") + emit_node(po.children[i], lines);
        rhs += "], [";
        bool first = true;
        for (const auto& [u, v] : po.order) {
            rhs += (first ? "" : ", ") + format_edge({u, v});
            first = false;
        }
        rhs += "])";
    }
    auto name = "n" + std::to_string(lines.size());
    lines.push_back(name + " = " + rhs);
    return name;
}

}  // namespace detail

/// One statement per node, identifiers n0, n1, ... in post-order.
inline std::string emit_pcl(const PowlNode& model) {
    std::vector<std::string> lines;
    const auto root = detail::emit_node(model, lines);
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    out += "final(" + root + ")\n";
    return out;
}

// ---------------------------------------------------------------------------
// JSON model document

inline nlohmann::json powl_to_json(const PowlNode& node) {
    using nlohmann::json;
    if (const auto* a = node.as<Activity>()) return json{{"type", "activity"}, {"label", a->label.text()}};
    if (node.as<Silent>()) return json{{"type", "silent"}};
    if (const auto* x = node.as<Xor>()) {
        json children = json::array();
        for (const auto& c : x->children) children.push_back(powl_to_json(c));
        return json{{"type", "xor"}, {"children", std::move(children)}};
    }
    if (const auto* l = node.as<Loop>()) {
        return json{{"type", "loop"}, {"do", powl_to_json(l->body)}, {"redo", powl_to_json(l->redo)}};
    }
    const auto& po = *node.as<PartialOrder>();
    json children = json::array();
    for (const auto& c : po.children) children.push_back(powl_to_json(c));
    json order = json::array();
    for (const auto& [u, v] : po.order) order.push_back(json::array({u, v}));
    return json{{"type", "partial_order"}, {"children", std::move(children)}, {"order", std::move(order)}};
}

namespace detail {

inline PowlNode powl_from_json(const nlohmann::json& j, const std::string& path) {
    auto bad = [&](const std::string& why) {
        return FormatError(FormatErrorKind::malformed_document, path + ": " + why);
    };
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw bad("expected an object with a \"type\"");
    const auto type = j["type"].get<std::string>();
    auto children = [&]() {
        if (!j.contains("children") || !j["children"].is_array()) throw bad("\"children\" must be an array");
        std::vector<PowlNode> out;
        for (std::size_t i = 0; i < j["children"].size(); ++i) {
            out.push_back(powl_from_json(j["children"][i], path + "." + std::to_string(i)));
        }
        return out;
    };
    if (type == "activity") {
        if (!j.contains("label") || !j["label"].is_string()) throw bad("activity needs a string \"label\"");
        try {
            return PowlNode::from_raw(Activity{Label::make(j["label"].get<std::string>())});
        } catch (const ModelError& e) {
            throw FormatError(FormatErrorKind::invariant_violation, path + ": " + e.what());
        }
    }
    if (type == "silent") return PowlNode::from_raw(Silent{});
    if (type == "xor") return PowlNode::from_raw(Xor{children()});
    if (type == "loop") {
        if (!j.contains("do") || !j.contains("redo")) throw bad("loop needs \"do\" and \"redo\"");
        return PowlNode::from_raw(Loop{powl_from_json(j["do"], path + ".0"), powl_from_json(j["redo"], path + ".1")});
    }
    if (type == "partial_order") {
        auto kids = children();
        if (!j.contains("order") || !j["order"].is_array()) throw bad("\"order\" must be an array");
        EdgeSet order;
        for (const auto& e : j["order"]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
                throw bad("order entries must be pairs of non-negative integers");
            }
            order.emplace(e[0].get<std::size_t>(), e[1].get<std::size_t>());
        }
        return PowlNode::from_raw(PartialOrder{std::move(kids), std::move(order)});
    }
    throw bad("unknown node type \"" + type + "\"");
}

}  // namespace detail

/// Lossless import; the result is re-validated.
inline PowlNode powl_from_json(const nlohmann::json& doc) {
    auto model = detail::powl_from_json(doc, "root");
    if (auto report = validate(model); !report.ok()) {
        throw FormatError(FormatErrorKind::invariant_violation,
                          report.violations.front().path + ": " + report.violations.front().message);
    }
    return model;
}

inline std::string powl_json_export(const PowlNode& model) { return powl_to_json(model).dump(2) + "\n"; }

inline PowlNode powl_json_import(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(FormatErrorKind::malformed_document, std::string("JSON parse error: ") + e.what());
    }
    return powl_from_json(doc);
}

}  // namespace promoai
