#pragma once

// Translations out of POWL: workflow nets, BPMN process graphs, and the flat
// node/edge graph the UI lays out. Element ids come from the position of the
// originating node in the model tree ("root", "root.2.0", ...) plus a role
// suffix, so the same model always yields the same ids.

#include <promoai/petri_net.hpp>
#include <promoai/powl.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace promoai {

// ---------------------------------------------------------------------------
// POWL -> workflow net

namespace detail {

class PnBuilder {
  public:
    PetriNet net;

    std::string place(std::string id) {
        net.places.push_back(id);
        return id;
    }

    std::string transition(std::string id, std::optional<Label> label = std::nullopt) {
        net.transitions.push_back({id, std::move(label)});
        return id;
    }

    void arc(const std::string& from, const std::string& to) { net.arcs.push_back({from, to}); }

    // Fragment places `entry` and `exit` already exist.
    void build(const PowlNode& node, const std::string& path, const std::string& entry, const std::string& exit) {
        if (const auto* a = node.as<Activity>()) {
            link(entry, transition("t_" + path, a->label), exit);
        } else if (node.as<Silent>()) {
            link(entry, transition("t_" + path), exit);
        } else if (const auto* x = node.as<Xor>()) {
            for (std::size_t i = 0; i < x->children.size(); ++i) {
                const auto child = path + "." + std::to_string(i);
                const auto in = place("p_" + child + "_entry");
                const auto out = place("p_" + child + "_exit");
                link(entry, transition("t_" + path + "_xin" + std::to_string(i)), in);
                build(x->children[i], child, in, out);
                link(out, transition("t_" + path + "_xout" + std::to_string(i)), exit);
            }
        } else if (const auto* l = node.as<Loop>()) {
            const auto body_in = place("p_" + path + ".0_entry");
            const auto body_out = place("p_" + path + ".0_exit");
            const auto mid = place("p_" + path + "_mid");
            const auto redo_in = place("p_" + path + ".1_entry");
            const auto redo_out = place("p_" + path + ".1_exit");
            link(entry, transition("t_" + path + "_enter"), body_in);
            build(l->body, path + ".0", body_in, body_out);
            link(body_out, transition("t_" + path + "_done"), mid);
            link(mid, transition("t_" + path + "_exit"), exit);
            link(mid, transition("t_" + path + "_redo"), redo_in);
            build(l->redo, path + ".1", redo_in, redo_out);
            link(redo_out, transition("t_" + path + "_back"), entry);
        } else {
            build_partial_order(*node.as<PartialOrder>(), path, entry, exit);
        }
    }

  private:
    void link(const std::string& in, const std::string& t, const std::string& out) {
        arc(in, t);
        arc(t, out);
    }

    void build_partial_order(const PartialOrder& po, const std::string& path, const std::string& entry,
                             const std::string& exit) {
        const auto n = po.children.size();
        const auto split = transition("t_" + path + "_split");
        const auto join = transition("t_" + path + "_join");
        arc(entry, split);
        arc(join, exit);
        std::map<Edge, std::string> between;
        for (const auto& e : po.order) {
            between[e] = place("p_" + path + "_ord" + std::to_string(e.first) + "_" + std::to_string(e.second));
        }
        for (std::size_t v = 0; v < n; ++v) {
            const auto idx = std::to_string(v);
            const auto child = path + "." + idx;
            const auto go = place("p_" + path + "_go" + idx);
            const auto done = place("p_" + path + "_done" + idx);
            const auto in = place("p_" + child + "_entry");
            const auto out = place("p_" + child + "_exit");
            const auto t_in = transition("t_" + path + "_in" + idx);
            const auto t_out = transition("t_" + path + "_out" + idx);
            arc(split, go);
            arc(go, t_in);
            for (const auto& [e, p] : between) {
                if (e.second == v) arc(p, t_in);
            }
            arc(t_in, in);
            build(po.children[v], child, in, out);
            arc(out, t_out);
            for (const auto& [e, p] : between) {
                if (e.first == v) arc(t_out, p);
            }
            arc(t_out, done);
            arc(done, join);
        }
    }
};

}  // namespace detail

/// Recursive workflow-net translation. A loop at the root gets an extra
/// silent start transition so that the source place has no incoming arc.
inline PetriNet powl_to_pn(const PowlNode& model) {
    require_valid(model);
    detail::PnBuilder b;
    const auto source = b.place("p_source");
    const auto sink = b.place("p_sink");
    if (model.as<Loop>()) {
        const auto entry = b.place("p_root_entry");
        const auto start = b.transition("t_start");
        b.arc(source, start);
        b.arc(start, entry);
        b.build(model, "root", entry, sink);
    } else {
        b.build(model, "root", source, sink);
    }
    b.net.initial_place = source;
    b.net.final_place = sink;
    return std::move(b.net);
}

// ---------------------------------------------------------------------------
// POWL -> BPMN

enum class BpmnKind { start_event, end_event, task, exclusive_gateway, parallel_gateway };

inline std::string_view to_string(BpmnKind k) {
    switch (k) {
    case BpmnKind::start_event: return "start-event";
    case BpmnKind::end_event: return "end-event";
    case BpmnKind::task: return "task";
    case BpmnKind::exclusive_gateway: return "exclusive-gateway";
    case BpmnKind::parallel_gateway: return "parallel-gateway";
    }
    return "unknown";
}

struct BpmnNode {
    std::string id;
    BpmnKind kind;
    std::string label;  // tasks only
    friend bool operator==(const BpmnNode&, const BpmnNode&) = default;
};

struct BpmnFlow {
    std::string id;
    std::string source;
    std::string target;
    friend bool operator==(const BpmnFlow&, const BpmnFlow&) = default;
};

struct BpmnGraph {
    std::vector<BpmnNode> nodes;
    std::vector<BpmnFlow> flows;

    [[nodiscard]] std::size_t count(BpmnKind k) const {
        return static_cast<std::size_t>(
            std::count_if(nodes.begin(), nodes.end(), [k](const BpmnNode& n) { return n.kind == k; }));
    }
    [[nodiscard]] const BpmnNode* find(const std::string& id) const {
        for (const auto& n : nodes) {
            if (n.id == id) return &n;
        }
        return nullptr;
    }
};

/// Lists every violated BPMN graph invariant; empty means well-formed.
inline std::vector<std::string> bpmn_problems(const BpmnGraph& g) {
    std::vector<std::string> problems;
    std::map<std::string, const BpmnNode*> nodes;
    for (const auto& n : g.nodes) {
        if (!nodes.emplace(n.id, &n).second) problems.push_back("duplicate node id '" + n.id + "'");
    }
    if (g.count(BpmnKind::start_event) != 1) problems.push_back("expected exactly one start event");
    if (g.count(BpmnKind::end_event) != 1) problems.push_back("expected exactly one end event");
    std::map<std::string, std::vector<std::string>> succ, pred;
    std::set<std::string> flow_ids;
    for (const auto& f : g.flows) {
        if (!flow_ids.insert(f.id).second) problems.push_back("duplicate flow id '" + f.id + "'");
        if (!nodes.contains(f.source) || !nodes.contains(f.target)) {
            problems.push_back("flow '" + f.id + "' references a missing node");
            continue;
        }
        succ[f.source].push_back(f.target);
        pred[f.target].push_back(f.source);
    }
    std::string start, end;
    for (const auto& n : g.nodes) {
        const auto in = pred[n.id].size();
        const auto out = succ[n.id].size();
        switch (n.kind) {
        case BpmnKind::start_event:
            start = n.id;
            if (in != 0 || out != 1) problems.push_back("start event must have 0 incoming and 1 outgoing flow");
            break;
        case BpmnKind::end_event:
            end = n.id;
            if (in != 1 || out != 0) problems.push_back("end event must have 1 incoming and 0 outgoing flows");
            break;
        case BpmnKind::task:
            if (in != 1 || out != 1) problems.push_back("task '" + n.id + "' must have exactly 1 incoming and 1 outgoing flow");
            break;
        default:
            if (!((out >= 2 && in == 1) || (out == 1 && in >= 2))) {
                problems.push_back("gateway '" + n.id + "' has " + std::to_string(in) + " incoming and " +
                                   std::to_string(out) + " outgoing flows");
            }
        }
    }
    if (!start.empty() && !end.empty()) {
        auto reach = [](const std::string& from, std::map<std::string, std::vector<std::string>>& adj) {
            std::set<std::string> seen{from};
            std::vector<std::string> stack{from};
            while (!stack.empty()) {
                const auto v = stack.back();
                stack.pop_back();
                for (const auto& w : adj[v]) {
                    if (seen.insert(w).second) stack.push_back(w);
                }
            }
            return seen;
        };
        const auto fwd = reach(start, succ);
        const auto bwd = reach(end, pred);
        for (const auto& n : g.nodes) {
            if (!fwd.contains(n.id) || !bwd.contains(n.id)) {
                problems.push_back("node '" + n.id + "' is not on a path from start to end");
            }
        }
    }
    return problems;
}

namespace detail {

class BpmnBuilder {
  public:
    struct Fragment {
        std::string in;
        std::string out;
    };

    std::string node(std::string id, std::optional<BpmnKind> kind, std::string label = {}) {
        nodes_.push_back({id, kind, std::move(label)});
        return id;
    }

    void flow(const std::string& from, const std::string& to) { flows_.push_back({from, to}); }

    Fragment build(const PowlNode& n, const std::string& path) {
        if (const auto* a = n.as<Activity>()) {
            const auto id = node("task_" + path, BpmnKind::task, a->label.text());
            return {id, id};
        }
        if (n.as<Silent>()) {
            const auto id = node("tau_" + path, std::nullopt);  // elided during cleanup
            return {id, id};
        }
        if (const auto* x = n.as<Xor>()) {
            const auto split = node("xsplit_" + path, BpmnKind::exclusive_gateway);
            const auto join = node("xjoin_" + path, BpmnKind::exclusive_gateway);
            for (std::size_t i = 0; i < x->children.size(); ++i) {
                const auto f = build(x->children[i], path + "." + std::to_string(i));
                flow(split, f.in);
                flow(f.out, join);
            }
            return {split, join};
        }
        if (const auto* l = n.as<Loop>()) {
            const auto join = node("lentry_" + path, BpmnKind::exclusive_gateway);
            const auto split = node("lexit_" + path, BpmnKind::exclusive_gateway);
            const auto body = build(l->body, path + ".0");
            const auto redo = build(l->redo, path + ".1");
            flow(join, body.in);
            flow(body.out, split);
            flow(split, redo.in);
            flow(redo.out, join);
            return {join, split};
        }
        const auto& po = *n.as<PartialOrder>();
        const auto split = node("psplit_" + path, BpmnKind::parallel_gateway);
        const auto join = node("pjoin_" + path, BpmnKind::parallel_gateway);
        const auto count = po.children.size();
        std::vector<std::vector<std::size_t>> preds(count), succs(count);
        for (const auto& [u, v] : po.order) {
            succs[u].push_back(v);
            preds[v].push_back(u);
        }
        std::vector<std::string> before(count), after(count);
        for (std::size_t v = 0; v < count; ++v) {
            const auto child = path + "." + std::to_string(v);
            const auto f = build(po.children[v], child);
            before[v] = f.in;
            after[v] = f.out;
            if (!preds[v].empty()) {
                before[v] = node("pin_" + child, BpmnKind::parallel_gateway);
                flow(before[v], f.in);
            }
            if (!succs[v].empty()) {
                after[v] = node("pout_" + child, BpmnKind::parallel_gateway);
                flow(f.out, after[v]);
            }
        }
        // Only minimal children hang off the split and only maximal ones feed the join.
        for (std::size_t v = 0; v < count; ++v) {
            if (preds[v].empty()) flow(split, before[v]);
            for (auto w : succs[v]) flow(after[v], before[w]);
            if (succs[v].empty()) flow(after[v], join);
        }
        return {split, join};
    }

    BpmnGraph finish(const std::string& start, const std::string& end) {
        // Elide silent placeholders, then gateways left with one input and one output.
        for (const auto& n : nodes_) {
            if (!n.kind) bypass(n.id);
        }
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& n : nodes_) {
                if (removed_.contains(n.id) || n.id == start || n.id == end) continue;
                const bool gateway =
                    n.kind == BpmnKind::exclusive_gateway || n.kind == BpmnKind::parallel_gateway;
                if (gateway && in_degree(n.id) == 1 && out_degree(n.id) == 1) {
                    bypass(n.id);
                    changed = true;
                }
            }
        }
        BpmnGraph g;
        for (const auto& n : nodes_) {
            if (!removed_.contains(n.id)) g.nodes.push_back({n.id, *n.kind, n.label});
        }
        std::size_t counter = 0;
        for (const auto& f : flows_) {
            if (!f.dead) g.flows.push_back({"flow_" + std::to_string(++counter), f.from, f.to});
        }
        return g;
    }

  private:
    struct RawNode {
        std::string id;
        std::optional<BpmnKind> kind;
        std::string label;
    };
    struct RawFlow {
        std::string from;
        std::string to;
        bool dead = false;
    };

    std::size_t in_degree(const std::string& id) const {
        return static_cast<std::size_t>(
            std::count_if(flows_.begin(), flows_.end(), [&](const RawFlow& f) { return !f.dead && f.to == id; }));
    }
    std::size_t out_degree(const std::string& id) const {
        return static_cast<std::size_t>(
            std::count_if(flows_.begin(), flows_.end(), [&](const RawFlow& f) { return !f.dead && f.from == id; }));
    }

    // Node with exactly one incoming and one outgoing flow: splice it out.
    void bypass(const std::string& id) {
        RawFlow* in = nullptr;
        RawFlow* out = nullptr;
        for (auto& f : flows_) {
            if (f.dead) continue;
            if (f.to == id) in = &f;
            if (f.from == id) out = &f;
        }
        in->to = out->to;
        out->dead = true;
        removed_.insert(id);
    }

    std::vector<RawNode> nodes_;
    std::vector<RawFlow> flows_;
    std::set<std::string> removed_;
};

}  // namespace detail

/// start -> model fragment -> end. Silent steps become direct flows, and
/// gateways with a single input and output are removed.
inline BpmnGraph powl_to_bpmn(const PowlNode& model) {
    require_valid(model);
    detail::BpmnBuilder b;
    const auto start = b.node("start", BpmnKind::start_event);
    const auto end = b.node("end", BpmnKind::end_event);
    const auto f = b.build(model, "root");
    b.flow(start, f.in);
    b.flow(f.out, end);
    return b.finish(start, end);
}

// ---------------------------------------------------------------------------
// Render graph

enum class RenderView { pn, bpmn };

struct RenderNode {
    std::string id;
    std::string kind;
    std::string label;
    std::size_t rank = 0;
};

struct RenderEdge {
    std::string source;
    std::string target;
};

struct RenderGraph {
    std::vector<RenderNode> nodes;
    std::vector<RenderEdge> edges;
};

namespace detail {

// Longest-path layer from `start`, ignoring edges that close a cycle in a
// depth-first traversal (loop back edges).
inline void assign_ranks(RenderGraph& g, const std::string& start) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].id, i);
    const auto n = g.nodes.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out(n);  // (target, edge)
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        out[index.at(g.edges[e].source)].emplace_back(index.at(g.edges[e].target), e);
    }
    std::vector<bool> back(g.edges.size(), false);
    enum : char { white, grey, black };
    std::vector<char> color(n, white);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{index.at(start), 0}};
    color[index.at(start)] = grey;
    while (!stack.empty()) {
        auto& [v, next] = stack.back();
        if (next == out[v].size()) {
            color[v] = black;
            stack.pop_back();
            continue;
        }
        const auto [w, e] = out[v][next++];
        if (color[w] == grey) {
            back[e] = true;
        } else if (color[w] == white) {
            color[w] = grey;
            stack.emplace_back(w, 0);
        }
    }
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (!back[e]) ++indegree[index.at(g.edges[e].target)];
    }
    std::vector<std::size_t> ready;
    for (std::size_t v = 0; v < n; ++v) {
        if (indegree[v] == 0) ready.push_back(v);
    }
    while (!ready.empty()) {
        const auto v = ready.back();
        ready.pop_back();
        for (const auto& [w, e] : out[v]) {
            if (back[e]) continue;
            g.nodes[w].rank = std::max(g.nodes[w].rank, g.nodes[v].rank + 1);
            if (--indegree[w] == 0) ready.push_back(w);
        }
    }
}

}  // namespace detail

inline RenderGraph to_render_graph(const PowlNode& model, RenderView view) {
    RenderGraph g;
    if (view == RenderView::bpmn) {
        const auto bpmn = powl_to_bpmn(model);
        for (const auto& n : bpmn.nodes) g.nodes.push_back({n.id, std::string(to_string(n.kind)), n.label, 0});
        for (const auto& f : bpmn.flows) g.edges.push_back({f.source, f.target});
        detail::assign_ranks(g, "start");
    } else {
        const auto net = powl_to_pn(model);
        for (const auto& p : net.places) g.nodes.push_back({p, "place", "", 0});
        for (const auto& t : net.transitions) {
            if (t.label) {
                g.nodes.push_back({t.id, "transition", t.label->text(), 0});
            } else {
                g.nodes.push_back({t.id, "silent-transition", "", 0});
            }
        }
        for (const auto& a : net.arcs) g.edges.push_back({a.source, a.target});
        detail::assign_ranks(g, net.initial_place);
    }
    return g;
}

}  // namespace promoai
