#pragma once

#include <promoai/powl.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace promoai {

struct Transition {
    std::string id;
    std::optional<Label> label;  // nullopt: silent

    [[nodiscard]] bool silent() const noexcept { return !label.has_value(); }
    friend bool operator==(const Transition&, const Transition&) = default;
    friend auto operator<=>(const Transition& a, const Transition& b) {
        return std::tie(a.id, a.label) <=> std::tie(b.id, b.label);
    }
};

struct Arc {
    std::string source;
    std::string target;
    friend bool operator==(const Arc&, const Arc&) = default;
    friend auto operator<=>(const Arc&, const Arc&) = default;
};

/// Workflow net: one source place, one sink place, every node on a
/// source-to-sink path. Arcs have weight 1.
struct PetriNet {
    std::vector<std::string> places;
    std::vector<Transition> transitions;
    std::vector<Arc> arcs;
    std::string initial_place;
    std::string final_place;

    [[nodiscard]] const Transition* find_transition(const std::string& id) const {
        for (const auto& t : transitions) {
            if (t.id == id) return &t;
        }
        return nullptr;
    }
};

/// Structural equality: same place, transition and arc sets regardless of order.
inline bool structurally_equal(const PetriNet& a, const PetriNet& b) {
    auto sorted = [](auto v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    return a.initial_place == b.initial_place && a.final_place == b.final_place &&
           sorted(a.places) == sorted(b.places) && sorted(a.transitions) == sorted(b.transitions) &&
           sorted(a.arcs) == sorted(b.arcs);
}

/// Lists every violated workflow-net invariant; empty means the net is valid.
inline std::vector<std::string> net_problems(const PetriNet& net) {
    std::vector<std::string> problems;
    std::set<std::string> places(net.places.begin(), net.places.end());
    std::set<std::string> transitions;
    if (places.size() != net.places.size()) problems.push_back("duplicate place id");
    for (const auto& t : net.transitions) {
        if (!transitions.insert(t.id).second) problems.push_back("duplicate transition id '" + t.id + "'");
        if (places.contains(t.id)) problems.push_back("id '" + t.id + "' used for both a place and a transition");
    }
    if (!places.contains(net.initial_place)) problems.push_back("initial place '" + net.initial_place + "' missing");
    if (!places.contains(net.final_place)) problems.push_back("final place '" + net.final_place + "' missing");
    if (!problems.empty()) return problems;

    std::map<std::string, std::vector<std::string>> succ, pred;
    for (const auto& a : net.arcs) {
        const bool pt = places.contains(a.source) && transitions.contains(a.target);
        const bool tp = transitions.contains(a.source) && places.contains(a.target);
        if (!pt && !tp) {
            problems.push_back("arc " + a.source + " -> " + a.target + " does not connect a place and a transition");
            continue;
        }
        succ[a.source].push_back(a.target);
        pred[a.target].push_back(a.source);
    }
    if (!pred[net.initial_place].empty()) problems.push_back("initial place has incoming arcs");
    if (!succ[net.final_place].empty()) problems.push_back("final place has outgoing arcs");

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
    const auto forward = reach(net.initial_place, succ);
    const auto backward = reach(net.final_place, pred);
    auto check_node = [&](const std::string& id) {
        if (!forward.contains(id) || !backward.contains(id)) {
            problems.push_back("node '" + id + "' is not on a path from the initial to the final place");
        }
    };
    for (const auto& p : net.places) check_node(p);
    for (const auto& t : net.transitions) check_node(t.id);
    return problems;
}

namespace detail {

/// Index-based view of a net for state-space exploration.
struct NetIndex {
    std::unordered_map<std::string, std::size_t> place_of;
    std::unordered_map<std::string, std::size_t> transition_of;
    std::vector<std::vector<std::size_t>> pre;   // per transition: input places
    std::vector<std::vector<std::size_t>> post;  // per transition: output places
    std::vector<std::vector<std::size_t>> consumers;  // per place: transitions with it as input
    std::size_t source = 0;
    std::size_t sink = 0;

    explicit NetIndex(const PetriNet& net) {
        for (std::size_t i = 0; i < net.places.size(); ++i) place_of.emplace(net.places[i], i);
        for (std::size_t i = 0; i < net.transitions.size(); ++i) transition_of.emplace(net.transitions[i].id, i);
        pre.resize(net.transitions.size());
        post.resize(net.transitions.size());
        consumers.resize(net.places.size());
        std::set<Arc> unique(net.arcs.begin(), net.arcs.end());
        for (const auto& a : unique) {
            if (auto p = place_of.find(a.source); p != place_of.end()) {
                if (auto t = transition_of.find(a.target); t != transition_of.end()) {
                    pre[t->second].push_back(p->second);
                    consumers[p->second].push_back(t->second);
                }
            } else if (auto t = transition_of.find(a.source); t != transition_of.end()) {
                if (auto q = place_of.find(a.target); q != place_of.end()) post[t->second].push_back(q->second);
            }
        }
        for (auto& c : consumers) {
            std::sort(c.begin(), c.end());
            c.erase(std::unique(c.begin(), c.end()), c.end());
        }
        source = place_of.at(net.initial_place);
        sink = place_of.at(net.final_place);
    }
};

}  // namespace detail

}  // namespace promoai
