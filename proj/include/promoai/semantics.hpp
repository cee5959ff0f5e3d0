#pragma once

// Executable semantics: a direct trace-language oracle for POWL models, the
// Petri net token game, bounded trace enumeration over nets, and workflow-net
// soundness checking by reachability-graph exploration.

#include <promoai/petri_net.hpp>
#include <promoai/powl.hpp>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace promoai {

inline constexpr std::size_t kMaxOracleLength = 12;
inline constexpr std::size_t kDefaultTraceCap = 100'000;
inline constexpr std::size_t kDefaultStateBudget = 200'000;

using Trace = std::vector<std::string>;
using TraceSet = std::set<Trace>;
using Marking = std::map<std::string, unsigned>;

enum class SemanticsErrorKind { cap_exceeded, not_enabled, invalid_argument };

class SemanticsError : public std::runtime_error {
  public:
    SemanticsError(SemanticsErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    [[nodiscard]] SemanticsErrorKind kind() const noexcept { return kind_; }

  private:
    SemanticsErrorKind kind_;
};

// ---------------------------------------------------------------------------
// POWL trace oracle

namespace detail {

using SymTrace = std::vector<std::uint32_t>;
using SymTraceSet = std::set<SymTrace>;

class TraceOracle {
  public:
    TraceOracle(std::size_t max_len, std::size_t cap) : max_len_(max_len), cap_(cap) {}

    SymTraceSet language(const PowlNode& node) {
        if (const auto* a = node.as<Activity>()) {
            if (max_len_ == 0) return {};
            return {{intern(a->label.text())}};
        }
        if (node.as<Silent>()) return {{}};
        if (const auto* x = node.as<Xor>()) {
            SymTraceSet out;
            for (const auto& c : x->children) {
                for (auto& t : language(c)) insert(out, std::move(t));
            }
            return out;
        }
        if (const auto* l = node.as<Loop>()) return loop(language(l->body), language(l->redo));
        return partial_order(*node.as<PartialOrder>());
    }

    [[nodiscard]] Trace decode(const SymTrace& t) const {
        Trace out;
        out.reserve(t.size());
        for (auto s : t) out.push_back(labels_[s]);
        return out;
    }

  private:
    std::uint32_t intern(const std::string& label) {
        auto [it, fresh] = ids_.try_emplace(label, static_cast<std::uint32_t>(labels_.size()));
        if (fresh) labels_.push_back(label);
        return it->second;
    }

    void insert(SymTraceSet& set, SymTrace t) {
        set.insert(std::move(t));
        if (set.size() > cap_) {
            throw SemanticsError(SemanticsErrorKind::cap_exceeded,
                                 "trace set exceeds the cap of " + std::to_string(cap_) + " traces");
        }
    }

    SymTraceSet concat(const SymTraceSet& a, const SymTraceSet& b) {
        SymTraceSet out;
        for (const auto& x : a) {
            for (const auto& y : b) {
                if (x.size() + y.size() > max_len_) continue;
                SymTrace t = x;
                t.insert(t.end(), y.begin(), y.end());
                insert(out, std::move(t));
            }
        }
        return out;
    }

    // do (redo do)^k, k >= 0, bounded by max_len
    SymTraceSet loop(const SymTraceSet& body, const SymTraceSet& redo) {
        const auto redo_body = concat(redo, body);
        SymTraceSet result = body;
        SymTraceSet frontier = body;
        while (!frontier.empty()) {
            SymTraceSet fresh;
            for (auto& t : concat(frontier, redo_body)) {
                if (!result.contains(t)) fresh.insert(t);
            }
            for (const auto& t : fresh) insert(result, t);
            frontier = std::move(fresh);
        }
        return result;
    }

    SymTraceSet partial_order(const PartialOrder& po) {
        const auto n = po.children.size();
        std::vector<std::vector<SymTrace>> options(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto lang = language(po.children[i]);
            options[i].assign(lang.begin(), lang.end());
            if (options[i].empty()) return {};
        }
        std::vector<std::vector<std::size_t>> preds(n);
        for (const auto& [from, to] : transitive_closure(po.order, n)) preds[to].push_back(from);

        SymTraceSet out;
        std::vector<const SymTrace*> chosen(n);
        std::function<void(std::size_t, std::size_t)> choose = [&](std::size_t i, std::size_t used) {
            if (i == n) {
                interleave(chosen, preds, out);
                return;
            }
            for (const auto& t : options[i]) {
                if (used + t.size() > max_len_) continue;
                chosen[i] = &t;
                choose(i + 1, used + t.size());
            }
        };
        choose(0, 0);
        return out;
    }

    // All merges of one trace per child in which a child only starts once
    // every predecessor in the order has emitted its whole trace.
    void interleave(const std::vector<const SymTrace*>& traces, const std::vector<std::vector<std::size_t>>& preds,
                    SymTraceSet& out) {
        const auto n = traces.size();
        std::vector<std::size_t> pos(n, 0);
        std::size_t total = 0;
        for (const auto* t : traces) total += t->size();
        SymTrace current;
        current.reserve(total);
        std::function<void()> step = [&]() {
            if (current.size() == total) {
                insert(out, current);
                return;
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (pos[i] == traces[i]->size()) continue;
                bool ready = true;
                for (auto p : preds[i]) {
                    if (pos[p] != traces[p]->size()) {
                        ready = false;
                        break;
                    }
                }
                if (!ready) continue;
                current.push_back((*traces[i])[pos[i]++]);
                step();
                --pos[i];
                current.pop_back();
            }
        };
        step();
    }

    std::size_t max_len_;
    std::size_t cap_;
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::string> labels_;
};

}  // namespace detail

/// Visible-label traces of `model` with length <= max_len, by recursive
/// definition over the model tree. Throws SemanticsError(cap_exceeded)
/// when the set outgrows `cap`.
inline TraceSet powl_traces(const PowlNode& model, std::size_t max_len, std::size_t cap = kDefaultTraceCap) {
    if (max_len > kMaxOracleLength) {
        throw SemanticsError(SemanticsErrorKind::invalid_argument,
                             "max_len " + std::to_string(max_len) + " exceeds the oracle limit of " +
                                 std::to_string(kMaxOracleLength));
    }
    detail::TraceOracle oracle(max_len, cap);
    TraceSet out;
    for (const auto& t : oracle.language(model)) out.insert(oracle.decode(t));
    return out;
}

// ---------------------------------------------------------------------------
// Token game

namespace detail {

inline std::vector<std::uint32_t> to_vector(const NetIndex& index, const Marking& m) {
    std::vector<std::uint32_t> counts(index.place_of.size(), 0);
    for (const auto& [place, tokens] : m) {
        const auto it = index.place_of.find(place);
        if (it == index.place_of.end()) {
            throw SemanticsError(SemanticsErrorKind::invalid_argument, "marking refers to unknown place '" + place + "'");
        }
        counts[it->second] = tokens;
    }
    return counts;
}

inline bool is_enabled(const NetIndex& index, const std::vector<std::uint32_t>& m, std::size_t t) {
    for (auto p : index.pre[t]) {
        if (m[p] == 0) return false;
    }
    return true;
}

inline std::vector<std::uint32_t> fire_unchecked(const NetIndex& index, std::vector<std::uint32_t> m, std::size_t t) {
    for (auto p : index.pre[t]) --m[p];
    for (auto p : index.post[t]) ++m[p];
    return m;
}

struct MarkingHash {
    std::size_t operator()(const std::vector<std::uint32_t>& m) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (auto c : m) {
            h ^= c + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

}  // namespace detail

/// Transitions whose every input place holds at least one token.
inline std::set<std::string> enabled(const PetriNet& net, const Marking& m) {
    const detail::NetIndex index(net);
    const auto counts = detail::to_vector(index, m);
    std::set<std::string> out;
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
        if (detail::is_enabled(index, counts, t)) out.insert(net.transitions[t].id);
    }
    return out;
}

/// Fires `transition`: one token consumed per input place, one produced per
/// output place. Throws SemanticsError(not_enabled).
inline Marking fire(const PetriNet& net, const Marking& m, const std::string& transition) {
    const detail::NetIndex index(net);
    const auto it = index.transition_of.find(transition);
    if (it == index.transition_of.end()) {
        throw SemanticsError(SemanticsErrorKind::invalid_argument, "unknown transition '" + transition + "'");
    }
    const auto counts = detail::to_vector(index, m);
    if (!detail::is_enabled(index, counts, it->second)) {
        throw SemanticsError(SemanticsErrorKind::not_enabled, "transition '" + transition + "' is not enabled");
    }
    const auto next = detail::fire_unchecked(index, counts, it->second);
    Marking out;
    for (std::size_t p = 0; p < next.size(); ++p) {
        if (next[p] > 0) out.emplace(net.places[p], next[p]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Net trace enumeration

struct PnTraceResult {
    TraceSet traces;
    bool truncated = false;
    std::size_t explored_states = 0;
};

namespace detail {

// Interns markings and caches their successor lists; stops growing once
// the state budget is reached.
class MarkingGraph {
  public:
    MarkingGraph(const PetriNet& net, std::size_t budget) : net_(net), index_(net), budget_(budget) {}

    const NetIndex& index() const { return index_; }
    std::size_t size() const { return markings_.size(); }
    bool truncated() const { return truncated_; }
    const std::vector<std::uint32_t>& marking(std::size_t id) const { return markings_[id]; }

    /// Returns the id, or -1 when the budget is exhausted.
    long intern(std::vector<std::uint32_t> m) {
        if (auto it = ids_.find(m); it != ids_.end()) return static_cast<long>(it->second);
        if (markings_.size() >= budget_) {
            truncated_ = true;
            return -1;
        }
        const auto id = markings_.size();
        ids_.emplace(m, id);
        markings_.push_back(std::move(m));
        successors_.emplace_back();
        expanded_.push_back(false);
        return static_cast<long>(id);
    }

    struct Step {
        std::size_t transition;
        std::size_t target;
    };

    const std::vector<Step>& successors(std::size_t id) {
        if (!expanded_[id]) {
            expanded_[id] = true;
            std::vector<Step> steps;
            const auto current = markings_[id];
            for (std::size_t t = 0; t < index_.pre.size(); ++t) {
                if (!is_enabled(index_, current, t)) continue;
                const auto target = intern(fire_unchecked(index_, current, t));
                if (target >= 0) steps.push_back({t, static_cast<std::size_t>(target)});
            }
            successors_[id] = std::move(steps);
        }
        return successors_[id];
    }

    bool is_final(std::size_t id) const {
        const auto& m = markings_[id];
        for (std::size_t p = 0; p < m.size(); ++p) {
            if (m[p] != (p == index_.sink ? 1u : 0u)) return false;
        }
        return true;
    }

    const PetriNet& net() const { return net_; }

  private:
    const PetriNet& net_;
    NetIndex index_;
    std::size_t budget_;
    bool truncated_ = false;
    std::unordered_map<std::vector<std::uint32_t>, std::size_t, MarkingHash> ids_;
    std::vector<std::vector<std::uint32_t>> markings_;
    std::vector<std::vector<Step>> successors_;
    std::vector<bool> expanded_;
};

inline std::vector<std::uint32_t> initial_marking(const NetIndex& index) {
    std::vector<std::uint32_t> m(index.place_of.size(), 0);
    m[index.source] = 1;
    return m;
}

}  // namespace detail

/// Visible-label sequences of runs from {initial:1} to exactly {final:1},
/// silent transitions projected out, length <= max_len. Explores the
/// determinized (subset) graph so shared prefixes are expanded once.
inline PnTraceResult pn_traces(const PetriNet& net, std::size_t max_len,
                               std::size_t state_budget = kDefaultStateBudget) {
    detail::MarkingGraph graph(net, state_budget);
    const auto& index = graph.index();

    using Subset = std::vector<std::size_t>;
    std::map<Subset, std::size_t> subset_ids;
    std::vector<Subset> subsets;
    std::vector<std::map<std::string, std::size_t>> moves;
    std::vector<bool> moves_done;
    std::vector<bool> accepting;

    auto closure = [&](std::vector<std::size_t> seeds) {
        std::set<std::size_t> seen(seeds.begin(), seeds.end());
        while (!seeds.empty()) {
            const auto m = seeds.back();
            seeds.pop_back();
            for (const auto& step : graph.successors(m)) {
                if (net.transitions[step.transition].silent() && seen.insert(step.target).second) {
                    seeds.push_back(step.target);
                }
            }
        }
        return Subset(seen.begin(), seen.end());
    };
    auto intern_subset = [&](Subset s) {
        if (auto it = subset_ids.find(s); it != subset_ids.end()) return it->second;
        const auto id = subsets.size();
        bool acc = false;
        for (auto m : s) acc = acc || graph.is_final(m);
        subset_ids.emplace(s, id);
        subsets.push_back(std::move(s));
        moves.emplace_back();
        moves_done.push_back(false);
        accepting.push_back(acc);
        return id;
    };
    auto expand = [&](std::size_t sid) -> const std::map<std::string, std::size_t>& {
        if (!moves_done[sid]) {
            moves_done[sid] = true;
            std::map<std::string, std::vector<std::size_t>> by_label;
            const Subset members = subsets[sid];
            for (auto m : members) {
                for (const auto& step : graph.successors(m)) {
                    const auto& t = net.transitions[step.transition];
                    if (!t.silent()) by_label[t.label->text()].push_back(step.target);
                }
            }
            std::map<std::string, std::size_t> result;
            for (auto& [label, seeds] : by_label) result.emplace(label, intern_subset(closure(std::move(seeds))));
            moves[sid] = std::move(result);
        }
        return moves[sid];
    };

    PnTraceResult out;
    const auto start = graph.intern(detail::initial_marking(index));
    if (start < 0) {
        out.truncated = true;
        return out;
    }
    Trace current;
    std::function<void(std::size_t)> walk = [&](std::size_t sid) {
        if (accepting[sid]) out.traces.insert(current);
        if (current.size() == max_len) return;
        const auto edges = expand(sid);
        for (const auto& [label, next] : edges) {
            current.push_back(label);
            walk(next);
            current.pop_back();
        }
    };
    walk(intern_subset(closure({static_cast<std::size_t>(start)})));
    out.truncated = graph.truncated();
    out.explored_states = graph.size();
    return out;
}

// ---------------------------------------------------------------------------
// Soundness

struct SoundnessReport {
    bool option_to_complete = false;
    bool proper_completion = false;
    std::set<std::string> dead_transitions;
    std::size_t explored_states = 0;
    bool truncated = false;

    [[nodiscard]] bool sound() const noexcept {
        return option_to_complete && proper_completion && dead_transitions.empty() && !truncated;
    }
};

/// Breadth-first reachability from {initial:1}. With a truncated search the
/// verdicts describe the explored prefix only.
inline SoundnessReport check_soundness(const PetriNet& net, std::size_t state_budget = kDefaultStateBudget) {
    detail::MarkingGraph graph(net, state_budget);
    const auto& index = graph.index();
    SoundnessReport report;

    std::vector<bool> ever_enabled(net.transitions.size(), false);
    std::vector<std::vector<std::size_t>> reverse;
    const auto start = graph.intern(detail::initial_marking(index));
    if (start < 0) {
        report.truncated = true;
        for (const auto& t : net.transitions) report.dead_transitions.insert(t.id);
        return report;
    }
    std::deque<std::size_t> queue{static_cast<std::size_t>(start)};
    std::vector<bool> visited{true};
    while (!queue.empty()) {
        const auto m = queue.front();
        queue.pop_front();
        const auto steps = graph.successors(m);
        if (reverse.size() < graph.size()) reverse.resize(graph.size());
        if (visited.size() < graph.size()) visited.resize(graph.size(), false);
        for (const auto& step : steps) {
            ever_enabled[step.transition] = true;
            reverse[step.target].push_back(m);
            if (!visited[step.target]) {
                visited[step.target] = true;
                queue.push_back(step.target);
            }
        }
        // enabled transitions whose successor fell outside the budget
        for (std::size_t t = 0; t < index.pre.size(); ++t) {
            if (!ever_enabled[t] && detail::is_enabled(index, graph.marking(m), t)) ever_enabled[t] = true;
        }
    }
    report.truncated = graph.truncated();
    report.explored_states = graph.size();

    std::optional<std::size_t> final_id;
    report.proper_completion = true;
    for (std::size_t id = 0; id < graph.size(); ++id) {
        if (graph.is_final(id)) {
            final_id = id;
        } else if (graph.marking(id)[index.sink] > 0) {
            report.proper_completion = false;
        }
    }
    if (final_id) {
        reverse.resize(graph.size());
        std::vector<bool> can_finish(graph.size(), false);
        std::vector<std::size_t> stack{*final_id};
        can_finish[*final_id] = true;
        while (!stack.empty()) {
            const auto m = stack.back();
            stack.pop_back();
            for (auto p : reverse[m]) {
                if (!can_finish[p]) {
                    can_finish[p] = true;
                    stack.push_back(p);
                }
            }
        }
        report.option_to_complete = std::all_of(can_finish.begin(), can_finish.end(), [](bool b) { return b; });
    }
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
        if (!ever_enabled[t]) report.dead_transitions.insert(net.transitions[t].id);
    }
    return report;
}

}  // namespace promoai
