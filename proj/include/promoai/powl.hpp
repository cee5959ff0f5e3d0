#pragma once

// POWL model algebra: activities, silent steps, exclusive choice, redo loops
// and partial orders over sibling submodels. Values are immutable after
// construction and share structure, so copies are cheap and thread-safe.

#include <algorithm>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace promoai {

inline constexpr std::size_t kMaxLabelLength = 120;
inline constexpr std::size_t kMaxModelNodes = 500;

enum class ModelErrorKind { invalid_label, arity, bad_edge, cyclic_order, too_large };

inline std::string_view to_string(ModelErrorKind kind) {
    switch (kind) {
    case ModelErrorKind::invalid_label: return "invalid-label";
    case ModelErrorKind::arity: return "arity";
    case ModelErrorKind::bad_edge: return "bad-edge";
    case ModelErrorKind::cyclic_order: return "cyclic-order";
    case ModelErrorKind::too_large: return "too-large";
    }
    return "unknown";
}

using Edge = std::pair<std::size_t, std::size_t>;
using EdgeSet = std::set<Edge>;

/// Raised by the model constructors when a precondition does not hold.
/// `edge()` names the offending order edge for bad-edge / cyclic-order.
class ModelError : public std::runtime_error {
  public:
    ModelError(ModelErrorKind kind, const std::string& message, std::optional<Edge> edge = std::nullopt)
        : std::runtime_error(message), kind_(kind), edge_(edge) {}

    [[nodiscard]] ModelErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::optional<Edge>& edge() const noexcept { return edge_; }

  private:
    ModelErrorKind kind_;
    std::optional<Edge> edge_;
};

inline std::string format_edge(const Edge& e) {
    return "(" + std::to_string(e.first) + "," + std::to_string(e.second) + ")";
}

/// Activity label: trimmed, non-empty, at most 120 characters, no control characters.
class Label {
  public:
    static Label make(std::string_view raw) {
        constexpr std::string_view ws = " \t\r\n\v\f";
        const auto first = raw.find_first_not_of(ws);
        if (first == std::string_view::npos) {
            throw ModelError(ModelErrorKind::invalid_label, "activity label is empty");
        }
        const auto last = raw.find_last_not_of(ws);
        std::string text(raw.substr(first, last - first + 1));
        if (text.size() > kMaxLabelLength) {
            throw ModelError(ModelErrorKind::invalid_label,
                             "activity label \"" + text.substr(0, 40) + "...\" is longer than " +
                                 std::to_string(kMaxLabelLength) + " characters");
        }
        for (unsigned char c : text) {
            if (c < 0x20 || c == 0x7f) {
                throw ModelError(ModelErrorKind::invalid_label,
                                 "activity label \"" + text + "\" contains a control character");
            }
        }
        return Label(std::move(text));
    }

    [[nodiscard]] const std::string& text() const noexcept { return text_; }

    friend bool operator==(const Label&, const Label&) = default;
    friend auto operator<=>(const Label&, const Label&) = default;

  private:
    explicit Label(std::string text) : text_(std::move(text)) {}
    std::string text_;
};

struct Activity;
struct Silent;
struct Xor;
struct Loop;
struct PartialOrder;

class PowlNode {
  public:
    using Variant = std::variant<Activity, Silent, Xor, Loop, PartialOrder>;

    enum class Kind { activity, silent, xor_choice, loop, partial_order };

    /// Wraps a variant without checking any invariant. The make_* functions
    /// are the checked entry points; this exists for deserializers that
    /// validate afterwards and for tests that need malformed models.
    static PowlNode from_raw(Variant v);

    [[nodiscard]] const Variant& variant() const noexcept;
    [[nodiscard]] Kind kind() const noexcept;

    template <class T>
    [[nodiscard]] const T* as() const noexcept;

    /// Total number of nodes in the subtree, this one included.
    [[nodiscard]] std::size_t size() const noexcept;

    /// Children in positional order. For a loop: {do, redo}.
    [[nodiscard]] std::vector<PowlNode> children() const;

    friend bool operator==(const PowlNode& a, const PowlNode& b);

  private:
    struct Data;
    explicit PowlNode(std::shared_ptr<const Data> d) : data_(std::move(d)) {}
    std::shared_ptr<const Data> data_;
};

struct Activity {
    Label label;
    friend bool operator==(const Activity&, const Activity&) = default;
};

struct Silent {
    friend bool operator==(const Silent&, const Silent&) = default;
};

struct Xor {
    std::vector<PowlNode> children;
    friend bool operator==(const Xor&, const Xor&) = default;
};

struct Loop {
    PowlNode body;
    PowlNode redo;
    friend bool operator==(const Loop&, const Loop&) = default;
};

struct PartialOrder {
    std::vector<PowlNode> children;
    EdgeSet order;
    friend bool operator==(const PartialOrder&, const PartialOrder&) = default;
};

struct PowlNode::Data {
    Variant node;
    std::size_t size = 1;
};

inline const PowlNode::Variant& PowlNode::variant() const noexcept { return data_->node; }
inline std::size_t PowlNode::size() const noexcept { return data_->size; }
template <class T>
const T* PowlNode::as() const noexcept {
    return std::get_if<T>(&data_->node);
}

inline PowlNode::Kind PowlNode::kind() const noexcept { return static_cast<Kind>(data_->node.index()); }

inline PowlNode PowlNode::from_raw(Variant v) {
    std::size_t size = 1;
    std::visit(
        [&size](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Xor> || std::is_same_v<T, PartialOrder>) {
                for (const auto& c : n.children) size += c.size();
            } else if constexpr (std::is_same_v<T, Loop>) {
                size += n.body.size() + n.redo.size();
            }
        },
        v);
    auto data = std::make_shared<Data>(Data{std::move(v), size});
    return PowlNode(std::move(data));
}

inline std::vector<PowlNode> PowlNode::children() const {
    if (const auto* x = as<Xor>()) return x->children;
    if (const auto* p = as<PartialOrder>()) return p->children;
    if (const auto* l = as<Loop>()) return {l->body, l->redo};
    return {};
}

inline bool operator==(const PowlNode& a, const PowlNode& b) {
    if (a.data_ == b.data_) return true;
    return a.data_->size == b.data_->size && a.data_->node == b.data_->node;
}

// ---------------------------------------------------------------------------
// Order relations over sibling indices

/// Smallest transitive superset of `edges` on nodes [0, n). Contains (i, i)
/// exactly when i lies on a cycle.
inline EdgeSet transitive_closure(const EdgeSet& edges, std::size_t n) {
    std::vector<std::vector<std::size_t>> succ(n);
    for (const auto& [from, to] : edges) {
        if (from >= n || to >= n) throw std::out_of_range("edge index out of range: " + format_edge({from, to}));
        succ[from].push_back(to);
    }
    EdgeSet closure;
    std::vector<char> seen(n);
    std::vector<std::size_t> stack;
    for (std::size_t src = 0; src < n; ++src) {
        std::fill(seen.begin(), seen.end(), 0);
        stack.assign(succ[src].begin(), succ[src].end());
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            if (seen[v]) continue;
            seen[v] = 1;
            closure.emplace(src, v);
            for (auto w : succ[v]) {
                if (!seen[w]) stack.push_back(w);
            }
        }
    }
    return closure;
}

namespace detail {

// Returns the edges of some cycle in `edges`, or an empty vector when acyclic.
inline std::vector<Edge> find_cycle(const EdgeSet& edges, std::size_t n) {
    std::vector<std::vector<std::size_t>> succ(n);
    for (const auto& [from, to] : edges) succ[from].push_back(to);
    enum : char { white, grey, black };
    std::vector<char> color(n, white);
    std::vector<std::size_t> parent(n, n);
    for (std::size_t root = 0; root < n; ++root) {
        if (color[root] != white) continue;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        color[root] = grey;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next == succ[v].size()) {
                color[v] = black;
                stack.pop_back();
                continue;
            }
            const auto w = succ[v][next++];
            if (color[w] == grey) {
                std::vector<Edge> cycle{{v, w}};
                for (auto u = v; u != w; u = parent[u]) cycle.emplace_back(parent[u], u);
                std::reverse(cycle.begin(), cycle.end());
                return cycle;
            }
            if (color[w] == white) {
                color[w] = grey;
                parent[w] = v;
                stack.emplace_back(w, 0);
            }
        }
    }
    return {};
}

inline std::string describe_cycle(const std::vector<Edge>& cycle) {
    std::string out;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
        if (i) out += ", ";
        out += format_edge(cycle[i]);
    }
    return out;
}

}  // namespace detail

/// Unique minimal edge set with the same closure as `edges`.
/// Throws ModelError(cyclic_order) if `edges` contains a cycle.
inline EdgeSet transitive_reduction(const EdgeSet& edges, std::size_t n) {
    const auto closure = transitive_closure(edges, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (closure.contains({i, i})) {
            const auto cycle = detail::find_cycle(edges, n);
            throw ModelError(ModelErrorKind::cyclic_order,
                             "order edges " + detail::describe_cycle(cycle) + " form a cycle",
                             cycle.empty() ? std::nullopt : std::optional<Edge>(cycle.back()));
        }
    }
    EdgeSet reduced;
    for (const auto& [from, to] : closure) {
        bool implied = false;
        for (std::size_t k = 0; k < n && !implied; ++k) {
            implied = k != from && k != to && closure.contains({from, k}) && closure.contains({k, to});
        }
        if (!implied) reduced.emplace(from, to);
    }
    return reduced;
}

// ---------------------------------------------------------------------------
// Checked constructors

namespace detail {

inline void check_size(std::size_t total) {
    if (total > kMaxModelNodes) {
        throw ModelError(ModelErrorKind::too_large, "model has " + std::to_string(total) +
                                                        " nodes; the limit is " + std::to_string(kMaxModelNodes));
    }
}

inline std::size_t sum_sizes(std::span<const PowlNode> nodes) {
    std::size_t total = 1;
    for (const auto& n : nodes) total += n.size();
    return total;
}

}  // namespace detail

inline PowlNode make_activity(std::string_view label) { return PowlNode::from_raw(Activity{Label::make(label)}); }

inline PowlNode make_activity(Label label) { return PowlNode::from_raw(Activity{std::move(label)}); }

inline PowlNode make_silent() { return PowlNode::from_raw(Silent{}); }

inline PowlNode make_xor(std::vector<PowlNode> children) {
    if (children.size() < 2) {
        throw ModelError(ModelErrorKind::arity,
                         "xor needs at least 2 children, got " + std::to_string(children.size()));
    }
    detail::check_size(detail::sum_sizes(children));
    return PowlNode::from_raw(Xor{std::move(children)});
}

inline PowlNode make_loop(PowlNode body, PowlNode redo) {
    detail::check_size(1 + body.size() + redo.size());
    return PowlNode::from_raw(Loop{std::move(body), std::move(redo)});
}

/// Builds a partial order; the stored order is the transitive reduction of `order`.
inline PowlNode make_partial_order(std::vector<PowlNode> children, const EdgeSet& order) {
    const auto n = children.size();
    if (n == 0) throw ModelError(ModelErrorKind::arity, "partial_order needs at least 1 child, got 0");
    for (const auto& e : order) {
        if (e.first >= n || e.second >= n) {
            throw ModelError(ModelErrorKind::bad_edge,
                             "order edge " + format_edge(e) + " refers to a child index outside [0, " +
                                 std::to_string(n) + ")",
                             e);
        }
        if (e.first == e.second) {
            throw ModelError(ModelErrorKind::bad_edge,
                             "order edge " + format_edge(e) + " relates a child to itself", e);
        }
    }
    detail::check_size(detail::sum_sizes(children));
    auto reduced = transitive_reduction(order, n);
    return PowlNode::from_raw(PartialOrder{std::move(children), std::move(reduced)});
}

// ---------------------------------------------------------------------------
// Structural validation

struct Violation {
    std::string path;  // e.g. "root.2.0"
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

namespace detail {

inline void validate_into(const PowlNode& node, const std::string& path, std::vector<Violation>& out) {
    if (const auto* x = node.as<Xor>()) {
        if (x->children.size() < 2) {
            out.push_back({path, "xor has " + std::to_string(x->children.size()) + " children; at least 2 required"});
        }
    } else if (const auto* p = node.as<PartialOrder>()) {
        const auto n = p->children.size();
        if (n == 0) out.push_back({path, "partial order has no children"});
        bool edges_ok = true;
        for (const auto& e : p->order) {
            if (e.first >= n || e.second >= n) {
                out.push_back({path, "order edge " + format_edge(e) + " out of range"});
                edges_ok = false;
            } else if (e.first == e.second) {
                out.push_back({path, "reflexive order edge " + format_edge(e)});
                edges_ok = false;
            }
        }
        if (edges_ok) {
            try {
                if (transitive_reduction(p->order, n) != p->order) {
                    out.push_back({path, "order is not stored as its transitive reduction"});
                }
            } catch (const ModelError& e) {
                out.push_back({path, e.what()});
            }
        }
    }
    const auto children = node.children();
    for (std::size_t i = 0; i < children.size(); ++i) {
        validate_into(children[i], path + "." + std::to_string(i), out);
    }
}

}  // namespace detail

inline ValidationReport validate(const PowlNode& root) {
    ValidationReport report;
    if (root.size() > kMaxModelNodes) {
        report.violations.push_back({"root", "model has " + std::to_string(root.size()) + " nodes; the limit is " +
                                                 std::to_string(kMaxModelNodes)});
    }
    detail::validate_into(root, "root", report.violations);
    return report;
}

/// Thrown by operations that require a structurally valid model.
class InvalidModel : public std::runtime_error {
  public:
    explicit InvalidModel(ValidationReport report)
        : std::runtime_error(summarize(report)), report_(std::move(report)) {}
    [[nodiscard]] const ValidationReport& report() const noexcept { return report_; }

  private:
    static std::string summarize(const ValidationReport& r) {
        std::string out = "invalid model";
        for (const auto& v : r.violations) out += "; " + v.path + ": " + v.message;
        return out;
    }
    ValidationReport report_;
};

inline void require_valid(const PowlNode& root) {
    auto report = validate(root);
    if (!report.ok()) throw InvalidModel(std::move(report));
}

// ---------------------------------------------------------------------------
// Statistics

struct ModelStats {
    std::size_t activity_count = 0;
    std::size_t operator_count = 0;
    std::size_t depth = 0;
    std::size_t silent_count = 0;
    friend bool operator==(const ModelStats&, const ModelStats&) = default;
};

inline ModelStats stats(const PowlNode& root) {
    ModelStats s;
    switch (root.kind()) {
    case PowlNode::Kind::activity: s.activity_count = 1; break;
    case PowlNode::Kind::silent: s.silent_count = 1; break;
    default: s.operator_count = 1; break;
    }
    std::size_t child_depth = 0;
    for (const auto& c : root.children()) {
        const auto cs = stats(c);
        s.activity_count += cs.activity_count;
        s.operator_count += cs.operator_count;
        s.silent_count += cs.silent_count;
        child_depth = std::max(child_depth, cs.depth);
    }
    s.depth = child_depth + 1;
    return s;
}

/// Compact single-line rendering for diagnostics, e.g. `xor(a, tau)`.
inline std::string to_text(const PowlNode& node) {
    std::ostringstream out;
    struct Printer {
        std::ostringstream& out;
        void operator()(const Activity& a) const { out << '"' << a.label.text() << '"'; }
        void operator()(const Silent&) const { out << "tau"; }
        void operator()(const Xor& x) const {
            out << "xor(";
            list(x.children);
            out << ')';
        }
        void operator()(const Loop& l) const {
            out << "loop(";
            std::visit(*this, l.body.variant());
            out << ", ";
            std::visit(*this, l.redo.variant());
            out << ')';
        }
        void operator()(const PartialOrder& p) const {
            out << "po([";
            list(p.children);
            out << "], {";
            bool first = true;
            for (const auto& e : p.order) {
                if (!first) out << ", ";
                first = false;
                out << format_edge(e);
            }
            out << "})";
        }
        void list(const std::vector<PowlNode>& xs) const {
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (i) out << ", ";
                std::visit(*this, xs[i].variant());
            }
        }
    };
    std::visit(Printer{out}, node.variant());
    return out.str();
}

}  // namespace promoai
