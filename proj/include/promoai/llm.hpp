#pragma once

// Prompt construction, code extraction, and the two conversation loops:
// automatic repair of rejected programs, and refinement from user feedback.
// Providers are abstract here; see providers.hpp for implementations.

#include <promoai/convert.hpp>
#include <promoai/pcl.hpp>
#include <promoai/powl.hpp>
#include <promoai/semantics.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#ifndef PROMOAI_DEFAULT_ASSET_DIR
#define PROMOAI_DEFAULT_ASSET_DIR "assets"
#endif

namespace promoai {

inline constexpr std::size_t kMaxDescriptionChars = 50'000;
inline constexpr std::size_t kDefaultMaxIterations = 5;

enum class Role { system, user, assistant };

inline std::string_view to_string(Role r) {
    switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

inline Role role_from_string(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "assistant") return Role::assistant;
    if (s == "user") return Role::user;
    throw std::invalid_argument("unknown message role '" + std::string(s) + "'");
}

struct Message {
    Role role;
    std::string content;
    friend bool operator==(const Message&, const Message&) = default;
};

/// Append-only message history: a system message, then alternating
/// user/assistant turns starting with user.
class Conversation {
  public:
    void append(Message m) {
        if (m.content.empty()) throw std::logic_error("conversation messages must not be empty");
        const Role expected = messages_.empty()                            ? Role::system
                              : messages_.back().role == Role::assistant ? Role::user
                              : messages_.back().role == Role::system    ? Role::user
                                                                          : Role::assistant;
        if (m.role != expected) {
            throw std::logic_error("expected a " + std::string(to_string(expected)) + " message, got " +
                                   std::string(to_string(m.role)));
        }
        messages_.push_back(std::move(m));
    }

    [[nodiscard]] const std::vector<Message>& messages() const noexcept { return messages_; }
    [[nodiscard]] std::size_t size() const noexcept { return messages_.size(); }
    [[nodiscard]] std::size_t iteration_count() const noexcept { return iterations_; }
    void count_iteration() noexcept { ++iterations_; }

    /// True when `prefix` is a prefix of this conversation.
    [[nodiscard]] bool extends(const Conversation& prefix) const {
        return prefix.size() <= size() && std::equal(prefix.messages_.begin(), prefix.messages_.end(), messages_.begin());
    }

    friend bool operator==(const Conversation&, const Conversation&) = default;

  private:
    std::vector<Message> messages_;
    std::size_t iterations_ = 0;
};

inline nlohmann::json to_json(const Conversation& c) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : c.messages()) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return {{"messages", std::move(messages)}, {"iteration_count", c.iteration_count()}};
}

inline Conversation conversation_from_json(const nlohmann::json& j) {
    Conversation c;
    for (const auto& m : j.at("messages")) {
        c.append({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    for (std::size_t i = 0, n = j.value("iteration_count", std::size_t{0}); i < n; ++i) c.count_iteration();
    return c;
}

/// Connection settings for a chat-completion endpoint. The API key itself is
/// never stored here, only the name of the environment variable holding it.
struct ProviderConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model_name = "gpt-4o";
    std::string api_key_ref = "OPENAI_API_KEY";
    double temperature = 0.0;
    std::chrono::milliseconds timeout{120'000};
    std::size_t max_retries_transport = 2;
    std::chrono::milliseconds retry_backoff{500};
};

class ProviderError : public std::runtime_error {
  public:
    explicit ProviderError(const std::string& message, int status = 0) : std::runtime_error(message), status_(status) {}
    /// HTTP status of the failing response, 0 for transport failures.
    [[nodiscard]] int status() const noexcept { return status_; }

  private:
    int status_;
};

/// complete(messages, config) -> assistant text.
class Provider {
  public:
    virtual ~Provider() = default;
    virtual std::string complete(const std::vector<Message>& messages, const ProviderConfig& config) = 0;
};

/// Rejected caller input: empty or oversized description, empty feedback.
class InputError : public std::invalid_argument {
  public:
    InputError(std::string kind, const std::string& message) : std::invalid_argument(message), kind_(std::move(kind)) {}
    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

  private:
    std::string kind_;
};

// ---------------------------------------------------------------------------
// Prompt templates

inline std::filesystem::path default_asset_dir() {
    if (const char* env = std::getenv("PROMOAI_ASSETS"); env && *env) return env;
    return PROMOAI_DEFAULT_ASSET_DIR;
}

struct FewShotExample {
    std::string name;
    std::string description;
    std::string program;
};

/// Prompt templates loaded from a directory of editable text files:
/// system_prompt.md, user_prompt.md, error_prompt.md, no_code_prompt.md,
/// refinement_prompt.md, and few_shots/<name>.txt + <name>.pcl pairs.
class PromptLibrary {
  public:
    static constexpr std::array<std::string_view, 6> kSystemSections{
        "## Role",
        "## POWL Knowledge Base",
        "## Construction Language Reference",
        "## Modeling Procedure",
        "## Self-Evaluation Checklist",
        "## Examples",
    };

    static PromptLibrary load(const std::filesystem::path& dir = default_asset_dir() / "prompts") {
        PromptLibrary lib;
        lib.system_ = read(dir / "system_prompt.md");
        lib.user_ = read(dir / "user_prompt.md");
        lib.error_ = read(dir / "error_prompt.md");
        lib.no_code_ = read(dir / "no_code_prompt.md");
        lib.refinement_ = read(dir / "refinement_prompt.md");
        std::size_t last = 0;
        for (auto section : kSystemSections) {
            const auto at = lib.system_.find(section);
            if (at == std::string::npos || at < last) {
                throw std::runtime_error("system prompt template lacks section '" + std::string(section) +
                                         "' (sections must appear in order)");
            }
            last = at;
        }
        std::vector<std::filesystem::path> descriptions;
        for (const auto& entry : std::filesystem::directory_iterator(dir / "few_shots")) {
            if (entry.path().extension() == ".txt") descriptions.push_back(entry.path());
        }
        std::sort(descriptions.begin(), descriptions.end());
        for (const auto& d : descriptions) {
            auto program_path = d;
            program_path.replace_extension(".pcl");
            lib.examples_.push_back({d.stem().string(), trim(read(d)), trim(read(program_path))});
        }
        if (lib.examples_.size() < 2) throw std::runtime_error("at least 2 few-shot examples are required in " + dir.string());
        return lib;
    }

    [[nodiscard]] const std::vector<FewShotExample>& examples() const noexcept { return examples_; }

    [[nodiscard]] std::string system_prompt() const {
        std::string shots;
        for (std::size_t i = 0; i < examples_.size(); ++i) {
            const auto& e = examples_[i];
            shots += "### Example " + std::to_string(i + 1) + "\nProcess description:\n" + e.description +
                     "\n\nProgram:\n```\n" + e.program + "\n```\n";
            if (i + 1 < examples_.size()) shots += "\n";
        }
        return trim(fill(system_, {{"few_shot_examples", shots}}));
    }

    [[nodiscard]] std::string user_prompt(std::string_view description) const {
        return trim(fill(user_, {{"description", std::string(description)}}));
    }
    [[nodiscard]] std::string error_prompt(std::string_view kind, std::string_view location,
                                           std::string_view message) const {
        return trim(fill(error_, {{"kind", std::string(kind)},
                                  {"location", std::string(location)},
                                  {"message", std::string(message)}}));
    }
    [[nodiscard]] std::string no_code_prompt() const { return trim(no_code_); }
    [[nodiscard]] std::string refinement_prompt(std::string_view feedback) const {
        return trim(fill(refinement_, {{"feedback", std::string(feedback)}}));
    }

  private:
    static std::string read(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read prompt template " + p.string());
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static std::string trim(std::string s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    // Single pass, so substituted text is never re-scanned for placeholders.
    static std::string fill(const std::string& tpl, const std::vector<std::pair<std::string, std::string>>& values) {
        std::string out;
        std::size_t pos = 0;
        while (true) {
            const auto open = tpl.find("{{", pos);
            if (open == std::string::npos) break;
            const auto close = tpl.find("}}", open);
            if (close == std::string::npos) break;
            const auto key = tpl.substr(open + 2, close - open - 2);
            const auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
            out += tpl.substr(pos, open - pos);
            out += it != values.end() ? it->second : tpl.substr(open, close + 2 - open);
            pos = close + 2;
        }
        return out + tpl.substr(pos);
    }

    std::string system_, user_, error_, no_code_, refinement_;
    std::vector<FewShotExample> examples_;
};

/// System message (role, knowledge base, language reference, procedure,
/// checklist, examples) followed by the user's description.
inline std::vector<Message> build_initial_prompt(std::string_view description, const PromptLibrary& prompts) {
    if (description.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw InputError("empty-description", "the process description is empty");
    }
    if (description.size() > kMaxDescriptionChars) {
        throw InputError("description-too-long", "the process description has " + std::to_string(description.size()) +
                                                     " characters; the limit is " +
                                                     std::to_string(kMaxDescriptionChars));
    }
    return {{Role::system, prompts.system_prompt()}, {Role::user, prompts.user_prompt(description)}};
}

// ---------------------------------------------------------------------------
// Code extraction

class NoCodeFound : public std::runtime_error {
  public:
    NoCodeFound() : std::runtime_error("the response contains no program") {}
};

namespace detail {

inline bool lexes(std::string_view line) {
    try {
        pcl_detail::Lexer(line).run();
        return true;
    } catch (const PclError&) {
        return false;
    }
}

inline bool starts_statement(std::string_view line) {
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string_view::npos) return false;
    line.remove_prefix(b);
    if (line.starts_with("#")) return true;
    std::size_t i = 0;
    while (i < line.size() && (pcl_detail::is_letter(line[i]) || pcl_detail::is_digit(line[i]) || line[i] == '_')) ++i;
    if (i == 0) return false;
    const auto word = line.substr(0, i);
    auto rest = line.substr(i);
    rest.remove_prefix(std::min(rest.find_first_not_of(" \t"), rest.size()));
    return (word == "final" && rest.starts_with("(")) || (rest.starts_with("=") && !rest.starts_with("=="));
}

inline bool is_tag(std::string_view s) {
    if (s.empty()) return true;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return pcl_detail::is_letter(c) || pcl_detail::is_digit(c) || c == '-' || c == '+' || c == '_';
    });
}

inline std::string trim_copy(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Content of the last fenced code block; without fences, the longest
/// trailing run of lines that lex as PCL and begin with a statement.
inline std::string extract_code(std::string_view response) {
    std::vector<std::size_t> fences;
    for (auto at = response.find("```"); at != std::string_view::npos; at = response.find("```", at + 3)) {
        fences.push_back(at);
    }
    if (!fences.empty()) {
        std::string last;
        for (std::size_t i = 0; i < fences.size(); i += 2) {
            auto begin = fences[i] + 3;
            const auto end = i + 1 < fences.size() ? fences[i + 1] : response.size();
            const auto nl = response.find('\n', begin);
            if (nl != std::string_view::npos && nl < end) {
                const auto tag = detail::trim_copy(response.substr(begin, nl - begin));
                if (detail::is_tag(tag)) begin = nl + 1;
            }
            auto block = detail::trim_copy(response.substr(begin, end - begin));
            if (!block.empty()) last = std::move(block);
        }
        if (!last.empty()) return last;
        throw NoCodeFound();
    }

    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start <= response.size();) {
        const auto nl = response.find('\n', start);
        const auto stop = nl == std::string_view::npos ? response.size() : nl;
        lines.push_back(response.substr(start, stop - start));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    while (!lines.empty() && detail::trim_copy(lines.back()).empty()) lines.pop_back();
    std::size_t first = lines.size();
    while (first > 0 && detail::lexes(lines[first - 1])) --first;
    while (first < lines.size() && !detail::starts_statement(lines[first])) ++first;
    if (first == lines.size()) throw NoCodeFound();
    std::string out;
    for (auto i = first; i < lines.size(); ++i) out += std::string(lines[i]) + "\n";
    if (out.find("final") == std::string::npos && out.find('=') == std::string::npos) throw NoCodeFound();
    return detail::trim_copy(out);
}

// ---------------------------------------------------------------------------
// Loops

/// Why an attempt was rejected; rendered into the repair prompt.
struct Diagnostic {
    std::string kind;
    std::string message;
    std::optional<SourceLocation> location;

    static Diagnostic from(const PclError& e) { return {std::string(to_string(e.kind())), e.message(), e.location()}; }
    static Diagnostic no_code() {
        return {"no-code-found", "the response contains no program in a fenced code block", std::nullopt};
    }
};

inline Message build_error_prompt(const Diagnostic& d, const PromptLibrary& prompts) {
    if (d.kind == "no-code-found") return {Role::user, prompts.no_code_prompt()};
    const auto where = d.location ? "line " + std::to_string(d.location->line) + ", column " +
                                        std::to_string(d.location->column)
                                  : std::string("whole model");
    return {Role::user, prompts.error_prompt(d.kind, where, d.message)};
}

struct GenerationResult {
    PowlNode model;
    Conversation conversation;
    std::size_t attempts = 0;
    std::string source;
};

struct GenerationSettings {
    ProviderConfig provider;
    PromptLibrary prompts;
    std::size_t max_iterations = kDefaultMaxIterations;
    std::size_t state_budget = kDefaultStateBudget;
};

class GenerationExhausted : public std::runtime_error {
  public:
    GenerationExhausted(Conversation conversation, Diagnostic last_error, std::size_t attempts)
        : std::runtime_error("no valid model after " + std::to_string(attempts) +
                             " attempts; last error: " + last_error.kind + ": " + last_error.message),
          conversation_(std::move(conversation)),
          last_error_(std::move(last_error)),
          attempts_(attempts) {}

    [[nodiscard]] const Conversation& conversation() const noexcept { return conversation_; }
    [[nodiscard]] const Diagnostic& last_error() const noexcept { return last_error_; }
    [[nodiscard]] std::size_t attempts() const noexcept { return attempts_; }

  private:
    Conversation conversation_;
    Diagnostic last_error_;
    std::size_t attempts_;
};

namespace detail {

// Rejection reason for one response, or nullopt plus the accepted model.
inline std::optional<Diagnostic> evaluate(const std::string& response, std::size_t state_budget,
                                          std::optional<PowlNode>& model, std::string& source) {
    try {
        source = extract_code(response);
    } catch (const NoCodeFound&) {
        return Diagnostic::no_code();
    }
    try {
        model = run_pcl(source);
    } catch (const PclError& e) {
        return Diagnostic::from(e);
    }
    if (const auto report = validate(*model); !report.ok()) {
        return Diagnostic{"invalid-model", report.violations.front().path + ": " + report.violations.front().message,
                          std::nullopt};
    }
    const auto soundness = check_soundness(powl_to_pn(*model), state_budget);
    if (!soundness.sound()) {
        return Diagnostic{"unsound-model", soundness.truncated ? "the model is too large to verify"
                                                                : "the converted Petri net is not sound",
                          std::nullopt};
    }
    return std::nullopt;
}

inline GenerationResult iterate(Conversation conversation, Provider& provider, const GenerationSettings& settings) {
    if (settings.max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    Diagnostic last{"none", "", std::nullopt};
    for (std::size_t attempt = 1; attempt <= settings.max_iterations; ++attempt) {
        auto response = provider.complete(conversation.messages(), settings.provider);
        conversation.append({Role::assistant, response.empty() ? std::string("(empty response)") : response});
        std::optional<PowlNode> model;
        std::string source;
        auto problem = evaluate(response, settings.state_budget, model, source);
        if (!problem) return GenerationResult{*model, std::move(conversation), attempt, std::move(source)};
        last = std::move(*problem);
        conversation.append(build_error_prompt(last, settings.prompts));
        conversation.count_iteration();
    }
    throw GenerationExhausted(std::move(conversation), std::move(last), settings.max_iterations);
}

}  // namespace detail

/// Prompts the provider until a response yields a valid, sound model.
/// Throws GenerationExhausted after max_iterations rejected responses, and
/// lets ProviderError through unchanged.
inline GenerationResult generate(std::string_view description, Provider& provider, const GenerationSettings& settings) {
    Conversation conversation;
    for (auto& m : build_initial_prompt(description, settings.prompts)) conversation.append(std::move(m));
    return detail::iterate(std::move(conversation), provider, settings);
}

/// Appends the user's feedback to the conversation and runs the same loop.
inline GenerationResult refine(const GenerationResult& previous, std::string_view feedback, Provider& provider,
                               const GenerationSettings& settings) {
    if (feedback.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw InputError("empty-feedback", "feedback must not be empty");
    }
    Conversation conversation = previous.conversation;
    conversation.append({Role::user, settings.prompts.refinement_prompt(feedback)});
    return detail::iterate(std::move(conversation), provider, settings);
}

}  // namespace promoai
