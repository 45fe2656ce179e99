#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "radrep/evaluation.hpp"

namespace radrep::textgen {

enum class PromptKind { Style, Fusion, Label };
std::string_view prompt_kind_name(PromptKind k) noexcept;

/// Raw template with {placeholders} for each prompt kind.
std::string_view template_text(PromptKind k) noexcept;

struct PromptBundle {
    PromptKind kind = PromptKind::Style;
    std::string system;  // empty: the request carries only the user message
    std::string user;
};

/// A human-written report with its precomputed tumour labels.
struct ExampleReport {
    std::string id;
    std::string text;
    evaluation::TumorLabels labels;
};

/// The first k pool entries whose label triple equals `target`, pool order kept.
std::vector<ExampleReport> select_examples(const std::vector<ExampleReport>& pool,
                                           const evaluation::TumorLabels& target, std::size_t k);

/// Throws EmptyInput for an empty report or no examples.
PromptBundle build_style_prompt(std::string_view structured, const std::vector<std::string>& examples);
/// Throws EmptyInput.
PromptBundle build_fusion_prompt(std::string_view notes, std::string_view structured);
/// Throws EmptyInput.
PromptBundle build_label_prompt(std::string_view report_text);

/// Text strictly between the first "#start" and the next "#end", trimmed.
/// Throws MarkersMissing.
std::string extract_between_markers(std::string_view completion);
std::string wrap_with_markers(std::string_view body);

struct ChatEndpoint {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model = "llama-3.1-70b-instruct";
    double timeout_s = 120.0;
    int max_retries = 3;
    double backoff_initial_s = 0.5;
    double temperature = 0.0;
    std::string api_key;  // sent as a bearer token when non-empty

    /// http(s) scheme, a host, positive timeout, non-negative retries.
    bool valid() const;
};

struct ChatResult {
    std::string content;
    int retries = 0;
};

/// Blocking client for the chat-completion wire shape
/// POST {base}/chat/completions {model, messages, temperature}
/// -> {choices: [{message: {content}}]}.
class ChatClient {
public:
    using Logger = std::function<void(std::string_view line)>;

    explicit ChatClient(ChatEndpoint ep, Logger log = {});

    /// Retries timeouts, transport failures and 5xx with exponential backoff
    /// up to max_retries; 4xx fails at once. Throws Timeout, HttpError,
    /// MalformedResponse, Io.
    ChatResult complete(const PromptBundle& prompt, std::string_view case_id = {}) const;

    const ChatEndpoint& endpoint() const noexcept { return ep_; }

private:
    ChatEndpoint ep_;
    Logger log_;
};

struct NarrativeResult {
    std::string narrative;
    evaluation::TumorLabels labels;  // as read back from the narrative
    int attempts = 0;
    std::vector<std::string> mismatches;  // from the final attempt
};

/// Style adaptation with a consistency check: the narrative is labelled by the
/// model and compared with `expected`; one corrective re-prompt, then
/// Consistency is thrown listing the disagreeing organs.
NarrativeResult generate_narrative(const ChatClient& client, std::string_view structured,
                                   const std::vector<std::string>& examples,
                                   const evaluation::TumorLabels& expected, std::string_view case_id = {});

/// Fusion of clinical notes into the structured report; returns the text
/// between markers.
std::string generate_fusion(const ChatClient& client, std::string_view notes, std::string_view structured,
                            std::string_view case_id = {});

/// Organs whose labels differ, formatted "liver (expected yes, found no)".
std::vector<std::string> label_mismatches(const evaluation::TumorLabels& expected,
                                          const evaluation::TumorLabels& found);

}  // namespace radrep::textgen
