#include "radrep/textgen.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <regex>
#include <thread>

#include <httplib.h>

#include "json_util.hpp"
#include "radrep/error.hpp"
#include "radrep_prompts.hpp"

namespace radrep::textgen {

using nlohmann::json;

std::string_view prompt_kind_name(PromptKind k) noexcept {
    switch (k) {
        case PromptKind::Style: return "style";
        case PromptKind::Fusion: return "fusion";
        case PromptKind::Label: return "label";
    }
    return "?";
}

std::string_view template_text(PromptKind k) noexcept {
    switch (k) {
        case PromptKind::Style: return prompts::kStyle;
        case PromptKind::Fusion: return prompts::kFusion;
        case PromptKind::Label: return prompts::kLabel;
    }
    return {};
}

namespace {

std::string trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

bool blank(std::string_view s) { return trim(s).empty(); }

// Single pass: placeholders appearing inside substituted values are left alone.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace

std::vector<ExampleReport> select_examples(const std::vector<ExampleReport>& pool,
                                           const evaluation::TumorLabels& target, std::size_t k) {
    std::vector<ExampleReport> out;
    for (const auto& e : pool) {
        if (out.size() >= k) break;
        if (e.labels == target) out.push_back(e);
    }
    return out;
}

PromptBundle build_style_prompt(std::string_view structured, const std::vector<std::string>& examples) {
    if (blank(structured)) throw Error(ErrorCode::EmptyInput, "structured report is empty");
    if (examples.empty()) throw Error(ErrorCode::EmptyInput, "style prompt needs at least one example report");
    std::string block;
    for (std::size_t i = 0; i < examples.size(); ++i)
        block += "\n\nReport " + std::to_string(i + 1) + ":\n" + trim(examples[i]);
    return {PromptKind::Style, {},
            fill(template_text(PromptKind::Style), {{"n", std::to_string(examples.size())},
                                                     {"examples", block},
                                                     {"structured_report", "\n\n" + trim(structured)}})};
}

PromptBundle build_fusion_prompt(std::string_view notes, std::string_view structured) {
    if (blank(notes)) throw Error(ErrorCode::EmptyInput, "clinical notes are empty");
    if (blank(structured)) throw Error(ErrorCode::EmptyInput, "structured report is empty");
    return {PromptKind::Fusion, {},
            fill(template_text(PromptKind::Fusion),
                 {{"clinical_info", trim(notes)}, {"structured_report", trim(structured)}})};
}

PromptBundle build_label_prompt(std::string_view report_text) {
    if (blank(report_text)) throw Error(ErrorCode::EmptyInput, "report text is empty");
    return {PromptKind::Label, {}, fill(template_text(PromptKind::Label), {{"report_text", trim(report_text)}})};
}

std::string extract_between_markers(std::string_view completion) {
    constexpr std::string_view kStart = "#start", kEnd = "#end";
    const auto b = completion.find(kStart);
    if (b == std::string_view::npos) throw Error(ErrorCode::MarkersMissing, "completion has no #start marker");
    const auto body = b + kStart.size();
    const auto e = completion.find(kEnd, body);
    if (e == std::string_view::npos) throw Error(ErrorCode::MarkersMissing, "completion has no #end marker");
    return trim(completion.substr(body, e - body));
}

std::string wrap_with_markers(std::string_view body) { return "#start\n" + std::string(body) + "\n#end"; }

// ---------------------------------------------------------------------------
// Client

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;  // without trailing slash
};

std::optional<ParsedUrl> parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?)://([^/:]+)(:\d+)?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) return std::nullopt;
    ParsedUrl out{m[1].str() + "://" + m[2].str() + m[3].str(), m[4].str()};
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

}  // namespace

bool ChatEndpoint::valid() const {
    const auto u = parse_url(base_url);
    if (!u) return false;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (base_url.rfind("https", 0) == 0) return false;
#endif
    return !model.empty() && timeout_s > 0 && max_retries >= 0 && backoff_initial_s >= 0;
}

ChatClient::ChatClient(ChatEndpoint ep, Logger log) : ep_(std::move(ep)), log_(std::move(log)) {
    if (!ep_.valid()) throw Error(ErrorCode::InvalidArgument, "invalid chat endpoint '" + ep_.base_url + "'");
}

ChatResult ChatClient::complete(const PromptBundle& prompt, std::string_view case_id) const {
    const auto url = *parse_url(ep_.base_url);
    json messages = json::array();
    if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    const std::string body =
        json{{"model", ep_.model}, {"messages", messages}, {"temperature", ep_.temperature}}.dump();
    const std::string path = url.path + "/chat/completions";

    const auto log = [&](const json& fields) {
        if (!log_) return;
        json line = fields;
        line["case_id"] = std::string(case_id);
        line["prompt"] = prompt_kind_name(prompt.kind);
        log_(line.dump());
    };

    httplib::Client cli(url.scheme_host_port);
    const auto secs = static_cast<time_t>(std::floor(ep_.timeout_s));
    const auto usecs = static_cast<time_t>((ep_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!ep_.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep_.api_key);

    int attempt = 0;
    while (true) {
        const auto t0 = std::chrono::steady_clock::now();
        auto res = cli.Post(path, headers, body, "application/json");
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        bool retryable = false;
        ErrorCode fail_code = ErrorCode::Io;
        int fail_status = 0;
        std::string fail_msg;
        if (!res) {
            const auto err = res.error();
            const bool timeout = err == httplib::Error::Read || err == httplib::Error::Write ||
                                 err == httplib::Error::ConnectionTimeout;
            log({{"event", "chat_error"}, {"attempt", attempt}, {"error", httplib::to_string(err)}, {"ms", ms}});
            fail_code = timeout ? ErrorCode::Timeout : ErrorCode::Io;
            fail_msg = "chat request failed: " + httplib::to_string(err);
            retryable = true;
        } else {
            log({{"event", "chat_response"}, {"attempt", attempt}, {"status", res->status}, {"ms", ms},
                 {"bytes", res->body.size()}});
            if (res->status >= 500) {
                fail_code = ErrorCode::Http;
                fail_status = res->status;
                fail_msg = res->body.substr(0, 200);
                retryable = true;
            } else if (res->status < 200 || res->status >= 300) {
                throw HttpError(res->status, res->body.substr(0, 200));
            } else {
                json reply;
                try {
                    reply = json::parse(res->body);
                } catch (const json::parse_error&) {
                    throw Error(ErrorCode::MalformedResponse, "chat response is not JSON");
                }
                const json* content = nullptr;
                if (reply.is_object() && reply.contains("choices") && reply["choices"].is_array() &&
                    !reply["choices"].empty()) {
                    const json& c0 = reply["choices"][0];
                    if (c0.is_object() && c0.contains("message") && c0["message"].is_object() &&
                        c0["message"].contains("content") && c0["message"]["content"].is_string())
                        content = &c0["message"]["content"];
                }
                if (!content) throw Error(ErrorCode::MalformedResponse, "chat response lacks choices[0].message.content");
                return {content->get<std::string>(), attempt};
            }
        }
        if (!retryable || attempt >= ep_.max_retries) {
            if (fail_code == ErrorCode::Http) throw HttpError(fail_status, fail_msg);
            throw Error(fail_code, fail_msg);
        }
        const double wait = ep_.backoff_initial_s * std::pow(2.0, attempt);
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        ++attempt;
    }
}

// ---------------------------------------------------------------------------
// Orchestration

std::vector<std::string> label_mismatches(const evaluation::TumorLabels& expected,
                                          const evaluation::TumorLabels& found) {
    std::vector<std::string> out;
    for (Organ o : evaluation::kLabelOrgans)
        if (expected.get(o) != found.get(o))
            out.push_back(std::string(organ_name(o)) + " (expected " + std::string(evaluation::label_text(expected.get(o))) +
                          ", found " + std::string(evaluation::label_text(found.get(o))) + ")");
    return out;
}

NarrativeResult generate_narrative(const ChatClient& client, std::string_view structured,
                                   const std::vector<std::string>& examples,
                                   const evaluation::TumorLabels& expected, std::string_view case_id) {
    PromptBundle prompt = build_style_prompt(structured, examples);
    NarrativeResult out;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        out.attempts = attempt;
        out.narrative = extract_between_markers(client.complete(prompt, case_id).content);
        out.labels = evaluation::parse_labels(client.complete(build_label_prompt(out.narrative), case_id).content);
        out.mismatches = label_mismatches(expected, out.labels);
        if (out.mismatches.empty()) return out;
        std::string note = "\n\nYour previous paraphrase disagreed with the structured report on tumor presence for: ";
        for (std::size_t i = 0; i < out.mismatches.size(); ++i) note += (i ? "; " : "") + out.mismatches[i];
        note += ". Keep every tumor finding of the structured report and add none.";
        prompt.user = build_style_prompt(structured, examples).user + note;
    }
    std::string msg = "narrative disagrees with the structured report after re-prompting:";
    for (const auto& m : out.mismatches) msg += " " + m + ";";
    throw Error(ErrorCode::Consistency, msg);
}

std::string generate_fusion(const ChatClient& client, std::string_view notes, std::string_view structured,
                            std::string_view case_id) {
    return extract_between_markers(client.complete(build_fusion_prompt(notes, structured), case_id).content);
}

}  // namespace radrep::textgen
