#include <doctest.h>

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "radrep/error.hpp"
#include "radrep/textgen.hpp"
#include "testing.hpp"

using namespace radrep;
using namespace radrep::textgen;
using evaluation::Label;
using evaluation::TumorLabels;
using nlohmann::json;

namespace {

const std::filesystem::path kGolden = RADREP_GOLDEN_DIR;

struct Fixture {
    std::string structured;
    std::vector<std::string> examples;
    std::string notes;
};

Fixture fixture() {
    const json j = json::parse(testing::slurp(kGolden / "prompt_fixture.json"));
    return {j["structured"], j["examples"].get<std::vector<std::string>>(), j["notes"]};
}

TumorLabels labels(Label l, Label k, Label p) {
    TumorLabels t;
    t.liver = l;
    t.kidney = k;
    t.pancreas = p;
    return t;
}

std::string reply(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

/// Chat-completion stand-in on a loopback port. The handler sees the parsed
/// request and the 0-based call number.
class MockServer {
public:
    using Handler = std::function<void(const json& req, int call, httplib::Response& res)>;

    explicit MockServer(Handler h) : handler_(std::move(h)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            int call;
            {
                std::lock_guard<std::mutex> lock(mu_);
                call = calls_++;
                requests_.push_back(json::parse(req.body));
            }
            handler_(requests_.back(), call, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    ChatEndpoint endpoint() const {
        ChatEndpoint ep;
        ep.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        ep.model = "mock";
        ep.timeout_s = 2;
        ep.max_retries = 3;
        ep.backoff_initial_s = 0.01;
        return ep;
    }
    int calls() const {
        std::lock_guard<std::mutex> lock(mu_);
        return calls_;
    }
    json request(std::size_t i) const {
        std::lock_guard<std::mutex> lock(mu_);
        return requests_.at(i);
    }

private:
    Handler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    int calls_ = 0;
    std::vector<json> requests_;
};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("golden prompts match byte for byte") {
    const Fixture f = fixture();
    const PromptBundle style = build_style_prompt(f.structured, f.examples);
    const PromptBundle fusion = build_fusion_prompt(f.notes, f.structured);
    const PromptBundle label = build_label_prompt(f.structured);
    CHECK(style.kind == PromptKind::Style);
    CHECK(style.user == testing::slurp(kGolden / "style_prompt.txt"));
    CHECK(fusion.user == testing::slurp(kGolden / "fusion_prompt.txt"));
    CHECK(label.user == testing::slurp(kGolden / "label_prompt.txt"));
    CHECK(template_text(PromptKind::Style) == testing::slurp(kGolden / "style_template.txt"));
    CHECK(template_text(PromptKind::Fusion) == testing::slurp(kGolden / "fusion_template.txt"));
    CHECK(template_text(PromptKind::Label) == testing::slurp(kGolden / "label_template.txt"));
}

TEST_CASE("prompts are deterministic and fully filled") {
    const Fixture f = fixture();
    CHECK(build_style_prompt(f.structured, f.examples).user == build_style_prompt(f.structured, f.examples).user);
    for (const auto& p : {build_style_prompt(f.structured, f.examples), build_fusion_prompt(f.notes, f.structured),
                          build_label_prompt(f.structured)}) {
        for (const char* ph : {"{examples}", "{structured_report}", "{clinical_info}", "{report_text}", "{n}"})
            CHECK(p.user.find(ph) == std::string::npos);
    }
    const std::string style = build_style_prompt(f.structured, f.examples).user;
    CHECK(style.find("Do Not Alter Medical Information") != std::string::npos);
    CHECK(build_label_prompt("r").user.find("tumor presence") != std::string::npos);
}

TEST_CASE("style prompt carries every example") {
    std::vector<std::string> ten;
    for (int i = 1; i <= 10; ++i) ten.push_back("Example body number " + std::to_string(i) + ".");
    const std::string p = build_style_prompt("FINDINGS: none.", ten).user;
    for (int i = 1; i <= 10; ++i) {
        CHECK(p.find("Report " + std::to_string(i) + ":\n") != std::string::npos);
        CHECK(p.find("Example body number " + std::to_string(i) + ".") != std::string::npos);
    }
    CHECK(p.find("Report 11:") == std::string::npos);
}

TEST_CASE("empty inputs are rejected") {
    CHECK(code_of([] { build_style_prompt("FINDINGS", {}); }) == ErrorCode::EmptyInput);
    CHECK(code_of([] { build_style_prompt("", {"x"}); }) == ErrorCode::EmptyInput);
    CHECK(code_of([] { build_fusion_prompt("", "r"); }) == ErrorCode::EmptyInput);
    CHECK(code_of([] { build_fusion_prompt("n", ""); }) == ErrorCode::EmptyInput);
    CHECK(code_of([] { build_label_prompt(""); }) == ErrorCode::EmptyInput);
}

TEST_CASE("example selection") {
    std::vector<ExampleReport> pool;
    for (int i = 0; i < 12; ++i) pool.push_back({"l" + std::to_string(i), "liver " + std::to_string(i),
                                                  labels(Label::Yes, Label::No, Label::No)});
    pool.insert(pool.begin() + 3, {"k", "kidney", labels(Label::No, Label::Yes, Label::No)});
    const auto got = select_examples(pool, labels(Label::Yes, Label::No, Label::No), 10);
    REQUIRE(got.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(got[static_cast<std::size_t>(i)].id == "l" + std::to_string(i));
    CHECK(select_examples(pool, labels(Label::No, Label::No, Label::Yes), 10).empty());
    CHECK(select_examples(pool, labels(Label::No, Label::Yes, Label::No), 10).size() == 1);
}

TEST_CASE("markers") {
    CHECK(extract_between_markers("#start A #end Justification: none") == "A");
    CHECK(extract_between_markers("pre #start\n  body\n#end") == "body");
    CHECK(extract_between_markers("#start a #start b #end c") == "a #start b");
    CHECK(code_of([] { extract_between_markers("no markers"); }) == ErrorCode::MarkersMissing);
    CHECK(code_of([] { extract_between_markers("#start open"); }) == ErrorCode::MarkersMissing);
    CHECK(code_of([] { extract_between_markers("#end #start"); }) == ErrorCode::MarkersMissing);
}

TEST_CASE("property: extract inverts wrap for marker-free bodies") {
    testing::Lcg rng(91);
    const std::string alphabet = "abcXYZ 019.,;:\n\t-+/#()";
    for (int trial = 0; trial < 500; ++trial) {
        std::string body;
        const auto n = rng.range(1, 80);
        for (std::int64_t i = 0; i < n; ++i) body += alphabet[static_cast<std::size_t>(rng.range(0, static_cast<std::int64_t>(alphabet.size()) - 1))];
        const auto b = body.find_first_not_of(" \n\t"), e = body.find_last_not_of(" \n\t");
        if (b == std::string::npos) continue;
        body = body.substr(b, e - b + 1);
        if (body.find("#start") != std::string::npos || body.find("#end") != std::string::npos) continue;
        CHECK(extract_between_markers(wrap_with_markers(body)) == body);
    }
}

TEST_CASE("label mismatches") {
    const auto m = label_mismatches(labels(Label::Yes, Label::No, Label::No), labels(Label::No, Label::No, Label::Yes));
    REQUIRE(m.size() == 2);
    CHECK(m[0] == "liver (expected yes, found no)");
    CHECK(m[1] == "pancreas (expected no, found yes)");
    CHECK(label_mismatches(TumorLabels{}, TumorLabels{}).empty());
}

TEST_CASE("endpoint validation") {
    ChatEndpoint ep;
    CHECK(ep.valid());
    ep.base_url = "ftp://x";
    CHECK_FALSE(ep.valid());
    ep.base_url = "http://h";
    ep.timeout_s = 0;
    CHECK_FALSE(ep.valid());
}

TEST_CASE("mock endpoint: request shape and marker extraction") {
    MockServer srv([](const json&, int, httplib::Response& res) {
        res.set_content(reply("#start X #end because"), "application/json");
    });
    ChatEndpoint ep = srv.endpoint();
    ep.api_key = "k";
    std::vector<std::string> log;
    ChatClient client(ep, [&](std::string_view l) { log.emplace_back(l); });
    const Fixture f = fixture();
    CHECK(generate_fusion(client, f.notes, f.structured, "case9") == "X");
    const json req = srv.request(0);
    CHECK(req["model"] == "mock");
    CHECK(req["temperature"] == 0.0);
    CHECK(req["messages"].back()["role"] == "user");
    CHECK(req["messages"].back()["content"] == build_fusion_prompt(f.notes, f.structured).user);
    REQUIRE_FALSE(log.empty());
    CHECK(json::parse(log.back())["case_id"] == "case9");
}

TEST_CASE("mock endpoint: 5xx is retried") {
    MockServer srv([](const json&, int call, httplib::Response& res) {
        if (call == 0) {
            res.status = 500;
            res.set_content("boom", "text/plain");
            return;
        }
        res.set_content(reply("ok"), "application/json");
    });
    const ChatResult r = ChatClient(srv.endpoint()).complete(build_label_prompt("x"));
    CHECK(r.content == "ok");
    CHECK(r.retries == 1);
    CHECK(srv.calls() == 2);
}

TEST_CASE("mock endpoint: persistent 5xx stops at the cap") {
    MockServer srv([](const json&, int, httplib::Response& res) {
        res.status = 503;
        res.set_content("busy", "text/plain");
    });
    try {
        ChatClient(srv.endpoint()).complete(build_label_prompt("x"));
        FAIL("no error");
    } catch (const HttpError& e) {
        CHECK(e.status() == 503);
    }
    CHECK(srv.calls() == 4);
}

TEST_CASE("mock endpoint: 4xx is never retried") {
    MockServer srv([](const json&, int, httplib::Response& res) {
        res.status = 400;
        res.set_content("bad", "text/plain");
    });
    try {
        ChatClient(srv.endpoint()).complete(build_label_prompt("x"));
        FAIL("no error");
    } catch (const HttpError& e) {
        CHECK(e.status() == 400);
        CHECK(e.code() == ErrorCode::Http);
    }
    CHECK(srv.calls() == 1);
}

TEST_CASE("mock endpoint: persistent timeout") {
    MockServer srv([](const json&, int, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content(reply("late"), "application/json");
    });
    ChatEndpoint ep = srv.endpoint();
    ep.timeout_s = 0.2;
    ep.max_retries = 1;
    CHECK(code_of([&] { ChatClient(ep).complete(build_label_prompt("x")); }) == ErrorCode::Timeout);
    CHECK(srv.calls() == 2);
}

TEST_CASE("mock endpoint: malformed responses") {
    for (const std::string& body : {std::string("not json"), std::string(R"({"choices": []})"),
                                   std::string(R"({"choices": [{"message": {"content": 5}}]})")}) {
        MockServer srv([body](const json&, int, httplib::Response& res) { res.set_content(body, "application/json"); });
        CAPTURE(body);
        CHECK(code_of([&] { ChatClient(srv.endpoint()).complete(build_label_prompt("x")); }) ==
              ErrorCode::MalformedResponse);
        CHECK(srv.calls() == 1);
    }
}

TEST_CASE("unreachable endpoint is an I/O error after retries") {
    ChatEndpoint ep;
    ep.base_url = "http://127.0.0.1:1/v1";
    ep.max_retries = 1;
    ep.backoff_initial_s = 0.01;
    ep.timeout_s = 1;
    const ErrorCode c = code_of([&] { ChatClient(ep).complete(build_label_prompt("x")); });
    CHECK((c == ErrorCode::Io || c == ErrorCode::Timeout));
}

TEST_CASE("narrative: consistent on the first attempt") {
    MockServer srv([](const json& req, int, httplib::Response& res) {
        const std::string prompt = req["messages"].back()["content"];
        if (prompt.find("#start") != std::string::npos && prompt.find("Report 1:") != std::string::npos)
            res.set_content(reply("#start A 2 cm liver lesion. #end"), "application/json");
        else
            res.set_content(reply("liver tumor presence=yes; kidney tumor presence=no; pancreas tumor presence=no"),
                            "application/json");
    });
    const NarrativeResult r = generate_narrative(ChatClient(srv.endpoint()), "FINDINGS: liver lesion.", {"ex"},
                                                 labels(Label::Yes, Label::No, Label::No));
    CHECK(r.narrative == "A 2 cm liver lesion.");
    CHECK(r.attempts == 1);
    CHECK(r.mismatches.empty());
    CHECK(srv.calls() == 2);
    CHECK(srv.request(1)["messages"].back()["content"] == build_label_prompt("A 2 cm liver lesion.").user);
}

TEST_CASE("narrative: one corrective re-prompt") {
    MockServer srv([](const json&, int call, httplib::Response& res) {
        switch (call) {
            case 0: res.set_content(reply("#start Normal study. #end"), "application/json"); break;
            case 1:
                res.set_content(reply("liver tumor presence=no; kidney tumor presence=no; pancreas tumor presence=no"),
                                "application/json");
                break;
            case 2: res.set_content(reply("#start Liver lesion. #end"), "application/json"); break;
            default:
                res.set_content(reply("liver tumor presence=yes; kidney tumor presence=no; pancreas tumor presence=no"),
                                "application/json");
        }
    });
    const NarrativeResult r = generate_narrative(ChatClient(srv.endpoint()), "FINDINGS: liver lesion.", {"ex"},
                                                 labels(Label::Yes, Label::No, Label::No));
    CHECK(r.attempts == 2);
    CHECK(r.narrative == "Liver lesion.");
    const std::string second = srv.request(2)["messages"].back()["content"];
    CHECK(second.find("liver (expected yes, found no)") != std::string::npos);
}

TEST_CASE("narrative: persistent disagreement raises Consistency") {
    MockServer srv([](const json&, int call, httplib::Response& res) {
        if (call % 2 == 0) res.set_content(reply("#start Normal. #end"), "application/json");
        else
            res.set_content(reply("liver tumor presence=no; kidney tumor presence=no; pancreas tumor presence=no"),
                            "application/json");
    });
    try {
        generate_narrative(ChatClient(srv.endpoint()), "FINDINGS: pancreas mass.", {"ex"},
                           labels(Label::No, Label::No, Label::Yes));
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Consistency);
        CHECK(std::string(e.what()).find("pancreas") != std::string::npos);
    }
    CHECK(srv.calls() == 4);
}
