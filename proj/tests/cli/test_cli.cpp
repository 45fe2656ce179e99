#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <functional>
#include <mutex>
#include <thread>

#include "radrep/nifti.hpp"
#include "radrep/phantom.hpp"
#include "testing.hpp"

using namespace radrep;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out, err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const std::vector<std::string>& args, const fs::path& scratch) {
    std::string cmd = quote(RADREP_EXE);
    for (const auto& a : args) cmd += " " + quote(a);
    const fs::path err = scratch / "stderr.txt";
    cmd += " 2>" + quote(err.string());
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = testing::slurp(err);
    return r;
}

/// Writes a scenario through the CLI and returns its manifest path.
fs::path make_case(const testing::TempDir& dir, const std::string& scenario) {
    const Run r = run({"phantom", scenario, "--out", (dir / "cases").string()}, dir.path());
    REQUIRE(r.status == 0);
    return json::parse(r.out)["manifest"].get<std::string>();
}

std::string reply(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

/// Loopback chat endpoint answering every request with handler(prompt).
class MockChat {
public:
    explicit MockChat(std::function<std::string(const std::string&)> h) : handler_(std::move(h)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard<std::mutex> lock(mu_);
                ++calls_;
            }
            const std::string prompt = json::parse(req.body)["messages"].back()["content"];
            res.set_content(reply(handler_(prompt)), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockChat() {
        server_.stop();
        thread_.join();
    }
    std::string config() const {
        return json{{"chat",
                     {{"base_url", "http://127.0.0.1:" + std::to_string(port_) + "/v1"},
                      {"timeout_s", 2},
                      {"max_retries", 1},
                      {"backoff_initial_s", 0.01}}}}
            .dump();
    }
    int calls() const {
        std::lock_guard<std::mutex> lock(mu_);
        return calls_;
    }

private:
    std::function<std::string(const std::string&)> handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    int calls_ = 0;
};

bool is_label_prompt(const std::string& p) { return p.find("#start") == std::string::npos; }

void write_examples(const fs::path& dir, const std::string& labels_row) {
    std::string csv = "id,liver,kidney,pancreas\n";
    for (int i = 0; i < 3; ++i) {
        const std::string id = "ex" + std::to_string(i);
        csv += id + "," + labels_row + "\n";
        testing::spit(dir / (id + ".txt"), "Example report " + std::to_string(i) + ".");
    }
    testing::spit(dir / "labels.csv", csv);
}

}  // namespace

TEST_CASE("report on the encasement phantom stages T4") {
    testing::TempDir dir("cli-t4");
    const fs::path manifest = make_case(dir, "t4_encasement");
    const Run r = run({"report", manifest.string(), "--out", (dir / "out").string()}, dir.path());
    CHECK(r.status == 0);
    const std::string text = testing::slurp(dir / "out" / "t4_encasement.report.txt");
    CHECK(text.find("T stage: T4") != std::string::npos);
    CHECK(text.find("SMA: contact over") != std::string::npos);
    CHECK(text.find("Pancreatic head/body") != std::string::npos);
    const json log = json::parse(r.err.substr(0, r.err.find('\n')));
    CHECK(log["status"] == "ok");
    CHECK(log["stages"].contains("staging"));
}

TEST_CASE("a missing mask file exits 2 and names the path") {
    testing::TempDir dir("cli-missing");
    const fs::path manifest = make_case(dir, "control");
    fs::remove(manifest.parent_path() / "masks" / "SMA.nii.gz");
    const Run r = run({"report", manifest.string(), "--out", (dir / "out").string()}, dir.path());
    CHECK(r.status == 2);
    CHECK(r.err.find("SMA.nii.gz") != std::string::npos);
}

TEST_CASE("control phantom reports unremarkable organs") {
    testing::TempDir dir("cli-control");
    const fs::path manifest = make_case(dir, "control");
    REQUIRE(run({"report", manifest.string(), "--out", (dir / "out").string()}, dir.path()).status == 0);
    const std::string text = testing::slurp(dir / "out" / "control.report.txt");
    CHECK(text.find("Liver: unremarkable.") != std::string::npos);
    CHECK(text.find("No tumor detected") != std::string::npos);
}

TEST_CASE("narrative: examples, consistency and success") {
    testing::TempDir dir("cli-narrative");
    const fs::path manifest = make_case(dir, "liver_small");
    REQUIRE(run({"report", manifest.string(), "--out", (dir / "out").string()}, dir.path()).status == 0);
    const std::string report = (dir / "out" / "liver_small.report.json").string();

    SUBCASE("no example shares the label set") {
        write_examples(dir / "ex", "no,no,no");
        MockChat chat([](const std::string&) { return std::string("unused"); });
        testing::spit(dir / "cfg.json", chat.config());
        const Run r = run({"narrative", report, "--examples", (dir / "ex").string(), "--config",
                           (dir / "cfg.json").string()},
                          dir.path());
        CHECK(r.status == 4);
        CHECK(r.err.find("no style examples for label set") != std::string::npos);
        CHECK(chat.calls() == 0);
    }
    SUBCASE("persistent disagreement exits 3") {
        write_examples(dir / "ex", "yes,no,no");
        MockChat chat([](const std::string& p) {
            return is_label_prompt(p) ? "liver tumor presence=no; kidney tumor presence=no; pancreas tumor presence=no"
                                      : "#start Normal study. #end";
        });
        testing::spit(dir / "cfg.json", chat.config());
        const Run r = run({"narrative", report, "--examples", (dir / "ex").string(), "--config",
                           (dir / "cfg.json").string(), "--out", (dir / "n").string()},
                          dir.path());
        CHECK(r.status == 3);
        CHECK(r.err.find("liver") != std::string::npos);
    }
    SUBCASE("agreeing narrative is written") {
        write_examples(dir / "ex", "yes,no,no");
        MockChat chat([](const std::string& p) {
            return is_label_prompt(p) ? "liver tumor presence=yes; kidney tumor presence=no; pancreas tumor presence=no"
                                      : "#start Small hepatic lesion. #end";
        });
        testing::spit(dir / "cfg.json", chat.config());
        fs::create_directories(dir / "n");
        const Run r = run({"narrative", report, "--examples", (dir / "ex").string(), "--config",
                           (dir / "cfg.json").string(), "--out", (dir / "n").string()},
                          dir.path());
        CHECK(r.status == 0);
        CHECK(json::parse(r.out)["examples"] == 3);
        CHECK(testing::slurp(dir / "n" / "liver_small.narrative.txt") == "Small hepatic lesion.\n");
    }
}

TEST_CASE("unreachable endpoint exits 6") {
    testing::TempDir dir("cli-endpoint");
    const fs::path manifest = make_case(dir, "liver_small");
    REQUIRE(run({"report", manifest.string(), "--out", (dir / "out").string()}, dir.path()).status == 0);
    testing::spit(dir / "notes.txt", "History of hepatitis.");
    testing::spit(dir / "cfg.json",
                  R"({"chat": {"base_url": "http://127.0.0.1:9/v1", "timeout_s": 1, "max_retries": 0}})");
    const Run r = run({"fuse", (dir / "out" / "liver_small.report.json").string(), "--notes",
                       (dir / "notes.txt").string(), "--config", (dir / "cfg.json").string()},
                      dir.path());
    CHECK(r.status == 6);
}

TEST_CASE("evaluate reproduces the liver column from label files") {
    testing::TempDir dir("cli-eval");
    std::string truth = "case_id,liver,kidney,pancreas,liver_size_cm\n";
    int id = 0;
    const auto add = [&](bool t, bool p, const std::string& size) {
        const std::string name = "c" + std::to_string(id++);
        truth += name + "," + (t ? "yes" : "no") + ",no,no," + size + "\n";
        testing::spit(dir / "pred" / (name + ".labels.txt"), std::string("liver tumor presence=") + (p ? "yes" : "no") +
                                                                 "; kidney tumor presence=no; pancreas tumor presence=no");
    };
    for (int i = 0; i < 301; ++i) add(true, i < 269, "3.5");
    for (int i = 0; i < 142; ++i) add(true, i < 113, "1.5");
    for (int i = 0; i < 244; ++i) add(false, i >= 179, "");
    testing::spit(dir / "truth.csv", truth);

    const Run r = run({"evaluate", (dir / "pred").string(), (dir / "truth.csv").string()}, dir.path());
    REQUIRE(r.status == 0);
    CHECK(r.out.find("liver,large,269,65,179,32,89.4,73.4,") != std::string::npos);
    CHECK(r.out.find("liver,small,113,65,179,29,79.6,73.4,") != std::string::npos);

    const Run j = run({"evaluate", (dir / "pred").string(), (dir / "truth.csv").string(), "--json"}, dir.path());
    REQUIRE(j.status == 0);
    CHECK(json::parse(j.out)[1]["sensitivity"] == "79.6");
}

TEST_CASE("evaluate: empty predictions") {
    testing::TempDir dir("cli-eval-empty");
    fs::create_directories(dir / "pred");
    testing::spit(dir / "truth.csv", "case_id,liver,kidney,pancreas\nc0,yes,no,no\n");
    CHECK(run({"evaluate", (dir / "pred").string(), (dir / "truth.csv").string()}, dir.path()).status == 5);
    testing::spit(dir / "none.csv", "case_id,liver,kidney,pancreas\n");
    const Run r = run({"evaluate", (dir / "pred").string(), (dir / "none.csv").string()}, dir.path());
    CHECK(r.status == 0);
    CHECK(r.out.find("liver,all,0,0,0,0,NA,NA,NA") != std::string::npos);
}

TEST_CASE("measure, denoise and subsegment on mask files") {
    testing::TempDir dir("cli-masks");
    const Mask sphere = testing::voxelize(phantom::Shape::sphere({20, 20, 20}, 10), {41, 41, 41}, {}, "liver_tumor");
    nifti::save(sphere, dir / "sphere.nii.gz");
    const Run m = run({"measure", (dir / "sphere.nii.gz").string(), "--organ", "liver"}, dir.path());
    REQUIRE(m.status == 0);
    const json mj = json::parse(m.out);
    CHECK(mj["D_cm"].get<double>() == doctest::Approx(2.0));
    CHECK(mj["instance_count"] == 1);

    const fs::path manifest = make_case(dir, "noisy");
    const fs::path masks = manifest.parent_path() / "masks";
    const Run d = run({"denoise", (masks / "pancreatic_tumor.nii.gz").string(), "--organ", "pancreas", "--out",
                       (dir / "clean.nii.gz").string()},
                      dir.path());
    REQUIRE(d.status == 0);
    CHECK(json::parse(d.out)["present"] == true);
    const Mask in = nifti::load_mask(masks / "pancreatic_tumor.nii.gz");
    const Mask out = nifti::load_mask(dir / "clean.nii.gz");
    CHECK(testing::count_in(out, in) == out.count());
    CHECK(out.count() < in.count());

    const Run s = run({"subsegment", (masks / "pancreas.nii.gz").string(), "--sma", (masks / "SMA.nii.gz").string(),
                       "--out", (dir / "parts").string()},
                      dir.path());
    REQUIRE(s.status == 0);
    const json sj = json::parse(s.out);
    CHECK(sj["head_voxels"].get<std::size_t>() + sj["body_voxels"].get<std::size_t>() +
              sj["tail_voxels"].get<std::size_t>() ==
          sj["pancreas_voxels"].get<std::size_t>());
    const Mask head = nifti::load_mask(dir / "parts" / "pancreas_head.nii.gz");
    const Mask tail = nifti::load_mask(dir / "parts" / "pancreas_tail.nii.gz");
    CHECK(testing::count_in(head, tail) == 0);
}

TEST_CASE("batch output does not depend on --jobs") {
    testing::TempDir dir("cli-jobs");
    std::vector<std::string> manifests;
    for (const char* s : {"control", "liver_small", "t2", "kidney_large"}) manifests.push_back(make_case(dir, s));
    auto args = [&](const std::string& out, const std::string& jobs) {
        std::vector<std::string> a{"report"};
        a.insert(a.end(), manifests.begin(), manifests.end());
        a.insert(a.end(), {"--out", (dir / out).string(), "--jobs", jobs});
        return a;
    };
    REQUIRE(run(args("j1", "1"), dir.path()).status == 0);
    REQUIRE(run(args("j4", "4"), dir.path()).status == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "j1")) {
        CAPTURE(e.path().filename().string());
        CHECK(testing::slurp(e.path()) == testing::slurp(dir / "j4" / e.path().filename()));
        ++files;
    }
    CHECK(files == 8);
}

TEST_CASE("usage errors and the default config") {
    testing::TempDir dir("cli-usage");
    CHECK(run({"report"}, dir.path()).status != 0);
    CHECK(run({"frobnicate"}, dir.path()).status != 0);
    const Run c = run({"config"}, dir.path());
    CHECK(c.status == 0);
    testing::spit(dir / "default.json", c.out);
    CHECK(run({"config", "--check", "--config", (dir / "default.json").string()}, dir.path()).status == 0);
    testing::spit(dir / "bad.json", R"({"presence_mm3": {"lung": 1}})");
    const Run bad = run({"config", "--check", "--config", (dir / "bad.json").string()}, dir.path());
    CHECK(bad.status == 2);
    CHECK(bad.err.find("/presence_mm3/lung") != std::string::npos);
}
