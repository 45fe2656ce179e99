#include <doctest.h>

#include "radrep/config.hpp"
#include "radrep/error.hpp"

using namespace radrep;

TEST_CASE("defaults are the published values") {
    const Config c;
    CHECK(c.presence.pancreas_mm3 == 1.0);
    CHECK(c.presence.kidney_mm3 == 150.0);
    CHECK(c.presence.liver_mm3 == 100.0);
    CHECK(c.presence.metastases_mm3 == 50.0);
    CHECK(c.diagnostics.spleen_large_cm3 == 314.5);
    CHECK(c.diagnostics.spleen_massive_cm3 == 430.8);
    CHECK(c.diagnostics.kidneys_large_cm3 == 415.2);
    CHECK(c.diagnostics.pancreas_large_cm3 == 83.0);
    CHECK(c.diagnostics.fatty_liver_hu == 40.0);
    CHECK(c.diagnostics.fatty_pancreas_ratio == 0.7);
    CHECK(c.style_examples == 10);
    CHECK(c.small_tumor_cutoff_cm == 2.0);
    CHECK(c.chat.temperature == 0.0);
    CHECK(c.uncertain_policy == evaluation::UncertainPolicy::Drop);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("the annotated default file parses to the defaults") {
    const std::string text = default_config_text();
    CHECK(text.find("//") != std::string::npos);
    CHECK(config_to_json(config_from_json(text)) == config_to_json(Config{}));
}

TEST_CASE("round trip and partial files") {
    Config c;
    c.presence.kidney_mm3 = 200;
    c.diagnostics.fatty_liver_hu = 45;
    c.jobs = 4;
    c.mode = report::GenerationMode::Automated;
    c.measurement_grid = {0.5, 0.5, 0.5};
    c.chat.model = "other";
    c.uncertain_policy = evaluation::UncertainPolicy::AsYes;
    const std::string j = config_to_json(c);
    CHECK(config_to_json(config_from_json(j)) == j);

    const Config p = config_from_json(R"({
        // only one override
        "presence_mm3": {"liver": 250}
    })");
    CHECK(p.presence.liver_mm3 == 250);
    CHECK(p.presence.kidney_mm3 == 150);
    CHECK(config_from_json("{}").jobs == 1);
}

TEST_CASE("bad files are rejected with a location") {
    try {
        config_from_json(R"({"presence_mm3": {"lung": 3}})");
        FAIL("no error");
    } catch (const SchemaError& e) {
        CHECK(e.pointer() == "/presence_mm3/lung");
    }
    CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), SchemaError);
    CHECK_THROWS_AS(config_from_json(R"({"version": 2})"), SchemaError);
    CHECK_THROWS_AS(config_from_json(R"({"jobs": "many"})"), SchemaError);
    CHECK_THROWS_AS(config_from_json("{ \"jobs\": 1"), ParseError);
    CHECK_THROWS_AS(config_from_json(R"({"jobs": 0})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"presence_mm3": {"liver": -1}})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"chat": {"base_url": "not a url"}})"), Error);
}

TEST_CASE("comments are stripped outside strings only") {
    const Config c = config_from_json(R"({
        "chat": {"base_url": "http://host:1/v1", // trailing comment
                 "model": "a//b"}
    })");
    CHECK(c.chat.base_url == "http://host:1/v1");
    CHECK(c.chat.model == "a//b");
}
