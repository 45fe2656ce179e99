#include "radrep/config.hpp"

#include <algorithm>
#include <initializer_list>

#include "json_util.hpp"
#include "radrep/error.hpp"

namespace radrep {

using nlohmann::json;
namespace ju = jsonutil;

void Config::validate() const {
    const auto bad = [](const char* field) { throw Error(ErrorCode::InvalidArgument, std::string("config: invalid ") + field); };
    if (!presence.valid()) bad("presence_mm3");
    if (!diagnostics.valid()) bad("diagnostics");
    if (!(attenuation_delta_hu >= 0)) bad("attenuation_delta_hu");
    if (!measurement_grid.valid()) bad("measurement_grid_mm");
    if (!(contact.bin_mm > 0) || !(contact.segment_half_mm > 0) || !(contact.sample_mm > 0) ||
        !(contact.window_half_mm > contact.sample_mm))
        bad("contact");
    if (!chat.valid()) bad("chat");
    if (style_examples == 0) bad("style_examples");
    if (!(small_tumor_cutoff_cm > 0)) bad("evaluation.small_tumor_cutoff_cm");
    if (jobs < 1) bad("jobs");
}

namespace {

void only_keys(const json& obj, const std::string& ptr, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw SchemaError(ju::child(ptr, key), "unknown key");
}

void read(const json& obj, const std::string& ptr, std::string_view key, double& out) {
    if (const auto v = ju::opt_number(obj, ptr, key)) out = *v;
}

void read_int(const json& obj, const std::string& ptr, std::string_view key, int& out) {
    if (const json* v = ju::optional_field(obj, key)) out = static_cast<int>(ju::as_int(*v, ju::child(ptr, key)));
}

const json* section(const json& root, std::string_view key) {
    const json* s = ju::optional_field(root, key);
    if (s) ju::expect_object(*s, ju::child("", key));
    return s;
}

std::array<double, 3> triple(const json& j, const std::string& ptr) {
    ju::expect_array(j, ptr);
    if (j.size() != 3) throw SchemaError(ptr, "expected three numbers");
    return {ju::as_number(j[0], ju::child(ptr, 0)), ju::as_number(j[1], ju::child(ptr, 1)),
            ju::as_number(j[2], ju::child(ptr, 2))};
}

}  // namespace

Config config_from_json(std::string_view text) {
    const json root = ju::parse(text, true);
    ju::expect_object(root, "");
    only_keys(root, "", {"version", "mode", "jobs", "presence_mm3", "diagnostics", "attenuation_delta_hu",
                         "measurement_grid_mm", "contact", "chat", "style_examples", "evaluation"});
    Config c;
    if (const json* v = ju::optional_field(root, "version"); v && ju::as_int(*v, "/version") != kConfigVersion)
        throw SchemaError("/version", "unsupported config version");
    if (const auto m = ju::opt_string(root, "", "mode")) {
        try {
            c.mode = report::parse_mode(*m);
        } catch (const Error&) {
            throw SchemaError("/mode", "unknown mode '" + *m + "'");
        }
    }
    read_int(root, "", "jobs", c.jobs);
    read(root, "", "attenuation_delta_hu", c.attenuation_delta_hu);
    if (const json* v = ju::optional_field(root, "style_examples")) {
        const auto n = ju::as_int(*v, "/style_examples");
        if (n < 0) throw SchemaError("/style_examples", "must be non-negative");
        c.style_examples = static_cast<std::size_t>(n);
    }
    if (const json* g = ju::optional_field(root, "measurement_grid_mm")) {
        const auto t = triple(*g, "/measurement_grid_mm");
        c.measurement_grid = {t[0], t[1], t[2]};
    }
    if (const json* s = section(root, "presence_mm3")) {
        only_keys(*s, "/presence_mm3", {"pancreas", "kidney", "liver", "metastases"});
        read(*s, "/presence_mm3", "pancreas", c.presence.pancreas_mm3);
        read(*s, "/presence_mm3", "kidney", c.presence.kidney_mm3);
        read(*s, "/presence_mm3", "liver", c.presence.liver_mm3);
        read(*s, "/presence_mm3", "metastases", c.presence.metastases_mm3);
    }
    if (const json* s = section(root, "diagnostics")) {
        const std::string p = "/diagnostics";
        only_keys(*s, p, {"spleen_large_cm3", "spleen_massive_cm3", "kidneys_large_cm3", "liver_large_cm3",
                          "pancreas_large_cm3", "fatty_liver_hu", "fatty_pancreas_ratio"});
        auto& d = c.diagnostics;
        read(*s, p, "spleen_large_cm3", d.spleen_large_cm3);
        read(*s, p, "spleen_massive_cm3", d.spleen_massive_cm3);
        read(*s, p, "kidneys_large_cm3", d.kidneys_large_cm3);
        read(*s, p, "liver_large_cm3", d.liver_large_cm3);
        read(*s, p, "pancreas_large_cm3", d.pancreas_large_cm3);
        read(*s, p, "fatty_liver_hu", d.fatty_liver_hu);
        read(*s, p, "fatty_pancreas_ratio", d.fatty_pancreas_ratio);
    }
    if (const json* s = section(root, "contact")) {
        const std::string p = "/contact";
        only_keys(*s, p, {"bin_mm", "segment_half_mm", "slice_offsets_mm", "sample_mm", "window_half_mm"});
        read(*s, p, "bin_mm", c.contact.bin_mm);
        read(*s, p, "segment_half_mm", c.contact.segment_half_mm);
        read(*s, p, "sample_mm", c.contact.sample_mm);
        read(*s, p, "window_half_mm", c.contact.window_half_mm);
        if (const json* o = ju::optional_field(*s, "slice_offsets_mm")) {
            const auto t = triple(*o, p + "/slice_offsets_mm");
            std::copy(t.begin(), t.end(), c.contact.slice_offsets_mm);
        }
    }
    if (const json* s = section(root, "chat")) {
        const std::string p = "/chat";
        only_keys(*s, p, {"base_url", "model", "timeout_s", "max_retries", "backoff_initial_s", "temperature"});
        if (const auto v = ju::opt_string(*s, p, "base_url")) c.chat.base_url = *v;
        if (const auto v = ju::opt_string(*s, p, "model")) c.chat.model = *v;
        read(*s, p, "timeout_s", c.chat.timeout_s);
        read_int(*s, p, "max_retries", c.chat.max_retries);
        read(*s, p, "backoff_initial_s", c.chat.backoff_initial_s);
        read(*s, p, "temperature", c.chat.temperature);
    }
    if (const json* s = section(root, "evaluation")) {
        const std::string p = "/evaluation";
        only_keys(*s, p, {"uncertain_policy", "small_tumor_cutoff_cm"});
        if (const auto v = ju::opt_string(*s, p, "uncertain_policy")) {
            try {
                c.uncertain_policy = evaluation::parse_policy(*v);
            } catch (const Error&) {
                throw SchemaError(p + "/uncertain_policy", "unknown policy '" + *v + "'");
            }
        }
        read(*s, p, "small_tumor_cutoff_cm", c.small_tumor_cutoff_cm);
    }
    c.validate();
    return c;
}

std::string config_to_json(const Config& c) {
    const auto& d = c.diagnostics;
    const auto& k = c.contact;
    json j{{"version", kConfigVersion},
           {"mode", report::mode_name(c.mode)},
           {"jobs", c.jobs},
           {"presence_mm3",
            {{"pancreas", c.presence.pancreas_mm3},
             {"kidney", c.presence.kidney_mm3},
             {"liver", c.presence.liver_mm3},
             {"metastases", c.presence.metastases_mm3}}},
           {"diagnostics",
            {{"spleen_large_cm3", d.spleen_large_cm3},
             {"spleen_massive_cm3", d.spleen_massive_cm3},
             {"kidneys_large_cm3", d.kidneys_large_cm3},
             {"liver_large_cm3", d.liver_large_cm3},
             {"pancreas_large_cm3", d.pancreas_large_cm3},
             {"fatty_liver_hu", d.fatty_liver_hu},
             {"fatty_pancreas_ratio", d.fatty_pancreas_ratio}}},
           {"attenuation_delta_hu", c.attenuation_delta_hu},
           {"measurement_grid_mm", {c.measurement_grid.dx, c.measurement_grid.dy, c.measurement_grid.dz}},
           {"contact",
            {{"bin_mm", k.bin_mm},
             {"segment_half_mm", k.segment_half_mm},
             {"slice_offsets_mm", {k.slice_offsets_mm[0], k.slice_offsets_mm[1], k.slice_offsets_mm[2]}},
             {"sample_mm", k.sample_mm},
             {"window_half_mm", k.window_half_mm}}},
           {"chat",
            {{"base_url", c.chat.base_url},
             {"model", c.chat.model},
             {"timeout_s", c.chat.timeout_s},
             {"max_retries", c.chat.max_retries},
             {"backoff_initial_s", c.chat.backoff_initial_s},
             {"temperature", c.chat.temperature}}},
           {"style_examples", c.style_examples},
           {"evaluation",
            {{"uncertain_policy", evaluation::policy_name(c.uncertain_policy)},
             {"small_tumor_cutoff_cm", c.small_tumor_cutoff_cm}}}};
    return j.dump(2) + "\n";
}

std::string default_config_text() {
    return R"({
  // Schema version of this file.
  "version": 1,

  // "ground_truth_masks" trusts the masks as given; "automated" denoises
  // every organ and tumour mask and applies the presence thresholds below.
  "mode": "ground_truth_masks",

  // Cases processed concurrently by batch commands.
  "jobs": 1,

  // Total tumour volume (mm^3) a mask must strictly exceed to count as present.
  "presence_mm3": {
    "pancreas": 1,
    "kidney": 150,
    "liver": 100,
    "metastases": 50
  },

  // Organ-size and fat thresholds. Every comparison is strict.
  "diagnostics": {
    "spleen_large_cm3": 314.5,     // splenomegaly above this volume
    "spleen_massive_cm3": 430.8,   // massive splenomegaly above this volume
    "kidneys_large_cm3": 415.2,    // both kidneys; a single kidney uses half
    "liver_large_cm3": 3000,
    "pancreas_large_cm3": 83,
    "fatty_liver_hu": 40,          // fatty liver when mean HU is below this
    "fatty_pancreas_ratio": 0.7    // fatty pancreas when pancreas/spleen HU is below this
  },

  // Tumour vs. parenchyma HU gap separating hypo/iso/hyper attenuation.
  "attenuation_delta_hu": 10,

  // Grid on which WHO diameters are measured.
  "measurement_grid_mm": [1, 1, 1],

  // Vessel-contact sampling.
  "contact": {
    "bin_mm": 1,                   // step along the vessel centreline
    "segment_half_mm": 2.5,        // half length of the local axis fit
    "slice_offsets_mm": [-1, 0, 1],
    "sample_mm": 1,                // in-plane sampling pitch
    "window_half_mm": 24           // in-plane sampling half width
  },

  // Chat-completion endpoint. The bearer token comes from RADREP_API_KEY.
  "chat": {
    "base_url": "http://127.0.0.1:8000/v1",
    "model": "llama-3.1-70b-instruct",
    "timeout_s": 120,
    "max_retries": 3,
    "backoff_initial_s": 0.5,
    "temperature": 0
  },

  // Example reports shown to the model for style adaptation.
  "style_examples": 10,

  "evaluation": {
    // as_yes, as_no or drop for uncertain labels.
    "uncertain_policy": "drop",
    // Largest tumour diameter (cm) at or below which a case is "small".
    "small_tumor_cutoff_cm": 2.0
  }
}
)";
}

}  // namespace radrep
