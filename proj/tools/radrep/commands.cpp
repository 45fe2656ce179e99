#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "manifest.hpp"
#include "radrep/evaluation.hpp"
#include "radrep/measurement.hpp"
#include "radrep/nifti.hpp"
#include "radrep/phantom.hpp"
#include "radrep/pipeline.hpp"
#include "radrep/postprocess.hpp"
#include "radrep/report.hpp"
#include "radrep/subsegment.hpp"
#include "radrep/textgen.hpp"

namespace radrep::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Consistency: return kConsistency;
        case ErrorCode::LengthMismatch: return kEvaluation;
        case ErrorCode::Timeout:
        case ErrorCode::Http:
        case ErrorCode::MalformedResponse:
        case ErrorCode::MarkersMissing: return kEndpoint;
        default: return kInput;
    }
}

Config resolve_config(const Common& c) {
    Config cfg = c.config_path.empty() ? Config{} : config_from_json(read_text(c.config_path));
    if (c.mode) cfg.mode = report::parse_mode(*c.mode);
    if (c.jobs) cfg.jobs = *c.jobs;
    cfg.validate();
    return cfg;
}

namespace {

fs::path out_dir(const Common& c) { return c.out.empty() ? fs::path(".") : fs::path(c.out); }

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::mutex log_mutex;

void log_line(const json& j) {
    std::lock_guard lock(log_mutex);
    std::cerr << j.dump() << "\n";
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

json contact_json(const staging::VesselContact& v) {
    json j{{"vessel", staging::vessel_name(v.vessel)}, {"evaluated", v.evaluated}, {"contact", v.contact}};
    if (v.max_angle_deg) j["max_angle_deg"] = *v.max_angle_deg;
    return j;
}

json stage_json(const staging::TStage& s) {
    json contacts = json::array();
    for (const auto& v : s.contacts) contacts.push_back(contact_json(v));
    return {{"stage", staging::stage_name(s.stage)},
            {"d_max_cm", s.d_max_cm},
            {"d_perp_cm", s.d_perp_cm},
            {"justification", s.justification},
            {"contacts", contacts}};
}

json measurement_json(const measurement::TumorMeasurement& m, int id, bool with_hu) {
    json j{{"instance_id", id},
           {"D_cm", m.d_max_cm},
           {"d_cm", m.d_perp_cm},
           {"slice_index", m.slice_index},
           {"volume_cm3", m.volume_cm3}};
    if (with_hu) {
        j["hu_mean"] = m.hu_mean;
        j["hu_std"] = m.hu_std;
    }
    return j;
}

std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Rows of a headed CSV as column -> value maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p, const std::vector<std::string>& required) {
    std::istringstream in(read_text(p));
    std::string line;
    std::vector<std::string> header;
    std::vector<std::map<std::string, std::string>> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(trim(line));
        if (header.empty()) {
            header = cells;
            for (const auto& r : required)
                if (std::find(header.begin(), header.end(), r) == header.end())
                    throw Error(ErrorCode::Schema, p.string() + ": missing column '" + r + "'");
            continue;
        }
        if (cells.size() != header.size())
            throw Error(ErrorCode::Schema, p.string() + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(header.size()) + " cells");
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    if (header.empty()) throw Error(ErrorCode::Schema, p.string() + ": empty CSV");
    return rows;
}

evaluation::Label parse_label_cell(const std::string& v, const std::string& where) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "yes" || s == "1") return evaluation::Label::Yes;
    if (s == "no" || s == "0") return evaluation::Label::No;
    if (s == "u") return evaluation::Label::Uncertain;
    throw Error(ErrorCode::Schema, where + ": label must be yes, no or U, got '" + v + "'");
}

std::vector<textgen::ExampleReport> load_examples(const fs::path& dir) {
    const fs::path labels = dir / "labels.csv";
    if (!fs::is_regular_file(labels)) throw Error(ErrorCode::Io, "missing file: " + labels.string());
    std::vector<textgen::ExampleReport> pool;
    for (const auto& row : read_csv(labels, {"id", "liver", "kidney", "pancreas"})) {
        textgen::ExampleReport e;
        e.id = row.at("id");
        const std::string where = labels.string() + " (" + e.id + ")";
        e.labels.liver = parse_label_cell(row.at("liver"), where);
        e.labels.kidney = parse_label_cell(row.at("kidney"), where);
        e.labels.pancreas = parse_label_cell(row.at("pancreas"), where);
        const fs::path text = dir / (e.id + ".txt");
        if (!fs::is_regular_file(text)) throw Error(ErrorCode::Io, "missing file: " + text.string());
        e.text = read_text(text);
        pool.push_back(std::move(e));
    }
    return pool;
}

textgen::ChatClient make_client(const Config& cfg) {
    textgen::ChatEndpoint ep = cfg.chat;
    if (const char* key = std::getenv("RADREP_API_KEY")) ep.api_key = key;
    return textgen::ChatClient(ep, [](std::string_view line) { log_line(json::parse(line)); });
}

// Transport failures surface from the client as Io; for these commands they
// mean the endpoint is unreachable, not that an input file is bad.
template <class F>
auto calling_endpoint(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Io) throw;
        throw Error(ErrorCode::Http, e.what());
    }
}

Mask load_mask_checked(const std::string& path, const std::string& label) {
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::Io, "missing file: " + path);
    return nifti::load_mask(path, label);
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_report(const Common& c, const std::vector<std::string>& args) {
    const Config cfg = resolve_config(c);
    const auto manifests = expand_manifests(args);
    if (manifests.empty()) throw Error(ErrorCode::EmptyInput, "no case manifests given");
    const fs::path out = out_dir(c);
    fs::create_directories(out);

    std::vector<int> status(manifests.size(), kOk);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < manifests.size(); i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            json line{{"event", "case"}, {"manifest", manifests[i].generic_string()}};
            try {
                const Manifest m = load_manifest(manifests[i]);
                line["case_id"] = m.case_id;
                const auto inputs = load_case(m);
                json stages{{"load", ms_since(t0)}};
                pipeline::StageTimings tm;
                const auto r = pipeline::build_report(inputs, cfg, &tm);
                const auto t_render = std::chrono::steady_clock::now();
                write_text(out / (m.case_id + ".report.json"), report::to_json(r));
                write_text(out / (m.case_id + ".report.txt"), report::render_text(r));
                for (const auto& [name, ms] : tm.stages) stages[name] = ms;
                stages["render"] = ms_since(t_render);
                line["stages"] = stages;
                line["status"] = "ok";
                line["findings"] = r.findings.size();
            } catch (const Error& e) {
                status[i] = exit_code_for(e.code());
                line["status"] = "error";
                line["error"] = e.what();
                line["error_code"] = to_string(e.code());
            } catch (const std::exception& e) {
                status[i] = kFailure;
                line["status"] = "error";
                line["error"] = e.what();
            }
            line["exit"] = status[i];
            line["ms"] = ms_since(t0);
            log_line(line);
        }
    };
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), manifests.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (int s : status)
        if (s != kOk) return s;
    return kOk;
}

int cmd_narrative(const Common& c, const std::string& report_path, const std::string& examples_dir) {
    const Config cfg = resolve_config(c);
    const auto r = report::from_json(read_text(report_path));
    const auto target = evaluation::rule_label_structured(r);
    const auto pool = load_examples(examples_dir);
    const auto chosen = textgen::select_examples(pool, target, cfg.style_examples);
    if (chosen.empty()) {
        std::cerr << "no style examples for label set: " << evaluation::format_labels(target) << "\n";
        return kNoExamples;
    }
    std::vector<std::string> texts;
    for (const auto& e : chosen) texts.push_back(e.text);
    const auto client = make_client(cfg);
    textgen::NarrativeResult res;
    try {
        res = calling_endpoint(
            [&] { return textgen::generate_narrative(client, report::render_text(r), texts, target, r.case_id); });
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Consistency) throw;
        std::cerr << e.what() << "\n";
        return kConsistency;
    }
    const fs::path path = out_dir(c) / (r.case_id + ".narrative.txt");
    write_text(path, res.narrative + "\n");
    print_json({{"case_id", r.case_id},
                {"narrative", path.generic_string()},
                {"attempts", res.attempts},
                {"examples", chosen.size()},
                {"labels", evaluation::format_labels(res.labels)}});
    return kOk;
}

int cmd_fuse(const Common& c, const std::string& report_path, const std::string& notes_path) {
    const Config cfg = resolve_config(c);
    const auto r = report::from_json(read_text(report_path));
    const auto client = make_client(cfg);
    const std::string notes = read_text(notes_path);
    const std::string fused = calling_endpoint(
        [&] { return textgen::generate_fusion(client, notes, report::render_text(r), r.case_id); });
    const fs::path path = out_dir(c) / (r.case_id + ".fusion.txt");
    write_text(path, fused + "\n");
    print_json({{"case_id", r.case_id}, {"fusion", path.generic_string()}});
    return kOk;
}

int cmd_evaluate(const Common& c, const std::string& pred_dir, const std::string& truth_csv, bool as_json) {
    const Config cfg = resolve_config(c);
    if (!fs::is_directory(pred_dir)) throw Error(ErrorCode::Io, "missing directory: " + pred_dir);
    const auto rows = read_csv(truth_csv, {"case_id", "liver", "kidney", "pancreas"});

    // case id -> prediction file
    std::map<std::string, fs::path> preds;
    for (const auto& e : fs::directory_iterator(pred_dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        for (const std::string suffix : {".report.json", ".labels.txt"})
            if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
                const std::string id = name.substr(0, name.size() - suffix.size());
                if (!preds.emplace(id, e.path()).second)
                    throw Error(ErrorCode::InvalidArgument, "case '" + id + "' has more than one prediction file");
            }
    }
    if (preds.size() != rows.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(preds.size()) + " predictions for " +
                                                   std::to_string(rows.size()) + " truth rows");

    std::vector<evaluation::TumorLabels> pred, truth;
    std::map<Organ, std::vector<std::optional<double>>> sizes;
    for (const auto& row : rows) {
        const std::string& id = row.at("case_id");
        const auto it = preds.find(id);
        if (it == preds.end()) throw Error(ErrorCode::LengthMismatch, "no prediction for case '" + id + "'");
        const std::string text = read_text(it->second);
        pred.push_back(it->second.extension() == ".json"
                           ? evaluation::rule_label_structured(report::from_json(text))
                           : evaluation::parse_labels(text));
        evaluation::TumorLabels t;
        const std::string where = truth_csv + " (" + id + ")";
        for (Organ o : evaluation::kLabelOrgans) {
            const std::string name(organ_name(o));
            t.set(o, parse_label_cell(row.at(name), where));
            std::optional<double> size;
            if (const auto s = row.find(name + "_size_cm"); s != row.end() && !s->second.empty()) {
                try {
                    size = std::stod(s->second);
                } catch (const std::exception&) {
                    throw Error(ErrorCode::Schema, where + ": bad " + name + "_size_cm '" + s->second + "'");
                }
            }
            sizes[o].push_back(size);
        }
        truth.push_back(t);
    }

    std::vector<evaluation::MetricsRow> out;
    for (Organ o : evaluation::kLabelOrgans)
        for (auto s : {evaluation::Stratum::All, evaluation::Stratum::Small, evaluation::Stratum::Large})
            out.push_back({o, s,
                           evaluation::score_stratum(pred, truth, sizes[o], o, s, cfg.uncertain_policy,
                                                     cfg.small_tumor_cutoff_cm)});

    std::string text;
    if (as_json) {
        json arr = json::array();
        const auto opt = [](const std::optional<double>& v) { return v ? json(evaluation::percent(v)) : json(nullptr); };
        for (const auto& r : out)
            arr.push_back({{"organ", organ_name(r.organ)},
                           {"stratum", evaluation::stratum_name(r.stratum)},
                           {"tp", r.metrics.counts.tp},
                           {"fp", r.metrics.counts.fp},
                           {"tn", r.metrics.counts.tn},
                           {"fn", r.metrics.counts.fn},
                           {"dropped", r.metrics.dropped},
                           {"sensitivity", opt(r.metrics.sensitivity)},
                           {"specificity", opt(r.metrics.specificity)},
                           {"f1", opt(r.metrics.f1)}});
        text = arr.dump(2) + "\n";
    } else {
        text = evaluation::to_csv(out);
    }
    if (c.out.empty()) std::cout << text;
    else write_text(c.out, text);
    return kOk;
}

int cmd_phantom(const Common& c, const std::string& arg, std::optional<std::uint64_t> seed, bool list) {
    if (list) {
        print_json(phantom::scenario_names());
        return kOk;
    }
    phantom::PhantomSpec spec = fs::is_regular_file(arg) ? phantom::spec_from_json(read_text(arg)) : phantom::scenario(arg);
    if (seed) spec.seed = *seed;
    if (spec.name.empty()) spec.name = "phantom";
    const auto ph = phantom::generate(spec);

    const fs::path dir = out_dir(c) / spec.name;
    fs::create_directories(dir / "masks");
    nifti::save(ph.volume, dir / "volume.nii.gz");
    Manifest m;
    m.file = dir / "manifest.json";
    m.case_id = spec.name;
    m.volume = dir / "volume.nii.gz";
    json masks = json::array();
    for (const auto& [label, mask] : ph.masks) {
        const fs::path p = dir / "masks" / (label + ".nii.gz");
        nifti::save(mask, p);
        m.masks.emplace(label, p);
        masks.push_back(label);
    }
    write_text(dir / "truth.json", phantom::truth_to_json(ph.truth));
    write_text(dir / "spec.json", phantom::spec_to_json(spec));
    write_text(m.file, manifest_to_json(m));
    print_json({{"name", spec.name},
                {"dir", dir.generic_string()},
                {"manifest", m.file.generic_string()},
                {"masks", masks},
                {"rng", phantom::SplitMix64::kName},
                {"seed", spec.seed},
                {"truth", json::parse(phantom::truth_to_json(ph.truth))}});
    return kOk;
}

int cmd_measure(const Common& c, const std::string& mask_path, const std::string& volume_path,
                const std::string& organ_name_arg) {
    const Config cfg = resolve_config(c);
    const Organ organ = parse_organ(organ_name_arg);
    const Mask mask = load_mask_checked(mask_path, std::string(organ_name(organ)) + "_tumor");
    std::optional<Volume> volume;
    if (!volume_path.empty()) {
        if (!fs::is_regular_file(volume_path)) throw Error(ErrorCode::Io, "missing file: " + volume_path);
        volume = nifti::load_volume(volume_path);
        if (!volume->grid().same_lattice(mask.grid()))
            throw Error(ErrorCode::GridMismatch, "mask and volume grids differ");
    }
    const auto instances = measurement::split_instances(mask, organ);
    if (instances.empty()) throw Error(ErrorCode::EmptyInput, "mask " + mask_path + " is empty");
    json arr = json::array();
    for (const auto& inst : instances) {
        const auto m = volume ? measurement::measure_instance(inst, *volume, cfg.measurement_grid)
                              : measurement::measure_who(inst, cfg.measurement_grid);
        arr.push_back(measurement_json(m, inst.instance_id, volume.has_value()));
    }
    json out = arr[0];
    out.erase("instance_id");
    out["organ"] = organ_name(organ);
    out["instance_count"] = instances.size();
    out["instances"] = arr;
    print_json(out);
    return kOk;
}

int cmd_stage(const Common& c, const std::string& tumor_path, const std::vector<std::string>& vessels,
              const std::string& volume_path) {
    const Config cfg = resolve_config(c);
    const Mask tumor = load_mask_checked(tumor_path, "pancreatic_tumor");
    std::map<std::string, Mask> masks;
    for (const auto& v : vessels) {
        const auto eq = v.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--vessel expects NAME=PATH, got '" + v + "'");
        const std::string name(staging::vessel_name(staging::parse_vessel(v.substr(0, eq))));
        Mask m = load_mask_checked(v.substr(eq + 1), name);
        if (!m.grid().same_lattice(tumor.grid()))
            throw Error(ErrorCode::GridMismatch, name + " mask grid differs from the tumour's");
        masks.emplace(name, std::move(m));
    }
    std::optional<Volume> volume;
    if (!volume_path.empty()) {
        if (!fs::is_regular_file(volume_path)) throw Error(ErrorCode::Io, "missing file: " + volume_path);
        volume = nifti::load_volume(volume_path);
    }
    const auto instances = measurement::split_instances(tumor, Organ::Pancreas);
    if (instances.empty()) throw Error(ErrorCode::EmptyInput, "tumour mask " + tumor_path + " is empty");
    // The index lesion is the one with the longest diameter.
    std::size_t best = 0;
    std::vector<measurement::TumorMeasurement> meas;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        meas.push_back(volume ? measurement::measure_instance(instances[i], *volume, cfg.measurement_grid)
                              : measurement::measure_who(instances[i], cfg.measurement_grid));
        if (meas[i].d_max_cm > meas[best].d_max_cm) best = i;
    }
    std::vector<std::string> warnings;
    const auto st = pipeline::stage_tumor(instances[best], meas[best], masks, cfg, &warnings);
    json out = stage_json(st);
    out["instance_id"] = instances[best].instance_id;
    out["warnings"] = warnings;
    print_json(out);
    return kOk;
}

int cmd_subsegment(const Common& c, const std::string& pancreas_path, const std::string& sma_path) {
    const Mask pancreas = load_mask_checked(pancreas_path, "pancreas");
    const Mask sma = load_mask_checked(sma_path, "SMA");
    const auto parts = subsegment::subsegment_pancreas(pancreas, sma);
    const fs::path dir = out_dir(c);
    fs::create_directories(dir);
    json files = json::array();
    for (const Mask* m : {&parts.head, &parts.body, &parts.tail}) {
        const fs::path p = dir / (m->label() + ".nii.gz");
        nifti::save(*m, p);
        files.push_back(p.generic_string());
    }
    print_json({{"pancreas_voxels", pancreas.count()},
                {"head_voxels", parts.head.count()},
                {"body_voxels", parts.body.count()},
                {"tail_voxels", parts.tail.count()},
                {"head_side", parts.head_side == subsegment::HeadSide::LowX ? "low_x" : "high_x"},
                {"head_body_plane_mm", parts.head_body_plane_mm},
                {"body_tail_plane_mm", parts.body_tail_plane_mm},
                {"files", files}});
    return kOk;
}

int cmd_denoise(const Common& c, const std::string& mask_path, const std::string& organ) {
    const Config cfg = resolve_config(c);
    const Mask in = load_mask_checked(mask_path, fs::path(mask_path).stem().stem().string());
    const Mask out = postprocess::denoise(in);
    json j{{"input_voxels", in.count()},
           {"output_voxels", out.count()},
           {"removed_voxels", in.count() - out.count()},
           {"output_volume_mm3", physical_volume_mm3(out)}};
    if (!organ.empty()) {
        j["organ"] = organ;
        if (organ == "metastases") {
            j["threshold_mm3"] = cfg.presence.metastases_mm3;
            j["present"] = postprocess::metastasis_present(out, cfg.presence);
        } else {
            const Organ o = parse_organ(organ);
            j["threshold_mm3"] = cfg.presence.for_organ(o);
            j["present"] = postprocess::tumor_present(out, o, cfg.presence);
        }
    }
    if (!c.out.empty()) {
        nifti::save(out, c.out);
        j["output"] = c.out;
    }
    print_json(j);
    return kOk;
}

int cmd_config(const Common& c, bool check) {
    if (!check) {
        std::cout << default_config_text();
        return kOk;
    }
    if (c.config_path.empty()) throw Error(ErrorCode::InvalidArgument, "--check needs --config FILE");
    std::cout << config_to_json(resolve_config(c));
    return kOk;
}

}  // namespace radrep::cli
