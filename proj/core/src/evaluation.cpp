#include "radrep/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "radrep/error.hpp"

namespace radrep::evaluation {

std::string_view label_text(Label l) noexcept {
    switch (l) {
        case Label::Yes: return "yes";
        case Label::No: return "no";
        case Label::Uncertain: return "U";
    }
    return "?";
}

Label TumorLabels::get(Organ o) const noexcept {
    switch (o) {
        case Organ::Liver: return liver;
        case Organ::Kidney: return kidney;
        case Organ::Pancreas: return pancreas;
    }
    return Label::No;
}

void TumorLabels::set(Organ o, Label l) noexcept {
    switch (o) {
        case Organ::Liver: liver = l; break;
        case Organ::Kidney: kidney = l; break;
        case Organ::Pancreas: pancreas = l; break;
    }
}

std::string format_labels(const TumorLabels& l) {
    std::string out;
    for (Organ o : kLabelOrgans) {
        if (!out.empty()) out += "; ";
        out += std::string(organ_name(o)) + " tumor presence=" + std::string(label_text(l.get(o)));
    }
    return out;
}

TumorLabels parse_labels(std::string_view answer) {
    static const std::regex re(R"((liver|kidney|pancreas)\s+tumou?r\s+presence\s*=\s*(yes|no|u)\b)",
                               std::regex::icase | std::regex::ECMAScript);
    TumorLabels out;
    bool found[3] = {false, false, false};
    const std::string text(answer);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        std::string organ = (*it)[1].str(), value = (*it)[2].str();
        std::transform(organ.begin(), organ.end(), organ.begin(), [](unsigned char c) { return std::tolower(c); });
        std::transform(value.begin(), value.end(), value.begin(), [](unsigned char c) { return std::tolower(c); });
        const Organ o = parse_organ(organ);
        const auto k = static_cast<std::size_t>(std::find(kLabelOrgans.begin(), kLabelOrgans.end(), o) - kLabelOrgans.begin());
        if (found[k]) continue;
        found[k] = true;
        out.set(o, value == "yes" ? Label::Yes : value == "no" ? Label::No : Label::Uncertain);
    }
    std::string missing;
    for (std::size_t k = 0; k < 3; ++k)
        if (!found[k]) missing += (missing.empty() ? "" : ", ") + std::string(organ_name(kLabelOrgans[k]));
    if (!missing.empty()) throw ParseError("missing tumor presence labels for: " + missing, 0);
    return out;
}

TumorLabels rule_label_structured(const report::StructuredReport& r) {
    TumorLabels out;
    for (Organ o : kLabelOrgans) out.set(o, r.findings_for(o).empty() ? Label::No : Label::Yes);
    return out;
}

std::string_view policy_name(UncertainPolicy p) noexcept {
    switch (p) {
        case UncertainPolicy::AsYes: return "as_yes";
        case UncertainPolicy::AsNo: return "as_no";
        case UncertainPolicy::Drop: return "drop";
    }
    return "?";
}

UncertainPolicy parse_policy(std::string_view name) {
    for (auto p : {UncertainPolicy::AsYes, UncertainPolicy::AsNo, UncertainPolicy::Drop})
        if (policy_name(p) == name) return p;
    throw Error(ErrorCode::InvalidArgument, "unknown uncertain-label policy '" + std::string(name) + "'");
}

Metrics metrics_from_counts(const ConfusionMatrix& cm) {
    Metrics m;
    m.counts = cm;
    const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
    m.specificity = ratio(cm.tn, cm.tn + cm.fp);
    m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
    return m;
}

namespace {

// Resolves an uncertain label; nullopt means the pair is dropped.
std::optional<bool> positive(Label l, UncertainPolicy p) {
    if (l == Label::Yes) return true;
    if (l == Label::No) return false;
    if (p == UncertainPolicy::AsYes) return true;
    if (p == UncertainPolicy::AsNo) return false;
    return std::nullopt;
}

}  // namespace

Metrics score(const std::vector<TumorLabels>& pred, const std::vector<TumorLabels>& truth, Organ organ,
              UncertainPolicy policy) {
    return score_stratum(pred, truth, std::vector<std::optional<double>>(truth.size()), organ, Stratum::All,
                         policy);
}

std::string_view stratum_name(Stratum s) noexcept {
    switch (s) {
        case Stratum::All: return "all";
        case Stratum::Small: return "small";
        case Stratum::Large: return "large";
    }
    return "?";
}

Stratum size_stratum(double largest_cm, double cutoff_cm) noexcept {
    return largest_cm <= cutoff_cm ? Stratum::Small : Stratum::Large;
}

Metrics score_stratum(const std::vector<TumorLabels>& pred, const std::vector<TumorLabels>& truth,
                      const std::vector<std::optional<double>>& largest_cm, Organ organ, Stratum stratum,
                      UncertainPolicy policy, double cutoff_cm) {
    if (pred.size() != truth.size() || largest_cm.size() != truth.size())
        throw Error(ErrorCode::LengthMismatch, "prediction and truth lists differ in length (" +
                                                   std::to_string(pred.size()) + " vs " +
                                                   std::to_string(truth.size()) + ")");
    ConfusionMatrix cm;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = positive(truth[i].get(organ), policy);
        const auto p = positive(pred[i].get(organ), policy);
        if (!t || !p) {
            ++dropped;
            continue;
        }
        if (*t && stratum != Stratum::All) {
            if (!largest_cm[i] || size_stratum(*largest_cm[i], cutoff_cm) != stratum) continue;
        }
        if (*t) (*p ? cm.tp : cm.fn)++;
        else (*p ? cm.fp : cm.tn)++;
    }
    Metrics m = metrics_from_counts(cm);
    m.dropped = dropped;
    return m;
}

std::optional<double> largest_tumor_cm(const report::StructuredReport& r, Organ organ) {
    std::optional<double> best;
    for (const auto* f : r.findings_for(organ))
        if (!best || f->measurement.d_max_cm > *best) best = f->measurement.d_max_cm;
    return best;
}

std::string percent(const std::optional<double>& ratio) {
    if (!ratio) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", round_to(*ratio * 100.0, 1));
    return buf;
}

std::string to_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "organ,stratum,tp,fp,tn,fn,sensitivity,specificity,f1\n";
    for (const auto& r : rows) {
        const auto& c = r.metrics.counts;
        out += std::string(organ_name(r.organ)) + "," + std::string(stratum_name(r.stratum)) + "," +
               std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.tn) + "," +
               std::to_string(c.fn) + "," + percent(r.metrics.sensitivity) + "," +
               percent(r.metrics.specificity) + "," + percent(r.metrics.f1) + "\n";
    }
    return out;
}

}  // namespace radrep::evaluation
