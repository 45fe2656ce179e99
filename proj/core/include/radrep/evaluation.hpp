#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radrep/measurement.hpp"
#include "radrep/report.hpp"

namespace radrep::evaluation {

enum class Label { Yes, No, Uncertain };
/// "yes", "no", "U".
std::string_view label_text(Label l) noexcept;

struct TumorLabels {
    Label liver = Label::No;
    Label kidney = Label::No;
    Label pancreas = Label::No;

    Label get(Organ o) const noexcept;
    void set(Organ o, Label l) noexcept;
    bool operator==(const TumorLabels&) const = default;
};

/// Organs in label-string order.
inline constexpr std::array<Organ, 3> kLabelOrgans = {Organ::Liver, Organ::Kidney, Organ::Pancreas};

/// "liver tumor presence=yes; kidney tumor presence=U; pancreas tumor presence=no"
std::string format_labels(const TumorLabels& l);

/// Case-insensitive "<organ> tumor presence=<yes|no|U>" triplets; the first
/// occurrence per organ wins. Throws ParseError naming missing organs.
TumorLabels parse_labels(std::string_view answer);

/// yes iff the report has a finding in the organ, otherwise no.
TumorLabels rule_label_structured(const report::StructuredReport& r);

enum class UncertainPolicy { AsYes, AsNo, Drop };
std::string_view policy_name(UncertainPolicy p) noexcept;
/// Accepts as_yes, as_no, drop. Throws InvalidArgument.
UncertainPolicy parse_policy(std::string_view name);

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Ratios in [0, 1]; nullopt where the denominator is zero.
struct Metrics {
    ConfusionMatrix counts;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> f1;
    std::size_t dropped = 0;  // pairs removed by the uncertain policy
};

Metrics metrics_from_counts(const ConfusionMatrix& cm);

/// Per-organ confusion over aligned prediction/truth lists.
/// Throws LengthMismatch.
Metrics score(const std::vector<TumorLabels>& pred, const std::vector<TumorLabels>& truth, Organ organ,
              UncertainPolicy policy = UncertainPolicy::Drop);

enum class Stratum { All, Small, Large };
std::string_view stratum_name(Stratum s) noexcept;

/// Small iff the largest tumour is at most `cutoff_cm`.
Stratum size_stratum(double largest_cm, double cutoff_cm = 2.0) noexcept;

/// Sensitivity restricted to positive cases of one size stratum; negatives
/// are shared across strata, so specificity is stratum-independent.
/// `largest_cm[i]` is the truth case's largest tumour in the organ (absent for
/// negatives or unknown sizes; unknown-size positives count only in All).
/// Throws LengthMismatch.
Metrics score_stratum(const std::vector<TumorLabels>& pred, const std::vector<TumorLabels>& truth,
                      const std::vector<std::optional<double>>& largest_cm, Organ organ, Stratum stratum,
                      UncertainPolicy policy = UncertainPolicy::Drop, double cutoff_cm = 2.0);

/// Largest reported D per organ, if any finding exists.
std::optional<double> largest_tumor_cm(const report::StructuredReport& r, Organ organ);

/// Percentage with one decimal, or "NA".
std::string percent(const std::optional<double>& ratio);

struct MetricsRow {
    Organ organ = Organ::Liver;
    Stratum stratum = Stratum::All;
    Metrics metrics;
};

/// Header plus one row per entry:
/// organ,stratum,tp,fp,tn,fn,sensitivity,specificity,f1
std::string to_csv(const std::vector<MetricsRow>& rows);

}  // namespace radrep::evaluation
