#pragma once

#include <span>
#include <string>
#include <vector>

#include "texteffect/bow.hpp"
#include "texteffect/diagnostics.hpp"
#include "texteffect/nuisance.hpp"
#include "texteffect/types.hpp"

namespace tfx {

EffectEstimate diff_in_means(std::span<const int> treatment, std::span<const double> outcome);

// Least squares of outcome on treatment plus topic indicators; collinear
// indicators are dropped and noted in metadata.
EffectEstimate topic_adjusted(std::span<const int> treatment, std::span<const double> outcome,
                              std::span<const std::string> topic);

// Hajek (self-normalized) inverse propensity weighting.
EffectEstimate ipw_estimate(const NuisanceFits& fits, std::span<const int> treatment,
                            std::span<const double> outcome);

EffectEstimate or_estimate(const NuisanceFits& fits, std::span<const int> treatment,
                           std::span<const double> outcome);

EffectEstimate aipw_estimate(const NuisanceFits& fits, std::span<const int> treatment,
                             std::span<const double> outcome);

struct ProbeOptions {
    NuisanceOptions nuisance;
    double bound_lo = 0.1;
    double bound_hi = 0.9;
    BoundMode bound_mode = BoundMode::winsorize;
};

struct ProbeResult {
    EffectEstimate estimate;
    PropensityBins bins;                 // over the raw stage-2 propensities
    std::vector<double> propensities;    // raw stage-2 propensities
    NuisanceFits stage1;
};

// Structural probe for representation leakage: outcome heads are fit from the
// document-term matrix, a propensity model is then fit on the two-dimensional
// representation (q0(x), q1(x)), and the effect is estimated by AIPW after
// bounding. Outcome-predictive representations can encode treatment itself,
// pushing these propensities to extremes.
ProbeResult leakage_probe(const DocTermMatrix& dtm, std::span<const int> treatment,
                          std::span<const double> outcome, const ProbeOptions& opts);

}  // namespace tfx
