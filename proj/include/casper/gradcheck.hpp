#pragma once

#include "casper/learner.hpp"
#include "casper/rng.hpp"
#include "casper/types.hpp"

#include <cstdint>
#include <vector>

namespace casper {

// Central-difference step and the acceptance threshold on the max relative
// error, both in 64-bit arithmetic.
inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradCheckTol = 1e-4;

struct GradCheckCase {
  double rel_error = 0.0;
  bool degenerate = false;  // flagged spectra are excluded from the pass bar
};

/// Feature-gradient check of the spectral regularizer: analytic gradient of
/// the composed loss versus central finite differences of the same loss with
/// the edge selection pinned at the evaluation point. Relative error is
/// max_i |a_i - f_i| / max(max_i |f_i|, 1e-12).
GradCheckCase check_casper_feature_grad(const Matrix& features, int k, int g);

/// Full-model check: cross-entropy plus the injected spectral feature
/// gradient, differentiated to every parameter of a small MLP and compared
/// against finite differences over the parameters.
GradCheckCase check_full_model_grad(const MlpConfig& config,
                                    const Matrix& inputs,
                                    const std::vector<int>& labels, int k,
                                    int g, double rho, std::uint64_t seed);

struct GradCheckReport {
  int instances = 0;
  int degenerate_skipped = 0;
  double max_feature_rel_error = 0.0;
  double max_model_rel_error = 0.0;

  double max_rel_error() const {
    return std::max(max_feature_rel_error, max_model_rel_error);
  }
};

/// Runs `instances` random feature-gradient checks (n in [8,24], d in
/// [4,16], k in [2,5], g in [2,4]) plus full-model checks on a 2-layer net,
/// regenerating any instance whose spectrum is flagged degenerate.
GradCheckReport run_gradcheck_suite(int instances, std::uint64_t seed);

}  // namespace casper
