#pragma once

// Held-out scoring. Each posterior sample is scored by a max-product pass
// over its occupied states plus one aggregate state that stands for every
// state the sample never instantiated; per-timepoint scales are integrated
// out of every emission.

#include <span>
#include <vector>

#include "ihmm/inference.hpp"

namespace ihmm {

struct PredictiveResult {
  /// 0 is the unseen-state aggregate, 1..K the sample's states.
  std::vector<int> path;
  std::vector<double> per_t_logscore;
  double total_logscore = 0.0;
  int sample_id = 0;
};

enum class ScoreMode { viterbi, forward };

/// Best path and its log-score. Aggregate emission is the prior predictive
/// with sigma^2 and Sigma integrated out (it depends on Sigma0 only through
/// its shape); transitions into it use the remainder column of pi, out of it
/// the sticks beta.
PredictiveResult predictive_viterbi(const PosteriorSample& sample, const Dataset& test, int sample_id = 0);

/// Sum-product variant: per_t_logscore holds ln p(x_t | x_<t) within each block.
PredictiveResult predictive_forward(const PosteriorSample& sample, const Dataset& test, int sample_id = 0);

PredictiveResult predictive_result(const PosteriorSample& sample, const Dataset& test, ScoreMode mode,
                                   int sample_id = 0);

double log_mean_exp(std::span<const double> v);

/// Log of the average per-sample likelihood.
double predictive_score(const std::vector<PosteriorSample>& samples, const Dataset& test,
                        ScoreMode mode = ScoreMode::viterbi);

}  // namespace ihmm
