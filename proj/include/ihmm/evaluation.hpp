#pragma once

// Readouts over fitted runs: paired t-tests on scores, mutual information
// between state sequences and label tracks, and state-population tables.

#include <span>
#include <string>
#include <vector>

#include "ihmm/inference.hpp"

namespace ihmm {

struct TTestResult {
  double t_stat = 0.0;
  int dof = 0;
  double p_value = 1.0;  // two-sided
  double mean_diff = 0.0;
  /// Every difference equal and non-zero: t is infinite and p is reported as 0.
  bool zero_variance = false;
};

/// Paired t-test on d = a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct LabelTrack {
  std::string name;
  std::vector<std::string> values;
};

/// Category codes 0..C-1 in order of first appearance.
std::vector<int> encode_categories(const std::vector<std::string>& values);

/// Plug-in entropy and mutual information of the empirical distributions, in nats.
double entropy(std::span<const int> a);
double mutual_information(std::span<const int> a, std::span<const int> b);
double mutual_information(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Expected MI under random permutation with the observed marginals (exact hypergeometric sum).
double expected_mutual_information(std::span<const int> a, std::span<const int> b);
/// (MI - E[MI]) / (mean(H(a), H(b)) - E[MI]); 1 when both sides are a single category.
double adjusted_mutual_information(std::span<const int> a, std::span<const int> b);

double average_mi_over_samples(const std::vector<PosteriorSample>& samples, const LabelTrack& track);

struct PopulationTable {
  std::vector<std::string> label_values;  // sorted
  std::vector<int> states;                // display order
  /// frequency[r][l]: share of label_values[l] timepoints spent in states[r].
  std::vector<std::vector<double>> frequency;
  std::vector<std::vector<long>> counts;
};

/// Occupancy counts pooled over samples by state index, normalized per label
/// value. Rows are sorted by decreasing spread (max minus min frequency
/// across label values).
PopulationTable state_population_table(const std::vector<PosteriorSample>& samples, const LabelTrack& track);

}  // namespace ihmm
