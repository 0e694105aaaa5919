#pragma once

// Generative IHMM-Wishart model: configuration, data, chain state and
// forward sampling of synthetic ground truth.
//
//   beta            ~ GEM(gamma)
//   pi_k | beta     ~ DP(alpha, beta)
//   z_t | z_{t-1}   ~ pi_{z_{t-1}}          (z_t ~ beta at every block start)
//   Sigma_k         ~ IW(eta * Sigma0, v0)  (scale-matrix convention)
//   x_t             ~ N(0, sigma_t^2 * Sigma_{z_t})

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ihmm/numkernel.hpp"
#include "ihmm/random.hpp"

namespace ihmm {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;

  double log_density(double x) const;
  double mean() const { return shape / rate; }
};

/// Prior on a positive scale (eta or sigma_t^2), expressed as a density over
/// its logarithm. Jeffreys (1/x) is flat in log space and improper.
struct ScalePrior {
  enum class Kind { jeffreys, lognormal };
  Kind kind = Kind::jeffreys;
  double mu = 0.0;  // lognormal only
  double sd = 1.0;

  double log_density_of_log(double log_x) const;
  bool proper() const { return kind != Kind::jeffreys; }
  double sample(Rng& rng) const;
};

/// How the state sequence is resampled each sweep.
///   gibbs  - direct-assignment collapsed Gibbs (Sigma and pi integrated out)
///   beam   - slice-sampled forward-filtering backward-sampling with
///            instantiated covariances
///   hybrid - beam followed by a collapsed Gibbs pass
enum class LabelUpdate { hybrid, beam, gibbs };

struct ModelConfig {
  SpdMatrix sigma0;
  CholFactor sigma0_chol;
  double v0 = 0.0;
  double eta_init = 1.0;
  GammaPrior alpha_prior;
  GammaPrior gamma_prior;
  std::optional<double> alpha_init;
  std::optional<double> gamma_init;
  ScalePrior eta_prior;
  ScalePrior sigma_prior;
  double mh_step = 0.1;
  double sigma_mh_step = 0.1;

  int sweeps = 1000;
  int burn_in = 500;
  int thin = 5;
  std::uint64_t seed = 0;

  int split_merge_sweeps = 3;
  int truncation = 50;
  double sigma0_ridge = 1e-6;
  int recompute_interval = 100;
  int init_chunk = 20;
  int max_states = 1000;
  LabelUpdate label_update = LabelUpdate::hybrid;
  bool split_merge = true;
  bool sample_eta = true;
  bool sample_sigma = true;
  bool sample_concentrations = true;

  /// Defaults for dimension p: Sigma0 = I, v0 = p.
  static ModelConfig defaults(int p);

  int dim() const { return sigma0.dim(); }
  void set_sigma0(const SpdMatrix& s);
  /// Throws DomainError on any invalid setting.
  void validate() const;
  /// Factor of eta * Sigma0.
  CholFactor prior_factor(double eta) const;
};

struct Dataset {
  /// p x T, column t holds x_t.
  Matrix points;
  /// Ascending, first entry 0.
  std::vector<std::size_t> block_starts{0};
  std::map<std::string, std::vector<std::string>> labels;

  int dim() const { return static_cast<int>(points.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(points.cols()); }
  auto point(std::size_t t) const { return points.col(static_cast<Eigen::Index>(t)); }

  /// Sorts and deduplicates block starts, then checks every invariant.
  void normalize();
  void validate() const;
  /// is_block_start()[t] is true when t opens a block.
  std::vector<bool> block_start_mask() const;
  /// Rows of `rows` are timepoints.
  static Dataset from_rows(const Matrix& rows, std::vector<std::size_t> block_starts = {0});
};

struct StateStats {
  int n = 0;
  /// Raw scatter S = sum x x^T / sigma^2 over the state's timepoints.
  Matrix scatter;
  /// Cholesky factor of eta * Sigma0 + S.
  CholFactor scatter_chol;
  double log_sigma_sum = 0.0;

  static StateStats empty(const CholFactor& prior_factor);
  void add(const Eigen::Ref<const Vector>& x, double sigma_sq);
  void remove(const Eigen::Ref<const Vector>& x, double sigma_sq);
  /// Refactors eta * Sigma0 + scatter.
  void rebuild(const CholFactor& prior_factor);
};

struct ChainState {
  std::vector<int> z;
  /// K + 1 entries, the last is the unbroken remainder of the stick.
  std::vector<double> beta;
  /// K x (K + 1) transition rows; the last column is the mass of all
  /// unrepresented states.
  Matrix pi;
  std::vector<double> sigma_sq;
  double eta = 1.0;
  double alpha = 1.0;
  double gamma = 1.0;
  std::vector<StateStats> stats;

  int num_states() const { return static_cast<int>(stats.size()); }
};

struct StickWeights {
  std::vector<double> weights;
  double remainder = 1.0;
};

struct SyntheticTruth {
  Dataset dataset;
  std::vector<int> true_z;
  std::vector<SpdMatrix> true_covs;
  std::vector<double> true_sigma_sq;
  std::vector<double> true_beta;  // truncated sticks, remainder last
  Matrix true_pi;                 // truncation x (truncation + 1)
};

struct GenerateOptions {
  std::optional<std::vector<double>> sigma_sq;
  std::vector<std::size_t> block_starts{0};
};

StickWeights sample_gem(double gamma, int truncation, Rng& rng);

SyntheticTruth generate_synthetic(const ModelConfig& cfg, std::size_t length, Rng& rng,
                                  const GenerateOptions& opts = {});

/// Markov path with z ~ initial at each block start, else z_t ~ transition row z_{t-1}.
/// `transition` may carry a trailing remainder column which is never selected.
std::vector<int> sample_markov_path(std::span<const double> initial, const Matrix& transition,
                                    std::size_t length, const std::vector<bool>& block_start,
                                    Rng& rng);

/// x_t ~ N(0, sigma_sq[t] * covs[z_t]).
Matrix sample_observations(const std::vector<SpdMatrix>& covs, const std::vector<int>& z,
                           const std::vector<double>& sigma_sq, Rng& rng);

/// Exact draw of the state sequence from the HDP-HMM prior. Sticks and
/// transition rows are instantiated lazily, so no truncation is involved.
/// Returned beta/pi cover occupied states only (plus remainders).
struct PriorLabels {
  std::vector<int> z;
  std::vector<double> beta;
  Matrix pi;
};
PriorLabels sample_prior_labels(double alpha, double gamma, std::size_t length,
                                const std::vector<bool>& block_start, Rng& rng);

/// From-scratch sufficient statistics. K = max(z) + 1 unless `num_states` is given.
std::vector<StateStats> recompute_stats(const std::vector<int>& z, const Dataset& data,
                                        const std::vector<double>& sigma_sq, double eta,
                                        const ModelConfig& cfg, int num_states = -1);

}  // namespace ihmm
