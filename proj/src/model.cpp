#include "ihmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ihmm {

double GammaPrior::log_density(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double ScalePrior::log_density_of_log(double log_x) const {
  if (kind == Kind::jeffreys) return 0.0;
  const double d = (log_x - mu) / sd;
  return -0.5 * d * d - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double ScalePrior::sample(Rng& rng) const {
  if (kind == Kind::jeffreys) throw DomainError("cannot sample from the improper 1/x prior");
  return std::exp(mu + sd * standard_normal(rng));
}

ModelConfig ModelConfig::defaults(int p) {
  ModelConfig cfg;
  cfg.set_sigma0(SpdMatrix::identity(p));
  cfg.v0 = p;
  return cfg;
}

void ModelConfig::set_sigma0(const SpdMatrix& s) {
  sigma0 = s;
  sigma0_chol = cholesky(s);
}

void ModelConfig::validate() const {
  const int p = dim();
  if (p < 1) throw DomainError("sigma0 must be set");
  if (sigma0_chol.dim() != p) throw DomainError("sigma0 factor out of date");
  if (!(v0 > p - 1)) throw DomainError("v0 must exceed p - 1 for a proper inverse-Wishart prior");
  if (!(eta_init > 0.0)) throw DomainError("eta_init must be positive");
  for (const GammaPrior* g : {&alpha_prior, &gamma_prior}) {
    if (!(g->shape > 0.0) || !(g->rate > 0.0)) throw DomainError("Gamma prior parameters must be positive");
  }
  if (alpha_init && !(*alpha_init > 0.0)) throw DomainError("alpha must be positive");
  if (gamma_init && !(*gamma_init > 0.0)) throw DomainError("gamma must be positive");
  for (const ScalePrior* s : {&eta_prior, &sigma_prior}) {
    if (s->proper() && !(s->sd > 0.0)) throw DomainError("lognormal prior sd must be positive");
  }
  if (!(mh_step > 0.0) || !(sigma_mh_step > 0.0)) throw DomainError("mh_step must be positive");
  if (sweeps < 0 || burn_in < 0 || thin < 1) throw DomainError("invalid sweep schedule");
  if (split_merge_sweeps < 0) throw DomainError("split_merge_sweeps must be >= 0");
  if (truncation < 1) throw DomainError("truncation must be >= 1");
  if (!(sigma0_ridge > 0.0)) throw DomainError("sigma0_ridge must be positive");
  if (recompute_interval < 1) throw DomainError("recompute_interval must be >= 1");
  if (init_chunk < 0) throw DomainError("init_chunk must be >= 0");
  if (max_states < 1) throw DomainError("max_states must be >= 1");
}

CholFactor ModelConfig::prior_factor(double eta) const {
  return CholFactor(std::sqrt(eta) * sigma0_chol.lower());
}

// ---------------------------------------------------------------------------

void Dataset::normalize() {
  std::sort(block_starts.begin(), block_starts.end());
  block_starts.erase(std::unique(block_starts.begin(), block_starts.end()), block_starts.end());
  if (block_starts.empty() || block_starts.front() != 0) block_starts.insert(block_starts.begin(), 0);
  validate();
}

void Dataset::validate() const {
  if (points.cols() < 1 || points.rows() < 1) throw EmptyData("dataset has no observations");
  if (!points.allFinite()) throw DomainError("dataset contains non-finite values");
  if (block_starts.empty() || block_starts.front() != 0) throw DomainError("first block must start at 0");
  for (std::size_t i = 0; i < block_starts.size(); ++i) {
    if (block_starts[i] >= length()) throw DomainError("block start beyond end of data");
    if (i > 0 && block_starts[i] <= block_starts[i - 1]) throw DomainError("block starts must ascend");
  }
  for (const auto& [name, values] : labels) {
    if (values.size() != length()) {
      throw LabelLengthMismatch("label track '" + name + "' has " + std::to_string(values.size()) +
                                " entries, expected " + std::to_string(length()));
    }
  }
}

std::vector<bool> Dataset::block_start_mask() const {
  std::vector<bool> mask(length(), false);
  for (std::size_t b : block_starts) mask[b] = true;
  return mask;
}

Dataset Dataset::from_rows(const Matrix& rows, std::vector<std::size_t> block_starts) {
  Dataset d;
  d.points = rows.transpose();
  d.block_starts = std::move(block_starts);
  d.normalize();
  return d;
}

// ---------------------------------------------------------------------------

StateStats StateStats::empty(const CholFactor& prior_factor) {
  StateStats s;
  const int p = prior_factor.dim();
  s.scatter = Matrix::Zero(p, p);
  s.scatter_chol = prior_factor;
  return s;
}

void StateStats::add(const Eigen::Ref<const Vector>& x, double sigma_sq) {
  const double w = 1.0 / std::sqrt(sigma_sq);
  Vector y = w * x;
  scatter.noalias() += y * y.transpose();
  Matrix l = scatter_chol.lower();
  chol_rank1_update_inplace(l, y, +1);
  scatter_chol = CholFactor(std::move(l));
  log_sigma_sum += std::log(sigma_sq);
  ++n;
}

void StateStats::remove(const Eigen::Ref<const Vector>& x, double sigma_sq) {
  const double w = 1.0 / std::sqrt(sigma_sq);
  Vector y = w * x;
  scatter.noalias() -= y * y.transpose();
  Matrix l = scatter_chol.lower();
  chol_rank1_update_inplace(l, y, -1);
  scatter_chol = CholFactor(std::move(l));
  log_sigma_sum -= std::log(sigma_sq);
  --n;
}

void StateStats::rebuild(const CholFactor& prior_factor) {
  scatter_chol = cholesky_symmetric(prior_factor.reconstruct() + scatter);
}

// ---------------------------------------------------------------------------

StickWeights sample_gem(double gamma, int truncation, Rng& rng) {
  StickWeights out;
  out.weights.reserve(truncation);
  double rest = 1.0;
  for (int k = 0; k < truncation; ++k) {
    const double nu = beta_variate(1.0, gamma, rng);
    const double w = nu * rest;
    out.weights.push_back(w);
    rest -= w;
  }
  // Recompute the remainder so that weights + remainder is 1 up to rounding of one sum.
  out.remainder = 1.0 - std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  if (out.remainder < 0.0) out.remainder = 0.0;
  return out;
}

std::vector<int> sample_markov_path(std::span<const double> initial, const Matrix& transition,
                                    std::size_t length, const std::vector<bool>& block_start,
                                    Rng& rng) {
  const auto k = static_cast<std::size_t>(transition.rows());
  std::vector<int> z(length);
  std::vector<double> lw(k);
  for (std::size_t t = 0; t < length; ++t) {
    if (t == 0 || block_start[t]) {
      for (std::size_t j = 0; j < k; ++j) lw[j] = std::log(initial[j]);
    } else {
      for (std::size_t j = 0; j < k; ++j) lw[j] = std::log(transition(z[t - 1], static_cast<Eigen::Index>(j)));
    }
    z[t] = static_cast<int>(sample_log_categorical(lw, rng));
  }
  return z;
}

Matrix sample_observations(const std::vector<SpdMatrix>& covs, const std::vector<int>& z,
                           const std::vector<double>& sigma_sq, Rng& rng) {
  if (covs.empty()) throw DomainError("no covariances supplied");
  const int p = covs.front().dim();
  std::vector<CholFactor> factors;
  factors.reserve(covs.size());
  for (const auto& c : covs) factors.push_back(cholesky(c));
  Matrix x(p, static_cast<Eigen::Index>(z.size()));
  Vector e(p);
  for (std::size_t t = 0; t < z.size(); ++t) {
    for (int i = 0; i < p; ++i) e(i) = standard_normal(rng);
    x.col(static_cast<Eigen::Index>(t)) = std::sqrt(sigma_sq[t]) * (factors[z[t]].lower() * e);
  }
  return x;
}

SyntheticTruth generate_synthetic(const ModelConfig& cfg, std::size_t length, Rng& rng,
                                  const GenerateOptions& opts) {
  cfg.validate();
  if (length < 1) throw DomainError("synthetic length must be >= 1");
  const double alpha = cfg.alpha_init.value_or(1.0);
  const double gamma = cfg.gamma_init.value_or(1.0);
  const int trunc = cfg.truncation;

  SyntheticTruth truth;
  StickWeights sticks = sample_gem(gamma, trunc, rng);
  truth.true_beta = sticks.weights;
  truth.true_beta.push_back(sticks.remainder);

  std::vector<double> conc(trunc + 1);
  for (int k = 0; k <= trunc; ++k) conc[k] = alpha * std::max(truth.true_beta[k], std::numeric_limits<double>::min());
  truth.true_pi.resize(trunc, trunc + 1);
  for (int k = 0; k < trunc; ++k) {
    std::vector<double> row = dirichlet(conc, rng);
    for (int j = 0; j <= trunc; ++j) truth.true_pi(k, j) = row[j];
  }

  Dataset& data = truth.dataset;
  data.points.setZero(cfg.dim(), static_cast<Eigen::Index>(length));
  data.block_starts = opts.block_starts;
  data.normalize();

  // Weak-limit path: the finite part of each row (and of beta) is renormalized.
  Matrix finite = truth.true_pi.leftCols(trunc);
  for (int k = 0; k < trunc; ++k) finite.row(k) /= finite.row(k).sum();
  std::vector<double> init(truth.true_beta.begin(), truth.true_beta.end() - 1);
  const double init_sum = std::accumulate(init.begin(), init.end(), 0.0);
  for (double& v : init) v /= init_sum;
  truth.true_z = sample_markov_path(init, finite, length, data.block_start_mask(), rng);

  const CholFactor prior = cfg.prior_factor(cfg.eta_init);
  truth.true_covs.reserve(trunc);
  for (int k = 0; k < trunc; ++k) {
    truth.true_covs.emplace_back(sample_inverse_wishart(prior, cfg.v0, rng));
  }

  if (opts.sigma_sq) {
    if (opts.sigma_sq->size() != length) throw DimensionMismatch("sigma_sq override has wrong length");
    for (double s : *opts.sigma_sq) {
      if (!(s > 0.0)) throw DomainError("sigma_sq override must be positive");
    }
    truth.true_sigma_sq = *opts.sigma_sq;
  } else {
    truth.true_sigma_sq.assign(length, 1.0);
  }
  data.points = sample_observations(truth.true_covs, truth.true_z, truth.true_sigma_sq, rng);
  return truth;
}

PriorLabels sample_prior_labels(double alpha, double gamma, std::size_t length,
                                const std::vector<bool>& block_start, Rng& rng) {
  // Instantiated atoms in stick-breaking order; rows[j] has one entry per
  // instantiated atom followed by that row's remainder.
  std::vector<double> beta{1.0};
  std::vector<std::vector<double>> rows;

  auto instantiate = [&]() {
    const double rem = beta.back();
    const double nu = beta_variate(1.0, gamma, rng);
    const double w = std::max(nu * rem, std::numeric_limits<double>::min());
    const double new_rem = std::max(rem - w, std::numeric_limits<double>::min());
    beta.back() = w;
    beta.push_back(new_rem);
    for (auto& row : rows) {
      const double r = row.back();
      const double f = beta_variate(alpha * w, alpha * new_rem, rng);
      row.back() = f * r;
      row.push_back((1.0 - f) * r);
    }
    std::vector<double> conc(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) conc[i] = alpha * beta[i];
    rows.push_back(dirichlet(conc, rng));
  };

  // The same uniform is re-scanned after each instantiation: instantiating
  // only splits the trailing remainder, so earlier cumulative sums are unchanged.
  auto draw = [&](auto weights_of) -> int {
    const double u = uniform01(rng);
    for (int guard = 0;; ++guard) {
      const std::vector<double>& w = weights_of();
      double c = 0.0;
      for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        c += w[k];
        if (u < c) return static_cast<int>(k);
      }
      if (guard > 100000) return static_cast<int>(w.size()) - 2;
      instantiate();
    }
  };

  std::vector<int> atom(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (t == 0 || block_start[t]) {
      atom[t] = draw([&]() -> const std::vector<double>& { return beta; });
    } else {
      const int prev = atom[t - 1];
      atom[t] = draw([&]() -> const std::vector<double>& { return rows[prev]; });
    }
  }

  // Relabel occupied atoms by first appearance; everything else is remainder.
  std::vector<int> relabel(beta.size() - 1, -1);
  std::vector<int> order;
  PriorLabels out;
  out.z.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    int& r = relabel[atom[t]];
    if (r < 0) {
      r = static_cast<int>(order.size());
      order.push_back(atom[t]);
    }
    out.z[t] = r;
  }
  const auto k = static_cast<Eigen::Index>(order.size());
  out.beta.resize(order.size() + 1);
  double used = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.beta[i] = beta[order[i]];
    used += out.beta[i];
  }
  out.beta.back() = std::max(1.0 - used, std::numeric_limits<double>::min());
  out.pi.resize(k, k + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& row = rows[order[i]];
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      out.pi(i, j) = row[order[j]];
      s += out.pi(i, j);
    }
    out.pi(i, k) = std::max(1.0 - s, std::numeric_limits<double>::min());
  }
  return out;
}

std::vector<StateStats> recompute_stats(const std::vector<int>& z, const Dataset& data,
                                        const std::vector<double>& sigma_sq, double eta,
                                        const ModelConfig& cfg, int num_states) {
  int k = num_states;
  if (k < 0) k = z.empty() ? 0 : *std::max_element(z.begin(), z.end()) + 1;
  std::vector<StateStats> stats(k);
  const CholFactor prior = cfg.prior_factor(eta);
  for (auto& s : stats) s = StateStats::empty(prior);
  for (std::size_t t = 0; t < z.size(); ++t) {
    StateStats& s = stats[z[t]];
    Vector y = data.point(t) / std::sqrt(sigma_sq[t]);
    s.scatter.noalias() += y * y.transpose();
    s.log_sigma_sum += std::log(sigma_sq[t]);
    ++s.n;
  }
  const Matrix prior_m = prior.reconstruct();
  for (auto& s : stats) {
    if (s.n > 0) s.scatter_chol = cholesky_symmetric(prior_m + s.scatter);
  }
  return stats;
}

}  // namespace ihmm
