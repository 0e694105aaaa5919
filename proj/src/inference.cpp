#include "ihmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ihmm/emission.hpp"
#include "ihmm/transitions.hpp"

namespace ihmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTiny = std::numeric_limits<double>::min();

bool pi_consistent(const ChainState& chain) {
  return chain.pi.rows() == chain.num_states() && chain.pi.cols() == chain.num_states() + 1;
}

/// Moves state `last` into slot k and drops slot `last`; k's stick and
/// transition column go to the remainders. Relabels z.
void drop_state(ChainState& chain, int k, TransitionCounts* counts) {
  const int kk = chain.num_states();
  const int last = kk - 1;
  const bool with_pi = pi_consistent(chain);
  chain.beta[kk] += chain.beta[k];
  if (with_pi) chain.pi.col(kk) += chain.pi.col(k);
  if (k != last) {
    for (int& v : chain.z) {
      if (v == last) v = k;
    }
    std::swap(chain.stats[k], chain.stats[last]);
    chain.beta[k] = chain.beta[last];
    if (with_pi) {
      chain.pi.row(k).swap(chain.pi.row(last));
      chain.pi.col(k).swap(chain.pi.col(last));
    }
  }
  chain.stats.pop_back();
  chain.beta[last] = chain.beta[kk];
  chain.beta.pop_back();
  if (with_pi) {
    Matrix np(last, last + 1);
    np.leftCols(last) = chain.pi.topLeftCorner(last, last);
    np.col(last) = chain.pi.col(kk).head(last);
    chain.pi = std::move(np);
  } else {
    chain.pi.resize(0, 0);
  }
  if (counts) counts->remove_state_swap_last(k);
}

/// Adds a stick broken off the remainder; pi is left stale.
void add_collapsed_state(ChainState& chain, const CholFactor& prior, Rng& rng) {
  const int kk = chain.num_states();
  const double rem = chain.beta[kk];
  const double nu = beta_variate(1.0, chain.gamma, rng);
  chain.beta[kk] = std::max(nu * rem, kTiny);
  chain.beta.push_back(std::max((1.0 - nu) * rem, kTiny));
  chain.stats.push_back(StateStats::empty(prior));
  chain.pi.resize(0, 0);
}

int prev_state(const std::vector<int>& z, const std::vector<bool>& mask, std::size_t t) {
  return (t == 0 || mask[t]) ? -1 : z[t - 1];
}

int next_state(const std::vector<int>& z, const std::vector<bool>& mask, std::size_t t) {
  return (t + 1 < z.size() && !mask[t + 1]) ? z[t + 1] : -1;
}

/// Log weights for z_t with site t already removed from counts and stats.
void site_log_weights(const ChainState& chain, const TransitionCounts& counts, const Dataset& data,
                      const ModelConfig& cfg, std::size_t t, int prev, int next, bool allow_new,
                      const StateStats& empty_stats, std::vector<double>& out) {
  const int kk = chain.num_states();
  out.resize(kk + (allow_new ? 1 : 0));
  const auto x = data.point(t);
  const double s2 = chain.sigma_sq[t];
  for (int k = 0; k < kk; ++k) {
    out[k] = log_site_weight(counts, chain.beta, chain.alpha, prev, next, k) +
             assign_log_predictive(x, s2, chain.stats[k], chain.eta, cfg.sigma0_chol, cfg.v0);
  }
  if (allow_new) {
    out[kk] = log_site_weight_new(counts, chain.beta, chain.alpha, prev, next) +
              assign_log_predictive(x, s2, empty_stats, chain.eta, cfg.sigma0_chol, cfg.v0);
  }
}

double trace_geomean_product(const ChainState& chain, const ModelConfig& cfg) {
  double ls = 0.0;
  for (double s : chain.sigma_sq) ls += std::log(s);
  return chain.eta * cfg.sigma0.matrix().trace() * std::exp(ls / static_cast<double>(chain.sigma_sq.size()));
}

}  // namespace

const char* to_string(SplitMergeOutcome o) {
  switch (o) {
    case SplitMergeOutcome::accepted_split: return "accepted-split";
    case SplitMergeOutcome::accepted_merge: return "accepted-merge";
    case SplitMergeOutcome::rejected: return "rejected";
    case SplitMergeOutcome::not_attempted: return "not-attempted";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

LogJointTerms log_joint_terms(const ChainState& chain, const Dataset& data, const ModelConfig& cfg) {
  LogJointTerms out;
  const int kk = chain.num_states();
  std::vector<bool> occupied(kk);
  for (int k = 0; k < kk; ++k) occupied[k] = chain.stats[k].n > 0;
  out.sticks = log_stick_density(chain.beta, occupied, chain.gamma);
  TransitionCounts counts(chain.z, data.block_start_mask(), kk);
  out.transitions = log_prior_labels(counts, chain.beta, chain.alpha);
  for (const auto& s : chain.stats) out.emissions += state_log_marginal(s, chain.eta, cfg.sigma0_chol, cfg.v0);
  const double le = std::log(chain.eta);
  out.scale_priors = cfg.eta_prior.log_density_of_log(le) - le;
  for (double s : chain.sigma_sq) {
    const double ls = std::log(s);
    out.scale_priors += cfg.sigma_prior.log_density_of_log(ls) - ls;
  }
  out.concentration_priors = cfg.alpha_prior.log_density(chain.alpha) + cfg.gamma_prior.log_density(chain.gamma);
  return out;
}

double log_joint(const ChainState& chain, const Dataset& data, const ModelConfig& cfg) {
  return log_joint_terms(chain, data, cfg).total();
}

ChainState initialize_chain(const ModelConfig& cfg, const Dataset& data, Rng& rng) {
  cfg.validate();
  data.validate();
  if (data.dim() != cfg.dim()) {
    throw DimensionMismatch("data has p = " + std::to_string(data.dim()) + " but the prior has p = " +
                            std::to_string(cfg.dim()));
  }
  const std::size_t n = data.length();
  ChainState chain;
  chain.z.assign(n, 0);
  if (cfg.init_chunk > 0) {
    const auto mask = data.block_start_mask();
    int label = -1;
    std::size_t since = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t == 0 || mask[t] || since == static_cast<std::size_t>(cfg.init_chunk)) {
        ++label;
        since = 0;
      }
      chain.z[t] = label;
      ++since;
    }
  }
  chain.sigma_sq.assign(n, 1.0);
  chain.eta = cfg.eta_init;
  chain.alpha = cfg.alpha_init ? *cfg.alpha_init : gamma_variate(cfg.alpha_prior.shape, cfg.alpha_prior.rate, rng);
  chain.gamma = cfg.gamma_init ? *cfg.gamma_init : gamma_variate(cfg.gamma_prior.shape, cfg.gamma_prior.rate, rng);
  chain.alpha = std::max(chain.alpha, kTiny);
  chain.gamma = std::max(chain.gamma, kTiny);
  chain.stats = recompute_stats(chain.z, data, chain.sigma_sq, chain.eta, cfg);
  const int kk = chain.num_states();
  chain.beta.assign(kk + 1, 1.0 / (kk + 1));
  resample_transitions(chain, data, rng);
  return chain;
}

double stats_drift(const ChainState& chain, const Dataset& data, const ModelConfig& cfg) {
  const auto fresh = recompute_stats(chain.z, data, chain.sigma_sq, chain.eta, cfg, chain.num_states());
  double worst = 0.0;
  for (int k = 0; k < chain.num_states(); ++k) {
    const StateStats& a = chain.stats[k];
    const StateStats& b = fresh[k];
    if (a.n != b.n) return std::numeric_limits<double>::infinity();
    const Matrix ma = a.scatter_chol.reconstruct();
    const Matrix mb = b.scatter_chol.reconstruct();
    worst = std::max(worst, (ma - mb).norm() / mb.norm());
    worst = std::max(worst, (a.scatter - b.scatter).norm() / std::max(1.0, b.scatter.norm()));
    worst = std::max(worst, std::abs(a.log_sigma_sum - b.log_sigma_sum) / std::max(1.0, std::abs(b.log_sigma_sum)));
  }
  return worst;
}

void check_chain(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, double tol) {
  const int kk = chain.num_states();
  if (chain.z.size() != data.length() || chain.sigma_sq.size() != data.length()) {
    throw InconsistentChain("chain length does not match data");
  }
  std::vector<int> occ(kk, 0);
  for (int v : chain.z) {
    if (v < 0 || v >= kk) throw InconsistentChain("label out of range");
    ++occ[v];
  }
  for (int k = 0; k < kk; ++k) {
    if (occ[k] == 0) throw InconsistentChain("state " + std::to_string(k) + " is empty");
  }
  if (static_cast<int>(chain.beta.size()) != kk + 1) throw InconsistentChain("beta has the wrong length");
  const double bsum = std::accumulate(chain.beta.begin(), chain.beta.end(), 0.0);
  if (std::abs(bsum - 1.0) > 1e-10 || !(chain.beta.back() > 0.0)) {
    throw InconsistentChain("beta does not sum to one or has no remainder");
  }
  if (!pi_consistent(chain)) throw InconsistentChain("pi has the wrong shape");
  for (int k = 0; k < kk; ++k) {
    if (std::abs(chain.pi.row(k).sum() - 1.0) > 1e-10) throw InconsistentChain("pi row does not sum to one");
  }
  for (double s : chain.sigma_sq) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InconsistentChain("non-positive sigma^2");
  }
  const double drift = stats_drift(chain, data, cfg);
  if (!(drift <= tol)) throw InconsistentChain("sufficient statistics drifted by " + std::to_string(drift));
}

// ---------------------------------------------------------------------------

void instantiate_state(ChainState& chain, const ModelConfig& cfg, Rng& rng) {
  const int kk = chain.num_states();
  const double rem = chain.beta[kk];
  const double nu = beta_variate(1.0, chain.gamma, rng);
  const double w = std::max(nu * rem, kTiny);
  const double new_rem = std::max((1.0 - nu) * rem, kTiny);
  chain.beta[kk] = w;
  chain.beta.push_back(new_rem);

  Matrix np(kk + 1, kk + 2);
  np.topLeftCorner(kk, kk) = chain.pi.leftCols(kk);
  for (int j = 0; j < kk; ++j) {
    const double r = chain.pi(j, kk);
    const double f = beta_variate(chain.alpha * w, chain.alpha * new_rem, rng);
    np(j, kk) = std::max(f * r, kTiny);
    np(j, kk + 1) = std::max((1.0 - f) * r, kTiny);
  }
  std::vector<double> conc(kk + 2);
  for (int i = 0; i < kk + 2; ++i) conc[i] = chain.alpha * chain.beta[i];
  const std::vector<double> row = dirichlet(conc, rng);
  for (int i = 0; i < kk + 2; ++i) np(kk, i) = row[i];
  chain.pi = std::move(np);
  chain.stats.push_back(StateStats::empty(cfg.prior_factor(chain.eta)));
}

void prune_empty_states(ChainState& chain) {
  for (int k = chain.num_states() - 1; k >= 0; --k) {
    if (chain.stats[k].n == 0) drop_state(chain, k, nullptr);
  }
}

void resample_transitions(ChainState& chain, const Dataset& data, Rng& rng) {
  TransitionCounts counts(chain.z, data.block_start_mask(), chain.num_states());
  const Eigen::MatrixXi tables = sample_table_counts(counts, chain.beta, chain.alpha, rng);
  chain.beta = sample_beta(counts, tables, chain.gamma, rng);
  chain.pi = sample_pi(counts, chain.beta, chain.alpha, rng);
}

std::vector<double> draw_slices(const ChainState& chain, const Dataset& data, Rng& rng) {
  const auto mask = data.block_start_mask();
  std::vector<double> u(chain.z.size());
  for (std::size_t t = 0; t < u.size(); ++t) {
    const double bound = (t == 0 || mask[t]) ? chain.beta[chain.z[t]] : chain.pi(chain.z[t - 1], chain.z[t]);
    u[t] = uniform01(rng) * bound;
  }
  return u;
}

void sample_labels_beam(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng, bool prune,
                        std::vector<double>* slices_out) {
  if (!pi_consistent(chain)) throw InconsistentChain("beam sampling needs instantiated transition rows");
  const std::size_t n = data.length();
  const auto mask = data.block_start_mask();

  std::vector<CholFactor> cov_chol;
  cov_chol.reserve(chain.num_states());
  for (const auto& s : chain.stats) {
    cov_chol.push_back(cholesky_symmetric(sample_inverse_wishart(s.scatter_chol, cfg.v0 + s.n, rng)));
  }

  const std::vector<double> u = draw_slices(chain, data, rng);
  const double min_u = *std::min_element(u.begin(), u.end());
  const CholFactor prior = cfg.prior_factor(chain.eta);
  auto max_remainder = [&]() {
    double m = chain.beta.back();
    const int kk = chain.num_states();
    for (int j = 0; j < kk; ++j) m = std::max(m, chain.pi(j, kk));
    return m;
  };
  while (max_remainder() > min_u) {
    if (chain.num_states() >= cfg.max_states) {
      throw InconsistentChain("beam extension exceeded max_states = " + std::to_string(cfg.max_states));
    }
    instantiate_state(chain, cfg, rng);
    cov_chol.push_back(cholesky_symmetric(sample_inverse_wishart(prior, cfg.v0, rng)));
  }

  const int kk = chain.num_states();
  Matrix fwd(kk, static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) {
    for (int k = 0; k < kk; ++k) {
      fwd(k, static_cast<Eigen::Index>(t)) = gaussian_logdensity(data.point(t), chain.sigma_sq[t], cov_chol[k]);
    }
  }

  // Forward filtering; column t of fwd becomes the normalized log filter.
  std::vector<double> prev_p(kk), acc(kk);
  for (std::size_t t = 0; t < n; ++t) {
    auto col = fwd.col(static_cast<Eigen::Index>(t));
    if (t == 0 || mask[t]) {
      for (int k = 0; k < kk; ++k) {
        if (!(chain.beta[k] > u[t])) col(k) = kNegInf;
      }
    } else {
      const auto pc = fwd.col(static_cast<Eigen::Index>(t - 1));
      for (int j = 0; j < kk; ++j) prev_p[j] = std::exp(pc(j));
      for (int k = 0; k < kk; ++k) {
        double s = 0.0;
        for (int j = 0; j < kk; ++j) {
          if (chain.pi(j, k) > u[t]) s += prev_p[j];
        }
        col(k) = s > 0.0 ? col(k) + std::log(s) : kNegInf;
      }
    }
    const double m = col.maxCoeff();
    if (!std::isfinite(m)) throw InconsistentChain("beam forward pass lost all mass at t = " + std::to_string(t));
    double z = 0.0;
    for (int k = 0; k < kk; ++k) z += std::exp(col(k) - m);
    col.array() -= m + std::log(z);
  }

  // Backward sampling, block by block from the end.
  std::vector<double> lw(kk);
  for (std::size_t t = n; t-- > 0;) {
    const auto col = fwd.col(static_cast<Eigen::Index>(t));
    const bool last_in_block = (t + 1 == n) || mask[t + 1];
    for (int k = 0; k < kk; ++k) {
      lw[k] = col(k);
      if (!last_in_block && !(chain.pi(k, chain.z[t + 1]) > u[t + 1])) lw[k] = kNegInf;
    }
    chain.z[t] = static_cast<int>(sample_log_categorical(lw, rng));
  }

  chain.stats = recompute_stats(chain.z, data, chain.sigma_sq, chain.eta, cfg, kk);
  if (prune) prune_empty_states(chain);
  if (slices_out) *slices_out = u;
}

void sample_labels_collapsed(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                             const GibbsOptions& opts) {
  const std::size_t n = data.length();
  const auto mask = data.block_start_mask();
  TransitionCounts counts(chain.z, mask, chain.num_states());
  const CholFactor prior = cfg.prior_factor(chain.eta);
  const StateStats empty = StateStats::empty(prior);
  std::vector<double> lw;

  for (std::size_t t = 0; t < n; ++t) {
    const auto x = data.point(t);
    const double s2 = chain.sigma_sq[t];
    const int old = chain.z[t];
    counts.remove_site(chain.z, mask, t);
    chain.stats[old].remove(x, s2);
    int prev = prev_state(chain.z, mask, t);
    int next = next_state(chain.z, mask, t);
    if (opts.prune && chain.stats[old].n == 0) {
      const int last = chain.num_states() - 1;
      chain.z[t] = -1;
      drop_state(chain, old, &counts);
      if (prev == last) prev = old;
      if (next == last) next = old;
    }

    site_log_weights(chain, counts, data, cfg, t, prev, next, opts.allow_new_states, empty, lw);
    int pick = static_cast<int>(sample_log_categorical(lw, rng));
    if (pick == chain.num_states()) {
      add_collapsed_state(chain, prior, rng);
      counts.add_state();
    }
    chain.z[t] = pick;
    counts.add_site(chain.z, mask, t);
    chain.stats[pick].add(x, s2);
  }
  chain.pi.resize(0, 0);
}

std::vector<double> site_conditional(const ChainState& chain_in, const Dataset& data, const ModelConfig& cfg,
                                     std::size_t t, bool allow_new) {
  ChainState chain = chain_in;
  const auto mask = data.block_start_mask();
  TransitionCounts counts(chain.z, mask, chain.num_states());
  const int old = chain.z[t];
  counts.remove_site(chain.z, mask, t);
  chain.stats[old].remove(data.point(t), chain.sigma_sq[t]);
  int prev = prev_state(chain.z, mask, t);
  int next = next_state(chain.z, mask, t);
  if (chain.stats[old].n == 0) {
    const int last = chain.num_states() - 1;
    chain.z[t] = -1;
    drop_state(chain, old, &counts);
    if (prev == last) prev = old;
    if (next == last) next = old;
  }
  const StateStats empty = StateStats::empty(cfg.prior_factor(chain.eta));
  std::vector<double> lw;
  site_log_weights(chain, counts, data, cfg, t, prev, next, allow_new, empty, lw);
  const double norm = log_sum_exp(lw);
  for (double& v : lw) v -= norm;
  return lw;
}

// ---------------------------------------------------------------------------

void beam_sweep(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng) {
  sample_labels_beam(chain, data, cfg, rng, true);
  resample_transitions(chain, data, rng);
}

void collapsed_gibbs_sweep(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng) {
  sample_labels_collapsed(chain, data, cfg, rng);
  resample_transitions(chain, data, rng);
}

bool mh_update_eta(ChainState& chain, const Dataset& /*data*/, const ModelConfig& cfg, Rng& rng) {
  const double log_eta = std::log(chain.eta);
  const double log_prop = log_eta + cfg.mh_step * standard_normal(rng);
  const double eta_prop = std::exp(log_prop);
  const Matrix prior_prop = cfg.prior_factor(eta_prop).reconstruct();

  std::vector<StateStats> proposed = chain.stats;
  double log_ratio = cfg.eta_prior.log_density_of_log(log_prop) - cfg.eta_prior.log_density_of_log(log_eta);
  for (std::size_t k = 0; k < proposed.size(); ++k) {
    proposed[k].scatter_chol = cholesky_symmetric(prior_prop + proposed[k].scatter);
    log_ratio += state_log_marginal(proposed[k], eta_prop, cfg.sigma0_chol, cfg.v0) -
                 state_log_marginal(chain.stats[k], chain.eta, cfg.sigma0_chol, cfg.v0);
  }
  if (std::log(uniform01(rng)) < log_ratio) {
    chain.eta = eta_prop;
    chain.stats = std::move(proposed);
    return true;
  }
  return false;
}

double mh_update_sigma(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng) {
  const std::size_t n = data.length();
  std::size_t accepted = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto x = data.point(t);
    StateStats& s = chain.stats[chain.z[t]];
    const double old = chain.sigma_sq[t];
    const double log_old = std::log(old);
    const double log_prop = log_old + cfg.sigma_mh_step * standard_normal(rng);
    const double prop = std::exp(log_prop);
    const double log_ratio = rescale_log_ratio(x, old, prop, s, cfg.v0) +
                             cfg.sigma_prior.log_density_of_log(log_prop) -
                             cfg.sigma_prior.log_density_of_log(log_old);
    if (!(std::log(uniform01(rng)) < log_ratio)) continue;
    ++accepted;
    const double c = 1.0 / prop - 1.0 / old;
    s.scatter.noalias() += c * (x * x.transpose());
    s.log_sigma_sum += log_prop - log_old;
    chain.sigma_sq[t] = prop;
    Matrix l = s.scatter_chol.lower();
    try {
      chol_rank1_update_inplace(l, std::sqrt(std::abs(c)) * x, c > 0.0 ? +1 : -1);
      s.scatter_chol = CholFactor(std::move(l));
    } catch (const DowndateBreaksPositivity&) {
      s.rebuild(cfg.prior_factor(chain.eta));
    }
  }
  return n ? static_cast<double>(accepted) / static_cast<double>(n) : 0.0;
}

void resample_concentrations(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng) {
  TransitionCounts counts(chain.z, data.block_start_mask(), chain.num_states());
  const Eigen::MatrixXi tables = sample_table_counts(counts, chain.beta, chain.alpha, rng);
  const int kk = chain.num_states();

  // alpha: one Beta / Bernoulli pair per transition row with data.
  {
    double log_w_sum = 0.0;
    int s_sum = 0;
    for (int j = 0; j < kk; ++j) {
      const int nj = counts.row_total(j);
      if (nj == 0) continue;
      log_w_sum += std::log(beta_variate(chain.alpha + 1.0, nj, rng));
      if (uniform01(rng) * (nj + chain.alpha) < nj) ++s_sum;
    }
    const double shape = cfg.alpha_prior.shape + tables.sum() - s_sum;
    chain.alpha = std::max(gamma_variate(shape, cfg.alpha_prior.rate - log_w_sum, rng), kTiny);
  }

  // gamma: top-level restaurant with K dishes and M customers (tables plus initial draws).
  {
    int m_total = tables.sum();
    for (int k = 0; k < kk; ++k) m_total += counts.initial(k);
    const double a = cfg.gamma_prior.shape;
    const double w = beta_variate(chain.gamma + 1.0, m_total, rng);
    const double rate = cfg.gamma_prior.rate - std::log(w);
    const double odds = (a + kk - 1.0) / (m_total * rate);
    const double shape = (uniform01(rng) * (1.0 + odds) < odds) ? a + kk : a + kk - 1.0;
    chain.gamma = std::max(gamma_variate(shape, rate, rng), kTiny);
  }

  chain.beta = sample_beta(counts, tables, chain.gamma, rng);
  chain.pi = sample_pi(counts, chain.beta, chain.alpha, rng);
}

// ---------------------------------------------------------------------------

SweepDiagnostics full_sweep(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                            int sweep_index) {
  SweepDiagnostics d;
  d.sweep_index = sweep_index;
  switch (cfg.label_update) {
    case LabelUpdate::hybrid:
      beam_sweep(chain, data, cfg, rng);
      collapsed_gibbs_sweep(chain, data, cfg, rng);
      break;
    case LabelUpdate::beam:
      beam_sweep(chain, data, cfg, rng);
      break;
    case LabelUpdate::gibbs:
      collapsed_gibbs_sweep(chain, data, cfg, rng);
      break;
  }
  if (cfg.split_merge) d.split_merge_outcome = split_merge_move(chain, data, cfg, rng, cfg.split_merge_sweeps);
  if (cfg.sample_eta) d.eta_accept = mh_update_eta(chain, data, cfg, rng);
  if (cfg.sample_sigma) d.sigma_accept_rate = mh_update_sigma(chain, data, cfg, rng);
  if (cfg.sample_concentrations) resample_concentrations(chain, data, cfg, rng);
  if (sweep_index % cfg.recompute_interval == 0) {
    chain.stats = recompute_stats(chain.z, data, chain.sigma_sq, chain.eta, cfg, chain.num_states());
  }
  d.log_joint = log_joint(chain, data, cfg);
  d.num_states = chain.num_states();
  d.eta = chain.eta;
  d.alpha = chain.alpha;
  d.gamma = chain.gamma;
  d.scale_product = trace_geomean_product(chain, cfg);
  return d;
}

PosteriorSample snapshot(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng) {
  PosteriorSample s;
  s.z = chain.z;
  for (const auto& st : chain.stats) {
    s.covariances.emplace_back(sample_inverse_wishart(st.scatter_chol, cfg.v0 + st.n, rng));
  }
  s.pi = chain.pi;
  s.beta = chain.beta;
  s.eta = chain.eta;
  s.alpha = chain.alpha;
  s.gamma = chain.gamma;
  s.log_joint = log_joint(chain, data, cfg);
  s.sigma0 = cfg.sigma0;
  return s;
}

int retained_sample_count(const ModelConfig& cfg) {
  return cfg.sweeps > cfg.burn_in ? (cfg.sweeps - cfg.burn_in) / cfg.thin : 0;
}

ChainRun run_chain(const ModelConfig& cfg, const Dataset& data) {
  Rng rng(cfg.seed);
  ChainRun run;
  ChainState chain = initialize_chain(cfg, data, rng);
  run.diagnostics.reserve(cfg.sweeps);
  for (int s = 1; s <= cfg.sweeps; ++s) {
    SweepDiagnostics d = full_sweep(chain, data, cfg, rng, s);
    if (!std::isfinite(d.log_joint)) {
      run.diagnostics.push_back(d);
      throw InconsistentChain("non-finite log joint at sweep " + std::to_string(s));
    }
    run.diagnostics.push_back(d);
    if (s > cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0) {
      run.samples.push_back(snapshot(chain, data, cfg, rng));
      run.samples.back().sweep = s;
    }
  }
  run.final_state = std::move(chain);
  return run;
}

ChainRun constant_model_fit(const ModelConfig& cfg, const Dataset& data) {
  cfg.validate();
  data.validate();
  if (data.dim() != cfg.dim()) throw DimensionMismatch("data and prior dimensions differ");
  Rng rng(cfg.seed);
  ChainState chain;
  chain.z.assign(data.length(), 0);
  chain.sigma_sq.assign(data.length(), 1.0);
  chain.eta = cfg.eta_init;
  chain.alpha = cfg.alpha_init.value_or(1.0);
  chain.gamma = cfg.gamma_init.value_or(1.0);
  chain.beta = {1.0, 0.0};
  chain.pi = Matrix{{1.0, 0.0}};
  chain.stats = recompute_stats(chain.z, data, chain.sigma_sq, chain.eta, cfg, 1);

  auto constant_log_joint = [&](const ChainState& c) {
    LogJointTerms t;
    t.emissions = state_log_marginal(c.stats[0], c.eta, cfg.sigma0_chol, cfg.v0);
    const double le = std::log(c.eta);
    t.scale_priors = cfg.eta_prior.log_density_of_log(le) - le;
    for (double s : c.sigma_sq) t.scale_priors += cfg.sigma_prior.log_density_of_log(std::log(s)) - std::log(s);
    return t.total();
  };

  ChainRun run;
  for (int s = 1; s <= cfg.sweeps; ++s) {
    SweepDiagnostics d;
    d.sweep_index = s;
    if (cfg.sample_eta) d.eta_accept = mh_update_eta(chain, data, cfg, rng);
    if (cfg.sample_sigma) d.sigma_accept_rate = mh_update_sigma(chain, data, cfg, rng);
    if (s % cfg.recompute_interval == 0) {
      chain.stats = recompute_stats(chain.z, data, chain.sigma_sq, chain.eta, cfg, 1);
    }
    d.log_joint = constant_log_joint(chain);
    d.num_states = 1;
    d.eta = chain.eta;
    d.alpha = chain.alpha;
    d.gamma = chain.gamma;
    d.scale_product = trace_geomean_product(chain, cfg);
    run.diagnostics.push_back(d);
    if (s > cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0) {
      PosteriorSample ps;
      ps.z = chain.z;
      ps.covariances.emplace_back(sample_inverse_wishart(chain.stats[0].scatter_chol, cfg.v0 + chain.stats[0].n, rng));
      ps.pi = chain.pi;
      ps.beta = chain.beta;
      ps.eta = chain.eta;
      ps.alpha = chain.alpha;
      ps.gamma = chain.gamma;
      ps.log_joint = d.log_joint;
      ps.sigma0 = cfg.sigma0;
      ps.sweep = s;
      run.samples.push_back(std::move(ps));
    }
  }
  run.final_state = std::move(chain);
  return run;
}

}  // namespace ihmm
