// Split-merge for the state partition with pi integrated out and sticks
// explicit. Restricted Gibbs passes build the launch state; the last pass is
// the proposal. A split also draws nu = beta_A / (beta_A + beta_B) from
// Beta(1 + n_A, 1 + n_B).

#include <algorithm>
#include <cmath>
#include <limits>

#include "ihmm/emission.hpp"
#include "ihmm/inference.hpp"
#include "ihmm/transitions.hpp"

namespace ihmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::size_t> members_of(const std::vector<int>& z, int a, int b = -1) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (z[t] == a || z[t] == b) out.push_back(t);
  }
  return out;
}

double log_beta_pdf(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

/// Working copy where state k (holding all members) is split by `sides` into
/// k and a new last state, both carrying half of k's stick.
struct SplitWork {
  ChainState chain;
  TransitionCounts counts;
  std::vector<bool> mask;
  int side_label[2];
};

SplitWork make_work(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, int k,
                    const std::vector<std::size_t>& members, const std::vector<int>& sides) {
  SplitWork w;
  w.chain = chain;
  const int knew = chain.num_states();
  w.side_label[0] = k;
  w.side_label[1] = knew;
  const double half = 0.5 * chain.beta[k];
  w.chain.beta[k] = half;
  w.chain.beta.insert(w.chain.beta.begin() + knew, half);
  const CholFactor prior = cfg.prior_factor(chain.eta);
  w.chain.stats[k] = StateStats::empty(prior);
  w.chain.stats.push_back(StateStats::empty(prior));
  for (std::size_t m = 0; m < members.size(); ++m) {
    const std::size_t t = members[m];
    const int label = w.side_label[sides[m]];
    w.chain.z[t] = label;
    w.chain.stats[label].add(data.point(t), chain.sigma_sq[t]);
  }
  w.chain.pi.resize(0, 0);
  w.mask = data.block_start_mask();
  w.counts = TransitionCounts(w.chain.z, w.mask, knew + 1);
  return w;
}

/// One restricted pass over the non-anchor members. With `forced` the sides
/// are set to it; otherwise they are sampled. Returns the log probability of
/// the resulting sides.
double restricted_pass(SplitWork& w, const Dataset& data, const ModelConfig& cfg,
                       const std::vector<std::size_t>& members, std::vector<int>& sides, std::size_t i,
                       std::size_t j, const std::vector<int>* forced, Rng* rng) {
  double log_q = 0.0;
  ChainState& c = w.chain;
  const std::size_t n = c.z.size();
  for (std::size_t m = 0; m < members.size(); ++m) {
    const std::size_t t = members[m];
    if (t == i || t == j) continue;
    const auto x = data.point(t);
    const double s2 = c.sigma_sq[t];
    w.counts.remove_site(c.z, w.mask, t);
    c.stats[c.z[t]].remove(x, s2);
    const int prev = (t == 0 || w.mask[t]) ? -1 : c.z[t - 1];
    const int next = (t + 1 < n && !w.mask[t + 1]) ? c.z[t + 1] : -1;
    double lw[2];
    for (int s = 0; s < 2; ++s) {
      const int label = w.side_label[s];
      lw[s] = log_site_weight(w.counts, c.beta, c.alpha, prev, next, label) +
              assign_log_predictive(x, s2, c.stats[label], c.eta, cfg.sigma0_chol, cfg.v0);
    }
    const double norm = log_sum_exp(lw);
    int side;
    if (forced) {
      side = (*forced)[m];
    } else {
      side = std::log(uniform01(*rng)) < lw[0] - norm ? 0 : 1;
    }
    log_q += lw[side] - norm;
    sides[m] = side;
    c.z[t] = w.side_label[side];
    w.counts.add_site(c.z, w.mask, t);
    c.stats[c.z[t]].add(x, s2);
  }
  return log_q;
}

std::vector<int> initial_sides(const std::vector<std::size_t>& members, std::size_t j) {
  std::vector<int> s(members.size(), 0);
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m] == j) s[m] = 1;
  }
  return s;
}

/// Launch state: initial sides refined by n - 1 sampled restricted passes.
std::vector<int> build_launch(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, int k,
                              const std::vector<std::size_t>& members, std::size_t i, std::size_t j, int passes,
                              Rng& rng) {
  std::vector<int> sides = initial_sides(members, j);
  if (passes <= 1) return sides;
  SplitWork w = make_work(chain, data, cfg, k, members, sides);
  for (int p = 0; p + 1 < passes; ++p) restricted_pass(w, data, cfg, members, sides, i, j, nullptr, &rng);
  return sides;
}

/// Chain with the state of j merged into the state of i (stick summed, j's
/// slot filled by the last state). pi is left stale.
ChainState merged_chain(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, std::size_t i,
                        std::size_t j) {
  ChainState out = chain;
  const int ki = chain.z[i];
  const int kj = chain.z[j];
  const int last = chain.num_states() - 1;
  out.beta[ki] += out.beta[kj];
  for (int& v : out.z) {
    if (v == kj) v = ki;
  }
  if (kj != last) {
    for (int& v : out.z) {
      if (v == last) v = kj;
    }
    out.beta[kj] = out.beta[last];
    std::swap(out.stats[kj], out.stats[last]);
  }
  out.beta.erase(out.beta.begin() + last);
  out.stats.pop_back();
  const int kept = (ki == last) ? kj : ki;
  out.stats[kept] = StateStats::empty(cfg.prior_factor(chain.eta));
  for (std::size_t t : members_of(out.z, kept)) out.stats[kept].add(data.point(t), chain.sigma_sq[t]);
  out.pi.resize(0, 0);
  return out;
}

}  // namespace

double split_log_acceptance(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, std::size_t i,
                            std::size_t j, const std::vector<int>& launch, const std::vector<int>& target,
                            double nu) {
  const int k = chain.z[i];
  if (chain.z[j] != k) throw InconsistentChain("split anchors must share a state");
  if (!(nu > 0.0 && nu < 1.0)) return kNegInf;
  const std::vector<std::size_t> members = members_of(chain.z, k);
  if (launch.size() != members.size() || target.size() != members.size()) {
    throw LengthMismatch("split sides must cover every member of the state");
  }

  SplitWork w = make_work(chain, data, cfg, k, members, launch);
  std::vector<int> sides = launch;
  const double log_q = restricted_pass(w, data, cfg, members, sides, i, j, &target, nullptr);

  // After the forced pass the working chain holds the target partition.
  const int knew = w.side_label[1];
  const double big = chain.beta[k];
  w.chain.beta[k] = big * nu;
  w.chain.beta[knew] = big * (1.0 - nu);
  int n_side[2] = {0, 0};
  for (int s : target) ++n_side[s];

  const auto mask = w.mask;
  const TransitionCounts before(chain.z, mask, chain.num_states());
  const double lp_before = log_prior_labels(before, chain.beta, chain.alpha) +
                           state_log_marginal(chain.stats[k], chain.eta, cfg.sigma0_chol, cfg.v0);
  const double lp_after = log_prior_labels(w.counts, w.chain.beta, chain.alpha) +
                          state_log_marginal(w.chain.stats[k], chain.eta, cfg.sigma0_chol, cfg.v0) +
                          state_log_marginal(w.chain.stats[knew], chain.eta, cfg.sigma0_chol, cfg.v0);
  // Stick density times the Jacobian of (B, nu) -> (beta_A, beta_B) gives gamma / (nu (1 - nu)).
  const double sticks = std::log(chain.gamma) - std::log(nu) - std::log1p(-nu);
  return lp_after - lp_before + sticks - log_beta_pdf(nu, 1.0 + n_side[0], 1.0 + n_side[1]) - log_q;
}

double merge_log_acceptance(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, std::size_t i,
                            std::size_t j, const std::vector<int>& launch) {
  const int ki = chain.z[i];
  const int kj = chain.z[j];
  if (ki == kj) throw InconsistentChain("merge anchors must sit in different states");
  const std::vector<std::size_t> members = members_of(chain.z, ki, kj);
  std::vector<int> target(members.size());
  for (std::size_t m = 0; m < members.size(); ++m) target[m] = chain.z[members[m]] == ki ? 0 : 1;
  const double nu = chain.beta[ki] / (chain.beta[ki] + chain.beta[kj]);
  const ChainState merged = merged_chain(chain, data, cfg, i, j);
  return -split_log_acceptance(merged, data, cfg, i, j, launch, target, nu);
}

SplitMergeOutcome split_merge_move(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                                   int n_restricted_sweeps, SplitMergeTrace* trace) {
  const std::size_t n = data.length();
  if (n < 2) return SplitMergeOutcome::not_attempted;
  prune_empty_states(chain);
  const int passes = std::max(1, n_restricted_sweeps);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t i = pick(rng);
  std::size_t j = pick(rng);
  while (j == i) j = pick(rng);

  SplitMergeOutcome outcome = SplitMergeOutcome::rejected;
  double log_a = 0.0;
  const bool split = chain.z[i] == chain.z[j];

  if (split) {
    const int k = chain.z[i];
    const std::vector<std::size_t> members = members_of(chain.z, k);
    const std::vector<int> launch = build_launch(chain, data, cfg, k, members, i, j, passes, rng);
    SplitWork w = make_work(chain, data, cfg, k, members, launch);
    std::vector<int> target = launch;
    restricted_pass(w, data, cfg, members, target, i, j, nullptr, &rng);
    int n_side[2] = {0, 0};
    for (int s : target) ++n_side[s];
    const double nu = beta_variate(1.0 + n_side[0], 1.0 + n_side[1], rng);
    log_a = split_log_acceptance(chain, data, cfg, i, j, launch, target, nu);
    if (std::log(uniform01(rng)) < log_a) {
      const int knew = w.side_label[1];
      const double big = chain.beta[k];
      w.chain.beta[k] = big * nu;
      w.chain.beta[knew] = big * (1.0 - nu);
      chain.z = std::move(w.chain.z);
      chain.beta = std::move(w.chain.beta);
      chain.stats = std::move(w.chain.stats);
      outcome = SplitMergeOutcome::accepted_split;
    }
  } else {
    ChainState merged = merged_chain(chain, data, cfg, i, j);
    const int kept = merged.z[i];
    const std::vector<std::size_t> members = members_of(merged.z, kept);
    const std::vector<int> launch = build_launch(merged, data, cfg, kept, members, i, j, passes, rng);
    log_a = merge_log_acceptance(chain, data, cfg, i, j, launch);
    if (std::log(uniform01(rng)) < log_a) {
      chain.z = std::move(merged.z);
      chain.beta = std::move(merged.beta);
      chain.stats = std::move(merged.stats);
      outcome = SplitMergeOutcome::accepted_merge;
    }
  }

  const TransitionCounts counts(chain.z, data.block_start_mask(), chain.num_states());
  chain.pi = sample_pi(counts, chain.beta, chain.alpha, rng);
  if (trace) *trace = SplitMergeTrace{split, i, j, log_a};
  return outcome;
}

}  // namespace ihmm
