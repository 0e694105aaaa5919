#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "ihmm/emission.hpp"
#include "ihmm/evaluation.hpp"
#include "ihmm/inference.hpp"
#include "ihmm/transitions.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ihmm;
using ihmm::testing::all_sequences;
using ihmm::testing::random_matrix;
using ihmm::testing::random_rotation;
using ihmm::testing::random_spd;

namespace {

ChainState make_chain(const std::vector<int>& z, int k, const Dataset& data, const ModelConfig& cfg,
                      std::vector<double> beta, double alpha = 1.0, double gamma = 1.0, double eta = 1.0) {
  ChainState c;
  c.z = z;
  c.beta = std::move(beta);
  c.alpha = alpha;
  c.gamma = gamma;
  c.eta = eta;
  c.sigma_sq.assign(z.size(), 1.0);
  c.stats = recompute_stats(z, data, c.sigma_sq, eta, cfg, k);
  Matrix pi(k, k + 1);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i <= k; ++i) pi(j, i) = c.beta[i];
  c.pi = pi;
  return c;
}

Dataset scalar_data(const std::vector<double>& x, std::vector<std::size_t> blocks = {0}) {
  return Dataset::from_rows(Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1), blocks);
}

/// Two well-separated covariances in p dimensions.
std::vector<SpdMatrix> separated_covs(int p, int k, Rng& rng) {
  std::vector<SpdMatrix> covs;
  for (int j = 0; j < k; ++j) {
    const Matrix r = random_rotation(p, rng);
    Vector ev(p);
    for (int i = 0; i < p; ++i) ev(i) = std::pow(8.0, (i + j) % p) / 4.0;
    covs.emplace_back(r * ev.asDiagonal() * r.transpose());
  }
  return covs;
}

/// Sticky path over k states.
std::vector<int> sticky_path(std::size_t n, int k, double stay, Rng& rng) {
  std::vector<int> z(n, 0);
  for (std::size_t t = 1; t < n; ++t) {
    z[t] = uniform01(rng) < stay ? z[t - 1] : static_cast<int>(uniform01(rng) * k);
  }
  return z;
}

double label_accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  // Best one-to-one match by greedy assignment over the confusion table.
  std::map<std::pair<int, int>, int> conf;
  for (std::size_t t = 0; t < a.size(); ++t) ++conf[{a[t], b[t]}];
  std::vector<std::pair<int, std::pair<int, int>>> cells;
  for (const auto& [key, n] : conf) cells.push_back({n, key});
  std::sort(cells.rbegin(), cells.rend());
  std::set<int> used_a, used_b;
  int hit = 0;
  for (const auto& [n, key] : cells) {
    if (used_a.count(key.first) || used_b.count(key.second)) continue;
    used_a.insert(key.first);
    used_b.insert(key.second);
    hit += n;
  }
  return static_cast<double>(hit) / a.size();
}

}  // namespace

// --- log joint ---------------------------------------------------------------

TEST(LogJoint, EmptyStateLeavesValueUnchanged) {
  Rng rng(1);
  const ModelConfig cfg = ModelConfig::defaults(2);
  const Dataset d = Dataset::from_rows(random_matrix(8, 2, rng));
  const std::vector<int> z{0, 0, 1, 1, 1, 0, 0, 1};
  const ChainState a = make_chain(z, 2, d, cfg, {0.3, 0.3, 0.4});
  // Same chain with a third, empty state carved out of the remainder.
  ChainState b = make_chain(z, 3, d, cfg, {0.3, 0.3, 0.1, 0.3});
  EXPECT_NEAR(log_joint(a, d, cfg), log_joint(b, d, cfg), 1e-10);
}

TEST(LogJoint, InvariantUnderRelabeling) {
  Rng rng(2);
  const ModelConfig cfg = ModelConfig::defaults(2);
  const Dataset d = Dataset::from_rows(random_matrix(9, 2, rng));
  const std::vector<int> z{0, 0, 1, 2, 2, 1, 0, 2, 1};
  const ChainState a = make_chain(z, 3, d, cfg, {0.2, 0.3, 0.1, 0.4});
  std::vector<int> zp(z);
  const int perm[3] = {2, 0, 1};
  for (int& v : zp) v = perm[v];
  std::vector<double> bp(4);
  for (int k = 0; k < 3; ++k) bp[perm[k]] = a.beta[k];
  bp[3] = a.beta[3];
  const ChainState b = make_chain(zp, 3, d, cfg, bp);
  EXPECT_NEAR(log_joint(a, d, cfg), log_joint(b, d, cfg), 1e-10);
}

TEST(LogJoint, EnumerationOfConditionalTerms) {
  // T = 3, at most two states, p = 1: transition and emission terms across
  // all 8 sequences against the sequential-urn / closed-form scalar oracle.
  const std::vector<double> x{0.4, -1.8, 0.9};
  const Dataset d = scalar_data(x);
  ModelConfig cfg = ModelConfig::defaults(1);
  cfg.v0 = 1.5;
  const std::vector<double> beta{0.45, 0.35, 0.2};
  const double alpha = 1.7, eta = 0.8;
  const auto mask = d.block_start_mask();
  std::vector<double> ours, ref;
  for (const auto& z : all_sequences(3, 2)) {
    const ChainState c = make_chain(z, 2, d, cfg, beta, alpha, 1.0, eta);
    const LogJointTerms t = log_joint_terms(c, d, cfg);
    ours.push_back(t.transitions + t.emissions);
    ref.push_back(oracle::polya_log_prob(z, mask, {beta[0], beta[1]}, alpha) +
                  oracle::scalar_emissions(z, 2, x, c.sigma_sq, eta, cfg.v0));
  }
  for (std::size_t i = 1; i < ours.size(); ++i) EXPECT_NEAR(ours[i] - ours[0], ref[i] - ref[0], 1e-10);
}

TEST(LogJoint, BlockOrderInvariance) {
  Rng rng(3);
  const ModelConfig cfg = ModelConfig::defaults(2);
  const Matrix a = random_matrix(5, 2, rng), b = random_matrix(4, 2, rng);
  Matrix ab(9, 2), ba(9, 2);
  ab << a, b;
  ba << b, a;
  const Dataset dab = Dataset::from_rows(ab, {0, 5});
  const Dataset dba = Dataset::from_rows(ba, {0, 4});
  const std::vector<int> za{0, 0, 1, 1, 0}, zb{1, 1, 1, 0};
  std::vector<int> zab(za), zba(zb);
  zab.insert(zab.end(), zb.begin(), zb.end());
  zba.insert(zba.end(), za.begin(), za.end());
  const double x = log_joint(make_chain(zab, 2, dab, cfg, {0.5, 0.3, 0.2}), dab, cfg);
  const double y = log_joint(make_chain(zba, 2, dba, cfg, {0.5, 0.3, 0.2}), dba, cfg);
  EXPECT_NEAR(x, y, 1e-10 * std::abs(x));
}

// --- collapsed Gibbs -----------------------------------------------------------

TEST(CollapsedGibbs, SiteConditionalMatchesEnumeration) {
  const std::vector<double> x{0.4, -1.8, 0.9, 2.2, -0.3};
  const Dataset d = scalar_data(x, {0, 3});
  ModelConfig cfg = ModelConfig::defaults(1);
  cfg.v0 = 2.0;
  const std::vector<double> beta{0.5, 0.3, 0.2};
  const double alpha = 0.9;
  const auto mask = d.block_start_mask();
  const std::vector<int> z{0, 1, 1, 0, 1};
  const ChainState c = make_chain(z, 2, d, cfg, beta, alpha);
  for (std::size_t t = 0; t < x.size(); ++t) {
    std::vector<double> lw;
    for (int k = 0; k < 2; ++k) {
      std::vector<int> zz(z);
      zz[t] = k;
      lw.push_back(oracle::polya_log_prob(zz, mask, {beta[0], beta[1]}, alpha) +
                   oracle::scalar_emissions(zz, 2, x, c.sigma_sq, 1.0, cfg.v0));
    }
    const auto expect = oracle::normalize_log(lw);
    // A singleton site would drop its state; only compare where both states stay occupied.
    if (c.stats[z[t]].n == 1) continue;
    const auto got = site_conditional(c, d, cfg, t, false);
    ASSERT_EQ(got.size(), 2u);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(std::exp(got[k]), expect[k], 1e-10) << "t=" << t;
  }
}

TEST(CollapsedGibbs, ConditionalsInvariantUnderJointRescaling) {
  Rng rng(4);
  const int p = 3, n = 30;
  ModelConfig cfg = ModelConfig::defaults(p);
  cfg.set_sigma0(random_spd(p, rng));
  const Matrix rows = random_matrix(n, p, rng);
  const Dataset d = Dataset::from_rows(rows);
  std::vector<int> z(n);
  for (int t = 0; t < n; ++t) z[t] = t % 3;
  ChainState a = make_chain(z, 3, d, cfg, {0.3, 0.3, 0.2, 0.2}, 1.3, 1.0, 0.7);
  for (double& s : a.sigma_sq) s = std::exp(standard_normal(rng));
  a.stats = recompute_stats(a.z, d, a.sigma_sq, a.eta, cfg);

  std::vector<double> c(n);
  for (double& v : c) v = 0.1 + 10.0 * uniform01(rng);
  Matrix scaled = rows;
  for (int t = 0; t < n; ++t) scaled.row(t) *= c[t];
  const Dataset ds = Dataset::from_rows(scaled);
  ChainState b = a;
  for (int t = 0; t < n; ++t) b.sigma_sq[t] *= c[t] * c[t];
  b.stats = recompute_stats(b.z, ds, b.sigma_sq, b.eta, cfg);
  for (int t = 0; t < n; ++t) {
    const auto pa = site_conditional(a, d, cfg, t, true);
    const auto pb = site_conditional(b, ds, cfg, t, true);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_NEAR(std::exp(pa[k]), std::exp(pb[k]), 1e-10);
  }
}

TEST(CollapsedGibbs, KeepsStatisticsConsistent) {
  Rng rng(5);
  const int p = 3;
  ModelConfig cfg = ModelConfig::defaults(p);
  const Dataset d = Dataset::from_rows(random_matrix(80, p, rng), {0, 40});
  ChainState c = initialize_chain(cfg, d, rng);
  for (int s = 0; s < 20; ++s) {
    sample_labels_collapsed(c, d, cfg, rng);
    resample_transitions(c, d, rng);
    EXPECT_NO_THROW(check_chain(c, d, cfg, 1e-8));
  }
}

// --- beam sampling -----------------------------------------------------------

TEST(Beam, SlicesAdmitTheReturnedSequence) {
  Rng rng(6);
  ModelConfig cfg = ModelConfig::defaults(2);
  const Dataset d = Dataset::from_rows(random_matrix(60, 2, rng), {0, 30});
  ChainState c = initialize_chain(cfg, d, rng);
  const auto mask = d.block_start_mask();
  for (int s = 0; s < 20; ++s) {
    std::vector<double> u;
    sample_labels_beam(c, d, cfg, rng, false, &u);
    for (std::size_t t = 0; t < u.size(); ++t) {
      const double bound = (t == 0 || mask[t]) ? c.beta[c.z[t]] : c.pi(c.z[t - 1], c.z[t]);
      EXPECT_GT(u[t], 0.0);
      EXPECT_LT(u[t], bound);
    }
    prune_empty_states(c);
    resample_transitions(c, d, rng);
  }
}

TEST(Beam, SingleStateWithTinyConcentrationsStaysSingle) {
  Rng rng(7);
  ModelConfig cfg = ModelConfig::defaults(2);
  const Dataset d = Dataset::from_rows(random_matrix(50, 2, rng));
  ChainState c;
  c.z.assign(50, 0);
  c.sigma_sq.assign(50, 1.0);
  c.alpha = 1e-8;
  c.gamma = 1e-8;
  c.beta = {1.0 - 1e-12, 1e-12};
  c.pi = Matrix{{1.0 - 1e-12, 1e-12}};
  c.stats = recompute_stats(c.z, d, c.sigma_sq, 1.0, cfg);
  for (int s = 0; s < 10; ++s) {
    beam_sweep(c, d, cfg, rng);
    EXPECT_EQ(c.num_states(), 1);
  }
  for (int v : c.z) EXPECT_EQ(v, 0);
}

TEST(Beam, OneSweepRecoversTwoSeparatedStates) {
  Rng rng(8);
  const int p = 3;
  const std::size_t n = 1000;
  const auto covs = separated_covs(p, 2, rng);
  ASSERT_GT((covs[0].matrix() - covs[1].matrix()).norm(), 5.0);
  const auto truth = sticky_path(n, 2, 0.98, rng);
  const Matrix x = sample_observations(covs, truth, std::vector<double>(n, 1.0), rng);
  Dataset d;
  d.points = x;
  d.normalize();
  ModelConfig cfg = ModelConfig::defaults(p);
  ChainState c;
  c.z.resize(n);
  for (int& v : c.z) v = uniform01(rng) < 0.5 ? 0 : 1;
  c.sigma_sq.assign(n, 1.0);
  c.stats = recompute_stats(c.z, d, c.sigma_sq, 1.0, cfg, 2);
  c.beta = {0.45, 0.45, 0.1};
  resample_transitions(c, d, rng);
  full_sweep(c, d, cfg, rng, 1);
  EXPECT_GE(label_accuracy(c.z, truth), 0.9);
}

TEST(Beam, TenSweepsRecoverTwoSeparatedStates) {
  for (int seed = 0; seed < 3; ++seed) {
    Rng rng(80 + seed);
    const int p = 3;
    const std::size_t n = 1000;
    const auto covs = separated_covs(p, 2, rng);
    const auto truth = sticky_path(n, 2, 0.98, rng);
    Dataset d;
    d.points = sample_observations(covs, truth, std::vector<double>(n, 1.0), rng);
    d.normalize();
    ModelConfig cfg = ModelConfig::defaults(p);
    ChainState c;
    c.z.resize(n);
    for (int& v : c.z) v = uniform01(rng) < 0.5 ? 0 : 1;
    c.sigma_sq.assign(n, 1.0);
    c.stats = recompute_stats(c.z, d, c.sigma_sq, 1.0, cfg, 2);
    c.beta = {0.45, 0.45, 0.1};
    resample_transitions(c, d, rng);
    for (int s = 1; s <= 10; ++s) full_sweep(c, d, cfg, rng, s);
    EXPECT_GE(label_accuracy(c.z, truth), 0.9) << "seed " << seed;
  }
}

// --- split-merge ---------------------------------------------------------------

TEST(SplitMerge, SingleStateOnlyProposesSplits) {
  Rng rng(9);
  ModelConfig cfg = ModelConfig::defaults(2);
  const Dataset d = Dataset::from_rows(random_matrix(40, 2, rng));
  for (int i = 0; i < 50; ++i) {
    ChainState c = make_chain(std::vector<int>(40, 0), 1, d, cfg, {0.7, 0.3});
    SplitMergeTrace trace;
    split_merge_move(c, d, cfg, rng, 3, &trace);
    EXPECT_TRUE(trace.split);
  }
}

TEST(SplitMerge, MergeAndReverseSplitAreReciprocal) {
  Rng rng(10);
  ModelConfig cfg = ModelConfig::defaults(2);
  const Dataset d = Dataset::from_rows(random_matrix(20, 2, rng), {0, 12});
  std::vector<int> z(20);
  for (int t = 0; t < 20; ++t) z[t] = (t / 3) % 3;
  const ChainState c = make_chain(z, 3, d, cfg, {0.3, 0.25, 0.15, 0.3}, 1.4, 2.0);
  const std::size_t i = 1, j = 4;  // states 0 and 1
  ASSERT_NE(c.z[i], c.z[j]);

  // The merged configuration, built by hand: state 1 folded into state 0,
  // state 2 takes slot 1.
  std::vector<int> zm(z);
  for (int& v : zm) v = v == 1 ? 0 : (v == 2 ? 1 : v);
  const ChainState m = make_chain(zm, 2, d, cfg, {0.55, 0.15, 0.3}, 1.4, 2.0);
  std::vector<std::size_t> members;
  for (std::size_t t = 0; t < 20; ++t)
    if (zm[t] == 0) members.push_back(t);
  std::vector<int> launch(members.size()), target(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    launch[k] = (members[k] == j || (k % 2 == 1 && members[k] != i)) ? 1 : 0;
    target[k] = z[members[k]] == 0 ? 0 : 1;
  }
  const double nu = 0.3 / 0.55;
  const double merge = merge_log_acceptance(c, d, cfg, i, j, launch);
  const double split = split_log_acceptance(m, d, cfg, i, j, launch, target, nu);
  EXPECT_TRUE(std::isfinite(merge));
  EXPECT_NEAR(merge + split, 0.0, 1e-8);
}

TEST(SplitMerge, CorrectSplitsAcceptedMoreOften) {
  Rng rng(11);
  const int p = 3;
  const std::size_t n = 200;
  const auto covs = separated_covs(p, 2, rng);
  const auto two = sticky_path(n, 2, 0.95, rng);
  const std::vector<int> one(n, 0);
  ModelConfig cfg = ModelConfig::defaults(p);
  auto rate = [&](const std::vector<int>& truth) {
    Dataset d;
    d.points = sample_observations(covs, truth, std::vector<double>(n, 1.0), rng);
    d.normalize();
    int accepted = 0;
    for (int a = 0; a < 500; ++a) {
      ChainState c = make_chain(one, 1, d, cfg, {0.6, 0.4});
      if (split_merge_move(c, d, cfg, rng, 3) == SplitMergeOutcome::accepted_split) ++accepted;
    }
    return accepted / 500.0;
  };
  const double distinct = rate(two);
  const double merged = rate(one);
  EXPECT_GT(distinct, merged);
}

// --- eta and sigma ---------------------------------------------------------------

TEST(EtaUpdate, PriorOnlyAlwaysAccepted) {
  Rng rng(12);
  ModelConfig cfg = ModelConfig::defaults(2);
  ChainState c;
  c.eta = 1.0;
  c.stats = {StateStats::empty(cfg.prior_factor(1.0))};
  const Dataset d = Dataset::from_rows(Matrix::Ones(1, 2));
  for (int i = 0; i < 200; ++i) EXPECT_TRUE(mh_update_eta(c, d, cfg, rng));
}

TEST(EtaUpdate, MultiplicativeNoiseGivesSameDecisions) {
  // Drawing ln eta* = ln eta + 0.1 z or eta* = eta exp(0.1 z) with the same z
  // gives the same proposal, so the decisions agree step for step.
  Rng rng(13);
  ModelConfig cfg = ModelConfig::defaults(1);
  const Dataset d = scalar_data({0.5, -1.0, 2.0});
  ChainState c = make_chain({0, 0, 0}, 1, d, cfg, {0.5, 0.5});
  Rng r1(99), r2(99);
  ChainState a = c, b = c;
  for (int i = 0; i < 500; ++i) {
    const bool x = mh_update_eta(a, d, cfg, r1);
    // Replay by hand with multiplicative noise.
    const double z = standard_normal(r2);
    const double prop = b.eta * std::exp(cfg.mh_step * z);
    StateStats s = b.stats[0];
    s.scatter_chol = cholesky_symmetric(cfg.prior_factor(prop).reconstruct() + s.scatter);
    const double lr = state_log_marginal(s, prop, cfg.sigma0_chol, cfg.v0) -
                      state_log_marginal(b.stats[0], b.eta, cfg.sigma0_chol, cfg.v0);
    const bool y = std::log(uniform01(r2)) < lr;
    if (y) {
      b.eta = prop;
      b.stats[0] = s;
    }
    ASSERT_EQ(x, y);
  }
}

TEST(EtaUpdate, LongRunMatchesGridPosterior) {
  Rng rng(14);
  const int n = 40;
  std::vector<double> x(n);
  for (double& v : x) v = 1.5 * standard_normal(rng);
  const Dataset d = scalar_data(x);
  ModelConfig cfg = ModelConfig::defaults(1);
  cfg.v0 = 2.0;
  cfg.mh_step = 0.5;
  ChainState c = make_chain(std::vector<int>(n, 0), 1, d, cfg, {0.5, 0.5});
  const std::vector<double> ones(n, 1.0);

  // Grid over ln eta: posterior density in log space is the marginal (flat prior there).
  const int bins = 100;
  const double lo = -6.0, hi = 6.0, w = (hi - lo) / bins;
  std::vector<double> lw(bins);
  for (int b = 0; b < bins; ++b) {
    // Integrate within each bin with a fine midpoint rule.
    double acc = -std::numeric_limits<double>::infinity();
    std::vector<double> vals;
    for (int s = 0; s < 50; ++s) {
      const double le = lo + (b + (s + 0.5) / 50.0) * w;
      vals.push_back(oracle::scalar_marginal(x, ones, std::exp(le), cfg.v0));
    }
    acc = log_sum_exp(vals);
    lw[b] = acc;
  }
  const auto expect = oracle::normalize_log(lw);

  std::vector<double> hist(bins, 0.0);
  const int steps = 400000;
  for (int i = 0; i < 2000; ++i) mh_update_eta(c, d, cfg, rng);
  for (int i = 0; i < steps; ++i) {
    mh_update_eta(c, d, cfg, rng);
    const int b = static_cast<int>(std::floor((std::log(c.eta) - lo) / w));
    if (b >= 0 && b < bins) hist[b] += 1.0 / steps;
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += 0.5 * std::abs(hist[b] - expect[b]);
  EXPECT_LT(tv, 0.05);
}

TEST(SigmaUpdate, SingleTimepointMatchesQuadrature) {
  Rng rng(15);
  const Dataset d = scalar_data({1.3});
  ModelConfig cfg = ModelConfig::defaults(1);
  cfg.v0 = 3.0;
  cfg.sigma_mh_step = 1.0;
  // A proper prior keeps the target normalizable for the histogram.
  cfg.sigma_prior.kind = ScalePrior::Kind::lognormal;
  cfg.sigma_prior.mu = 0.0;
  cfg.sigma_prior.sd = 1.5;
  ChainState c = make_chain({0}, 1, d, cfg, {0.5, 0.5});

  const int bins = 100;
  const double lo = -8.0, hi = 8.0, w = (hi - lo) / bins;
  std::vector<double> lw(bins);
  for (int b = 0; b < bins; ++b) {
    std::vector<double> vals;
    for (int s = 0; s < 50; ++s) {
      const double ls = lo + (b + (s + 0.5) / 50.0) * w;
      vals.push_back(oracle::scalar_marginal({1.3}, {std::exp(ls)}, 1.0, cfg.v0) - 0.5 * (ls / 1.5) * (ls / 1.5));
    }
    lw[b] = log_sum_exp(vals);
  }
  const auto expect = oracle::normalize_log(lw);
  std::vector<double> hist(bins, 0.0);
  const int steps = 400000;
  for (int i = 0; i < steps; ++i) {
    mh_update_sigma(c, d, cfg, rng);
    const int b = static_cast<int>(std::floor((std::log(c.sigma_sq[0]) - lo) / w));
    if (b >= 0 && b < bins) hist[b] += 1.0 / steps;
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += 0.5 * std::abs(hist[b] - expect[b]);
  EXPECT_LT(tv, 0.05);
}

TEST(SigmaUpdate, RejectionLeavesChainBitIdentical) {
  Rng rng(16);
  const Dataset d = scalar_data({1.3});
  ModelConfig cfg = ModelConfig::defaults(1);
  cfg.sigma_mh_step = 3.0;
  ChainState c = make_chain({0}, 1, d, cfg, {0.5, 0.5});
  int rejections = 0;
  for (int i = 0; i < 200 && rejections < 20; ++i) {
    const ChainState before = c;
    if (mh_update_sigma(c, d, cfg, rng) == 0.0) {
      ++rejections;
      EXPECT_EQ(c.sigma_sq, before.sigma_sq);
      EXPECT_TRUE(c.stats[0].scatter == before.stats[0].scatter);
      EXPECT_TRUE(c.stats[0].scatter_chol.lower() == before.stats[0].scatter_chol.lower());
      EXPECT_EQ(c.stats[0].log_sigma_sum, before.stats[0].log_sigma_sum);
    }
  }
  EXPECT_GT(rejections, 0);
}

TEST(SigmaUpdate, SweepPreservesStatistics) {
  Rng rng(17);
  ModelConfig cfg = ModelConfig::defaults(3);
  const Dataset d = Dataset::from_rows(random_matrix(100, 3, rng));
  ChainState c = initialize_chain(cfg, d, rng);
  for (int i = 0; i < 50; ++i) {
    const double rate = mh_update_sigma(c, d, cfg, rng);
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
  }
  EXPECT_NO_THROW(check_chain(c, d, cfg, 1e-8));
}

// --- concentrations --------------------------------------------------------------

TEST(Concentrations, NoTransitionsReproducesPrior) {
  Rng rng(18);
  ModelConfig cfg = ModelConfig::defaults(1);
  cfg.alpha_prior = {2.0, 1.5};
  cfg.gamma_prior = {3.0, 2.0};
  const Dataset d = scalar_data({0.7});
  ChainState c = make_chain({0}, 1, d, cfg, {0.5, 0.5});
  double sa = 0.0, sg = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    resample_concentrations(c, d, cfg, rng);
    ASSERT_GT(c.alpha, 0.0);
    ASSERT_GT(c.gamma, 0.0);
    sa += c.alpha;
    sg += c.gamma;
  }
  EXPECT_NEAR(sa / n, cfg.alpha_prior.mean(), 0.02 * cfg.alpha_prior.mean());
  EXPECT_NEAR(sg / n, cfg.gamma_prior.mean(), 0.02 * cfg.gamma_prior.mean());
}

TEST(Concentrations, MoreStatesRaiseGamma) {
  Rng rng(19);
  ModelConfig cfg = ModelConfig::defaults(1);
  const int n = 60;
  std::vector<double> x(n, 1.0);
  const Dataset d = scalar_data(x);
  std::vector<double> ks, gs;
  for (int k = 1; k <= 6; ++k) {
    std::vector<int> z(n);
    for (int t = 0; t < n; ++t) z[t] = (t * k) / n;
    std::vector<double> beta(k + 1, 1.0 / (k + 1));
    ChainState c = make_chain(z, k, d, cfg, beta);
    for (int rep = 0; rep < 5; ++rep) {
      double s = 0.0;
      for (int i = 0; i < 400; ++i) {
        resample_concentrations(c, d, cfg, rng);
        s += c.gamma;
      }
      ks.push_back(k);
      gs.push_back(s / 400);
    }
  }
  // Spearman correlation via ranks.
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t m = i; m <= j; ++m) r[idx[m]] = 0.5 * (i + j);
      i = j + 1;
    }
    return r;
  };
  const auto rk = ranks(ks), rg = ranks(gs);
  const double mk = std::accumulate(rk.begin(), rk.end(), 0.0) / rk.size();
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / rg.size();
  double num = 0.0, dk = 0.0, dg = 0.0;
  for (std::size_t i = 0; i < rk.size(); ++i) {
    num += (rk[i] - mk) * (rg[i] - mg);
    dk += (rk[i] - mk) * (rk[i] - mk);
    dg += (rg[i] - mg) * (rg[i] - mg);
  }
  EXPECT_GT(num / std::sqrt(dk * dg), 0.0);
}

// --- chains ----------------------------------------------------------------------

TEST(RunChain, SmokeContract) {
  Rng rng(20);
  ModelConfig cfg = ModelConfig::defaults(2);
  cfg.sweeps = 20;
  cfg.burn_in = 5;
  cfg.thin = 3;
  cfg.seed = 7;
  const Dataset d = Dataset::from_rows(random_matrix(10, 2, rng));
  const ChainRun run = run_chain(cfg, d);
  EXPECT_EQ(static_cast<int>(run.samples.size()), retained_sample_count(cfg));
  EXPECT_EQ(run.diagnostics.size(), 20u);
  for (const auto& dg : run.diagnostics) {
    EXPECT_TRUE(std::isfinite(dg.log_joint));
    EXPECT_GE(dg.num_states, 1);
    EXPECT_GE(dg.sigma_accept_rate, 0.0);
    EXPECT_LE(dg.sigma_accept_rate, 1.0);
  }
  for (const auto& s : run.samples) {
    EXPECT_EQ(static_cast<int>(s.covariances.size()), s.num_states());
    for (int k = 0; k < s.pi.rows(); ++k) EXPECT_NEAR(s.pi.row(k).sum(), 1.0, 1e-10);
  }
  EXPECT_NO_THROW(check_chain(run.final_state, d, cfg, 1e-8));
}

TEST(RunChain, DeterministicGivenSeed) {
  Rng rng(21);
  ModelConfig cfg = ModelConfig::defaults(2);
  cfg.sweeps = 15;
  cfg.burn_in = 5;
  cfg.thin = 2;
  cfg.seed = 3;
  const Dataset d = Dataset::from_rows(random_matrix(30, 2, rng), {0, 15});
  const ChainRun a = run_chain(cfg, d), b = run_chain(cfg, d);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].z, b.samples[i].z);
    EXPECT_EQ(a.samples[i].log_joint, b.samples[i].log_joint);
  }
}

TEST(RunChain, StatisticsConsistentAfterEverySweep) {
  Rng rng(22);
  ModelConfig cfg = ModelConfig::defaults(3);
  const Dataset d = Dataset::from_rows(random_matrix(120, 3, rng), {0, 50, 90});
  ChainState c = initialize_chain(cfg, d, rng);
  for (int s = 1; s <= 40; ++s) {
    full_sweep(c, d, cfg, rng, s);
    ASSERT_NO_THROW(check_chain(c, d, cfg, 1e-8)) << "sweep " << s;
  }
}

TEST(RunChain, LabelUpdateVariantsRun) {
  Rng rng(23);
  const Dataset d = Dataset::from_rows(random_matrix(40, 2, rng));
  for (LabelUpdate u : {LabelUpdate::beam, LabelUpdate::gibbs, LabelUpdate::hybrid}) {
    ModelConfig cfg = ModelConfig::defaults(2);
    cfg.label_update = u;
    cfg.sweeps = 10;
    cfg.burn_in = 0;
    cfg.thin = 1;
    const ChainRun run = run_chain(cfg, d);
    EXPECT_EQ(run.samples.size(), 10u);
    EXPECT_NO_THROW(check_chain(run.final_state, d, cfg, 1e-8));
  }
}

TEST(ConstantModel, PinnedToOneState) {
  Rng rng(24);
  ModelConfig cfg = ModelConfig::defaults(2);
  cfg.sweeps = 30;
  cfg.burn_in = 10;
  cfg.thin = 2;
  const Dataset d = Dataset::from_rows(random_matrix(50, 2, rng));
  const ChainRun run = constant_model_fit(cfg, d);
  EXPECT_EQ(static_cast<int>(run.samples.size()), retained_sample_count(cfg));
  for (const auto& s : run.samples) {
    EXPECT_EQ(s.num_states(), 1);
    for (int z : s.z) EXPECT_EQ(z, 0);
  }
}

TEST(ConstantModel, CovarianceApproachesNormalizedScatter) {
  Rng rng(25);
  const int p = 3;
  const std::size_t n = 5000;
  const SpdMatrix cov = random_spd(p, rng);
  const Matrix x = sample_observations({cov}, std::vector<int>(n, 0), std::vector<double>(n, 1.0), rng);
  Dataset d;
  d.points = x;
  d.normalize();
  ModelConfig cfg = ModelConfig::defaults(p);
  cfg.sweeps = 60;
  cfg.burn_in = 0;
  cfg.thin = 60;
  const ChainRun run = constant_model_fit(cfg, d);
  ASSERT_EQ(run.samples.size(), 1u);
  const Matrix scatter = run.final_state.stats[0].scatter / static_cast<double>(n);
  EXPECT_LT(ihmm::testing::rel_frobenius(run.samples[0].covariances[0].matrix(), scatter), 0.1);
}
