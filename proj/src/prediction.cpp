#include "ihmm/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ihmm/emission.hpp"

namespace ihmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

/// Scores in path-index space: 0 is the aggregate, s = k + 1 is state k.
struct Lattice {
  int size = 0;
  std::vector<double> initial;
  Matrix transition;  // from x to
  Matrix emission;    // states x T
};

Lattice build_lattice(const PosteriorSample& sample, const Dataset& test) {
  const int kk = sample.num_states();
  const int p = test.dim();
  if (sample.sigma0.dim() != p) {
    throw DimensionMismatch("test data has p = " + std::to_string(p) + " but the sample has p = " +
                            std::to_string(sample.sigma0.dim()));
  }
  if (static_cast<int>(sample.beta.size()) != kk + 1 || sample.pi.rows() != kk || sample.pi.cols() != kk + 1) {
    throw InconsistentChain("sample beta / pi do not match its state count");
  }
  Lattice l;
  l.size = kk + 1;
  l.initial.resize(kk + 1);
  l.initial[0] = safe_log(sample.beta[kk]);
  for (int k = 0; k < kk; ++k) l.initial[k + 1] = safe_log(sample.beta[k]);

  l.transition.resize(kk + 1, kk + 1);
  for (int s = 0; s <= kk; ++s) l.transition(0, s) = l.initial[s];
  for (int j = 0; j < kk; ++j) {
    l.transition(j + 1, 0) = safe_log(sample.pi(j, kk));
    for (int k = 0; k < kk; ++k) l.transition(j + 1, k + 1) = safe_log(sample.pi(j, k));
  }

  std::vector<CholFactor> chol;
  chol.reserve(kk + 1);
  chol.push_back(cholesky(sample.sigma0));
  for (const auto& c : sample.covariances) {
    if (c.dim() != p) throw DimensionMismatch("sample covariance dimension differs from the test data");
    chol.push_back(cholesky(c));
  }
  const auto n = static_cast<Eigen::Index>(test.length());
  l.emission.resize(kk + 1, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int s = 0; s <= kk; ++s) l.emission(s, t) = sigma_integrated_logdensity(test.point(t), chol[s]);
  }
  return l;
}

}  // namespace

PredictiveResult predictive_viterbi(const PosteriorSample& sample, const Dataset& test, int sample_id) {
  test.validate();
  const Lattice l = build_lattice(sample, test);
  const std::size_t n = test.length();
  const int m = l.size;
  const auto mask = test.block_start_mask();

  Matrix delta(m, static_cast<Eigen::Index>(n));
  Eigen::MatrixXi back(m, static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    for (int s = 0; s < m; ++s) {
      if (t == 0 || mask[t]) {
        delta(s, ti) = l.initial[s] + l.emission(s, ti);
        back(s, ti) = -1;
        continue;
      }
      double best = kNegInf;
      int arg = 0;
      for (int r = 0; r < m; ++r) {
        const double v = delta(r, ti - 1) + l.transition(r, s);
        if (v > best) {
          best = v;
          arg = r;
        }
      }
      delta(s, ti) = best + l.emission(s, ti);
      back(s, ti) = arg;
    }
  }

  PredictiveResult out;
  out.sample_id = sample_id;
  out.path.assign(n, 0);
  out.per_t_logscore.assign(n, 0.0);
  // Blocks are independent, so the best path ends at the best state of each block.
  for (std::size_t t = n; t-- > 0;) {
    const bool block_end = (t + 1 == n) || mask[t + 1];
    if (block_end) {
      Eigen::Index arg;
      delta.col(static_cast<Eigen::Index>(t)).maxCoeff(&arg);
      out.path[t] = static_cast<int>(arg);
    } else {
      out.path[t] = back(out.path[t + 1], static_cast<Eigen::Index>(t + 1));
    }
  }
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const int s = out.path[t];
    const double trans = (t == 0 || mask[t]) ? l.initial[s] : l.transition(out.path[t - 1], s);
    out.per_t_logscore[t] = trans + l.emission(s, static_cast<Eigen::Index>(t));
    total += out.per_t_logscore[t];
  }
  out.total_logscore = total;
  return out;
}

PredictiveResult predictive_forward(const PosteriorSample& sample, const Dataset& test, int sample_id) {
  test.validate();
  const Lattice l = build_lattice(sample, test);
  const std::size_t n = test.length();
  const int m = l.size;
  const auto mask = test.block_start_mask();

  PredictiveResult out;
  out.sample_id = sample_id;
  out.path.assign(n, 0);
  out.per_t_logscore.assign(n, 0.0);
  std::vector<double> prev(m), cur(m), tmp(m);
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    for (int s = 0; s < m; ++s) {
      if (t == 0 || mask[t]) {
        cur[s] = l.initial[s];
      } else {
        for (int r = 0; r < m; ++r) tmp[r] = prev[r] + l.transition(r, s);
        cur[s] = log_sum_exp(tmp);
      }
      cur[s] += l.emission(s, ti);
    }
    const double norm = log_sum_exp(cur);
    for (int s = 0; s < m; ++s) cur[s] -= norm;
    out.path[t] = static_cast<int>(std::max_element(cur.begin(), cur.end()) - cur.begin());
    out.per_t_logscore[t] = norm;
    total += norm;
    std::swap(prev, cur);
  }
  out.total_logscore = total;
  return out;
}

PredictiveResult predictive_result(const PosteriorSample& sample, const Dataset& test, ScoreMode mode,
                                   int sample_id) {
  return mode == ScoreMode::viterbi ? predictive_viterbi(sample, test, sample_id)
                                    : predictive_forward(sample, test, sample_id);
}

double log_mean_exp(std::span<const double> v) {
  if (v.empty()) throw EmptySamples();
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

double predictive_score(const std::vector<PosteriorSample>& samples, const Dataset& test, ScoreMode mode) {
  if (samples.empty()) throw EmptySamples();
  std::vector<double> totals;
  totals.reserve(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    totals.push_back(predictive_result(samples[s], test, mode, static_cast<int>(s)).total_logscore);
  }
  return log_mean_exp(totals);
}

}  // namespace ihmm
