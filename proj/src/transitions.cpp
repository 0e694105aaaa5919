#include "ihmm/transitions.hpp"

#include <cmath>

namespace ihmm {

TransitionCounts::TransitionCounts(const std::vector<int>& z, const std::vector<bool>& block_start,
                                   int num_states)
    : n_(Eigen::MatrixXi::Zero(num_states, num_states)), row_(num_states, 0), initial_(num_states, 0) {
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (t == 0 || block_start[t]) {
      ++initial_[z[t]];
    } else {
      bump(z[t - 1], z[t], +1);
    }
  }
}

void TransitionCounts::bump(int from, int to, int delta) {
  n_(from, to) += delta;
  row_[from] += delta;
}

void TransitionCounts::add_state() {
  const auto k = n_.rows();
  n_.conservativeResize(k + 1, k + 1);
  n_.row(k).setZero();
  n_.col(k).setZero();
  row_.push_back(0);
  initial_.push_back(0);
}

void TransitionCounts::remove_state_swap_last(int k) {
  const int last = num_states() - 1;
  if (k != last) {
    n_.row(k).swap(n_.row(last));
    n_.col(k).swap(n_.col(last));
    std::swap(row_[k], row_[last]);
    std::swap(initial_[k], initial_[last]);
  }
  n_.conservativeResize(last, last);
  row_.pop_back();
  initial_.pop_back();
}

void TransitionCounts::remove_site(const std::vector<int>& z, const std::vector<bool>& block_start,
                                   std::size_t t) {
  if (t == 0 || block_start[t]) {
    --initial_[z[t]];
  } else {
    bump(z[t - 1], z[t], -1);
  }
  if (t + 1 < z.size() && !block_start[t + 1]) bump(z[t], z[t + 1], -1);
}

void TransitionCounts::add_site(const std::vector<int>& z, const std::vector<bool>& block_start,
                                std::size_t t) {
  if (t == 0 || block_start[t]) {
    ++initial_[z[t]];
  } else {
    bump(z[t - 1], z[t], +1);
  }
  if (t + 1 < z.size() && !block_start[t + 1]) bump(z[t], z[t + 1], +1);
}

double log_prior_labels(const TransitionCounts& counts, std::span<const double> beta, double alpha) {
  const int k = counts.num_states();
  double s = 0.0;
  const double lg_alpha = std::lgamma(alpha);
  for (int j = 0; j < k; ++j) {
    if (counts.initial(j) > 0) s += counts.initial(j) * std::log(beta[j]);
    if (counts.row_total(j) == 0) continue;
    s += lg_alpha - std::lgamma(alpha + counts.row_total(j));
    for (int i = 0; i < k; ++i) {
      const int c = counts.count(j, i);
      if (c > 0) s += std::lgamma(alpha * beta[i] + c) - std::lgamma(alpha * beta[i]);
    }
  }
  return s;
}

double log_stick_density(std::span<const double> beta, const std::vector<bool>& occupied, double gamma) {
  const std::size_t k = beta.size() - 1;
  double rem = beta[k];
  double s = 0.0;
  int occ = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (occupied[i]) {
      s -= std::log(beta[i]);
      ++occ;
    } else {
      rem += beta[i];
    }
  }
  return s + occ * std::log(gamma) + (gamma - 1.0) * std::log(rem);
}

double log_site_weight(const TransitionCounts& counts, std::span<const double> beta, double alpha,
                       int prev, int next, int k) {
  double w;
  if (prev < 0) {
    w = std::log(beta[k]);
  } else {
    w = std::log(counts.count(prev, k) + alpha * beta[k]) - std::log(counts.row_total(prev) + alpha);
  }
  if (next >= 0) {
    const int self = (prev == k) ? 1 : 0;
    const int loop = (prev == k && k == next) ? 1 : 0;
    w += std::log(counts.count(k, next) + alpha * beta[next] + loop) -
         std::log(counts.row_total(k) + alpha + self);
  }
  return w;
}

double log_site_weight_new(const TransitionCounts& counts, std::span<const double> beta, double alpha,
                           int prev, int next) {
  const double rem = beta[beta.size() - 1];
  double w;
  if (prev < 0) {
    w = std::log(rem);
  } else {
    w = std::log(alpha * rem) - std::log(counts.row_total(prev) + alpha);
  }
  if (next >= 0) w += std::log(beta[next]);
  return w;
}

Eigen::MatrixXi sample_table_counts(const TransitionCounts& counts, std::span<const double> beta,
                                    double alpha, Rng& rng) {
  const int k = counts.num_states();
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      const int c = counts.count(j, i);
      if (c > 0) m(j, i) = sample_table_count(c, alpha * beta[i], rng);
    }
  }
  return m;
}

std::vector<double> sample_beta(const TransitionCounts& counts, const Eigen::MatrixXi& tables,
                                double gamma, Rng& rng) {
  const int k = counts.num_states();
  std::vector<double> conc(k + 1);
  for (int i = 0; i < k; ++i) {
    conc[i] = tables.col(i).sum() + counts.initial(i);
    // An occupied state always has an initial draw or an incoming table.
    if (conc[i] <= 0.0) throw InconsistentChain("state " + std::to_string(i) + " has no tables");
  }
  conc[k] = gamma;
  return dirichlet(conc, rng);
}

Matrix sample_pi(const TransitionCounts& counts, std::span<const double> beta, double alpha, Rng& rng) {
  const int k = counts.num_states();
  Matrix pi(k, k + 1);
  std::vector<double> conc(k + 1);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) conc[i] = alpha * beta[i] + counts.count(j, i);
    conc[k] = alpha * beta[k];
    std::vector<double> row = dirichlet(conc, rng);
    for (int i = 0; i <= k; ++i) pi(j, i) = row[i];
  }
  return pi;
}

}  // namespace ihmm
