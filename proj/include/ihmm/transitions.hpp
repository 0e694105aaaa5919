#pragma once

// HDP transition bookkeeping for the direct-assignment representation:
// transition counts, the state-sequence prior with transition rows
// integrated out, the stick density over occupied states, and the
// table-count / Dirichlet resampling of beta and pi.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "ihmm/model.hpp"
#include "ihmm/random.hpp"

namespace ihmm {

class TransitionCounts {
 public:
  TransitionCounts() = default;
  TransitionCounts(const std::vector<int>& z, const std::vector<bool>& block_start, int num_states);

  int num_states() const { return static_cast<int>(initial_.size()); }
  int count(int from, int to) const { return n_(from, to); }
  int row_total(int from) const { return row_[from]; }
  int initial(int k) const { return initial_[k]; }
  const Eigen::MatrixXi& counts() const { return n_; }

  void add_state();
  /// Moves the last state into slot k. Slot k must carry no counts.
  void remove_state_swap_last(int k);

  /// Removes / adds the transitions that touch position t: the incoming one
  /// (or the initial draw at a block start) and the outgoing one when t+1
  /// continues the same block.
  void remove_site(const std::vector<int>& z, const std::vector<bool>& block_start, std::size_t t);
  void add_site(const std::vector<int>& z, const std::vector<bool>& block_start, std::size_t t);

 private:
  void bump(int from, int to, int delta);

  Eigen::MatrixXi n_;
  std::vector<int> row_;
  std::vector<int> initial_;
};

/// ln p(z | beta, alpha) with transition rows integrated out:
///   sum_k c_k ln beta_k + sum_j [ln G(alpha) - ln G(alpha + n_j.)]
///   + sum_jk [ln G(alpha beta_k + n_jk) - ln G(alpha beta_k)]
/// where c_k counts block starts in state k. `beta` holds K + 1 entries.
double log_prior_labels(const TransitionCounts& counts, std::span<const double> beta, double alpha);

/// ln of the stick density over the occupied states,
///   K ln gamma - sum_k ln beta_k + (gamma - 1) ln beta_rem.
/// Entries with occupied[k] == false are folded into the remainder.
double log_stick_density(std::span<const double> beta, const std::vector<bool>& occupied, double gamma);

/// Log weight, up to a constant shared by all candidates, of placing the
/// site whose transitions were removed into existing state k.
/// prev < 0 marks a block start, next < 0 a site without successor.
double log_site_weight(const TransitionCounts& counts, std::span<const double> beta, double alpha,
                       int prev, int next, int k);
/// Same for a brand-new state, with its stick integrated out of the remainder.
double log_site_weight_new(const TransitionCounts& counts, std::span<const double> beta, double alpha,
                           int prev, int next);

/// Table counts m_jk ~ CRT(n_jk, alpha beta_k).
Eigen::MatrixXi sample_table_counts(const TransitionCounts& counts, std::span<const double> beta,
                                    double alpha, Rng& rng);

/// beta ~ Dir(m_.1 + c_1, ..., m_.K + c_K, gamma).
std::vector<double> sample_beta(const TransitionCounts& counts, const Eigen::MatrixXi& tables,
                                double gamma, Rng& rng);

/// Rows pi_j ~ Dir(alpha beta + n_j.), remainder column last.
Matrix sample_pi(const TransitionCounts& counts, std::span<const double> beta, double alpha, Rng& rng);

}  // namespace ihmm
