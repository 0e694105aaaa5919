#pragma once

// MCMC for the IHMM-Wishart model.
//
// The chain keeps only occupied states. Sticks over those states follow the
// density K ln gamma - sum ln beta_k + (gamma - 1) ln beta_rem; unrepresented
// states live in the remainder and are instantiated lazily (by stick
// breaking) whenever a move needs them.

#include <functional>
#include <vector>

#include "ihmm/model.hpp"
#include "ihmm/random.hpp"

namespace ihmm {

enum class SplitMergeOutcome { accepted_split, accepted_merge, rejected, not_attempted };
const char* to_string(SplitMergeOutcome o);

struct SweepDiagnostics {
  int sweep_index = 0;
  double log_joint = 0.0;
  int num_states = 0;
  SplitMergeOutcome split_merge_outcome = SplitMergeOutcome::not_attempted;
  bool eta_accept = false;
  double sigma_accept_rate = 0.0;
  double eta = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  /// trace(eta Sigma0) * geometric mean of sigma_t^2; the eta / sigma^2
  /// scale trade-off moves along a ridge that leaves this product fixed.
  double scale_product = 0.0;
};

struct PosteriorSample {
  std::vector<int> z;
  /// One per occupied state, drawn from IW(eta Sigma0 + S_k, v0 + n_k).
  std::vector<SpdMatrix> covariances;
  Matrix pi;                 // K x (K + 1)
  std::vector<double> beta;  // K + 1
  double eta = 1.0;
  double alpha = 1.0;
  double gamma = 1.0;
  double log_joint = 0.0;
  /// Prior shape; drives the emission of states never seen in training.
  SpdMatrix sigma0;
  int sweep = 0;

  int num_states() const { return static_cast<int>(covariances.size()); }
};

struct LogJointTerms {
  double sticks = 0.0;
  double transitions = 0.0;
  double emissions = 0.0;
  double scale_priors = 0.0;
  double concentration_priors = 0.0;

  double total() const { return sticks + transitions + emissions + scale_priors + concentration_priors; }
};

/// Unnormalized log posterior with covariances and transition rows integrated out.
LogJointTerms log_joint_terms(const ChainState& chain, const Dataset& data, const ModelConfig& cfg);
double log_joint(const ChainState& chain, const Dataset& data, const ModelConfig& cfg);

/// Chunks of cfg.init_chunk timepoints per block to consecutive states (one
/// state for all when init_chunk == 0); sigma^2 = 1; eta = eta_init; alpha,
/// gamma from their priors unless given.
ChainState initialize_chain(const ModelConfig& cfg, const Dataset& data, Rng& rng);

/// Largest relative (Frobenius) difference between incremental and
/// recomputed statistics; also compares counts and log-sigma sums.
double stats_drift(const ChainState& chain, const Dataset& data, const ModelConfig& cfg);
/// Throws InconsistentChain when a structural invariant fails or the drift exceeds tol.
void check_chain(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, double tol = 1e-8);

// --- building blocks -------------------------------------------------------

/// Breaks a new state off the remainder: a stick from Beta(1, gamma), a
/// matching break of every row's remainder, a fresh row from Dir(alpha beta)
/// and prior-only statistics.
void instantiate_state(ChainState& chain, const ModelConfig& cfg, Rng& rng);

/// Drops states with no timepoints; their sticks and columns go to the remainders.
void prune_empty_states(ChainState& chain);

/// beta via table counts, then pi rows given beta.
void resample_transitions(ChainState& chain, const Dataset& data, Rng& rng);

/// Slice variables for the beam sampler, u_t ~ U(0, pi_{z_{t-1} z_t}) or
/// U(0, beta_{z_t}) at block starts.
std::vector<double> draw_slices(const ChainState& chain, const Dataset& data, Rng& rng);

/// Slice, extend, forward-filter / backward-sample with covariances drawn from
/// their conditionals. pi and beta stay fixed; with prune=false empty states remain.
void sample_labels_beam(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                        bool prune = true, std::vector<double>* slices_out = nullptr);

struct GibbsOptions {
  bool allow_new_states = true;
  bool prune = true;
};
/// Single-site direct-assignment collapsed Gibbs pass over all timepoints.
/// pi is left stale; callers resample it.
void sample_labels_collapsed(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                             const GibbsOptions& opts = {});

/// Log conditional probabilities of z_t over existing states (and a new
/// state when allowed, last entry), normalized. Does not modify the chain.
std::vector<double> site_conditional(const ChainState& chain, const Dataset& data, const ModelConfig& cfg,
                                     std::size_t t, bool allow_new = true);

// --- sweep operations ------------------------------------------------------

/// Beam sweep: sample_labels_beam, prune, resample beta and pi.
void beam_sweep(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng);
/// Collapsed Gibbs sweep: sample_labels_collapsed, resample beta and pi.
void collapsed_gibbs_sweep(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng);

struct SplitMergeTrace {
  bool split = false;
  std::size_t anchor_i = 0;
  std::size_t anchor_j = 0;
  double log_accept = 0.0;
};

SplitMergeOutcome split_merge_move(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                                   int n_restricted_sweeps, SplitMergeTrace* trace = nullptr);

/// Log acceptance of splitting the state holding anchors i and j (which
/// must share it) into side 0 (keeps the label, contains i) and side 1
/// (contains j). `launch` and `target` give a side per member of the state,
/// in time order; nu is beta_side0 / beta_state.
double split_log_acceptance(const ChainState& chain, const Dataset& data, const ModelConfig& cfg,
                            std::size_t i, std::size_t j, const std::vector<int>& launch,
                            const std::vector<int>& target, double nu);
/// Log acceptance of merging the state of j into the state of i. `launch`
/// gives a side per member of the union, in time order.
double merge_log_acceptance(const ChainState& chain, const Dataset& data, const ModelConfig& cfg,
                            std::size_t i, std::size_t j, const std::vector<int>& launch);

bool mh_update_eta(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng);
/// Returns the fraction of accepted per-timepoint proposals.
double mh_update_sigma(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng);
/// alpha and gamma by auxiliary-variable Gibbs, followed by beta and pi given the new values.
void resample_concentrations(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng);

/// One full transition: label update(s), split-merge, eta, sigma, concentrations.
SweepDiagnostics full_sweep(ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng,
                            int sweep_index);

PosteriorSample snapshot(const ChainState& chain, const Dataset& data, const ModelConfig& cfg, Rng& rng);

struct ChainRun {
  std::vector<PosteriorSample> samples;
  std::vector<SweepDiagnostics> diagnostics;
  ChainState final_state;
};

/// Runs cfg.sweeps sweeps from cfg.seed, retaining every cfg.thin-th sweep after burn-in.
ChainRun run_chain(const ModelConfig& cfg, const Dataset& data);

/// The one-state model: z pinned to a single state; eta and sigma^2 still sampled.
ChainRun constant_model_fit(const ModelConfig& cfg, const Dataset& data);

/// Number of samples run_chain retains.
int retained_sample_count(const ModelConfig& cfg);

}  // namespace ihmm
