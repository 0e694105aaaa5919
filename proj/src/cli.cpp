#include "ihmm/cli.hpp"

#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ihmm/evaluation.hpp"
#include "ihmm/io.hpp"
#include "ihmm/prediction.hpp"

namespace ihmm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config, data, sidecar, heldout, out, samples, a, b, track;
  int chains = 1;
  std::optional<std::uint64_t> seed;
  bool constant = false;
  bool explicit_emission = false;
  bool forward = false;
  std::size_t length = 200;
  int dim = 2;
  std::vector<std::size_t> blocks;
  double alpha = 0.05;
};

/// Writes to --out when given, otherwise to the console stream.
void emit(const Options& o, std::ostream& console, const std::string& text) {
  if (o.out.empty()) {
    console << text;
  } else {
    write_text(o.out, text);
  }
}

ModelConfig build_config(const Options& o, int p) {
  ModelConfig cfg = o.config.empty() ? ModelConfig::defaults(p) : load_config(o.config, p);
  if (!o.heldout.empty()) cfg.set_sigma0(estimate_sigma0(fs::path(o.heldout), cfg.sigma0_ridge));
  if (cfg.dim() != p) throw DimensionMismatch("configured Sigma0 does not match the data dimension");
  if (o.explicit_emission) cfg.label_update = LabelUpdate::beam;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

/// A samples file, or a directory holding samples.jsonl (possibly per chain).
std::vector<PosteriorSample> collect_samples(const std::string& where) {
  const fs::path path(where);
  if (!fs::is_directory(path)) return load_samples(path);
  if (fs::exists(path / "samples.jsonl")) return load_samples(path / "samples.jsonl");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_directory() && fs::exists(e.path() / "samples.jsonl")) files.push_back(e.path() / "samples.jsonl");
  }
  std::sort(files.begin(), files.end());
  std::vector<PosteriorSample> all;
  for (const auto& f : files) {
    auto part = load_samples(f);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (all.empty()) throw EmptySamples();
  return all;
}

int run_generate(const Options& o, std::ostream& console) {
  ModelConfig cfg = o.config.empty() ? ModelConfig::defaults(o.dim) : load_config(o.config, o.dim);
  if (o.seed) cfg.seed = *o.seed;
  Rng rng(cfg.seed);
  GenerateOptions gen;
  if (!o.blocks.empty()) gen.block_starts = o.blocks;
  SyntheticTruth truth = generate_synthetic(cfg, o.length, rng, gen);
  std::vector<std::string> track;
  for (int z : truth.true_z) track.push_back(std::to_string(z));
  truth.dataset.labels["true_state"] = track;

  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_dataset(truth.dataset, dir / "data.csv", dir / "sidecar.json");
  json t;
  t["true_z"] = truth.true_z;
  t["true_sigma_sq"] = truth.true_sigma_sq;
  t["true_beta"] = truth.true_beta;
  json covs = json::array();
  for (const auto& c : truth.true_covs) {
    const Matrix& m = c.matrix();
    covs.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  }
  t["true_covs"] = covs;
  json pi = json::array();
  for (Eigen::Index i = 0; i < truth.true_pi.rows(); ++i) {
    pi.push_back(std::vector<double>(truth.true_pi.row(i).begin(), truth.true_pi.row(i).end()));
  }
  t["true_pi"] = pi;
  t["metadata"] = run_metadata(cfg, "generate");
  write_text(dir / "truth.json", t.dump(1) + "\n");
  console << "wrote " << (dir / "data.csv").string() << ", " << (dir / "sidecar.json").string() << ", "
          << (dir / "truth.json").string() << "\n";
  return 0;
}

int run_fit(const Options& o, bool constant, std::ostream& console) {
  const Dataset data = load_dataset(o.data, o.sidecar);
  const ModelConfig base = build_config(o, data.dim());
  if (o.chains < 1) throw UsageError("--chains must be >= 1");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::string command = constant ? "fit-constant" : "fit";

  std::vector<std::vector<fs::path>> written(o.chains);
  std::vector<std::exception_ptr> failures(o.chains);
  std::vector<std::thread> workers;
  for (int i = 0; i < o.chains; ++i) {
    workers.emplace_back([&, i] {
      try {
        ModelConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(i);
        const ChainRun run = constant ? constant_model_fit(cfg, data) : run_chain(cfg, data);
        written[i] = persist_samples(run.samples, run.diagnostics, cfg, dir / ("chain_" + std::to_string(i)), command);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  json manifest;
  manifest["command"] = command;
  manifest["config_path"] = o.config;
  manifest["data_path"] = o.data;
  manifest["output_dir"] = o.out;
  manifest["chain_count"] = o.chains;
  manifest["seed_base"] = base.seed;
  manifest["rng"] = kRngName;
  manifest["version"] = kVersion;
  json chains = json::array();
  for (int i = 0; i < o.chains; ++i) {
    json c;
    c["seed"] = base.seed + static_cast<std::uint64_t>(i);
    std::vector<std::string> files;
    for (const auto& p : written[i]) files.push_back(p.string());
    c["files"] = files;
    chains.push_back(c);
  }
  manifest["chains"] = chains;
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  console << "fitted " << o.chains << " chain(s) into " << dir.string() << "\n";
  return 0;
}

int run_predict(const Options& o, std::ostream& console) {
  const auto samples = collect_samples(o.samples);
  const Dataset test = load_dataset(o.data, o.sidecar);
  const ScoreMode mode = o.forward ? ScoreMode::forward : ScoreMode::viterbi;
  std::ostringstream table;
  table << "sample\tt\tstate\tlogscore\n";
  std::vector<double> totals;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const PredictiveResult r = predictive_result(samples[s], test, mode, static_cast<int>(s));
    for (std::size_t t = 0; t < r.path.size(); ++t) {
      table << s << '\t' << t << '\t' << r.path[t] << '\t' << format_double(r.per_t_logscore[t]) << '\n';
    }
    totals.push_back(r.total_logscore);
  }
  for (std::size_t s = 0; s < totals.size(); ++s) table << s << "\ttotal\t\t" << format_double(totals[s]) << '\n';
  const double score = log_mean_exp(totals);
  if (!o.out.empty()) write_text(o.out, table.str());
  console << "score\t" << format_double(score) << "\n";
  return 0;
}

int run_evaluate(const Options& o, std::ostream& console) {
  const auto a = load_number_list(o.a);
  const auto b = load_number_list(o.b);
  const TTestResult r = paired_t_test(a, b);
  std::ostringstream s;
  s << "t_stat\t" << format_double(r.t_stat) << "\n"
    << "dof\t" << r.dof << "\n"
    << "p_value\t" << format_double(r.p_value) << "\n"
    << "mean_diff\t" << format_double(r.mean_diff) << "\n"
    << "zero_variance\t" << (r.zero_variance ? "true" : "false") << "\n"
    << "alpha\t" << format_double(o.alpha) << "\n"
    << "reject\t" << (r.p_value < o.alpha ? "true" : "false") << "\n";
  emit(o, console, s.str());
  return 0;
}

Dataset labels_only(const Options& o) {
  if (o.sidecar.empty()) throw UsageError("--sidecar with label tracks is required");
  json side = json::parse(read_text(o.sidecar));
  Dataset d;
  for (const auto& [name, values] : side.at("labels").items()) {
    std::vector<std::string> track;
    for (const auto& v : values) track.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    d.labels[name] = std::move(track);
  }
  return d;
}

int run_mi(const Options& o, std::ostream& console) {
  const auto samples = collect_samples(o.samples);
  const Dataset d = labels_only(o);
  std::ostringstream s;
  s << "track\taverage_mi\n";
  for (const auto& [name, values] : d.labels) {
    if (!o.track.empty() && name != o.track) continue;
    s << name << '\t' << format_double(average_mi_over_samples(samples, LabelTrack{name, values})) << '\n';
  }
  emit(o, console, s.str());
  return 0;
}

int run_summarize(const Options& o, std::ostream& console) {
  const auto samples = collect_samples(o.samples);
  const Dataset d = labels_only(o);
  const auto it = d.labels.find(o.track);
  if (it == d.labels.end()) throw UsageError("no label track named '" + o.track + "'");
  const PopulationTable table = state_population_table(samples, LabelTrack{it->first, it->second});
  std::ostringstream s;
  s << "state";
  for (const auto& l : table.label_values) s << "\tfreq_" << l;
  for (const auto& l : table.label_values) s << "\tcount_" << l;
  s << '\n';
  for (std::size_t r = 0; r < table.states.size(); ++r) {
    s << table.states[r];
    for (double f : table.frequency[r]) s << '\t' << format_double(f);
    for (long c : table.counts[r]) s << '\t' << c;
    s << '\n';
  }
  emit(o, console, s.str());
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"IHMM-Wishart: infinite HMM over covariance regimes"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "Sample synthetic data and its ground truth");
  gen->add_option("--config", o.config, "key = value config file");
  gen->add_option("--out", o.out, "output directory")->required();
  gen->add_option("--length", o.length, "number of timepoints");
  gen->add_option("--dim", o.dim, "observation dimension");
  gen->add_option("--seed", o.seed, "RNG seed");
  gen->add_option("--blocks", o.blocks, "block start indices");

  auto add_fit_options = [&](CLI::App* c) {
    c->add_option("--config", o.config, "key = value config file or a run's metadata.json");
    c->add_option("--data", o.data, "observations, one timepoint per row")->required();
    c->add_option("--sidecar", o.sidecar, "JSON with blocks and label tracks");
    c->add_option("--heldout", o.heldout, "held-aside rows used to estimate Sigma0");
    c->add_option("--out", o.out, "output directory")->required();
    c->add_option("--chains", o.chains, "independent chains (seeds seed, seed+1, ...)");
    c->add_option("--seed", o.seed, "seed of chain 0");
    c->add_flag("--explicit-emission", o.explicit_emission, "beam sampling with instantiated covariances only");
  };
  auto* fit = app.add_subcommand("fit", "Run MCMC chains");
  add_fit_options(fit);
  fit->add_flag("--constant", o.constant, "one-state model");
  auto* fitc = app.add_subcommand("fit-constant", "Run chains of the one-state model");
  add_fit_options(fitc);

  auto* pred = app.add_subcommand("predict", "Score held-out data under posterior samples");
  pred->add_option("--samples", o.samples, "samples.jsonl or a fit output directory")->required();
  pred->add_option("--data", o.data, "test observations")->required();
  pred->add_option("--sidecar", o.sidecar, "test blocks");
  pred->add_option("--out", o.out, "per-timepoint score table");
  pred->add_flag("--forward", o.forward, "sum over paths instead of the best path");

  auto* eval = app.add_subcommand("evaluate", "Paired t-test of two score lists");
  eval->add_option("--a", o.a, "scores of the first model, one per line")->required();
  eval->add_option("--b", o.b, "scores of the second model")->required();
  eval->add_option("--alpha", o.alpha, "significance level");
  eval->add_option("--out", o.out, "output file");

  auto* mi = app.add_subcommand("mi", "Average mutual information between state sequences and label tracks");
  mi->add_option("--samples", o.samples, "samples.jsonl or a fit output directory")->required();
  mi->add_option("--sidecar", o.sidecar, "label tracks")->required();
  mi->add_option("--track", o.track, "only this track");
  mi->add_option("--out", o.out, "output file");

  auto* sum = app.add_subcommand("summarize", "State population per label value");
  sum->add_option("--samples", o.samples, "samples.jsonl or a fit output directory")->required();
  sum->add_option("--sidecar", o.sidecar, "label tracks")->required();
  sum->add_option("--track", o.track, "label track")->required();
  sum->add_option("--out", o.out, "output file");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return run_generate(o, out);
    if (fit->parsed()) return run_fit(o, o.constant, out);
    if (fitc->parsed()) return run_fit(o, true, out);
    if (pred->parsed()) return run_predict(o, out);
    if (eval->parsed()) return run_evaluate(o, out);
    if (mi->parsed()) return run_mi(o, out);
    if (sum->parsed()) return run_summarize(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const DimensionMismatch& e) {
    err << "error: DimensionMismatch: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ihmm
