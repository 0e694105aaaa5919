#pragma once

// Files in and out: numeric matrices, dataset sidecars, run configuration,
// posterior samples and diagnostics. Numbers are always written with '.'
// as decimal separator and in shortest round-trip form.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ihmm/inference.hpp"

namespace ihmm {

inline constexpr const char* kVersion = "0.3.0";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Rows are timepoints, columns dimensions. Comma- or tab-separated; blank
/// lines and lines starting with '#' are skipped. Throws ParseError with the
/// row and column of the first bad cell (including non-finite values).
Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const Matrix& rows, const std::filesystem::path& path, char delim = ',');

/// Sidecar: {"blocks": [0, ...], "labels": {"name": [..], ...}}. Label values
/// may be strings or numbers; numbers are kept in their JSON text form.
Dataset load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& sidecar_path = {});
void save_dataset(const Dataset& data, const std::filesystem::path& data_path,
                  const std::filesystem::path& sidecar_path);

/// (1/T_h) sum x x^T; adds ridge * (trace / p) I when that fails to factor.
SpdMatrix estimate_sigma0(const Matrix& rows, double ridge);
SpdMatrix estimate_sigma0(const std::filesystem::path& heldout_path, double ridge);

// --- configuration ---------------------------------------------------------

using KeyValues = std::map<std::string, std::string>;

/// key = value lines; '#' starts a comment. Throws ParseError on malformed lines.
KeyValues parse_key_values(const std::string& text, const std::string& source = "config");
/// Applies recognized keys; unknown keys or bad values throw ParseError.
void apply_config(const KeyValues& kv, ModelConfig& cfg);
/// Every configurable key with its current value (Sigma0 excluded).
KeyValues config_to_key_values(const ModelConfig& cfg);
std::string format_key_values(const KeyValues& kv);

/// Builds a config for dimension p from a key = value file or a run's
/// metadata.json (which also restores Sigma0 and the seed).
ModelConfig load_config(const std::filesystem::path& path, int p);

// --- samples ---------------------------------------------------------------

nlohmann::json sample_to_json(const PosteriorSample& s);
PosteriorSample sample_from_json(const nlohmann::json& j);

/// One JSON record per line.
void write_samples(const std::vector<PosteriorSample>& samples, const std::filesystem::path& path);
std::vector<PosteriorSample> load_samples(const std::filesystem::path& path);

void write_diagnostics(const std::vector<SweepDiagnostics>& diag, const std::filesystem::path& path);

nlohmann::json run_metadata(const ModelConfig& cfg, const std::string& command);

/// Writes samples.jsonl, diagnostics.tsv, metadata.json and config.txt into
/// dir (created if needed) and returns the written paths.
std::vector<std::filesystem::path> persist_samples(const std::vector<PosteriorSample>& samples,
                                                   const std::vector<SweepDiagnostics>& diag,
                                                   const ModelConfig& cfg, const std::filesystem::path& dir,
                                                   const std::string& command = "fit");

/// One number per line (blank lines and '#' comments skipped).
std::vector<double> load_number_list(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ihmm
