#include "ihmm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace ihmm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

template <class Int>
bool parse_int(const std::string& s, Int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_rows(const json& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Matrix out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m) throw ParseError("ragged matrix in JSON");
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = rows[i][j].get<double>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix load_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const char delim = body.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<double> row;
    std::size_t start = 0;
    for (std::size_t col = 1;; ++col) {
      const std::size_t end = body.find(delim, start);
      const std::string cell = trim(std::string_view(body).substr(start, end - start));
      double v;
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(lineno) + ", column " + std::to_string(col) +
                         ": '" + cell + "' is not a finite number");
      }
      row.push_back(v);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string() + ": row " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                       " columns, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyData(path.string() + " contains no rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void save_matrix(const Matrix& rows, const fs::path& path, char delim) {
  std::string out;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out += delim;
      out += format_double(rows(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

Dataset load_dataset(const fs::path& data_path, const fs::path& sidecar_path) {
  Dataset d;
  d.points = load_matrix(data_path).transpose();
  if (!sidecar_path.empty()) {
    json side;
    try {
      side = json::parse(read_text(sidecar_path));
    } catch (const json::parse_error& e) {
      throw ParseError(sidecar_path.string() + ": " + e.what());
    }
    try {
      if (side.contains("blocks")) d.block_starts = side.at("blocks").get<std::vector<std::size_t>>();
      if (side.contains("labels")) {
        for (const auto& [name, values] : side.at("labels").items()) {
          std::vector<std::string> track;
          for (const auto& v : values) track.push_back(v.is_string() ? v.get<std::string>() : v.dump());
          d.labels[name] = std::move(track);
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(sidecar_path.string() + ": " + e.what());
    }
  }
  d.normalize();
  return d;
}

void save_dataset(const Dataset& data, const fs::path& data_path, const fs::path& sidecar_path) {
  save_matrix(data.points.transpose(), data_path);
  json side;
  side["blocks"] = data.block_starts;
  side["labels"] = json::object();
  for (const auto& [name, values] : data.labels) side["labels"][name] = values;
  write_text(sidecar_path, side.dump(1) + "\n");
}

SpdMatrix estimate_sigma0(const Matrix& rows, double ridge) {
  if (rows.rows() < 1 || rows.cols() < 1) throw EmptyData("held-aside data is empty");
  const Matrix s = rows.transpose() * rows / static_cast<double>(rows.rows());
  SpdMatrix out(s);
  try {
    (void)cholesky(out);
    return out;
  } catch (const NotPositiveDefinite&) {
  }
  const int p = static_cast<int>(s.rows());
  double scale = s.trace() / p;
  if (!(scale > 0.0)) scale = 1.0;
  out = SpdMatrix(s + ridge * scale * Matrix::Identity(p, p));
  (void)cholesky(out);
  return out;
}

SpdMatrix estimate_sigma0(const fs::path& heldout_path, double ridge) {
  return estimate_sigma0(load_matrix(heldout_path), ridge);
}

// ---------------------------------------------------------------------------

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ": line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ParseError(source + ": line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

namespace {

struct KeyCodec {
  std::function<void(ModelConfig&, const std::string&)> set;
  std::function<std::string(const ModelConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ParseError("config key '" + key + "': invalid value '" + value + "'");
}

KeyCodec real_key(const std::string& key, double ModelConfig::*field) {
  return {[key, field](ModelConfig& c, const std::string& v) {
            if (!parse_double(v, c.*field)) bad_value(key, v);
          },
          [field](const ModelConfig& c) { return format_double(c.*field); }};
}

KeyCodec int_key(const std::string& key, int ModelConfig::*field) {
  return {[key, field](ModelConfig& c, const std::string& v) {
            if (!parse_int(v, c.*field)) bad_value(key, v);
          },
          [field](const ModelConfig& c) { return std::to_string(c.*field); }};
}

KeyCodec bool_key(const std::string& key, bool ModelConfig::*field) {
  return {[key, field](ModelConfig& c, const std::string& v) {
            if (v == "true" || v == "1") {
              c.*field = true;
            } else if (v == "false" || v == "0") {
              c.*field = false;
            } else {
              bad_value(key, v);
            }
          },
          [field](const ModelConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

KeyCodec optional_key(const std::string& key, std::optional<double> ModelConfig::*field) {
  return {[key, field](ModelConfig& c, const std::string& v) {
            if (v == "prior") {
              (c.*field).reset();
              return;
            }
            double x;
            if (!parse_double(v, x)) bad_value(key, v);
            c.*field = x;
          },
          [field](const ModelConfig& c) { return (c.*field) ? format_double(*(c.*field)) : std::string("prior"); }};
}

KeyCodec gamma_key(const std::string& key, GammaPrior ModelConfig::*prior, double GammaPrior::*field) {
  return {[key, prior, field](ModelConfig& c, const std::string& v) {
            if (!parse_double(v, (c.*prior).*field)) bad_value(key, v);
          },
          [prior, field](const ModelConfig& c) { return format_double((c.*prior).*field); }};
}

KeyCodec scale_kind_key(const std::string& key, ScalePrior ModelConfig::*prior) {
  return {[key, prior](ModelConfig& c, const std::string& v) {
            if (v == "jeffreys") {
              (c.*prior).kind = ScalePrior::Kind::jeffreys;
            } else if (v == "lognormal") {
              (c.*prior).kind = ScalePrior::Kind::lognormal;
            } else {
              bad_value(key, v);
            }
          },
          [prior](const ModelConfig& c) {
            return std::string((c.*prior).kind == ScalePrior::Kind::jeffreys ? "jeffreys" : "lognormal");
          }};
}

KeyCodec scale_param_key(const std::string& key, ScalePrior ModelConfig::*prior, double ScalePrior::*field) {
  return {[key, prior, field](ModelConfig& c, const std::string& v) {
            if (!parse_double(v, (c.*prior).*field)) bad_value(key, v);
          },
          [prior, field](const ModelConfig& c) { return format_double((c.*prior).*field); }};
}

const std::map<std::string, KeyCodec>& codecs() {
  static const std::map<std::string, KeyCodec> table = [] {
    std::map<std::string, KeyCodec> t;
    t["v0"] = real_key("v0", &ModelConfig::v0);
    t["eta_init"] = real_key("eta_init", &ModelConfig::eta_init);
    t["alpha_shape"] = gamma_key("alpha_shape", &ModelConfig::alpha_prior, &GammaPrior::shape);
    t["alpha_rate"] = gamma_key("alpha_rate", &ModelConfig::alpha_prior, &GammaPrior::rate);
    t["gamma_shape"] = gamma_key("gamma_shape", &ModelConfig::gamma_prior, &GammaPrior::shape);
    t["gamma_rate"] = gamma_key("gamma_rate", &ModelConfig::gamma_prior, &GammaPrior::rate);
    t["alpha_init"] = optional_key("alpha_init", &ModelConfig::alpha_init);
    t["gamma_init"] = optional_key("gamma_init", &ModelConfig::gamma_init);
    t["eta_prior"] = scale_kind_key("eta_prior", &ModelConfig::eta_prior);
    t["eta_prior_mu"] = scale_param_key("eta_prior_mu", &ModelConfig::eta_prior, &ScalePrior::mu);
    t["eta_prior_sd"] = scale_param_key("eta_prior_sd", &ModelConfig::eta_prior, &ScalePrior::sd);
    t["sigma_prior"] = scale_kind_key("sigma_prior", &ModelConfig::sigma_prior);
    t["sigma_prior_mu"] = scale_param_key("sigma_prior_mu", &ModelConfig::sigma_prior, &ScalePrior::mu);
    t["sigma_prior_sd"] = scale_param_key("sigma_prior_sd", &ModelConfig::sigma_prior, &ScalePrior::sd);
    t["mh_step"] = real_key("mh_step", &ModelConfig::mh_step);
    t["sigma_mh_step"] = real_key("sigma_mh_step", &ModelConfig::sigma_mh_step);
    t["sweeps"] = int_key("sweeps", &ModelConfig::sweeps);
    t["burn_in"] = int_key("burn_in", &ModelConfig::burn_in);
    t["thin"] = int_key("thin", &ModelConfig::thin);
    t["seed"] = {[](ModelConfig& c, const std::string& v) {
                   if (!parse_int(v, c.seed)) bad_value("seed", v);
                 },
                 [](const ModelConfig& c) { return std::to_string(c.seed); }};
    t["split_merge_sweeps"] = int_key("split_merge_sweeps", &ModelConfig::split_merge_sweeps);
    t["truncation"] = int_key("truncation", &ModelConfig::truncation);
    t["sigma0_ridge"] = real_key("sigma0_ridge", &ModelConfig::sigma0_ridge);
    t["recompute_interval"] = int_key("recompute_interval", &ModelConfig::recompute_interval);
    t["init_chunk"] = int_key("init_chunk", &ModelConfig::init_chunk);
    t["max_states"] = int_key("max_states", &ModelConfig::max_states);
    t["label_update"] = {[](ModelConfig& c, const std::string& v) {
                           if (v == "hybrid") {
                             c.label_update = LabelUpdate::hybrid;
                           } else if (v == "beam") {
                             c.label_update = LabelUpdate::beam;
                           } else if (v == "gibbs") {
                             c.label_update = LabelUpdate::gibbs;
                           } else {
                             bad_value("label_update", v);
                           }
                         },
                         [](const ModelConfig& c) {
                           switch (c.label_update) {
                             case LabelUpdate::beam: return std::string("beam");
                             case LabelUpdate::gibbs: return std::string("gibbs");
                             default: return std::string("hybrid");
                           }
                         }};
    t["split_merge"] = bool_key("split_merge", &ModelConfig::split_merge);
    t["sample_eta"] = bool_key("sample_eta", &ModelConfig::sample_eta);
    t["sample_sigma"] = bool_key("sample_sigma", &ModelConfig::sample_sigma);
    t["sample_concentrations"] = bool_key("sample_concentrations", &ModelConfig::sample_concentrations);
    return t;
  }();
  return table;
}

}  // namespace

void apply_config(const KeyValues& kv, ModelConfig& cfg) {
  for (const auto& [key, value] : kv) {
    if (key == "explicit_emission") {
      if (value == "true" || value == "1") {
        cfg.label_update = LabelUpdate::beam;
      } else if (value != "false" && value != "0") {
        bad_value(key, value);
      }
      continue;
    }
    const auto it = codecs().find(key);
    if (it == codecs().end()) throw ParseError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
  }
}

KeyValues config_to_key_values(const ModelConfig& cfg) {
  KeyValues kv;
  for (const auto& [key, codec] : codecs()) kv[key] = codec.get(cfg);
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

ModelConfig load_config(const fs::path& path, int p) {
  ModelConfig cfg = ModelConfig::defaults(p);
  const std::string text = read_text(path);
  const std::string head = trim(text);
  if (!head.empty() && head[0] == '{') {
    json meta;
    try {
      meta = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    KeyValues kv;
    for (const auto& [k, v] : meta.at("config").items()) kv[k] = v.get<std::string>();
    apply_config(kv, cfg);
    if (meta.contains("sigma0")) {
      const Matrix s = matrix_from_rows(meta.at("sigma0"));
      if (s.rows() != p) throw DimensionMismatch("metadata Sigma0 has the wrong dimension");
      cfg.set_sigma0(SpdMatrix(s));
    }
  } else {
    apply_config(parse_key_values(text, path.string()), cfg);
  }
  return cfg;
}

// ---------------------------------------------------------------------------

json sample_to_json(const PosteriorSample& s) {
  json j;
  j["sweep"] = s.sweep;
  j["z"] = s.z;
  json covs = json::array();
  for (const auto& c : s.covariances) {
    const Matrix& m = c.matrix();
    covs.push_back(std::vector<double>(m.data(), m.data() + m.size()));  // symmetric, so row-major == col-major
  }
  j["covariances"] = std::move(covs);
  j["pi"] = matrix_rows(s.pi);
  j["beta"] = s.beta;
  j["eta"] = s.eta;
  j["alpha"] = s.alpha;
  j["gamma"] = s.gamma;
  j["log_joint"] = s.log_joint;
  j["sigma0"] = matrix_rows(s.sigma0.matrix());
  return j;
}

PosteriorSample sample_from_json(const json& j) {
  PosteriorSample s;
  try {
    s.sweep = j.value("sweep", 0);
    s.z = j.at("z").get<std::vector<int>>();
    const Matrix sigma0 = matrix_from_rows(j.at("sigma0"));
    s.sigma0 = SpdMatrix(sigma0);
    const auto p = sigma0.rows();
    for (const auto& c : j.at("covariances")) {
      const auto v = c.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(v.size()) != p * p) throw ParseError("covariance has the wrong size");
      s.covariances.emplace_back(Eigen::Map<const Matrix>(v.data(), p, p));
    }
    s.pi = matrix_from_rows(j.at("pi"));
    s.beta = j.at("beta").get<std::vector<double>>();
    s.eta = j.at("eta").get<double>();
    s.alpha = j.at("alpha").get<double>();
    s.gamma = j.at("gamma").get<double>();
    s.log_joint = j.at("log_joint").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed sample record: ") + e.what());
  }
  return s;
}

void write_samples(const std::vector<PosteriorSample>& samples, const fs::path& path) {
  std::string out;
  for (const auto& s : samples) out += sample_to_json(s).dump() + "\n";
  write_text(path, out);
}

std::vector<PosteriorSample> load_samples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PosteriorSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_diagnostics(const std::vector<SweepDiagnostics>& diag, const fs::path& path) {
  std::string out =
      "sweep\tlog_joint\tnum_states\tsplit_merge\teta_accept\tsigma_accept_rate\teta\talpha\tgamma\tscale_product\n";
  for (const auto& d : diag) {
    out += std::to_string(d.sweep_index) + '\t' + format_double(d.log_joint) + '\t' + std::to_string(d.num_states) +
           '\t' + to_string(d.split_merge_outcome) + '\t' + (d.eta_accept ? "1" : "0") + '\t' +
           format_double(d.sigma_accept_rate) + '\t' + format_double(d.eta) + '\t' + format_double(d.alpha) + '\t' +
           format_double(d.gamma) + '\t' + format_double(d.scale_product) + '\n';
  }
  write_text(path, out);
}

json run_metadata(const ModelConfig& cfg, const std::string& command) {
  json meta;
  meta["command"] = command;
  meta["seed"] = cfg.seed;
  meta["rng"] = kRngName;
  meta["version"] = kVersion;
  meta["config"] = config_to_key_values(cfg);
  meta["sigma0"] = matrix_rows(cfg.sigma0.matrix());
  return meta;
}

std::vector<fs::path> persist_samples(const std::vector<PosteriorSample>& samples,
                                      const std::vector<SweepDiagnostics>& diag, const ModelConfig& cfg,
                                      const fs::path& dir, const std::string& command) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written{dir / "samples.jsonl", dir / "diagnostics.tsv", dir / "metadata.json",
                                dir / "config.txt"};
  write_samples(samples, written[0]);
  write_diagnostics(diag, written[1]);
  write_text(written[2], run_metadata(cfg, command).dump(1) + "\n");
  write_text(written[3], format_key_values(config_to_key_values(cfg)));
  return written;
}

std::vector<double> load_number_list(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    double v;
    if (!parse_double(body, v) || !std::isfinite(v)) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": '" + body + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace ihmm
