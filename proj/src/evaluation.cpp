#include "ihmm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

namespace ihmm {

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw LengthMismatch("paired t-test needs equal-length score lists");
  const std::size_t n = a.size();
  if (n < 2) throw DegenerateInput("paired t-test needs at least two pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));

  TTestResult r;
  r.dof = static_cast<int>(n) - 1;
  r.mean_diff = mean;
  if (sd == 0.0) {
    if (mean == 0.0) return r;
    r.zero_variance = true;
    r.t_stat = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p_value = 0.0;
    return r;
  }
  r.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(r.dof);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat))));
  return r;
}

std::vector<int> encode_categories(const std::vector<std::string>& values) {
  std::map<std::string, int> codes;
  std::vector<int> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    auto [it, fresh] = codes.emplace(v, static_cast<int>(codes.size()));
    out.push_back(it->second);
  }
  return out;
}

namespace {

std::vector<int> compact(std::span<const int> a, int& categories) {
  std::map<int, int> codes;
  std::vector<int> out;
  out.reserve(a.size());
  for (int v : a) out.push_back(codes.emplace(v, static_cast<int>(codes.size())).first->second);
  categories = static_cast<int>(codes.size());
  return out;
}

struct Contingency {
  std::vector<long> rows, cols;
  std::vector<std::vector<long>> joint;
  long total = 0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw LengthMismatch("sequences differ in length");
  if (a.empty()) throw DegenerateInput("sequences are empty");
  int ra = 0, cb = 0;
  const auto ca = compact(a, ra);
  const auto cbv = compact(b, cb);
  Contingency c;
  c.rows.assign(ra, 0);
  c.cols.assign(cb, 0);
  c.joint.assign(ra, std::vector<long>(cb, 0));
  for (std::size_t t = 0; t < ca.size(); ++t) {
    ++c.rows[ca[t]];
    ++c.cols[cbv[t]];
    ++c.joint[ca[t]][cbv[t]];
  }
  c.total = static_cast<long>(a.size());
  return c;
}

double entropy_of(const std::vector<long>& counts, long total) {
  double h = 0.0;
  for (long c : counts) {
    if (c > 0) {
      const double q = static_cast<double>(c) / total;
      h -= q * std::log(q);
    }
  }
  return h;
}

double mi_of(const Contingency& c) {
  const double n = static_cast<double>(c.total);
  double mi = 0.0;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    for (std::size_t j = 0; j < c.cols.size(); ++j) {
      const long nij = c.joint[i][j];
      if (nij == 0) continue;
      mi += (nij / n) * std::log(n * nij / (static_cast<double>(c.rows[i]) * c.cols[j]));
    }
  }
  return std::max(0.0, mi);
}

}  // namespace

double entropy(std::span<const int> a) {
  if (a.empty()) throw DegenerateInput("sequence is empty");
  int k = 0;
  const auto codes = compact(a, k);
  std::vector<long> counts(k, 0);
  for (int v : codes) ++counts[v];
  return entropy_of(counts, static_cast<long>(a.size()));
}

double mutual_information(std::span<const int> a, std::span<const int> b) { return mi_of(contingency(a, b)); }

double mutual_information(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto ca = encode_categories(a);
  const auto cb = encode_categories(b);
  return mutual_information(ca, cb);
}

double expected_mutual_information(std::span<const int> a, std::span<const int> b) {
  const Contingency c = contingency(a, b);
  const long n = c.total;
  const double nd = static_cast<double>(n);
  const double lgn = std::lgamma(nd + 1.0);
  double emi = 0.0;
  for (long ai : c.rows) {
    for (long bj : c.cols) {
      const double fixed = std::lgamma(ai + 1.0) + std::lgamma(bj + 1.0) + std::lgamma(nd - ai + 1.0) +
                           std::lgamma(nd - bj + 1.0) - lgn;
      for (long nij = std::max(1L, ai + bj - n); nij <= std::min(ai, bj); ++nij) {
        const double lp = fixed - std::lgamma(nij + 1.0) - std::lgamma(ai - nij + 1.0) -
                          std::lgamma(bj - nij + 1.0) - std::lgamma(nd - ai - bj + nij + 1.0);
        emi += (nij / nd) * std::log(nd * nij / (static_cast<double>(ai) * bj)) * std::exp(lp);
      }
    }
  }
  return emi;
}

double adjusted_mutual_information(std::span<const int> a, std::span<const int> b) {
  const Contingency c = contingency(a, b);
  if (c.rows.size() == 1 && c.cols.size() == 1) return 1.0;
  const double mi = mi_of(c);
  const double emi = expected_mutual_information(a, b);
  const double mean_h = 0.5 * (entropy_of(c.rows, c.total) + entropy_of(c.cols, c.total));
  const double denom = mean_h - emi;
  if (std::abs(denom) < 1e-15) return 0.0;
  return (mi - emi) / denom;
}

double average_mi_over_samples(const std::vector<PosteriorSample>& samples, const LabelTrack& track) {
  if (samples.empty()) throw EmptySamples();
  const auto codes = encode_categories(track.values);
  double sum = 0.0;
  for (const auto& s : samples) {
    if (s.z.size() != codes.size()) {
      throw LabelLengthMismatch("label track '" + track.name + "' has " + std::to_string(codes.size()) +
                                " entries but the sample has " + std::to_string(s.z.size()));
    }
    sum += mutual_information(s.z, codes);
  }
  return sum / samples.size();
}

PopulationTable state_population_table(const std::vector<PosteriorSample>& samples, const LabelTrack& track) {
  if (samples.empty()) throw EmptySamples();
  PopulationTable out;
  const std::set<std::string> uniq(track.values.begin(), track.values.end());
  out.label_values.assign(uniq.begin(), uniq.end());
  std::map<std::string, int> col;
  for (std::size_t l = 0; l < out.label_values.size(); ++l) col[out.label_values[l]] = static_cast<int>(l);

  int kmax = 0;
  for (const auto& s : samples) {
    if (s.z.size() != track.values.size()) {
      throw LabelLengthMismatch("label track '" + track.name + "' does not match the sample length");
    }
    for (int v : s.z) kmax = std::max(kmax, v + 1);
  }
  const std::size_t nl = out.label_values.size();
  std::vector<std::vector<long>> counts(kmax, std::vector<long>(nl, 0));
  std::vector<long> label_total(nl, 0);
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.z.size(); ++t) {
      const int l = col[track.values[t]];
      ++counts[s.z[t]][l];
      ++label_total[l];
    }
  }
  std::vector<std::vector<double>> freq(kmax, std::vector<double>(nl, 0.0));
  std::vector<double> spread(kmax, 0.0);
  for (int k = 0; k < kmax; ++k) {
    for (std::size_t l = 0; l < nl; ++l) {
      freq[k][l] = label_total[l] ? static_cast<double>(counts[k][l]) / label_total[l] : 0.0;
    }
    const auto [lo, hi] = std::minmax_element(freq[k].begin(), freq[k].end());
    spread[k] = nl ? *hi - *lo : 0.0;
  }
  out.states.resize(kmax);
  std::iota(out.states.begin(), out.states.end(), 0);
  std::stable_sort(out.states.begin(), out.states.end(), [&](int x, int y) { return spread[x] > spread[y]; });
  for (int k : out.states) {
    out.frequency.push_back(freq[k]);
    out.counts.push_back(counts[k]);
  }
  return out;
}

}  // namespace ihmm
