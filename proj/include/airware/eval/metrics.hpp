#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "airware/error.hpp"
#include "airware/gesture.hpp"

namespace airware::eval {

/// counts[i][j]: samples of true class i predicted as class j. Classes are
/// indexed by position in `classes` (gesture codes, ascending).
struct ConfusionMatrix {
  std::vector<int> classes;
  std::vector<std::vector<long>> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<int> class_codes) : classes(std::move(class_codes)) {
    counts.assign(classes.size(), std::vector<long>(classes.size(), 0));
  }
  static ConfusionMatrix from_counts(std::vector<std::vector<long>> c) {
    ConfusionMatrix m;
    m.classes.resize(c.size());
    std::iota(m.classes.begin(), m.classes.end(), 0);
    m.counts = std::move(c);
    return m;
  }

  std::size_t size() const { return classes.size(); }
  void add(std::size_t truth, std::size_t predicted, long n = 1) { counts.at(truth).at(predicted) += n; }
  long row_sum(std::size_t i) const { return std::accumulate(counts[i].begin(), counts[i].end(), 0L); }
  long total() const {
    long t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += row_sum(i);
    return t;
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    require(o.classes == classes, ErrorCode::ShapeMismatch, "confusion matrices cover different classes");
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j) counts[i][j] += o.counts[i][j];
    return *this;
  }
};

struct TprResult {
  std::vector<std::optional<double>> rates;  // empty for classes absent from the test data
  double macro = 0.0;
  std::size_t included = 0;
  std::vector<std::string> warnings;
};

/// rate_i = cm[i][i] / rowsum_i; the macro average skips absent classes.
inline TprResult per_class_tpr(const ConfusionMatrix& cm) {
  require(cm.total() > 0, ErrorCode::EmptyMatrix, "confusion matrix has no samples");
  TprResult r;
  r.rates.resize(cm.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    const long n = cm.row_sum(i);
    if (n == 0) {
      const int c = cm.classes[i];
      const std::string name = c >= 0 && c < static_cast<int>(kGestureCount) ? std::string(kGestureNames[static_cast<std::size_t>(c)])
                                                           : std::to_string(c);
      r.warnings.push_back("class " + name + " absent from test data; excluded from macro average");
      continue;
    }
    r.rates[i] = static_cast<double>(cm.counts[i][i]) / static_cast<double>(n);
    sum += *r.rates[i];
    ++r.included;
  }
  r.macro = sum / static_cast<double>(r.included);
  return r;
}

struct MeanSe {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error (sample sd / sqrt(n)); se is 0 for n < 2.
inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  return out;
}

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

/// Welch's unequal-variance two-sample t-test.
inline TTest welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorCode::InsufficientSamples, "t-test needs >= 2 values per group");
  auto moments = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  TTest r;
  if (se2 <= 0.0) {
    // Both groups constant: the test degenerates to an exact comparison.
    r.t = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
    r.df = na + nb - 2.0;
    r.p_two_sided = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

/// Ranks with ties sharing their average rank (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

/// Spearman rank correlation (Pearson correlation of average ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument, "spearman needs paired samples, n >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace airware::eval
