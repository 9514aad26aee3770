#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "airware/error.hpp"
#include "airware/nn/network.hpp"
#include "airware/random.hpp"

namespace airware::tune {

using nn::HyperParams;

/// Priors for each dimension; dimensions are independent.
struct SearchSpace {
  double l2_mean = 0.001, l2_sd = 0.0001;  // truncated at 0
  double dropout_lo = 0.0, dropout_hi = 0.99;
  std::vector<int> lr_exponents = {-6, -5, -4, -3, -2, -1, 0};
  std::vector<std::size_t> n_filters = {nn::kFilterChoices.begin(), nn::kFilterChoices.end()};
  std::vector<std::size_t> kernel_sizes = {nn::kKernelChoices.begin(), nn::kKernelChoices.end()};
  std::vector<std::size_t> hidden_units = {nn::kHiddenChoices.begin(), nn::kHiddenChoices.end()};
  std::vector<nn::Initializer> initializers = {nn::Initializer::HeNormal,     nn::Initializer::HeUniform,
                                               nn::Initializer::GlorotNormal, nn::Initializer::GlorotUniform,
                                               nn::Initializer::LecunNormal,  nn::Initializer::LecunUniform};
};

enum class TrialStatus { Ok, Failed };

struct Trial {
  int index = 0;
  HyperParams hp;
  double score = 0.0;
  TrialStatus status = TrialStatus::Ok;
  std::uint64_t seed = 0;
  std::string error;

  bool ok() const { return status == TrialStatus::Ok; }
};

struct TpeConfig {
  double gamma = 0.25;
  int n_startup = 10;
  int n_candidates = 24;
  double bandwidth_scale = 1.0;  // multiplies each kernel's neighbour-gap width
  double prior_weight = 1.0;     // weight of the prior kernel in each KDE
};

inline void validate(const TpeConfig& c) {
  require(c.gamma > 0.0 && c.gamma < 1.0, ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
  require(c.n_candidates >= 1, ErrorCode::InvalidArgument, "n_candidates must be >= 1");
  require(c.n_startup >= 0, ErrorCode::InvalidArgument, "n_startup must be >= 0");
}

inline double draw_l2(const SearchSpace& s, Rng& rng) {
  for (;;) {
    const double v = rng.normal(s.l2_mean, s.l2_sd);
    if (v >= 0.0) return v;
  }
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.index(v.size())];
}

inline HyperParams sample_space(const SearchSpace& s, Rng& rng) {
  HyperParams h;
  h.l2 = draw_l2(s, rng);
  h.lr_exponent = pick(s.lr_exponents, rng);
  h.n_filters = pick(s.n_filters, rng);
  h.kernel_size = pick(s.kernel_sizes, rng);
  h.dropout = rng.uniform(s.dropout_lo, s.dropout_hi);
  h.hidden_units = pick(s.hidden_units, rng);
  h.initializer = pick(s.initializers, rng);
  return h;
}

/// ceil(gamma n), at least 1.
inline std::size_t good_count(std::size_t n_ok, double gamma) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n_ok) - 1e-9)));
}

/// 1D Parzen estimator: Gaussian kernels at each observation plus one
/// prior-wide kernel, restricted to [lo, hi]. Each kernel's width is the
/// larger gap to its sorted neighbours (or to a finite bound), clipped to
/// [prior_sigma / min(100, n + 1), prior_sigma].
class Parzen {
 public:
  Parzen(std::vector<double> obs, double prior_mu, double prior_sigma, double lo, double hi, const TpeConfig& cfg)
      : obs_(std::move(obs)), bw_(obs_.size(), prior_sigma), prior_mu_(prior_mu), prior_sigma_(prior_sigma), lo_(lo),
        hi_(hi), prior_w_(cfg.prior_weight) {
    std::vector<std::size_t> order(obs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return obs_[a] < obs_[b]; });
    const double min_bw = prior_sigma / std::min(100.0, static_cast<double>(obs_.size()) + 1.0);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double x = obs_[order[k]];
      const double left = k > 0 ? x - obs_[order[k - 1]] : (std::isfinite(lo) ? x - lo : 0.0);
      const double right = k + 1 < order.size() ? obs_[order[k + 1]] - x : (std::isfinite(hi) ? hi - x : 0.0);
      bw_[order[k]] = std::clamp(cfg.bandwidth_scale * std::max(left, right), min_bw, prior_sigma);
    }
  }

  double pdf(double x) const {
    double p = prior_w_ * normal_pdf(x, prior_mu_, prior_sigma_);
    for (std::size_t i = 0; i < obs_.size(); ++i) p += normal_pdf(x, obs_[i], bw_[i]);
    return p / (prior_w_ + static_cast<double>(obs_.size()));
  }

  double sample(Rng& rng) const {
    const double total = prior_w_ + static_cast<double>(obs_.size());
    const double u = rng.uniform() * total;
    const bool prior = u < prior_w_ || obs_.empty();
    const std::size_t k = std::min(obs_.size() - 1, static_cast<std::size_t>(u - prior_w_));
    const double mu = prior ? prior_mu_ : obs_[k];
    const double sd = prior ? prior_sigma_ : bw_[k];
    for (int i = 0; i < 100; ++i) {
      const double x = rng.normal(mu, sd);
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(mu, lo_, hi_);
  }

 private:
  static double normal_pdf(double x, double mu, double sd) {
    const double z = (x - mu) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
  }

  std::vector<double> obs_, bw_;
  double prior_mu_, prior_sigma_, lo_, hi_, prior_w_;
};

/// Additively smoothed category frequencies.
class Categorical {
 public:
  Categorical(const std::vector<std::size_t>& obs, std::size_t k, double smoothing = 1.0) : p_(k, smoothing) {
    for (auto o : obs) p_.at(o) += 1.0;
    const double total = std::accumulate(p_.begin(), p_.end(), 0.0);
    for (auto& v : p_) v /= total;
  }
  double pmf(std::size_t i) const { return p_.at(i); }
  std::size_t sample(Rng& rng) const {
    double u = rng.uniform();
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (u < p_[i]) return i;
      u -= p_[i];
    }
    return p_.size() - 1;
  }

 private:
  std::vector<double> p_;
};

namespace detail {

template <typename T>
std::size_t index_of(const std::vector<T>& v, const T& x) {
  const auto it = std::find(v.begin(), v.end(), x);
  require(it != v.end(), ErrorCode::InvalidArgument, "hyper-parameter outside the search space");
  return static_cast<std::size_t>(it - v.begin());
}

struct Densities {
  Parzen l2, dropout;
  Categorical lr, filters, kernel, hidden, init;

  Densities(const std::vector<const Trial*>& ts, const SearchSpace& s, const TpeConfig& cfg)
      : l2(collect(ts, [](const HyperParams& h) { return h.l2; }), s.l2_mean, s.l2_sd, 0.0,
           std::numeric_limits<double>::infinity(), cfg),
        dropout(collect(ts, [](const HyperParams& h) { return h.dropout; }), 0.5 * (s.dropout_lo + s.dropout_hi),
                s.dropout_hi - s.dropout_lo, s.dropout_lo, s.dropout_hi, cfg),
        lr(indices(ts, s.lr_exponents, [](const HyperParams& h) { return h.lr_exponent; }), s.lr_exponents.size()),
        filters(indices(ts, s.n_filters, [](const HyperParams& h) { return h.n_filters; }), s.n_filters.size()),
        kernel(indices(ts, s.kernel_sizes, [](const HyperParams& h) { return h.kernel_size; }), s.kernel_sizes.size()),
        hidden(indices(ts, s.hidden_units, [](const HyperParams& h) { return h.hidden_units; }), s.hidden_units.size()),
        init(indices(ts, s.initializers, [](const HyperParams& h) { return h.initializer; }), s.initializers.size()) {}

  template <typename F>
  static std::vector<double> collect(const std::vector<const Trial*>& ts, F f) {
    std::vector<double> v;
    for (const auto* t : ts) v.push_back(f(t->hp));
    return v;
  }
  template <typename T, typename F>
  static std::vector<std::size_t> indices(const std::vector<const Trial*>& ts, const std::vector<T>& choices, F f) {
    std::vector<std::size_t> v;
    for (const auto* t : ts) v.push_back(index_of(choices, static_cast<T>(f(t->hp))));
    return v;
  }

  HyperParams sample(const SearchSpace& s, Rng& rng) const {
    HyperParams h;
    h.l2 = l2.sample(rng);
    h.dropout = dropout.sample(rng);
    h.lr_exponent = s.lr_exponents[lr.sample(rng)];
    h.n_filters = s.n_filters[filters.sample(rng)];
    h.kernel_size = s.kernel_sizes[kernel.sample(rng)];
    h.hidden_units = s.hidden_units[hidden.sample(rng)];
    h.initializer = s.initializers[init.sample(rng)];
    return h;
  }

  double log_density(const HyperParams& h, const SearchSpace& s) const {
    return std::log(l2.pdf(h.l2)) + std::log(dropout.pdf(h.dropout)) +
           std::log(lr.pmf(index_of(s.lr_exponents, h.lr_exponent))) +
           std::log(filters.pmf(index_of(s.n_filters, h.n_filters))) +
           std::log(kernel.pmf(index_of(s.kernel_sizes, h.kernel_size))) +
           std::log(hidden.pmf(index_of(s.hidden_units, h.hidden_units))) +
           std::log(init.pmf(index_of(s.initializers, h.initializer)));
  }
};

}  // namespace detail

/// Splits ok trials at the gamma quantile (higher score is better; ties keep
/// history order).
inline std::pair<std::vector<const Trial*>, std::vector<const Trial*>> split_good_bad(const std::vector<Trial>& history,
                                                                                     double gamma) {
  std::vector<const Trial*> ok;
  for (const auto& t : history)
    if (t.ok()) ok.push_back(&t);
  std::stable_sort(ok.begin(), ok.end(), [](const Trial* a, const Trial* b) { return a->score > b->score; });
  const auto n_good = ok.empty() ? 0 : good_count(ok.size(), gamma);
  return {{ok.begin(), ok.begin() + static_cast<long>(n_good)}, {ok.begin() + static_cast<long>(n_good), ok.end()}};
}

inline HyperParams tpe_suggest(const std::vector<Trial>& history, const SearchSpace& space, const TpeConfig& cfg,
                               Rng& rng) {
  validate(cfg);
  const auto n_ok = static_cast<int>(std::count_if(history.begin(), history.end(), [](const Trial& t) { return t.ok(); }));
  if (n_ok < std::max(cfg.n_startup, 2)) return sample_space(space, rng);
  const auto [good, bad] = split_good_bad(history, cfg.gamma);
  const detail::Densities l(good, space, cfg), g(bad, space, cfg);
  HyperParams best;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.n_candidates; ++i) {
    const auto h = l.sample(space, rng);
    const double r = l.log_density(h, space) - g.log_density(h, space);
    if (r > best_ratio) {
      best_ratio = r;
      best = h;
    }
  }
  return best;
}

/// Score to maximize; `seed` identifies the trial's private random stream.
using Objective = std::function<double(const HyperParams&, std::uint64_t seed)>;

struct TuneResult {
  Trial best;
  std::vector<Trial> history;
};

/// Sequential suggest/evaluate loop. Exceptions or non-finite scores mark a
/// trial failed; failed trials never enter the density estimates.
inline TuneResult tune(const Objective& objective, const SearchSpace& space, int budget, const TpeConfig& cfg,
                       const Rng& rng) {
  require(budget >= 1, ErrorCode::InvalidArgument, "budget must be >= 1");
  validate(cfg);
  TuneResult out;
  for (int t = 0; t < budget; ++t) {
    Rng suggest_rng = rng.split(2 * static_cast<std::uint64_t>(t));
    Trial trial;
    trial.index = t;
    trial.hp = tpe_suggest(out.history, space, cfg, suggest_rng);
    trial.seed = rng.split(2 * static_cast<std::uint64_t>(t) + 1).seed();
    try {
      trial.score = objective(trial.hp, trial.seed);
      if (!std::isfinite(trial.score)) {
        trial.status = TrialStatus::Failed;
        trial.error = "non-finite score";
        trial.score = 0.0;
      }
    } catch (const std::exception& e) {
      trial.status = TrialStatus::Failed;
      trial.error = e.what();
      trial.score = 0.0;
    }
    out.history.push_back(trial);
  }
  const Trial* best = nullptr;
  for (const auto& t : out.history)
    if (t.ok() && (!best || t.score > best->score)) best = &t;
  require(best != nullptr, ErrorCode::NoSuccessfulTrial, "all " + std::to_string(budget) + " trials failed");
  out.best = *best;
  return out;
}

/// Baseline for comparison: every trial drawn from the prior.
inline TuneResult random_search(const Objective& objective, const SearchSpace& space, int budget, const Rng& rng) {
  TpeConfig cfg;
  cfg.n_startup = budget + 1;
  return tune(objective, space, budget, cfg, rng);
}

inline constexpr const char* kHistoryHeader =
    "trial,l2,lr_exponent,n_filters,kernel_size,dropout,hidden_units,initializer,score,status,seed";

inline void write_history_csv(std::ostream& os, const std::vector<Trial>& history) {
  os << kHistoryHeader << '\n';
  for (const auto& t : history) {
    std::ostringstream line;
    line << std::setprecision(17) << t.index << ',' << t.hp.l2 << ',' << t.hp.lr_exponent << ',' << t.hp.n_filters
         << ',' << t.hp.kernel_size << ',' << t.hp.dropout << ',' << t.hp.hidden_units << ','
         << to_string(t.hp.initializer) << ',' << t.score << ',' << (t.ok() ? "ok" : "failed") << ',' << t.seed;
    os << line.str() << '\n';
  }
}

/// `key = value` lines, readable by parse_hparams.
inline std::string format_hparams(const HyperParams& h) {
  std::ostringstream os;
  os << std::setprecision(17) << "l2 = " << h.l2 << "\nlr_exponent = " << h.lr_exponent
     << "\nn_filters = " << h.n_filters << "\nkernel_size = " << h.kernel_size << "\ndropout = " << h.dropout
     << "\nhidden_units = " << h.hidden_units << "\ninitializer = " << to_string(h.initializer) << '\n';
  return os.str();
}

/// Unlisted keys keep their defaults; `#` starts a comment.
inline HyperParams parse_hparams(std::istream& in) {
  HyperParams h;
  std::string line;
  while (std::getline(in, line)) {
    if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      require(line.find_first_not_of(" \t\r") == std::string::npos, ErrorCode::Format, "bad hparams line: " + line);
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const auto key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "l2") h.l2 = std::stod(val);
      else if (key == "lr_exponent") h.lr_exponent = std::stoi(val);
      else if (key == "n_filters") h.n_filters = std::stoul(val);
      else if (key == "kernel_size") h.kernel_size = std::stoul(val);
      else if (key == "dropout") h.dropout = std::stod(val);
      else if (key == "hidden_units") h.hidden_units = std::stoul(val);
      else if (key == "initializer") {
        const auto i = nn::parse_initializer(val);
        require(i.has_value(), ErrorCode::Format, "unknown initializer '" + val + "'");
        h.initializer = *i;
      } else fail(ErrorCode::Format, "unknown hparams key '" + key + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Format, "bad value for '" + key + "'");
    }
  }
  nn::validate_hparams(h);
  return h;
}

}  // namespace airware::tune
