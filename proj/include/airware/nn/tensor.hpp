#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "airware/error.hpp"
#include "airware/random.hpp"

namespace airware::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major array with an explicit shape.
template <typename S>
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> d) : dims(std::move(d)), data(element_count(dims), S(0)) {}

  static std::size_t element_count(const std::vector<std::size_t>& d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return data.size(); }
  bool valid() const { return data.size() == element_count(dims); }
};

enum class Initializer { HeNormal, HeUniform, GlorotNormal, GlorotUniform, LecunNormal, LecunUniform };

inline constexpr std::string_view kInitializerNames[] = {"he-normal",      "he-uniform",   "glorot-normal",
                                                         "glorot-uniform", "lecun-normal", "lecun-uniform"};

constexpr std::string_view to_string(Initializer i) { return kInitializerNames[static_cast<int>(i)]; }

inline std::optional<Initializer> parse_initializer(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (kInitializerNames[i] == s) return static_cast<Initializer>(i);
  return std::nullopt;
}

struct Fans {
  double fan_in = 0, fan_out = 0;
};

/// Last dim is the output width, second to last the input width; anything
/// before is a receptive field (kernel taps).
inline Fans fans_of(const std::vector<std::size_t>& shape) {
  require(shape.size() >= 2, ErrorCode::InvalidArgument, "initializer needs a shape of rank >= 2");
  double receptive = 1.0;
  for (std::size_t i = 0; i + 2 < shape.size(); ++i) receptive *= static_cast<double>(shape[i]);
  return {receptive * static_cast<double>(shape[shape.size() - 2]),
          receptive * static_cast<double>(shape.back())};
}

inline double init_variance(Initializer init, const Fans& f) {
  switch (init) {
    case Initializer::HeNormal:
    case Initializer::HeUniform:
      return 2.0 / f.fan_in;
    case Initializer::GlorotNormal:
    case Initializer::GlorotUniform:
      return 2.0 / (f.fan_in + f.fan_out);
    case Initializer::LecunNormal:
    case Initializer::LecunUniform:
      return 1.0 / f.fan_in;
  }
  return 0.0;
}

inline bool is_uniform(Initializer init) {
  return init == Initializer::HeUniform || init == Initializer::GlorotUniform || init == Initializer::LecunUniform;
}

/// Uniform draws use the bound sqrt(3 var) so both families share a variance.
template <typename S = double>
Tensor<S> init_weights(Initializer init, const std::vector<std::size_t>& shape, Rng& rng) {
  const Fans f = fans_of(shape);
  require(f.fan_in > 0 && f.fan_out > 0, ErrorCode::InvalidArgument, "initializer fans must be positive");
  const double var = init_variance(init, f);
  Tensor<S> t(shape);
  if (is_uniform(init)) {
    const double bound = std::sqrt(3.0 * var);
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(-bound, bound));
  } else {
    const double sd = std::sqrt(var);
    for (auto& v : t.data) v = static_cast<S>(rng.normal(0.0, sd));
  }
  return t;
}

}  // namespace airware::nn
