#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "airware/dataset.hpp"
#include "airware/error.hpp"
#include "airware/random.hpp"

namespace airware::eval {

/// Record indices into the dataset. `user` is the held-out / target user.
struct Fold {
  int user = 0;
  int iteration = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

/// user -> class code -> record indices, in dataset order.
inline std::map<int, std::map<int, std::vector<std::size_t>>> group_by_user_class(const Dataset& ds) {
  std::map<int, std::map<int, std::vector<std::size_t>>> g;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    g[ds.records[i].user_id][code(ds.records[i].gesture)].push_back(i);
  return g;
}

inline void require_users(const Dataset& ds) {
  const auto n = ds.users().size();
  require(n >= 2, ErrorCode::TooFewUsers, "need at least 2 users, dataset has " + std::to_string(n));
}

/// One stratified shuffle of a user's records: per class, lround(train_frac n)
/// go to train and the rest to test.
inline void stratified_split(const std::map<int, std::vector<std::size_t>>& by_class, double train_frac, Rng& rng,
                             std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  for (const auto& [cls, idx] : by_class) {
    std::vector<std::size_t> shuffled = idx;
    rng.shuffle(shuffled.begin(), shuffled.end());
    const auto n = static_cast<long>(shuffled.size());
    const long n_test = std::lround((1.0 - train_frac) * static_cast<double>(n));
    train.insert(train.end(), shuffled.begin() + n_test, shuffled.end());
    test.insert(test.end(), shuffled.begin(), shuffled.begin() + n_test);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

inline void check_per_class(const std::map<int, std::map<int, std::vector<std::size_t>>>& g, std::size_t min_count) {
  for (const auto& [user, by_class] : g)
    for (const auto& [cls, idx] : by_class)
      require(idx.size() >= min_count, ErrorCode::InsufficientSamples,
              "user " + std::to_string(user) + ", class " + std::string(kGestureNames[static_cast<std::size_t>(cls)]) +
                  " has " + std::to_string(idx.size()) + " records; need at least " + std::to_string(min_count));
}

}  // namespace detail

/// Leave-one-subject-out: one fold per user.
inline std::vector<Fold> split_loso(const Dataset& ds) {
  detail::require_users(ds);
  std::vector<Fold> folds;
  for (int u : ds.users()) {
    Fold f;
    f.user = u;
    for (std::size_t i = 0; i < ds.records.size(); ++i) (ds.records[i].user_id == u ? f.test : f.train).push_back(i);
    folds.push_back(std::move(f));
  }
  return folds;
}

inline constexpr std::size_t kMinPerClass = 5;

/// Within-user protocol: per user, `iterations` stratified shuffles with
/// train_frac of every class used for training. Split streams are derived
/// from (user, iteration), so the user-calibrated protocol sees the same
/// target-user partitions.
inline std::vector<Fold> split_personalized(const Dataset& ds, const Rng& rng, int iterations = 5,
                                            double train_frac = 0.6, std::size_t min_per_class = kMinPerClass) {
  require(iterations >= 1, ErrorCode::InvalidArgument, "iterations must be >= 1");
  require(train_frac > 0.0 && train_frac < 1.0, ErrorCode::InvalidArgument, "train_frac must lie in (0, 1)");
  const auto g = detail::group_by_user_class(ds);
  detail::check_per_class(g, min_per_class);
  std::vector<Fold> folds;
  for (const auto& [user, by_class] : g)
    for (int it = 0; it < iterations; ++it) {
      Rng r = rng.split(static_cast<std::uint64_t>(user)).split(static_cast<std::uint64_t>(it));
      Fold f;
      f.user = user;
      f.iteration = it;
      detail::stratified_split(by_class, train_frac, r, f.train, f.test);
      folds.push_back(std::move(f));
    }
  return folds;
}

/// LOSO training data plus the personalized training share of the target
/// user; tested on the remainder of the target user.
inline std::vector<Fold> split_user_calibrated(const Dataset& ds, const Rng& rng, int iterations = 5,
                                               double train_frac = 0.6, std::size_t min_per_class = kMinPerClass) {
  detail::require_users(ds);
  auto folds = split_personalized(ds, rng, iterations, train_frac, min_per_class);
  for (auto& f : folds) {
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      if (ds.records[i].user_id != f.user) f.train.push_back(i);
    std::sort(f.train.begin(), f.train.end());
  }
  return folds;
}

}  // namespace airware::eval
