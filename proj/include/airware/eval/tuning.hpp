#pragma once

#include <vector>

#include "airware/eval/experiment.hpp"
#include "airware/tune.hpp"

namespace airware::eval {

/// Users assigned round-robin (ascending id) to `k` groups.
inline std::vector<Fold> split_user_groups(const Dataset& ds, std::size_t k) {
  const auto users = ds.users();
  require(users.size() >= k && k >= 2, ErrorCode::TooFewUsers,
          "inner split needs at least " + std::to_string(k) + " users");
  std::vector<Fold> folds(k);
  for (std::size_t g = 0; g < k; ++g) folds[g].iteration = static_cast<int>(g);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(users.begin(), users.end(), ds.records[i].user_id) - users.begin());
    for (std::size_t g = 0; g < k; ++g) (pos % k == g ? folds[g].test : folds[g].train).push_back(i);
  }
  return folds;
}

/// Tuning score: mean macro TPR over a k-fold split of the given users.
/// Any failed inner fold fails the trial.
inline tune::Objective tuning_objective(const Dataset& ds, Family family, Modality modality, ExperimentConfig cfg,
                                        std::size_t inner_folds = 3) {
  require(is_cnn(family), ErrorCode::InvalidArgument, "tuning applies to the convolutional models");
  return [&ds, family, modality, cfg, inner_folds](const nn::HyperParams& hp, std::uint64_t seed) {
    nn::validate_hparams(hp);
    ExperimentConfig c = cfg;
    c.hp = hp;
    const auto folds = split_user_groups(ds, inner_folds);
    const auto classes = detail::class_codes(ds);
    const Rng rng(seed);
    std::vector<double> scores(folds.size());
    std::vector<std::string> errors(folds.size());
    parallel_for(folds.size(), c.jobs, [&](std::size_t i) {
      const auto r = run_fold(ds, folds[i], classes, family, modality, c, rng.split(i));
      if (r.failed) errors[i] = r.error;
      scores[i] = r.macro;
    });
    for (const auto& e : errors)
      if (!e.empty()) throw Error(ErrorCode::DivergenceError, "inner fold failed: " + e);
    return mean_se(scores).mean;
  };
}

}  // namespace airware::eval
