#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>
#include <string>

#include "airware/eval/experiment.hpp"

namespace airware::eval {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string class_name(int c) {
  return c >= 0 && c < static_cast<int>(kGestureCount) ? std::string(kGestureNames[static_cast<std::size_t>(c)])
                                                       : std::to_string(c);
}

inline Json confusion_json(const ConfusionMatrix& cm) {
  Json rows = Json::array();
  for (const auto& r : cm.counts) rows.push_back(r);
  return rows;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// Key order is fixed and no wall-clock data is included, so equal inputs
/// give byte-identical output.
inline Json report_json(const EvalReport& r) {
  Json j;
  j["family"] = std::string(to_string(r.family));
  j["strategy"] = std::string(to_string(r.strategy));
  j["modality"] = std::string(to_string(r.modality));
  Json classes = Json::array();
  for (int c : r.classes) classes.push_back(detail::class_name(c));
  j["classes"] = classes;
  j["overall_mean"] = r.overall_mean;
  j["std_error"] = r.std_error;
  j["complete"] = r.complete;
  Json users = Json::array();
  for (const auto& u : r.per_user) {
    Json ju;
    ju["user"] = u.user;
    ju["macro_tpr"] = u.macro;
    ju["folds"] = u.folds;
    const auto tpr = per_class_tpr(u.confusion);
    Json rates = Json::array();
    for (const auto& x : tpr.rates) rates.push_back(x ? Json(*x) : Json(nullptr));
    ju["per_class_tpr"] = rates;
    ju["confusion"] = detail::confusion_json(u.confusion);
    users.push_back(ju);
  }
  j["per_user"] = users;
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    Json jf;
    jf["user"] = f.user;
    jf["iteration"] = f.iteration;
    jf["n_train"] = f.n_train;
    jf["n_test"] = f.n_test;
    jf["failed"] = f.failed;
    if (f.failed) jf["error"] = f.error;
    else jf["macro_tpr"] = f.macro;
    if (!f.warnings.empty()) jf["warnings"] = f.warnings;
    folds.push_back(jf);
  }
  j["folds"] = folds;
  j["warnings"] = r.warnings;
  return j;
}

inline std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "model " << to_string(r.family) << "  strategy " << to_string(r.strategy) << "  modality "
     << to_string(r.modality) << "  classes " << r.classes.size() << '\n';
  os << "user   folds  macro_tpr\n";
  for (const auto& u : r.per_user) {
    char line[64];
    std::snprintf(line, sizeof line, "%4d   %5d  %9s\n", u.user, u.folds, detail::fixed(u.macro).c_str());
    os << line;
  }
  os << "mean " << detail::fixed(r.overall_mean) << "  std_error " << detail::fixed(r.std_error) << '\n';
  if (!r.complete) os << "INCOMPLETE: one or more folds failed\n";
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

/// Header row of class names, then one row per true class.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\pred";
  for (int c : cm.classes) os << ',' << detail::class_name(c);
  os << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    os << detail::class_name(cm.classes[i]);
    for (auto v : cm.counts[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace airware::eval
