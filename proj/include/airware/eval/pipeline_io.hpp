#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "airware/eval/experiment.hpp"
#include "airware/model_io.hpp"
#include "airware/nn/serialize.hpp"

namespace airware::eval {

namespace detail {

inline io::Blob to_blob(const std::string& name, const double* data, std::size_t rows, std::size_t cols) {
  io::Blob b{name, true, rows, cols, {}};
  b.data.assign(data, data + rows * cols);
  return b;
}

inline Eigen::RowVectorXd row_of(const io::Blob& b) {
  return Eigen::Map<const Eigen::RowVectorXd>(b.data.data(), static_cast<Eigen::Index>(b.data.size()));
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

inline std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  for (std::string tok; std::getline(is, tok, ',');) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace detail

inline std::vector<io::Section> pipeline_sections(const FittedPipeline& p) {
  std::vector<io::Section> out;
  io::Section head;
  head.type = "pipeline";
  head.set("family", std::string(to_string(p.family)));
  head.set("modality", std::string(to_string(p.modality)));
  head.set("classes", detail::join_ints(p.classes));
  out.push_back(head);

  io::Section norm;
  norm.type = "norm";
  norm.set_num("pooled", int(p.norm.pooled));
  norm.set_num("speed_mean", p.norm.speed_mean);
  norm.set_num("speed_std", p.norm.speed_std);
  norm.set_num("angle_mean", p.norm.angle_mean);
  norm.set_num("angle_std", p.norm.angle_std);
  norm.blobs.push_back(detail::to_blob("doppler_mean", p.norm.doppler_mean.data(), 1, p.norm.doppler_mean.size()));
  norm.blobs.push_back(detail::to_blob("doppler_std", p.norm.doppler_std.data(), 1, p.norm.doppler_std.size()));
  out.push_back(norm);

  if (p.pca) {
    io::Section s;
    s.type = "pca";
    const auto& m = *p.pca;
    s.blobs.push_back(detail::to_blob("mean", m.mean.data(), 1, m.mean.size()));
    s.blobs.push_back(detail::to_blob("components", m.components.data(), m.k(), m.components.cols()));
    s.blobs.push_back(detail::to_blob("explained_variance", m.explained_variance.data(), 1, m.explained_variance.size()));
    out.push_back(s);
  }
  if (p.scaler) {
    io::Section s;
    s.type = "scaler";
    s.blobs.push_back(detail::to_blob("mean", p.scaler->mean.data(), 1, p.scaler->mean.size()));
    s.blobs.push_back(detail::to_blob("scale", p.scaler->scale.data(), 1, p.scaler->scale.size()));
    out.push_back(s);
  }
  if (p.net) out.push_back(nn::to_section(*p.net));
  if (p.forest) {
    io::Section s;
    s.type = "forest";
    s.set_num("n_classes", p.forest->n_classes);
    s.set_num("n_features", p.forest->n_features);
    s.set_num("n_trees", p.forest->trees.size());
    std::vector<double> rows;
    for (std::size_t t = 0; t < p.forest->trees.size(); ++t)
      for (const auto& n : p.forest->trees[t].nodes)
        rows.insert(rows.end(), {double(t), double(n.feature), n.threshold, double(n.left), double(n.right), double(n.label)});
    s.blobs.push_back(detail::to_blob("nodes", rows.data(), rows.size() / 6, 6));
    out.push_back(s);
  }
  if (p.svm) {
    io::Section s;
    s.type = "svm";
    const auto C = p.svm->machines.size();
    const auto d = static_cast<std::size_t>(C ? p.svm->machines[0].w.size() : 0);
    std::vector<double> rows;
    for (const auto& m : p.svm->machines) {
      rows.insert(rows.end(), m.w.data(), m.w.data() + d);
      rows.push_back(m.b);
    }
    s.blobs.push_back(detail::to_blob("weights", rows.data(), C, d + 1));
    out.push_back(s);
  }
  return out;
}

inline FittedPipeline pipeline_from_sections(const std::vector<io::Section>& sections) {
  FittedPipeline p;
  bool have_head = false;
  for (const auto& s : sections) {
    if (s.type == "pipeline") {
      const auto f = parse_family(s.get("family"));
      const auto m = parse_modality(s.get("modality"));
      require(f && m, ErrorCode::Format, "bad pipeline header");
      p.family = *f;
      p.modality = *m;
      p.classes = detail::split_ints(s.get("classes"));
      have_head = true;
    } else if (s.type == "norm") {
      p.norm.pooled = s.num("pooled") != 0;
      p.norm.speed_mean = s.num("speed_mean");
      p.norm.speed_std = s.num("speed_std");
      p.norm.angle_mean = s.num("angle_mean");
      p.norm.angle_std = s.num("angle_std");
      p.norm.doppler_mean = detail::row_of(s.blob("doppler_mean")).transpose();
      p.norm.doppler_std = detail::row_of(s.blob("doppler_std")).transpose();
    } else if (s.type == "pca") {
      baselines::PcaModel m;
      m.mean = detail::row_of(s.blob("mean"));
      const auto& c = s.blob("components");
      m.components = Eigen::Map<const Matrix>(c.data.data(), static_cast<Eigen::Index>(c.rows),
                                              static_cast<Eigen::Index>(c.cols));
      m.explained_variance = detail::row_of(s.blob("explained_variance")).transpose();
      p.pca = std::move(m);
    } else if (s.type == "scaler") {
      p.scaler = baselines::Standardizer{detail::row_of(s.blob("mean")), detail::row_of(s.blob("scale"))};
    } else if (s.type == "nn") {
      p.net = nn::from_section(s);
    } else if (s.type == "forest") {
      baselines::ForestModel f;
      f.n_classes = static_cast<int>(s.num("n_classes"));
      f.n_features = static_cast<std::size_t>(s.num("n_features"));
      f.trees.resize(static_cast<std::size_t>(s.num("n_trees")));
      const auto& b = s.blob("nodes");
      require(b.cols == 6, ErrorCode::Format, "forest node table must have 6 columns");
      for (std::size_t r = 0; r < b.rows; ++r) {
        const double* x = b.data.data() + 6 * r;
        const auto t = static_cast<std::size_t>(x[0]);
        require(t < f.trees.size(), ErrorCode::Format, "forest node references a missing tree");
        f.trees[t].nodes.push_back({int(x[1]), x[2], int(x[3]), int(x[4]), int(x[5])});
      }
      p.forest = std::move(f);
    } else if (s.type == "svm") {
      baselines::LinearSvmModel m;
      const auto& b = s.blob("weights");
      require(b.cols >= 1, ErrorCode::Format, "svm weight table is empty");
      for (std::size_t r = 0; r < b.rows; ++r) {
        baselines::BinarySvm bs;
        bs.w = Eigen::Map<const Eigen::VectorXd>(b.data.data() + r * b.cols, static_cast<Eigen::Index>(b.cols - 1));
        bs.b = b.data[r * b.cols + b.cols - 1];
        m.machines.push_back(std::move(bs));
      }
      p.svm = std::move(m);
    } else {
      fail(ErrorCode::Format, "unknown section '" + s.type + "'");
    }
  }
  require(have_head, ErrorCode::Format, "model file lacks a pipeline section");
  const bool ok = is_cnn(p.family) ? p.net.has_value()
                  : p.family == Family::Rf ? p.forest.has_value()
                  : p.family == Family::Svm ? p.svm.has_value()
                                            : p.net.has_value();
  require(ok && p.norm.doppler_mean.size() > 0, ErrorCode::Format, "model file is missing fitted state");
  return p;
}

}  // namespace airware::eval
