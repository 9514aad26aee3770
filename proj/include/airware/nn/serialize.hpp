#pragma once

#include <string>
#include <vector>

#include "airware/model_io.hpp"
#include "airware/nn/train.hpp"

namespace airware::nn {

inline io::Section to_section(const TrainedModel& m) {
  io::Section s;
  s.type = "nn";
  const auto& sp = m.spec;
  s.set("model", std::string(to_string(sp.model)));
  s.set_num("frames", sp.frames);
  s.set_num("bins", sp.bins);
  s.set_num("n_classes", sp.n_classes);
  s.set_num("use_doppler", int(sp.use_doppler));
  s.set_num("use_ir", int(sp.use_ir));
  s.set_num("l2", sp.hp.l2);
  s.set_num("lr_exponent", sp.hp.lr_exponent);
  s.set_num("n_filters", sp.hp.n_filters);
  s.set_num("kernel_size", sp.hp.kernel_size);
  s.set_num("dropout", sp.hp.dropout);
  s.set_num("hidden_units", sp.hp.hidden_units);
  s.set("initializer", std::string(to_string(sp.hp.initializer)));
  std::string hidden;
  for (auto h : sp.mlp_hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
  s.set("mlp_hidden", hidden);
  s.set_num("mlp_l2", sp.mlp_l2);
  s.set_num("epochs_run", m.epochs_run);
  s.set_num("best_epoch", m.best_epoch);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& p = m.params[i];
    io::Blob b{"p" + std::to_string(i), false, static_cast<std::size_t>(p.rows()), static_cast<std::size_t>(p.cols()),
               {}};
    b.data.assign(p.data(), p.data() + p.size());
    s.blobs.push_back(std::move(b));
  }
  return s;
}

inline TrainedModel from_section(const io::Section& s) {
  require(s.type == "nn", ErrorCode::Format, "expected an nn section, got '" + s.type + "'");
  TrainedModel m;
  auto& sp = m.spec;
  const auto id = parse_model_id(s.get("model"));
  require(id.has_value(), ErrorCode::Format, "unknown model '" + s.get("model") + "'");
  sp.model = *id;
  sp.frames = static_cast<std::size_t>(s.num("frames"));
  sp.bins = static_cast<std::size_t>(s.num("bins"));
  sp.n_classes = static_cast<std::size_t>(s.num("n_classes"));
  sp.use_doppler = s.num("use_doppler") != 0;
  sp.use_ir = s.num("use_ir") != 0;
  sp.hp.l2 = s.num("l2");
  sp.hp.lr_exponent = static_cast<int>(s.num("lr_exponent"));
  sp.hp.n_filters = static_cast<std::size_t>(s.num("n_filters"));
  sp.hp.kernel_size = static_cast<std::size_t>(s.num("kernel_size"));
  sp.hp.dropout = s.num("dropout");
  sp.hp.hidden_units = static_cast<std::size_t>(s.num("hidden_units"));
  const auto init = parse_initializer(s.get("initializer"));
  require(init.has_value(), ErrorCode::Format, "unknown initializer");
  sp.hp.initializer = *init;
  sp.mlp_hidden.clear();
  std::istringstream hs(s.get("mlp_hidden"));
  for (std::string tok; std::getline(hs, tok, ',');) sp.mlp_hidden.push_back(std::stoul(tok));
  sp.mlp_l2 = s.num("mlp_l2");
  m.epochs_run = static_cast<int>(s.num("epochs_run"));
  m.best_epoch = static_cast<int>(s.num("best_epoch"));
  for (std::size_t i = 0;; ++i) {
    const auto name = "p" + std::to_string(i);
    const io::Blob* b = nullptr;
    for (const auto& x : s.blobs)
      if (x.name == name) b = &x;
    if (!b) break;
    Mat<float> p(static_cast<Eigen::Index>(b->rows), static_cast<Eigen::Index>(b->cols));
    for (std::size_t k = 0; k < b->data.size(); ++k) p.data()[k] = static_cast<float>(b->data[k]);
    m.params.push_back(std::move(p));
  }
  // Validates shapes against NetworkSpec.
  Rng unused(0);
  auto net = build_network<float>(sp, unused);
  load_params(net, m.params);
  return m;
}

}  // namespace airware::nn
