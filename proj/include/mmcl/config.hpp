#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mmcl/dataset.hpp"
#include "mmcl/label_prediction.hpp"
#include "mmcl/losses.hpp"

namespace mmcl {

struct TrainSchedule {
  std::size_t epochs = 40;
  std::size_t warmup_epochs = 5;  // epochs trained on single-class labels
  double lr = 1.0;
  std::size_t lr_decay_epoch = 30;
  double lr_decay_factor = 0.1;
  std::size_t batch_size = 64;
  double alpha_start = 0.0;
  double alpha_end = 0.5;

  // Memory update rate for `epoch`, linear from alpha_start to alpha_end.
  double alpha(std::size_t epoch) const;
  double learning_rate(std::size_t epoch) const;
};

struct AugmentConfig {
  double sigma = 0.07;  // additive Gaussian jitter
  double drop = 0.0;   // per-coordinate zeroing probability
};

struct ModelConfig {
  std::size_t hidden_dim = 64;  // 0 means a single affine layer
  std::size_t embed_dim = 32;
};

// Everything a run needs. Parsed from "key = value" text; unknown keys are
// rejected.
struct TrainConfig {
  SyntheticSpec data;
  ModelConfig model;
  TrainSchedule schedule;
  LossConfig loss;
  Predictor predictor;
  AugmentConfig augment;
  unsigned threads = 1;  // label refresh workers
  std::uint64_t seed = 1;

  static TrainConfig defaults();
  void set(const std::string& key, const std::string& value);
  // Checks cross-field constraints that depend on the dataset size.
  void validate(std::size_t n) const;
  std::string to_text() const;
};

TrainConfig parse_config(const std::string& text, const std::string& origin = "<config>");
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace mmcl
