#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mmcl/common.hpp"
#include "mmcl/config.hpp"
#include "mmcl/feature_store.hpp"
#include "mmcl/label_prediction.hpp"
#include "mmcl/model.hpp"

namespace mmcl {

// Feature-space stand-in for image augmentation: Gaussian jitter followed by
// coordinate dropout. sigma = 0 and drop = 0 leave x untouched.
std::vector<double> augment(std::span<const double> x, const AugmentConfig& cfg, std::mt19937_64& rng);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;            // sample-weighted mean over the epoch
  double mean_positives = 0.0;  // of the labels used during the epoch
  double lr = 0.0;
  double alpha = 0.0;
  bool labels_refreshed = false;  // labels were re-predicted at epoch end
};

// Training loop over unlabeled observations. Identities never reach this
// class; evaluation hooks in through the epoch callback.
class Trainer {
 public:
  using EpochCallback = std::function<void(const Trainer&, const EpochStats&)>;

  Trainer(TrainConfig config, Matrix observations);

  // One pass: shuffled minibatches, each doing augment, forward, loss, SGD
  // step and memory update. At the end of an epoch whose count reaches the
  // warmup length, labels are re-predicted against a frozen bank copy.
  EpochStats run_epoch();
  void train(const EpochCallback& on_epoch = {});

  const TrainConfig& config() const noexcept { return config_; }
  const EmbeddingModel& model() const noexcept { return model_; }
  const MemoryBank& bank() const noexcept { return bank_; }
  const std::vector<MultiLabel>& labels() const noexcept { return labels_; }
  const Matrix& observations() const noexcept { return observations_; }
  std::size_t epochs_done() const noexcept { return epoch_; }

  // Embeddings of the raw (unaugmented) observations under the current model.
  Matrix embed() const;

 private:
  TrainConfig config_;
  Matrix observations_;
  EmbeddingModel model_;
  MemoryBank bank_;
  std::vector<MultiLabel> labels_;
  std::mt19937_64 rng_;
  std::size_t epoch_ = 0;
};

// Per-purpose seeds derived from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mmcl
