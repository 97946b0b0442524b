#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmcl/config.hpp"
#include "mmcl/dataset.hpp"
#include "mmcl/evaluation.hpp"
#include "mmcl/feature_store.hpp"
#include "mmcl/label_prediction.hpp"
#include "mmcl/model.hpp"

namespace mmcl {

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double label_precision = 0.0;  // labels used during this epoch
  double label_recall = 0.0;
  double rank1 = 0.0;  // leave-one-out retrieval after this epoch
  double map = 0.0;
  double mean_positives = 0.0;
};

// Quality of labels predicted from the memory after `epochs_done` epochs.
// Before warmup ends both predictors report the single-class labels.
struct LabelCurveRow {
  std::size_t epochs_done = 0;
  std::string predictor;
  double precision = 0.0;
  double recall = 0.0;
};

struct RunOptions {
  bool per_epoch_eval = true;
  bool label_curve = false;
  std::size_t knn_k = 8;
};

struct RunResult {
  std::vector<EpochRecord> log;
  std::vector<LabelCurveRow> curve;
  MetricsReport untrained;
  MetricsReport final_metrics;
  EmbeddingModel model;
  MemoryBank bank;
  std::vector<MultiLabel> labels;
};

// The synthetic dataset a config describes; its seed is derived from cfg.seed.
Dataset synthetic_for(const TrainConfig& cfg);

// Trains on the dataset's observations (identities withheld from the trainer)
// and scores each epoch against the identities.
RunResult run_experiment(const TrainConfig& cfg, const Dataset& data, const RunOptions& options = {});

// Leave-one-out retrieval of a set of embeddings.
MetricsReport evaluate_embeddings(const Matrix& embeddings, const Dataset& data);

std::string metrics_log_csv(std::span<const EpochRecord> log);
std::string label_curve_csv(std::span<const LabelCurveRow> rows);

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  double rank1 = 0.0;
  double map = 0.0;
};

// Applies one hyper-parameter value to a config. `param` is one of t, delta,
// r or K (K switches the predictor to KNN).
void apply_param(TrainConfig& cfg, const std::string& param, double value);

// One seeded training run per (value, seed) cell on the config's synthetic data.
std::vector<SweepRow> sweep(const std::string& param, std::span<const double> grid, const TrainConfig& base,
                            std::span<const std::uint64_t> seeds);
std::string sweep_csv(std::span<const SweepRow> rows);

// Mean rank-1 per grid value, in grid order.
std::vector<double> mean_rank1(std::span<const SweepRow> rows, std::span<const double> grid);

struct AblationRow {
  std::string method;
  double rank1 = 0.0;
  double map = 0.0;
};

// Label-predictor and loss ablations on one dataset: untrained model, MMCL with
// single-class / KNN / SS / MPLP labels, and memory softmax CE with single-class
// and MPLP labels.
std::vector<AblationRow> ablation(const TrainConfig& base, const Dataset& data);
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace mmcl
