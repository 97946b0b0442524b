#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmcl/common.hpp"
#include "mmcl/feature_store.hpp"
#include "mmcl/label_prediction.hpp"

namespace mmcl {

enum class LossVariant {
  kMcl,            // per-class logistic loss on raw scores (tau fixed to 1)
  kMclTau,         // logistic loss on scores divided by tau
  kMmcl,           // squared-error regression to +/-1 with hard negative mining
  kMemSoftmaxCe,   // temperature softmax cross-entropy over memory classes
};

LossVariant parse_loss_variant(const std::string& name);
std::string to_string(LossVariant v);

struct LossConfig {
  LossVariant variant = LossVariant::kMmcl;
  double tau = 0.1;
  double delta = 5.0;       // positive-class weight
  double hard_ratio = 1.0;  // percent of negative classes kept, in (0, 100]

  // Throws ConfigError unless delta >= 1, tau in (0, 1], ratio in (0, 100].
  void validate() const;
};

struct LossReport {
  double value = 0.0;
  Matrix grad;  // dL/df for every row of the feature batch
  std::vector<std::vector<std::size_t>> hard_negatives;
};

// log(1 + exp(-y * score / tau)), evaluated without overflow.
double mcl_class_loss(double score, double y, double tau);
// (score - y)^2
double mmcl_class_loss(double score, double y);

// Count kept by mining: floor((n - |P|) * r / 100), at least one.
std::size_t hard_negative_count(std::size_t n, std::size_t positives, double ratio);

// Highest-scoring classes outside the positive set, ties to the lower index.
// Throws PreconditionError when every class is positive.
std::vector<std::size_t> mine_hard_negatives(std::span<const double> scores, const MultiLabel& label,
                                             double ratio);

// Batch losses. Row b of `features` is scored against every memory row and
// judged by labels[b]. The value is the mean of the per-sample losses and
// `grad` is its exact derivative, so grad rows carry the 1/B factor. The
// memory bank is treated as constant.
LossReport mmcl_loss(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank,
                     const LossConfig& cfg);
LossReport mcl_tau_loss(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank,
                        const LossConfig& cfg);
LossReport mem_softmax_ce_loss(const Matrix& features, std::span<const MultiLabel> labels,
                               const MemoryBank& bank, const LossConfig& cfg);

// Dispatches on cfg.variant; kMcl runs mcl_tau_loss with tau = 1.
LossReport compute_loss(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank,
                        const LossConfig& cfg);

struct SweepPoint {
  std::string variant;  // "MCL-tau" or "MMCL"
  double param = 0.0;   // tau or delta
  double score = 0.0;
  double grad_magnitude = 0.0;
};

// Single-class gradient magnitude for a positive label and unit classifier
// row: (1/tau) * sigmoid(-s/tau) for MCL-tau, 2*delta*|s - 1| for MMCL.
double mcl_tau_grad_magnitude(double score, double tau);
double mmcl_grad_magnitude(double score, double delta);

// Scores run from -1 to 1 in `step` increments (endpoint included).
std::vector<double> score_grid(double step);
std::vector<SweepPoint> gradient_sweep(std::span<const double> taus, std::span<const double> deltas,
                                       std::span<const double> scores);
std::string sweep_to_csv(std::span<const SweepPoint> rows);

}  // namespace mmcl
