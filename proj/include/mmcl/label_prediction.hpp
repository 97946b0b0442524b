#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmcl/feature_store.hpp"

namespace mmcl {

// Prefix of a rank list whose similarity scores reach the threshold.
struct CandidateSet {
  std::size_t anchor = 0;
  std::vector<std::size_t> candidates;  // rank order
  std::size_t k = 0;                    // candidates.size()
  double threshold = 0.0;
};

// Multi-class pseudo label of one sample: +1 on every positive class, -1
// elsewhere. Positives are kept sorted and always contain the anchor.
class MultiLabel {
 public:
  MultiLabel() = default;
  MultiLabel(std::size_t anchor, std::vector<std::size_t> positives, std::size_t n);

  // The single-class label: only the sample's own class is positive.
  static MultiLabel singleton(std::size_t anchor, std::size_t n) { return {anchor, {anchor}, n}; }

  std::size_t anchor() const noexcept { return anchor_; }
  std::size_t classes() const noexcept { return n_; }
  const std::vector<std::size_t>& positives() const noexcept { return positives_; }
  bool contains(std::size_t j) const;
  double sign(std::size_t j) const { return contains(j) ? 1.0 : -1.0; }

  friend bool operator==(const MultiLabel&, const MultiLabel&) = default;

 private:
  std::size_t anchor_ = 0;
  std::vector<std::size_t> positives_;
  std::size_t n_ = 0;
};

CandidateSet filter_by_threshold(const RankList& ranks, double t);

// Similarity threshold followed by the cycle-consistency walk: candidate j is
// kept while the anchor is among the top-k_i entries of j's own rank list, and
// the walk stops at the first candidate that fails.
MultiLabel mplp_predict(const MemoryBank& bank, std::size_t i, double t);
MultiLabel knn_predict(const MemoryBank& bank, std::size_t i, std::size_t k);
MultiLabel similarity_score_predict(const MemoryBank& bank, std::size_t i, double t);

struct LabelQuality {
  double precision = 0.0;
  double recall = 0.0;
  double f1() const {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
};

LabelQuality label_quality(const MultiLabel& pred, std::span<const int> identity);

// Mean precision/recall over a full label set.
LabelQuality mean_label_quality(std::span<const MultiLabel> labels, std::span<const int> identity);

enum class PredictorKind { kSingle, kMplp, kKnn, kSimilarityScore };

struct Predictor {
  PredictorKind kind = PredictorKind::kMplp;
  double threshold = 0.6;
  std::size_t k = 8;
};

PredictorKind parse_predictor_kind(const std::string& name);
std::string to_string(PredictorKind kind);

// Labels for every anchor against one frozen bank. The Gram matrix is built
// once, then anchors are processed on `threads` workers.
std::vector<MultiLabel> predict_labels(const MemoryBank& bank, const Predictor& predictor,
                                       unsigned threads = 1);

std::vector<MultiLabel> singleton_labels(std::size_t n);

// One line per sample: "anchor:p1,p2,...".
void save_labels(std::span<const MultiLabel> labels, const std::filesystem::path& path);
std::vector<MultiLabel> load_labels(const std::filesystem::path& path);

}  // namespace mmcl
