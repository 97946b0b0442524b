#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmcl/common.hpp"
#include "mmcl/model.hpp"

namespace mmcl {

struct RetrievalSplit {
  Matrix query;
  std::vector<int> query_ids;
  std::vector<int> query_cams;  // empty when camera ids are unknown
  Matrix gallery;
  std::vector<int> gallery_ids;
  std::vector<int> gallery_cams;
  // Query q is the same item as gallery q and is skipped when ranking.
  bool same_set = false;
};

// Every item queries all others (leave-one-out over a single set).
RetrievalSplit leave_one_out_split(const Matrix& features, std::vector<int> ids, std::vector<int> cams = {});

struct MetricsReport {
  std::vector<double> cmc;  // cmc[k] = fraction of valid queries matched within top k+1
  double map = 0.0;
  std::vector<double> per_query_ap;  // one per valid query
  std::size_t valid_queries = 0;
  std::size_t skipped_queries = 0;  // queries with no valid gallery match

  double rank(std::size_t k) const;  // CMC at rank k (1-based), clamped to the list end
};

// Gallery ranked by ascending squared L2 distance, ties to the lower gallery
// index. When both sides carry camera ids, gallery entries sharing the query's
// identity and camera are ignored. AP averages precision over the ranks of the
// true matches.
MetricsReport evaluate(const RetrievalSplit& split);

// Embeds both sides with the model, then evaluates.
MetricsReport evaluate(const RetrievalSplit& split, const EmbeddingModel& model);

// {"rank1","rank5","rank10","mAP"} plus query counts.
std::string summary_json(const MetricsReport& report);
std::string cmc_csv(const MetricsReport& report);

}  // namespace mmcl
