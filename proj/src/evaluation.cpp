#include "mmcl/evaluation.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>

#include "mmcl/csv.hpp"

namespace mmcl {

RetrievalSplit leave_one_out_split(const Matrix& features, std::vector<int> ids, std::vector<int> cams) {
  if (ids.size() != features.rows()) throw ConfigError("identity count does not match feature count");
  if (!cams.empty() && cams.size() != features.rows()) throw ConfigError("camera count does not match feature count");
  RetrievalSplit s;
  s.query = features;
  s.gallery = features;
  s.query_ids = ids;
  s.gallery_ids = std::move(ids);
  s.query_cams = cams;
  s.gallery_cams = std::move(cams);
  s.same_set = true;
  return s;
}

double MetricsReport::rank(std::size_t k) const {
  if (cmc.empty() || k == 0) return 0.0;
  return cmc[std::min(k, cmc.size()) - 1];
}

MetricsReport evaluate(const RetrievalSplit& split) {
  const std::size_t nq = split.query.rows();
  const std::size_t ng = split.gallery.rows();
  if (split.query_ids.size() != nq || split.gallery_ids.size() != ng)
    throw ConfigError("identity vectors do not match feature counts");
  if (nq > 0 && ng > 0 && split.query.cols() != split.gallery.cols())
    throw ConfigError("query and gallery dimensions differ");
  if (split.same_set && nq != ng) throw ConfigError("same-set split needs equal query and gallery sizes");
  const bool cams = !split.query_cams.empty() && !split.gallery_cams.empty();
  if (cams && (split.query_cams.size() != nq || split.gallery_cams.size() != ng))
    throw ConfigError("camera vectors do not match feature counts");

  MetricsReport report;
  std::vector<double> hits_at(ng, 0.0);
  std::vector<double> dist(ng);
  std::vector<std::size_t> order(ng);
  for (std::size_t q = 0; q < nq; ++q) {
    const auto qf = split.query.row(q);
    for (std::size_t g = 0; g < ng; ++g) {
      const auto gf = split.gallery.row(g);
      double d = 0.0;
      for (std::size_t k = 0; k < qf.size(); ++k) d += (qf[k] - gf[k]) * (qf[k] - gf[k]);
      dist[g] = d;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    std::size_t rank = 0, matches = 0, first = ng;
    double ap = 0.0;
    for (std::size_t g : order) {
      if (split.same_set && g == q) continue;
      const bool same_id = split.gallery_ids[g] == split.query_ids[q];
      if (cams && same_id && split.gallery_cams[g] == split.query_cams[q]) continue;
      if (same_id) {
        if (matches == 0) first = rank;
        ++matches;
        ap += static_cast<double>(matches) / static_cast<double>(rank + 1);
      }
      ++rank;
    }
    if (matches == 0) {
      ++report.skipped_queries;
      continue;
    }
    ++report.valid_queries;
    report.per_query_ap.push_back(ap / static_cast<double>(matches));
    hits_at[first] += 1.0;
  }

  report.cmc.assign(ng, 0.0);
  if (report.valid_queries > 0) {
    double acc = 0.0;
    for (std::size_t k = 0; k < ng; ++k) {
      acc += hits_at[k];
      report.cmc[k] = acc / static_cast<double>(report.valid_queries);
    }
    report.map = std::accumulate(report.per_query_ap.begin(), report.per_query_ap.end(), 0.0) /
                 static_cast<double>(report.valid_queries);
  }
  return report;
}

MetricsReport evaluate(const RetrievalSplit& split, const EmbeddingModel& model) {
  RetrievalSplit embedded = split;
  embedded.query = embed_all(model, split.query);
  embedded.gallery = embed_all(model, split.gallery);
  return evaluate(embedded);
}

std::string summary_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["rank1"] = report.rank(1);
  j["rank5"] = report.rank(5);
  j["rank10"] = report.rank(10);
  j["mAP"] = report.map;
  j["valid_queries"] = report.valid_queries;
  j["skipped_queries"] = report.skipped_queries;
  return j.dump(2) + "\n";
}

std::string cmc_csv(const MetricsReport& report) {
  std::string out = "rank,cmc\n";
  for (std::size_t k = 0; k < report.cmc.size(); ++k)
    out += std::to_string(k + 1) + "," + format_real(report.cmc[k]) + "\n";
  return out;
}

}  // namespace mmcl
