#include "mmcl/label_prediction.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "mmcl/csv.hpp"

namespace mmcl {

MultiLabel::MultiLabel(std::size_t anchor, std::vector<std::size_t> positives, std::size_t n)
    : anchor_(anchor), positives_(std::move(positives)), n_(n) {
  if (anchor >= n) throw BoundsError("label anchor " + std::to_string(anchor) + " >= n=" + std::to_string(n));
  positives_.push_back(anchor);
  std::sort(positives_.begin(), positives_.end());
  positives_.erase(std::unique(positives_.begin(), positives_.end()), positives_.end());
  if (positives_.back() >= n)
    throw BoundsError("positive class " + std::to_string(positives_.back()) + " >= n=" + std::to_string(n));
}

bool MultiLabel::contains(std::size_t j) const {
  return std::binary_search(positives_.begin(), positives_.end(), j);
}

namespace {

void check_threshold(double t) {
  if (!(t > -1.0 && t < 1.0)) throw ConfigError("similarity threshold must lie in (-1, 1), got " + std::to_string(t));
}

RankList rank_from_scores(std::size_t anchor, std::span<const double> s) {
  RankList out;
  out.anchor = anchor;
  out.order.resize(s.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  out.scores.reserve(s.size());
  for (std::size_t j : out.order) out.scores.push_back(s[j]);
  return out;
}

// Whether `target` sits inside the first k entries of `row`'s rank list. The
// rank is the number of entries ordered ahead of it under the
// (descending score, ascending index) order, so no sort is needed.
bool in_top_k(std::span<const double> row_scores, std::size_t target, std::size_t k) {
  const double ref = row_scores[target];
  std::size_t ahead = 0;
  for (std::size_t m = 0; m < row_scores.size(); ++m) {
    const double v = row_scores[m];
    if (v > ref || (v == ref && m < target)) {
      if (++ahead >= k) return false;
    }
  }
  return true;
}

// `scores_of(j)` yields the full similarity row of sample j.
template <typename ScoresOf, typename IsEmpty>
MultiLabel mplp_core(std::size_t i, std::size_t n, double t, ScoresOf&& scores_of, IsEmpty&& is_empty) {
  const auto anchor_scores = scores_of(i);
  const auto cand = filter_by_threshold(rank_from_scores(i, anchor_scores), t);
  std::vector<std::size_t> accepted;
  accepted.reserve(cand.k);
  for (std::size_t j : cand.candidates) {
    if (j != i) {
      if (is_empty(j)) break;
      const auto js = scores_of(j);
      if (!in_top_k(js, i, cand.k)) break;
    }
    accepted.push_back(j);
  }
  return {i, std::move(accepted), n};
}

MultiLabel knn_core(std::size_t i, std::size_t n, std::size_t k, std::span<const double> anchor_scores) {
  if (k == 0 || k > n)
    throw ConfigError("KNN k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  auto r = rank_from_scores(i, anchor_scores);
  r.order.resize(k);
  return {i, std::move(r.order), n};
}

MultiLabel ss_core(std::size_t i, std::size_t n, double t, std::span<const double> anchor_scores) {
  auto cand = filter_by_threshold(rank_from_scores(i, anchor_scores), t);
  return {i, std::move(cand.candidates), n};
}

}  // namespace

CandidateSet filter_by_threshold(const RankList& ranks, double t) {
  check_threshold(t);
  if (ranks.order.size() != ranks.scores.size())
    throw PreconditionError("malformed rank list: order and scores differ in length");
  for (std::size_t j = 1; j < ranks.scores.size(); ++j)
    if (ranks.scores[j] > ranks.scores[j - 1])
      throw PreconditionError("malformed rank list: scores increase at position " + std::to_string(j));

  CandidateSet out;
  out.anchor = ranks.anchor;
  out.threshold = t;
  for (std::size_t j = 0; j < ranks.order.size() && ranks.scores[j] >= t; ++j)
    out.candidates.push_back(ranks.order[j]);
  out.k = out.candidates.size();
  return out;
}

MultiLabel mplp_predict(const MemoryBank& bank, std::size_t i, double t) {
  check_threshold(t);
  if (bank.row_is_empty(i))
    throw PreconditionError("label prediction undefined for empty memory row " + std::to_string(i));
  return mplp_core(
      i, bank.size(), t, [&](std::size_t j) { return bank.score(bank.row(j)); },
      [&](std::size_t j) { return bank.row_is_empty(j); });
}

MultiLabel knn_predict(const MemoryBank& bank, std::size_t i, std::size_t k) {
  if (bank.row_is_empty(i))
    throw PreconditionError("label prediction undefined for empty memory row " + std::to_string(i));
  return knn_core(i, bank.size(), k, bank.score(bank.row(i)));
}

MultiLabel similarity_score_predict(const MemoryBank& bank, std::size_t i, double t) {
  check_threshold(t);
  if (bank.row_is_empty(i))
    throw PreconditionError("label prediction undefined for empty memory row " + std::to_string(i));
  return ss_core(i, bank.size(), t, bank.score(bank.row(i)));
}

LabelQuality label_quality(const MultiLabel& pred, std::span<const int> identity) {
  if (identity.size() != pred.classes())
    throw ConfigError("identity vector has " + std::to_string(identity.size()) + " entries, expected " +
                      std::to_string(pred.classes()));
  const int id = identity[pred.anchor()];
  std::size_t hits = 0;
  for (std::size_t j : pred.positives())
    if (identity[j] == id) ++hits;
  const auto same = static_cast<std::size_t>(std::count(identity.begin(), identity.end(), id));
  return {static_cast<double>(hits) / static_cast<double>(pred.positives().size()),
          static_cast<double>(hits) / static_cast<double>(same)};
}

LabelQuality mean_label_quality(std::span<const MultiLabel> labels, std::span<const int> identity) {
  LabelQuality sum;
  if (labels.empty()) return sum;
  for (const auto& l : labels) {
    const auto q = label_quality(l, identity);
    sum.precision += q.precision;
    sum.recall += q.recall;
  }
  sum.precision /= static_cast<double>(labels.size());
  sum.recall /= static_cast<double>(labels.size());
  return sum;
}

PredictorKind parse_predictor_kind(const std::string& name) {
  if (name == "single") return PredictorKind::kSingle;
  if (name == "mplp") return PredictorKind::kMplp;
  if (name == "knn") return PredictorKind::kKnn;
  if (name == "ss") return PredictorKind::kSimilarityScore;
  throw ConfigError("unknown predictor '" + name + "' (expected single, mplp, knn or ss)");
}

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kSingle: return "single";
    case PredictorKind::kMplp: return "mplp";
    case PredictorKind::kKnn: return "knn";
    case PredictorKind::kSimilarityScore: return "ss";
  }
  return "?";
}

std::vector<MultiLabel> predict_labels(const MemoryBank& bank, const Predictor& predictor, unsigned threads) {
  const std::size_t n = bank.size();
  if (predictor.kind == PredictorKind::kSingle) return singleton_labels(n);
  if (predictor.kind != PredictorKind::kKnn) check_threshold(predictor.threshold);

  std::vector<bool> empty(n);
  for (std::size_t i = 0; i < n; ++i) {
    empty[i] = bank.row_is_empty(i);
    if (empty[i]) throw PreconditionError("label prediction undefined for empty memory row " + std::to_string(i));
  }
  const Matrix gram = bank.similarity_matrix();

  std::vector<MultiLabel> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      switch (predictor.kind) {
        case PredictorKind::kMplp:
          out[i] = mplp_core(
              i, n, predictor.threshold, [&](std::size_t j) { return gram.row(j); },
              [&](std::size_t j) { return static_cast<bool>(empty[j]); });
          break;
        case PredictorKind::kKnn: out[i] = knn_core(i, n, predictor.k, gram.row(i)); break;
        case PredictorKind::kSimilarityScore: out[i] = ss_core(i, n, predictor.threshold, gram.row(i)); break;
        case PredictorKind::kSingle: out[i] = MultiLabel::singleton(i, n); break;
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(work, b, std::min(n, b + chunk));
  pool.clear();
  return out;
}

std::vector<MultiLabel> singleton_labels(std::size_t n) {
  std::vector<MultiLabel> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(MultiLabel::singleton(i, n));
  return out;
}

void save_labels(std::span<const MultiLabel> labels, const std::filesystem::path& path) {
  std::string text;
  for (const auto& l : labels) {
    text += std::to_string(l.anchor()) + ":";
    for (std::size_t k = 0; k < l.positives().size(); ++k) {
      if (k) text += ',';
      text += std::to_string(l.positives()[k]);
    }
    text += '\n';
  }
  write_file_atomic(path, text);
}

std::vector<MultiLabel> load_labels(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::string where = path.string();
  struct Raw {
    std::size_t anchor;
    std::vector<std::size_t> positives;
    std::size_t line;
  };
  std::vector<Raw> raw;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto colon = lines[ln].find(':');
    if (colon == std::string::npos) throw ParseError(where, ln + 1, "expected 'anchor:positives'");
    Raw r{parse_size(std::string_view(lines[ln]).substr(0, colon), where, ln + 1), {}, ln + 1};
    for (const auto& f : split_csv(std::string_view(lines[ln]).substr(colon + 1)))
      r.positives.push_back(parse_size(f, where, ln + 1));
    raw.push_back(std::move(r));
  }
  const std::size_t n = raw.size();
  std::vector<MultiLabel> out(n);
  std::vector<bool> seen(n, false);
  for (auto& r : raw) {
    if (r.anchor >= n) throw ParseError(where, r.line, "anchor " + std::to_string(r.anchor) + " out of range");
    if (seen[r.anchor]) throw ParseError(where, r.line, "duplicate anchor " + std::to_string(r.anchor));
    seen[r.anchor] = true;
    try {
      out[r.anchor] = MultiLabel(r.anchor, std::move(r.positives), n);
    } catch (const Error& e) {
      throw ParseError(where, r.line, e.what());
    }
  }
  return out;
}

}  // namespace mmcl
