#include "mmcl/experiments.hpp"

#include <algorithm>

#include "mmcl/csv.hpp"
#include "mmcl/trainer.hpp"

namespace mmcl {

Dataset synthetic_for(const TrainConfig& cfg) {
  SyntheticSpec spec = cfg.data;
  spec.seed = derive_seed(cfg.seed, 0);
  return generate(spec);
}

MetricsReport evaluate_embeddings(const Matrix& embeddings, const Dataset& data) {
  std::vector<int> cams;
  if (data.has_cameras()) cams = data.cameras();
  return evaluate(leave_one_out_split(embeddings, data.identities(), std::move(cams)));
}

RunResult run_experiment(const TrainConfig& cfg, const Dataset& data, const RunOptions& options) {
  const auto ids = data.identities();
  Trainer trainer(cfg, data.observations());
  RunResult result;
  result.untrained = evaluate_embeddings(trainer.embed(), data);

  const std::size_t n = data.size();
  auto curve_point = [&](std::size_t done, const Trainer& t) {
    const bool ready = done >= cfg.schedule.warmup_epochs && done > 0;
    const auto single = singleton_labels(n);
    const auto mplp = ready ? predict_labels(t.bank(), {PredictorKind::kMplp, cfg.predictor.threshold, 0}, cfg.threads)
                            : single;
    const auto knn = ready ? predict_labels(t.bank(), {PredictorKind::kKnn, 0.0, options.knn_k}, cfg.threads) : single;
    const auto qm = mean_label_quality(mplp, ids);
    const auto qk = mean_label_quality(knn, ids);
    result.curve.push_back({done, "mplp", qm.precision, qm.recall});
    result.curve.push_back({done, "knn", qk.precision, qk.recall});
  };
  if (options.label_curve) curve_point(0, trainer);

  LabelQuality in_use = mean_label_quality(trainer.labels(), ids);
  trainer.train([&](const Trainer& t, const EpochStats& stats) {
    EpochRecord rec;
    rec.epoch = stats.epoch;
    rec.loss = stats.loss;
    rec.label_precision = in_use.precision;
    rec.label_recall = in_use.recall;
    rec.mean_positives = stats.mean_positives;
    const bool last = t.epochs_done() == cfg.schedule.epochs;
    if (options.per_epoch_eval || last) {
      const auto m = evaluate_embeddings(t.embed(), data);
      rec.rank1 = m.rank(1);
      rec.map = m.map;
      if (last) result.final_metrics = m;
    }
    result.log.push_back(rec);
    in_use = mean_label_quality(t.labels(), ids);
    if (options.label_curve) curve_point(t.epochs_done(), t);
  });

  result.model = trainer.model();
  result.bank = trainer.bank();
  result.labels = trainer.labels();
  return result;
}

std::string metrics_log_csv(std::span<const EpochRecord> log) {
  std::string out = "epoch,loss,label_precision,label_recall,rank1,mAP,mean_positives\n";
  for (const auto& r : log)
    out += std::to_string(r.epoch) + "," + format_real(r.loss) + "," + format_real(r.label_precision) + "," +
           format_real(r.label_recall) + "," + format_real(r.rank1) + "," + format_real(r.map) + "," +
           format_real(r.mean_positives) + "\n";
  return out;
}

std::string label_curve_csv(std::span<const LabelCurveRow> rows) {
  std::string out = "epoch,predictor,precision,recall\n";
  for (const auto& r : rows)
    out += std::to_string(r.epochs_done) + "," + r.predictor + "," + format_real(r.precision) + "," +
           format_real(r.recall) + "\n";
  return out;
}

void apply_param(TrainConfig& cfg, const std::string& param, double value) {
  if (param == "t") {
    cfg.predictor.threshold = value;
  } else if (param == "delta") {
    cfg.loss.delta = value;
  } else if (param == "r") {
    cfg.loss.hard_ratio = value;
  } else if (param == "K") {
    if (!(value >= 1.0) || value != static_cast<double>(static_cast<std::size_t>(value)))
      throw ConfigError("K must be a positive integer");
    cfg.predictor.kind = PredictorKind::kKnn;
    cfg.predictor.k = static_cast<std::size_t>(value);
  } else {
    throw ConfigError("unknown sweep parameter '" + param + "' (expected t, delta, r or K)");
  }
}

std::vector<SweepRow> sweep(const std::string& param, std::span<const double> grid, const TrainConfig& base,
                            std::span<const std::uint64_t> seeds) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (double v : grid) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      apply_param(cfg, param, v);
      const auto data = synthetic_for(cfg);
      const auto run = run_experiment(cfg, data, {.per_epoch_eval = false});
      rows.push_back({param, v, seed, run.final_metrics.rank(1), run.final_metrics.map});
    }
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "param,value,seed,rank1,mAP\n";
  for (const auto& r : rows)
    out += r.param + "," + format_real(r.value) + "," + std::to_string(r.seed) + "," + format_real(r.rank1) + "," +
           format_real(r.map) + "\n";
  return out;
}

std::vector<double> mean_rank1(std::span<const SweepRow> rows, std::span<const double> grid) {
  std::vector<double> out;
  for (double v : grid) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : rows)
      if (r.value == v) {
        sum += r.rank1;
        ++count;
      }
    out.push_back(count ? sum / static_cast<double>(count) : 0.0);
  }
  return out;
}

std::vector<AblationRow> ablation(const TrainConfig& base, const Dataset& data) {
  std::vector<AblationRow> rows;
  auto run = [&](const std::string& name, LossVariant loss, PredictorKind kind) {
    TrainConfig cfg = base;
    cfg.loss.variant = loss;
    cfg.predictor.kind = kind;
    if (kind == PredictorKind::kKnn) cfg.predictor.k = 8;
    const auto r = run_experiment(cfg, data, {.per_epoch_eval = false});
    if (rows.empty()) rows.push_back({"untrained", r.untrained.rank(1), r.untrained.map});
    rows.push_back({name, r.final_metrics.rank(1), r.final_metrics.map});
  };
  run("mmcl+single", LossVariant::kMmcl, PredictorKind::kSingle);
  run("mmcl+knn", LossVariant::kMmcl, PredictorKind::kKnn);
  run("mmcl+ss", LossVariant::kMmcl, PredictorKind::kSimilarityScore);
  run("mmcl+mplp", LossVariant::kMmcl, PredictorKind::kMplp);
  run("ce+single", LossVariant::kMemSoftmaxCe, PredictorKind::kSingle);
  run("ce+mplp", LossVariant::kMemSoftmaxCe, PredictorKind::kMplp);
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "method,rank1,mAP\n";
  for (const auto& r : rows) out += r.method + "," + format_real(r.rank1) + "," + format_real(r.map) + "\n";
  return out;
}

}  // namespace mmcl
