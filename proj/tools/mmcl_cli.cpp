#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mmcl/config.hpp"
#include "mmcl/csv.hpp"
#include "mmcl/dataset.hpp"
#include "mmcl/evaluation.hpp"
#include "mmcl/experiments.hpp"
#include "mmcl/label_prediction.hpp"
#include "mmcl/losses.hpp"
#include "mmcl/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmcl;

namespace {

struct Common {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "config file, or 'default'");
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--out", c.out, "output directory (default: $MMCL_OUT_DIR or .)");
}

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg = c.config == "default" ? TrainConfig::defaults() : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::path dir = ".";
  if (const char* env = std::getenv("MMCL_OUT_DIR"); env && *env) dir = env;
  if (!c.out.empty()) dir = c.out;
  fs::create_directories(dir);
  return dir;
}

void emit_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

void note(const std::string& what, const fs::path& path) { std::cout << what << ": " << path.string() << '\n'; }

Dataset load_or_generate(const std::string& path, const TrainConfig& cfg) {
  return path.empty() ? synthetic_for(cfg) : import_features(path);
}

std::string metrics_json(const MetricsReport& m, const std::vector<std::pair<std::string, double>>& extra = {}) {
  auto j = nlohmann::json::parse(summary_json(m));
  for (const auto& [k, v] : extra) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label memory contrastive learning toolkit"};
  app.require_subcommand(1);

  Common gen_c, train_c, pred_c, eval_c, grad_c, sweep_c;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(gen, gen_c);
  std::string gen_format = "csv";
  gen->add_option("--format", gen_format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  auto* train = app.add_subcommand("train", "train an embedding model and memory");
  add_common(train, train_c);
  std::string train_data;
  bool train_curve = false;
  train->add_option("--data", train_data, "feature file (default: synthetic data from the config)");
  train->add_flag("--label-curve", train_curve, "also write MPLP vs KNN label quality per epoch");

  auto* pred = app.add_subcommand("predict-labels", "predict multi-labels from a memory snapshot");
  add_common(pred, pred_c);
  std::string pred_bank, pred_data, pred_kind;
  std::optional<double> pred_t;
  std::optional<std::size_t> pred_k;
  pred->add_option("--bank", pred_bank, "memory snapshot CSV")->required();
  pred->add_option("--predictor", pred_kind, "mplp, knn, ss or single");
  pred->add_option("--threshold", pred_t, "similarity threshold");
  pred->add_option("--k", pred_k, "neighbour count");
  pred->add_option("--data", pred_data, "dataset with identities, for label quality");

  auto* ev = app.add_subcommand("eval", "leave-one-out retrieval metrics");
  add_common(ev, eval_c);
  std::string eval_data, eval_model;
  ev->add_option("--data", eval_data, "feature file with identities")->required();
  ev->add_option("--model", eval_model, "model JSON applied before retrieval");

  auto* grad = app.add_subcommand("grad-sweep", "gradient magnitude against score");
  add_common(grad, grad_c);
  std::vector<double> taus{1.0, 0.1}, deltas{1.0, 5.0};
  double step = 0.01;
  grad->add_option("--tau", taus, "MCL temperatures");
  grad->add_option("--delta", deltas, "MMCL positive weights");
  grad->add_option("--step", step, "score grid step");

  auto* sw = app.add_subcommand("param-sweep", "hyper-parameter sweep or method ablation");
  add_common(sw, sweep_c);
  std::string sweep_param;
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> sweep_seeds;
  sw->add_option("--param", sweep_param, "t, delta, r or K")->check(CLI::IsMember({"t", "delta", "r", "K"}));
  sw->add_option("--values", sweep_values, "grid values");
  sw->add_option("--seeds", sweep_seeds, "seeds (default: the run seed)");
  bool sweep_ablation = false;
  sw->add_flag("--ablation", sweep_ablation, "compare loss and predictor variants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return 2;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = resolve_config(gen_c);
      const auto data = synthetic_for(cfg);
      const bool jsonl = gen_format == "jsonl";
      const auto path = out_dir(gen_c) / (jsonl ? "dataset.jsonl" : "dataset.csv");
      export_features(data, path, jsonl ? FeatureFormat::kJsonLines : FeatureFormat::kCsv);
      note("dataset", path);
    } else if (train->parsed()) {
      const auto cfg = resolve_config(train_c);
      const auto data = load_or_generate(train_data, cfg);
      const auto dir = out_dir(train_c);
      write_file_atomic(dir / "config.txt", cfg.to_text());
      if (data.has_identities()) {
        const auto run = run_experiment(cfg, data, {.per_epoch_eval = true, .label_curve = train_curve});
        save_model(run.model, dir / "model.json");
        save_bank(run.bank, dir / "bank.csv");
        save_labels(run.labels, dir / "labels.csv");
        write_file_atomic(dir / "metrics.csv", metrics_log_csv(run.log));
        write_file_atomic(dir / "summary.json", metrics_json(run.final_metrics, {{"untrained_rank1", run.untrained.rank(1)}}));
        if (train_curve) write_file_atomic(dir / "label_curve.csv", label_curve_csv(run.curve));
        std::cout << "rank1 " << format_real(run.final_metrics.rank(1)) << " mAP " << format_real(run.final_metrics.map)
                  << '\n';
      } else {
        // No identities: train only, log losses.
        Trainer t(cfg, data.observations());
        std::vector<EpochRecord> log;
        t.train([&](const Trainer&, const EpochStats& s) {
          log.push_back({.epoch = s.epoch, .loss = s.loss, .mean_positives = s.mean_positives});
        });
        save_model(t.model(), dir / "model.json");
        save_bank(t.bank(), dir / "bank.csv");
        save_labels(t.labels(), dir / "labels.csv");
        write_file_atomic(dir / "metrics.csv", metrics_log_csv(log));
      }
      note("artifacts", dir);
    } else if (pred->parsed()) {
      auto cfg = resolve_config(pred_c);
      Predictor p = cfg.predictor;
      if (!pred_kind.empty()) p.kind = parse_predictor_kind(pred_kind);
      if (pred_t) p.threshold = *pred_t;
      if (pred_k) p.k = *pred_k;
      const auto bank = load_bank(pred_bank);
      const auto labels = predict_labels(bank, p, cfg.threads);
      const auto path = out_dir(pred_c) / "labels.csv";
      save_labels(labels, path);
      if (!pred_data.empty()) {
        const auto data = import_features(pred_data);
        if (!data.has_identities()) throw ConfigError(pred_data + ": no identities for label quality");
        if (data.size() != bank.size()) throw ConfigError("dataset and bank sizes differ");
        const auto ids = data.identities();
        const auto q = mean_label_quality(labels, ids);
        std::cout << "precision " << format_real(q.precision) << " recall " << format_real(q.recall) << '\n';
      }
      note("labels", path);
    } else if (ev->parsed()) {
      resolve_config(eval_c);
      const auto data = import_features(eval_data);
      if (!data.has_identities()) throw ConfigError(eval_data + ": evaluation needs identities");
      Matrix feats = data.observations();
      if (!eval_model.empty()) feats = embed_all(load_model(eval_model), feats);
      const auto m = evaluate_embeddings(feats, data);
      const auto dir = out_dir(eval_c);
      write_file_atomic(dir / "summary.json", metrics_json(m));
      write_file_atomic(dir / "cmc.csv", cmc_csv(m));
      std::cout << "rank1 " << format_real(m.rank(1)) << " mAP " << format_real(m.map) << '\n';
      note("summary", dir / "summary.json");
    } else if (grad->parsed()) {
      resolve_config(grad_c);
      const auto rows = gradient_sweep(taus, deltas, score_grid(step));
      const auto path = out_dir(grad_c) / "grad_sweep.csv";
      write_file_atomic(path, sweep_to_csv(rows));
      note("sweep", path);
    } else if (sw->parsed()) {
      const auto cfg = resolve_config(sweep_c);
      const auto dir = out_dir(sweep_c);
      if (sweep_ablation) {
        const auto rows = ablation(cfg, synthetic_for(cfg));
        write_file_atomic(dir / "ablation.csv", ablation_csv(rows));
        note("ablation", dir / "ablation.csv");
      }
      if (!sweep_param.empty()) {
        if (sweep_values.empty()) throw ConfigError("--values is required with --param");
        if (sweep_seeds.empty()) sweep_seeds.push_back(cfg.seed);
        const auto rows = sweep(sweep_param, sweep_values, cfg, sweep_seeds);
        const auto path = dir / ("sweep_" + sweep_param + ".csv");
        write_file_atomic(path, sweep_csv(rows));
        note("sweep", path);
      } else if (!sweep_ablation) {
        throw ConfigError("nothing to do: give --param with --values, or --ablation");
      }
    }
  } catch (const ParseError& e) {
    emit_error("parse", e.what());
    return 1;
  } catch (const ConfigError& e) {
    emit_error("config", e.what());
    return 1;
  } catch (const NumericError& e) {
    emit_error("numeric", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
  return 0;
}
