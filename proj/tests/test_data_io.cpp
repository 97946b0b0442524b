#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mmcl/config.hpp"
#include "mmcl/csv.hpp"
#include "mmcl/dataset.hpp"
#include "mmcl/experiments.hpp"
#include "mmcl/label_prediction.hpp"

using namespace mmcl;

namespace {

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mmcl_io_" + name);
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::size_t parse_error_line(const std::filesystem::path& p) {
  try {
    import_features(p);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("real formatting round trips") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g(0.0, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const double v = g(rng);
    CHECK(parse_real(format_real(v), "x", 1) == v);
  }
  CHECK(format_real(0.5) == "0.5");
  CHECK(join_reals(std::vector<double>{1, -2.25}) == "1,-2.25");
}

TEST_CASE("strict scalar parsers") {
  CHECK(parse_real(" 1e-3 ", "x", 1) == 1e-3);
  CHECK_THROWS_AS(parse_real("nan", "x", 4), ParseError);
  CHECK_THROWS_AS(parse_real("inf", "x", 4), ParseError);
  CHECK_THROWS_AS(parse_real("1.5abc", "x", 4), ParseError);
  CHECK_THROWS_AS(parse_real("", "x", 4), ParseError);
  CHECK(parse_int("-3", "x", 1) == -3);
  CHECK_THROWS_AS(parse_size("-3", "x", 1), ParseError);
  CHECK(split_csv("a, b,,c") == std::vector<std::string>{"a", "b", "", "c"});
}

TEST_CASE("atomic write leaves no temp file") {
  const auto p = scratch("atomic.txt");
  write_file_atomic(p, "hello\n");
  CHECK(read_lines(p) == std::vector<std::string>{"hello"});
  CHECK_FALSE(std::filesystem::exists(p.string() + ".tmp"));
  std::filesystem::remove(p);
}

TEST_CASE("synthetic generation") {
  SyntheticSpec spec;
  spec.identities = 2;
  spec.samples_per_identity = 2;
  spec.input_dim = 8;
  const auto d = generate(spec);
  CHECK(d.size() == 4);
  CHECK(d.dim() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(d.records()[i].index == i);
    CHECK(std::abs(norm(d.records()[i].observation) - 1.0) <= 1e-12);
  }
  CHECK(d.identities() == std::vector<int>{0, 0, 1, 1});
  CHECK_FALSE(d.has_cameras());
  CHECK(generate(spec) == d);
  spec.seed = 2;
  CHECK_FALSE(generate(spec) == d);
}

TEST_CASE("noise-free identities are exact copies and well separated") {
  SyntheticSpec spec;
  spec.identities = 10;
  spec.samples_per_identity = 3;
  spec.cluster_spread = 0.0;
  const auto d = generate(spec);
  const auto x = d.observations();
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double s = dot(x.row(i), x.row(j));
      if (d.identities()[i] == d.identities()[j])
        CHECK(s == doctest::Approx(1.0));
      else
        CHECK(s < spec.max_center_cosine);
    }
}

TEST_CASE("noise-free observations as memory give exact MPLP identity sets") {
  SyntheticSpec spec;
  spec.identities = 10;
  spec.samples_per_identity = 4;
  spec.cluster_spread = 0.0;
  const auto d = generate(spec);
  const auto x = d.observations();
  MemoryBank bank(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) bank.set_row(i, x.row(i));
  const auto labels = predict_labels(bank, {PredictorKind::kMplp, 0.6, 0});
  const auto ids = d.identities();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<std::size_t> expected;
    for (std::size_t j = 0; j < ids.size(); ++j)
      if (ids[j] == ids[i]) expected.push_back(j);
    CHECK(labels[i].positives() == expected);
  }
}

TEST_CASE("variable identity sizes") {
  SyntheticSpec spec;
  spec.samples_per_identity_list = {2, 5, 3};
  const auto d = generate(spec);
  CHECK(d.size() == 10);
  CHECK(d.identities() == std::vector<int>{0, 0, 1, 1, 1, 1, 1, 2, 2, 2});
}

TEST_CASE("synthetic dataset settings validation") {
  SyntheticSpec spec;
  spec.identities = 1;
  CHECK_THROWS_AS(generate(spec), ConfigError);
  spec = {};
  spec.samples_per_identity = 1;
  CHECK_THROWS_AS(generate(spec), ConfigError);
  spec = {};
  spec.samples_per_identity_list = {3, 1};
  CHECK_THROWS_AS(generate(spec), ConfigError);
  spec = {};
  spec.cluster_spread = -0.1;
  CHECK_THROWS_AS(generate(spec), ConfigError);
  // 20 mutually near-orthogonal directions do not fit in 2 dimensions.
  spec = {};
  spec.identities = 20;
  spec.input_dim = 2;
  spec.max_center_cosine = 0.0;
  spec.max_resample = 200;
  try {
    generate(spec);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cannot place") != std::string::npos);
  }
}

TEST_CASE("csv import") {
  const auto p = scratch("three.csv");
  write(p, "index,identity,camera,f_1,f_2\n0,4,1,0.6,0.8\n2,,,1,0\n1,4,2,0,2\n");
  const auto d = import_features(p);
  CHECK(d.size() == 3);
  CHECK(d.records()[1].observation == std::vector<double>{0.0, 1.0});
  CHECK(d.records()[0].identity == 4);
  CHECK_FALSE(d.records()[2].identity.has_value());
  CHECK_FALSE(d.has_identities());
  std::filesystem::remove(p);
}

TEST_CASE("csv import errors name the line") {
  const auto p = scratch("bad.csv");
  write(p, "index,identity,camera,f_1,f_2\n0,1,0,0.6,0.8\n1,1,0,nan,0.8\n");
  CHECK(parse_error_line(p) == 3);
  write(p, "index,identity,camera,f_1,f_2\n0,1,0,0.6,0.8\n1,1,0,0.8\n");
  CHECK(parse_error_line(p) == 3);
  write(p, "index,identity,camera,f_1,f_2\n0,1,0,0.6,0.8\n0,1,0,0.8,0.6\n");
  CHECK(parse_error_line(p) == 3);
  write(p, "index,identity,camera,f_1,f_2\n0,1,0,0.6,0.8\n2,1,0,0.8,0.6\n");
  CHECK(parse_error_line(p) == 3);
  write(p, "idx,f_1\n0,1\n");
  CHECK(parse_error_line(p) == 1);
  write(p, "index,identity,camera,f_1,f_2\n0,1,0,0,0\n");
  CHECK(parse_error_line(p) == 2);
  std::filesystem::remove(p);
}

TEST_CASE("json-lines import") {
  const auto p = scratch("rows.jsonl");
  write(p, "{\"index\":1,\"identity\":3,\"camera\":null,\"features\":[0,1]}\n"
           "{\"index\":0,\"identity\":2,\"features\":[3,4]}\n");
  const auto d = import_features(p);
  CHECK(d.size() == 2);
  CHECK(d.records()[0].observation[0] == doctest::Approx(0.6));
  CHECK(d.identities() == std::vector<int>{2, 3});
  write(p, "{\"index\":0,\"features\":[1,0]}\n{\"index\":1,\"features\":[1]}\n");
  CHECK(parse_error_line(p) == 2);
  write(p, "{\"index\":0,\"features\":[1,0]}\n{not json}\n");
  CHECK(parse_error_line(p) == 2);
  std::filesystem::remove(p);
}

TEST_CASE("export then import round trips") {
  SyntheticSpec spec;
  spec.identities = 4;
  spec.samples_per_identity = 3;
  spec.input_dim = 6;
  auto records = generate(spec).records();
  for (std::size_t i = 0; i < records.size(); ++i) records[i].camera = static_cast<int>(i % 2);
  const Dataset d(records);
  for (auto fmt : {FeatureFormat::kCsv, FeatureFormat::kJsonLines}) {
    const auto p = scratch(fmt == FeatureFormat::kCsv ? "rt.csv" : "rt.jsonl");
    export_features(d, p, fmt);
    const auto back = import_features(p);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back.records()[i].identity == d.records()[i].identity);
      CHECK(back.records()[i].camera == d.records()[i].camera);
      for (std::size_t k = 0; k < d.dim(); ++k)
        CHECK(std::abs(back.records()[i].observation[k] - d.records()[i].observation[k]) <= 1e-12);
    }
    std::filesystem::remove(p);
  }
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config("# comment\nseed = 9\nloss.delta = 3 # trailing\n\npredictor.kind = knn\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.loss.delta == 3.0);
  CHECK(cfg.predictor.kind == PredictorKind::kKnn);
  CHECK(cfg.schedule.epochs == TrainConfig::defaults().schedule.epochs);

  try {
    parse_config("seed = 1\ntrain.epoch = 4\n", "cfg.txt");
    FAIL("expected rejection of an unknown key");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("train.epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("seed 4\n"), ParseError);
  CHECK_THROWS_AS(parse_config("train.lr = fast\n"), ParseError);
  CHECK_THROWS_AS(parse_config("loss.variant = hinge\n"), ParseError);
}

TEST_CASE("config text round trips") {
  TrainConfig cfg = TrainConfig::defaults();
  cfg.seed = 77;
  cfg.schedule.lr = 0.125;
  cfg.loss.variant = LossVariant::kMemSoftmaxCe;
  cfg.augment.drop = 0.2;
  const auto back = parse_config(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
}

TEST_CASE("config validation") {
  TrainConfig cfg = TrainConfig::defaults();
  CHECK_NOTHROW(cfg.validate(256));
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);  // batch larger than data
  cfg.predictor.threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(256), ConfigError);
  cfg = TrainConfig::defaults();
  cfg.schedule.alpha_end = 1.5;
  CHECK_THROWS_AS(cfg.validate(256), ConfigError);
  cfg = TrainConfig::defaults();
  cfg.augment.drop = 1.0;
  CHECK_THROWS_AS(cfg.validate(256), ConfigError);
  cfg = TrainConfig::defaults();
  cfg.predictor.kind = PredictorKind::kKnn;
  cfg.predictor.k = 300;
  CHECK_THROWS_AS(cfg.validate(256), ConfigError);
}

TEST_CASE("sweep parameters") {
  TrainConfig cfg = TrainConfig::defaults();
  apply_param(cfg, "t", 0.3);
  CHECK(cfg.predictor.threshold == 0.3);
  apply_param(cfg, "delta", 2);
  CHECK(cfg.loss.delta == 2.0);
  apply_param(cfg, "r", 50);
  CHECK(cfg.loss.hard_ratio == 50.0);
  apply_param(cfg, "K", 4);
  CHECK(cfg.predictor.kind == PredictorKind::kKnn);
  CHECK(cfg.predictor.k == 4);
  CHECK_THROWS_AS(apply_param(cfg, "K", 2.5), ConfigError);
  CHECK_THROWS_AS(apply_param(cfg, "lr", 1), ConfigError);
}

TEST_CASE("small sweep and label curve") {
  TrainConfig cfg = TrainConfig::defaults();
  cfg.data.identities = 5;
  cfg.data.samples_per_identity = 4;
  cfg.data.input_dim = 10;
  cfg.model.embed_dim = 6;
  cfg.model.hidden_dim = 8;
  cfg.schedule.epochs = 6;
  cfg.schedule.warmup_epochs = 2;
  cfg.schedule.batch_size = 10;
  const std::vector<double> grid{1, 5};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto rows = sweep("delta", grid, cfg, seeds);
  CHECK(rows.size() == 4);
  const auto csv = sweep_csv(rows);
  CHECK(csv.rfind("param,value,seed,rank1,mAP\n", 0) == 0);
  CHECK(mean_rank1(rows, grid).size() == 2);
  CHECK_THROWS_AS(sweep("delta", std::vector<double>{}, cfg, seeds), ConfigError);

  const auto data = synthetic_for(cfg);
  const auto run = run_experiment(cfg, data, {.per_epoch_eval = true, .label_curve = true, .knn_k = 4});
  CHECK(run.log.size() == 6);
  CHECK(run.curve.size() == 2 * 7);
  // Before warmup ends both predictors report singleton labels.
  for (const auto& row : run.curve)
    if (row.epochs_done < cfg.schedule.warmup_epochs) {
      CHECK(row.precision == 1.0);
      CHECK(row.recall == doctest::Approx(0.25));
    }
  CHECK(label_curve_csv(run.curve).rfind("epoch,predictor,precision,recall\n", 0) == 0);
  CHECK(metrics_log_csv(run.log).rfind("epoch,loss,label_precision,label_recall,rank1,mAP,mean_positives\n", 0) == 0);
}

TEST_CASE("noise-free clusters give full MPLP recall late in training") {
  TrainConfig cfg = TrainConfig::defaults();
  cfg.data.identities = 8;
  cfg.data.samples_per_identity = 4;
  cfg.data.cluster_spread = 0.0;
  cfg.augment.sigma = 0.0;
  cfg.schedule.epochs = 10;
  cfg.schedule.batch_size = 16;
  const auto data = synthetic_for(cfg);
  const auto run = run_experiment(cfg, data, {.per_epoch_eval = false, .label_curve = true});
  const auto& last = run.curve[run.curve.size() - 2];
  CHECK(last.predictor == "mplp");
  CHECK(last.recall == doctest::Approx(1.0));
  CHECK(last.precision > 0.5);
}
