#include <doctest.h>

#include <cmath>
#include <random>

#include "mmcl/losses.hpp"
#include "oracles.hpp"

using namespace mmcl;

namespace {

struct Instance {
  MemoryBank bank;
  Matrix features;
  std::vector<MultiLabel> labels;
};

// Random unit bank, unit batch features and labels with 1 to n/2 positives.
Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t batch) {
  Instance in{MemoryBank(n, d), Matrix(batch, d), {}};
  for (std::size_t i = 0; i < n; ++i) in.bank.set_row(i, oracle::random_unit(rng, d));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1), size(1, n / 2);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto f = oracle::random_unit(rng, d);
    std::copy(f.begin(), f.end(), in.features.row(b).begin());
    std::vector<std::size_t> pos;
    const std::size_t want = size(rng);
    while (pos.size() + 1 < want) pos.push_back(pick(rng));
    in.labels.emplace_back(pick(rng), pos, n);
  }
  return in;
}

double fd_check(const Instance& in, const LossConfig& cfg) {
  const auto report = compute_loss(in.features, in.labels, in.bank, cfg);
  auto value_at = [&](const std::vector<double>& flat) {
    Matrix f(in.features.rows(), in.features.cols());
    f.data() = flat;
    return compute_loss(f, in.labels, in.bank, cfg).value;
  };
  const auto numeric = oracle::numeric_grad(value_at, in.features.data());
  return oracle::rel_error(report.grad.data(), numeric);
}

}  // namespace

TEST_CASE("logistic class loss values") {
  CHECK(mcl_class_loss(0.0, 1.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(mcl_class_loss(0.0, 1.0, 0.1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(mcl_class_loss(1.0, 1.0, 1.0) == doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(mcl_class_loss(1.0, 1.0, 0.1) == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-12));
  CHECK(mcl_class_loss(1.0, 1.0, 0.1) == doctest::Approx(4.54e-5).epsilon(1e-3));
  // Large arguments stay finite.
  CHECK(mcl_class_loss(-1.0, 1.0, 1e-3) == doctest::Approx(1000.0));
  CHECK(mcl_class_loss(1.0, 1.0, 1e-3) >= 0.0);
  CHECK_THROWS_AS(mcl_class_loss(0.5, 1.0, 0.0), ConfigError);
}

TEST_CASE("squared-error class loss values") {
  CHECK(mmcl_class_loss(1.0, 1.0) == 0.0);
  CHECK(mmcl_class_loss(0.0, -1.0) == 1.0);
  CHECK(mmcl_class_loss(-0.5, 1.0) == 2.25);
}

TEST_CASE("hard negative count") {
  CHECK(hard_negative_count(200, 4, 1.0) == 1);
  CHECK(hard_negative_count(256, 1, 1.0) == 2);
  CHECK(hard_negative_count(10, 2, 1.0) == 1);  // min-1 rule
  CHECK(hard_negative_count(10, 2, 100.0) == 8);
  CHECK(hard_negative_count(307, 7, 7.0) == 21);
  CHECK_THROWS_AS(hard_negative_count(5, 5, 1.0), PreconditionError);
  CHECK_THROWS_AS(hard_negative_count(5, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(hard_negative_count(5, 1, 100.5), ConfigError);
}

TEST_CASE("hard negative mining equals sort-exclude-take") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> nd(2, 120);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = nd(rng);
    std::vector<double> scores(n);
    // Coarse values force ties.
    for (double& s : scores) s = trial % 3 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
    std::vector<std::size_t> pos;
    for (std::size_t j = 0; j < n / 3; ++j) pos.push_back(static_cast<std::size_t>((u(rng) + 1.0) / 2.0 * n) % n);
    const MultiLabel label(trial % n, pos, n);
    const double r = std::vector<double>{1, 5, 12.5, 50, 100}[trial % 5];
    const auto got = mine_hard_negatives(scores, label, r);
    CHECK(got == oracle::hard_negatives(scores, oracle::as_set(label), r));
    for (std::size_t j : got) CHECK_FALSE(label.contains(j));
  }
  CHECK_THROWS_AS(mine_hard_negatives(std::vector<double>{0.1, 0.2}, MultiLabel(0, {1}, 2), 10.0), PreconditionError);
}

TEST_CASE("r = 100 keeps every negative") {
  const std::vector<double> s{0.3, -0.2, 0.9, 0.1};
  const auto got = mine_hard_negatives(s, MultiLabel(2, {}, 4), 100.0);
  CHECK(got == std::vector<std::size_t>{0, 3, 1});
}

TEST_CASE("MMCL at the optimum and at score zero") {
  MemoryBank bank(2, 2);
  bank.set_row(0, std::vector<double>{1, 0});
  bank.set_row(1, std::vector<double>{-1, 0});
  Matrix f(1, 2);
  f(0, 0) = 1.0;
  LossConfig cfg;
  cfg.hard_ratio = 100;
  const auto at_opt = mmcl_loss(f, std::vector{MultiLabel::singleton(0, 2)}, bank, cfg);
  CHECK(at_opt.value == 0.0);
  CHECK(at_opt.grad(0, 0) == 0.0);
  CHECK(at_opt.grad(0, 1) == 0.0);
  CHECK(at_opt.hard_negatives[0] == std::vector<std::size_t>{1});

  // Every class positive: only the positive term, 5 * (0 - 1)^2.
  MemoryBank one(1, 2);
  one.set_row(0, std::vector<double>{1, 0});
  Matrix g(1, 2);
  g(0, 1) = 1.0;
  const auto r = mmcl_loss(g, std::vector{MultiLabel::singleton(0, 1)}, one, cfg);
  CHECK(r.value == doctest::Approx(5.0));
  CHECK(r.grad(0, 0) == doctest::Approx(-10.0));
  CHECK(r.grad(0, 1) == 0.0);
}

TEST_CASE("MMCL weights and batch mean") {
  // Two positives share delta, two mined negatives share 1.
  MemoryBank bank(5, 2);
  const std::vector<std::vector<double>> rows{{1, 0}, {0.6, 0.8}, {0, 1}, {-0.6, 0.8}, {-1, 0}};
  for (std::size_t i = 0; i < 5; ++i) bank.set_row(i, rows[i]);
  Matrix f(2, 2);
  f(0, 0) = 1.0;
  f(1, 1) = 1.0;
  LossConfig cfg;
  cfg.delta = 3.0;
  cfg.hard_ratio = 100.0 * 2.0 / 3.0 + 1e-6;  // two of three negatives
  const std::vector labels{MultiLabel(0, {1}, 5), MultiLabel::singleton(2, 5)};
  const auto r = mmcl_loss(f, labels, bank, cfg);
  // Sample 0: scores 1, 0.6 | negatives 0 (idx 2), -0.6, -1 -> mined {2, 3}.
  const double s0 = 1.5 * (0.0 + 0.16) + 0.5 * (1.0 + 0.16);
  // Sample 1: scores 0, 0.8, 1, 0.8, 0 | positive {2}; 4 negatives, floor(2.67)=2 -> {1, 3}.
  const double s1 = 3.0 * 0.0 + 0.5 * (3.24 + 3.24);
  CHECK(r.value == doctest::Approx((s0 + s1) / 2.0).epsilon(1e-12));
  CHECK(r.hard_negatives[0] == std::vector<std::size_t>{2, 3});
  CHECK(r.hard_negatives[1] == std::vector<std::size_t>{1, 3});
}

TEST_CASE("logistic gradient at score 0 and 0.9") {
  MemoryBank bank(2, 2);
  bank.set_row(0, std::vector<double>{1, 0});
  bank.set_row(1, std::vector<double>{0, 1});
  Matrix f(1, 2);
  f(0, 1) = 1.0;  // score 0 against class 0
  LossConfig cfg;
  cfg.variant = LossVariant::kMcl;
  const auto r = compute_loss(f, std::vector{MultiLabel::singleton(0, 2)}, bank, cfg);
  // Class 0 (y=+1, s=0) contributes -0.5 * e1; class 1 (y=-1, s=1) contributes sigma(1) * e2.
  CHECK(r.grad(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(r.grad(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(mcl_tau_grad_magnitude(0.9, 1.0) == doctest::Approx(0.28905).epsilon(1e-5));
}

TEST_CASE("softmax cross-entropy values") {
  MemoryBank bank(2, 2);
  bank.set_row(0, std::vector<double>{1, 0});
  bank.set_row(1, std::vector<double>{1, 0});
  Matrix f(1, 2);
  f(0, 0) = 0.3;
  f(0, 1) = 0.9;
  LossConfig cfg;
  cfg.variant = LossVariant::kMemSoftmaxCe;
  cfg.tau = 0.5;
  CHECK(compute_loss(f, std::vector{MultiLabel::singleton(0, 2)}, bank, cfg).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  MemoryBank sep(2, 2);
  sep.set_row(0, std::vector<double>{1, 0});
  sep.set_row(1, std::vector<double>{-1, 0});
  Matrix g(1, 2);
  g(0, 0) = 1.0;
  double prev = 1e9;
  for (double tau : {1.0, 0.1, 0.01}) {
    cfg.tau = tau;
    const double v = compute_loss(g, std::vector{MultiLabel::singleton(0, 2)}, sep, cfg).value;
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-80);
  cfg.tau = 0.0;
  CHECK_THROWS_AS(compute_loss(g, std::vector{MultiLabel::singleton(0, 2)}, sep, cfg), ConfigError);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(rng, 8 + trial * 2, 3 + trial % 6, 4);
    for (auto [variant, tau] : {std::pair{LossVariant::kMmcl, 1.0}, {LossVariant::kMcl, 1.0},
                                {LossVariant::kMclTau, 0.1}, {LossVariant::kMclTau, 1.0},
                                {LossVariant::kMemSoftmaxCe, 0.1}}) {
      LossConfig cfg;
      cfg.variant = variant;
      cfg.tau = tau;
      cfg.hard_ratio = trial % 2 ? 100.0 : 20.0;
      CAPTURE(to_string(variant));
      CHECK(fd_check(in, cfg) <= 1e-6);
    }
  }
}

TEST_CASE("losses are non-negative with finite gradients") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 12, 5, 6);
    for (auto v : {LossVariant::kMmcl, LossVariant::kMcl, LossVariant::kMclTau, LossVariant::kMemSoftmaxCe}) {
      LossConfig cfg;
      cfg.variant = v;
      const auto r = compute_loss(in.features, in.labels, in.bank, cfg);
      CHECK(r.value >= 0.0);
      CHECK(all_finite(r.grad.data()));
      for (std::size_t b = 0; b < in.labels.size(); ++b)
        for (std::size_t j : r.hard_negatives[b]) CHECK_FALSE(in.labels[b].contains(j));
    }
  }
}

TEST_CASE("batch shape errors") {
  std::mt19937_64 rng(34);
  const auto in = random_instance(rng, 6, 3, 2);
  LossConfig cfg;
  CHECK_THROWS_AS(compute_loss(Matrix(2, 4), in.labels, in.bank, cfg), ConfigError);
  CHECK_THROWS_AS(compute_loss(in.features, std::vector{in.labels[0]}, in.bank, cfg), ConfigError);
  CHECK_THROWS_AS(compute_loss(Matrix(0, 3), {}, in.bank, cfg), ConfigError);
  cfg.delta = 0.5;
  CHECK_THROWS_AS(compute_loss(in.features, in.labels, in.bank, cfg), ConfigError);
}

TEST_CASE("config validation and names") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.hard_ratio = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  for (auto v : {LossVariant::kMcl, LossVariant::kMclTau, LossVariant::kMmcl, LossVariant::kMemSoftmaxCe})
    CHECK(parse_loss_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_loss_variant("triplet"), ConfigError);
}

TEST_CASE("gradient magnitude sweep") {
  CHECK(mmcl_grad_magnitude(0.9, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mmcl_grad_magnitude(-1.0, 5.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(mcl_tau_grad_magnitude(0.5, 0.1) == doctest::Approx(10.0 * std::exp(-5.0) / (1.0 + std::exp(-5.0))));
  CHECK(mcl_tau_grad_magnitude(0.5, 0.1) == doctest::Approx(0.0669).epsilon(1e-3));

  const auto grid = score_grid(0.01);
  CHECK(grid.size() == 201);
  CHECK(grid.front() == -1.0);
  CHECK(grid.back() == 1.0);
  CHECK(grid[100] == 0.0);
  CHECK_THROWS_AS(score_grid(0.0), ConfigError);

  const std::vector<double> taus{1.0, 0.1}, deltas{1.0, 5.0};
  const auto rows = gradient_sweep(taus, deltas, grid);
  CHECK(rows.size() == 4 * 201);
  const auto csv = sweep_to_csv(rows);
  CHECK(csv.rfind("variant,param,score,grad_magnitude\n", 0) == 0);
  CHECK(csv.find("MCL-tau,0.1,") != std::string::npos);
  CHECK(csv.find("MMCL,5,") != std::string::npos);
  CHECK_THROWS_AS(gradient_sweep(taus, deltas, std::vector<double>{}), ConfigError);
}

TEST_CASE("squared-error gradient is affine in the residual") {
  for (double delta : {1.0, 2.0, 5.0}) {
    for (double s = -1.0; s < 1.0; s += 0.125) {
      CHECK(mmcl_grad_magnitude(s, delta) == doctest::Approx(2.0 * delta * (1.0 - s)));
      CHECK(mmcl_grad_magnitude(s, delta) > 0.0);
    }
  }
}
