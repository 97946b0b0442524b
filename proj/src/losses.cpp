#include "mmcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmcl/csv.hpp"

namespace mmcl {

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "mcl") return LossVariant::kMcl;
  if (name == "mcl_tau") return LossVariant::kMclTau;
  if (name == "mmcl") return LossVariant::kMmcl;
  if (name == "ce") return LossVariant::kMemSoftmaxCe;
  throw ConfigError("unknown loss '" + name + "' (expected mcl, mcl_tau, mmcl or ce)");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kMcl: return "mcl";
    case LossVariant::kMclTau: return "mcl_tau";
    case LossVariant::kMmcl: return "mmcl";
    case LossVariant::kMemSoftmaxCe: return "ce";
  }
  return "?";
}

void LossConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1], got " + format_real(tau));
  if (!(delta >= 1.0) || !std::isfinite(delta)) throw ConfigError("delta must be >= 1, got " + format_real(delta));
  if (!(hard_ratio > 0.0 && hard_ratio <= 100.0))
    throw ConfigError("hard negative ratio must lie in (0, 100], got " + format_real(hard_ratio));
}

namespace {

// log(1 + e^x)
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// 1 / (1 + e^-x)
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_batch(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank) {
  if (features.rows() == 0) throw ConfigError("empty feature batch");
  if (features.cols() != bank.dim())
    throw ConfigError("feature dimension " + std::to_string(features.cols()) + " != bank dimension " +
                      std::to_string(bank.dim()));
  if (labels.size() != features.rows())
    throw ConfigError("batch has " + std::to_string(features.rows()) + " features but " +
                      std::to_string(labels.size()) + " labels");
  for (const auto& l : labels)
    if (l.classes() != bank.size())
      throw ConfigError("label over " + std::to_string(l.classes()) + " classes, bank has " +
                        std::to_string(bank.size()) + " rows");
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

void finish(LossReport& report, std::size_t batch) {
  const double inv = 1.0 / static_cast<double>(batch);
  report.value *= inv;
  for (double& g : report.grad.data()) g *= inv;
  if (!std::isfinite(report.value) || !all_finite(report.grad.data()))
    throw NumericError("loss or gradient is not finite");
}

}  // namespace

double mcl_class_loss(double score, double y, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive, got " + format_real(tau));
  return softplus(-y * score / tau);
}

double mmcl_class_loss(double score, double y) { return (score - y) * (score - y); }

std::size_t hard_negative_count(std::size_t n, std::size_t positives, double ratio) {
  if (positives >= n) throw PreconditionError("no negative classes to mine (all classes positive)");
  if (!(ratio > 0.0 && ratio <= 100.0))
    throw ConfigError("hard negative ratio must lie in (0, 100], got " + format_real(ratio));
  const std::size_t negatives = n - positives;
  // The small slack keeps exact products like 300 * 7 / 100 from flooring to 20.
  const double raw = static_cast<double>(negatives) * ratio / 100.0;
  auto count = static_cast<std::size_t>(std::floor(raw + 1e-9));
  return std::clamp<std::size_t>(count, 1, negatives);
}

std::vector<std::size_t> mine_hard_negatives(std::span<const double> scores, const MultiLabel& label,
                                             double ratio) {
  if (scores.size() != label.classes())
    throw ConfigError("score vector length " + std::to_string(scores.size()) + " != class count " +
                      std::to_string(label.classes()));
  const std::size_t count = hard_negative_count(scores.size(), label.positives().size(), ratio);
  std::vector<std::size_t> neg;
  neg.reserve(scores.size() - label.positives().size());
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (!label.contains(j)) neg.push_back(j);
  auto before = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(count), neg.end(), before);
  neg.resize(count);
  return neg;
}

LossReport mmcl_loss(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank,
                     const LossConfig& cfg) {
  cfg.validate();
  check_batch(features, labels, bank);
  LossReport report;
  report.grad = Matrix(features.rows(), features.cols());
  report.hard_negatives.resize(features.rows());

  for (std::size_t b = 0; b < features.rows(); ++b) {
    const auto& label = labels[b];
    const auto scores = bank.score(features.row(b));
    auto grad = report.grad.row(b);

    const double wp = cfg.delta / static_cast<double>(label.positives().size());
    for (std::size_t p : label.positives()) {
      const double r = scores[p] - 1.0;
      report.value += wp * r * r;
      axpy(2.0 * wp * r, bank.row(p), grad);
    }
    // A bank where every class is positive has nothing to mine; only the
    // positive term remains.
    if (label.positives().size() < bank.size()) {
      auto negs = mine_hard_negatives(scores, label, cfg.hard_ratio);
      const double wn = 1.0 / static_cast<double>(negs.size());
      for (std::size_t s : negs) {
        const double r = scores[s] + 1.0;
        report.value += wn * r * r;
        axpy(2.0 * wn * r, bank.row(s), grad);
      }
      report.hard_negatives[b] = std::move(negs);
    }
  }
  finish(report, features.rows());
  return report;
}

LossReport mcl_tau_loss(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank,
                        const LossConfig& cfg) {
  cfg.validate();
  check_batch(features, labels, bank);
  LossReport report;
  report.grad = Matrix(features.rows(), features.cols());
  report.hard_negatives.resize(features.rows());
  const double tau = cfg.variant == LossVariant::kMcl ? 1.0 : cfg.tau;

  for (std::size_t b = 0; b < features.rows(); ++b) {
    const auto& label = labels[b];
    const auto scores = bank.score(features.row(b));
    auto grad = report.grad.row(b);
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const double y = label.sign(j);
      const double x = -y * scores[j] / tau;
      report.value += softplus(x);
      axpy(-sigmoid(x) * y / tau, bank.row(j), grad);
    }
  }
  finish(report, features.rows());
  return report;
}

LossReport mem_softmax_ce_loss(const Matrix& features, std::span<const MultiLabel> labels,
                               const MemoryBank& bank, const LossConfig& cfg) {
  cfg.validate();
  check_batch(features, labels, bank);
  LossReport report;
  report.grad = Matrix(features.rows(), features.cols());
  report.hard_negatives.resize(features.rows());
  const double tau = cfg.tau;

  std::vector<double> prob(bank.size());
  for (std::size_t b = 0; b < features.rows(); ++b) {
    const auto& label = labels[b];
    const auto scores = bank.score(features.row(b));
    auto grad = report.grad.row(b);

    const double zmax = *std::max_element(scores.begin(), scores.end()) / tau;
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      prob[j] = std::exp(scores[j] / tau - zmax);
      sum += prob[j];
    }
    const double lse = zmax + std::log(sum);
    for (double& p : prob) p /= sum;

    const double q = 1.0 / static_cast<double>(label.positives().size());
    for (std::size_t p : label.positives()) report.value -= q * (scores[p] / tau - lse);
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const double target = label.contains(j) ? q : 0.0;
      axpy((prob[j] - target) / tau, bank.row(j), grad);
    }
  }
  finish(report, features.rows());
  return report;
}

LossReport compute_loss(const Matrix& features, std::span<const MultiLabel> labels, const MemoryBank& bank,
                        const LossConfig& cfg) {
  switch (cfg.variant) {
    case LossVariant::kMmcl: return mmcl_loss(features, labels, bank, cfg);
    case LossVariant::kMcl:
    case LossVariant::kMclTau: return mcl_tau_loss(features, labels, bank, cfg);
    case LossVariant::kMemSoftmaxCe: return mem_softmax_ce_loss(features, labels, bank, cfg);
  }
  throw ConfigError("unhandled loss variant");
}

double mcl_tau_grad_magnitude(double score, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive, got " + format_real(tau));
  return sigmoid(-score / tau) / tau;
}

double mmcl_grad_magnitude(double score, double delta) { return std::abs(2.0 * delta * (score - 1.0)); }

std::vector<double> score_grid(double step) {
  if (!(step > 0.0 && step <= 2.0)) throw ConfigError("score grid step must lie in (0, 2], got " + format_real(step));
  const auto intervals = static_cast<long>(std::llround(2.0 / step));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(intervals) + 1);
  // (2k - K) / K keeps grid points like 0.9 exact instead of accumulating step.
  for (long k = 0; k <= intervals; ++k)
    grid.push_back(static_cast<double>(2 * k - intervals) / static_cast<double>(intervals));
  return grid;
}

std::vector<SweepPoint> gradient_sweep(std::span<const double> taus, std::span<const double> deltas,
                                       std::span<const double> scores) {
  if (scores.empty()) throw ConfigError("gradient sweep needs a non-empty score grid");
  std::vector<SweepPoint> out;
  out.reserve((taus.size() + deltas.size()) * scores.size());
  for (double tau : taus)
    for (double s : scores) out.push_back({"MCL-tau", tau, s, mcl_tau_grad_magnitude(s, tau)});
  for (double delta : deltas)
    for (double s : scores) out.push_back({"MMCL", delta, s, mmcl_grad_magnitude(s, delta)});
  return out;
}

std::string sweep_to_csv(std::span<const SweepPoint> rows) {
  std::string out = "variant,param,score,grad_magnitude\n";
  for (const auto& r : rows)
    out += r.variant + "," + format_real(r.param) + "," + format_real(r.score) + "," + format_real(r.grad_magnitude) + "\n";
  return out;
}

}  // namespace mmcl
