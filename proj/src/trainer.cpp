#include "mmcl/trainer.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "mmcl/csv.hpp"
#include "mmcl/losses.hpp"

namespace mmcl {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<double> augment(std::span<const double> x, const AugmentConfig& cfg, std::mt19937_64& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (cfg.sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, cfg.sigma);
    for (double& v : out) v += gauss(rng);
  }
  if (cfg.drop > 0.0) {
    std::bernoulli_distribution dropped(cfg.drop);
    for (double& v : out)
      if (dropped(rng)) v = 0.0;
  }
  return out;
}

Trainer::Trainer(TrainConfig config, Matrix observations)
    : config_(std::move(config)), observations_(std::move(observations)) {
  if (observations_.rows() == 0) throw ConfigError("no observations to train on");
  config_.validate(observations_.rows());
  std::mt19937_64 init_rng(derive_seed(config_.seed, 1));
  model_ = EmbeddingModel::random(observations_.cols(), config_.model.hidden_dim, config_.model.embed_dim, init_rng);
  bank_ = MemoryBank(observations_.rows(), config_.model.embed_dim);
  labels_ = singleton_labels(observations_.rows());
  rng_.seed(derive_seed(config_.seed, 2));
}

EpochStats Trainer::run_epoch() {
  const auto& sched = config_.schedule;
  const std::size_t n = observations_.rows();
  EpochStats stats;
  stats.epoch = epoch_;
  stats.alpha = sched.alpha(epoch_);
  stats.lr = sched.learning_rate(epoch_);
  for (const auto& l : labels_) stats.mean_positives += static_cast<double>(l.positives().size());
  stats.mean_positives /= static_cast<double>(n);
  bank_.set_update_rate(stats.alpha);
  bank_.set_epoch(epoch_);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  std::vector<ForwardCache> caches;
  std::vector<MultiLabel> batch_labels;
  double loss_sum = 0.0;
  for (std::size_t start = 0, batch = 0; start < n; start += sched.batch_size, ++batch) {
    const std::size_t end = std::min(n, start + sched.batch_size);
    const std::size_t size = end - start;
    caches.resize(size);
    batch_labels.clear();
    Matrix features(size, model_.output_dim());
    LossReport report;
    try {
      for (std::size_t b = 0; b < size; ++b) {
        const std::size_t i = order[start + b];
        const auto x = augment(observations_.row(i), config_.augment, rng_);
        model_.forward(x, caches[b]);
        std::copy(caches[b].output.begin(), caches[b].output.end(), features.row(b).begin());
        batch_labels.push_back(labels_[i]);
      }
      report = compute_loss(features, batch_labels, bank_, config_.loss);
    } catch (const NumericError& e) {
      throw NumericError("training aborted at epoch " + std::to_string(epoch_) + ", batch " + std::to_string(batch) +
                         ": " + e.what() + " (lr=" + format_real(stats.lr) + ", alpha=" + format_real(stats.alpha) + ")");
    }
    loss_sum += report.value * static_cast<double>(size);

    ModelGradients grads = model_.zero_gradients();
    for (std::size_t b = 0; b < size; ++b) grads.add(model_.backward(caches[b], report.grad.row(b)));
    model_.sgd_step(grads, stats.lr);

    for (std::size_t b = 0; b < size; ++b) {
      const std::size_t i = order[start + b];
      if (bank_.row_is_empty(i))
        bank_.set_row(i, features.row(b));
      else
        bank_.update_row(i, features.row(b), stats.alpha);
    }
  }
  stats.loss = loss_sum / static_cast<double>(n);

  ++epoch_;
  if (epoch_ >= sched.warmup_epochs && config_.predictor.kind != PredictorKind::kSingle) {
    const MemoryBank frozen = bank_;
    labels_ = predict_labels(frozen, config_.predictor, config_.threads);
    stats.labels_refreshed = true;
  }
  return stats;
}

void Trainer::train(const EpochCallback& on_epoch) {
  while (epoch_ < config_.schedule.epochs) {
    const auto stats = run_epoch();
    if (on_epoch) on_epoch(*this, stats);
  }
}

Matrix Trainer::embed() const { return embed_all(model_, observations_); }

}  // namespace mmcl
