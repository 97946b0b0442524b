#include "mmcl/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "mmcl/csv.hpp"

namespace mmcl {

double TrainSchedule::alpha(std::size_t epoch) const {
  if (epochs <= 1) return alpha_start;
  const double frac = static_cast<double>(std::min(epoch, epochs - 1)) / static_cast<double>(epochs - 1);
  return alpha_start + (alpha_end - alpha_start) * frac;
}

double TrainSchedule::learning_rate(std::size_t epoch) const {
  return epoch >= lr_decay_epoch ? lr * lr_decay_factor : lr;
}

TrainConfig TrainConfig::defaults() { return TrainConfig{}; }

namespace {

double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_real(v, key, 0);
  } catch (const ParseError&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::size_t to_count(const std::string& key, const std::string& v) {
  try {
    return parse_size(v, key, 0);
  } catch (const ParseError&) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto count = [&](const char* key, auto member) {
      t[key] = [member](TrainConfig& c, const std::string& k, const std::string& v) { member(c) = to_count(k, v); };
    };
    auto real = [&](const char* key, auto member) {
      t[key] = [member](TrainConfig& c, const std::string& k, const std::string& v) { member(c) = to_real(k, v); };
    };
    t["seed"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = to_count(k, v); };
    t["threads"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
      c.threads = static_cast<unsigned>(std::max<std::size_t>(1, to_count(k, v)));
    };
    count("data.identities", [](TrainConfig& c) -> auto& { return c.data.identities; });
    count("data.samples_per_identity", [](TrainConfig& c) -> auto& { return c.data.samples_per_identity; });
    count("data.input_dim", [](TrainConfig& c) -> auto& { return c.data.input_dim; });
    real("data.cluster_spread", [](TrainConfig& c) -> auto& { return c.data.cluster_spread; });
    real("data.max_center_cosine", [](TrainConfig& c) -> auto& { return c.data.max_center_cosine; });
    count("model.hidden_dim", [](TrainConfig& c) -> auto& { return c.model.hidden_dim; });
    count("model.embed_dim", [](TrainConfig& c) -> auto& { return c.model.embed_dim; });
    count("train.epochs", [](TrainConfig& c) -> auto& { return c.schedule.epochs; });
    count("train.warmup_epochs", [](TrainConfig& c) -> auto& { return c.schedule.warmup_epochs; });
    real("train.lr", [](TrainConfig& c) -> auto& { return c.schedule.lr; });
    count("train.lr_decay_epoch", [](TrainConfig& c) -> auto& { return c.schedule.lr_decay_epoch; });
    real("train.lr_decay_factor", [](TrainConfig& c) -> auto& { return c.schedule.lr_decay_factor; });
    count("train.batch_size", [](TrainConfig& c) -> auto& { return c.schedule.batch_size; });
    real("train.alpha_start", [](TrainConfig& c) -> auto& { return c.schedule.alpha_start; });
    real("train.alpha_end", [](TrainConfig& c) -> auto& { return c.schedule.alpha_end; });
    t["loss.variant"] = [](TrainConfig& c, const std::string&, const std::string& v) {
      c.loss.variant = parse_loss_variant(v);
    };
    real("loss.tau", [](TrainConfig& c) -> auto& { return c.loss.tau; });
    real("loss.delta", [](TrainConfig& c) -> auto& { return c.loss.delta; });
    real("loss.hard_ratio", [](TrainConfig& c) -> auto& { return c.loss.hard_ratio; });
    t["predictor.kind"] = [](TrainConfig& c, const std::string&, const std::string& v) {
      c.predictor.kind = parse_predictor_kind(v);
    };
    real("predictor.threshold", [](TrainConfig& c) -> auto& { return c.predictor.threshold; });
    count("predictor.k", [](TrainConfig& c) -> auto& { return c.predictor.k; });
    real("augment.sigma", [](TrainConfig& c) -> auto& { return c.augment.sigma; });
    real("augment.drop", [](TrainConfig& c) -> auto& { return c.augment.drop; });
    return t;
  }();
  return table;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void TrainConfig::validate(std::size_t n) const {
  const auto& s = schedule;
  if (s.epochs == 0) throw ConfigError("train.epochs must be positive");
  if (s.warmup_epochs >= s.epochs) throw ConfigError("train.warmup_epochs must be smaller than train.epochs");
  if (s.batch_size == 0 || s.batch_size > n)
    throw ConfigError("train.batch_size must lie in [1, " + std::to_string(n) + "]");
  if (!(s.lr > 0.0) || !(s.lr_decay_factor > 0.0)) throw ConfigError("learning rate and decay factor must be positive");
  for (double a : {s.alpha_start, s.alpha_end})
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("memory update rate must lie in [0, 1]");
  loss.validate();
  if (predictor.kind == PredictorKind::kKnn && (predictor.k == 0 || predictor.k > n))
    throw ConfigError("predictor.k must lie in [1, " + std::to_string(n) + "]");
  if (predictor.kind == PredictorKind::kMplp || predictor.kind == PredictorKind::kSimilarityScore)
    if (!(predictor.threshold > -1.0 && predictor.threshold < 1.0))
      throw ConfigError("predictor.threshold must lie in (-1, 1)");
  if (!(augment.sigma >= 0.0)) throw ConfigError("augment.sigma must be non-negative");
  if (!(augment.drop >= 0.0 && augment.drop < 1.0)) throw ConfigError("augment.drop must lie in [0, 1)");
  if (model.embed_dim == 0) throw ConfigError("model.embed_dim must be positive");
}

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  o << "seed = " << seed << "\n"
    << "threads = " << threads << "\n"
    << "data.identities = " << data.identities << "\n"
    << "data.samples_per_identity = " << data.samples_per_identity << "\n"
    << "data.input_dim = " << data.input_dim << "\n"
    << "data.cluster_spread = " << format_real(data.cluster_spread) << "\n"
    << "data.max_center_cosine = " << format_real(data.max_center_cosine) << "\n"
    << "model.hidden_dim = " << model.hidden_dim << "\n"
    << "model.embed_dim = " << model.embed_dim << "\n"
    << "train.epochs = " << schedule.epochs << "\n"
    << "train.warmup_epochs = " << schedule.warmup_epochs << "\n"
    << "train.lr = " << format_real(schedule.lr) << "\n"
    << "train.lr_decay_epoch = " << schedule.lr_decay_epoch << "\n"
    << "train.lr_decay_factor = " << format_real(schedule.lr_decay_factor) << "\n"
    << "train.batch_size = " << schedule.batch_size << "\n"
    << "train.alpha_start = " << format_real(schedule.alpha_start) << "\n"
    << "train.alpha_end = " << format_real(schedule.alpha_end) << "\n"
    << "loss.variant = " << to_string(loss.variant) << "\n"
    << "loss.tau = " << format_real(loss.tau) << "\n"
    << "loss.delta = " << format_real(loss.delta) << "\n"
    << "loss.hard_ratio = " << format_real(loss.hard_ratio) << "\n"
    << "predictor.kind = " << to_string(predictor.kind) << "\n"
    << "predictor.threshold = " << format_real(predictor.threshold) << "\n"
    << "predictor.k = " << predictor.k << "\n"
    << "augment.sigma = " << format_real(augment.sigma) << "\n"
    << "augment.drop = " << format_real(augment.drop) << "\n";
  return o.str();
}

TrainConfig parse_config(const std::string& text, const std::string& origin) {
  TrainConfig cfg = TrainConfig::defaults();
  std::istringstream in(text);
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(origin, ln, "expected 'key = value'");
    try {
      cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(origin, ln, e.what());
    }
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::string text;
  for (const auto& l : read_lines(path)) text += l + "\n";
  return parse_config(text, path.string());
}

}  // namespace mmcl
