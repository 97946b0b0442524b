#include "mmcl/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "mmcl/csv.hpp"

namespace mmcl {

namespace {

void affine(const AffineLayer& l, std::span<const double> x, std::vector<double>& y) {
  y.assign(l.bias.begin(), l.bias.end());
  for (std::size_t o = 0; o < l.out(); ++o) y[o] += dot(l.weight.row(o), x);
}

AffineLayer zero_like(const AffineLayer& l) { return {Matrix(l.out(), l.in()), std::vector<double>(l.out(), 0.0)}; }

}  // namespace

void ModelGradients::scale(double a) {
  for (auto& l : layers) {
    for (double& w : l.weight.data()) w *= a;
    for (double& b : l.bias) b *= a;
  }
}

void ModelGradients::add(const ModelGradients& other) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& w = layers[k].weight.data();
    const auto& ow = other.layers[k].weight.data();
    for (std::size_t q = 0; q < w.size(); ++q) w[q] += ow[q];
    for (std::size_t q = 0; q < layers[k].bias.size(); ++q) layers[k].bias[q] += other.layers[k].bias[q];
  }
}

std::vector<double> ModelGradients::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

EmbeddingModel::EmbeddingModel(std::vector<AffineLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty() || layers_.size() > 2) throw ConfigError("embedding model needs one or two layers");
  for (const auto& l : layers_)
    if (l.in() == 0 || l.out() == 0 || l.bias.size() != l.out()) throw ConfigError("malformed affine layer");
  if (layers_.size() == 2 && layers_[0].out() != layers_[1].in())
    throw ConfigError("layer shapes do not chain");
}

EmbeddingModel EmbeddingModel::random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                                      std::mt19937_64& rng) {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("model dimensions must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto make = [&](std::size_t in, std::size_t out) {
    AffineLayer l{Matrix(out, in), std::vector<double>(out, 0.0)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weight.data()) w = gauss(rng) * scale;
    return l;
  };
  std::vector<AffineLayer> layers;
  if (hidden_dim == 0) {
    layers.push_back(make(input_dim, output_dim));
  } else {
    layers.push_back(make(input_dim, hidden_dim));
    layers.push_back(make(hidden_dim, output_dim));
  }
  return EmbeddingModel(std::move(layers));
}

EmbeddingModel EmbeddingModel::identity(std::size_t dim) {
  AffineLayer l{Matrix(dim, dim), std::vector<double>(dim, 0.0)};
  for (std::size_t k = 0; k < dim; ++k) l.weight(k, k) = 1.0;
  return EmbeddingModel({std::move(l)});
}

std::size_t EmbeddingModel::input_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
std::size_t EmbeddingModel::output_dim() const { return layers_.empty() ? 0 : layers_.back().out(); }

std::size_t EmbeddingModel::parameter_count() const {
  std::size_t c = 0;
  for (const auto& l : layers_) c += l.weight.data().size() + l.bias.size();
  return c;
}

void EmbeddingModel::forward(std::span<const double> x, ForwardCache& cache) const {
  if (x.size() != input_dim())
    throw ConfigError("observation dimension " + std::to_string(x.size()) + " != model input " +
                      std::to_string(input_dim()));
  cache.input.assign(x.begin(), x.end());
  if (layers_.size() == 2) {
    affine(layers_[0], x, cache.hidden);
    for (double& h : cache.hidden) h = std::tanh(h);
    affine(layers_[1], cache.hidden, cache.pre);
  } else {
    cache.hidden.clear();
    affine(layers_[0], x, cache.pre);
  }
  cache.pre_norm = norm(cache.pre);
  if (!(cache.pre_norm > kZeroNormEps) || !std::isfinite(cache.pre_norm))
    throw NumericError("embedding activation has zero or non-finite norm");
  cache.output.resize(cache.pre.size());
  for (std::size_t k = 0; k < cache.pre.size(); ++k) cache.output[k] = cache.pre[k] / cache.pre_norm;
}

std::vector<double> EmbeddingModel::forward(std::span<const double> x) const {
  ForwardCache cache;
  forward(x, cache);
  return std::move(cache.output);
}

ModelGradients EmbeddingModel::zero_gradients() const {
  ModelGradients g;
  for (const auto& l : layers_) g.layers.push_back(zero_like(l));
  return g;
}

ModelGradients EmbeddingModel::backward(const ForwardCache& cache, std::span<const double> upstream) const {
  if (upstream.size() != output_dim()) throw ConfigError("upstream gradient has wrong dimension");
  ModelGradients g = zero_gradients();

  // Through f = z / |z|: dL/dz = (I - f f^T) g / |z|.
  const auto& f = cache.output;
  const double radial = dot(f, upstream);
  std::vector<double> dz(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) dz[k] = (upstream[k] - radial * f[k]) / cache.pre_norm;

  auto outer = [](AffineLayer& dst, std::span<const double> delta, std::span<const double> in) {
    for (std::size_t o = 0; o < delta.size(); ++o) {
      auto row = dst.weight.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) row[i] = delta[o] * in[i];
      dst.bias[o] = delta[o];
    }
  };

  if (layers_.size() == 1) {
    outer(g.layers[0], dz, cache.input);
    return g;
  }
  outer(g.layers[1], dz, cache.hidden);
  const auto& w2 = layers_[1].weight;
  std::vector<double> dh(cache.hidden.size(), 0.0);
  for (std::size_t o = 0; o < w2.rows(); ++o)
    for (std::size_t i = 0; i < w2.cols(); ++i) dh[i] += w2(o, i) * dz[o];
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
  outer(g.layers[0], dh, cache.input);
  return g;
}

void EmbeddingModel::sgd_step(const ModelGradients& grads, double lr) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& w = layers_[k].weight.data();
    const auto& gw = grads.layers[k].weight.data();
    for (std::size_t q = 0; q < w.size(); ++q) w[q] -= lr * gw[q];
    for (std::size_t q = 0; q < layers_[k].bias.size(); ++q) layers_[k].bias[q] -= lr * grads.layers[k].bias[q];
  }
}

std::vector<double> EmbeddingModel::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void EmbeddingModel::assign(std::span<const double> params) {
  if (params.size() != parameter_count()) throw ConfigError("parameter vector has wrong length");
  std::size_t at = 0;
  for (auto& l : layers_) {
    for (double& w : l.weight.data()) w = params[at++];
    for (double& b : l.bias) b = params[at++];
  }
}

Matrix embed_all(const EmbeddingModel& model, const Matrix& observations) {
  Matrix out(observations.rows(), model.output_dim());
  ForwardCache cache;
  for (std::size_t i = 0; i < observations.rows(); ++i) {
    model.forward(observations.row(i), cache);
    std::copy(cache.output.begin(), cache.output.end(), out.row(i).begin());
  }
  return out;
}

void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    j["layers"].push_back({{"in", l.in()}, {"out", l.out()}, {"weight", l.weight.data()}, {"bias", l.bias}});
  }
  // nlohmann emits shortest round-trip doubles, so a reload is bit-exact.
  write_file_atomic(path, j.dump(1) + "\n");
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    std::vector<AffineLayer> layers;
    for (const auto& jl : j.at("layers")) {
      AffineLayer l{Matrix(jl.at("out").get<std::size_t>(), jl.at("in").get<std::size_t>()),
                    jl.at("bias").get<std::vector<double>>()};
      auto w = jl.at("weight").get<std::vector<double>>();
      if (w.size() != l.weight.data().size()) throw ConfigError("weight size mismatch");
      l.weight.data() = std::move(w);
      layers.push_back(std::move(l));
    }
    return EmbeddingModel(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  } catch (const ConfigError& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

}  // namespace mmcl
