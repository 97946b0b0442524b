#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "mmcl/common.hpp"

namespace mmcl {

struct AffineLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;

  std::size_t in() const noexcept { return weight.cols(); }
  std::size_t out() const noexcept { return weight.rows(); }
  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden;  // tanh activations; empty for a single layer
  std::vector<double> pre;     // output before normalization
  double pre_norm = 0.0;
  std::vector<double> output;  // unit-norm embedding
};

// Gradients share the model's layer shapes.
struct ModelGradients {
  std::vector<AffineLayer> layers;
  void scale(double a);
  void add(const ModelGradients& other);
  std::vector<double> flatten() const;
};

// Small embedding network: one affine map, or two with tanh in between, and a
// final L2 normalization.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  explicit EmbeddingModel(std::vector<AffineLayer> layers);

  // Gaussian init scaled by 1/sqrt(fan_in). hidden == 0 gives one layer.
  static EmbeddingModel random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                               std::mt19937_64& rng);
  static EmbeddingModel identity(std::size_t dim);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<AffineLayer>& layers() const noexcept { return layers_; }

  // Throws NumericError when the pre-normalization activation vanishes.
  std::vector<double> forward(std::span<const double> x) const;
  void forward(std::span<const double> x, ForwardCache& cache) const;

  // Parameter gradients of a scalar loss given dL/d(output).
  ModelGradients backward(const ForwardCache& cache, std::span<const double> upstream) const;
  ModelGradients zero_gradients() const;

  void sgd_step(const ModelGradients& grads, double lr);

  std::vector<double> flatten() const;
  void assign(std::span<const double> params);

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  std::vector<AffineLayer> layers_;
};

// Embeds every row of `observations`.
Matrix embed_all(const EmbeddingModel& model, const Matrix& observations);

void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_model(const std::filesystem::path& path);

}  // namespace mmcl
