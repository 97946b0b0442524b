#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmcl/common.hpp"

namespace mmcl {

struct SyntheticSpec {
  std::size_t identities = 32;
  std::size_t samples_per_identity = 8;
  std::vector<std::size_t> samples_per_identity_list;  // overrides the fixed count when non-empty
  std::size_t input_dim = 64;
  double cluster_spread = 0.15;     // per-coordinate Gaussian noise around each center
  double max_center_cosine = 0.5;   // centers are resampled until pairwise cosine < this
  std::size_t max_resample = 10000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SampleRecord {
  std::size_t index = 0;
  std::vector<double> observation;
  std::optional<int> identity;
  std::optional<int> camera;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// Dense, index-ordered record collection.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<SampleRecord> records);

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t dim() const noexcept { return records_.empty() ? 0 : records_.front().observation.size(); }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }

  // What training sees: observations only, identities stripped.
  Matrix observations() const;

  bool has_identities() const;
  bool has_cameras() const;
  // Throw PreconditionError when any record lacks the field.
  std::vector<int> identities() const;
  std::vector<int> cameras() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<SampleRecord> records_;
};

// Identity centers are random unit vectors with bounded pairwise cosine;
// each sample is its center plus isotropic noise, then L2-normalized.
// Samples are laid out identity by identity.
Dataset generate(const SyntheticSpec& spec);

enum class FeatureFormat { kCsv, kJsonLines };
FeatureFormat format_from_path(const std::filesystem::path& path);

// CSV: header "index,identity,camera,f_1,...,f_d"; identity and camera may be
// blank. JSON lines: {"index":..,"identity":..,"camera":..,"features":[..]}.
// Vectors are L2-normalized on load; a warning goes to stderr when that moves
// the norm by more than 1e-3.
Dataset import_features(const std::filesystem::path& path, FeatureFormat format);
Dataset import_features(const std::filesystem::path& path);

void export_features(const Dataset& data, const std::filesystem::path& path,
                     FeatureFormat format = FeatureFormat::kCsv);

// Same identities/cameras, new vectors (e.g. model embeddings).
Dataset with_observations(const Dataset& data, const Matrix& vectors);

}  // namespace mmcl
