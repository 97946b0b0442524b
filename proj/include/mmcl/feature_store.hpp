#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "mmcl/common.hpp"

namespace mmcl {

// Descending-similarity ordering of every memory row relative to an anchor.
struct RankList {
  std::size_t anchor = 0;
  std::vector<std::size_t> order;
  std::vector<double> scores;  // scores[j] = <M[anchor], M[order[j]]>
};

// n x d store holding one running feature per training sample. Each row also
// acts as the classifier weight for the class "is sample j".
class MemoryBank {
 public:
  MemoryBank() = default;

  // Zero-initialized bank. Throws ConfigError when n or d is zero.
  MemoryBank(std::size_t n, std::size_t d);

  std::size_t size() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }

  double update_rate() const noexcept { return update_rate_; }
  void set_update_rate(double alpha);
  std::size_t epoch() const noexcept { return epoch_; }
  void set_epoch(std::size_t epoch) noexcept { epoch_ = epoch; }

  std::span<const double> row(std::size_t i) const;
  const Matrix& rows() const noexcept { return rows_; }
  bool row_is_empty(std::size_t i) const;

  // Momentum blend M[i] <- alpha*f + (1-alpha)*M[i], then L2-normalized unless
  // the blend has (near) zero norm, in which case it is stored as is.
  void update_row(std::size_t i, std::span<const double> f, double alpha);

  // Overwrites row i verbatim. Used to bootstrap empty rows.
  void set_row(std::size_t i, std::span<const double> f);

  double similarity(std::size_t i, std::size_t j) const;

  // Full ranking of all rows by descending similarity to row i; ties go to the
  // lower index. Throws PreconditionError when row i is empty.
  RankList rank_list(std::size_t i) const;

  // Classification scores c[j] = <M[j], f>.
  std::vector<double> score(std::span<const double> f) const;

  // Gram matrix of all rows; entry (i, j) is similarity(i, j).
  Matrix similarity_matrix() const;

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

 private:
  void check_index(std::size_t i) const;

  Matrix rows_;
  double update_rate_ = 0.0;
  std::size_t epoch_ = 0;
};

// Snapshot format: first line "n,d,epoch,alpha" holding those four values,
// then one row per line with 17 significant digits.
void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_bank(const std::filesystem::path& path);

}  // namespace mmcl
