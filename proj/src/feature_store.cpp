#include "mmcl/feature_store.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mmcl/csv.hpp"

namespace mmcl {

MemoryBank::MemoryBank(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0)
    throw ConfigError("memory bank needs n >= 1 and d >= 1 (got n=" + std::to_string(n) +
                      ", d=" + std::to_string(d) + ")");
  rows_ = Matrix(n, d, 0.0);
}

void MemoryBank::set_update_rate(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("update rate must lie in [0, 1], got " + std::to_string(alpha));
  update_rate_ = alpha;
}

void MemoryBank::check_index(std::size_t i) const {
  if (i >= size())
    throw BoundsError("memory index " + std::to_string(i) + " out of range [0, " +
                      std::to_string(size()) + ")");
}

std::span<const double> MemoryBank::row(std::size_t i) const {
  check_index(i);
  return rows_.row(i);
}

bool MemoryBank::row_is_empty(std::size_t i) const { return norm(row(i)) <= kZeroNormEps; }

void MemoryBank::update_row(std::size_t i, std::span<const double> f, double alpha) {
  check_index(i);
  if (f.size() != dim())
    throw ConfigError("feature dimension " + std::to_string(f.size()) + " != bank dimension " +
                      std::to_string(dim()));
  if (!all_finite(f)) throw NumericError("non-finite feature for memory row " + std::to_string(i));
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("update rate must lie in [0, 1], got " + std::to_string(alpha));

  auto r = rows_.row(i);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = alpha * f[k] + (1.0 - alpha) * r[k];
  const double len = norm(r);
  if (len > kZeroNormEps)
    for (double& v : r) v /= len;
}

void MemoryBank::set_row(std::size_t i, std::span<const double> f) {
  check_index(i);
  if (f.size() != dim())
    throw ConfigError("feature dimension " + std::to_string(f.size()) + " != bank dimension " +
                      std::to_string(dim()));
  if (!all_finite(f)) throw NumericError("non-finite feature for memory row " + std::to_string(i));
  std::copy(f.begin(), f.end(), rows_.row(i).begin());
}

double MemoryBank::similarity(std::size_t i, std::size_t j) const {
  return dot(row(i), row(j));
}

RankList MemoryBank::rank_list(std::size_t i) const {
  if (row_is_empty(i))
    throw PreconditionError("rank list undefined for empty memory row " + std::to_string(i));
  const auto anchor = rows_.row(i);
  std::vector<double> s(size());
  for (std::size_t j = 0; j < size(); ++j) s[j] = dot(anchor, rows_.row(j));

  RankList out;
  out.anchor = i;
  out.order.resize(size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  out.scores.reserve(size());
  for (std::size_t j : out.order) out.scores.push_back(s[j]);
  return out;
}

std::vector<double> MemoryBank::score(std::span<const double> f) const {
  if (f.size() != dim())
    throw ConfigError("feature dimension " + std::to_string(f.size()) + " != bank dimension " +
                      std::to_string(dim()));
  std::vector<double> c(size());
  for (std::size_t j = 0; j < size(); ++j) c[j] = dot(rows_.row(j), f);
  return c;
}

Matrix MemoryBank::similarity_matrix() const {
  Matrix g(size(), size());
  for (std::size_t i = 0; i < size(); ++i) {
    g(i, i) = dot(rows_.row(i), rows_.row(i));
    for (std::size_t j = i + 1; j < size(); ++j) g(i, j) = g(j, i) = dot(rows_.row(i), rows_.row(j));
  }
  return g;
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  std::string text = std::to_string(bank.size()) + "," + std::to_string(bank.dim()) + "," +
                     std::to_string(bank.epoch()) + "," + format_real(bank.update_rate()) + "\n";
  for (std::size_t i = 0; i < bank.size(); ++i) text += join_reals(bank.row(i)) + "\n";
  write_file_atomic(path, text);
}

MemoryBank load_bank(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw ParseError(where, 1, "missing header line");
  const auto header = split_csv(lines[0]);
  if (header.size() != 4) throw ParseError(where, 1, "header must be n,d,epoch,alpha");
  const auto n = parse_size(header[0], where, 1);
  const auto d = parse_size(header[1], where, 1);
  const auto epoch = parse_size(header[2], where, 1);
  const double alpha = parse_real(header[3], where, 1);

  MemoryBank bank;
  try {
    bank = MemoryBank(n, d);
    bank.set_update_rate(alpha);
  } catch (const Error& e) {
    throw ParseError(where, 1, e.what());
  }
  bank.set_epoch(epoch);

  std::size_t row = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    if (row >= n) throw ParseError(where, ln + 1, "more rows than declared n");
    const auto fields = split_csv(lines[ln]);
    if (fields.size() != d)
      throw ParseError(where, ln + 1,
                       "expected " + std::to_string(d) + " values, got " + std::to_string(fields.size()));
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = parse_real(fields[k], where, ln + 1);
    bank.set_row(row++, v);
  }
  if (row != n)
    throw ParseError(where, lines.size(), "expected " + std::to_string(n) + " rows, got " + std::to_string(row));
  return bank;
}

}  // namespace mmcl
