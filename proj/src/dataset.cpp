#include "mmcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <random>

#include "mmcl/csv.hpp"

namespace mmcl {

void SyntheticSpec::validate() const {
  const std::size_t ids = samples_per_identity_list.empty() ? identities : samples_per_identity_list.size();
  if (ids < 2) throw ConfigError("synthetic data needs at least 2 identities");
  if (samples_per_identity_list.empty()) {
    if (samples_per_identity < 2) throw ConfigError("every identity needs at least 2 samples");
  } else {
    for (std::size_t c : samples_per_identity_list)
      if (c < 2) throw ConfigError("every identity needs at least 2 samples");
  }
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  if (!(cluster_spread >= 0.0) || !std::isfinite(cluster_spread))
    throw ConfigError("cluster spread must be a finite non-negative number");
  if (!(max_center_cosine > -1.0 && max_center_cosine <= 1.0))
    throw ConfigError("center cosine bound must lie in (-1, 1]");
}

Dataset::Dataset(std::vector<SampleRecord> records) : records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].index != i) throw ConfigError("record indices must be dense and start at 0");
    if (records_[i].observation.size() != records_[0].observation.size())
      throw ConfigError("records have differing dimensions");
  }
}

Matrix Dataset::observations() const {
  Matrix m(size(), dim());
  for (std::size_t i = 0; i < size(); ++i)
    std::copy(records_[i].observation.begin(), records_[i].observation.end(), m.row(i).begin());
  return m;
}

bool Dataset::has_identities() const {
  return !records_.empty() && std::all_of(records_.begin(), records_.end(), [](const auto& r) { return r.identity.has_value(); });
}

bool Dataset::has_cameras() const {
  return !records_.empty() && std::all_of(records_.begin(), records_.end(), [](const auto& r) { return r.camera.has_value(); });
}

std::vector<int> Dataset::identities() const {
  if (!has_identities()) throw PreconditionError("dataset lacks identity labels");
  std::vector<int> out;
  out.reserve(size());
  for (const auto& r : records_) out.push_back(*r.identity);
  return out;
}

std::vector<int> Dataset::cameras() const {
  if (!has_cameras()) throw PreconditionError("dataset lacks camera ids");
  std::vector<int> out;
  out.reserve(size());
  for (const auto& r : records_) out.push_back(*r.camera);
  return out;
}

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::size_t> counts = spec.samples_per_identity_list;
  if (counts.empty()) counts.assign(spec.identities, spec.samples_per_identity);
  const std::size_t d = spec.input_dim;

  auto unit = [&] {
    std::vector<double> v(d);
    double len = 0.0;
    do {
      for (double& x : v) x = gauss(rng);
      len = norm(v);
    } while (len <= kZeroNormEps);
    for (double& x : v) x /= len;
    return v;
  };

  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::size_t attempts = 0;
    while (true) {
      auto v = unit();
      const bool ok = std::all_of(centers.begin(), centers.end(),
                                  [&](const auto& u) { return dot(u, v) < spec.max_center_cosine; });
      if (ok) {
        centers.push_back(std::move(v));
        break;
      }
      if (++attempts >= spec.max_resample)
        throw ConfigError("cannot place " + std::to_string(counts.size()) + " identity centers in " +
                          std::to_string(d) + " dimensions with pairwise cosine below " +
                          format_real(spec.max_center_cosine) + " (gave up at center " + std::to_string(c) +
                          "); lower the identity count or raise the bound");
    }
  }

  std::vector<SampleRecord> records;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t s = 0; s < counts[c]; ++s) {
      SampleRecord r;
      r.index = records.size();
      r.identity = static_cast<int>(c);
      r.observation = centers[c];
      for (double& x : r.observation) x += spec.cluster_spread * gauss(rng);
      const double len = norm(r.observation);
      if (len <= kZeroNormEps) throw NumericError("degenerate synthetic sample");
      for (double& x : r.observation) x /= len;
      records.push_back(std::move(r));
    }
  }
  return Dataset(std::move(records));
}

FeatureFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return FeatureFormat::kJsonLines;
  return FeatureFormat::kCsv;
}

namespace {

void normalize_loaded(std::vector<double>& v, const std::string& where, std::size_t line) {
  const double len = norm(v);
  if (len <= kZeroNormEps) throw ParseError(where, line, "zero feature vector");
  if (std::abs(len - 1.0) > 1e-3)
    std::cerr << "warning: " << where << ":" << line << ": feature renormalized (norm was " << len << ")\n";
  for (double& x : v) x /= len;
}

std::optional<int> optional_int(const std::string& field, const std::string& where, std::size_t line) {
  if (field.empty()) return std::nullopt;
  return static_cast<int>(parse_int(field, where, line));
}

Dataset assemble(std::vector<SampleRecord> records, const std::vector<std::size_t>& lines, const std::string& where) {
  std::vector<std::size_t> order(records.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return records[a].index < records[b].index; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = records[order[k]];
    if (k > 0 && records[order[k - 1]].index == r.index)
      throw ParseError(where, lines[order[k]], "duplicate index " + std::to_string(r.index));
    if (r.index != k)
      throw ParseError(where, lines[order[k]], "indices must be dense from 0; missing " + std::to_string(k));
  }
  return Dataset(std::move(records));
}

Dataset import_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw ParseError(where, 1, "missing header");
  const auto header = split_csv(lines[0]);
  if (header.size() < 4 || header[0] != "index" || header[1] != "identity" || header[2] != "camera")
    throw ParseError(where, 1, "header must be index,identity,camera,f_1..f_d");
  const std::size_t d = header.size() - 3;

  std::vector<SampleRecord> records;
  std::vector<std::size_t> at;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto f = split_csv(lines[ln]);
    if (f.size() != header.size())
      throw ParseError(where, ln + 1,
                       "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    SampleRecord r;
    r.index = parse_size(f[0], where, ln + 1);
    r.identity = optional_int(f[1], where, ln + 1);
    r.camera = optional_int(f[2], where, ln + 1);
    r.observation.resize(d);
    for (std::size_t k = 0; k < d; ++k) r.observation[k] = parse_real(f[3 + k], where, ln + 1);
    normalize_loaded(r.observation, where, ln + 1);
    records.push_back(std::move(r));
    at.push_back(ln + 1);
  }
  return assemble(std::move(records), at, where);
}

Dataset import_jsonl(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::string where = path.string();
  std::vector<SampleRecord> records;
  std::vector<std::size_t> at;
  std::size_t d = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    SampleRecord r;
    try {
      const auto j = nlohmann::json::parse(lines[ln]);
      const auto idx = j.at("index").get<long long>();
      if (idx < 0) throw ParseError(where, ln + 1, "negative index");
      r.index = static_cast<std::size_t>(idx);
      if (j.contains("identity") && !j["identity"].is_null()) r.identity = j["identity"].get<int>();
      if (j.contains("camera") && !j["camera"].is_null()) r.camera = j["camera"].get<int>();
      for (const auto& x : j.at("features")) {
        if (!x.is_number()) throw ParseError(where, ln + 1, "non-numeric feature");
        r.observation.push_back(x.get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where, ln + 1, e.what());
    }
    if (!all_finite(r.observation)) throw ParseError(where, ln + 1, "non-finite feature value");
    if (r.observation.empty()) throw ParseError(where, ln + 1, "empty feature vector");
    if (records.empty()) d = r.observation.size();
    if (r.observation.size() != d)
      throw ParseError(where, ln + 1,
                       "expected " + std::to_string(d) + " features, got " + std::to_string(r.observation.size()));
    normalize_loaded(r.observation, where, ln + 1);
    records.push_back(std::move(r));
    at.push_back(ln + 1);
  }
  return assemble(std::move(records), at, where);
}

std::string opt(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

}  // namespace

Dataset import_features(const std::filesystem::path& path, FeatureFormat format) {
  return format == FeatureFormat::kCsv ? import_csv(path) : import_jsonl(path);
}

Dataset import_features(const std::filesystem::path& path) { return import_features(path, format_from_path(path)); }

void export_features(const Dataset& data, const std::filesystem::path& path, FeatureFormat format) {
  std::string text;
  if (format == FeatureFormat::kCsv) {
    text = "index,identity,camera";
    for (std::size_t k = 0; k < data.dim(); ++k) text += ",f_" + std::to_string(k + 1);
    text += '\n';
    for (const auto& r : data.records())
      text += std::to_string(r.index) + "," + opt(r.identity) + "," + opt(r.camera) + "," + join_reals(r.observation) + "\n";
  } else {
    for (const auto& r : data.records()) {
      nlohmann::json j{{"index", r.index}, {"features", r.observation}};
      j["identity"] = r.identity ? nlohmann::json(*r.identity) : nlohmann::json(nullptr);
      j["camera"] = r.camera ? nlohmann::json(*r.camera) : nlohmann::json(nullptr);
      text += j.dump() + "\n";
    }
  }
  write_file_atomic(path, text);
}

Dataset with_observations(const Dataset& data, const Matrix& vectors) {
  if (vectors.rows() != data.size()) throw ConfigError("vector count does not match dataset size");
  auto records = data.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = vectors.row(i);
    records[i].observation.assign(r.begin(), r.end());
  }
  return Dataset(std::move(records));
}

}  // namespace mmcl
