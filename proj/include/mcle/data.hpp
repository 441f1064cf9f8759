#pragma once

// Dataset bundle: pool features, ground-truth labels, source classifier bank
// and relation weights. Loading, validation, serialization, class splits and
// the synthetic Gaussian-blob benchmark.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mcle/matrix.hpp"

namespace mcle {

namespace fs = std::filesystem;

/// Validation or I/O failure while reading a bundle. Carries the offending
/// file and, when applicable, the zero-based data row.
class DataError : public std::runtime_error {
 public:
  DataError(std::string file, std::optional<std::size_t> row, const std::string& what)
      : std::runtime_error(format(file, row, what)), file_(std::move(file)), row_(row) {}

  const std::string& file() const noexcept { return file_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  static std::string format(const std::string& file, std::optional<std::size_t> row,
                            const std::string& what) {
    std::string msg = file;
    if (row) msg += ": row " + std::to_string(*row);
    return msg + ": " + what;
  }

  std::string file_;
  std::optional<std::size_t> row_;
};

enum class Split : std::uint8_t { train, test };

struct Pool {
  Matrix features;  // n_samples x dim
  std::vector<std::string> sample_ids;
  std::vector<Split> split;
  std::vector<std::string> display_uri;  // empty string when absent

  std::size_t n_samples() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  std::span<const double> x(std::size_t i) const { return features.row(i); }

  std::vector<std::size_t> indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i] == which) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_indices() const { return indices(Split::train); }
  std::vector<std::size_t> test_indices() const { return indices(Split::test); }
};

struct LabelMatrix {
  std::vector<std::string> class_names;
  std::vector<std::int8_t> labels;  // n_samples x n_classes, row-major, entries +1/-1

  std::size_t n_classes() const noexcept { return class_names.size(); }
  std::size_t n_samples() const noexcept {
    return class_names.empty() ? 0 : labels.size() / class_names.size();
  }
  int at(std::size_t sample, std::size_t cls) const {
    return labels[sample * class_names.size() + cls];
  }
  std::optional<std::size_t> find(std::string_view name) const {
    auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - class_names.begin());
  }
  std::vector<int> column(std::size_t cls) const {
    std::vector<int> out(n_samples());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, cls);
    return out;
  }
};

struct SourceBank {
  std::vector<std::string> source_names;
  Matrix weights;              // K x dim
  std::vector<double> biases;  // K, zero when absent

  std::size_t size() const noexcept { return source_names.size(); }
};

struct RelationMatrix {
  std::vector<std::string> target_names;
  Matrix betas;  // n_targets x K

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = std::find(target_names.begin(), target_names.end(), name);
    if (it == target_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - target_names.begin());
  }
};

struct ClassSplit {
  std::vector<std::string> known;
  std::vector<std::string> unknown;
};

/// Immutable bundle shared by every session that runs over it.
struct Dataset {
  Pool pool;
  LabelMatrix labels;
  SourceBank sources;
  RelationMatrix relations;
  std::vector<std::string> warnings;
};

namespace detail {

inline constexpr std::array<char, 4> kFeatureMagic{'A', 'L', 'Z', 'S'};
inline constexpr std::array<char, 4> kSourceMagic{'A', 'L', 'S', 'W'};
inline constexpr std::uint32_t kFormatVersion = 1;

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Reads non-empty lines; blank lines are skipped.
inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.filename().string(), std::nullopt, "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) lines.push_back(std::move(t));
  }
  return lines;
}

inline double parse_real(const std::string& field, const std::string& file, std::size_t row) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size()) {
    // std::stod rejects "nan"/"inf" spellings inconsistently; treat them explicitly.
    std::string lower(field);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "nan" || lower == "inf" || lower == "-inf" || lower == "+inf") {
      throw DataError(file, row, "non-finite value '" + field + "'");
    }
    throw DataError(file, row, "cannot parse number '" + field + "'");
  }
  if (!std::isfinite(v)) throw DataError(file, row, "non-finite value '" + field + "'");
  return v;
}

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <class T>
bool read_le(std::istream& in, T& value) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), bytes.size())) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return true;
}

/// Reads the `magic, version, rows, cols, float32 payload` layout shared by
/// features.bin and sources.bin.
inline Matrix read_float_matrix(const fs::path& path, const std::array<char, 4>& magic) {
  const auto name = path.filename().string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(name, std::nullopt, "cannot open file");
  std::array<char, 4> got{};
  if (!in.read(got.data(), 4) || got != magic) {
    throw DataError(name, std::nullopt,
                    "bad magic (expected '" + std::string(magic.begin(), magic.end()) + "')");
  }
  std::uint32_t version = 0, rows = 0, cols = 0;
  if (!read_le(in, version) || !read_le(in, rows) || !read_le(in, cols)) {
    throw DataError(name, std::nullopt, "truncated header");
  }
  if (version != kFormatVersion) {
    throw DataError(name, std::nullopt, "unsupported version " + std::to_string(version));
  }
  Matrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      float v = 0.0f;
      if (!read_le(in, v)) {
        throw DataError(name, r, "truncated payload (header declares " + std::to_string(rows) +
                                     "x" + std::to_string(cols) + ")");
      }
      if (!std::isfinite(v)) {
        throw DataError(name, r, "non-finite value at column " + std::to_string(c));
      }
      m(r, c) = static_cast<double>(v);
    }
  }
  return m;
}

inline void write_float_matrix(const fs::path& path, const std::array<char, 4>& magic,
                               const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.filename().string(), std::nullopt, "cannot write file");
  out.write(magic.data(), 4);
  write_le(out, kFormatVersion);
  write_le(out, static_cast<std::uint32_t>(m.rows()));
  write_le(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) write_le(out, static_cast<float>(v));
  if (!out) throw DataError(path.filename().string(), std::nullopt, "write failed");
}

inline Matrix read_csv_matrix(const fs::path& path) {
  const auto name = path.filename().string();
  const auto lines = read_lines(path);
  std::size_t cols = 0;
  std::vector<double> data;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (r == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw DataError(name, r, "expected " + std::to_string(cols) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    for (const auto& f : fields) data.push_back(parse_real(f, name, r));
  }
  return Matrix(lines.size(), cols, std::move(data));
}

inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.filename().string(), std::nullopt, "cannot write file");
  return out;
}

inline float quantize(double v) { return static_cast<float>(v); }

}  // namespace detail

/// Checks every cross-shape invariant of a bundle; throws DataError on the
/// first violation and returns non-fatal warnings.
inline std::vector<std::string> validate(const Dataset& d) {
  std::vector<std::string> warnings;
  const auto& pool = d.pool;
  const std::size_t n = pool.n_samples();
  if (n < 2) throw DataError("features", std::nullopt, "pool needs at least 2 samples");
  for (std::size_t i = 0; i < n; ++i)
    for (double v : pool.x(i))
      if (!std::isfinite(v)) throw DataError("features", i, "non-finite value");
  if (pool.sample_ids.size() != n)
    throw DataError("ids.csv", std::nullopt, "expected " + std::to_string(n) + " ids");
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = seen.emplace(pool.sample_ids[i], i);
    if (!fresh)
      throw DataError("ids.csv", i,
                      "duplicate id '" + pool.sample_ids[i] + "' (first at row " +
                          std::to_string(it->second) + ")");
  }
  if (pool.split.size() != n)
    throw DataError("split.csv", std::nullopt,
                    "shape mismatch: " + std::to_string(pool.split.size()) +
                        " rows vs features " + std::to_string(n));
  if (pool.display_uri.size() != n)
    throw DataError("uris.csv", std::nullopt,
                    "shape mismatch: " + std::to_string(pool.display_uri.size()) +
                        " rows vs features " + std::to_string(n));

  const auto& lm = d.labels;
  if (lm.n_classes() == 0) throw DataError("labels.csv", std::nullopt, "no classes");
  if (lm.labels.size() != n * lm.n_classes())
    throw DataError("labels.csv", std::nullopt,
                    "shape mismatch: " + std::to_string(lm.n_samples()) +
                        " label rows vs features " + std::to_string(n));
  for (std::size_t c = 0; c < lm.n_classes(); ++c) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pool.split[i] != Split::train) continue;
      (lm.at(i, c) > 0 ? pos : neg)++;
    }
    if (pos == 0 || neg == 0)
      warnings.push_back("class '" + lm.class_names[c] + "' lacks " +
                         (pos == 0 ? "positives" : "negatives") + " in the train split");
  }

  const auto& bank = d.sources;
  if (bank.weights.rows() != bank.source_names.size())
    throw DataError("sources.txt", std::nullopt,
                    "shape mismatch: " + std::to_string(bank.source_names.size()) +
                        " names vs " + std::to_string(bank.weights.rows()) + " weight rows");
  if (bank.weights.rows() > 0 && bank.weights.cols() != pool.dim())
    throw DataError("sources.bin", std::nullopt,
                    "shape mismatch: d=" + std::to_string(bank.weights.cols()) +
                        " vs features d=" + std::to_string(pool.dim()));
  if (bank.biases.size() != bank.size())
    throw DataError("source_biases.csv", std::nullopt,
                    "expected " + std::to_string(bank.size()) + " biases");
  for (std::size_t k = 0; k < bank.size(); ++k) {
    if (!std::isfinite(bank.biases[k])) throw DataError("source_biases.csv", k, "non-finite");
    for (double v : bank.weights.row(k))
      if (!std::isfinite(v)) throw DataError("sources.bin", k, "non-finite value");
  }

  const auto& rel = d.relations;
  if (rel.betas.rows() != rel.target_names.size())
    throw DataError("relations.csv", std::nullopt, "row/name count mismatch");
  if (rel.betas.rows() > 0 && rel.betas.cols() != bank.size())
    throw DataError("relations.csv", std::nullopt,
                    "shape mismatch: " + std::to_string(rel.betas.cols()) + " beta columns vs K=" +
                        std::to_string(bank.size()));
  for (std::size_t r = 0; r < rel.betas.rows(); ++r)
    for (double v : rel.betas.row(r))
      if (!std::isfinite(v)) throw DataError("relations.csv", r, "non-finite value");
  return warnings;
}

/// Loads a dataset directory (see README for the file layout).
inline Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw DataError(dir.string(), std::nullopt, "dataset directory does not exist");
  Dataset d;

  if (fs::exists(dir / "features.bin")) {
    d.pool.features = detail::read_float_matrix(dir / "features.bin", detail::kFeatureMagic);
  } else if (fs::exists(dir / "features.csv")) {
    d.pool.features = detail::read_csv_matrix(dir / "features.csv");
  } else {
    throw DataError("features.bin", std::nullopt, "missing file (nor features.csv)");
  }
  const std::size_t n = d.pool.n_samples();

  {
    const auto lines = detail::read_lines(dir / "labels.csv");
    if (lines.empty()) throw DataError("labels.csv", std::nullopt, "missing header row");
    d.labels.class_names = detail::split_csv_line(lines[0]);
    const std::size_t rows = lines.size() - 1;
    if (rows != n)
      throw DataError("labels.csv", std::nullopt,
                      "shape mismatch: " + std::to_string(rows) + " label rows vs " +
                          std::to_string(n) + " feature rows");
    const std::size_t nc = d.labels.class_names.size();
    d.labels.labels.reserve(n * nc);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto fields = detail::split_csv_line(lines[r + 1]);
      if (fields.size() != nc)
        throw DataError("labels.csv", r, "expected " + std::to_string(nc) + " fields, got " +
                                             std::to_string(fields.size()));
      for (const auto& f : fields) {
        if (f == "+1" || f == "1") {
          d.labels.labels.push_back(1);
        } else if (f == "-1") {
          d.labels.labels.push_back(-1);
        } else {
          throw DataError("labels.csv", r, "label must be +1 or -1, got '" + f + "'");
        }
      }
    }
  }

  {
    const auto lines = detail::read_lines(dir / "split.csv");
    if (lines.size() != n)
      throw DataError("split.csv", std::nullopt,
                      "shape mismatch: " + std::to_string(lines.size()) + " rows vs " +
                          std::to_string(n) + " feature rows");
    for (std::size_t r = 0; r < n; ++r) {
      if (lines[r] == "train") {
        d.pool.split.push_back(Split::train);
      } else if (lines[r] == "test") {
        d.pool.split.push_back(Split::test);
      } else {
        throw DataError("split.csv", r, "expected 'train' or 'test', got '" + lines[r] + "'");
      }
    }
  }

  if (fs::exists(dir / "ids.csv")) {
    d.pool.sample_ids = detail::read_lines(dir / "ids.csv");
    if (d.pool.sample_ids.size() != n)
      throw DataError("ids.csv", std::nullopt,
                      "shape mismatch: " + std::to_string(d.pool.sample_ids.size()) +
                          " rows vs " + std::to_string(n) + " feature rows");
  } else {
    for (std::size_t i = 0; i < n; ++i) d.pool.sample_ids.push_back(std::to_string(i));
  }

  if (fs::exists(dir / "uris.csv")) {
    std::ifstream in(dir / "uris.csv");
    std::string line;
    while (std::getline(in, line)) d.pool.display_uri.push_back(detail::trim(line));
    while (d.pool.display_uri.size() > n && d.pool.display_uri.back().empty())
      d.pool.display_uri.pop_back();
    if (d.pool.display_uri.size() != n)
      throw DataError("uris.csv", std::nullopt,
                      "shape mismatch: " + std::to_string(d.pool.display_uri.size()) +
                          " rows vs " + std::to_string(n) + " feature rows");
  } else {
    d.pool.display_uri.assign(n, "");
  }

  d.sources.weights = detail::read_float_matrix(dir / "sources.bin", detail::kSourceMagic);
  d.sources.source_names = detail::read_lines(dir / "sources.txt");
  if (d.sources.source_names.size() != d.sources.weights.rows())
    throw DataError("sources.txt", std::nullopt,
                    "shape mismatch: " + std::to_string(d.sources.source_names.size()) +
                        " names vs K=" + std::to_string(d.sources.weights.rows()));
  if (fs::exists(dir / "source_biases.csv")) {
    const auto lines = detail::read_lines(dir / "source_biases.csv");
    for (std::size_t r = 0; r < lines.size(); ++r)
      d.sources.biases.push_back(detail::parse_real(lines[r], "source_biases.csv", r));
  } else {
    d.sources.biases.assign(d.sources.size(), 0.0);
  }

  {
    const auto lines = detail::read_lines(dir / "relations.csv");
    if (lines.empty()) throw DataError("relations.csv", std::nullopt, "missing header row");
    const auto header = detail::split_csv_line(lines[0]);
    if (header != d.sources.source_names)
      throw DataError("relations.csv", std::nullopt,
                      "header does not match sources.txt (" + std::to_string(header.size()) +
                          " vs " + std::to_string(d.sources.size()) + " names)");
    const std::size_t k = header.size();
    std::vector<double> betas;
    for (std::size_t r = 1; r < lines.size(); ++r) {
      const auto fields = detail::split_csv_line(lines[r]);
      if (fields.size() != k + 1)
        throw DataError("relations.csv", r - 1,
                        "expected " + std::to_string(k + 1) + " fields, got " +
                            std::to_string(fields.size()));
      d.relations.target_names.push_back(fields[0]);
      for (std::size_t j = 1; j <= k; ++j)
        betas.push_back(detail::parse_real(fields[j], "relations.csv", r - 1));
    }
    d.relations.betas = Matrix(d.relations.target_names.size(), k, std::move(betas));
  }

  d.warnings = validate(d);
  return d;
}

/// Writes a bundle in the on-disk layout read by load_dataset. Features and
/// source weights are stored as float32.
inline void write_dataset(const Dataset& d, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir.string(), std::nullopt, "cannot create directory: " + ec.message());

  detail::write_float_matrix(dir / "features.bin", detail::kFeatureMagic, d.pool.features);
  {
    auto out = detail::open_text(dir / "labels.csv");
    for (std::size_t c = 0; c < d.labels.n_classes(); ++c)
      out << (c ? "," : "") << d.labels.class_names[c];
    out << '\n';
    for (std::size_t i = 0; i < d.labels.n_samples(); ++i) {
      for (std::size_t c = 0; c < d.labels.n_classes(); ++c)
        out << (c ? "," : "") << (d.labels.at(i, c) > 0 ? "+1" : "-1");
      out << '\n';
    }
  }
  {
    auto out = detail::open_text(dir / "split.csv");
    for (auto s : d.pool.split) out << (s == Split::train ? "train" : "test") << '\n';
  }
  bool default_ids = true;
  for (std::size_t i = 0; i < d.pool.sample_ids.size(); ++i)
    default_ids = default_ids && d.pool.sample_ids[i] == std::to_string(i);
  if (!default_ids) {
    auto out = detail::open_text(dir / "ids.csv");
    for (const auto& id : d.pool.sample_ids) out << id << '\n';
  }
  if (std::any_of(d.pool.display_uri.begin(), d.pool.display_uri.end(),
                  [](const std::string& u) { return !u.empty(); })) {
    auto out = detail::open_text(dir / "uris.csv");
    for (const auto& u : d.pool.display_uri) out << u << '\n';
  }

  detail::write_float_matrix(dir / "sources.bin", detail::kSourceMagic, d.sources.weights);
  {
    auto out = detail::open_text(dir / "sources.txt");
    for (const auto& s : d.sources.source_names) out << s << '\n';
  }
  if (std::any_of(d.sources.biases.begin(), d.sources.biases.end(),
                  [](double b) { return b != 0.0; })) {
    auto out = detail::open_text(dir / "source_biases.csv");
    for (double b : d.sources.biases) out << detail::format_real(b) << '\n';
  }
  {
    auto out = detail::open_text(dir / "relations.csv");
    for (std::size_t k = 0; k < d.sources.size(); ++k)
      out << (k ? "," : "") << d.sources.source_names[k];
    out << '\n';
    for (std::size_t r = 0; r < d.relations.target_names.size(); ++r) {
      out << d.relations.target_names[r];
      for (double v : d.relations.betas.row(r)) out << ',' << detail::format_real(v);
      out << '\n';
    }
  }
}

/// Splits classes into known/unknown sets; |known| = round(fraction * n).
/// Both lists keep the original class order.
inline ClassSplit make_class_split(const std::vector<std::string>& class_names,
                                   double known_fraction, std::uint64_t seed) {
  if (!(known_fraction > 0.0 && known_fraction < 1.0))
    throw std::invalid_argument("known_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(class_names.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_known =
      static_cast<std::size_t>(std::lround(known_fraction * static_cast<double>(order.size())));
  std::vector<bool> is_known(class_names.size(), false);
  for (std::size_t k = 0; k < n_known; ++k) is_known[order[k]] = true;
  ClassSplit out;
  for (std::size_t c = 0; c < class_names.size(); ++c)
    (is_known[c] ? out.known : out.unknown).push_back(class_names[c]);
  return out;
}

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    for (auto& e : v) e = normal(rng);
    norm = std::sqrt(dot(v, v));
  } while (norm == 0.0);
  for (auto& e : v) e /= norm;
  return v;
}

}  // namespace detail

/// Gaussian-blob benchmark: one isotropic blob of unit total variance per
/// class around a random unit-norm center, one-vs-rest labels, a stratified
/// 50/50 split and a source bank holding each class direction perturbed by
/// isotropic noise of norm scale prior_noise.
/// The relation matrix is the identity. Values are rounded to float32 so the
/// in-memory bundle equals its serialized form.
inline Dataset generate_synthetic(std::size_t n_classes, std::size_t n_per_class, std::size_t dim,
                                  double prior_noise, std::uint64_t seed) {
  if (n_classes < 1 || n_per_class < 1 || dim < 1)
    throw std::invalid_argument("generate_synthetic: all counts must be >= 1");
  if (!(prior_noise >= 0.0) || !std::isfinite(prior_noise))
    throw std::invalid_argument("generate_synthetic: prior_noise must be finite and >= 0");
  if (n_classes * n_per_class < 2)
    throw std::invalid_argument("generate_synthetic: pool needs at least 2 samples");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  // Noise is measured in the same norm as the unit-norm centers: the
  // isotropic sample noise has E|e|^2 = 1 and the prior noise E|e|^2 = prior_noise^2.
  const double sample_sigma = 1.0 / std::sqrt(static_cast<double>(dim));
  const double prior_sigma = prior_noise / std::sqrt(static_cast<double>(dim));

  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < n_classes; ++c) centers.push_back(detail::random_unit(dim, rng));

  const std::size_t n = n_classes * n_per_class;
  // Rows are stored in a random order so that no class owns the low indices
  // that index-based tie-breaking favors.
  std::vector<std::size_t> row_of(n);
  std::iota(row_of.begin(), row_of.end(), 0);
  std::shuffle(row_of.begin(), row_of.end(), rng);

  d.pool.features = Matrix(n, dim);
  d.pool.split.assign(n, Split::test);
  d.labels.labels.assign(n * n_classes, -1);
  for (std::size_t c = 0; c < n_classes; ++c) {
    d.labels.class_names.push_back("c" + std::to_string(c));
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < n_per_class; ++k) {
      const std::size_t i = row_of[c * n_per_class + k];
      auto row = d.pool.features.row(i);
      for (std::size_t j = 0; j < dim; ++j)
        row[j] = detail::quantize(centers[c][j] + sample_sigma * normal(rng));
      d.labels.labels[i * n_classes + c] = 1;
      members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < (n_per_class + 1) / 2; ++k) d.pool.split[members[k]] = Split::train;
  }
  for (std::size_t i = 0; i < n; ++i) d.pool.sample_ids.push_back(std::to_string(i));
  d.pool.display_uri.assign(n, "");

  d.sources.weights = Matrix(n_classes, dim);
  for (std::size_t c = 0; c < n_classes; ++c) {
    d.sources.source_names.push_back("src_c" + std::to_string(c));
    auto row = d.sources.weights.row(c);
    for (std::size_t j = 0; j < dim; ++j)
      row[j] = detail::quantize(centers[c][j] + prior_sigma * normal(rng));
  }
  d.sources.biases.assign(n_classes, 0.0);

  d.relations.target_names = d.labels.class_names;
  d.relations.betas = Matrix(n_classes, n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) d.relations.betas(c, c) = 1.0;

  d.warnings = validate(d);
  return d;
}

/// Source bank of random unit-norm directions with the same names and shape
/// as `like`. Serves as an uninformative prior for comparisons.
inline SourceBank make_random_bank(const SourceBank& like, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SourceBank out;
  out.source_names = like.source_names;
  out.weights = Matrix(like.size(), dim);
  for (std::size_t k = 0; k < like.size(); ++k) {
    const auto v = detail::random_unit(dim, rng);
    std::copy(v.begin(), v.end(), out.weights.row(k).begin());
  }
  out.biases.assign(like.size(), 0.0);
  return out;
}

}  // namespace mcle
