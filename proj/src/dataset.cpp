#include "adaptcp/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "adaptcp/binning.hpp"
#include "adaptcp/error.hpp"

namespace adaptcp {

namespace {

constexpr std::uint8_t kMagic[4] = {0x43, 0x50, 0x53, 0x31};  // "CPS1"
constexpr std::uint8_t kKindClassification = 0;
constexpr std::uint8_t kKindRegression = 1;
constexpr std::uint8_t kFlagTransformed = 0x1;
constexpr std::uint8_t kFlagEase = 0x2;

std::string at_row(std::size_t i) { return " (row " + std::to_string(i) + ")"; }

void check_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError(std::string(what) + " value is not finite at index " + std::to_string(i));
    }
  }
}

void check_ease_range(std::span<const double> ease) {
  for (std::size_t i = 0; i < ease.size(); ++i) {
    if (!(ease[i] >= 0.0 && ease[i] <= 1.0)) {
      throw ValidationError("ease outside [0,1]" + at_row(i));
    }
  }
}

void check_ease_consistency(std::span<const double> stored, std::span<const double> computed) {
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (std::abs(stored[i] - computed[i]) > kEaseConsistencyTolerance) {
      throw ValidationError("stored ease disagrees with transformed block" + at_row(i));
    }
  }
}

// ---------------------------------------------------------------------------
// Little-endian binary primitives

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open for writing: " + path.string());
  }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 4);
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f32s(std::span<const double> vs) {
    for (double v : vs) f32(v);
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path.string());
  }
  std::uint8_t u8() {
    char c;
    read(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::vector<double> f32s(std::size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) v = f32();
    return out;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  void read(char* dst, std::size_t count) {
    in_.read(dst, static_cast<std::streamsize>(count));
    if (in_.gcount() != static_cast<std::streamsize>(count)) {
      throw ValidationError("truncated CPS1 file");
    }
  }
  std::ifstream in_;
};

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > (std::size_t(1) << 40) / a) throw ValidationError("CPS1 dimensions too large");
  return a * b;
}

void write_binary(const Dataset& data, const std::filesystem::path& path) {
  Writer w(path);
  for (auto b : kMagic) w.u8(b);
  if (const auto* ds = std::get_if<ScoreDataset>(&data)) {
    w.u8(kKindClassification);
    w.u32(static_cast<std::uint32_t>(ds->n));
    w.u32(static_cast<std::uint32_t>(ds->k));
    w.u32(static_cast<std::uint32_t>(ds->has_transformed() ? ds->l : 0));
    w.u8((ds->has_transformed() ? kFlagTransformed : 0) | (ds->has_ease() ? kFlagEase : 0));
    w.f32s(ds->probs);
    for (auto y : ds->labels) w.u32(y);
    if (ds->has_transformed()) w.f32s(ds->transformed);
    if (ds->has_ease()) w.f32s(ds->ease);
  } else {
    const auto& rs = std::get<RegressionDataset>(data);
    w.u8(kKindRegression);
    w.u32(static_cast<std::uint32_t>(rs.n));
    w.u32(0);
    w.u32(static_cast<std::uint32_t>(rs.has_transformed() ? rs.l : 0));
    w.u8((rs.has_transformed() ? kFlagTransformed : 0) | (rs.has_ease() ? kFlagEase : 0));
    w.f32s(rs.mu);
    w.f32s(rs.sigma);
    w.f32s(rs.targets);
    if (rs.has_transformed()) w.f32s(rs.transformed_mu);
    if (rs.has_ease()) w.f32s(rs.ease);
  }
  w.finish(path);
}

Dataset read_binary(const std::filesystem::path& path) {
  Reader r(path);
  for (auto b : kMagic) {
    if (r.u8() != b) throw ValidationError("malformed header: bad CPS1 magic in " + path.string());
  }
  const std::uint8_t kind = r.u8();
  const std::size_t n = r.u32();
  const std::size_t k = r.u32();
  const std::size_t l = r.u32();
  const std::uint8_t flags = r.u8();
  if (flags & ~(kFlagTransformed | kFlagEase)) throw ValidationError("malformed header: unknown flag bits");
  const bool has_transformed = flags & kFlagTransformed;
  if (has_transformed && l == 0) throw ValidationError("malformed header: transformed block with L = 0");
  if (!has_transformed && l != 0) throw ValidationError("malformed header: L set without transformed block");

  Dataset out;
  if (kind == kKindClassification) {
    ScoreDataset ds;
    ds.n = n;
    ds.k = k;
    ds.l = l;
    ds.probs = r.f32s(checked_mul(n, k));
    ds.labels.resize(n);
    for (auto& y : ds.labels) y = r.u32();
    if (has_transformed) ds.transformed = r.f32s(checked_mul(checked_mul(n, l), k));
    if (flags & kFlagEase) ds.ease = r.f32s(n);
    out = std::move(ds);
  } else if (kind == kKindRegression) {
    if (k != 0) throw ValidationError("malformed header: regression file with K != 0");
    RegressionDataset rs;
    rs.n = n;
    rs.l = l;
    rs.mu = r.f32s(n);
    rs.sigma = r.f32s(n);
    rs.targets = r.f32s(n);
    if (has_transformed) rs.transformed_mu = r.f32s(checked_mul(n, l));
    if (flags & kFlagEase) rs.ease = r.f32s(n);
    out = std::move(rs);
  } else {
    throw ValidationError("malformed header: unknown dataset kind " + std::to_string(kind));
  }
  if (!r.at_end()) throw ValidationError("dimension mismatch: trailing bytes after CPS1 payload");
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line_no) {
  while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ValidationError("malformed number '" + std::string(s) + "' on line " + std::to_string(line_no));
  }
  return v;
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  if (const auto* ds = std::get_if<ScoreDataset>(&data)) {
    out << "label";
    for (std::size_t j = 0; j < ds->k; ++j) out << ",p" << j;
    if (ds->has_ease()) out << ",ease";
    out << '\n';
    for (std::size_t i = 0; i < ds->n; ++i) {
      out << ds->labels[i];
      for (double p : ds->row(i)) out << ',' << format_double(p);
      if (ds->has_ease()) out << ',' << format_double(ds->ease[i]);
      out << '\n';
    }
  } else {
    const auto& rs = std::get<RegressionDataset>(data);
    out << "target,mu,sigma";
    if (rs.has_ease()) out << ",ease";
    out << '\n';
    for (std::size_t i = 0; i < rs.n; ++i) {
      out << format_double(rs.targets[i]) << ',' << format_double(rs.mu[i]) << ','
          << format_double(rs.sigma[i]);
      if (rs.has_ease()) out << ',' << format_double(rs.ease[i]);
      out << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("malformed header: empty CSV file");
  auto header = split_commas(line);
  std::vector<std::string> cols;
  for (auto h : header) cols.push_back(trim(h));

  if (!cols.empty() && cols[0] == "target") {
    const bool has_ease = cols.size() == 4 && cols[3] == "ease";
    if (cols.size() < 3 || cols[1] != "mu" || cols[2] != "sigma" || (cols.size() == 4 && !has_ease) ||
        cols.size() > 4) {
      throw ValidationError("malformed header: expected target,mu,sigma[,ease]");
    }
    RegressionDataset rs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      auto f = split_commas(line);
      if (f.size() != cols.size()) {
        throw ValidationError("dimension mismatch on line " + std::to_string(line_no));
      }
      rs.targets.push_back(parse_double(f[0], line_no));
      rs.mu.push_back(parse_double(f[1], line_no));
      rs.sigma.push_back(parse_double(f[2], line_no));
      if (has_ease) rs.ease.push_back(parse_double(f[3], line_no));
    }
    rs.n = rs.mu.size();
    return rs;
  }

  if (cols.empty() || cols[0] != "label") throw ValidationError("malformed header: first column must be 'label'");
  const bool has_ease = cols.back() == "ease";
  const std::size_t k = cols.size() - 1 - (has_ease ? 1 : 0);
  for (std::size_t j = 0; j < k; ++j) {
    if (cols[1 + j] != "p" + std::to_string(j)) {
      throw ValidationError("malformed header: expected column p" + std::to_string(j));
    }
  }
  ScoreDataset ds;
  ds.k = k;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_commas(line);
    if (f.size() != cols.size()) throw ValidationError("dimension mismatch on line " + std::to_string(line_no));
    double label = parse_double(f[0], line_no);
    if (label < 0 || label != std::floor(label) || label > 4294967295.0) {
      throw ValidationError("label is not a class index on line " + std::to_string(line_no));
    }
    ds.labels.push_back(static_cast<std::uint32_t>(label));
    for (std::size_t j = 0; j < k; ++j) ds.probs.push_back(parse_double(f[1 + j], line_no));
    if (has_ease) ds.ease.push_back(parse_double(f.back(), line_no));
  }
  ds.n = ds.labels.size();
  return ds;
}

template <class T>
std::vector<T> gather(const std::vector<T>& src, std::size_t width, std::span<const std::size_t> idx) {
  std::vector<T> out;
  if (src.empty()) return out;
  out.reserve(idx.size() * width);
  for (auto i : idx) out.insert(out.end(), src.begin() + i * width, src.begin() + (i + 1) * width);
  return out;
}

void quantize(std::vector<double>& v) {
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace

void validate(const ScoreDataset& ds) {
  if (ds.n == 0) throw ValidationError("dataset has no examples (N = 0)");
  if (ds.k < 2) throw ValidationError("dataset needs at least two classes (K = " + std::to_string(ds.k) + ")");
  if (ds.probs.size() != ds.n * ds.k) throw ValidationError("dimension mismatch: probs is not N x K");
  if (ds.labels.size() != ds.n) throw ValidationError("dimension mismatch: labels is not length N");
  for (std::size_t i = 0; i < ds.n; ++i) {
    double sum = 0.0;
    for (double p : ds.row(i)) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0,1]" + at_row(i));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kNormalizationTolerance) {
      throw ValidationError("probability row not normalized (sum " + format_double(sum) + ")" + at_row(i));
    }
    if (ds.labels[i] >= ds.k) {
      throw ValidationError("label " + std::to_string(ds.labels[i]) + " out of range [0," + std::to_string(ds.k) +
                            ")" + at_row(i));
    }
  }
  if (ds.has_transformed()) {
    if (ds.l == 0 || ds.transformed.size() != ds.n * ds.l * ds.k) {
      throw ValidationError("dimension mismatch: transformed block is not N x L x K");
    }
    for (std::size_t i = 0; i < ds.n; ++i) {
      for (std::size_t t = 0; t < ds.l; ++t) {
        for (double p : ds.transformed_row(i, t)) {
          if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("transformed probability outside [0,1]" + at_row(i));
        }
      }
    }
  } else if (ds.l != 0) {
    throw ValidationError("dimension mismatch: L set without transformed block");
  }
  if (ds.has_ease()) {
    if (ds.ease.size() != ds.n) throw ValidationError("dimension mismatch: ease is not length N");
    check_ease_range(ds.ease);
    if (ds.has_transformed()) check_ease_consistency(ds.ease, compute_ease(ds));
  }
}

void validate(const RegressionDataset& ds) {
  if (ds.n == 0) throw ValidationError("dataset has no examples (N = 0)");
  if (ds.mu.size() != ds.n || ds.sigma.size() != ds.n || ds.targets.size() != ds.n) {
    throw ValidationError("dimension mismatch: mu/sigma/targets must be length N");
  }
  check_finite(ds.mu, "mu");
  check_finite(ds.targets, "target");
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (!(ds.sigma[i] > 0.0) || !std::isfinite(ds.sigma[i])) throw ValidationError("sigma must be > 0" + at_row(i));
  }
  if (ds.has_transformed()) {
    if (ds.l == 0 || ds.transformed_mu.size() != ds.n * ds.l) {
      throw ValidationError("dimension mismatch: transformed_mu is not N x L");
    }
    check_finite(ds.transformed_mu, "transformed_mu");
  } else if (ds.l != 0) {
    throw ValidationError("dimension mismatch: L set without transformed block");
  }
  if (ds.has_ease()) {
    if (ds.ease.size() != ds.n) throw ValidationError("dimension mismatch: ease is not length N");
    check_ease_range(ds.ease);
    if (ds.has_transformed()) check_ease_consistency(ds.ease, compute_ease(ds));
  }
}

void validate(const Dataset& ds) {
  std::visit([](const auto& d) { validate(d); }, ds);
}

FileFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::csv : FileFormat::binary;
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  Dataset ds = format == FileFormat::csv ? read_csv(path) : read_binary(path);
  validate(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_from_path(path)); }

ScoreDataset load_score_dataset(const std::filesystem::path& path) {
  auto ds = load_dataset(path);
  if (!std::holds_alternative<ScoreDataset>(ds)) {
    throw ValidationError("expected a classification dataset: " + path.string());
  }
  return std::get<ScoreDataset>(std::move(ds));
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format) {
  validate(ds);
  if (format == FileFormat::csv) {
    write_csv(ds, path);
  } else {
    write_binary(ds, path);
  }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_dataset(ds, path, format_from_path(path));
}

ScoreDataset subset(const ScoreDataset& ds, std::span<const std::size_t> indices) {
  ScoreDataset out;
  out.n = indices.size();
  out.k = ds.k;
  out.l = ds.l;
  out.probs = gather(ds.probs, ds.k, indices);
  out.labels = gather(ds.labels, 1, indices);
  out.transformed = gather(ds.transformed, ds.l * ds.k, indices);
  out.ease = gather(ds.ease, 1, indices);
  return out;
}

RegressionDataset subset(const RegressionDataset& ds, std::span<const std::size_t> indices) {
  RegressionDataset out;
  out.n = indices.size();
  out.l = ds.l;
  out.mu = gather(ds.mu, 1, indices);
  out.sigma = gather(ds.sigma, 1, indices);
  out.targets = gather(ds.targets, 1, indices);
  out.transformed_mu = gather(ds.transformed_mu, ds.l, indices);
  out.ease = gather(ds.ease, 1, indices);
  return out;
}

void quantize_to_float(ScoreDataset& ds) {
  quantize(ds.probs);
  quantize(ds.transformed);
  quantize(ds.ease);
}

void quantize_to_float(RegressionDataset& ds) {
  quantize(ds.mu);
  quantize(ds.sigma);
  quantize(ds.targets);
  quantize(ds.transformed_mu);
  quantize(ds.ease);
}

double PredictionOutput::coverage() const {
  if (covered.empty()) return 0.0;
  return static_cast<double>(std::count(covered.begin(), covered.end(), std::uint8_t{1})) /
         static_cast<double>(covered.size());
}

double PredictionOutput::average_size() const {
  if (size.empty()) return 0.0;
  return std::accumulate(size.begin(), size.end(), 0.0) / static_cast<double>(size.size());
}

}  // namespace adaptcp
