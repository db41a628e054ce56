#include "froda/data_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string_view>

#include <Eigen/QR>

namespace froda {

bool Dataset::labeled() const { return !labels.empty(); }

void Dataset::validate() const {
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != features.cols()) {
    throw DimensionMismatch("dataset '" + name + "': " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(features.cols()) + " samples");
  }
  for (int l : labels) {
    if (l < 0) throw InvalidArgument("dataset '" + name + "': negative label");
  }
  require_finite(features, "dataset '" + name + "'");
}

FileFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".bin" || ext == ".froda1" ? FileFormat::Binary : FileFormat::Csv;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& value) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, long long& value) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_numeric(std::string_view s) {
  double v;
  return parse_double(s, v);
}

std::string shortest(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf.data(), ptr);
}

}  // namespace

Dataset read_csv(std::istream& in, const std::string& name) {
  Dataset out;
  out.name = name;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  bool first = true;
  bool has_labels = false;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (first) {
      first = false;
      if (std::any_of(fields.begin(), fields.end(), [](auto f) { return !is_numeric(f); })) {
        for (auto f : fields) {
          if (f.empty()) throw InvalidArgument(name + ": malformed header (empty column name) on line 1");
        }
        has_labels = fields.back() == "label";
        width = fields.size();
        continue;
      }
    }
    const std::size_t row = rows.size() + 1;
    const std::string where = name + (name.empty() ? "" : ": ") + "row " + std::to_string(row) + " (line " +
                              std::to_string(line_no) + ")";
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw InvalidArgument(where + ": expected " + std::to_string(width) + " fields, found " +
                            std::to_string(fields.size()));
    }
    const std::size_t n_features = has_labels ? width - 1 : width;
    std::vector<double> values(n_features);
    for (std::size_t j = 0; j < n_features; ++j) {
      if (!parse_double(fields[j], values[j])) {
        throw InvalidArgument(where + ": cannot parse '" + std::string(fields[j]) + "' as a number");
      }
      if (!std::isfinite(values[j])) throw InvalidArgument(where + ": non-finite value");
    }
    if (has_labels) {
      long long label;
      if (!parse_int(fields.back(), label) || label < 0 || label > std::numeric_limits<int>::max()) {
        throw InvalidArgument(where + ": label '" + std::string(fields.back()) + "' is not a non-negative integer");
      }
      labels.push_back(static_cast<int>(label));
    }
    rows.push_back(std::move(values));
  }
  const std::size_t D = has_labels ? (width == 0 ? 0 : width - 1) : width;
  out.features.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      out.features(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    }
  }
  out.labels = std::move(labels);
  return out;
}

void write_csv(const Dataset& data, std::ostream& out) {
  data.validate();
  const Eigen::Index D = data.features.rows();
  if (data.labeled()) {
    for (Eigen::Index j = 0; j < D; ++j) out << 'f' << j + 1 << ',';
    out << "label\n";
  }
  for (Eigen::Index i = 0; i < data.features.cols(); ++i) {
    for (Eigen::Index j = 0; j < D; ++j) {
      if (j > 0) out << ',';
      out << shortest(data.features(j, i));
    }
    if (data.labeled()) out << (D > 0 ? "," : "") << data.labels[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Binary

namespace {

constexpr std::array<char, 6> kMagic{'F', 'R', 'O', 'D', 'A', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
bool get(std::istream& in, T& value) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  value = std::bit_cast<T>(bytes);
  return true;
}

}  // namespace

void write_binary_matrix(const Matrix& m, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
  }
}

Matrix read_binary_matrix(std::istream& in) {
  std::array<char, 6> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw InvalidArgument("binary: bad magic");
  std::uint64_t rows = 0, cols = 0;
  if (!get(in, rows) || !get(in, cols)) throw InvalidArgument("binary: truncated header");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (rows > kLimit || cols > kLimit || (cols != 0 && rows > kLimit / cols)) {
    throw InvalidArgument("binary: implausible shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
    if (!in.read(reinterpret_cast<char*>(m.data()), bytes)) throw InvalidArgument("binary: truncated data");
  } else {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (!get(in, m.data()[i])) throw InvalidArgument("binary: truncated data");
    }
  }
  return m;
}

void write_binary(const Dataset& data, std::ostream& out) {
  data.validate();
  write_binary_matrix(data.features, out);
  if (data.labeled()) {
    put<std::uint64_t>(out, data.labels.size());
    for (int l : data.labels) put<std::int64_t>(out, l);
  }
}

Dataset read_binary(std::istream& in, const std::string& name) {
  Dataset out;
  out.name = name;
  out.features = read_binary_matrix(in);
  std::uint64_t count = 0;
  if (get(in, count)) {
    if (count != static_cast<std::uint64_t>(out.features.cols())) {
      throw InvalidArgument("binary: label block has " + std::to_string(count) + " entries for " +
                            std::to_string(out.features.cols()) + " samples");
    }
    out.labels.resize(count);
    for (auto& l : out.labels) {
      std::int64_t v;
      if (!get(in, v)) throw InvalidArgument("binary: truncated label block");
      if (v < 0 || v > std::numeric_limits<int>::max()) throw InvalidArgument("binary: label out of range");
      l = static_cast<int>(v);
    }
  }
  for (Eigen::Index i = 0; i < out.features.cols(); ++i) {
    if (!out.features.col(i).allFinite()) {
      throw InvalidArgument("binary: non-finite value in sample " + std::to_string(i + 1));
    }
  }
  return out;
}

Dataset load_features(const std::filesystem::path& path, std::optional<FileFormat> format) {
  const auto fmt = format.value_or(format_for_path(path));
  std::ifstream in(path, fmt == FileFormat::Binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open " + path.string());
  const auto name = path.filename().string();
  return fmt == FileFormat::Binary ? read_binary(in, name) : read_csv(in, name);
}

void save_features(const Dataset& data, const std::filesystem::path& path, std::optional<FileFormat> format) {
  const auto fmt = format.value_or(format_for_path(path));
  std::ofstream out(path, fmt == FileFormat::Binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path.string());
  if (fmt == FileFormat::Binary) {
    write_binary(data, out);
  } else {
    write_csv(data, out);
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto field = trim(line);
    if (field.empty()) continue;
    long long v;
    if (!parse_int(field, v)) {
      if (line_no == 1 && !is_numeric(field)) continue;  // header
      throw InvalidArgument(path.string() + ": line " + std::to_string(line_no) + ": not an integer label");
    }
    if (v < 0 || v > std::numeric_limits<int>::max()) {
      throw InvalidArgument(path.string() + ": line " + std::to_string(line_no) + ": label out of range");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void save_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
}

// ---------------------------------------------------------------------------
// Protocol

void OpenSetProtocol::validate() const {
  if (known_classes.empty()) throw InvalidArgument("protocol: no known classes");
  if (per_class_source < 0 || per_class_target < 0) throw InvalidArgument("protocol: negative per-class cap");
  std::set<int> seen;
  auto add = [&](const std::vector<int>& list, const char* what) {
    std::set<int> local;
    for (int c : list) {
      if (c < 1) throw InvalidArgument(std::string("protocol: class ids must be >= 1 in ") + what);
      if (!local.insert(c).second) throw InvalidArgument(std::string("protocol: duplicate class in ") + what);
      if (!seen.insert(c).second) {
        throw InvalidArgument("protocol: class " + std::to_string(c) + " appears in more than one class list");
      }
    }
  };
  add(known_classes, "known classes");
  add(source_unknown_classes, "source unknown classes");
  add(target_unknown_classes, "target unknown classes");
}

namespace {

std::vector<int> range(int first, int last) {
  std::vector<int> out;
  for (int c = first; c <= last; ++c) out.push_back(c);
  return out;
}

}  // namespace

OpenSetProtocol OpenSetProtocol::bcis(std::uint64_t seed, int per_class_target) {
  return {range(1, 10), range(11, 25), range(26, 40), 50, per_class_target, seed};
}

OpenSetProtocol OpenSetProtocol::office(std::uint64_t seed) {
  return {range(1, 10), range(11, 20), range(21, 31), 0, 0, seed};
}

namespace {

// Sample indices of the listed classes, each class capped; ascending order.
std::vector<Eigen::Index> select(const Dataset& data, const std::vector<int>& classes, int cap, std::mt19937_64& rng,
                                 const char* which, std::vector<std::string>& warnings) {
  std::vector<Eigen::Index> out;
  for (int c : classes) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels[i] == c) members.push_back(static_cast<Eigen::Index>(i));
    }
    if (members.empty()) {
      throw InvalidArgument(std::string("protocol: class ") + std::to_string(c) + " is absent from the " + which);
    }
    if (cap > 0 && static_cast<std::size_t>(cap) < members.size()) {
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(static_cast<std::size_t>(cap));
    } else if (cap > 0 && static_cast<std::size_t>(cap) > members.size()) {
      warnings.push_back(std::string(which) + " class " + std::to_string(c) + " has " +
                         std::to_string(members.size()) + " samples, fewer than the cap of " + std::to_string(cap) +
                         "; taking all");
    }
    out.insert(out.end(), members.begin(), members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Matrix gather(const Matrix& X, const std::vector<Eigen::Index>& idx) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(idx[j]);
  return out;
}

}  // namespace

ProtocolSplit apply_protocol(const Dataset& source, const Dataset& target, const OpenSetProtocol& protocol) {
  protocol.validate();
  source.validate();
  target.validate();
  if (!source.labeled() || !target.labeled()) throw InvalidArgument("protocol: source and target need labels");
  if (source.features.rows() != target.features.rows()) {
    throw DimensionMismatch("protocol: source and target feature dimensions differ");
  }
  ProtocolSplit out;
  out.classes = static_cast<int>(protocol.known_classes.size());
  std::map<int, int> relabel;
  for (std::size_t j = 0; j < protocol.known_classes.size(); ++j) {
    relabel[protocol.known_classes[j]] = static_cast<int>(j) + 1;
  }
  for (int c : protocol.target_unknown_classes) relabel[c] = out.classes + 1;

  std::mt19937_64 rng(protocol.seed);
  const auto known_src = select(source, protocol.known_classes, protocol.per_class_source, rng, "source", out.warnings);
  const auto unknown_src =
      select(source, protocol.source_unknown_classes, protocol.per_class_source, rng, "source", out.warnings);
  std::vector<int> target_classes = protocol.known_classes;
  target_classes.insert(target_classes.end(), protocol.target_unknown_classes.begin(),
                        protocol.target_unknown_classes.end());
  const auto tgt = select(target, target_classes, protocol.per_class_target, rng, "target", out.warnings);

  out.source_known = gather(source.features, known_src);
  for (auto i : known_src) out.source_labels.push_back(relabel.at(source.labels[static_cast<std::size_t>(i)]));
  out.source_unknown = gather(source.features, unknown_src);
  out.target = gather(target.features, tgt);
  for (auto i : tgt) out.target_truth.push_back(relabel.at(target.labels[static_cast<std::size_t>(i)]));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic

void SyntheticSpec::validate() const {
  if (d < 1) throw InvalidArgument("synthetic: d must be >= 1");
  if (2 * d > D) throw InvalidArgument("synthetic: 2d must not exceed D");
  if (n_unknown_source > 0 && 3 * d > D) {
    throw InvalidArgument("synthetic: unknown source samples need 3d <= D");
  }
  if (C < 1) throw InvalidArgument("synthetic: C must be >= 1");
  if (n_per_class_source < 0 || n_per_class_target < 0 || n_unknown_target < 0 || n_unknown_source < 0) {
    throw InvalidArgument("synthetic: sample counts must be >= 0");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("synthetic: noise_sigma must be >= 0");
  if (!std::isfinite(class_center_scale)) throw InvalidArgument("synthetic: class_center_scale must be finite");
}

SyntheticScenario generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
  };

  const Eigen::Index d = spec.d;
  const Eigen::Index blocks = spec.n_unknown_source > 0 ? 3 : 2;
  const Matrix basis = Eigen::HouseholderQR<Matrix>(gaussian(spec.D, blocks * d)).householderQ() *
                       Matrix::Identity(spec.D, blocks * d);

  SyntheticScenario out;
  out.classes = spec.C;
  out.shared = basis.leftCols(d);
  out.target_private = basis.middleCols(d, d);
  if (blocks == 3) out.source_private = basis.rightCols(d);

  const Matrix centers = spec.class_center_scale * gaussian(d, spec.C);
  const double s = spec.class_center_scale;

  auto known = [&](int per_class, Dataset& ds) {
    ds.features.resize(spec.D, static_cast<Eigen::Index>(per_class) * spec.C);
    Eigen::Index col = 0;
    for (int c = 0; c < spec.C; ++c) {
      for (int i = 0; i < per_class; ++i) {
        const Matrix code = centers.col(c) + gaussian(d, 1);
        ds.features.col(col++) = out.shared * code + spec.noise_sigma * gaussian(spec.D, 1);
        ds.labels.push_back(c + 1);
      }
    }
  };
  auto unknown = [&](int count, const Matrix& subspace, Dataset& ds) {
    Matrix block(spec.D, count);
    for (int i = 0; i < count; ++i) {
      const Matrix code = s * gaussian(d, 1);
      block.col(i) = subspace * code + spec.noise_sigma * gaussian(spec.D, 1);
    }
    const Eigen::Index start = ds.features.cols();
    ds.features.conservativeResize(spec.D, start + count);
    ds.features.rightCols(count) = block;
    ds.labels.insert(ds.labels.end(), static_cast<std::size_t>(count), spec.C + 1);
  };

  out.source.name = "source";
  out.source_unknown.name = "source_unknown";
  out.target.name = "target";
  known(spec.n_per_class_source, out.source);
  out.source_unknown.features.resize(spec.D, 0);
  if (spec.n_unknown_source > 0) unknown(spec.n_unknown_source, out.source_private, out.source_unknown);
  known(spec.n_per_class_target, out.target);
  unknown(spec.n_unknown_target, out.target_private, out.target);
  return out;
}

}  // namespace froda
