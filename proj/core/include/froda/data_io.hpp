#pragma once

// Feature files, open-set protocol splits and the synthetic scenario
// generator.
//
// CSV: one sample per row. An optional first line of column names is
// recognised when any of its fields is not numeric; a last column named
// "label" holds integer class ids.
//
// Binary ("FRODA1"): the 6 magic bytes, u64 rows, u64 cols, then rows*cols
// IEEE-754 doubles in column-major order, optionally followed by a label
// block of u64 count and count i64 labels. All integers and doubles are
// little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "froda/common.hpp"

namespace froda {

struct Dataset {
  Matrix features;          ///< D x n, one sample per column
  std::vector<int> labels;  ///< n entries; 1-based class ids, 0 = unlabeled
  std::string name;

  bool labeled() const;
  Eigen::Index size() const { return features.cols(); }
  void validate() const;
};

enum class FileFormat { Csv, Binary };

/// ".bin" and ".froda1" select Binary, anything else Csv.
FileFormat format_for_path(const std::filesystem::path& path);

Dataset read_csv(std::istream& in, const std::string& name = {});
void write_csv(const Dataset& data, std::ostream& out);
Dataset read_binary(std::istream& in, const std::string& name = {});
void write_binary(const Dataset& data, std::ostream& out);

/// Matrix block of the binary layout without the label block.
void write_binary_matrix(const Matrix& m, std::ostream& out);
Matrix read_binary_matrix(std::istream& in);

Dataset load_features(const std::filesystem::path& path, std::optional<FileFormat> format = std::nullopt);
void save_features(const Dataset& data, const std::filesystem::path& path,
                   std::optional<FileFormat> format = std::nullopt);

/// One integer label per line; an optional non-numeric header line is skipped.
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

struct OpenSetProtocol {
  std::vector<int> known_classes;
  std::vector<int> source_unknown_classes;
  std::vector<int> target_unknown_classes;
  int per_class_source = 0;  ///< 0 takes every sample of a class
  int per_class_target = 0;
  std::uint64_t seed = 0;

  void validate() const;

  /// Classes 1-10 known, 11-25 unknown in the source, 26-40 in the target;
  /// 50 source and 30 target samples per class.
  static OpenSetProtocol bcis(std::uint64_t seed = 0, int per_class_target = 30);
  /// Classes 1-10 known, 11-20 unknown in the source, 21-31 in the target;
  /// every sample of each class.
  static OpenSetProtocol office(std::uint64_t seed = 0);
};

struct ProtocolSplit {
  Matrix source_known;
  std::vector<int> source_labels;  ///< relabelled 1..C in known_classes order
  Matrix source_unknown;
  Matrix target;
  std::vector<int> target_truth;   ///< 1..C, C+1 for every target unknown class
  int classes = 0;
  std::vector<std::string> warnings;
};

ProtocolSplit apply_protocol(const Dataset& source, const Dataset& target, const OpenSetProtocol& protocol);

struct SyntheticSpec {
  Eigen::Index D = 50;
  Eigen::Index d = 5;
  int C = 3;
  int n_per_class_source = 40;
  int n_per_class_target = 20;
  int n_unknown_target = 30;
  int n_unknown_source = 0;
  double noise_sigma = 0.05;
  double class_center_scale = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScenario {
  Dataset source;          ///< known classes, labels 1..C
  Dataset source_unknown;  ///< labels C+1
  Dataset target;          ///< labels are the ground truth, C+1 = unknown
  Matrix shared;           ///< V*, D x d
  Matrix target_private;   ///< U*, D x d
  Matrix source_private;   ///< D x d, empty without unknown sources
  int classes = 0;
};

/// Known-class samples are V* (center_c + z) + noise, unknown targets
/// U* (s z) + noise and unknown sources P* (s z) + noise, with z standard
/// normal, s the class centre scale and V*, U*, P* mutually orthogonal.
SyntheticScenario generate_synthetic(const SyntheticSpec& spec);

}  // namespace froda
