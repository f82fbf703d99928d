#pragma once

#include "den/common.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace den {

enum class DataKind { kDense, kTokens };

/// N x D sample matrix plus optional labels and feature names.
///
/// Token-sequence datasets keep integer token ids (stored as doubles) in
/// [0, vocab_size); every row is one fixed-length sequence.
struct Dataset {
  Matrix samples;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> feature_names;
  DataKind kind = DataKind::kDense;
  int vocab_size = 0;

  int n() const { return static_cast<int>(samples.rows()); }
  int d() const { return static_cast<int>(samples.cols()); }

  /// Throws DataError when an invariant is broken.
  void validate() const;
};

/// Reads a comma-separated file. A first row containing any non-numeric cell
/// is taken as a header. The last column is split off as labels when
/// has_labels is set or the header names it "label".
Dataset load_csv(const std::filesystem::path& path, bool has_labels);

/// Writes samples (and labels, as a trailing "label" column) with a header.
/// Values are printed with round-trip precision.
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// MNIST-style IDX pair: unsigned-byte images (magic 0x00000803) and labels
/// (magic 0x00000801). Pixels are flattened row-major and scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Per-feature centering and scaling by max(std, 1e-12) (population std).
Dataset standardize(const Dataset& data);

/// Reinterprets a loaded CSV as token sequences over [0, vocab_size).
Dataset as_tokens(Dataset data, int vocab_size);

inline constexpr double kStdFloor = 1e-12;

// Small helpers shared by the CLI stages.

/// Shortest text that parses back to exactly v.
std::string format_double(double v);

/// Reads a "sample_id,<values...>" CSV with a header into a matrix, dropping
/// the id column.
Matrix read_indexed_matrix(const std::filesystem::path& path);
void write_indexed_matrix(const Matrix& m, const std::string& column_prefix,
                          const std::filesystem::path& path);

/// Reads integer labels from the last column of a CSV with a header.
std::vector<int> read_label_column(const std::filesystem::path& path);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

}  // namespace den
