#include "den/data_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace den {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Parses a numeric cell; nullopt when the text is not a number at all.
std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::uint32_t read_be32(std::istream& in, const fs::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4))
    throw DataError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

void Dataset::validate() const {
  if (samples.rows() < 2) throw DataError("dataset needs at least 2 samples");
  if (samples.cols() < 1) throw DataError("dataset needs at least 1 feature");
  if (!samples.allFinite()) throw DataError("dataset contains NaN or Inf");
  if (labels && static_cast<Eigen::Index>(labels->size()) != samples.rows())
    throw DataError("label count does not match sample count");
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != samples.cols())
    throw DataError("feature name count does not match feature count");
  if (kind == DataKind::kTokens) {
    if (vocab_size < 1) throw DataError("token dataset needs a positive vocab_size");
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      const double t = samples.data()[i];
      if (t != std::floor(t) || t < 0 || t >= vocab_size)
        throw DataError("token id out of range [0, vocab_size)");
    }
  }
}

Dataset load_csv(const fs::path& path, bool has_labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split_row(line);
    if (header.empty() && rows.empty()) {
      const bool numeric = std::all_of(cells.begin(), cells.end(), [](const std::string& c) {
        return parse_number(c).has_value();
      });
      if (!numeric) {
        header = std::move(cells);
        width = header.size();
        continue;
      }
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw DataError(path.string() + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " columns, expected " + std::to_string(width));
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(cells[c]);
      if (!v || !std::isfinite(*v))
        throw DataError(path.string() + ": bad value '" + cells[c] + "' at row " +
                        std::to_string(line_no) + ", column " + std::to_string(c + 1));
      row[c] = *v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");

  const bool label_col = has_labels || (!header.empty() && header.back() == "label");
  if (label_col && width < 2) throw DataError(path.string() + ": label column leaves no features");
  const std::size_t d = label_col ? width - 1 : width;

  Dataset out;
  out.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < d; ++c)
      out.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (label_col) {
    std::vector<int> labels(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double v = rows[r].back();
      if (v != std::floor(v))
        throw DataError(path.string() + ": non-integer label at row " + std::to_string(r + 1));
      labels[r] = static_cast<int>(v);
    }
    out.labels = std::move(labels);
  }
  if (!header.empty()) out.feature_names.assign(header.begin(), header.begin() + static_cast<long>(d));
  out.validate();
  return out;
}

void write_csv(const Dataset& data, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (int c = 0; c < data.d(); ++c) {
    if (c) out << ',';
    out << (data.feature_names.empty() ? "f" + std::to_string(c)
                                       : data.feature_names[static_cast<std::size_t>(c)]);
  }
  if (data.labels) out << ",label";
  out << '\n';
  for (int r = 0; r < data.n(); ++r) {
    for (int c = 0; c < data.d(); ++c) {
      if (c) out << ',';
      out << format_double(data.samples(r, c));
    }
    if (data.labels) out << ',' << (*data.labels)[static_cast<std::size_t>(r)];
    out << '\n';
  }
}

Dataset load_idx(const fs::path& images_path, const fs::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open " + labels_path.string());

  if (const auto magic = read_be32(img, images_path); magic != 0x00000803)
    throw DataError(images_path.string() + ": bad IDX image magic");
  const auto count = read_be32(img, images_path);
  const auto rows = read_be32(img, images_path);
  const auto cols = read_be32(img, images_path);

  if (const auto magic = read_be32(lab, labels_path); magic != 0x00000801)
    throw DataError(labels_path.string() + ": bad IDX label magic");
  const auto label_count = read_be32(lab, labels_path);
  if (label_count != count)
    throw DataError("IDX image count " + std::to_string(count) + " does not match label count " +
                    std::to_string(label_count));

  const std::size_t d = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(std::size_t{count} * d);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
    throw DataError(images_path.string() + ": truncated pixel data");
  std::vector<unsigned char> raw_labels(count);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(count)))
    throw DataError(labels_path.string() + ": truncated label data");

  Dataset out;
  out.samples.resize(count, static_cast<Eigen::Index>(d));
  for (std::uint32_t i = 0; i < count; ++i)
    for (std::size_t p = 0; p < d; ++p)
      out.samples(i, static_cast<Eigen::Index>(p)) = pixels[i * d + p] / 255.0;
  out.labels = std::vector<int>(raw_labels.begin(), raw_labels.end());
  out.validate();
  return out;
}

Dataset standardize(const Dataset& data) {
  Dataset out = data;
  const auto n = static_cast<double>(data.samples.rows());
  for (Eigen::Index c = 0; c < data.samples.cols(); ++c) {
    auto col = out.samples.col(c);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    col /= std::max(sd, kStdFloor);
  }
  return out;
}

Dataset as_tokens(Dataset data, int vocab_size) {
  data.kind = DataKind::kTokens;
  data.vocab_size = vocab_size;
  data.validate();
  return data;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

Matrix read_indexed_matrix(const fs::path& path) {
  Dataset raw = load_csv(path, false);
  if (raw.d() < 2) throw DataError(path.string() + ": expected sample_id plus value columns");
  return raw.samples.rightCols(raw.d() - 1);
}

void write_indexed_matrix(const Matrix& m, const std::string& column_prefix, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "sample_id";
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << column_prefix << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

std::vector<int> read_label_column(const fs::path& path) {
  Dataset raw = load_csv(path, true);
  return *raw.labels;
}

void write_labels(const std::vector<int>& labels, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "sample_id,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

}  // namespace den
