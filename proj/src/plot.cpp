#include "den/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace den {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kMargin = 50;
constexpr double kLegendWidth = 110;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors;
}

std::string scatter_svg(const Matrix& points, const std::vector<int>& labels, const std::string& title) {
  if (points.cols() != 2)
    throw DataError("scatter plot needs 2-D points, got " + std::to_string(points.cols()) + " columns");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != points.rows())
    throw DataError("scatter plot: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(points.rows()) + " points");

  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  auto color_of = [&](int label) {
    const auto pos = std::lower_bound(classes.begin(), classes.end(), label) - classes.begin();
    return palette()[static_cast<std::size_t>(pos) % palette().size()];
  };

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (points.rows() > 0) {
    x0 = points.col(0).minCoeff();
    x1 = points.col(0).maxCoeff();
    y0 = points.col(1).minCoeff();
    y1 = points.col(1).maxCoeff();
    if (x1 - x0 <= 0) { x0 -= 1; x1 += 1; }
    if (y1 - y0 <= 0) { y0 -= 1; y1 += 1; }
  }
  const double plot_w = kWidth - 2 * kMargin - kLegendWidth;
  const double plot_h = kHeight - 2 * kMargin;
  auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * plot_w; };
  auto py = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"#ffffff\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"16\">" << escape(title) << "</text>\n";
  // Axes with min/max tick labels.
  out << "<g stroke=\"#000000\" stroke-width=\"1\">\n"
      << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kHeight - kMargin) << "\" x2=\"" << fmt(kMargin + plot_w)
      << "\" y2=\"" << fmt(kHeight - kMargin) << "\"/>\n"
      << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kMargin) << "\" x2=\"" << fmt(kMargin) << "\" y2=\""
      << fmt(kHeight - kMargin) << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"10\">\n"
      << "<text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 15) << "\">" << fmt(x0) << "</text>\n"
      << "<text x=\"" << fmt(kMargin + plot_w) << "\" y=\"" << fmt(kHeight - kMargin + 15)
      << "\" text-anchor=\"end\">" << fmt(x1) << "</text>\n"
      << "<text x=\"" << fmt(kMargin - 5) << "\" y=\"" << fmt(kHeight - kMargin) << "\" text-anchor=\"end\">"
      << fmt(y0) << "</text>\n"
      << "<text x=\"" << fmt(kMargin - 5) << "\" y=\"" << fmt(kMargin + 10) << "\" text-anchor=\"end\">" << fmt(y1)
      << "</text>\n</g>\n";

  out << "<g fill-opacity=\"0.8\">\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const std::string& color = labels.empty() ? palette()[0] : color_of(labels[static_cast<std::size_t>(i)]);
    out << "<circle cx=\"" << fmt(px(points(i, 0))) << "\" cy=\"" << fmt(py(points(i, 1))) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
  }
  out << "</g>\n";

  if (!classes.empty()) {
    const double lx = kWidth - kMargin - kLegendWidth + 20;
    out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const double ly = kMargin + 18.0 * static_cast<double>(c);
      out << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly) << "\" width=\"10\" height=\"10\" fill=\""
          << palette()[c % palette().size()] << "\"/>\n"
          << "<text x=\"" << fmt(lx + 16) << "\" y=\"" << fmt(ly + 9) << "\">cluster " << classes[c] << "</text>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void plot_scatter(const Matrix& points, const std::vector<int>& labels, const std::filesystem::path& path,
                  const std::string& title) {
  const std::string svg = scatter_svg(points, labels, title);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << svg;
}

}  // namespace den
