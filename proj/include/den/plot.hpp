#pragma once

#include "den/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace den {

/// Scatter plot of N x 2 points as SVG: one <circle> per point, colored by
/// label from a 10-color categorical palette (cycled), with a legend of
/// swatches. Empty labels draw every point in the first color. The output
/// bytes depend only on the inputs. Throws DataError unless points has two
/// columns.
std::string scatter_svg(const Matrix& points, const std::vector<int>& labels, const std::string& title = "");
void plot_scatter(const Matrix& points, const std::vector<int>& labels, const std::filesystem::path& path,
                  const std::string& title = "");

/// The categorical palette, as "#rrggbb".
const std::vector<std::string>& palette();

}  // namespace den
