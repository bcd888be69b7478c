#include <cmath>
#include <sstream>

#include "tempo/core/io.hpp"
#include "tempo/gen/generator.hpp"

namespace tempo::gen {

using nn::Index;
using nn::Matrix;

std::string trajectory_csv(const Matrix& frames) {
  if (frames.cols() != data::kChannels) throw Error(Errc::ShapeError, "trajectory must have 18 channels");
  std::string out = "t";
  for (int c = 0; c < data::kChannels; ++c) (out += ',') += data::channel_name(c);
  out += '\n';
  for (Index r = 0; r < frames.rows(); ++r) {
    out += format_double(static_cast<double>(r) / data::kRate);
    for (int c = 0; c < data::kChannels; ++c) (out += ',') += format_double(frames(r, c));
    out += '\n';
  }
  return out;
}

Matrix parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line) && line.rfind('#', 0) == 0) {
  }
  if (line.rfind("t,", 0) != 0)
    throw Error(Errc::FormatError, "trajectory CSV must start with a t,... header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw Error(Errc::FormatError, "bad number '" + cell + "' in trajectory CSV");
      row.push_back(v);
      pos = comma + 1;
    }
    if (row.size() != data::kChannels + 1) throw Error(Errc::FormatError, "trajectory rows need 19 fields");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), data::kChannels);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < data::kChannels; ++c) m(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c) + 1];
  return m;
}

namespace {

constexpr double kPanelW = 300.0;
constexpr double kPanelH = 120.0;
constexpr int kColumns = 3;

std::string polyline(const std::vector<double>& ys, double lo, double hi, double x0, double y0,
                     const char* cls, const char* colour, std::size_t steps) {
  std::string pts;
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = x0 + 10.0 + (kPanelW - 20.0) * (steps > 1 ? static_cast<double>(i) / static_cast<double>(steps - 1) : 0.0);
    const double y = y0 + kPanelH - 10.0 - (kPanelH - 30.0) * (ys[i] - lo) / span;
    if (!pts.empty()) pts += ' ';
    pts += format_double(std::round(x * 100) / 100) + "," + format_double(std::round(y * 100) / 100);
  }
  return "<polyline class=\"" + std::string(cls) + "\" fill=\"none\" stroke=\"" + colour + "\" points=\"" + pts +
         "\"/>\n";
}

std::vector<double> column(const Matrix& m, int c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

}  // namespace

std::string overlay_svg(const Matrix& generated, const Matrix* real, const Envelope& envelope) {
  if (generated.cols() != data::kChannels || (real && real->cols() != data::kChannels))
    throw Error(Errc::ShapeError, "overlay traces must have 18 channels");
  const int rows = (data::kChannels + kColumns - 1) / kColumns;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPanelW * kColumns << "\" height=\""
      << kPanelH * rows << "\">\n";
  const std::size_t steps = static_cast<std::size_t>(std::max<Index>(generated.rows(), real ? real->rows() : 0));
  for (int c = 0; c < data::kChannels; ++c) {
    const double x0 = kPanelW * (c % kColumns);
    const double y0 = kPanelH * (c / kColumns);
    double lo = envelope.lo[c], hi = envelope.hi[c];
    auto widen = [&](const Matrix& m) {
      if (m.rows() == 0) return;
      lo = std::min(lo, m.col(c).minCoeff());
      hi = std::max(hi, m.col(c).maxCoeff());
    };
    widen(generated);
    if (real) widen(*real);
    svg << "<g class=\"channel\" id=\"" << data::channel_name(c) << "\">\n";
    svg << "<text x=\"" << x0 + 10 << "\" y=\"" << y0 + 14 << "\" font-size=\"11\">" << data::channel_name(c)
        << "</text>\n";
    svg << polyline(std::vector<double>(steps, envelope.lo[c]), lo, hi, x0, y0, "envelope", "#bbbbbb", steps);
    svg << polyline(std::vector<double>(steps, envelope.hi[c]), lo, hi, x0, y0, "envelope", "#bbbbbb", steps);
    if (real) svg << polyline(column(*real, c), lo, hi, x0, y0, "real", "#1f77b4", steps);
    svg << polyline(column(generated, c), lo, hi, x0, y0, "generated", "#d62728", steps);
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tempo::gen
