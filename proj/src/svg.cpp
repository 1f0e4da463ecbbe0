#include "decodewin/svg.hpp"

#include "decodewin/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace decodewin {
namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 20.0;
constexpr double kBottom = 60.0;

constexpr std::array<const char*, 6> kPalette = {"#e07b00", "#c0262d", "#1f5fbf", "#2e8b3d", "#000000", "#7a3fb0"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

// Tick spacing from {1, 2, 5} x 10^k giving at most ~10 ticks.
double tick_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 10.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

} // namespace

std::string render_svg(std::span<const DecodabilityCurve> curves) {
  if (curves.empty()) throw UsageError("nothing to plot");
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_hi = 1.0;
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      x_lo = std::min(x_lo, c.offsets_ms[i]);
      x_hi = std::max(x_hi, c.offsets_ms[i]);
      if (c.accuracies[i]) y_hi = std::max(y_hi, *c.accuracies[i]);
    }
  }
  if (!(x_hi > x_lo)) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - y / y_hi) * plot_h; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" viewBox=\"0 0 800 480\">\n";
  s += "<rect width=\"800\" height=\"480\" fill=\"white\"/>\n";
  // axes
  s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop + plot_h) + "\" x2=\"" + fmt(kLeft + plot_w) + "\" y2=\"" +
       fmt(kTop + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" +
       fmt(kTop + plot_h) + "\" stroke=\"black\"/>\n";

  const double xs = tick_step(x_hi - x_lo);
  for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-9; t += xs) {
    const double x = px(t);
    s += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(kTop + plot_h) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
         fmt(kTop + plot_h + 5) + "\" stroke=\"black\"/>\n";
    char label[32];
    std::snprintf(label, sizeof label, "%g", std::abs(t) < 1e-9 ? 0.0 : t);
    s += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(kTop + plot_h + 20) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + label + "</text>\n";
  }
  const double ys = tick_step(y_hi);
  for (double t = 0.0; t <= y_hi + 1e-9; t += ys) {
    const double y = py(t);
    s += "<line x1=\"" + fmt(kLeft - 5) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" + fmt(y) +
         "\" stroke=\"black\"/>\n";
    char label[32];
    std::snprintf(label, sizeof label, "%.1f", t);
    s += "<text x=\"" + fmt(kLeft - 8) + "\" y=\"" + fmt(y + 4) + "\" font-size=\"12\" text-anchor=\"end\">" +
         label + "</text>\n";
  }
  s += "<text x=\"" + fmt(kLeft + plot_w / 2) + "\" y=\"" + fmt(kHeight - 15) +
       "\" font-size=\"13\" text-anchor=\"middle\">time relative to phone onset (ms)</text>\n";
  s += "<text x=\"18\" y=\"" + fmt(kTop + plot_h / 2) + "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       fmt(kTop + plot_h / 2) + ")\">accuracy</text>\n";

  if (x_lo <= 0.0 && x_hi >= 0.0) {
    s += "<line x1=\"" + fmt(px(0.0)) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(px(0.0)) + "\" y2=\"" +
         fmt(kTop + plot_h) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c];
    const char* color = kPalette[c % kPalette.size()];
    std::string points;
    auto flush = [&] {
      if (points.empty()) return;
      s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
           "\"/>\n";
      points.clear();
    };
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (!curve.accuracies[i]) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += fmt(px(curve.offsets_ms[i])) + "," + fmt(py(*curve.accuracies[i]));
    }
    flush();

    const double ly = kTop + 10 + 18 * static_cast<double>(c);
    const double lx = kLeft + plot_w - 220;
    s += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(lx + 24) + "\" y2=\"" + fmt(ly) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(lx + 30) + "\" y=\"" + fmt(ly + 4) + "\" font-size=\"12\">" +
         escape(curve.meta.label()) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void emit_svg(std::span<const DecodabilityCurve> curves, const std::filesystem::path& path) {
  const std::string svg = render_svg(curves);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  out << svg;
  if (!out) throw IoError(path.string(), "write failed");
}

} // namespace decodewin
