#include "pdegp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pdegp {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 170, kT = 40, kB = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kL) << "\" y=\"22\" font-size=\"14\">" << escape(title) << "</text>\n";
}

}  // namespace

std::string svg_lines(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series, bool log_y) {
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  if (!log_y && y0 > 0) y0 = 0;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double v) { return kL + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return kT + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  std::ostringstream os;
  header(os, title);
  os << "<rect x=\"" << num(kL) << "\" y=\"" << num(kT) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kT + ph + 16)
       << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    const double ypix = kT + ph - (yv - y0) / (y1 - y0) * ph;
    os << "<text x=\"" << num(kL - 6) << "\" y=\"" << num(ypix + 4) << "\" text-anchor=\"end\">"
       << tick(log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
  }
  os << "<text x=\"" << num(kL + pw / 2) << "\" y=\"" << num(kH - 10)
     << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(kT + ph / 2) << "\" transform=\"rotate(-90 16 "
     << num(kT + ph / 2) << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % 10];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0)) continue;
      os << (first ? "" : " ") << num(px(s.x[i])) << "," << num(py(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = kT + 12 + 16 * static_cast<double>(k);
    os << "<line x1=\"" << num(kW - kR + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
       << num(kW - kR + 30) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kW - kR + 34) << "\" y=\"" << num(ly) << "\">" << escape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const std::string& title, const Vec& x, const Vec& y, const Mat& z,
                        int levels) {
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  const double x0 = x(0), x1 = x(x.size() - 1), y0 = y(0), y1 = y(y.size() - 1);
  auto px = [&](double v) { return kL + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return kT + ph - (v - y0) / (y1 - y0) * ph; };
  const double zmax = std::max(z.maxCoeff(), 1e-300);

  std::ostringstream os;
  header(os, title);
  // At most 64 shaded cells per axis.
  const Eigen::Index sx = std::max<Eigen::Index>(1, (x.size() + 63) / 64);
  const Eigen::Index sy = std::max<Eigen::Index>(1, (y.size() + 63) / 64);
  for (Eigen::Index i = 0; i + sx < x.size() + sx - 1 && i < x.size() - 1; i += sx) {
    const Eigen::Index i2 = std::min(i + sx, x.size() - 1);
    for (Eigen::Index j = 0; j < y.size() - 1; j += sy) {
      const Eigen::Index j2 = std::min(j + sy, y.size() - 1);
      const double v = z(i, j) / zmax;
      const int shade = static_cast<int>(std::lround(255 * (1 - v)));
      os << "<rect x=\"" << num(px(x(i))) << "\" y=\"" << num(py(y(j2))) << "\" width=\""
         << num(px(x(i2)) - px(x(i)) + 0.3) << "\" height=\"" << num(py(y(j)) - py(y(j2)) + 0.3)
         << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"/>\n";
    }
  }
  // Marching squares on the full lattice.
  for (int l = 1; l <= levels; ++l) {
    const double iso = zmax * l / (levels + 1.0);
    os << "<path fill=\"none\" stroke=\"black\" stroke-width=\"0.8\" d=\"";
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      for (Eigen::Index j = 0; j + 1 < y.size(); ++j) {
        const double c[4] = {z(i, j), z(i + 1, j), z(i + 1, j + 1), z(i, j + 1)};
        const double cx[4] = {x(i), x(i + 1), x(i + 1), x(i)};
        const double cy[4] = {y(j), y(j), y(j + 1), y(j + 1)};
        double ex[4], ey[4];
        int n = 0;
        for (int e = 0; e < 4; ++e) {
          const int a = e, b = (e + 1) % 4;
          if ((c[a] < iso) != (c[b] < iso)) {
            const double t = (iso - c[a]) / (c[b] - c[a]);
            ex[n] = cx[a] + t * (cx[b] - cx[a]);
            ey[n] = cy[a] + t * (cy[b] - cy[a]);
            ++n;
          }
        }
        for (int k = 0; k + 1 < n; k += 2) {
          os << "M" << num(px(ex[k])) << " " << num(py(ey[k])) << "L" << num(px(ex[k + 1])) << " "
             << num(py(ey[k + 1]));
        }
      }
    }
    os << "\"/>\n";
  }
  os << "<rect x=\"" << num(kL) << "\" y=\"" << num(kT) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kT + ph + 16)
       << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << num(kL - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
       << tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(kL + pw / 2) << "\" y=\"" << num(kH - 10)
     << "\" text-anchor=\"middle\">theta1</text>\n";
  os << "<text x=\"16\" y=\"" << num(kT + ph / 2) << "\" transform=\"rotate(-90 16 "
     << num(kT + ph / 2) << ")\" text-anchor=\"middle\">theta2</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace pdegp
