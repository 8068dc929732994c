#include "rotorfall/plot.hpp"

#include "rotorfall/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rotorfall::plot {
namespace {

constexpr int kWidth = 900;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) < 1e-9) v = 0.0;
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void include(const std::vector<double>& values) {
    for (double v : values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  // Pads flat ranges so the axis stays readable.
  Range padded() const {
    Range r = *this;
    const double span = hi - lo;
    const double pad = span > 1e-9 ? 0.05 * span : 0.5;
    r.lo -= pad;
    r.hi += pad;
    return r;
  }
};

Range range_of(std::initializer_list<const std::vector<double>*> series) {
  Range r;
  bool first = true;
  for (const auto* s : series) {
    for (double v : *s) {
      if (!std::isfinite(v)) continue;
      if (first) {
        r.lo = r.hi = v;
        first = false;
      }
      r.lo = std::min(r.lo, v);
      r.hi = std::max(r.hi, v);
    }
  }
  return r.padded();
}

// "Nice" tick spacing: 1, 2 or 5 times a power of ten.
double tick_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  return (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
}

struct Panel {
  double x0, y0, w, h;
  Range xr, yr;

  double px(double x) const { return x0 + (x - xr.lo) / (xr.hi - xr.lo) * w; }
  double py(double y) const { return y0 + h - (y - yr.lo) / (yr.hi - yr.lo) * h; }
};

void frame(std::ostream& out, const Panel& p, const std::string& ylabel, const std::string& xlabel) {
  out << "<rect x=\"" << f2(p.x0) << "\" y=\"" << f2(p.y0) << "\" width=\"" << f2(p.w) << "\" height=\""
      << f2(p.h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  const double xs = tick_step(p.xr.hi - p.xr.lo);
  for (double t = std::ceil(p.xr.lo / xs) * xs; t <= p.xr.hi + 1e-12; t += xs) {
    const double x = p.px(t);
    out << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(p.y0 + p.h) << "\" x2=\"" << f2(x) << "\" y2=\""
        << f2(p.y0 + p.h + 4) << "\" stroke=\"#444\"/>";
    out << "<text x=\"" << f2(x) << "\" y=\"" << f2(p.y0 + p.h + 16) << "\" text-anchor=\"middle\">"
        << tick_label(t) << "</text>\n";
  }
  const double ys = tick_step(p.yr.hi - p.yr.lo);
  for (double t = std::ceil(p.yr.lo / ys) * ys; t <= p.yr.hi + 1e-12; t += ys) {
    const double y = p.py(t);
    out << "<line x1=\"" << f2(p.x0) << "\" y1=\"" << f2(y) << "\" x2=\"" << f2(p.x0 + p.w) << "\" y2=\"" << f2(y)
        << "\" stroke=\"#ddd\"/>";
    out << "<text x=\"" << f2(p.x0 - 6) << "\" y=\"" << f2(y + 4) << "\" text-anchor=\"end\">" << tick_label(t)
        << "</text>\n";
  }
  out << "<text x=\"" << f2(p.x0 - 48) << "\" y=\"" << f2(p.y0 + p.h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
      << f2(p.x0 - 48) << ' ' << f2(p.y0 + p.h / 2) << ")\">" << ylabel << "</text>\n";
  if (!xlabel.empty()) {
    out << "<text x=\"" << f2(p.x0 + p.w / 2) << "\" y=\"" << f2(p.y0 + p.h + 34) << "\" text-anchor=\"middle\">"
        << xlabel << "</text>\n";
  }
}

void polyline(std::ostream& out, const std::vector<double>& xs, const std::vector<double>& ys, const Panel& p,
              const char* color, bool dashed) {
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
  if (dashed) out << " stroke-dasharray=\"6 4\"";
  out << " points=\"";
  bool first = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    if (!first) out << ' ';
    out << f2(p.px(xs[i])) << ',' << f2(p.py(ys[i]));
    first = false;
  }
  out << "\"/>\n";
}

void legend(std::ostream& out, double x, double y, const std::vector<std::pair<std::string, const char*>>& entries,
            bool second_dashed = false) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double yy = y + 16.0 * static_cast<double>(i);
    out << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(yy) << "\" x2=\"" << f2(x + 24) << "\" y2=\"" << f2(yy)
        << "\" stroke=\"" << entries[i].second << "\" stroke-width=\"2\"";
    if (second_dashed && i == 1) out << " stroke-dasharray=\"6 4\"";
    out << "/><text x=\"" << f2(x + 30) << "\" y=\"" << f2(yy + 4) << "\">" << entries[i].first << "</text>\n";
  }
}

std::string header(int height, const std::string& title) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  return out.str();
}

std::string coords_svg(const TrajectoryLog& log) {
  const int height = 3 * 220 + 60;
  std::ostringstream out;
  out << header(height, "Coordinates");
  const auto& t = log.column("t");
  const char* axes[] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    const auto& actual = log.column(axes[k]);
    const auto& goal = log.column(std::string("goal_") + axes[k]);
    Panel p{80.0, 40.0 + 220.0 * k, kWidth - 110.0, 170.0, range_of({&t}), range_of({&actual, &goal})};
    p.xr = Range{t.empty() ? 0.0 : t.front(), t.empty() || t.back() <= t.front() ? 1.0 : t.back()};
    frame(out, p, std::string(axes[k]) + " [m]", k == 2 ? "time [s]" : "");
    polyline(out, t, goal, p, "#888888", true);
    polyline(out, t, actual, p, kPalette[k], false);
    legend(out, p.x0 + p.w - 90, p.y0 + 14, {{"actual", kPalette[k]}, {"goal", "#888888"}}, true);
  }
  out << "</svg>\n";
  return out.str();
}

std::string pwm_svg(const TrajectoryLog& log) {
  const int height = 420;
  std::ostringstream out;
  out << header(height, "Motor PWMs");
  const auto& t = log.column("t");
  Panel p{80.0, 40.0, kWidth - 110.0, 320.0, Range{}, Range{-0.05, 1.05}};
  p.xr = Range{t.empty() ? 0.0 : t.front(), t.empty() || t.back() <= t.front() ? 1.0 : t.back()};
  frame(out, p, "PWM", "time [s]");
  std::vector<std::pair<std::string, const char*>> entries;
  for (int i = 0; i < 4; ++i) {
    const std::string name = "pwm" + std::to_string(i + 1);
    polyline(out, t, log.column(name), p, kPalette[i], false);
    entries.emplace_back("rotor " + std::to_string(i + 1), kPalette[i]);
  }
  legend(out, p.x0 + p.w - 90, p.y0 + 14, entries);
  out << "</svg>\n";
  return out.str();
}

// Orthographic view from azimuth 45 deg, elevation 30 deg. NED z is drawn
// with up on screen meaning -z (altitude).
std::string traj3d_svg(const TrajectoryLog& log) {
  const int height = 700;
  const double az = 45.0 * M_PI / 180.0;
  const double el = 30.0 * M_PI / 180.0;
  auto project = [&](double x, double y, double z) {
    const double up = -z;
    const double u = -std::sin(az) * x + std::cos(az) * y;
    const double v = -std::sin(el) * std::cos(az) * x - std::sin(el) * std::sin(az) * y + std::cos(el) * up;
    return std::pair<double, double>{u, v};
  };
  auto projected = [&](const char* xc, const char* yc, const char* zc) {
    const auto& x = log.column(xc);
    const auto& y = log.column(yc);
    const auto& z = log.column(zc);
    std::vector<double> us(x.size()), vs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) std::tie(us[i], vs[i]) = project(x[i], y[i], z[i]);
    return std::pair{us, vs};
  };
  const auto [au, av] = projected("x", "y", "z");
  const auto [gu, gv] = projected("goal_x", "goal_y", "goal_z");

  Range ur = range_of({&au, &gu});
  Range vr = range_of({&av, &gv});
  // Equal scale on both screen axes.
  const double span = std::max(ur.hi - ur.lo, vr.hi - vr.lo);
  const double uc = 0.5 * (ur.lo + ur.hi);
  const double vc = 0.5 * (vr.lo + vr.hi);
  const double side = 600.0;
  Panel p{(kWidth - side) / 2.0, 50.0, side, side, Range{uc - span / 2, uc + span / 2},
          Range{vc - span / 2, vc + span / 2}};

  std::ostringstream out;
  out << header(height, "Trajectory (orthographic)");
  out << "<rect x=\"" << f2(p.x0) << "\" y=\"" << f2(p.y0) << "\" width=\"" << f2(p.w) << "\" height=\"" << f2(p.h)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // Axis triad at the origin, one unit long.
  const char* names[] = {"N", "E", "Up"};
  const double dirs[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, -1}};
  const auto [ou, ov] = project(0, 0, 0);
  for (int k = 0; k < 3; ++k) {
    const auto [eu, ev] = project(dirs[k][0], dirs[k][1], dirs[k][2]);
    out << "<line x1=\"" << f2(p.px(ou)) << "\" y1=\"" << f2(p.py(ov)) << "\" x2=\"" << f2(p.px(eu)) << "\" y2=\""
        << f2(p.py(ev)) << "\" stroke=\"#999\"/><text x=\"" << f2(p.px(eu) + 3) << "\" y=\"" << f2(p.py(ev) - 3)
        << "\" fill=\"#666\">" << names[k] << "</text>\n";
  }
  polyline(out, gu, gv, p, "#888888", true);
  polyline(out, au, av, p, kPalette[0], false);
  if (!au.empty()) {
    out << "<circle cx=\"" << f2(p.px(au.front())) << "\" cy=\"" << f2(p.py(av.front()))
        << "\" r=\"4\" fill=\"#2ca02c\"/>\n";
    out << "<circle cx=\"" << f2(p.px(au.back())) << "\" cy=\"" << f2(p.py(av.back()))
        << "\" r=\"4\" fill=\"#d62728\"/>\n";
  }
  legend(out, p.x0 + 10, p.y0 + 16, {{"actual", kPalette[0]}, {"goal", "#888888"}}, true);
  out << "<text x=\"" << f2(p.x0 + p.w - 8) << "\" y=\"" << f2(p.y0 + p.h - 8) << "\" text-anchor=\"end\">scale "
      << tick_label(span) << " m across</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::optional<Kind> parse_kind(std::string_view name) {
  if (name == "coords") return Kind::kCoords;
  if (name == "pwm") return Kind::kPwm;
  if (name == "traj3d") return Kind::kTraj3d;
  return std::nullopt;
}

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kCoords: return "coords";
    case Kind::kPwm: return "pwm";
    case Kind::kTraj3d: return "traj3d";
  }
  return "unknown";
}

const std::vector<double>& TrajectoryLog::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return data[i];
  }
  throw std::out_of_range("no column " + std::string(name));
}

TrajectoryLog parse_trajectory_csv(std::string_view text) {
  TrajectoryLog log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line_no == 1) {
      if (line != kTrajectoryHeader) {
        throw CsvError(1, "unexpected header; expected " + std::string(kTrajectoryHeader));
      }
      for (auto name : split(line)) log.columns.emplace_back(name);
      log.data.resize(log.columns.size());
      continue;
    }
    if (line.empty()) {
      if (pos >= text.size()) break;
      throw CsvError(line_no, "empty line");
    }
    const auto fields = split(line);
    if (fields.size() != log.columns.size()) {
      throw CsvError(line_no, "expected " + std::to_string(log.columns.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string_view f = fields[i];
      double v = 0.0;
      if (f == "nan") {
        v = std::nan("");
      } else {
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc() || ptr != f.data() + f.size()) {
          throw CsvError(line_no, "column " + log.columns[i] + ": not a number: '" + std::string(f) + "'");
        }
      }
      log.data[i].push_back(v);
    }
  }
  if (line_no == 0) throw CsvError(1, "empty file");
  if (log.rows() == 0) throw CsvError(line_no + 1, "no data rows");
  return log;
}

TrajectoryLog read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory_csv(ss.str());
}

std::string render_svg(const TrajectoryLog& log, Kind kind) {
  switch (kind) {
    case Kind::kCoords: return coords_svg(log);
    case Kind::kPwm: return pwm_svg(log);
    case Kind::kTraj3d: return traj3d_svg(log);
  }
  throw std::invalid_argument("unknown plot kind");
}

}  // namespace rotorfall::plot
