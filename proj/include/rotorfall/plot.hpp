#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rotorfall::plot {

enum class Kind { kCoords, kPwm, kTraj3d };

std::optional<Kind> parse_kind(std::string_view name);
std::string_view to_string(Kind kind);

/// Malformed trajectory log. `line` is 1-based (the header is line 1).
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Columns of a trajectory log, one vector per column in header order.
struct TrajectoryLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;

  std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }
  /// Throws std::out_of_range for an unknown column.
  const std::vector<double>& column(std::string_view name) const;
};

/// Parses text with exactly the trajectory header and one numeric row per line.
TrajectoryLog parse_trajectory_csv(std::string_view text);
TrajectoryLog read_trajectory_csv(const std::filesystem::path& path);

/// Standalone SVG document. Output depends only on the log contents.
std::string render_svg(const TrajectoryLog& log, Kind kind);

}  // namespace rotorfall::plot
