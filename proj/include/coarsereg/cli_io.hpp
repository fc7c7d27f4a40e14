#pragma once

#include "coarsereg/data_model.hpp"
#include "coarsereg/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coarse {

inline constexpr const char* kVersion = "0.1.0";

//! Shortest decimal form that parses back to the same double (at most 17
//! significant digits); "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double value);

//! Strict full-string parse. Returns nullopt on garbage or trailing text.
std::optional<double> parse_double(std::string_view text);

//! `lo:hi:count`, count >= 2, lo < hi.
EvalGrid parse_grid_spec(std::string_view spec);
//! `gaussian:sigma`, `laplace:b` or `uniform:a`.
ErrorDensity parse_density_spec(std::string_view spec);

//! Minimal RFC 4180 reader: comma separated, optional double quotes, LF or
//! CRLF line ends. Blank lines are skipped.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  //! Index of a header column, nullopt if absent.
  std::optional<std::size_t> column(std::string_view name) const;
  //! Finite number at (row, column); Data error naming file:line:column otherwise.
  double number(const CsvRow& row, std::size_t column) const;
};

CsvTable parse_csv(std::string_view text, std::string source);
CsvTable read_csv(const std::filesystem::path& path);

//! Header `w,y`. With `accept_x`, a header `x,y` is accepted as well (for
//! fits on contaminated predictors).
TrainingSample read_training_csv(const std::filesystem::path& path, bool accept_x = false);
//! Header `group,u`; groups are formed by string equality of the id, in
//! order of first appearance.
ReplicatedSample read_replicates_csv(const std::filesystem::path& path);

struct ProxyData {
  std::vector<double> t;
  std::vector<double> x;
  std::optional<std::vector<double>> y;
};
//! Header `t,x` with an optional `y` column.
ProxyData read_proxy_csv(const std::filesystem::path& path);

//! Name of the value column for a curve: `m_hat` unless the label names a
//! different estimator.
std::string value_column(const RegressionCurve& curve);

//! `x,<value>` or, with a variance, `x,<value>,v_hat,lower,upper`.
//! Undefined points are written as `nan`.
std::string curve_to_csv(const RegressionCurve& curve);
//! Inverse of curve_to_csv (values only; bands are read when present).
RegressionCurve curve_from_csv(std::string_view text, std::string source = "<memory>");

nlohmann::json curve_to_json(const RegressionCurve& curve);
nlohmann::json scenario_to_json(const ScenarioConfig& scenario);
nlohmann::json study_report_to_json(const StudyReport& report);
//! Grid, truth and the decile curves as `x,truth,decile_1,decile_5,decile_9`.
std::string decile_curves_to_csv(const StudyReport& report);

nlohmann::json provenance(const std::vector<std::string>& args, std::optional<std::uint64_t> seed);

//! Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

//! Full command-line entry point. Returns the process exit status: 0 on
//! success, 2 for usage errors, 1 for everything else. Failures print a
//! JSON error record to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace coarse
