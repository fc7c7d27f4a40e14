#include "coarsereg/cli_io.hpp"

#include "coarsereg/errors.hpp"
#include "coarsereg/fourier.hpp"
#include "coarsereg/inference.hpp"
#include "coarsereg/known_error.hpp"
#include "coarsereg/nadaraya_watson.hpp"
#include "coarsereg/numeric.hpp"
#include "coarsereg/proxy.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace coarse {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

json number_or_null(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

json numbers(std::span<const double> v)
{
  json a = json::array();
  for (double x : v)
    a.push_back(number_or_null(x));
  return a;
}

std::string read_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

std::string format_double(double value)
{
  if (std::isnan(value))
    return "nan";
  if (std::isinf(value))
    return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text)
{
  const std::string s = trim(text);
  if (s.empty())
    return std::nullopt;
  const char* first = s.data();
  if (*first == '+')
    ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

EvalGrid parse_grid_spec(std::string_view spec)
{
  const auto parts = split(spec, ':');
  if (parts.size() != 3)
    throw Error(ErrorCode::Usage, "--grid expects lo:hi:count, got '" + std::string(spec) + "'");
  const auto lo = parse_double(parts[0]);
  const auto hi = parse_double(parts[1]);
  const auto count = parse_double(parts[2]);
  if (!lo || !hi || !count || !std::isfinite(*lo) || !std::isfinite(*hi))
    throw Error(ErrorCode::Usage, "--grid: cannot parse '" + std::string(spec) + "'");
  if (*count < 2 || *count != std::floor(*count) || *count > 1e7)
    throw Error(ErrorCode::Usage, "--grid: count must be an integer >= 2");
  if (!(*lo < *hi))
    throw Error(ErrorCode::Usage, "--grid: lo must be below hi");
  return EvalGrid::uniform(*lo, *hi, static_cast<std::size_t>(*count));
}

ErrorDensity parse_density_spec(std::string_view spec)
{
  const auto parts = split(spec, ':');
  if (parts.size() != 2)
    throw Error(ErrorCode::Usage, "--delta expects kind:scale, got '" + std::string(spec) + "'");
  const auto scale = parse_double(parts[1]);
  if (!scale || !(*scale > 0.0) || !std::isfinite(*scale))
    throw Error(ErrorCode::Usage, "--delta: scale must be a positive number in '" + std::string(spec) + "'");
  if (parts[0] == "gaussian")
    return ErrorDensity::gaussian(*scale);
  if (parts[0] == "laplace")
    return ErrorDensity::laplace(*scale);
  if (parts[0] == "uniform")
    return ErrorDensity::uniform(*scale);
  throw Error(ErrorCode::Usage, "--delta: unknown kind '" + parts[0] + "' (gaussian, laplace, uniform)");
}

std::optional<std::size_t> CsvTable::column(std::string_view name) const
{
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return i;
  return std::nullopt;
}

double CsvTable::number(const CsvRow& row, std::size_t col) const
{
  const auto where = [&] {
    return source + ":" + std::to_string(row.line) + ":" + std::to_string(col + 1);
  };
  if (col >= row.fields.size())
    throw Error(ErrorCode::Data, where() + ": missing field");
  const auto v = parse_double(row.fields[col]);
  if (!v)
    throw Error(ErrorCode::Data, where() + ": not a number: '" + row.fields[col] + "'");
  if (!std::isfinite(*v))
    throw Error(ErrorCode::Data, where() + ": non-finite value '" + row.fields[col] + "'");
  return *v;
}

CsvTable parse_csv(std::string_view text, std::string source)
{
  CsvTable table;
  table.source = std::move(source);
  std::size_t line = 1;
  std::size_t i = 0;
  bool have_header = false;

  while (i < text.size()) {
    const std::size_t row_line = line;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    bool row_done = false;
    while (i < text.size() && !row_done) {
      const char c = text[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          quoted = false;
        } else {
          if (c == '\n')
            ++line;
          field += c;
        }
        ++i;
        continue;
      }
      switch (c) {
        case '"':
          if (!trim(field).empty())
            throw Error(ErrorCode::Data, table.source + ":" + std::to_string(line) + ":" +
                                           std::to_string(fields.size() + 1) + ": stray quote");
          field.clear();
          quoted = was_quoted = true;
          break;
        case ',':
          fields.push_back(was_quoted ? field : trim(field));
          field.clear();
          was_quoted = false;
          break;
        case '\r':
          break;
        case '\n':
          ++line;
          row_done = true;
          break;
        default:
          field += c;
      }
      ++i;
    }
    if (quoted)
      throw Error(ErrorCode::Data, table.source + ":" + std::to_string(row_line) + ": unterminated quote");
    fields.push_back(was_quoted ? field : trim(field));
    if (fields.size() == 1 && fields[0].empty() && !was_quoted)
      continue;
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw Error(ErrorCode::Data, table.source + ":" + std::to_string(row_line) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
    table.rows.push_back({row_line, std::move(fields)});
  }
  if (!have_header)
    throw Error(ErrorCode::Data, table.source + ": empty file");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path)
{
  return parse_csv(read_file(path), path.string());
}

namespace {

std::size_t require_column(const CsvTable& table, std::string_view name)
{
  const auto c = table.column(name);
  if (!c)
    throw Error(ErrorCode::Data, table.source + ":1: missing column '" + std::string(name) + "'");
  return *c;
}

} // namespace

TrainingSample read_training_csv(const std::filesystem::path& path, bool accept_x)
{
  const auto table = read_csv(path);
  std::size_t wc;
  if (accept_x && !table.column("w") && table.column("x"))
    wc = *table.column("x");
  else
    wc = require_column(table, "w");
  const std::size_t yc = require_column(table, "y");
  std::vector<double> w, y;
  for (const auto& row : table.rows) {
    w.push_back(table.number(row, wc));
    y.push_back(table.number(row, yc));
  }
  if (w.empty())
    throw Error(ErrorCode::Data, table.source + ": no data rows");
  return TrainingSample(std::move(w), std::move(y));
}

ReplicatedSample read_replicates_csv(const std::filesystem::path& path)
{
  const auto table = read_csv(path);
  const std::size_t gc = require_column(table, "group");
  const std::size_t uc = require_column(table, "u");
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> groups;
  std::vector<std::size_t> first_line;
  for (const auto& row : table.rows) {
    const double u = table.number(row, uc);
    const auto [it, inserted] = index.emplace(row.fields[gc], groups.size());
    if (inserted) {
      groups.emplace_back();
      first_line.push_back(row.line);
    }
    groups[it->second].push_back(u);
  }
  for (std::size_t j = 0; j < groups.size(); ++j)
    if (groups[j].size() < 2)
      throw Error(ErrorCode::Data, table.source + ":" + std::to_string(first_line[j]) + ":" +
                                     std::to_string(gc + 1) + ": group has a single measurement");
  if (groups.empty())
    throw Error(ErrorCode::Data, table.source + ": no data rows");
  return ReplicatedSample(std::move(groups));
}

ProxyData read_proxy_csv(const std::filesystem::path& path)
{
  const auto table = read_csv(path);
  const std::size_t tc = require_column(table, "t");
  const std::size_t xc = require_column(table, "x");
  const auto yc = table.column("y");
  ProxyData out;
  if (yc)
    out.y.emplace();
  for (const auto& row : table.rows) {
    out.t.push_back(table.number(row, tc));
    out.x.push_back(table.number(row, xc));
    if (yc)
      out.y->push_back(table.number(row, *yc));
  }
  if (out.t.empty())
    throw Error(ErrorCode::Data, table.source + ": no data rows");
  return out;
}

std::string value_column(const RegressionCurve& curve)
{
  if (curve.label == "m_tilde" || curve.label == "m_nw" || curve.label == "m_hat_proxy" ||
      curve.label == "m_tilde_proxy")
    return curve.label;
  return "m_hat";
}

std::string curve_to_csv(const RegressionCurve& curve)
{
  std::string out = "x," + value_column(curve);
  const bool bands = curve.variance && curve.band_lower && curve.band_upper;
  if (bands)
    out += ",v_hat,lower,upper";
  out += '\n';
  for (std::size_t j = 0; j < curve.grid.size(); ++j) {
    out += format_double(curve.grid[j]);
    out += ',';
    out += format_double(curve.defined[j] ? curve.values[j] : kNaN);
    if (bands) {
      out += ',' + format_double((*curve.variance)[j]);
      out += ',' + format_double((*curve.band_lower)[j]);
      out += ',' + format_double((*curve.band_upper)[j]);
    }
    out += '\n';
  }
  return out;
}

RegressionCurve curve_from_csv(std::string_view text, std::string source)
{
  const auto table = parse_csv(text, std::move(source));
  if (table.header.size() < 2 || table.header[0] != "x")
    throw Error(ErrorCode::Data, table.source + ":1: expected a curve header starting with 'x'");
  const bool bands = table.header.size() == 5 && table.header[2] == "v_hat";
  auto cell = [&](const CsvRow& row, std::size_t c) {
    const auto v = parse_double(row.fields[c]);
    if (!v || std::isinf(*v))
      throw Error(ErrorCode::Data, table.source + ":" + std::to_string(row.line) + ":" +
                                     std::to_string(c + 1) + ": not a number: '" + row.fields[c] + "'");
    return *v;
  };
  std::vector<double> x, v, var, lo, hi;
  for (const auto& row : table.rows) {
    x.push_back(table.number(row, 0));
    v.push_back(cell(row, 1));
    if (bands) {
      var.push_back(cell(row, 2));
      lo.push_back(cell(row, 3));
      hi.push_back(cell(row, 4));
    }
  }
  RegressionCurve curve{EvalGrid(std::move(x)), std::move(v), {}};
  curve.defined.resize(curve.values.size());
  for (std::size_t j = 0; j < curve.values.size(); ++j)
    curve.defined[j] = !std::isnan(curve.values[j]);
  curve.label = table.header[1];
  if (bands) {
    curve.variance = std::move(var);
    curve.band_lower = std::move(lo);
    curve.band_upper = std::move(hi);
  }
  return curve;
}

json curve_to_json(const RegressionCurve& curve)
{
  json j;
  j["label"] = curve.label;
  j["x"] = numbers(curve.grid.points());
  std::vector<double> values(curve.values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = curve.defined[i] ? curve.values[i] : kNaN;
  j[value_column(curve)] = numbers(values);
  if (curve.variance)
    j["v_hat"] = numbers(*curve.variance);
  if (curve.band_lower)
    j["lower"] = numbers(*curve.band_lower);
  if (curve.band_upper)
    j["upper"] = numbers(*curve.band_upper);
  j["parameters"] = json::object();
  for (const auto& [k, v] : curve.parameters)
    j["parameters"][k] = number_or_null(v);
  j["warnings"] = curve.warnings;
  return j;
}

json scenario_to_json(const ScenarioConfig& s)
{
  json j;
  j["model"] = model_name(s);
  if (s.model == Model::M2Sine)
    j["sine_a"] = s.sine_a;
  if (s.model == Model::Constant)
    j["constant_level"] = s.constant_level;
  j["n"] = s.n;
  j["ns_delta"] = s.ns_delta;
  j["ns_eps"] = s.ns_eps ? json(*s.ns_eps) : json(nullptr);
  j["delta_kind"] = s.delta_kind == DeltaKind::Gaussian ? "gaussian" : "uniform";
  const auto cal = calibrate_noise(s);
  j["sigma_delta_sq"] = cal.sigma_delta_sq;
  j["sigma_eps_sq"] = cal.sigma_eps_sq ? json(*cal.sigma_eps_sq) : json(nullptr);
  return j;
}

json study_report_to_json(const StudyReport& r)
{
  json j;
  j["scenario"] = scenario_to_json(r.scenario);
  j["estimator"] = r.estimator;
  j["replications"] = r.replications;
  j["master_seed"] = r.master_seed;
  j["failures"] = r.failures;
  j["failure_codes"] = r.failure_codes;
  j["excluded_intervals"] = r.excluded_intervals;
  j["median_ise"] = number_or_null(r.median_ise);
  j["grid"] = numbers(r.grid);
  j["truth"] = numbers(r.truth);
  j["ise"] = numbers(r.ise);
  j["deciles"] = json::array();
  for (const auto& d : r.deciles)
    j["deciles"].push_back({{"decile", d.decile},
                            {"rank", d.rank},
                            {"replicate", d.replicate},
                            {"ise", d.ise},
                            {"values", numbers(d.values)}});
  j["points"] = json::array();
  for (const auto& p : r.points) {
    json pj{{"x", p.x},
            {"truth", p.truth},
            {"estimates", p.estimates},
            {"rmse", p.rmse},
            {"bias", p.bias}};
    if (p.ci_trials > 0)
      pj["ci"] = {{"trials", p.ci_trials},
                  {"covered", p.ci_covered},
                  {"coverage", static_cast<double>(p.ci_covered) / static_cast<double>(p.ci_trials)}};
    j["points"].push_back(pj);
  }
  return j;
}

std::string decile_curves_to_csv(const StudyReport& r)
{
  std::string out = "x,truth";
  for (const auto& d : r.deciles)
    out += ",decile_" + std::to_string(d.decile);
  out += '\n';
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    out += format_double(r.grid[i]) + ',' + format_double(r.truth[i]);
    for (const auto& d : r.deciles)
      out += ',' + format_double(d.values[i]);
    out += '\n';
  }
  return out;
}

json provenance(const std::vector<std::string>& args, std::optional<std::uint64_t> seed)
{
  std::string line;
  for (const auto& a : args) {
    if (!line.empty())
      line += ' ';
    line += a;
  }
  return {{"command", line},
          {"seed", seed ? json(*seed) : json(nullptr)},
          {"version", kVersion}};
}

void write_atomic(const std::filesystem::path& path, std::string_view content)
{
  namespace fs = std::filesystem;
  const fs::path target = path.has_parent_path() ? path : fs::path(".") / path;
  const fs::path tmp = target.parent_path() /
                       ("." + target.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot move output into " + target.string());
  }
}

// ---------------------------------------------------------------------------
// Command-line dispatcher

namespace {

struct Common {
  std::string output;
  std::string format = "csv";
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;

  unsigned thread_count() const { return threads ? std::max(1u, *threads) : default_thread_count(); }
};

struct Emitter {
  const Common& common;
  const std::vector<std::string>& args;
  std::ostream& out;

  void text(const std::string& content) const
  {
    if (common.output.empty() || common.output == "-")
      out << content;
    else
      write_atomic(common.output, content);
  }

  void json_doc(json body, const char* key) const
  {
    json doc;
    doc["provenance"] = provenance(args, common.seed);
    doc[key] = std::move(body);
    text(doc.dump(2) + "\n");
  }

  void curve(const RegressionCurve& c, json extra = {}) const
  {
    if (common.format == "json") {
      json body = curve_to_json(c);
      if (!extra.is_null())
        body.update(extra);
      json_doc(std::move(body), "curve");
    } else {
      text(curve_to_csv(c));
    }
  }
};

void add_common(CLI::App* sub, Common& c)
{
  sub->add_option("-o,--output", c.output, "Output path (default: stdout)");
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--threads", c.threads, "Worker threads (overrides COARSEREG_THREADS)");
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& spec, const char* flag)
{
  const auto parts = split(spec, ':');
  auto as_count = [&](const std::string& s) {
    const auto v = parse_double(s);
    if (!v || *v < 0 || *v != std::floor(*v))
      throw Error(ErrorCode::Usage, std::string(flag) + " expects low:high counts, got '" + spec + "'");
    return static_cast<std::size_t>(*v);
  };
  if (parts.size() != 2)
    throw Error(ErrorCode::Usage, std::string(flag) + " expects low:high counts, got '" + spec + "'");
  return {as_count(parts[0]), as_count(parts[1])};
}

std::vector<double> log_values(std::span<const double> v, const char* what)
{
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0))
      throw Error(ErrorCode::Data, std::string("--log: ") + what + " value at row " +
                                     std::to_string(i + 1) + " is not positive");
    out[i] = std::log(v[i]);
  }
  return out;
}

json error_record(const std::string& code, const std::string& message)
{
  return {{"error", {{"code", code}, {"message", message}}}};
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Regression on coarsened predictors: smoothing-free ratio estimators, "
               "Fourier estimators with replicate data, proxy calibration and simulation studies"};
  app.name("coarsereg");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  std::string train, replicates, input, delta, grid_spec;
  double alpha = 0.05;

  // fit-known
  auto* fit_known = app.add_subcommand("fit-known", "Ratio estimator with a known error density");
  fit_known->add_option("--train", train, "Training CSV (w,y)")->required();
  fit_known->add_option("--delta", delta, "Error density kind:scale")->required();
  fit_known->add_option("--grid", grid_spec, "Evaluation grid lo:hi:count")->required();
  add_common(fit_known, common);

  // fit-fourier
  std::optional<double> tau, t_spacing, lambda, lambda_delta, tau_cap;
  auto* fit_fourier = app.add_subcommand("fit-fourier", "Fourier estimator with replicate measurements");
  fit_fourier->add_option("--train", train, "Training CSV (w,y)")->required();
  fit_fourier->add_option("--replicates", replicates, "Replicate CSV (group,u)")->required();
  fit_fourier->add_option("--grid", grid_spec, "Evaluation grid lo:hi:count")->required();
  fit_fourier->add_option("--tau", tau, "Frequency truncation (overrides the automatic choice)");
  fit_fourier->add_option("--t-spacing", t_spacing, "Frequency-grid spacing");
  fit_fourier->add_option("--lambda", lambda, "Smoothness exponent of f_W and f_W g");
  fit_fourier->add_option("--lambda-delta", lambda_delta, "Decay exponent of the error characteristic function");
  fit_fourier->add_option("--tau-cap", tau_cap, "Replace the rate cap of the automatic choice");
  add_common(fit_fourier, common);

  // fit-proxy
  bool use_log = false;
  std::string trim_t, trim_x;
  std::size_t drop_farthest = 0;
  auto* fit_proxy = app.add_subcommand("fit-proxy", "Calibrate W from a proxy variable, then fit");
  fit_proxy->add_option("--input", input, "Proxy CSV (t,x[,y])")->required();
  fit_proxy->add_option("--grid", grid_spec, "Evaluation grid lo:hi:count (needed with a y column)");
  fit_proxy->add_option("--delta", delta, "Error density kind:scale (default: Gaussian from the residual variance)");
  fit_proxy->add_flag("--log", use_log, "Log-transform t and x first");
  fit_proxy->add_option("--trim-t", trim_t, "Drop the low:high most extreme t values");
  fit_proxy->add_option("--trim-x", trim_x, "Drop the low:high most extreme x values");
  fit_proxy->add_option("--drop-farthest", drop_farthest, "Drop points farthest from the first least-squares line");
  add_common(fit_proxy, common);

  // nw
  std::optional<double> bandwidth;
  auto* nw = app.add_subcommand("nw", "Nadaraya-Watson baseline on (x, y)");
  nw->add_option("--train", train, "CSV with columns x,y (or w,y)")->required();
  nw->add_option("--grid", grid_spec, "Evaluation grid lo:hi:count")->required();
  nw->add_option("--bandwidth", bandwidth, "Fixed bandwidth (default: leave-one-out cross-validation)");
  add_common(nw, common);

  // ci
  auto* ci = app.add_subcommand("ci", "Pointwise confidence intervals");
  ci->add_option("--train", train, "Training CSV (w,y)")->required();
  ci->add_option("--delta", delta, "Error density kind:scale")->required();
  ci->add_option("--grid", grid_spec, "Evaluation grid lo:hi:count")->required();
  ci->add_option("--alpha", alpha, "Level: intervals have coverage 1 - alpha");
  add_common(ci, common);

  // band
  std::size_t n_sim = 10000;
  std::uint64_t seed = 0;
  auto* band = app.add_subcommand("band", "Simultaneous confidence band");
  band->add_option("--train", train, "Training CSV (w,y)")->required();
  band->add_option("--delta", delta, "Error density kind:scale")->required();
  band->add_option("--grid", grid_spec, "Evaluation grid lo:hi:count")->required();
  band->add_option("--alpha", alpha, "Level: the band has coverage 1 - alpha");
  band->add_option("--nsim", n_sim, "Gaussian process draws");
  band->add_option("--seed", seed, "Random seed");
  add_common(band, common);

  // cf
  double t_max = 5.0, t_step = 0.05;
  auto* cf = app.add_subcommand("cf", "Error characteristic function from replicates");
  cf->add_option("--replicates", replicates, "Replicate CSV (group,u)")->required();
  cf->add_option("--t-max", t_max, "Largest frequency");
  cf->add_option("--t-step", t_step, "Largest frequency spacing");
  add_common(cf, common);

  // extrema / zeros
  double lo = 0.0, hi = 1.0, level = 0.0;
  std::string kind = "max";
  std::size_t scan_points = 512;
  auto* extrema = app.add_subcommand("extrema", "Location and value of the extremum of the fitted curve");
  extrema->add_option("--train", train, "Training CSV (w,y)")->required();
  extrema->add_option("--delta", delta, "Error density kind:scale")->required();
  extrema->add_option("--lo", lo, "Search interval start")->required();
  extrema->add_option("--hi", hi, "Search interval end")->required();
  extrema->add_option("--kind", kind, "max or min")->check(CLI::IsMember({"max", "min"}));
  extrema->add_option("--scan-points", scan_points, "Coarse scan resolution");
  add_common(extrema, common);

  auto* zeros = app.add_subcommand("zeros", "Points where the fitted curve crosses a level");
  zeros->add_option("--train", train, "Training CSV (w,y)")->required();
  zeros->add_option("--delta", delta, "Error density kind:scale")->required();
  zeros->add_option("--lo", lo, "Search interval start")->required();
  zeros->add_option("--hi", hi, "Search interval end")->required();
  zeros->add_option("--level", level, "Crossing level");
  zeros->add_option("--scan-points", scan_points, "Coarse scan resolution");
  add_common(zeros, common);

  // simulate
  std::string model = "m1", delta_kind = "gaussian", estimator = "known", working = "correct";
  std::string deciles_csv;
  double ns_delta = 0.25, sine_a = 2.0;
  std::optional<double> ns_eps;
  std::size_t sample_n = 250, reps = 1000, grid_count = 201;
  std::vector<double> points;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of an estimator");
  simulate->add_option("--model", model, "m1, m2-logistic or m2-sine")
    ->check(CLI::IsMember({"m1", "m2-logistic", "m2-sine"}));
  simulate->add_option("--sine-a", sine_a, "Frequency a of the sine model");
  simulate->add_option("--nsdelta", ns_delta, "var(delta) / var(W)");
  simulate->add_option("--nseps", ns_eps, "var(eps) / sup|g| (model m1 only)");
  simulate->add_option("--delta-kind", delta_kind, "Law of delta")
    ->check(CLI::IsMember({"gaussian", "uniform"}));
  simulate->add_option("--n", sample_n, "Sample size");
  simulate->add_option("--reps", reps, "Replications");
  simulate->add_option("--seed", seed, "Master seed");
  simulate->add_option("--estimator", estimator, "known or nw")->check(CLI::IsMember({"known", "nw"}));
  simulate->add_option("--working", working, "Working error density for the known-error fit")
    ->check(CLI::IsMember({"correct", "gaussian", "uniform", "laplace"}));
  simulate->add_option("--points", points, "Locations for RMSE and interval coverage")->delimiter(',');
  simulate->add_option("--alpha", alpha, "Interval level for coverage");
  simulate->add_option("--grid", grid_spec, "ISE grid lo:hi:count (default: widened support of W)");
  simulate->add_option("--grid-count", grid_count, "Points of the default ISE grid");
  simulate->add_option("--deciles-csv", deciles_csv, "Also write the decile curves as CSV");
  add_common(simulate, common);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::CallForVersion&) {
      out << kVersion << "\n";
      return 0;
    } catch (const CLI::ParseError& e) {
      err << error_record("usage", e.what()).dump() << "\n";
      return 2;
    }

    const Emitter emit{common, args, out};

    if (fit_known->parsed()) {
      const auto density = parse_density_spec(delta);
      const auto grid = parse_grid_spec(grid_spec);
      const auto sample = read_training_csv(train);
      emit.curve(estimate_m(sample, density, grid, common.thread_count()));
    } else if (fit_fourier->parsed()) {
      const auto grid = parse_grid_spec(grid_spec);
      const auto sample = read_training_csv(train);
      const auto reps_sample = read_replicates_csv(replicates);
      TauHints hints;
      hints.tau = tau;
      hints.lambda = lambda;
      hints.lambda_delta = lambda_delta;
      hints.cap = tau_cap;
      const auto sel = select_tau(reps_sample, sample.size(), hints);
      FourierConfig cfg{sel.tau, t_spacing ? *t_spacing : default_t_spacing(grid, sel.tau), lambda,
                        lambda_delta};
      auto curve = estimate_m_fourier(sample, reps_sample, cfg, grid, common.thread_count());
      if (!sel.overridden) {
        curve.parameters["tau_cap"] = sel.cap;
        curve.parameters["tau_guard"] = sel.guard;
        if (sel.floor_crossing)
          curve.parameters["tau_floor_crossing"] = *sel.floor_crossing;
        if (sel.guard_exceeds_cap)
          curve.warnings.push_back("lower-rate guard exceeds the rate cap; tau set to the cap");
      }
      emit.curve(curve);
    } else if (fit_proxy->parsed()) {
      auto data = read_proxy_csv(input);
      if (use_log) {
        data.t = log_values(data.t, "t");
        data.x = log_values(data.x, "x");
      }
      TrimSpec spec;
      if (!trim_t.empty())
        std::tie(spec.t_low, spec.t_high) = parse_pair(trim_t, "--trim-t");
      if (!trim_x.empty())
        std::tie(spec.x_low, spec.x_high) = parse_pair(trim_x, "--trim-x");
      spec.farthest = drop_farthest;
      const auto trimmed = trim_and_fit(data.t, data.x, spec);
      std::vector<double> kt, kx, ky;
      for (auto i : trimmed.kept) {
        kt.push_back(data.t[i]);
        kx.push_back(data.x[i]);
        if (data.y)
          ky.push_back((*data.y)[i]);
      }
      const double err_var = estimate_error_variance(trimmed.fit, kt, kx);
      json fit_json{{"intercept", trimmed.fit.intercept},
                    {"slope", trimmed.fit.slope},
                    {"pairs", trimmed.fit.r},
                    {"sigma_delta_sq", trimmed.fit.sigma_delta_sq},
                    {"error_variance", err_var},
                    {"dropped", data.t.size() - trimmed.kept.size()}};
      if (!data.y) {
        if (common.format == "json") {
          emit.json_doc(fit_json, "fit");
        } else {
          emit.text("intercept,slope,pairs,sigma_delta_sq,error_variance\n" +
                    format_double(trimmed.fit.intercept) + ',' + format_double(trimmed.fit.slope) +
                    ',' + std::to_string(trimmed.fit.r) + ',' +
                    format_double(trimmed.fit.sigma_delta_sq) + ',' + format_double(err_var) + '\n');
        }
      } else {
        if (grid_spec.empty())
          throw Error(ErrorCode::Usage, "--grid is required when the input has a y column");
        const auto grid = parse_grid_spec(grid_spec);
        const auto density = delta.empty() ? ErrorDensity::gaussian(std::sqrt(err_var))
                                           : parse_density_spec(delta);
        auto curve = estimate_m_proxy(trimmed.fit, kt, ky, density, grid);
        curve.parameters["error_variance"] = err_var;
        emit.curve(curve, {{"fit", fit_json}, {"density", density.describe()}});
      }
    } else if (nw->parsed()) {
      const auto grid = parse_grid_spec(grid_spec);
      const auto sample = read_training_csv(train, true);
      NwConfig cfg;
      cfg.bandwidth = bandwidth;
      const auto cv = cv_bandwidth(sample, cfg);
      auto curve = nw_curve(sample, cv.bandwidth, grid);
      json extra;
      if (!bandwidth)
        extra["cv"] = {{"candidates", cv.candidates}, {"scores", numbers(cv.scores)}};
      emit.curve(curve, extra);
    } else if (ci->parsed()) {
      const auto density = parse_density_spec(delta);
      const auto grid = parse_grid_spec(grid_spec);
      const auto sample = read_training_csv(train);
      emit.curve(pointwise_band(sample, density, grid, alpha));
    } else if (band->parsed()) {
      common.seed = seed;
      const auto density = parse_density_spec(delta);
      const auto grid = parse_grid_spec(grid_spec);
      const auto sample = read_training_csv(train);
      emit.curve(simultaneous_band(sample, density, grid, alpha, n_sim, seed, common.thread_count()));
    } else if (cf->parsed()) {
      if (!(t_max > 0.0) || !(t_step > 0.0))
        throw Error(ErrorCode::Usage, "--t-max and --t-step must be positive");
      const auto reps_sample = read_replicates_csv(replicates);
      const auto table = estimate_error_cf(reps_sample, TGrid::covering(t_max, t_step), common.thread_count());
      std::vector<double> t, v;
      for (std::size_t k = 0; k < table.grid().size(); ++k) {
        t.push_back(table.grid().t(k));
        v.push_back(table[k].real());
      }
      if (common.format == "json") {
        emit.json_doc({{"t", numbers(t)},
                       {"cf_hat", numbers(v)},
                       {"groups", reps_sample.group_count()},
                       {"pairs", reps_sample.pair_count()}},
                      "cf");
      } else {
        std::string s = "t,cf_hat\n";
        for (std::size_t k = 0; k < t.size(); ++k)
          s += format_double(t[k]) + ',' + format_double(v[k]) + '\n';
        emit.text(s);
      }
    } else if (extrema->parsed()) {
      const auto density = parse_density_spec(delta);
      const auto sample = read_training_csv(train);
      SearchOptions opts;
      opts.scan_points = scan_points;
      const auto e = find_extremum(sample, density, lo, hi,
                                   kind == "max" ? ExtremumKind::Max : ExtremumKind::Min, opts);
      if (common.format == "json")
        emit.json_doc({{"kind", kind}, {"location", e.location}, {"value", e.value}}, "extremum");
      else
        emit.text("location,value\n" + format_double(e.location) + ',' + format_double(e.value) + '\n');
    } else if (zeros->parsed()) {
      const auto density = parse_density_spec(delta);
      const auto sample = read_training_csv(train);
      SearchOptions opts;
      opts.scan_points = scan_points;
      const auto z = find_zeros(sample, density, lo, hi, level, opts);
      if (common.format == "json") {
        emit.json_doc({{"level", level}, {"x", numbers(z)}}, "zeros");
      } else {
        std::string s = "x\n";
        for (double v : z)
          s += format_double(v) + '\n';
        emit.text(s);
      }
    } else if (simulate->parsed()) {
      common.seed = seed;
      if (simulate->get_option("--format")->count() == 0)
        common.format = "json";
      ScenarioConfig scn;
      scn.model = model == "m1" ? Model::M1 : model == "m2-logistic" ? Model::M2Logistic : Model::M2Sine;
      scn.sine_a = sine_a;
      scn.n = sample_n;
      scn.ns_delta = ns_delta;
      scn.ns_eps = ns_eps;
      if (scn.model == Model::M1 && !scn.ns_eps)
        throw Error(ErrorCode::Usage, "--nseps is required for model m1");
      scn.delta_kind = delta_kind == "gaussian" ? DeltaKind::Gaussian : DeltaKind::Uniform;
      scn.seed = seed;
      validate(scn);

      EstimatorSpec spec;
      spec.kind = estimator == "nw" ? EstimatorKind::NadarayaWatson : EstimatorKind::KnownError;
      spec.density = working == "gaussian" ? DensityChoice::GaussianMatched
                   : working == "uniform"  ? DensityChoice::UniformMatched
                   : working == "laplace"  ? DensityChoice::LaplaceMatched
                                           : DensityChoice::Correct;
      spec.points = points;
      spec.alpha = alpha;
      const auto grid = grid_spec.empty() ? default_ise_grid(scn, grid_count) : parse_grid_spec(grid_spec);
      const auto report = run_replications(scn, spec, reps, grid, seed, common.thread_count());
      if (!deciles_csv.empty())
        write_atomic(deciles_csv, decile_curves_to_csv(report));
      if (common.format == "csv")
        emit.text(decile_curves_to_csv(report));
      else
        emit.json_doc(study_report_to_json(report), "report");
    }
    return 0;
  } catch (const Error& e) {
    err << error_record(to_string(e.code()), e.what()).dump() << "\n";
    return e.code() == ErrorCode::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << error_record("internal", e.what()).dump() << "\n";
    return 1;
  }
}

} // namespace coarse
