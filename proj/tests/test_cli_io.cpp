#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coarsereg/cli_io.hpp"
#include "coarsereg/errors.hpp"
#include "coarsereg/known_error.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace coarse;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string error_message(auto&& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

ErrorCode code_of(auto&& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

bool contains(const std::string& hay, const std::string& needle)
{
  return hay.find(needle) != std::string::npos;
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  Scratch()
  {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("coarsereg_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& content) const
  {
    const auto p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }
};

struct CliResult {
  int status;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args)
{
  args.insert(args.begin(), "coarsereg");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool bits_equal(double a, double b)
{
  return std::memcmp(&a, &b, sizeof a) == 0;
}

// Recursive numeric comparison of two JSON documents.
void compare_json(const json& got, const json& want, const std::string& path)
{
  INFO("at " << path);
  if (want.is_number()) {
    REQUIRE(got.is_number());
    const double g = got.get<double>(), w = want.get<double>();
    CHECK(std::abs(g - w) <= 1e-9 * std::max(1.0, std::abs(w)));
  } else if (want.is_array()) {
    REQUIRE(got.is_array());
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
      compare_json(got[i], want[i], path + "[" + std::to_string(i) + "]");
  } else if (want.is_object()) {
    REQUIRE(got.is_object());
    CHECK(got.size() == want.size());
    for (const auto& [k, v] : want.items()) {
      REQUIRE(got.contains(k));
      compare_json(got[k], v, path + "." + k);
    }
  } else {
    CHECK(got == want);
  }
}

} // namespace

TEST_CASE("number formatting round-trips bit-exactly")
{
  std::mt19937_64 rng(5);
  std::vector<double> values{0.0,
                             -0.0,
                             0.1,
                             1.0 / 3.0,
                             -2.5e-300,
                             std::numeric_limits<double>::denorm_min(),
                             std::numeric_limits<double>::max(),
                             std::numeric_limits<double>::lowest(),
                             9.480255711051719};
  for (int i = 0; i < 2000; ++i) {
    std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (std::isfinite(v))
      values.push_back(v);
  }
  for (double v : values) {
    const auto s = format_double(v);
    const auto back = parse_double(s);
    REQUIRE(back);
    CHECK(bits_equal(*back, v));
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(parse_double("+1.5") == 1.5);
  CHECK(parse_double(" 2 ") == 2.0);
  CHECK_FALSE(parse_double("1.5x"));
  CHECK_FALSE(parse_double(""));
  CHECK_FALSE(parse_double("--1"));
}

TEST_CASE("grid and density specs")
{
  const auto g = parse_grid_spec("0:1:201");
  CHECK(g.size() == 201);
  CHECK(g[0] == 0.0);
  CHECK(g[200] == 1.0);
  CHECK(g[100] == doctest::Approx(0.5).epsilon(1e-15));
  for (const char* bad : {"0:1", "0:1:1", "1:0:5", "a:1:3", "0:1:2.5", "0:inf:3"})
    CHECK(code_of([&] { parse_grid_spec(bad); }) == ErrorCode::Usage);

  CHECK(parse_density_spec("gaussian:0.144").kind() == DensityKind::Gaussian);
  CHECK(parse_density_spec("laplace:0.5").kind() == DensityKind::Laplace);
  CHECK(parse_density_spec("uniform:2").kind() == DensityKind::Uniform);
  for (const char* bad : {"gaussian", "gaussian:-1", "cauchy:1", "laplace:0", "uniform:x"})
    CHECK(code_of([&] { parse_density_spec(bad); }) == ErrorCode::Usage);
}

TEST_CASE("csv reader")
{
  const auto t = parse_csv("a,b\r\n1, 2\r\n\r\n\"x,y\",\"say \"\"hi\"\"\"\n", "mem.csv");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows[0].fields[1] == "2");
  CHECK(t.rows[1].line == 4);
  CHECK(t.rows[1].fields[0] == "x,y");
  CHECK(t.rows[1].fields[1] == "say \"hi\"");

  CHECK(contains(error_message([] { parse_csv("a,b\n1,2\n3\n", "f.csv"); }), "f.csv:3"));
  CHECK(contains(error_message([] { parse_csv("a\n\"open\n", "f.csv"); }), "unterminated"));
  CHECK(code_of([] { parse_csv("", "e.csv"); }) == ErrorCode::Data);

  const auto bad = parse_csv("w,y\n1,2\n3,abc\n", "t.csv");
  CHECK(contains(error_message([&] { bad.number(bad.rows[1], 1); }), "t.csv:3:2"));
}

TEST_CASE("training and replicate files")
{
  Scratch s;
  const auto good = read_training_csv(s.write("t.csv", "w,y\n0.1,1\n0.2,2\n"));
  CHECK(good.size() == 2);
  CHECK(good.y()[1] == 2.0);

  // Column order follows the header.
  const auto swapped = read_training_csv(s.write("s.csv", "y,w\n5,0.5\n"));
  CHECK(swapped.w()[0] == 0.5);

  for (const char* v : {"nan", "inf", "-inf", "NaN"}) {
    const auto p = s.write("bad.csv", std::string("w,y\n0.1,1\n0.2,") + v + "\n");
    const auto msg = error_message([&] { read_training_csv(p); });
    CHECK(contains(msg, "bad.csv:3:2"));
  }
  CHECK(code_of([&] { read_training_csv(s.write("x.csv", "x,y\n1,2\n")); }) == ErrorCode::Data);
  CHECK(read_training_csv(s.write("x.csv", "x,y\n1,2\n"), true).w()[0] == 1.0);
  CHECK(code_of([&] { read_training_csv(s.dir / "missing.csv"); }) == ErrorCode::Io);

  const auto r = read_replicates_csv(s.write("r.csv", "group,u\nb,1\na,2\nb,3\n\"a\",4\nc,5\nc,6\nc,7\n"));
  REQUIRE(r.group_count() == 3);
  CHECK(r.groups()[0].size() == 2); // "b" first
  CHECK(r.groups()[0][1] == 3.0);
  CHECK(r.groups()[1][1] == 4.0);
  CHECK(r.groups()[2].size() == 3);
  const auto lone = error_message([&] { read_replicates_csv(s.write("l.csv", "group,u\na,1\na,2\nz,3\n")); });
  CHECK(contains(lone, "l.csv:4"));

  const auto proxy = read_proxy_csv(s.write("p.csv", "t,x\n1,2\n3,4\n"));
  CHECK_FALSE(proxy.y);
  CHECK(proxy.x[1] == 4.0);
}

TEST_CASE("curve csv round trip")
{
  const auto grid = EvalGrid::uniform(-1.0, 1.0, 7);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::vector<double> v(grid.size());
  for (auto& x : v)
    x = z(rng) / 3.0;
  RegressionCurve c(grid, v, std::vector<bool>(grid.size(), true));
  c.defined[3] = false;
  c.values[3] = std::nan("");

  const auto text = curve_to_csv(c);
  CHECK(text.rfind("x,m_hat\n", 0) == 0);
  const auto back = curve_from_csv(text);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(bits_equal(back.grid[j], grid[j]));
    CHECK(back.defined[j] == c.defined[j]);
    if (c.defined[j])
      CHECK(bits_equal(back.values[j], v[j]));
  }

  c.variance = std::vector<double>(grid.size(), 0.125);
  c.band_lower = v;
  c.band_upper = v;
  const auto banded = curve_to_csv(c);
  CHECK(banded.rfind("x,m_hat,v_hat,lower,upper\n", 0) == 0);
  const auto back2 = curve_from_csv(banded);
  REQUIRE(back2.variance);
  CHECK((*back2.variance)[2] == 0.125);
  CHECK(bits_equal((*back2.band_upper)[6], v[6]));

  c.label = "m_nw";
  CHECK(curve_to_csv(c).rfind("x,m_nw,", 0) == 0);
}

TEST_CASE("atomic writes replace the target and leave no temporaries")
{
  Scratch s;
  const auto target = s.dir / "out.csv";
  write_atomic(target, "first\n");
  write_atomic(target, "second\n");
  CHECK(slurp(target) == "second\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(s.dir))
    ++files;
  CHECK(files == 1);
  CHECK(code_of([&] { write_atomic(s.dir / "no" / "such" / "dir.csv", "x"); }) == ErrorCode::Io);
}

TEST_CASE("fit commands write the documented headers")
{
  Scratch s;
  const auto train = s.write("train.csv", "w,y\n0.0,1.0\n0.25,1.5\n0.5,2.2\n0.75,2.4\n1.0,3.1\n");

  auto r = cli({"fit-known", "--train", train.string(), "--delta", "gaussian:0.144", "--grid", "0:1:201"});
  REQUIRE(r.status == 0);
  CHECK(r.out.rfind("x,m_hat\n", 0) == 0);
  const auto curve = curve_from_csv(r.out);
  CHECK(curve.grid.size() == 201);
  const auto direct = estimate_m(read_training_csv(train), ErrorDensity::gaussian(0.144), EvalGrid::uniform(0, 1, 201));
  for (std::size_t j = 0; j < 201; ++j)
    CHECK(bits_equal(curve.values[j], direct.values[j]));

  r = cli({"ci", "--alpha", "0.05", "--train", train.string(), "--delta", "gaussian:0.144", "--grid", "0:1:11"});
  REQUIRE(r.status == 0);
  CHECK(r.out.rfind("x,m_hat,v_hat,lower,upper\n", 0) == 0);

  const auto out = s.dir / "band.json";
  r = cli({"band", "--train", train.string(), "--delta", "laplace:0.1", "--grid", "0:1:11", "--seed", "3", "--format",
           "json", "-o", out.string()});
  REQUIRE(r.status == 0);
  CHECK(r.out.empty());
  const auto doc = json::parse(slurp(out));
  CHECK(doc["provenance"]["seed"] == 3);
  CHECK(doc["provenance"]["version"] == kVersion);
  CHECK(contains(doc["provenance"]["command"].get<std::string>(), "band"));
  CHECK(doc["curve"]["lower"].size() == 11);
}

TEST_CASE("failures produce machine-readable records")
{
  Scratch s;
  const auto train = s.write("train.csv", "w,y\n0.0,1.0\n0.5,2.0\n");

  auto r = cli({"fit-known", "--train", train.string(), "--delta", "gaussian:0.1", "--grid", "0:1"});
  CHECK(r.status == 2);
  auto rec = json::parse(r.err);
  CHECK(rec["error"]["code"] == "usage");
  CHECK(contains(rec["error"]["message"].get<std::string>(), "--grid"));

  r = cli({"fit-known", "--train", train.string(), "--grid", "0:1:5"});
  CHECK(r.status == 2);
  CHECK(contains(json::parse(r.err)["error"]["message"].get<std::string>(), "--delta"));

  r = cli({"no-such-command"});
  CHECK(r.status == 2);

  const auto bad = s.write("bad.csv", "w,y\n0.0,1.0\n0.5,inf\n");
  r = cli({"fit-known", "--train", bad.string(), "--delta", "gaussian:0.1", "--grid", "0:1:5"});
  CHECK(r.status == 1);
  rec = json::parse(r.err);
  CHECK(rec["error"]["code"] == "data");
  CHECK(contains(rec["error"]["message"].get<std::string>(), "bad.csv:3:2"));

  // A failed run does not touch an existing output file.
  const auto out = s.write("keep.csv", "old\n");
  r = cli({"fit-known", "--train", bad.string(), "--delta", "gaussian:0.1", "--grid", "0:1:5", "-o", out.string()});
  CHECK(r.status == 1);
  CHECK(slurp(out) == "old\n");

  CHECK(cli({"--version"}).status == 0);
  CHECK(contains(cli({"--version"}).out, kVersion));
}

TEST_CASE("replicate and simulation commands")
{
  Scratch s;
  const auto rep = s.write("rep.csv", "group,u\na,0.1\na,-0.2\nb,1.0\nb,1.3\nc,2\nc,2\n");
  auto r = cli({"cf", "--replicates", rep.string(), "--t-max", "1", "--t-step", "0.5"});
  REQUIRE(r.status == 0);
  CHECK(r.out.rfind("t,cf_hat\n", 0) == 0);

  r = cli({"simulate", "--model", "m2-logistic", "--nsdelta", "0.25", "--n", "60", "--reps", "4", "--seed", "9",
           "--points", "0,0.1"});
  REQUIRE(r.status == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["report"]["replications"] == 4);
  CHECK(doc["report"]["points"].size() == 2);
  CHECK(doc["report"]["points"][0].contains("ci"));
  CHECK(doc["provenance"]["seed"] == 9);

  r = cli({"simulate", "--model", "m1", "--nsdelta", "0.25", "--n", "60", "--reps", "2"});
  CHECK(r.status == 2);
}

TEST_CASE("simulation report matches the frozen reference run")
{
  const fs::path golden = fs::path(COARSEREG_TEST_DATA_DIR) / "golden" / "simulate_m1_seed7.json";
  const auto want = json::parse(slurp(golden));
  for (const char* threads : {"1", "3"}) {
    const auto r = cli({"simulate", "--model", "m1", "--nsdelta", "0.25", "--nseps", "0.1", "--n", "250", "--reps",
                        "1000", "--seed", "7", "--threads", threads});
    REQUIRE(r.status == 0);
    compare_json(json::parse(r.out)["report"], want, "report");
  }
}

TEST_CASE("installed binary behaves like the in-process entry point")
{
  Scratch s;
  const auto out = s.dir / "stdout.txt";
  const std::string cmd = std::string("\"") + COARSEREG_CLI_PATH + "\" fit-known --grid 0:1 > \"" + out.string() +
                          "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  CHECK(WIFEXITED(raw));
  CHECK(WEXITSTATUS(raw) == 2);
  CHECK(contains(slurp(out), "\"error\""));
}
