#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "errors.hpp"
#include "pipeline.hpp"

using namespace reslab;
namespace fs = std::filesystem;

namespace {

const char* kReference =
    "core = poly 2.5 0.45 -5 0 2.5\nglue_radius = 1.1\ntail.a = 0.25\ntail.coeff = 7\n"
    "tail.offset = -5.645\ngrad_weight = 0.25\nlapl_weight = 0.5\n";

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("reslab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string strip_timestamps(std::string s) {
  auto pos = s.find("\"timestamps\"");
  auto end = s.find('}', pos);
  return s.erase(pos, end - pos);
}

size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("fit_depth") {
  std::vector<std::pair<double, double>> pts;
  for (double e : {0.1, 0.125, 0.15, 0.2}) pts.push_back({e, std::exp(-2 / e)});
  auto f = fit_depth(pts);
  CHECK(f.d_hat == doctest::Approx(2).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1).epsilon(1e-12));

  pts.clear();
  for (int i = 0; i <= 10; ++i) {
    double e = 0.1 + 0.01 * i;
    pts.push_back({e, std::sqrt(e) * std::exp(-2 / e)});
  }
  f = fit_depth(pts);
  CHECK(std::fabs(f.d_hat - 2.07) / 2.07 < 0.05);
  CHECK(f.d_hat > 2);

  pts.resize(3);
  try {
    fit_depth(pts);
    FAIL("3 points");
  } catch (const Error& e) {
    CHECK(e.code() == Err::InsufficientPoints);
  }
  pts = {{0.1, 1e-5}, {0.12, 1e-4}, {0.14, 0.0}, {0.2, 1e-3}};
  try {
    fit_depth(pts);
    FAIL("nonpositive");
  } catch (const Error& e) {
    CHECK(e.code() == Err::NonPositiveEigenvalue);
  }
}

TEST_CASE("config parsing") {
  auto c = ExperimentConfig::from_text(std::string(kReference) + "eps = 0.1, 0.2, 0.15\n");
  CHECK(c.eps_list == std::vector<double>{0.2, 0.15, 0.1});
  CHECK(c.rmax_factor == 4);
  auto d = ExperimentConfig::from_text(kReference);
  CHECK(d.eps_list.size() == 5);
  CHECK_THROWS_AS(ExperimentConfig::from_text(std::string(kReference) + "tol = -1\n"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_text(std::string(kReference) + "mode = wide\n"), Error);

  auto a = ExperimentConfig::from_text("core = poly 0 0 0.5\neps = 0.1\nbox = 6\n");
  auto b = ExperimentConfig::from_text("box = 6\n# comment\neps = 0.1\ncore = poly 0 0 0.5\n");
  CHECK(a.raw.hash_hex() == b.raw.hash_hex());
  auto other = ExperimentConfig::from_text("box = 7\neps = 0.1\ncore = poly 0 0 0.5\n");
  CHECK(a.raw.hash_hex() != other.raw.hash_hex());
}

TEST_CASE("grid sizing") {
  auto c = ExperimentConfig::from_text(std::string(kReference) + "eps = 0.1\n");
  auto h = verify_hypotheses(c.spec, c.eps_list);
  auto s = setup_for(c, &h, 0.1);
  CHECK(s.r0 == doctest::Approx(scaling_radius(h, 0.1)).epsilon(1e-12));
  CHECK(s.h <= 0.01 * (1 + 1e-12));
  CHECK(s.N == 2 * s.M - 1);
  CHECK(s.N >= 4000);
}

TEST_CASE("harmonic run has spectra only") {
  auto c = ExperimentConfig::from_text("core = poly 0 0 0.5\nbox = 6\neps = 0.1\nN = 3999\nk = 3\n");
  auto r = run_stages(c, StageAll);
  CHECK(r.fitted.empty());
  REQUIRE(r.per_eps.size() == 1);
  CHECK(r.per_eps[0].resonances.empty());
  CHECK(!r.per_eps[0].symbol);
  REQUIRE(r.per_eps[0].lambdas.size() == 3);
  CHECK(r.per_eps[0].lambdas[0] == doctest::Approx(0.1 * (std::sqrt(2.0) * 0.5 - 0.5)).epsilon(1e-4));
  CHECK(record_status(r) == 0);

  auto dir = scratch("harm");
  emit_report(r, dir.string(), "csv");
  CHECK(count_lines(slurp(dir / "spectra.csv")) == 4);
  CHECK(slurp(dir / "resonances.csv") == "eps,index,lambda_seed,re_mu,im_mu,theta_drift,grid_drift,iters\n");
  CHECK(slurp(dir / "depths.csv") == "index,d_well_analysis,d_fitted,rel_err,r2\n");
  fs::remove_all(dir);
}

TEST_CASE("empty record gives header-only csv") {
  RunRecord r;
  auto dir = scratch("empty");
  auto files = emit_report(r, dir.string(), "csv,json,svg-data");
  CHECK(files.size() == 7);
  CHECK(slurp(dir / "spectra.csv") == "eps,index,lambda,residual\n");
  CHECK(slurp(dir / "symbol.csv") == "eps,c_lower,nontrap_min,taylor_err1,taylor_err2\n");
  CHECK(count_lines(slurp(dir / "resonances.csv")) == 1);
  CHECK(record_from_json(slurp(dir / "record.json")).per_eps.empty());
  CHECK_THROWS_AS(emit_report(r, dir.string(), "png"), Error);
  fs::remove_all(dir);
}

TEST_CASE("sweep, cache and report") {
  auto dir = scratch("cache");
  auto c = ExperimentConfig::from_text(std::string(kReference) + "eps = 0.2, 0.175\ndrifts = false\n");
  long before = sweep_compute_count();
  auto r1 = run_sweep(c, {dir.string(), true});
  CHECK(sweep_compute_count() == before + 1);
  auto r2 = run_sweep(c, {dir.string(), true});
  CHECK(sweep_compute_count() == before + 1);
  CHECK(record_to_json(r1) == record_to_json(r2));

  // A rerun from scratch matches apart from timestamps.
  auto r3 = run_sweep(c, {dir.string(), false});
  CHECK(sweep_compute_count() == before + 2);
  CHECK(strip_timestamps(record_to_json(r1)) == strip_timestamps(record_to_json(r3)));

  // Reordered keys hit the same entry.
  auto c2 = ExperimentConfig::from_text("drifts = false\neps = 0.2, 0.175\n" + std::string(kReference));
  run_sweep(c2, {dir.string(), true});
  CHECK(sweep_compute_count() == before + 2);

  REQUIRE(r1.per_eps.size() == 2);
  CHECK(record_status(r1) == 0);
  CHECK(r1.per_eps[0].lambdas[1] > r1.per_eps[1].lambdas[1]);
  size_t found = 0;
  for (const auto& e : r1.per_eps) {
    CHECK(e.error.empty());
    CHECK(e.symbol);
    for (const auto& rr : e.resonances) found += rr.found;
  }
  CHECK(found >= 2);
  auto out = dir / "report";
  emit_report(r1, out.string(), "csv,svg-data");
  CHECK(count_lines(slurp(out / "resonances.csv")) == 1 + found);
  CHECK(count_lines(slurp(out / "symbol.csv")) == 3);
  CHECK(fs::exists(out / "lnlambda_1.dat"));
  fs::remove_all(dir);
}

TEST_CASE("per-eps failures are recorded") {
  // eps = 5 puts r0 inside the glued core; the other eps still runs.
  auto c = ExperimentConfig::from_text(std::string(kReference) + "eps = 5, 0.2\nsymbols = false\ndrifts = false\n");
  auto r = run_stages(c, StageSpectrum);
  REQUIRE(r.per_eps.size() == 2);
  CHECK(!r.per_eps[0].error.empty());
  CHECK(r.per_eps[1].error.empty());
  CHECK(record_status(r) == 3);
  r.per_eps.pop_back();
  CHECK(record_status(r) == 4);
}

TEST_CASE("json round trip on random records") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  auto rnd = [&] { return std::ldexp(u(rng), static_cast<int>(rng() % 80) - 60); };
  for (int t = 0; t < 50; ++t) {
    RunRecord r;
    r.config_hash = std::to_string(rng());
    r.config_canonical = "a=" + std::to_string(t) + "\nb=\"q\"\n";
    r.tool_version = kToolVersion;
    r.started = "s";
    r.finished = "f";
    for (int i = 0; i < t % 4; ++i) r.minima.push_back({rnd(), rnd()});
    for (int i = 0; i < t % 3; ++i) r.depths.push_back(rnd());
    for (int e = 0; e < t % 5; ++e) {
      EpsRecord er;
      er.eps = std::fabs(rnd());
      er.r0 = rnd();
      er.h = rnd();
      er.N = static_cast<int>(rng() % 100000);
      for (int i = 0; i < 3; ++i) {
        er.lambdas.push_back(rnd());
        er.residuals.push_back(rnd());
      }
      for (int i = 0; i < e; ++i)
        er.resonances.push_back({i, rnd(), rnd(), rnd(), rnd(), rnd(), static_cast<int>(rng() % 500),
                                 (rng() & 1) != 0, "note " + std::to_string(i)});
      if (rng() & 1) er.symbol = SymbolRow{rnd(), rnd(), rnd(), rnd(), rnd(), rnd(), rnd()};
      if (rng() & 1) er.truncation_drift = rnd();
      if (rng() & 1) er.error = "NoConvergence: x";
      r.per_eps.push_back(er);
    }
    for (int i = 0; i < t % 2; ++i) r.fitted.push_back({i + 1, rnd(), rnd(), rnd(), rnd()});
    std::string j = record_to_json(r);
    RunRecord back = record_from_json(j);
    CHECK(record_to_json(back) == j);
    CHECK(record_to_json(back, false) == record_to_json(r, false));
    REQUIRE(back.per_eps.size() == r.per_eps.size());
    for (size_t e = 0; e < r.per_eps.size(); ++e) {
      CHECK(back.per_eps[e].lambdas == r.per_eps[e].lambdas);
      CHECK(back.per_eps[e].eps == r.per_eps[e].eps);
    }
  }
  CHECK_THROWS_AS(record_from_json("{"), Error);
  CHECK_THROWS_AS(record_from_json("{}"), Error);
}
