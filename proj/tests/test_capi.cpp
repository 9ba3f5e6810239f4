#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "reslab/reslab.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string config_path(const char* name) {
  const char* dir = std::getenv("RESLAB_CONFIG_DIR");
  return std::string(dir ? dir : "configs") + "/" + name;
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  reslab_free_string(s);
  return out;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(reslab_version()).find("reslab") == 0);
  CHECK(std::string(reslab_status_name(RESLAB_OK)) == "Ok");
  CHECK(std::string(reslab_status_name(RESLAB_E_PARSE)) == "ParseError");
  CHECK(std::string(reslab_status_name(RESLAB_E_INVALID_ARGUMENT)) == "InvalidArgument");
  CHECK(std::string(reslab_status_name(12345)) == "Unknown");
  reslab_free_string(nullptr);
}

TEST_CASE("load errors") {
  reslab_experiment* e = nullptr;
  CHECK(reslab_experiment_load("/nonexistent/x.cfg", &e) == RESLAB_E_IO);
  CHECK(e == nullptr);
  CHECK(std::string(reslab_last_error()).size() > 0);
  CHECK(reslab_experiment_from_text("core = poly 0 0 0.5\nbroken line\n", &e) == RESLAB_E_PARSE);
  CHECK(reslab_experiment_from_text("core = poly 1 0 -1\n", &e) == RESLAB_E_INVALID_POTENTIAL);
  CHECK(reslab_experiment_from_text("core = poly 0 0 0.5\n", nullptr) == RESLAB_E_INVALID_ARGUMENT);
  CHECK(reslab_wells(nullptr, nullptr) == RESLAB_E_INVALID_ARGUMENT);
}

TEST_CASE("harmonic round trip") {
  reslab_experiment* e = nullptr;
  REQUIRE(reslab_experiment_load(config_path("harmonic.cfg").c_str(), &e) == RESLAB_OK);
  CHECK(std::string(reslab_last_error()).empty());

  char *canon = nullptr, *hash = nullptr;
  REQUIRE(reslab_experiment_config(e, &canon, &hash) == RESLAB_OK);
  std::string c = take(canon), h = take(hash);
  CHECK(c.find("box=6") != std::string::npos);
  CHECK(h.size() == 16);

  char* out = nullptr;
  REQUIRE(reslab_wells(e, &out) == RESLAB_OK);
  json w = json::parse(take(out));
  CHECK(w["minima"].size() == 1);

  int status = -1;
  REQUIRE(reslab_interior_spectrum(e, &out, &status) == RESLAB_OK);
  CHECK(status == 0);
  json r = json::parse(take(out));
  REQUIRE(r["per_eps"].size() == 1);
  double lam0 = r["per_eps"][0]["lambdas"][0];
  CHECK(lam0 == doctest::Approx(0.1 * (std::sqrt(2.0) / 2 - 0.5)).epsilon(1e-4));

  CHECK(reslab_experiment_set(e, "mode", "wide") == RESLAB_E_PARSE);
  REQUIRE(reslab_experiment_set(e, "mode", "sharp") == RESLAB_OK);
  REQUIRE(reslab_experiment_set(e, "k", "1") == RESLAB_OK);
  REQUIRE(reslab_interior_spectrum(e, &out, &status) == RESLAB_OK);
  r = json::parse(take(out));
  CHECK(r["per_eps"][0]["lambdas"].size() == 1);

  // Without a tail the hypotheses cannot be checked.
  CHECK(reslab_hypotheses(e, &out) != RESLAB_OK);
  reslab_experiment_free(e);
  reslab_experiment_free(nullptr);
}

TEST_CASE("reference sweep through the cache and report") {
  reslab_experiment* e = nullptr;
  REQUIRE(reslab_experiment_load(config_path("reference.cfg").c_str(), &e) == RESLAB_OK);
  REQUIRE(reslab_experiment_set(e, "eps", "0.2") == RESLAB_OK);
  REQUIRE(reslab_experiment_set(e, "drifts", "false") == RESLAB_OK);

  char* out = nullptr;
  REQUIRE(reslab_hypotheses(e, &out) == RESLAB_OK);
  json hyp = json::parse(take(out));
  CHECK(hyp["pass"] == true);

  fs::path dir = fs::temp_directory_path() / ("reslab_capi_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  long n0 = reslab_sweep_compute_count();
  int status = -1;
  REQUIRE(reslab_sweep(e, dir.c_str(), 1, &out, &status) == RESLAB_OK);
  std::string first = take(out);
  CHECK(status == 0);
  REQUIRE(reslab_sweep(e, dir.c_str(), 1, &out, &status) == RESLAB_OK);
  CHECK(take(out) == first);
  CHECK(reslab_sweep_compute_count() == n0 + 1);

  json rec = json::parse(first);
  CHECK(rec["per_eps"][0]["symbol"]["c_lower"].get<double>() > 0.01);

  fs::path rep = dir / "report";
  CHECK(reslab_report(first.c_str(), rep.c_str(), "csv,json") == RESLAB_OK);
  CHECK(fs::exists(rep / "spectra.csv"));
  CHECK(fs::exists(rep / "record.json"));
  CHECK(reslab_report("not json", rep.c_str(), "csv") == RESLAB_E_PARSE);
  CHECK(reslab_report(first.c_str(), rep.c_str(), "pdf") == RESLAB_E_INVALID_ARGUMENT);

  // An angle outside the analyticity cone is rejected with the config.
  CHECK(reslab_experiment_set(e, "beta", "2") == RESLAB_E_CONE_VIOLATION);
  CHECK(std::string(reslab_last_error()).find("beta0") != std::string::npos);
  fs::remove_all(dir);
  reslab_experiment_free(e);
}
