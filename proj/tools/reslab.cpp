// Command-line front end; everything goes through the C API.
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "reslab/reslab.h"

namespace {

struct Opts {
  std::string config, eps, beta, mode, out, cache, in, formats = "csv,json,svg-data";
  bool no_cache = false, check_truncation = false, quiet = false;
};

bool config_error(int rc) {
  switch (rc) {
    case RESLAB_E_PARSE:
    case RESLAB_E_INVALID_POTENTIAL:
    case RESLAB_E_INVALID_ARGUMENT:
    case RESLAB_E_HYPOTHESES_NOT_VERIFIED:
    case RESLAB_E_CONE_VIOLATION:
    case RESLAB_E_OUTSIDE_ANALYTICITY_CONE:
      return true;
    default:
      return false;
  }
}

int fail(int rc) {
  std::fprintf(stderr, "reslab: %s\n", reslab_last_error());
  return config_error(rc) ? 2 : 4;
}

int load(const Opts& o, reslab_experiment** e) {
  if (o.config.empty()) {
    std::fprintf(stderr, "reslab: --config is required\n");
    return 2;
  }
  int rc = reslab_experiment_load(o.config.c_str(), e);
  if (rc != RESLAB_OK) {
    std::fprintf(stderr, "reslab: %s\n", reslab_last_error());
    return 2;
  }
  auto set = [&](const char* k, const std::string& v) {
    if (v.empty() || rc != RESLAB_OK) return;
    rc = reslab_experiment_set(*e, k, v.c_str());
  };
  set("eps", o.eps);
  set("beta", o.beta);
  set("mode", o.mode);
  if (o.check_truncation) set("check_truncation", "true");
  if (rc != RESLAB_OK) {
    std::fprintf(stderr, "reslab: %s\n", reslab_last_error());
    reslab_experiment_free(*e);
    *e = nullptr;
    return 2;
  }
  return 0;
}

void print_and_free(char* s, const Opts& o) {
  if (!o.quiet) std::fputs(s, stdout);
  reslab_free_string(s);
}

// Runs a stage, optionally writes report files, and maps the record status to an exit code.
template <class Fn>
int stage(const Opts& o, Fn fn) {
  reslab_experiment* e = nullptr;
  if (int rc = load(o, &e)) return rc;
  char* json = nullptr;
  int status = 0;
  int rc = fn(e, &json, &status);
  reslab_experiment_free(e);
  if (rc != RESLAB_OK) return fail(rc);
  if (!o.out.empty()) {
    int rr = reslab_report(json, o.out.c_str(), o.formats.c_str());
    if (rr != RESLAB_OK) {
      reslab_free_string(json);
      return fail(rr);
    }
  }
  print_and_free(json, o);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metastable well and resonance laboratory"};
  app.set_version_flag("--version", reslab_version());
  app.require_subcommand(1);
  app.fallthrough();
  Opts o;
  app.add_option("--config", o.config, "Key-value config file");
  app.add_option("--eps", o.eps, "Comma separated eps list (overrides config)");
  app.add_option("--beta", o.beta, "Scaling angle");
  app.add_option("--mode", o.mode, "Contour mode")->check(CLI::IsMember({"sharp", "smooth"}));
  app.add_option("--out", o.out, "Report output directory");
  app.add_option("--cache", o.cache, "Cache directory (default $RESLAB_CACHE or .reslab-cache)");
  app.add_flag("--no-cache", o.no_cache, "Always recompute");
  app.add_flag("--check-truncation", o.check_truncation, "Re-solve with doubled R_max");
  app.add_option("--format", o.formats, "Report formats: csv,json,svg-data");
  app.add_flag("-q,--quiet", o.quiet, "Do not print JSON to stdout");

  auto* wells = app.add_subcommand("wells", "Minima, barrier depths");
  auto* interior = app.add_subcommand("interior-spectrum", "Lowest Dirichlet eigenvalues per eps");
  auto* res = app.add_subcommand("resonances", "Complex-scaled resonances seeded by the interior spectrum");
  auto* sym = app.add_subcommand("symbol-check", "Symbol lower bound, non-trapping and Taylor scans");
  auto* hyp = app.add_subcommand("hypotheses", "Tail power-law fit and scaling radii");
  auto* sweep = app.add_subcommand("sweep", "Full eps sweep with depth fit (cached)");
  auto* report = app.add_subcommand("report", "Emit report files from a saved run record");
  report->add_option("--in", o.in, "Run record JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*wells || *hyp) {
    reslab_experiment* e = nullptr;
    if (int rc = load(o, &e)) return rc;
    char* json = nullptr;
    int rc = *wells ? reslab_wells(e, &json) : reslab_hypotheses(e, &json);
    reslab_experiment_free(e);
    if (rc != RESLAB_OK) return fail(rc);
    print_and_free(json, o);
    std::fputs("\n", stdout);
    return 0;
  }
  if (*interior) return stage(o, reslab_interior_spectrum);
  if (*res) return stage(o, reslab_resonances);
  if (*sym) return stage(o, reslab_symbol_check);
  if (*sweep) {
    return stage(o, [&](const reslab_experiment* e, char** json, int* status) {
      return reslab_sweep(e, o.cache.empty() ? nullptr : o.cache.c_str(), !o.no_cache, json, status);
    });
  }
  if (*report) {
    std::ifstream f(o.in);
    if (!f) {
      std::fprintf(stderr, "reslab: cannot read %s\n", o.in.c_str());
      return 2;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    std::string dir = o.out.empty() ? "." : o.out;
    int rc = reslab_report(ss.str().c_str(), dir.c_str(), o.formats.c_str());
    if (rc != RESLAB_OK) {
      std::fprintf(stderr, "reslab: %s\n", reslab_last_error());
      return rc == RESLAB_E_PARSE ? 2 : 4;
    }
    return 0;
  }
  return 2;
}
