#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <vector>

#include "kvconfig.hpp"
#include "operators.hpp"
#include "potential.hpp"
#include "solvers.hpp"
#include "symbols.hpp"
#include "wells.hpp"

namespace reslab {

extern const char* const kToolVersion;

struct ExperimentConfig {
  KvConfig raw;
  PotentialSpec spec;
  std::vector<double> eps_list;
  long N = 0;                 // 0: automatic
  double rmax_factor = 4;
  double beta = 0.3;
  ContourMode mode = ContourMode::Sharp;
  double width = 0;           // smooth width; 0 means 8 h
  double tol = 1e-12;
  double si_tol = 1e-10;
  int max_iter = 500;
  int k = 0;                  // 0: number of minima
  Scheme scheme = Scheme::Fitted;
  bool extended_precision = false;
  double symbol_beta = 0.45;
  bool truncation_guard = false;
  bool check_truncation = false;
  double box = 6;             // interior half-width for specs without a tail
  double wells_lo = 0, wells_hi = 0;
  int wells_n = 4000;
  bool symbols = true;
  bool drifts = true;

  static ExperimentConfig from_config(const KvConfig& cfg);
  static ExperimentConfig from_text(const std::string& text) {
    return from_config(KvConfig::parse(text));
  }
};

// Numerics chosen for one eps.
struct EpsSetup {
  double eps, r0, h;
  long M;  // r0 = M h
  int N;   // interior node count
};

EpsSetup setup_for(const ExperimentConfig& cfg, const HypothesisReport* hyp, double eps);

struct ResonanceRow {
  int index;
  double lambda_seed;
  double re_mu, im_mu, theta_drift, grid_drift;
  int iters;
  bool found;
  std::string note;
};

struct SymbolRow {
  double c_lower, nontrap_min, taylor_err1, taylor_err2, c_S, beta, lambda;
};

struct EpsRecord {
  double eps = 0, r0 = 0, h = 0;
  int N = 0;
  std::vector<double> lambdas, residuals;
  std::vector<ResonanceRow> resonances;
  std::optional<SymbolRow> symbol;
  std::optional<double> truncation_drift;
  std::string error;  // empty on success
};

struct DepthRow {
  int index;
  double d_well_analysis, d_fitted, rel_err, r2;
};

struct RunRecord {
  std::string config_hash;
  std::string config_canonical;
  std::string tool_version;
  std::string started, finished;
  std::vector<Minimum> minima;
  std::vector<double> depths;
  std::vector<EpsRecord> per_eps;
  std::vector<DepthRow> fitted;
};

struct DepthFit {
  double d_hat, r2;
};
DepthFit fit_depth(const std::vector<std::pair<double, double>>& eps_lambda);

enum Stage : unsigned {
  StageSpectrum = 1,
  StageResonances = 2,
  StageSymbols = 4,
  StageAll = 7,
};

RunRecord run_stages(const ExperimentConfig& cfg, unsigned stages);

struct CacheOptions {
  std::string dir;  // empty: RESLAB_CACHE, then ".reslab-cache"
  bool enabled = true;
};
std::string resolve_cache_dir(const std::string& requested);

RunRecord run_sweep(const ExperimentConfig& cfg, const CacheOptions& cache = {});
// Number of sweeps actually computed (not served from cache) in this process.
long sweep_compute_count();

std::string record_to_json(const RunRecord& r, bool pretty = true);
RunRecord record_from_json(const std::string& text);

// formats: any of "csv", "json", "svg-data", comma separated.
std::vector<std::string> emit_report(const RunRecord& r, const std::string& out_dir,
                                     const std::string& formats);

// 0 success, 3 partial failure, 4 numerical failure on all eps.
int record_status(const RunRecord& r);

}  // namespace reslab
