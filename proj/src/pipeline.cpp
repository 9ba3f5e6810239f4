#include "pipeline.hpp"

#include <algorithm>
#include <cfloat>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "errors.hpp"

namespace reslab {

const char* const kToolVersion = "reslab 0.3.0";

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<long> g_sweeps_computed{0};

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Shortest text that round-trips.
std::string num(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(Err::Io, "cannot open " + p.string());
  f << text;
  if (!f) throw Error(Err::Io, "write failed: " + p.string());
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const KvConfig& cfg) {
  ExperimentConfig c;
  c.raw = cfg;
  c.spec = PotentialSpec::from_config(cfg);
  c.eps_list = cfg.has("eps") ? cfg.list("eps") : std::vector<double>{0.20, 0.175, 0.15, 0.125, 0.10};
  if (c.eps_list.empty()) throw Error(Err::Parse, "eps list is empty");
  for (double e : c.eps_list)
    if (!(e > 0)) throw Error(Err::InvalidArgument, "eps values must be positive");
  std::sort(c.eps_list.begin(), c.eps_list.end(), std::greater<>());
  c.N = cfg.integer("N", 0);
  c.rmax_factor = cfg.num("rmax_factor", 4);
  c.beta = cfg.num("beta", 0.3);
  std::string mode = cfg.str("mode", "sharp");
  if (mode == "sharp") c.mode = ContourMode::Sharp;
  else if (mode == "smooth") c.mode = ContourMode::Smooth;
  else throw Error(Err::Parse, "mode must be sharp or smooth");
  c.width = cfg.num("width", 0);
  c.tol = cfg.num("tol", 1e-12);
  c.si_tol = cfg.num("si_tol", 1e-10);
  c.max_iter = static_cast<int>(cfg.integer("max_iter", 500));
  c.k = static_cast<int>(cfg.integer("k", 0));
  std::string scheme = cfg.str("scheme", "fitted");
  if (scheme == "fitted") c.scheme = Scheme::Fitted;
  else if (scheme == "fd") c.scheme = Scheme::FD;
  else throw Error(Err::Parse, "scheme must be fitted or fd");
  c.extended_precision = cfg.flag("extended_precision", false);
  c.symbol_beta = cfg.num("symbol_beta", 0.45);
  c.truncation_guard = cfg.flag("truncation_guard", false);
  c.check_truncation = cfg.flag("check_truncation", false);
  c.box = cfg.num("box", 6);
  c.wells_n = static_cast<int>(cfg.integer("wells.n_grid", 4000));
  c.symbols = cfg.flag("symbols", true);
  c.drifts = cfg.flag("drifts", true);
  double reach = c.spec.has_tail ? c.spec.glue_radius + 1 : c.box;
  c.wells_lo = cfg.num("wells.lo", c.spec.dimension == 3 ? 0.0 : -reach);
  c.wells_hi = cfg.num("wells.hi", reach);
  if (!(c.tol > 0 && c.si_tol > 0 && c.rmax_factor > 0 && c.max_iter > 0))
    throw Error(Err::InvalidArgument, "tolerances and factors must be positive");
  if (c.N < 0 || c.k < 0) throw Error(Err::InvalidArgument, "N and k must be non-negative");
  if (c.spec.has_tail && (std::fabs(c.beta) > c.spec.beta0 || std::fabs(c.symbol_beta) > c.spec.beta0))
    throw Error(Err::ConeViolation, "beta and symbol_beta must not exceed beta0 of the tail");
  return c;
}

EpsSetup setup_for(const ExperimentConfig& cfg, const HypothesisReport* hyp, double eps) {
  EpsSetup s;
  s.eps = eps;
  double r0 = cfg.spec.has_tail ? scaling_radius(*hyp, eps) : cfg.box;
  if (cfg.spec.has_tail && r0 <= cfg.spec.tail_start())
    throw Error(Err::InvalidArgument, "r0(eps) falls inside the glued core; eps too large");
  long N = cfg.N;
  if (N == 0) {
    double h_target = std::min(0.01, eps / 4);
    N = std::max(4000L, static_cast<long>(std::ceil(40 * r0 / h_target)));
  }
  if (cfg.spec.dimension == 3) {
    s.M = N + 1;
  } else {
    s.M = (N + 2) / 2;
  }
  s.h = r0 / static_cast<double>(s.M);
  s.r0 = static_cast<double>(s.M) * s.h;
  s.N = static_cast<int>(cfg.spec.dimension == 3 ? s.M - 1 : 2 * s.M - 1);
  return s;
}

DepthFit fit_depth(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 4) throw Error(Err::InsufficientPoints, "need at least 4 (eps, lambda) points");
  std::vector<double> xs, ys;
  for (auto [e, l] : pts) {
    if (!(l > 0)) throw Error(Err::NonPositiveEigenvalue, "lambda must be positive");
    xs.push_back(1 / e);
    ys.push_back(std::log(l));
  }
  double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  double slope = sxy / sxx;
  DepthFit f;
  f.d_hat = -slope;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RunRecord run_stages(const ExperimentConfig& cfg, unsigned stages) {
  RunRecord rec;
  rec.config_hash = cfg.raw.hash_hex();
  rec.config_canonical = cfg.raw.canonical();
  rec.tool_version = kToolVersion;
  rec.started = now_iso();
  const PotentialSpec& spec = cfg.spec;

  WellStructure ws = well_structure(spec, cfg.wells_lo, cfg.wells_hi, cfg.wells_n);
  rec.minima = ws.minima;
  rec.depths = ws.depths;

  std::optional<HypothesisReport> hyp;
  if (spec.has_tail) {
    hyp = verify_hypotheses(spec, cfg.eps_list);
    if (!hyp->pass) throw Error(Err::HypothesesNotVerified, "tail fails the decay hypothesis");
  }
  int k = cfg.k > 0 ? cfg.k : static_cast<int>(ws.minima.size());

  for (double eps : cfg.eps_list) {
    EpsRecord er;
    er.eps = eps;
    try {
      EpsSetup st = setup_for(cfg, hyp ? &*hyp : nullptr, eps);
      er.r0 = st.r0;
      er.h = st.h;
      er.N = st.N;
      Grid1D g = spec.dimension == 3 ? Grid1D::radial(st.h, st.M) : Grid1D::symmetric(st.h, st.M);
      AssemblyOptions ao;
      ao.scheme = cfg.scheme;
      DiscretizedOperator op = assemble_box(spec, eps, g, ao);
      EigOptions eo;
      eo.tol = cfg.tol;
      eo.precision = cfg.extended_precision ? Precision::Quad : Precision::Long;
      SpectrumResult sr = lowest_eigs(op, k, eo);
      er.lambdas = sr.eigenvalues;
      er.residuals = sr.residuals;

      if ((stages & StageResonances) && spec.has_tail && k > 0) {
        double floor_abs = 100 * LDBL_EPSILON * sr.scale;
        std::vector<double> seeds;
        std::vector<int> idx;
        for (int j = 0; j < k; ++j)
          if (sr.eigenvalues[j] > floor_abs) {
            seeds.push_back(sr.eigenvalues[j]);
            idx.push_back(j);
          }
        ScalingContour c;
        c.r0 = st.r0;
        c.beta = cfg.beta;
        c.mode = cfg.mode;
        c.width = cfg.width > 0 ? cfg.width : 8 * st.h;
        ResonanceParams rp;
        rp.h = st.h;
        rp.rmax_factor = cfg.rmax_factor;
        rp.tol = cfg.si_tol;
        rp.max_iter = cfg.max_iter;
        rp.drifts = cfg.drifts;
        rp.scheme = cfg.scheme;
        if (cfg.truncation_guard) {
          AssemblyOptions guard;
          guard.truncation_guard = true;
          guard.check_coarse = false;
          long K = std::lround(cfg.rmax_factor * st.r0 / st.h);
          Grid1D gf = spec.dimension == 3 ? Grid1D::radial(st.h, K) : Grid1D::symmetric(st.h, K);
          assemble_full_scaled(spec, eps, c, gf, guard);
        }
        auto res = find_resonances(spec, eps, c, seeds, rp);
        for (size_t i = 0; i < res.size(); ++i) {
          const auto& r = res[i];
          er.resonances.push_back({idx[i], r.seed, r.mu.real(), r.mu.imag(), r.theta_drift,
                                   r.grid_drift, r.iterations, r.found, r.note});
        }
        if (cfg.check_truncation && !seeds.empty()) {
          ResonanceParams rp2 = rp;
          rp2.rmax_factor = 2 * cfg.rmax_factor;
          rp2.drifts = false;
          auto res2 = find_resonances(spec, eps, c, seeds, rp2);
          double drift = 0;
          for (size_t i = 0; i < res.size(); ++i)
            if (res[i].found && res2[i].found) drift = std::max(drift, std::abs(res2[i].mu - res[i].mu));
          er.truncation_drift = drift;
        }
      }

      if ((stages & StageSymbols) && cfg.symbols && spec.has_tail) {
        double lambda = k >= 2 ? sr.eigenvalues[1] : sr.eigenvalues[0];
        if (lambda > 0) {
          SymbolScanReport rep;
          lower_bound_scan(spec, *hyp, eps, cfg.symbol_beta, lambda, st.r0, rep);
          double c_S = hyp->c_V / (12 * hyp->C_V);
          rep.c_S_used = c_S;
          rep.nontrap_min = non_trapping_scan(spec, lambda, st.r0, c_S);
          std::vector<double> betas;
          for (double b : {0.1, 0.2, 0.4})
            if (b <= spec.beta0) betas.push_back(b);
          taylor_remainder_scan(spec, betas, st.r0, lambda, &rep);
          er.symbol = SymbolRow{rep.c_lower, rep.nontrap_min, rep.taylor_err1, rep.taylor_err2,
                                c_S, cfg.symbol_beta, lambda};
        }
      }
    } catch (const Error& ex) {
      er.error = ex.what();
    }
    rec.per_eps.push_back(std::move(er));
  }

  for (size_t i = 1; i < ws.minima.size() && static_cast<int>(i) < k; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& er : rec.per_eps)
      if (er.error.empty() && er.lambdas.size() > i && er.lambdas[i] > 0)
        pts.push_back({er.eps, er.lambdas[i]});
    if (pts.size() < 4) continue;
    DepthFit f = fit_depth(pts);
    double d = ws.depths[i - 1];
    rec.fitted.push_back({static_cast<int>(i), d, f.d_hat, std::fabs(f.d_hat - d) / d, f.r2});
  }
  rec.finished = now_iso();
  return rec;
}

std::string resolve_cache_dir(const std::string& requested) {
  if (!requested.empty()) return requested;
  if (const char* env = std::getenv("RESLAB_CACHE"); env && *env) return env;
  return ".reslab-cache";
}

long sweep_compute_count() { return g_sweeps_computed.load(); }

namespace {

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fs::create_directories(dir);
    fd_ = ::open((dir / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error(Err::Io, "cannot open cache lock in " + dir.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(Err::Io, "cannot lock cache directory");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace

RunRecord run_sweep(const ExperimentConfig& cfg, const CacheOptions& cache) {
  if (!cache.enabled) {
    ++g_sweeps_computed;
    return run_stages(cfg, StageAll);
  }
  fs::path dir = resolve_cache_dir(cache.dir);
  std::string key = cfg.raw.hash_hex();
  {
    // The key covers the config only; a different tool version is a miss.
    KvConfig keyed = cfg.raw;
    keyed.set("__version", kToolVersion);
    key = keyed.hash_hex();
  }
  fs::path file = dir / (key + ".json");
  DirLock lock(dir);
  if (fs::exists(file)) {
    std::ifstream f(file, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
      RunRecord r = record_from_json(ss.str());
      if (r.config_canonical == cfg.raw.canonical()) return r;
    } catch (const std::exception&) {
      // unreadable entry: recompute and overwrite
    }
  }
  ++g_sweeps_computed;
  RunRecord r = run_stages(cfg, StageAll);
  fs::path tmp = dir / (key + ".json.tmp");
  write_file(tmp, record_to_json(r));
  fs::rename(tmp, file);
  return r;
}

std::string record_to_json(const RunRecord& r, bool pretty) {
  json j;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config_canonical;
  j["tool_version"] = r.tool_version;
  j["timestamps"] = {{"started", r.started}, {"finished", r.finished}};
  j["wells"]["minima"] = json::array();
  for (const auto& m : r.minima) j["wells"]["minima"].push_back({{"x", m.x}, {"F", m.F}});
  j["wells"]["depths"] = r.depths;
  j["per_eps"] = json::array();
  for (const auto& e : r.per_eps) {
    json je;
    je["eps"] = e.eps;
    je["r0"] = e.r0;
    je["h"] = e.h;
    je["N"] = e.N;
    je["lambdas"] = e.lambdas;
    je["residuals"] = e.residuals;
    je["resonances"] = json::array();
    for (const auto& rr : e.resonances) {
      json jr = {{"index", rr.index},       {"lambda_seed", rr.lambda_seed},
                 {"re_mu", rr.re_mu},       {"im_mu", rr.im_mu},
                 {"theta_drift", rr.theta_drift}, {"grid_drift", rr.grid_drift},
                 {"iters", rr.iters},       {"found", rr.found},
                 {"note", rr.note}};
      if (rr.found && rr.im_mu != 0)
        jr["s_proxy_im"] = e.eps * std::log(rr.lambda_seed / std::fabs(rr.im_mu));
      if (rr.found && rr.re_mu != rr.lambda_seed)
        jr["s_proxy_re"] = e.eps * std::log(rr.lambda_seed / std::fabs(rr.re_mu - rr.lambda_seed));
      je["resonances"].push_back(jr);
    }
    if (e.symbol) {
      const auto& s = *e.symbol;
      je["symbol"] = {{"c_lower", s.c_lower},         {"nontrap_min", s.nontrap_min},
                      {"taylor_err1", s.taylor_err1}, {"taylor_err2", s.taylor_err2},
                      {"c_S", s.c_S},                 {"beta", s.beta},
                      {"lambda", s.lambda}};
    }
    if (e.truncation_drift) je["truncation_drift"] = *e.truncation_drift;
    je["error"] = e.error;
    j["per_eps"].push_back(je);
  }
  j["depths"] = json::array();
  for (const auto& d : r.fitted)
    j["depths"].push_back({{"index", d.index},
                           {"d_well_analysis", d.d_well_analysis},
                           {"d_fitted", d.d_fitted},
                           {"rel_err", d.rel_err},
                           {"r2", d.r2}});
  return pretty ? j.dump(2) + "\n" : j.dump();
}

RunRecord record_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw Error(Err::Parse, std::string("record json: ") + ex.what());
  }
  RunRecord r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config_canonical = j.at("config").get<std::string>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.started = j.at("timestamps").at("started").get<std::string>();
    r.finished = j.at("timestamps").at("finished").get<std::string>();
    for (const auto& m : j.at("wells").at("minima"))
      r.minima.push_back({m.at("x").get<double>(), m.at("F").get<double>()});
    r.depths = j.at("wells").at("depths").get<std::vector<double>>();
    for (const auto& je : j.at("per_eps")) {
      EpsRecord e;
      e.eps = je.at("eps").get<double>();
      e.r0 = je.at("r0").get<double>();
      e.h = je.at("h").get<double>();
      e.N = je.at("N").get<int>();
      e.lambdas = je.at("lambdas").get<std::vector<double>>();
      e.residuals = je.at("residuals").get<std::vector<double>>();
      for (const auto& jr : je.at("resonances"))
        e.resonances.push_back({jr.at("index").get<int>(), jr.at("lambda_seed").get<double>(),
                                jr.at("re_mu").get<double>(), jr.at("im_mu").get<double>(),
                                jr.at("theta_drift").get<double>(), jr.at("grid_drift").get<double>(),
                                jr.at("iters").get<int>(), jr.at("found").get<bool>(),
                                jr.at("note").get<std::string>()});
      if (je.contains("symbol")) {
        const auto& s = je.at("symbol");
        e.symbol = SymbolRow{s.at("c_lower").get<double>(),     s.at("nontrap_min").get<double>(),
                             s.at("taylor_err1").get<double>(), s.at("taylor_err2").get<double>(),
                             s.at("c_S").get<double>(),         s.at("beta").get<double>(),
                             s.at("lambda").get<double>()};
      }
      if (je.contains("truncation_drift")) e.truncation_drift = je.at("truncation_drift").get<double>();
      e.error = je.at("error").get<std::string>();
      r.per_eps.push_back(std::move(e));
    }
    for (const auto& d : j.at("depths"))
      r.fitted.push_back({d.at("index").get<int>(), d.at("d_well_analysis").get<double>(),
                          d.at("d_fitted").get<double>(), d.at("rel_err").get<double>(),
                          d.at("r2").get<double>()});
  } catch (const json::exception& ex) {
    throw Error(Err::Parse, std::string("record json: ") + ex.what());
  }
  return r;
}

std::vector<std::string> emit_report(const RunRecord& r, const std::string& out_dir,
                                     const std::string& formats) {
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Err::Io, "cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> written;
  auto want = [&](const std::string& f) {
    std::stringstream ss(formats);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (trim(tok) == f) return true;
    return false;
  };
  if (!want("csv") && !want("json") && !want("svg-data"))
    throw Error(Err::InvalidArgument, "unknown report format list: " + formats);

  if (want("csv")) {
    std::string s = "eps,index,lambda,residual\n";
    for (const auto& e : r.per_eps)
      for (size_t i = 0; i < e.lambdas.size(); ++i)
        s += num(e.eps) + "," + std::to_string(i) + "," + num(e.lambdas[i]) + "," +
             (i < e.residuals.size() ? num(e.residuals[i]) : std::string("")) + "\n";
    write_file(dir / "spectra.csv", s);
    written.push_back((dir / "spectra.csv").string());

    s = "eps,index,lambda_seed,re_mu,im_mu,theta_drift,grid_drift,iters\n";
    for (const auto& e : r.per_eps)
      for (const auto& rr : e.resonances)
        if (rr.found)
          s += num(e.eps) + "," + std::to_string(rr.index) + "," + num(rr.lambda_seed) + "," +
               num(rr.re_mu) + "," + num(rr.im_mu) + "," + num(rr.theta_drift) + "," +
               num(rr.grid_drift) + "," + std::to_string(rr.iters) + "\n";
    write_file(dir / "resonances.csv", s);
    written.push_back((dir / "resonances.csv").string());

    s = "index,d_well_analysis,d_fitted,rel_err,r2\n";
    for (const auto& d : r.fitted)
      s += std::to_string(d.index) + "," + num(d.d_well_analysis) + "," + num(d.d_fitted) + "," +
           num(d.rel_err) + "," + num(d.r2) + "\n";
    write_file(dir / "depths.csv", s);
    written.push_back((dir / "depths.csv").string());

    s = "eps,c_lower,nontrap_min,taylor_err1,taylor_err2\n";
    for (const auto& e : r.per_eps)
      if (e.symbol)
        s += num(e.eps) + "," + num(e.symbol->c_lower) + "," + num(e.symbol->nontrap_min) + "," +
             num(e.symbol->taylor_err1) + "," + num(e.symbol->taylor_err2) + "\n";
    write_file(dir / "symbol.csv", s);
    written.push_back((dir / "symbol.csv").string());
  }
  if (want("json")) {
    write_file(dir / "record.json", record_to_json(r));
    written.push_back((dir / "record.json").string());
  }
  if (want("svg-data")) {
    size_t kmax = 0;
    for (const auto& e : r.per_eps) kmax = std::max(kmax, e.lambdas.size());
    for (size_t i = 0; i < kmax; ++i) {
      std::string s = "# 1/eps ln(lambda_" + std::to_string(i) + ")\n";
      for (const auto& e : r.per_eps)
        if (e.lambdas.size() > i && e.lambdas[i] > 0)
          s += num(1 / e.eps) + " " + num(std::log(e.lambdas[i])) + "\n";
      auto p = dir / ("lnlambda_" + std::to_string(i) + ".dat");
      write_file(p, s);
      written.push_back(p.string());
    }
    std::string im = "# 1/eps ln|Im mu| index\n", plane = "# Re mu  Im mu  eps index\n";
    for (const auto& e : r.per_eps)
      for (const auto& rr : e.resonances) {
        if (!rr.found) continue;
        if (rr.im_mu != 0)
          im += num(1 / e.eps) + " " + num(std::log(std::fabs(rr.im_mu))) + " " +
                std::to_string(rr.index) + "\n";
        plane += num(rr.re_mu) + " " + num(rr.im_mu) + " " + num(e.eps) + " " +
                 std::to_string(rr.index) + "\n";
      }
    write_file(dir / "lnim.dat", im);
    write_file(dir / "resonance_plane.dat", plane);
    written.push_back((dir / "lnim.dat").string());
    written.push_back((dir / "resonance_plane.dat").string());
  }
  return written;
}

int record_status(const RunRecord& r) {
  size_t failed = 0;
  for (const auto& e : r.per_eps) failed += !e.error.empty();
  if (r.per_eps.empty() || failed == 0) return 0;
  return failed == r.per_eps.size() ? 4 : 3;
}

}  // namespace reslab
