#include "reslab/reslab.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "pipeline.hpp"

using namespace reslab;

struct reslab_experiment {
  KvConfig cfg;
};

namespace {

thread_local std::string g_last_error;

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RESLAB_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.code()) + 1;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RESLAB_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RESLAB_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw Error(Err::InvalidArgument, std::string(what) + " is NULL");
}

int stage_run(const reslab_experiment* e, unsigned stages, char** out, int* status) {
  return guarded([&] {
    need(e, "experiment");
    need(out, "output pointer");
    auto cfg = ExperimentConfig::from_config(e->cfg);
    RunRecord r = run_stages(cfg, stages);
    if (status) *status = record_status(r);
    *out = dup(record_to_json(r));
  });
}

}  // namespace

extern "C" {

const char* reslab_version(void) { return kToolVersion; }

const char* reslab_status_name(int code) {
  if (code == RESLAB_OK) return "Ok";
  if (code == RESLAB_E_INTERNAL) return "Internal";
  if (code < 1 || code > static_cast<int>(Err::InvalidArgument) + 1) return "Unknown";
  return err_name(static_cast<Err>(code - 1));
}

const char* reslab_last_error(void) { return g_last_error.c_str(); }

void reslab_free_string(char* s) { std::free(s); }

int reslab_experiment_from_text(const char* text, reslab_experiment** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "output pointer");
    KvConfig kv = KvConfig::parse(text);
    ExperimentConfig::from_config(kv);  // validate eagerly
    *out = new reslab_experiment{kv};
  });
}

int reslab_experiment_load(const char* path, reslab_experiment** out) {
  std::string text;
  int rc = guarded([&] {
    need(path, "path");
    std::ifstream f(path);
    if (!f) throw Error(Err::Io, std::string("cannot read ") + path);
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  });
  if (rc != RESLAB_OK) return rc;
  return reslab_experiment_from_text(text.c_str(), out);
}

void reslab_experiment_free(reslab_experiment* e) { delete e; }

int reslab_experiment_set(reslab_experiment* e, const char* key, const char* value) {
  return guarded([&] {
    need(e, "experiment");
    need(key, "key");
    need(value, "value");
    KvConfig next = e->cfg;
    next.set(key, value);
    ExperimentConfig::from_config(next);
    e->cfg = next;
  });
}

int reslab_experiment_config(const reslab_experiment* e, char** canonical, char** hash_hex) {
  return guarded([&] {
    need(e, "experiment");
    if (canonical) *canonical = dup(e->cfg.canonical());
    if (hash_hex) *hash_hex = dup(e->cfg.hash_hex());
  });
}

int reslab_wells(const reslab_experiment* e, char** json_out) {
  return guarded([&] {
    need(e, "experiment");
    need(json_out, "output pointer");
    auto cfg = ExperimentConfig::from_config(e->cfg);
    *json_out = dup(well_structure_json(well_structure(cfg.spec, cfg.wells_lo, cfg.wells_hi, cfg.wells_n)));
  });
}

int reslab_hypotheses(const reslab_experiment* e, char** json_out) {
  return guarded([&] {
    need(e, "experiment");
    need(json_out, "output pointer");
    auto cfg = ExperimentConfig::from_config(e->cfg);
    if (!cfg.spec.has_tail) throw Error(Err::InvalidArgument, "spec has no tail to verify");
    HypothesisReport h = verify_hypotheses(cfg.spec, cfg.eps_list);
    nlohmann::json j;
    j["gamma_fit"] = h.gamma_fit;
    j["c_V"] = h.c_V;
    j["C_V"] = h.C_V;
    j["beta0"] = h.beta0;
    j["fit_window"] = {h.r_lo, h.r_hi};
    j["fit_residual"] = h.fit_residual;
    j["dV_bound_gamma"] = h.dV_bound_gamma;
    j["dV_bound_gamma1"] = h.dV_bound_gamma1;
    j["pass"] = h.pass;
    j["v_eps_bounds"] = nlohmann::json::array();
    for (const auto& b : h.v_eps_bounds)
      j["v_eps_bounds"].push_back({{"eps", b.eps}, {"c_lower", b.c_lower}, {"c_upper", b.c_upper}});
    j["scaling_radius"] = nlohmann::json::array();
    for (double eps : cfg.eps_list)
      j["scaling_radius"].push_back({{"eps", eps}, {"r0", scaling_radius(h, eps)}});
    *json_out = dup(j.dump(2));
  });
}

int reslab_interior_spectrum(const reslab_experiment* e, char** json_out, int* run_status) {
  return stage_run(e, StageSpectrum, json_out, run_status);
}

int reslab_resonances(const reslab_experiment* e, char** json_out, int* run_status) {
  return stage_run(e, StageSpectrum | StageResonances, json_out, run_status);
}

int reslab_symbol_check(const reslab_experiment* e, char** json_out, int* run_status) {
  return stage_run(e, StageSpectrum | StageSymbols, json_out, run_status);
}

int reslab_sweep(const reslab_experiment* e, const char* cache_dir, int use_cache, char** json_out,
                 int* run_status) {
  return guarded([&] {
    need(e, "experiment");
    need(json_out, "output pointer");
    auto cfg = ExperimentConfig::from_config(e->cfg);
    CacheOptions co;
    co.dir = cache_dir ? cache_dir : "";
    co.enabled = use_cache != 0;
    RunRecord r = run_sweep(cfg, co);
    if (run_status) *run_status = record_status(r);
    *json_out = dup(record_to_json(r));
  });
}

long reslab_sweep_compute_count(void) { return sweep_compute_count(); }

int reslab_report(const char* record_json, const char* out_dir, const char* formats) {
  return guarded([&] {
    need(record_json, "record");
    need(out_dir, "out_dir");
    RunRecord r = record_from_json(record_json);
    emit_report(r, out_dir, formats ? formats : "csv,json,svg-data");
  });
}

}  // extern "C"
