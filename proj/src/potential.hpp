#pragma once

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "kvconfig.hpp"

namespace reslab {

using cplx = std::complex<double>;

struct CoreTerm {
  enum Kind { Poly, Gauss } kind = Poly;
  std::vector<double> coeffs;  // ascending powers (Poly)
  double amp = 0, center = 0, width = 1;  // Gauss: amp * exp(-((x-center)/width)^2 / 2)
};

struct PotentialValues {
  double F, gradF, laplF, V, V_eps;
};

class PotentialSpec {
 public:
  int dimension = 1;
  std::vector<CoreTerm> core;
  bool has_tail = false;
  double tail_a = 0.5;
  double tail_coeff = 1.0;
  double glue_radius = INFINITY;
  double grad_weight = 0.5;  // V = grad_weight * |F'|^2
  double lapl_weight = 0.5;  // V_eps = V - lapl_weight * eps * laplF
  double beta0 = 0.5;
  // Per side (index 0: x >= 0, index 1: x < 0): quintic bridge in t = |x| - R and tail offset.
  std::array<std::array<double, 6>, 2> bridge{};
  std::array<double, 2> tail_offset{};

  static PotentialSpec from_config(const KvConfig& cfg);
  static PotentialSpec from_text(const std::string& text) {
    return from_config(KvConfig::parse(text));
  }

  // d-th derivative of F along the line (1D) or the radius (3D), d in 0..3.
  double F(double x, int d = 0) const;
  double core_value(double x, int d) const;
  cplx core_value(cplx x, int d) const;
  // Continuation of F to a complex radial argument w on side sg (+1 or -1).
  // Derivatives are with respect to the physical coordinate x = sg * w.
  cplx Fz(cplx w, int sg, int d = 0) const;

  double laplF(double x) const;
  double V(double x) const;
  double dV(double x) const;
  double V_eps(double x, double eps) const;
  cplx V_eps(cplx w, int sg, double eps) const;

  // Start of the closed-form tail; +inf when there is none.
  double tail_start() const { return has_tail ? glue_radius + 1.0 : INFINITY; }
  double sqrt_alpha() const { return std::sqrt(grad_weight); }

 private:
  void solve_bridges(const KvConfig& cfg);
  void validate() const;
};

PotentialValues eval_potential(const PotentialSpec& spec, double x, double eps);

cplx complex_radius(double r, double r0, double beta);

// V_eps at r0 + (r - r0) e^{i beta}; only the closed-form tail (or an entire core) is continued.
cplx eval_V_rotated(const PotentialSpec& spec, double r, double beta, double r0, double eps = 0.0,
                    int side = 1);

struct HypothesisReport {
  double gamma_fit = 0, c_V = 0, C_V = 0;
  double nontrap_min = 0;
  double beta0 = 0.5;
  double r_lo = 0, r_hi = 0;
  double fit_residual = 0;
  double dV_bound_gamma = 0;    // max |V'| r^gamma
  double dV_bound_gamma1 = 0;   // max |V'| r^(gamma+1)
  struct EpsBounds {
    double eps, c_lower, c_upper;
  };
  std::vector<EpsBounds> v_eps_bounds;
  bool pass_bounds = false, pass_gamma = false, pass = false;
};

HypothesisReport fit_power_law(const std::function<double(double)>& V,
                               const std::function<double(double)>& dV, double r_lo, double r_hi,
                               int n = 200);

HypothesisReport verify_hypotheses(const PotentialSpec& spec, double r_lo, double r_hi,
                                   const std::vector<double>& eps_list, int n = 200);

// Default fit window: one decade starting a little past the bridge.
HypothesisReport verify_hypotheses(const PotentialSpec& spec, const std::vector<double>& eps_list);

double scaling_radius(const HypothesisReport& report, double eps);

}  // namespace reslab
