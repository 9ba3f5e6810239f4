#pragma once

#include <string>
#include <vector>

#include "potential.hpp"

namespace reslab {

struct SymbolPoint {
  std::vector<double> x, xi;
  cplx h1;
  double M;
};

cplx symbol_D2(const std::vector<double>& x, const std::vector<double>& xi, int n);

// Quintic smoothstep: 1 for r <= r0, 0 for r >= r0 + 1.
double chi_sm(double r, double r0);

SymbolPoint symbol_h1(const PotentialSpec& spec, const std::vector<double>& x,
                      const std::vector<double>& xi, double eps, double beta, double r0);

struct LowerBoundGrids {
  int n_core = 400;      // linear samples over the ball and blend zone (per side)
  int n_tail = 600;      // log samples from the blend zone out to V = lambda/10 (per side)
  int n_xi_small = 200;  // eps|xi| in [0, 10 sqrt(lambda)]
  int n_xi_band = 200;   // eps|xi| in [0, 3]
  int n_omega = 16;
  int n_angle = 8;       // 3D only: angle between x and xi
  double c_z = 0.5;
};

struct SymbolScanReport {
  double eps = 0, beta = 0, lambda = 0, r0 = 0;
  double c_lower = 0;
  double arg_x = 0, arg_xi = 0, arg_omega = 0;
  double nontrap_min = 0;
  double c_S_used = 0;
  double taylor_err1 = 0, taylor_err2 = 0;
  std::vector<std::pair<double, double>> err1_by_beta, err2_by_beta;
};

// Fills c_lower and its argmin; needs the tail fit (C_V, gamma) to size the x grid.
void lower_bound_scan(const PotentialSpec& spec, const HypothesisReport& hyp, double eps,
                      double beta, double lambda, double r0, SymbolScanReport& out,
                      const LowerBoundGrids& grids = {});

double non_trapping_scan(const PotentialSpec& spec, double lambda, double r0, double c_S,
                         int n = 10000);

std::pair<double, double> taylor_remainder_scan(const PotentialSpec& spec,
                                                const std::vector<double>& beta_list, double r0,
                                                double lambda, SymbolScanReport* detail = nullptr);

std::string symbol_report_json(const SymbolScanReport& r);

}  // namespace reslab
