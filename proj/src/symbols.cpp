#include "symbols.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "errors.hpp"

namespace reslab {

namespace {

double smooth_max(double a, double b, double delta) {
  return 0.5 * (a + b + std::sqrt((a - b) * (a - b) + delta * delta));
}

double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double c : v) s += c * c;
  return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Position-dependent pieces of h1 at radius r on side sg.
struct Parts {
  double chi;
  cplx rot2;   // e^{-2 i beta}
  cplx rho;    // r^2 / r_theta^2 - e^{-2 i beta} (3D)
  cplx V1;
};

Parts parts(const PotentialSpec& spec, double r, int sg, double eps, double beta, double r0) {
  Parts p;
  p.chi = chi_sm(r, r0);
  p.rot2 = std::polar(1.0, -2 * beta);
  cplx rth = complex_radius(r, r0, beta);
  p.rho = (r > 0) ? cplx(r * r) / (rth * rth) - p.rot2 : cplx(0);
  double inside = 0;
  if (p.chi > 0) inside = smooth_max(spec.V_eps(sg * r, eps), eps, 0.05 * eps);
  cplx outside = 0;
  if (p.chi < 1) outside = eval_V_rotated(spec, r, beta, r0, eps, sg);
  p.V1 = p.chi * inside + (1 - p.chi) * outside;
  return p;
}

// eps^2 times the blended kinetic symbol; q2 = |xi|^2, s = |xi|^2 + sigma(D^2).
cplx kinetic(const Parts& p, double eps, double q2, cplx s) {
  cplx scaled = p.rot2 * q2 + p.rho * s;
  return eps * eps * (p.chi * q2 + (1 - p.chi) * scaled);
}

}  // namespace

cplx symbol_D2(const std::vector<double>& x, const std::vector<double>& xi, int n) {
  double r2 = norm2(x);
  if (!(r2 > 0)) throw Error(Err::InvalidArgument, "symbol_D2 needs r(x) > 0");
  double xd = dot(x, xi);
  double nn = n;
  return cplx((nn - 1) * (nn - 3) / (4 * r2) - xd * xd / r2, (nn - 1) / r2 * xd);
}

double chi_sm(double r, double r0) {
  if (r <= r0) return 1;
  if (r >= r0 + 1) return 0;
  double t = r - r0;
  return 1 - t * t * t * (10 - 15 * t + 6 * t * t);
}

SymbolPoint symbol_h1(const PotentialSpec& spec, const std::vector<double>& x,
                      const std::vector<double>& xi, double eps, double beta, double r0) {
  if (std::fabs(beta) > spec.beta0) throw Error(Err::ConeViolation, "beta exceeds beta0");
  if (static_cast<int>(x.size()) != spec.dimension || xi.size() != x.size())
    throw Error(Err::InvalidArgument, "x and xi must match the spec dimension");
  double r = std::sqrt(norm2(x));
  int sg = (spec.dimension == 1 && x[0] < 0) ? -1 : 1;
  Parts p = parts(spec, r, sg, eps, beta, r0);
  double q2 = norm2(xi);
  cplx s = q2 + (r > 0 ? symbol_D2(x, xi, spec.dimension) : cplx(-q2));
  SymbolPoint out;
  out.x = x;
  out.xi = xi;
  out.h1 = kinetic(p, eps, q2, s) + p.V1;
  out.M = std::max(std::abs(p.V1), eps * eps * q2);
  return out;
}

void lower_bound_scan(const PotentialSpec& spec, const HypothesisReport& hyp, double eps,
                      double beta, double lambda, double r0, SymbolScanReport& out,
                      const LowerBoundGrids& g) {
  if (std::fabs(beta) > spec.beta0) throw Error(Err::ConeViolation, "beta exceeds beta0");
  if (g.n_core < 1 || g.n_tail < 1 || g.n_xi_small + g.n_xi_band < 1 || g.n_omega < 1)
    throw Error(Err::EmptyGrid, "empty scan grid");
  if (!(lambda > 0)) throw Error(Err::InvalidArgument, "lambda must be positive");
  out.eps = eps;
  out.beta = beta;
  out.lambda = lambda;
  out.r0 = r0;

  double r_blend = r0 + 1;
  double r_far = std::pow(10 * hyp.C_V / lambda, 1 / hyp.gamma_fit);
  r_far = std::max(r_far, 2 * r_blend);
  std::vector<double> rs;
  for (int i = 0; i <= g.n_core; ++i) rs.push_back(r_blend * i / g.n_core);
  for (int i = 1; i <= g.n_tail; ++i)
    rs.push_back(r_blend * std::pow(r_far / r_blend, static_cast<double>(i) / g.n_tail));

  std::vector<double> ks;  // eps |xi|
  for (int i = 0; i < g.n_xi_small; ++i) ks.push_back(10 * std::sqrt(lambda) * i / std::max(1, g.n_xi_small - 1));
  for (int i = 0; i < g.n_xi_band; ++i) ks.push_back(3.0 * i / std::max(1, g.n_xi_band - 1));

  std::vector<cplx> zs;
  for (int j = 0; j < g.n_omega; ++j)
    zs.push_back(lambda * (1.0 + g.c_z * std::polar(1.0, 2 * M_PI * j / g.n_omega)));

  std::vector<double> cosines{1.0};
  if (spec.dimension == 3) {
    cosines.clear();
    for (int j = 0; j < g.n_angle; ++j) cosines.push_back(std::cos(M_PI * j / (g.n_angle - 1)));
  }

  double best = INFINITY;
  std::vector<int> sides = spec.dimension == 1 ? std::vector<int>{1, -1} : std::vector<int>{1};
  for (int sg : sides)
    for (double r : rs) {
      if (spec.dimension == 3 && r == 0) continue;
      Parts p = parts(spec, r, sg, eps, beta, r0);
      double aV = std::abs(p.V1);
      for (double k : ks) {
        double q = k / eps, q2 = q * q;
        for (double ct : cosines) {
          cplx s = 0;  // 1D: |xi|^2 + sigma(D^2) = 0
          if (spec.dimension == 3) s = cplx(q2 * (1 - ct * ct), 2 * q * ct / r);
          cplx h = kinetic(p, eps, q2, s) + p.V1;
          double M = std::max(aV, k * k);
          double den = std::max(M, lambda);
          for (size_t j = 0; j < zs.size(); ++j) {
            double ratio = std::abs(h - zs[j]) / den;
            if (ratio < best) {
              best = ratio;
              out.arg_x = sg * r;
              out.arg_xi = q;
              out.arg_omega = 2 * M_PI * j / g.n_omega;
            }
          }
        }
      }
    }
  out.c_lower = best;
}

double non_trapping_scan(const PotentialSpec& spec, double lambda, double r0, double c_S, int n) {
  if (!spec.has_tail) throw Error(Err::RegionEmpty, "no tail");
  double level = (1 + c_S) * lambda;
  if (!(lambda > 0) || spec.V(r0) <= level)
    throw Error(Err::RegionEmpty, "lambda too large: V <= (1+c_S) lambda already at r0");
  // V is decreasing beyond r0; bracket the entry point of the region.
  double a = r0, b = 2 * r0;
  while (spec.V(b) > level) {
    a = b;
    b *= 2;
    if (b > 1e300) throw Error(Err::RegionEmpty, "region not reached");
  }
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (a + b);
    (spec.V(m) > level ? a : b) = m;
  }
  double r_in = b, r_out = b * 1e6;
  double best = INFINITY;
  for (int i = 0; i < n; ++i) {
    double r = r_in * std::pow(r_out / r_in, static_cast<double>(i) / (n - 1));
    double v = spec.V(r);
    double val = std::fabs((r - r0) * spec.dV(r) + 2 * (v - lambda)) / lambda;
    best = std::min(best, val);
  }
  return best;
}

std::pair<double, double> taylor_remainder_scan(const PotentialSpec& spec,
                                                const std::vector<double>& beta_list, double r0,
                                                double lambda, SymbolScanReport* detail) {
  if (beta_list.empty()) throw Error(Err::EmptyGrid, "no beta values");
  const int n = 2000;
  double r_hi1 = 1e4;
  // Second-order region {V <= 2 lambda} lies beyond r2.
  double r2 = r0;
  while (spec.V(r2) > 2 * lambda && r2 < 1e300) r2 *= 1.5;
  double err1 = 0, err2 = 0;
  for (double beta : beta_list) {
    double e1 = 0, e2 = 0;
    for (int i = 0; i < n; ++i) {
      double r = r0 * std::pow(std::max(r_hi1, 10 * r0) / r0, static_cast<double>(i) / (n - 1));
      double v = spec.V(r);
      cplx vt = eval_V_rotated(spec, r, beta, r0, 0.0, 1);
      e1 = std::max(e1, std::abs(vt - v) / (beta * v));
    }
    for (int i = 0; i < n; ++i) {
      double r = r2 * std::pow(1e3, static_cast<double>(i) / (n - 1));
      if (r <= r0) continue;
      double v = spec.V(r), dv = spec.dV(r);
      cplx vt = eval_V_rotated(spec, r, beta, r0, 0.0, 1);
      cplx lin = cplx(0, beta * (r - r0) * dv);
      double den = beta * std::fabs(beta * (r - r0) * dv);
      if (den > 0) e2 = std::max(e2, std::abs(vt - v - lin) / den);
    }
    if (detail) {
      detail->err1_by_beta.push_back({beta, e1});
      detail->err2_by_beta.push_back({beta, e2});
    }
    err1 = std::max(err1, e1);
    err2 = std::max(err2, e2);
  }
  if (detail) {
    detail->taylor_err1 = err1;
    detail->taylor_err2 = err2;
  }
  return {err1, err2};
}

std::string symbol_report_json(const SymbolScanReport& r) {
  nlohmann::json j;
  j["eps"] = r.eps;
  j["beta"] = r.beta;
  j["lambda"] = r.lambda;
  j["r0"] = r.r0;
  j["c_lower"] = r.c_lower;
  j["argmin"] = {{"x", r.arg_x}, {"xi", r.arg_xi}, {"omega", r.arg_omega}};
  j["nontrap_min"] = r.nontrap_min;
  j["c_S_used"] = r.c_S_used;
  j["taylor_err1"] = r.taylor_err1;
  j["taylor_err2"] = r.taylor_err2;
  return j.dump(2);
}

}  // namespace reslab
