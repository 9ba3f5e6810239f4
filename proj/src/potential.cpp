#include "potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace reslab {

namespace {

template <class T>
T poly_deriv(const std::vector<double>& c, T x, int d) {
  T acc = 0;
  for (int k = static_cast<int>(c.size()) - 1; k >= d; --k) {
    double f = c[k];
    for (int j = 0; j < d; ++j) f *= (k - j);
    acc = acc * x + f;
  }
  return acc;
}

// Probabilists' Hermite polynomials: d^n/dt^n e^{-t^2/2} = (-1)^n He_n(t) e^{-t^2/2}.
template <class T>
T hermite(T t, int n) {
  switch (n) {
    case 0: return T(1);
    case 1: return t;
    case 2: return t * t - 1.0;
    default: return t * t * t - 3.0 * t;
  }
}

template <class T>
T gauss_deriv(const CoreTerm& g, T x, int d) {
  T t = (x - g.center) / g.width;
  T e = g.amp * std::exp(-t * t / 2.0);
  double s = (d % 2 == 0) ? 1.0 : -1.0;
  return s * hermite(t, d) * e / std::pow(g.width, d);
}

double falling(double a, int d) {
  double f = 1;
  for (int j = 0; j < d; ++j) f *= (a - j);
  return f;
}

std::vector<CoreTerm> parse_core(const std::string& text) {
  std::vector<CoreTerm> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ';')) {
    part = trim(part);
    if (part.empty()) continue;
    std::istringstream ws(part);
    std::string kind;
    ws >> kind;
    std::vector<double> nums;
    std::string tok;
    while (ws >> tok) nums.push_back(parse_double(tok));
    CoreTerm t;
    if (kind == "poly") {
      if (nums.empty()) throw Error(Err::Parse, "poly term needs coefficients");
      t.kind = CoreTerm::Poly;
      t.coeffs = nums;
    } else if (kind == "gauss") {
      if (nums.size() != 3) throw Error(Err::Parse, "gauss term needs: amp center width");
      if (!(nums[2] > 0)) throw Error(Err::InvalidPotential, "gauss width must be positive");
      t.kind = CoreTerm::Gauss;
      t.amp = nums[0];
      t.center = nums[1];
      t.width = nums[2];
    } else {
      throw Error(Err::Parse, "unknown core term '" + kind + "'");
    }
    out.push_back(t);
  }
  return out;
}

// Bridge p(t) on [0,1]: p(0..2) from the core, p(1..2) to tail data.
std::array<double, 6> bridge_coeffs(const double f[3], const double tl[3]) {
  // M = [[1,1,1],[3,4,5],[6,12,20]], solved by Cramer's rule.
  double r0 = tl[0] - (f[0] + f[1] + f[2] / 2);
  double r1 = tl[1] - (f[1] + f[2]);
  double r2 = tl[2] - f[2];
  double c3 = 10 * r0 - 4 * r1 + 0.5 * r2;
  double c4 = -15 * r0 + 7 * r1 - r2;
  double c5 = 6 * r0 - 3 * r1 + 0.5 * r2;
  return {f[0], f[1], f[2] / 2, c3, c4, c5};
}

double bridge_energy(const std::array<double, 6>& p) {
  // Integral over [0,1] of p''(t)^2.
  double q[4] = {2 * p[2], 6 * p[3], 12 * p[4], 20 * p[5]};
  double s = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += q[i] * q[j] / (i + j + 1);
  return s;
}

double poly_at(const std::array<double, 6>& p, double t, int d) {
  std::vector<double> c(p.begin(), p.end());
  return poly_deriv(c, t, d);
}

}  // namespace

double PotentialSpec::core_value(double x, int d) const {
  double v = 0;
  for (const auto& t : core)
    v += (t.kind == CoreTerm::Poly) ? poly_deriv(t.coeffs, x, d) : gauss_deriv(t, x, d);
  return v;
}

cplx PotentialSpec::core_value(cplx x, int d) const {
  cplx v = 0;
  for (const auto& t : core)
    v += (t.kind == CoreTerm::Poly) ? poly_deriv(t.coeffs, x, d) : gauss_deriv(t, x, d);
  return v;
}

double PotentialSpec::F(double x, int d) const {
  if (dimension == 3) x = std::fabs(x);
  if (!has_tail) return core_value(x, d);
  int sg = x >= 0 ? 1 : -1;
  int side = x >= 0 ? 0 : 1;
  double w = sg * x;
  double sgd = (d % 2 == 0) ? 1.0 : sg;
  if (w <= glue_radius) return core_value(x, d);
  if (w <= glue_radius + 1) return sgd * poly_at(bridge[side], w - glue_radius, d);
  double v = tail_coeff * falling(tail_a, d) * std::pow(w, tail_a - d);
  if (d == 0) v += tail_offset[side];
  return sgd * v;
}

cplx PotentialSpec::Fz(cplx w, int sg, int d) const {
  double sgd = (d % 2 == 0) ? 1.0 : sg;
  if (!has_tail) return core_value(cplx(sg) * w, d);
  cplx v = tail_coeff * falling(tail_a, d) * std::pow(w, tail_a - d);
  if (d == 0) v += tail_offset[sg > 0 ? 0 : 1];
  return sgd * v;
}

double PotentialSpec::laplF(double x) const {
  double f2 = F(x, 2);
  if (dimension == 3) f2 += 2 * F(x, 1) / std::fabs(x);
  return f2;
}

double PotentialSpec::V(double x) const {
  double g = F(x, 1);
  return grad_weight * g * g;
}

double PotentialSpec::dV(double x) const { return 2 * grad_weight * F(x, 1) * F(x, 2); }

double PotentialSpec::V_eps(double x, double eps) const {
  return V(x) - lapl_weight * eps * laplF(x);
}

cplx PotentialSpec::V_eps(cplx w, int sg, double eps) const {
  cplx g = Fz(w, sg, 1);
  cplx l = Fz(w, sg, 2);
  if (dimension == 3) l += 2.0 * g / w;
  return grad_weight * g * g - lapl_weight * eps * l;
}

void PotentialSpec::solve_bridges(const KvConfig& cfg) {
  double R = glue_radius;
  double tl[3];
  for (int d = 0; d < 3; ++d) tl[d] = tail_coeff * falling(tail_a, d) * std::pow(R + 1, tail_a - d);
  for (int side = 0; side < 2; ++side) {
    int sg = side == 0 ? 1 : -1;
    double f[3];
    for (int d = 0; d < 3; ++d) f[d] = core_value(sg * R, d) * ((d % 2 == 0) ? 1.0 : sg);
    auto with_offset = [&](double off) {
      double t[3] = {tl[0] + off, tl[1], tl[2]};
      return bridge_coeffs(f, t);
    };
    double off;
    if (cfg.has("tail.offset")) {
      off = cfg.num("tail.offset");
    } else {
      // J(off) is quadratic; take its vertex.
      double j0 = bridge_energy(with_offset(0)), jp = bridge_energy(with_offset(1)),
             jm = bridge_energy(with_offset(-1));
      off = -((jp - jm) / 2) / (jp + jm - 2 * j0);
    }
    tail_offset[side] = off;
    bridge[side] = with_offset(off);
  }
}

void PotentialSpec::validate() const {
  if (has_tail) {
    for (int sg : {1, -1}) {
      if (dimension == 3 && sg < 0) continue;
      for (double edge : {glue_radius, glue_radius + 1}) {
        double dx = 1e-9 * std::max(1.0, edge);
        for (int d = 0; d < 3; ++d) {
          double lo = F(sg * (edge - dx), d), hi = F(sg * (edge + dx), d);
          double scale = std::max({1.0, std::fabs(lo), std::fabs(hi)});
          double slope =
              std::max(std::fabs(F(sg * (edge - dx), d + 1)), std::fabs(F(sg * (edge + dx), d + 1))) * dx;
          if (std::fabs(lo - hi) > 1e-8 * scale + 4 * slope)
            throw Error(Err::InvalidPotential, "glue not C2 at radius " + std::to_string(edge));
        }
      }
    }
    if (!(tail_coeff > 0)) throw Error(Err::InvalidPotential, "tail.coeff must be positive so F grows");
  } else {
    // Without a tail F is the core: must be a polynomial of even degree with positive lead.
    int deg = -1;
    double lead = 0;
    for (const auto& t : core)
      if (t.kind == CoreTerm::Poly)
        for (int k = static_cast<int>(t.coeffs.size()) - 1; k >= 0; --k)
          if (t.coeffs[k] != 0) {
            if (k > deg) { deg = k; lead = t.coeffs[k]; }
            else if (k == deg) lead += t.coeffs[k];
            break;
          }
    if (deg < 2 || deg % 2 != 0 || !(lead > 0))
      throw Error(Err::InvalidPotential, "F does not grow at infinity (no tail, core not coercive)");
  }

  // Scan critical points on the region containing all structure.
  double L = has_tail ? glue_radius + 1 : 10.0;
  if (!has_tail)
    for (const auto& t : core)
      if (t.kind == CoreTerm::Gauss) L = std::max(L, std::fabs(t.center) + 8 * t.width);
  double lo = dimension == 3 ? 0.0 : -L;
  int n = 20000;
  double h = (L - lo) / n;
  double best = INFINITY, second = INFINITY;
  int nmin = 0;
  double prev = F(lo, 1);
  for (int i = 1; i <= n; ++i) {
    double x = lo + i * h;
    double g = F(x, 1);
    if (prev < 0 && g >= 0) {
      ++nmin;
      double a = x - h, b = x;
      for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        double m = 0.5 * (a + b);
        (F(m, 1) < 0 ? a : b) = m;
      }
      double fv = F(0.5 * (a + b));
      if (fv < best) { second = best; best = fv; }
      else if (fv < second) second = fv;
    }
    prev = g;
  }
  if (dimension == 3 && F(0.0, 1) >= 0 && F(h, 1) > 0) {
    ++nmin;
    double fv = F(0.0);
    if (fv < best) { second = best; best = fv; }
    else if (fv < second) second = fv;
  }
  if (nmin == 0) throw Error(Err::InvalidPotential, "no finite global minimum");
  if (std::fabs(second - best) < 1e-10)
    throw Error(Err::TieAtGlobalMin, "global minimum is not unique");
}

PotentialSpec PotentialSpec::from_config(const KvConfig& cfg) {
  PotentialSpec s;
  s.dimension = static_cast<int>(cfg.integer("dimension", 1));
  if (s.dimension != 1 && s.dimension != 3)
    throw Error(Err::InvalidPotential, "dimension must be 1 or 3");
  if (!cfg.has("core")) throw Error(Err::Parse, "missing key 'core'");
  s.core = parse_core(cfg.str("core"));
  if (s.core.empty()) throw Error(Err::InvalidPotential, "at least one core term required");
  s.grad_weight = cfg.num("grad_weight", 0.5);
  s.lapl_weight = cfg.num("lapl_weight", 0.5);
  s.beta0 = cfg.num("beta0", 0.5);
  if (!(s.grad_weight > 0)) throw Error(Err::InvalidPotential, "grad_weight must be positive");

  s.glue_radius = cfg.num("glue_radius", INFINITY);
  bool tail_keys = cfg.has("tail.a") || cfg.has("tail.coeff") || cfg.has("tail.offset");
  s.has_tail = std::isfinite(s.glue_radius);
  if (tail_keys && !s.has_tail) throw Error(Err::InvalidPotential, "tail given but glue_radius is infinite");
  if (s.has_tail) {
    s.tail_a = cfg.num("tail.a", 0.5);
    s.tail_coeff = cfg.num("tail.coeff", 1.0);
    if (!(s.tail_a > 0 && s.tail_a < 1))
      throw Error(Err::InvalidPotential, "tail.a must lie in (0,1)");
    if (!(s.glue_radius > 0)) throw Error(Err::InvalidPotential, "glue_radius must be positive");
    s.solve_bridges(cfg);
  }
  s.validate();
  return s;
}

PotentialValues eval_potential(const PotentialSpec& spec, double x, double eps) {
  PotentialValues v;
  v.F = spec.F(x);
  v.gradF = spec.F(x, 1);
  v.laplF = spec.laplF(x);
  v.V = spec.grad_weight * v.gradF * v.gradF;
  v.V_eps = v.V - spec.lapl_weight * eps * v.laplF;
  return v;
}

cplx complex_radius(double r, double r0, double beta) {
  if (r <= r0) return r;
  return r0 + (r - r0) * std::polar(1.0, beta);
}

cplx eval_V_rotated(const PotentialSpec& spec, double r, double beta, double r0, double eps,
                    int side) {
  if (std::fabs(beta) > spec.beta0)
    throw Error(Err::OutsideAnalyticityCone, "|beta| exceeds beta0");
  if (r < r0) throw Error(Err::InsideCore, "r < r0");
  if (r0 < spec.tail_start()) throw Error(Err::InsideCore, "r0 lies inside the glued core");
  if (beta == 0) return spec.V_eps(side * r, eps);
  return spec.V_eps(complex_radius(r, r0, beta), side, eps);
}

HypothesisReport fit_power_law(const std::function<double(double)>& V,
                               const std::function<double(double)>& dV, double r_lo, double r_hi,
                               int n) {
  if (n < 20) throw Error(Err::InvalidArgument, "need at least 20 sample points");
  if (!(r_lo > 0 && r_hi > r_lo)) throw Error(Err::InvalidArgument, "bad fit range");
  HypothesisReport rep;
  rep.r_lo = r_lo;
  rep.r_hi = r_hi;
  std::vector<double> lr(n), lv(n), rs(n), vs(n), dvs(n);
  for (int i = 0; i < n; ++i) {
    double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / (n - 1));
    double v = V(r);
    if (!(v > 0) || !std::isfinite(v)) throw Error(Err::FitFailed, "V vanishes on the fit range");
    rs[i] = r;
    vs[i] = v;
    dvs[i] = dV(r);
    lr[i] = std::log(r);
    lv[i] = std::log(v);
  }
  for (int i = 0; i < n; ++i)
    if (!(dvs[i] < 0)) throw Error(Err::FitFailed, "tail of V is not strictly decreasing");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) { mx += lr[i]; my += lv[i]; }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lr[i] - mx) * (lr[i] - mx);
    sxy += (lr[i] - mx) * (lv[i] - my);
  }
  double slope = sxy / sxx;
  rep.gamma_fit = -slope;
  double res = 0;
  for (int i = 0; i < n; ++i) {
    double e = lv[i] - (my + slope * (lr[i] - mx));
    res = std::max(res, std::fabs(e));
  }
  rep.fit_residual = res;
  rep.c_V = INFINITY;
  rep.C_V = 0;
  double ratio_min = INFINITY;
  for (int i = 0; i < n; ++i) {
    double s = vs[i] * std::pow(rs[i], rep.gamma_fit);
    rep.c_V = std::min(rep.c_V, s);
    rep.C_V = std::max(rep.C_V, s);
    ratio_min = std::min(ratio_min, std::fabs(dvs[i]) / vs[i]);
    rep.dV_bound_gamma = std::max(rep.dV_bound_gamma, std::fabs(dvs[i]) * std::pow(rs[i], rep.gamma_fit));
    rep.dV_bound_gamma1 =
        std::max(rep.dV_bound_gamma1, std::fabs(dvs[i]) * std::pow(rs[i], rep.gamma_fit + 1));
  }
  rep.nontrap_min = ratio_min / rep.c_V;
  const double tol = 1e-3;
  rep.pass_bounds = rep.c_V <= rep.C_V * (1 + 1e-12);
  rep.pass_gamma = rep.gamma_fit > tol && rep.gamma_fit < 2 - tol;
  rep.pass = rep.pass_bounds && rep.pass_gamma;
  return rep;
}

HypothesisReport verify_hypotheses(const PotentialSpec& spec, double r_lo, double r_hi,
                                   const std::vector<double>& eps_list, int n) {
  if (r_lo < spec.tail_start())
    throw Error(Err::InvalidArgument, "fit range must lie beyond the glue");
  auto V = [&](double r) { return spec.V(r); };
  auto dV = [&](double r) { return spec.dV(r); };
  HypothesisReport rep = fit_power_law(V, dV, r_lo, r_hi, n);
  if (spec.dimension == 1) {
    // V is symmetric in the tail; check the left side agrees.
    HypothesisReport left = fit_power_law([&](double r) { return spec.V(-r); },
                                          [&](double r) { return -spec.dV(-r); }, r_lo, r_hi, n);
    rep.c_V = std::min(rep.c_V, left.c_V);
    rep.C_V = std::max(rep.C_V, left.C_V);
  }
  rep.beta0 = spec.beta0;
  for (double eps : eps_list) {
    HypothesisReport::EpsBounds b{eps, INFINITY, 0};
    for (int i = 0; i < n; ++i) {
      double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / (n - 1));
      double s = spec.V_eps(r, eps) * std::pow(r, rep.gamma_fit);
      b.c_lower = std::min(b.c_lower, s);
      b.c_upper = std::max(b.c_upper, s);
    }
    rep.v_eps_bounds.push_back(b);
  }
  return rep;
}

HypothesisReport verify_hypotheses(const PotentialSpec& spec, const std::vector<double>& eps_list) {
  if (!spec.has_tail) throw Error(Err::FitFailed, "spec has no decaying tail");
  double lo = std::max(10.0, 2 * spec.tail_start());
  return verify_hypotheses(spec, lo, 100 * lo, eps_list);
}

double scaling_radius(const HypothesisReport& report, double eps) {
  if (!(report.c_V > 0 && report.gamma_fit > 0))
    throw Error(Err::HypothesesNotVerified, "report carries no usable tail constants");
  if (!(eps > 0)) throw Error(Err::InvalidArgument, "eps must be positive");
  return std::pow(report.c_V / eps, 1.0 / report.gamma_fit);
}

}  // namespace reslab
