#include "solvers.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <type_traits>
#include <limits>
#include <quadmath.h>

#include "errors.hpp"

namespace reslab {

namespace {

using LD = long double;
using Quad = __float128;
using CLD = std::complex<LD>;

inline LD texp(LD x) { return expl(x); }
inline Quad texp(Quad x) { return expq(x); }
inline LD tabs(LD x) { return fabsl(x); }
inline Quad tabs(Quad x) { return fabsq(x); }
inline LD tsqrt(LD x) { return sqrtl(x); }
inline Quad tsqrt(Quad x) { return sqrtq(x); }
inline LD mag(LD x) { return fabsl(x); }
inline Quad mag(Quad x) { return fabsq(x); }
inline LD mag(const CLD& z) { return std::abs(z); }

template <class T>
T machine_eps() {
  if constexpr (std::is_same_v<T, Quad>) return FLT128_EPSILON;
  else return std::numeric_limits<T>::epsilon();
}

bool use_fitted(const DiscretizedOperator& op) {
  return op.scheme == Scheme::Fitted && static_cast<int>(op.fitted.phi.size()) == op.size() + 2;
}

// Real entries recomputed in precision T from the fitted form.
template <class T>
void real_entries(const DiscretizedOperator& op, std::vector<T>& d, std::vector<T>& e) {
  int n = op.size();
  d.resize(n);
  e.resize(n > 0 ? n - 1 : 0);
  if (!use_fitted(op)) {
    for (int k = 0; k < n; ++k) d[k] = static_cast<T>(op.diag[k].real());
    for (int k = 0; k + 1 < n; ++k) e[k] = static_cast<T>(op.offdiag[k].real());
    return;
  }
  const auto& f = op.fitted;
  T c = static_cast<T>(f.c);
  T eps = static_cast<T>(op.eps);
  auto w = [&](int from, int to) -> T {
    if (std::isinf(f.phi[to].real())) return T(0);
    T diff = static_cast<T>(f.phi[from].real()) - static_cast<T>(f.phi[to].real());
    return texp(diff / eps);
  };
  for (int k = 0; k < n; ++k) {
    T s = static_cast<T>(f.a[k + 1].real()) * w(k + 1, k + 2) +
          static_cast<T>(f.a[k].real()) * w(k + 1, k);
    d[k] = c * s + static_cast<T>(f.corr[k].real());
  }
  for (int k = 0; k + 1 < n; ++k) e[k] = -c * static_cast<T>(f.a[k + 1].real());
}

void complex_entries(const DiscretizedOperator& op, std::vector<CLD>& d, std::vector<CLD>& e) {
  int n = op.size();
  d.resize(n);
  e.resize(n > 0 ? n - 1 : 0);
  if (!use_fitted(op)) {
    for (int k = 0; k < n; ++k) d[k] = CLD(op.diag[k].real(), op.diag[k].imag());
    for (int k = 0; k + 1 < n; ++k) e[k] = CLD(op.offdiag[k].real(), op.offdiag[k].imag());
    return;
  }
  const auto& f = op.fitted;
  LD c = f.c;
  LD eps = op.eps;
  auto cl = [](cplx z) { return CLD(z.real(), z.imag()); };
  auto w = [&](int from, int to) -> CLD {
    if (std::isinf(f.phi[to].real())) return CLD(0);
    return std::exp((cl(f.phi[from]) - cl(f.phi[to])) / eps);
  };
  for (int k = 0; k < n; ++k)
    d[k] = c * (cl(f.a[k + 1]) * w(k + 1, k + 2) + cl(f.a[k]) * w(k + 1, k)) + cl(f.corr[k]);
  for (int k = 0; k + 1 < n; ++k) e[k] = -c * cl(f.a[k + 1]);
}

template <class T>
int sturm(const std::vector<T>& d, const std::vector<T>& e, T sigma, T tiny) {
  int count = 0;
  T q = d[0] - sigma;
  for (size_t k = 0;; ++k) {
    if (q == T(0)) q = -tiny;
    if (q < T(0)) ++count;
    if (k + 1 >= d.size()) break;
    q = d[k + 1] - sigma - e[k] * e[k] / q;
  }
  return count;
}

template <class T>
T row_norm(const std::vector<T>& d, const std::vector<T>& e) {
  T m = 0;
  for (size_t k = 0; k < d.size(); ++k) {
    T s = tabs(d[k]);
    if (k > 0) s += tabs(e[k - 1]);
    if (k + 1 < d.size()) s += tabs(e[k]);
    m = std::max(m, s);
  }
  return m;
}

// Solve (tridiag - sigma) x = b with partial pivoting (gttrf/gttrs pattern).
template <class S>
struct TriLU {
  std::vector<S> dl, d, du, du2;
  std::vector<char> swapped;
  bool singular = false;

  void factor(const std::vector<S>& diag, const std::vector<S>& off, S sigma) {
    size_t n = diag.size();
    d.resize(n);
    dl.assign(n > 0 ? n - 1 : 0, S(0));
    du.assign(n > 0 ? n - 1 : 0, S(0));
    du2.assign(n > 1 ? n - 2 : 0, S(0));
    swapped.assign(n, 0);
    for (size_t k = 0; k < n; ++k) d[k] = diag[k] - sigma;
    for (size_t k = 0; k + 1 < n; ++k) { dl[k] = off[k]; du[k] = off[k]; }
    singular = false;
    for (size_t k = 0; k + 1 < n; ++k) {
      if (mag(d[k]) >= mag(dl[k])) {
        if (d[k] == S(0)) { singular = true; return; }
        S m = dl[k] / d[k];
        dl[k] = m;
        d[k + 1] -= m * du[k];
      } else {
        S m = d[k] / dl[k];
        d[k] = dl[k];
        dl[k] = m;
        S t = du[k];
        du[k] = d[k + 1];
        d[k + 1] = t - m * d[k + 1];
        if (k + 2 < n) {
          du2[k] = du[k + 1];
          du[k + 1] = -m * du[k + 1];
        }
        swapped[k] = 1;
      }
    }
    if (n > 0 && d[n - 1] == S(0)) singular = true;
  }

  void solve(std::vector<S>& b) const {
    size_t n = d.size();
    for (size_t k = 0; k + 1 < n; ++k) {
      if (swapped[k]) {
        S t = b[k];
        b[k] = b[k + 1];
        b[k + 1] = t - dl[k] * b[k];
      } else {
        b[k + 1] -= dl[k] * b[k];
      }
    }
    for (size_t i = n; i-- > 0;) {
      S s = b[i];
      if (i + 1 < n) s -= du[i] * b[i + 1];
      if (i + 2 < n) s -= du2[i] * b[i + 2];
      b[i] = s / d[i];
    }
  }
};

template <class T>
SpectrumResult lowest_impl(const DiscretizedOperator& op, int k, const EigOptions& opt) {
  std::vector<T> d, e;
  real_entries(op, d, e);
  int n = static_cast<int>(d.size());
  if (k < 1 || k > n) throw Error(Err::InvalidArgument, "k must lie in 1..N");
  T norm = row_norm(d, e);
  T floor_abs = T(4) * machine_eps<T>() * norm;
  T tiny = machine_eps<T>() * machine_eps<T>() * (norm > T(0) ? norm : T(1));
  T lo = d[0], hi = d[0];
  for (int i = 0; i < n; ++i) {
    T r = (i > 0 ? tabs(e[i - 1]) : T(0)) + (i + 1 < n ? tabs(e[i]) : T(0));
    lo = std::min(lo, d[i] - r);
    hi = std::max(hi, d[i] + r);
  }
  T tol = static_cast<T>(opt.tol);
  SpectrumResult res;
  res.scale = static_cast<double>(norm);
  std::vector<T> lam(k + 1);
  for (int j = 0; j <= k && j < n; ++j) {
    T a = lo, b = hi;
    if (j > 0) a = std::max(a, lam[j - 1] - floor_abs);
    // Invariant: count(a) <= j < count(b).
    for (int it = 0; it < 400; ++it) {
      T m = (a + b) / T(2);
      T width = b - a;
      T mag = std::max(tabs(a), tabs(b));
      if (width <= tol * mag || width <= floor_abs) break;
      if (sturm(d, e, m, tiny) > j) b = m;
      else a = m;
    }
    lam[j] = (a + b) / T(2);
  }
  if (k < n) {
    T gap = lam[k] - lam[k - 1];
    T scale = std::max(tabs(lam[k - 1]), floor_abs);
    if (gap < tol * scale) throw Error(Err::ClusterUnresolved, "requested eigenvalue not separated");
  }
  for (int j = 0; j < k; ++j) res.eigenvalues.push_back(static_cast<double>(lam[j]));
  if (!opt.vectors) return res;

  T h = static_cast<T>(op.grid.h);
  std::vector<std::vector<T>> vecs;
  for (int j = 0; j < k; ++j) {
    // Shift just beside lambda so the LU stays regular.
    T sigma = lam[j] + floor_abs * T(0.5);
    TriLU<T> lu;
    lu.factor(d, e, sigma);
    if (lu.singular) {
      sigma = lam[j] - floor_abs;
      lu.factor(d, e, sigma);
    }
    std::vector<T> x(n);
    for (int i = 0; i < n; ++i) x[i] = T(1) + T(i % 7) / T(13);
    for (int it = 0; it < 4; ++it) {
      lu.solve(x);
      for (const auto& v : vecs) {
        T dot = 0;
        for (int i = 0; i < n; ++i) dot += v[i] * x[i];
        for (int i = 0; i < n; ++i) x[i] -= dot * v[i];
      }
      T nrm = 0;
      for (int i = 0; i < n; ++i) nrm += x[i] * x[i];
      nrm = tsqrt(nrm);
      for (int i = 0; i < n; ++i) x[i] /= nrm;
    }
    // Fix the sign so the largest entry is positive.
    int imax = 0;
    for (int i = 0; i < n; ++i)
      if (tabs(x[i]) > tabs(x[imax])) imax = i;
    if (x[imax] < T(0))
      for (auto& v : x) v = -v;
    vecs.push_back(x);
    T r2 = 0;
    for (int i = 0; i < n; ++i) {
      T s = d[i] * x[i] - lam[j] * x[i];
      if (i > 0) s += e[i - 1] * x[i - 1];
      if (i + 1 < n) s += e[i] * x[i + 1];
      r2 += s * s;
    }
    std::vector<double> out(n);
    T scale_to_weighted = T(1) / tsqrt(h);
    for (int i = 0; i < n; ++i) out[i] = static_cast<double>(x[i] * scale_to_weighted);
    res.vectors.push_back(std::move(out));
    res.residuals.push_back(static_cast<double>(tsqrt(r2)));
  }
  return res;
}

LD cnorm(const std::vector<CLD>& v) {
  LD s = 0;
  for (const auto& z : v) s += std::norm(z);
  return sqrtl(s);
}

}  // namespace

int sturm_count(const DiscretizedOperator& op, double sigma, Precision p) {
  if (p == Precision::Quad) {
    std::vector<Quad> d, e;
    real_entries(op, d, e);
    return sturm(d, e, static_cast<Quad>(sigma), static_cast<Quad>(1e-300));
  }
  std::vector<LD> d, e;
  real_entries(op, d, e);
  return sturm(d, e, static_cast<LD>(sigma), static_cast<LD>(1e-300L));
}

SpectrumResult lowest_eigs(const DiscretizedOperator& op, int k, const EigOptions& opt) {
  if (op.kind != DiscretizedOperator::RealSym)
    throw Error(Err::InvalidArgument, "lowest_eigs needs a real symmetric operator");
  if (opt.precision == Precision::Quad) return lowest_impl<Quad>(op, k, opt);
  return lowest_impl<LD>(op, k, opt);
}

ShiftInvertResult shift_invert_complex(const DiscretizedOperator& op, cplx shift, double tol,
                                       int max_iter) {
  std::vector<CLD> d, e;
  complex_entries(op, d, e);
  int n = static_cast<int>(d.size());
  LD norm = 0;
  for (int i = 0; i < n; ++i) {
    LD s = std::abs(d[i]);
    if (i > 0) s += std::abs(e[i - 1]);
    if (i + 1 < n) s += std::abs(e[i]);
    norm = std::max(norm, s);
  }
  ShiftInvertResult out;
  CLD sigma(shift.real(), shift.imag());
  TriLU<CLD> lu;
  lu.factor(d, e, sigma);
  if (lu.singular) {
    sigma *= CLD(1, 1e-8L);
    out.perturbed = true;
    lu.factor(d, e, sigma);
    if (lu.singular) throw Error(Err::SingularShift, "shift is singular even after perturbation");
  }
  auto matvec = [&](const std::vector<CLD>& u) {
    std::vector<CLD> r(n);
    for (int i = 0; i < n; ++i) {
      CLD s = d[i] * u[i];
      if (i > 0) s += e[i - 1] * u[i - 1];
      if (i + 1 < n) s += e[i] * u[i + 1];
      r[i] = s;
    }
    return r;
  };
  std::vector<CLD> u(n);
  for (int i = 0; i < n; ++i) u[i] = CLD(1 + (i % 5) * 0.1L, 0.01L * (i % 3));
  CLD mu = sigma, mu_prev = sigma;
  bool rayleigh = false;
  int settled = 0;
  for (int it = 1; it <= max_iter; ++it) {
    lu.solve(u);
    LD nr = cnorm(u);
    if (!(nr > 0) || !std::isfinite(static_cast<double>(nr)))
      throw Error(Err::NoConvergence, "iterate blew up");
    for (auto& z : u) z /= nr;
    auto Hu = matvec(u);
    CLD num = 0, den = 0;
    for (int i = 0; i < n; ++i) {
      num += u[i] * Hu[i];
      den += u[i] * u[i];
    }
    mu_prev = mu;
    mu = num / den;
    LD res = 0;
    for (int i = 0; i < n; ++i) res += std::norm(Hu[i] - mu * u[i]);
    res = sqrtl(res);
    out.iterations = it;
    out.residual = static_cast<double>(res);
    bool small = res <= static_cast<LD>(tol) * (std::abs(mu) + norm);
    if (!rayleigh && it > 1 && res <= 1e-3L * std::abs(mu)) rayleigh = true;
    LD dmu = std::abs(mu - mu_prev);
    if (small && (dmu <= 1e-13L * std::abs(mu) || (it >= 60 && dmu <= 16 * LDBL_EPSILON * norm))) {
      if (++settled >= 2) break;
    } else {
      settled = 0;
    }
    if (rayleigh) {
      CLD next = mu;
      lu.factor(d, e, next);
      if (lu.singular) {
        next *= CLD(1, 1e-14L);
        lu.factor(d, e, next);
        if (lu.singular) break;
      }
    }
    if (it == max_iter) throw Error(Err::NoConvergence, "shift-invert did not converge");
  }
  CLD den = 0;
  for (const auto& z : u) den += z * z;
  CLD s = std::sqrt(den);
  out.mu = cplx(static_cast<double>(mu.real()), static_cast<double>(mu.imag()));
  // A real symmetric operator has a real spectrum; drop the roundoff (or retry-perturbation) residue.
  if (op.kind == DiscretizedOperator::RealSym) out.mu = out.mu.real();
  out.u.resize(n);
  for (int i = 0; i < n; ++i) {
    CLD z = u[i] / s;
    out.u[i] = cplx(static_cast<double>(z.real()), static_cast<double>(z.imag()));
  }
  return out;
}

namespace {

DiscretizedOperator full_operator(const PotentialSpec& spec, double eps, const ScalingContour& c,
                                  double h, double rmax_factor, Scheme scheme) {
  long K = std::lround(rmax_factor * c.r0 / h);
  Grid1D g = spec.dimension == 3 ? Grid1D::radial(h, K) : Grid1D::symmetric(h, K);
  AssemblyOptions opt;
  opt.scheme = scheme;
  opt.check_coarse = false;
  return assemble_full_scaled(spec, eps, c, g, opt);
}

}  // namespace

std::vector<ResonanceResult> find_resonances(const PotentialSpec& spec, double eps,
                                             const ScalingContour& contour,
                                             const std::vector<double>& seeds,
                                             const ResonanceParams& p) {
  if (!(p.h > 0)) throw Error(Err::InvalidArgument, "resonance search needs h");
  DiscretizedOperator op = full_operator(spec, eps, contour, p.h, p.rmax_factor, p.scheme);
  std::vector<ResonanceResult> out;
  for (size_t i = 0; i < seeds.size(); ++i) {
    ResonanceResult r;
    r.index = static_cast<int>(i);
    r.seed = seeds[i];
    try {
      auto si = shift_invert_complex(op, seeds[i], p.tol, p.max_iter);
      r.mu = si.mu;
      r.iterations = si.iterations;
      if (std::abs(r.mu - seeds[i]) > std::fabs(seeds[i]) / 2) {
        r.note = "ResonanceNotFound: converged outside the disk of radius seed/2";
        out.push_back(r);
        continue;
      }
      r.found = true;
    } catch (const Error& ex) {
      r.note = std::string("ResonanceNotFound: ") + ex.what();
      out.push_back(r);
      continue;
    }
    out.push_back(r);
  }
  if (!p.drifts) return out;

  std::vector<cplx> samples_b;
  for (double db : {-p.beta_step, p.beta_step}) {
    ScalingContour c2 = contour;
    c2.beta = contour.beta + db;
    if (std::fabs(c2.beta) > spec.beta0 || c2.beta <= 0) continue;
    DiscretizedOperator op2 = full_operator(spec, eps, c2, p.h, p.rmax_factor, p.scheme);
    for (auto& r : out) {
      if (!r.found) continue;
      try {
        auto si = shift_invert_complex(op2, r.mu, p.tol, p.max_iter);
        r.theta_drift = std::max(r.theta_drift, std::abs(si.mu - r.mu));
        r.note += (r.note.empty() ? "" : "; ");
        char buf[96];
        std::snprintf(buf, sizeof buf, "mu(beta=%.3f)=%.9e%+.3ei", c2.beta, si.mu.real(), si.mu.imag());
        r.note += buf;
        samples_b.push_back(si.mu);
      } catch (const Error& ex) {
        r.note += std::string("; theta probe failed: ") + ex.what();
      }
    }
  }
  // Pairwise spread across the beta probes as well (e.g. beta - step vs beta + step).
  size_t nfound = 0;
  for (const auto& r : out) nfound += r.found;
  if (nfound > 0 && samples_b.size() == 2 * nfound) {
    size_t j = 0;
    for (auto& r : out) {
      if (!r.found) continue;
      r.theta_drift = std::max(r.theta_drift, std::abs(samples_b[j] - samples_b[j + nfound]));
      ++j;
    }
  }
  DiscretizedOperator fine = full_operator(spec, eps, contour, p.h / 2, p.rmax_factor, p.scheme);
  for (auto& r : out) {
    if (!r.found) continue;
    try {
      auto si = shift_invert_complex(fine, r.mu, p.tol, p.max_iter);
      r.grid_drift = std::abs(si.mu - r.mu);
    } catch (const Error& ex) {
      r.note += std::string("; grid probe failed: ") + ex.what();
    }
  }
  return out;
}

double quasimode_residual(const DiscretizedOperator& op_full, const std::vector<cplx>& psi,
                          double lambda) {
  std::vector<CLD> d, e;
  complex_entries(op_full, d, e);
  int n = static_cast<int>(d.size());
  if (static_cast<int>(psi.size()) != n) throw Error(Err::InvalidArgument, "psi size mismatch");
  LD h = op_full.grid.h;
  LD nrm = 0;
  for (const auto& z : psi) nrm += std::norm(CLD(z.real(), z.imag()));
  nrm = sqrtl(nrm * h);
  if (!(nrm > 0)) throw Error(Err::InvalidArgument, "zero quasimode");
  LD r2 = 0;
  for (int i = 0; i < n; ++i) {
    CLD s = (d[i] - CLD(lambda)) * CLD(psi[i].real(), psi[i].imag());
    if (i > 0) s += e[i - 1] * CLD(psi[i - 1].real(), psi[i - 1].imag());
    if (i + 1 < n) s += e[i] * CLD(psi[i + 1].real(), psi[i + 1].imag());
    r2 += std::norm(s);
  }
  return static_cast<double>(sqrtl(r2 * h) / nrm);
}

double cutoff(double x, double r_in, double r_out) {
  double r = std::fabs(x);
  if (r <= r_in) return 1;
  if (r >= r_out) return 0;
  double t = (r - r_in) / (r_out - r_in);
  return 1 - t * t * t * (10 - 15 * t + 6 * t * t);
}

std::vector<cplx> extend_quasimode(const DiscretizedOperator& op_full, const Grid1D& interior,
                                   const std::vector<double>& phi, double r_in, double r_out) {
  const Grid1D& g = op_full.grid;
  if (g.base != interior.base || g.h != interior.h)
    throw Error(Err::InvalidArgument, "interior grid is not aligned with the full grid");
  long off = interior.first - g.first;
  if (off < 0 || off + interior.N > g.N)
    throw Error(Err::InvalidArgument, "interior grid does not fit in the full grid");
  std::vector<cplx> psi(g.N, 0.0);
  for (int k = 0; k < interior.N; ++k) psi[off + k] = cutoff(interior.node(k), r_in, r_out) * phi[k];
  return psi;
}

double decay_check(const std::vector<double>& u, const AgmonField& field, double eps) {
  if (u.size() != field.dist.size()) throw Error(Err::InvalidArgument, "field/vector size mismatch");
  double best = -INFINITY;
  for (size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0) continue;
    best = std::max(best, eps * std::log(std::fabs(u[i])) + field.dist[i]);
  }
  return best;
}

}  // namespace reslab
