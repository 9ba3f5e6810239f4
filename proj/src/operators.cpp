#include "operators.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace reslab {

Grid1D Grid1D::box(double x_min, double x_max, int N) {
  if (N < 1) throw Error(Err::InvalidArgument, "grid needs N >= 1");
  if (!(x_max > x_min)) throw Error(Err::InvalidArgument, "empty grid interval");
  Grid1D g;
  g.N = N;
  g.h = (x_max - x_min) / (N + 1);
  g.base = x_min;
  g.first = 1;
  return g;
}

Grid1D Grid1D::symmetric(double h, long M) {
  Grid1D g;
  g.h = h;
  g.base = 0;
  g.first = -M + 1;
  g.N = static_cast<int>(2 * M - 1);
  if (g.N < 1) throw Error(Err::InvalidArgument, "grid needs N >= 1");
  return g;
}

Grid1D Grid1D::radial(double h, long M) {
  Grid1D g;
  g.h = h;
  g.base = 0;
  g.first = 1;
  g.N = static_cast<int>(M - 1);
  if (g.N < 1) throw Error(Err::InvalidArgument, "grid needs N >= 1");
  return g;
}

ContourPoint contour_map(const ScalingContour& c, double r) {
  const cplx rot = std::polar(1.0, c.beta);
  if (c.beta == 0) return {r, 1.0};
  if (c.mode == ContourMode::Sharp) {
    if (r <= c.r0) return {r, 1.0};
    return {c.r0 + (r - c.r0) * rot, rot};
  }
  double s = r - c.r0;
  if (s <= 0) return {r, 1.0};
  double w = c.width;
  double t = std::tanh(s / w);
  double g = s - w * t;
  double dg = t * t;  // 1 - sech^2
  return {r + (rot - 1.0) * g, 1.0 + (rot - 1.0) * dg};
}

namespace {

struct NodeData {
  cplx z;      // physical (possibly complex) coordinate
  cplx phi;    // sqrt(alpha) F, minus eps log z in 3D
  cplx corr;   // (sqrt(alpha) - kappa) eps lapl F
  cplx V_eps;
};

NodeData node_data(const PotentialSpec& spec, double eps, const ScalingContour* contour, double x) {
  NodeData nd;
  const double sa = spec.sqrt_alpha();
  const double cc = (sa - spec.lapl_weight) * eps;
  int sg = x >= 0 ? 1 : -1;
  double r = std::fabs(x);
  ContourPoint cp{r, 1.0};
  if (contour) cp = contour_map(*contour, r);
  bool rotated = cp.z != cplx(r);
  if (spec.dimension == 3 && r == 0) {
    nd.z = 0;
    nd.phi = cplx(INFINITY, 0);
    nd.corr = 0;
    nd.V_eps = 0;
    return nd;
  }
  if (!rotated) {
    nd.z = x;
    nd.phi = sa * spec.F(x);
    nd.corr = cc * spec.laplF(x);
    nd.V_eps = spec.V_eps(x, eps);
  } else {
    nd.z = double(sg) * cp.z;
    nd.phi = sa * spec.Fz(cp.z, sg, 0);
    cplx lap = spec.Fz(cp.z, sg, 2);
    if (spec.dimension == 3) lap += 2.0 * spec.Fz(cp.z, sg, 1) / cp.z;
    nd.corr = cc * lap;
    nd.V_eps = spec.V_eps(cp.z, sg, eps);
  }
  if (spec.dimension == 3) nd.phi -= eps * std::log(nd.z);
  return nd;
}

double V_second(const PotentialSpec& spec, double x) {
  double f1 = spec.F(x, 1), f2 = spec.F(x, 2), f3 = spec.F(x, 3);
  return 2 * spec.grad_weight * (f2 * f2 + f1 * f3);
}

cplx weight(cplx from, cplx to, double eps) {
  if (std::isinf(to.real())) return 0;
  return std::exp((from - to) / eps);
}

DiscretizedOperator build(const PotentialSpec& spec, double eps, const ScalingContour* contour,
                          const Grid1D& g, const AssemblyOptions& opt) {
  if (!(eps > 0)) throw Error(Err::InvalidArgument, "eps must be positive");
  DiscretizedOperator op;
  op.scheme = opt.scheme;
  op.grid = g;
  op.eps = eps;
  op.has_contour = contour != nullptr;
  if (contour) op.contour = *contour;
  const int N = g.N;
  const double h = g.h;
  const double c = eps * eps / (h * h);

  if (opt.check_coarse) {
    double vmax = 0;
    for (int k = 0; k < N; ++k) {
      double x = g.node(k);
      if (contour && std::fabs(x) > contour->r0) continue;
      vmax = std::max(vmax, std::fabs(V_second(spec, x)));
    }
    if (h * h * vmax > 0.1 * eps)
      throw Error(Err::GridTooCoarse, "h^2 max|V''| exceeds 0.1 eps");
  }

  std::vector<NodeData> nd(N + 2);
  for (long k = -1; k <= N; ++k) nd[k + 1] = node_data(spec, eps, contour, g.node(k));
  std::vector<cplx> a(N + 1);
  bool complex_kind = false;
  for (long k = 0; k <= N; ++k) {
    double m = 0.5 * (g.node(k - 1) + g.node(k));
    cplx dz = 1.0;
    if (contour) dz = contour_map(*contour, std::fabs(m)).dz;
    a[k] = 1.0 / (dz * dz);
    if (a[k].imag() != 0) complex_kind = true;
  }
  for (const auto& d : nd)
    if (d.phi.imag() != 0 && std::isfinite(d.phi.real())) complex_kind = true;
  op.kind = complex_kind ? DiscretizedOperator::ComplexSym : DiscretizedOperator::RealSym;

  op.diag.resize(N);
  op.offdiag.resize(N > 0 ? N - 1 : 0);
  op.z.resize(N);
  op.fitted.c = c;
  op.fitted.phi.resize(N + 2);
  op.fitted.a = a;
  op.fitted.corr.resize(N);
  for (int k = 0; k < N; ++k) {
    op.z[k] = nd[k + 1].z;
    if (opt.scheme == Scheme::FD) {
      op.diag[k] = c * (a[k] + a[k + 1]) + nd[k + 1].V_eps;
    } else {
      op.diag[k] = c * (a[k + 1] * weight(nd[k + 1].phi, nd[k + 2].phi, eps) +
                        a[k] * weight(nd[k + 1].phi, nd[k].phi, eps)) +
                   nd[k + 1].corr;
    }
    op.fitted.corr[k] = nd[k + 1].corr;
  }
  for (int k = 0; k + 1 < N; ++k) op.offdiag[k] = -c * a[k + 1];
  for (int k = 0; k < N + 2; ++k) op.fitted.phi[k] = nd[k].phi;

  if (opt.truncation_guard && contour) {
    double R = std::fabs(g.x_max());
    cplx vz = node_data(spec, eps, contour, R).V_eps;
    if (std::abs(vz) > 1e-3 * eps)
      throw Error(Err::TruncationTooTight, "|V(R_max)| > 1e-3 eps");
  }
  return op;
}

}  // namespace

DiscretizedOperator assemble_fd(const std::vector<double>& V_nodes, double eps, const Grid1D& g) {
  if (static_cast<int>(V_nodes.size()) != g.N) throw Error(Err::InvalidArgument, "V size != N");
  DiscretizedOperator op;
  op.scheme = Scheme::FD;
  op.grid = g;
  op.eps = eps;
  double c = eps * eps / (g.h * g.h);
  op.diag.resize(g.N);
  op.offdiag.assign(g.N - 1, -c);
  op.z.resize(g.N);
  for (int k = 0; k < g.N; ++k) {
    op.diag[k] = 2 * c + V_nodes[k];
    op.z[k] = g.node(k);
  }
  return op;
}

DiscretizedOperator assemble_box(const PotentialSpec& spec, double eps, const Grid1D& g,
                                 const AssemblyOptions& opt) {
  return build(spec, eps, nullptr, g, opt);
}

DiscretizedOperator assemble_interior(const PotentialSpec& spec, double eps, double r0, int N,
                                      const AssemblyOptions& opt) {
  if (spec.has_tail && r0 <= spec.glue_radius + 1)
    throw Error(Err::InvalidArgument, "r0 must exceed glue_radius + 1");
  Grid1D g = spec.dimension == 3 ? Grid1D::box(0, r0, N) : Grid1D::box(-r0, r0, N);
  if (spec.dimension == 3) {
    g.first = 1;
    g.base = 0;
  } else if (N % 2 == 1) {
    g.base = 0;
    g.first = -(N - 1) / 2;
  }
  return build(spec, eps, nullptr, g, opt);
}

DiscretizedOperator assemble_full_scaled(const PotentialSpec& spec, double eps,
                                         const ScalingContour& contour, const Grid1D& g,
                                         const AssemblyOptions& opt) {
  if (std::fabs(contour.beta) > spec.beta0) throw Error(Err::ConeViolation, "beta exceeds beta0");
  if (contour.beta != 0 && contour.r0 < spec.tail_start())
    throw Error(Err::InsideCore, "scaling radius inside the glued core");
  if (contour.mode == ContourMode::Smooth && !(contour.width > 0))
    throw Error(Err::InvalidArgument, "smooth contour needs a positive width");
  return build(spec, eps, &contour, g, opt);
}

DiscretizedOperator assemble_full_scaled(const PotentialSpec& spec, double eps,
                                         const ScalingContour& contour, int N, double R_max,
                                         const AssemblyOptions& opt) {
  if (R_max < 3 * contour.r0 * (1 - 1e-12))
    throw Error(Err::InvalidArgument, "R_max must be at least 3 r0");
  Grid1D g = spec.dimension == 3 ? Grid1D::box(0, R_max, N) : Grid1D::box(-R_max, R_max, N);
  return assemble_full_scaled(spec, eps, contour, g, opt);
}

DiscretizedOperator assemble_exterior_dirichlet_scaled(const PotentialSpec& spec, double eps,
                                                       const ScalingContour& contour, double h,
                                                       double R_max,
                                                       const AssemblyOptions& opt) {
  if (std::fabs(contour.beta) > spec.beta0) throw Error(Err::ConeViolation, "beta exceeds beta0");
  long M = std::lround(contour.r0 / h);
  long K = std::lround(R_max / h);
  if (std::fabs(M * h - contour.r0) > 1e-9 * contour.r0)
    throw Error(Err::InvalidArgument, "r0 must be a multiple of h");
  Grid1D right;
  right.h = h;
  right.base = 0;
  right.first = M + 1;
  right.N = static_cast<int>(K - M - 1);
  if (right.N < 16) throw Error(Err::InvalidArgument, "exterior grid needs N >= 16");
  AssemblyOptions o = opt;
  o.check_coarse = false;
  DiscretizedOperator rop = build(spec, eps, &contour, right, o);
  if (spec.dimension == 3) return rop;
  Grid1D left = right;
  left.first = -K + 1;
  DiscretizedOperator lop = build(spec, eps, &contour, left, o);
  // Concatenate: left block, zero coupling, right block.
  DiscretizedOperator op = lop;
  op.kind = (lop.kind == DiscretizedOperator::ComplexSym || rop.kind == DiscretizedOperator::ComplexSym)
                ? DiscretizedOperator::ComplexSym
                : DiscretizedOperator::RealSym;
  op.grid.N = lop.size() + rop.size();
  op.diag.insert(op.diag.end(), rop.diag.begin(), rop.diag.end());
  op.offdiag.push_back(0);
  op.block_breaks.push_back(static_cast<long>(lop.offdiag.size()));
  op.offdiag.insert(op.offdiag.end(), rop.offdiag.begin(), rop.offdiag.end());
  op.z.insert(op.z.end(), rop.z.begin(), rop.z.end());
  // The fitted form of a block operator is not a single chain; solvers use the stored entries.
  op.fitted = FittedForm{};
  return op;
}

std::vector<cplx> apply(const DiscretizedOperator& op, const std::vector<cplx>& u) {
  int n = op.size();
  std::vector<cplx> out(n);
  for (int k = 0; k < n; ++k) {
    cplx s = op.diag[k] * u[k];
    if (k > 0) s += op.offdiag[k - 1] * u[k - 1];
    if (k + 1 < n) s += op.offdiag[k] * u[k + 1];
    out[k] = s;
  }
  return out;
}

std::string export_matrix_market(const DiscretizedOperator& op) {
  std::ostringstream os;
  os << "%%MatrixMarket matrix coordinate complex symmetric\n";
  os << "% tridiagonal eps=" << op.eps << " h=" << op.grid.h;
  if (op.has_contour)
    os << " r0=" << op.contour.r0 << " beta=" << op.contour.beta
       << " mode=" << (op.contour.mode == ContourMode::Sharp ? "sharp" : "smooth");
  os << "\n";
  int n = op.size();
  os << n << " " << n << " " << (2 * n - 1) << "\n";
  char buf[128];
  for (int k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", k + 1, k + 1, op.diag[k].real(),
                  op.diag[k].imag());
    os << buf;
    if (k + 1 < n) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", k + 2, k + 1, op.offdiag[k].real(),
                    op.offdiag[k].imag());
      os << buf;
    }
  }
  return os.str();
}

void write_matrix_market(const DiscretizedOperator& op, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(Err::Io, "cannot open " + path);
  f << export_matrix_market(op);
  if (!f) throw Error(Err::Io, "write failed: " + path);
}

}  // namespace reslab
