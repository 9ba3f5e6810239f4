#pragma once

#include <complex>
#include <string>
#include <vector>

#include "potential.hpp"

namespace reslab {

// Nodes are base + (first + k) * h for k = 0..N-1; Dirichlet nodes sit at k = -1 and k = N.
// Pipeline grids use base = 0 so that nodes are integer multiples of h, which makes an
// interior grid an exact sub-grid of the larger scaled one.
struct Grid1D {
  double base = 0;
  long first = 1;
  int N = 0;
  double h = 0;
  double node(long k) const { return base + static_cast<double>(first + k) * h; }
  double x_min() const { return node(-1); }
  double x_max() const { return node(N); }

  static Grid1D box(double x_min, double x_max, int N);
  // Symmetric grid (-M h, M h): N = 2M - 1 interior nodes.
  static Grid1D symmetric(double h, long M);
  // Radial grid (0, M h): N = M - 1 interior nodes.
  static Grid1D radial(double h, long M);
};

enum class ContourMode { Sharp, Smooth };

struct ScalingContour {
  double r0 = 0;
  double beta = 0;
  ContourMode mode = ContourMode::Sharp;
  double width = 0;  // smooth mode only
};

struct ContourPoint {
  cplx z, dz;
};

ContourPoint contour_map(const ScalingContour& c, double r);

enum class Scheme { Fitted, FD };

// Exponentially fitted form: H_kk = c (a_{k+1/2} e^{(phi_k - phi_{k+1})/eps}
//   + a_{k-1/2} e^{(phi_k - phi_{k-1})/eps}) + corr_k, H_{k,k+1} = -c a_{k+1/2}.
// phi has N + 2 entries (boundary nodes included); +inf marks a zero weight.
struct FittedForm {
  double c = 0;
  std::vector<cplx> phi;
  std::vector<cplx> a;
  std::vector<cplx> corr;
};

struct DiscretizedOperator {
  enum Kind { RealSym, ComplexSym } kind = RealSym;
  Scheme scheme = Scheme::Fitted;
  std::vector<cplx> diag, offdiag;
  Grid1D grid;
  double eps = 0;
  bool has_contour = false;
  ScalingContour contour;
  std::vector<cplx> z;  // contour image of each node
  std::vector<long> block_breaks;  // offdiag indices forced to zero (decoupled blocks)
  FittedForm fitted;
  int size() const { return static_cast<int>(diag.size()); }
};

struct AssemblyOptions {
  Scheme scheme = Scheme::Fitted;
  bool check_coarse = true;
  bool truncation_guard = false;
};

// FD operator from sampled V_eps on a grid: diag 2 eps^2/h^2 + V, offdiag -eps^2/h^2.
DiscretizedOperator assemble_fd(const std::vector<double>& V_nodes, double eps, const Grid1D& g);

DiscretizedOperator assemble_box(const PotentialSpec& spec, double eps, const Grid1D& g,
                                 const AssemblyOptions& opt = {});
DiscretizedOperator assemble_interior(const PotentialSpec& spec, double eps, double r0, int N,
                                      const AssemblyOptions& opt = {});
DiscretizedOperator assemble_full_scaled(const PotentialSpec& spec, double eps,
                                         const ScalingContour& contour, const Grid1D& g,
                                         const AssemblyOptions& opt = {});
DiscretizedOperator assemble_full_scaled(const PotentialSpec& spec, double eps,
                                         const ScalingContour& contour, int N, double R_max,
                                         const AssemblyOptions& opt = {});
// Exterior of the ball with Dirichlet at r0 (1D: both half-lines as decoupled blocks).
DiscretizedOperator assemble_exterior_dirichlet_scaled(const PotentialSpec& spec, double eps,
                                                       const ScalingContour& contour, double h,
                                                       double R_max,
                                                       const AssemblyOptions& opt = {});

// Matrix-vector product with the stored double entries.
std::vector<cplx> apply(const DiscretizedOperator& op, const std::vector<cplx>& u);

std::string export_matrix_market(const DiscretizedOperator& op);
void write_matrix_market(const DiscretizedOperator& op, const std::string& path);

}  // namespace reslab
