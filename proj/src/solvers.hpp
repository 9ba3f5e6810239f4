#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "operators.hpp"
#include "wells.hpp"

namespace reslab {

enum class Precision { Long, Quad };

struct SpectrumResult {
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> vectors;  // sum_k h u_k^2 = 1
  std::vector<double> residuals;             // weighted-norm ||Hu - lambda u||
  double scale = 0;                          // row-sum norm of H
};

struct EigOptions {
  double tol = 1e-12;
  Precision precision = Precision::Long;
  bool vectors = true;
};

// Number of eigenvalues strictly below sigma (LDL^T negative inertia).
int sturm_count(const DiscretizedOperator& op, double sigma, Precision p = Precision::Long);
SpectrumResult lowest_eigs(const DiscretizedOperator& op, int k, const EigOptions& opt = {});

struct ShiftInvertResult {
  cplx mu;
  std::vector<cplx> u;  // unconjugated normalization: sum u_k^2 = 1
  int iterations = 0;
  double residual = 0;
  bool perturbed = false;  // SingularShift retry path taken
};

ShiftInvertResult shift_invert_complex(const DiscretizedOperator& op, cplx shift,
                                       double tol = 1e-10, int max_iter = 500);

struct ResonanceParams {
  double h = 0;            // node spacing of the interior grid
  double rmax_factor = 4;  // R_max = factor * r0
  double beta_step = 0.05;
  double tol = 1e-10;
  int max_iter = 500;
  bool drifts = true;
  Scheme scheme = Scheme::Fitted;
};

struct ResonanceResult {
  int index = 0;
  double seed = 0;
  cplx mu{0, 0};
  double theta_drift = 0;
  double grid_drift = 0;
  int iterations = 0;
  bool found = false;
  std::string note;
};

// r0 is snapped to a multiple of params.h by the caller.
std::vector<ResonanceResult> find_resonances(const PotentialSpec& spec, double eps,
                                             const ScalingContour& contour,
                                             const std::vector<double>& seeds,
                                             const ResonanceParams& params);

double quasimode_residual(const DiscretizedOperator& op_full, const std::vector<cplx>& psi,
                          double lambda);

// C2 quintic cutoff: 1 for |x| <= r_in, 0 for |x| >= r_out.
double cutoff(double x, double r_in, double r_out);

// chi * phi on the full grid; phi lives on an aligned interior grid.
std::vector<cplx> extend_quasimode(const DiscretizedOperator& op_full, const Grid1D& interior,
                                   const std::vector<double>& phi, double r_in, double r_out);

double decay_check(const std::vector<double>& u, const AgmonField& field, double eps);

}  // namespace reslab
