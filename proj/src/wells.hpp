#pragma once

#include <functional>
#include <string>
#include <vector>

#include "potential.hpp"

namespace reslab {

struct Minimum {
  double x, F;
};

struct CriticalPoint {
  double x, F;
  bool is_min;
};

// Critical points of F on [lo, hi] by sign changes of F' plus bisection.
std::vector<CriticalPoint> critical_points(const std::function<double(double)>& F,
                                           const std::function<double(double)>& dF, double lo,
                                           double hi, int n_grid);
std::vector<CriticalPoint> critical_points(const PotentialSpec& spec, double lo, double hi,
                                           int n_grid);

std::vector<Minimum> find_minima(const PotentialSpec& spec, double lo, double hi, int n_grid);

// 1D exact cost: min over a in A of (max F on the segment) - F(x).
double barrier_cost(const std::function<double(double)>& F, double x, const std::vector<double>& A,
                    double lo, double hi, int n_grid);
double barrier_cost(const PotentialSpec& spec, double x, const std::vector<double>& A, double lo,
                    double hi, int n_grid = 4000);

// Grids are row-major, index = iy * nx + ix, 8-connected. ny = 1 gives a 1D chain.
struct GridField {
  int nx = 0, ny = 1;
  std::vector<double> v;
  double at(int ix, int iy) const { return v[static_cast<size_t>(iy) * nx + ix]; }
};

// Minimax level over 8-connected paths (node-max semantics), by Dijkstra.
double minimax_level(const GridField& f, int start, const std::vector<int>& targets);
double barrier_cost_grid(const GridField& f, int start, const std::vector<int>& targets);
// Exhaustive enumeration of simple paths; the oracle for the above.
double barrier_cost_bruteforce(const GridField& f, int start, const std::vector<int>& targets);

struct Grid2D {
  double x0, y0, hx, hy;
  int nx, ny;
  double x(int i) const { return x0 + i * hx; }
  double y(int j) const { return y0 + j * hy; }
};

// 2D cost for a smooth F: grid minimax, then Newton from the bottleneck node to the saddle.
double barrier_cost_2d(const std::function<double(double, double)>& F, const Grid2D& g,
                       double sx, double sy, const std::vector<std::pair<double, double>>& A);

struct WellStructure {
  std::vector<Minimum> minima;  // minima[0] is the global minimum
  std::vector<double> depths;   // depths[i-1] = d_i for i = 1..N
  double lo = 0, hi = 0;
  int n_grid = 0;
};

WellStructure well_structure(const PotentialSpec& spec, double lo, double hi, int n_grid = 4000);
std::string well_structure_json(const WellStructure& w);

// sqrt(V) integrated along the line, split at critical points of F.
double agmon_distance(const PotentialSpec& spec, double x, const std::vector<double>& sources,
                      double tol = 1e-8);

struct AgmonField {
  std::vector<double> x, y;  // y empty in 1D; 2D nodes are x[i], y[i]
  std::vector<double> dist;
  int nx = 0, ny = 1;
  std::vector<double> sources_x, sources_y;
};

AgmonField agmon_field(const PotentialSpec& spec, const std::vector<double>& nodes,
                       const std::vector<double>& sources);
AgmonField agmon_field_2d(const std::function<double(double, double)>& V, const Grid2D& g,
                          const std::vector<std::pair<double, double>>& sources);

struct EikonalReport {
  double max_excess = 0;      // max of |grad d| - sqrt(V), over grid edges
  double max_ratio_to_V = 0;  // alternative reading: max |grad d| / V
  double max_triangle_violation = 0;
};
EikonalReport eikonal_check(const AgmonField& f, const std::function<double(double, double)>& V);

}  // namespace reslab
