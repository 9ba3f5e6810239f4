#include "wells.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <json.hpp>

#include "errors.hpp"

namespace reslab {

namespace {

constexpr double kGolden = 0.6180339887498949;

// Golden-section maximum of f on [a, b].
double golden_max(const std::function<double(double)>& f, double a, double b, double tol,
                  double* where = nullptr) {
  double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  double m = 0.5 * (a + b);
  if (where) *where = m;
  return f(m);
}

double max_on_segment(const std::function<double(double)>& F, double a, double b, int n_grid) {
  if (a > b) std::swap(a, b);
  double best = std::max(F(a), F(b));
  if (b - a <= 0) return best;
  int n = std::max(16, n_grid);
  double h = (b - a) / n;
  int ibest = -1;
  double vbest = -INFINITY;
  for (int i = 0; i <= n; ++i) {
    double v = F(a + i * h);
    if (v > vbest) { vbest = v; ibest = i; }
  }
  best = std::max(best, vbest);
  if (ibest > 0 && ibest < n) {
    double lo = a + (ibest - 1) * h, hi = a + (ibest + 1) * h;
    best = std::max(best, golden_max(F, lo, hi, 1e-10 * std::max(1.0, std::fabs(hi))));
  }
  return best;
}

std::vector<int> neighbors8(const GridField& f, int idx) {
  std::vector<int> out;
  int ix = idx % f.nx, iy = idx / f.nx;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (!dx && !dy) continue;
      int jx = ix + dx, jy = iy + dy;
      if (jx < 0 || jy < 0 || jx >= f.nx || jy >= f.ny) continue;
      out.push_back(jy * f.nx + jx);
    }
  return out;
}

void check_index(const GridField& f, int i) {
  if (i < 0 || i >= f.nx * f.ny) throw Error(Err::OutOfDomain, "grid index out of range");
}

// Adaptive Simpson on a smooth piece.
double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6 * (fa + 4 * flm + fm);
  double right = (b - m) / 6 * (fm + 4 * frm + fb);
  double diff = left + right - whole;
  if (std::fabs(diff) <= 15 * tol) return left + right + diff / 15;
  if (depth <= 0) throw Error(Err::QuadratureFailure, "adaptive Simpson depth exhausted");
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50);
}

// Signed integral of sqrt(V) from a to b, split where F' changes sign.
double sqrtV_integral(const PotentialSpec& spec, double a, double b, double tol) {
  if (a == b) return 0;
  double sgn = 1;
  if (a > b) { std::swap(a, b); sgn = -1; }
  std::vector<double> cuts{a};
  auto crit = critical_points(spec, a, b, std::max(64, static_cast<int>((b - a) * 200)));
  for (const auto& c : crit)
    if (c.x > a && c.x < b) cuts.push_back(c.x);
  // The glue points are where higher derivatives jump.
  if (spec.has_tail)
    for (double e : {spec.glue_radius, spec.glue_radius + 1, -spec.glue_radius, -spec.glue_radius - 1})
      if (e > a && e < b) cuts.push_back(e);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  auto f = [&](double u) { return std::sqrt(spec.V(u)); };
  double s = 0;
  double per = tol / static_cast<double>(cuts.size());
  for (size_t i = 0; i + 1 < cuts.size(); ++i) s += simpson(f, cuts[i], cuts[i + 1], per);
  return sgn * s;
}

}  // namespace

std::vector<CriticalPoint> critical_points(const std::function<double(double)>& F,
                                           const std::function<double(double)>& dF, double lo,
                                           double hi, int n_grid) {
  std::vector<CriticalPoint> out;
  double h = (hi - lo) / n_grid;
  double prev = dF(lo);
  for (int i = 1; i <= n_grid; ++i) {
    double x = lo + i * h;
    double g = dF(x);
    bool up = prev < 0 && g >= 0, down = prev > 0 && g <= 0;
    if (up || down) {
      double a = x - h, b = x;
      double ga = prev;
      for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        double gm = dF(m);
        if (std::fabs(gm) <= 1e-12) { a = b = m; break; }
        if ((gm < 0) == (ga < 0)) { a = m; ga = gm; } else b = m;
      }
      double xc = 0.5 * (a + b);
      if (out.empty() || std::fabs(out.back().x - xc) > 1e-12)
        out.push_back({xc, F(xc), up});
    }
    prev = g;
  }
  return out;
}

std::vector<CriticalPoint> critical_points(const PotentialSpec& spec, double lo, double hi,
                                           int n_grid) {
  return critical_points([&](double x) { return spec.F(x); },
                         [&](double x) { return spec.F(x, 1); }, lo, hi, n_grid);
}

std::vector<Minimum> find_minima(const PotentialSpec& spec, double lo, double hi, int n_grid) {
  if (n_grid < 100) throw Error(Err::InvalidArgument, "n_grid must be at least 100");
  std::vector<Minimum> mins;
  for (const auto& c : critical_points(spec, lo, hi, n_grid))
    if (c.is_min) mins.push_back({c.x, c.F});
  // An interior minimum can sit exactly on a grid node where F' = 0; critical_points
  // catches it through the <0 / >=0 test, so nothing else to do here.
  if (mins.empty()) throw Error(Err::NoMinimum, "F has no local minimum on the domain");
  std::sort(mins.begin(), mins.end(), [](const Minimum& a, const Minimum& b) {
    return a.F < b.F || (a.F == b.F && a.x < b.x);
  });
  if (mins.size() > 1 && std::fabs(mins[1].F - mins[0].F) < 1e-10)
    throw Error(Err::TieAtGlobalMin, "two minima share the global minimum value");
  return mins;
}

double barrier_cost(const std::function<double(double)>& F, double x, const std::vector<double>& A,
                    double lo, double hi, int n_grid) {
  if (A.empty()) throw Error(Err::InvalidArgument, "empty target set");
  if (x < lo || x > hi) throw Error(Err::OutOfDomain, "x outside domain");
  double fx = F(x);
  double best = INFINITY;
  for (double a : A) {
    if (a < lo || a > hi) throw Error(Err::OutOfDomain, "target outside domain");
    if (a == x) return 0;
    int n = std::max(16, static_cast<int>(n_grid * std::fabs(a - x) / (hi - lo)) + 1);
    best = std::min(best, max_on_segment(F, x, a, n) - fx);
  }
  return std::max(0.0, best);
}

double barrier_cost(const PotentialSpec& spec, double x, const std::vector<double>& A, double lo,
                    double hi, int n_grid) {
  return barrier_cost([&](double u) { return spec.F(u); }, x, A, lo, hi, n_grid);
}

double minimax_level(const GridField& f, int start, const std::vector<int>& targets) {
  check_index(f, start);
  std::vector<char> is_target(f.v.size(), 0);
  for (int t : targets) {
    check_index(f, t);
    is_target[t] = 1;
  }
  std::vector<double> level(f.v.size(), INFINITY);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  level[start] = f.v[start];
  pq.push({level[start], start});
  while (!pq.empty()) {
    auto [l, i] = pq.top();
    pq.pop();
    if (l > level[i]) continue;
    if (is_target[i]) return l;
    for (int j : neighbors8(f, i)) {
      double nl = std::max(l, f.v[j]);
      if (nl < level[j]) {
        level[j] = nl;
        pq.push({nl, j});
      }
    }
  }
  throw Error(Err::OutOfDomain, "targets unreachable");
}

double barrier_cost_grid(const GridField& f, int start, const std::vector<int>& targets) {
  return minimax_level(f, start, targets) - f.v[start];
}

double barrier_cost_bruteforce(const GridField& f, int start, const std::vector<int>& targets) {
  if (f.nx > 7 || f.ny > 7) throw Error(Err::TooLarge, "brute force limited to 7x7");
  check_index(f, start);
  std::vector<char> is_target(f.v.size(), 0), on_path(f.v.size(), 0);
  for (int t : targets) {
    check_index(f, t);
    is_target[t] = 1;
  }
  if (is_target[start]) return 0;
  double best = INFINITY;
  // Depth-first over simple paths. A branch is cut only when its running max
  // already reaches the best complete path, which cannot change the minimum.
  std::function<void(int, double)> dfs = [&](int i, double run) {
    if (run >= best) return;
    if (is_target[i]) {
      best = run;
      return;
    }
    on_path[i] = 1;
    for (int j : neighbors8(f, i))
      if (!on_path[j]) dfs(j, std::max(run, f.v[j]));
    on_path[i] = 0;
  };
  dfs(start, f.v[start]);
  if (!std::isfinite(best)) throw Error(Err::OutOfDomain, "targets unreachable");
  return best - f.v[start];
}

double barrier_cost_2d(const std::function<double(double, double)>& F, const Grid2D& g,
                       double sx, double sy, const std::vector<std::pair<double, double>>& A) {
  auto snap = [&](double x, double y) {
    int ix = static_cast<int>(std::lround((x - g.x0) / g.hx));
    int iy = static_cast<int>(std::lround((y - g.y0) / g.hy));
    if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny)
      throw Error(Err::OutOfDomain, "point outside the grid");
    return iy * g.nx + ix;
  };
  GridField f;
  f.nx = g.nx;
  f.ny = g.ny;
  f.v.resize(static_cast<size_t>(g.nx) * g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f.v[j * g.nx + i] = F(g.x(i), g.y(j));
  int s = snap(sx, sy);
  std::vector<int> targets;
  for (auto [ax, ay] : A) targets.push_back(snap(ax, ay));
  if (std::find(targets.begin(), targets.end(), s) != targets.end()) return 0;

  // Dijkstra again with parents, to recover the bottleneck node.
  std::vector<double> level(f.v.size(), INFINITY);
  std::vector<int> parent(f.v.size(), -1);
  std::vector<char> is_target(f.v.size(), 0);
  for (int t : targets) is_target[t] = 1;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  level[s] = f.v[s];
  pq.push({level[s], s});
  int hit = -1;
  while (!pq.empty()) {
    auto [l, i] = pq.top();
    pq.pop();
    if (l > level[i]) continue;
    if (is_target[i]) { hit = i; break; }
    for (int j : neighbors8(f, i)) {
      double nl = std::max(l, f.v[j]);
      if (nl < level[j]) { level[j] = nl; parent[j] = i; pq.push({nl, j}); }
    }
  }
  if (hit < 0) throw Error(Err::OutOfDomain, "targets unreachable");
  double grid_level = level[hit];
  int b = hit;
  for (int i = hit; i >= 0; i = parent[i])
    if (f.v[i] == grid_level) { b = i; break; }
  double fs = F(sx, sy);
  if (b == s || is_target[b] || parent[b] < 0) return std::max(0.0, grid_level - fs);

  // Newton on grad F = 0 from the bottleneck node; accepted only if it lands on a
  // nearby saddle (indefinite Hessian). Otherwise keep the grid value.
  auto px = [&](int i) { return g.x(i % g.nx); };
  auto py = [&](int i) { return g.y(i / g.nx); };
  double cx = px(b), cy = py(b);
  const double eg = 1e-6, eh = 1e-4;
  double gx = 0, gy = 0, det = 0;
  for (int it = 0; it < 50; ++it) {
    gx = (F(cx + eg, cy) - F(cx - eg, cy)) / (2 * eg);
    gy = (F(cx, cy + eg) - F(cx, cy - eg)) / (2 * eg);
    double f0 = F(cx, cy);
    double hxx = (F(cx + eh, cy) - 2 * f0 + F(cx - eh, cy)) / (eh * eh);
    double hyy = (F(cx, cy + eh) - 2 * f0 + F(cx, cy - eh)) / (eh * eh);
    double hxy = (F(cx + eh, cy + eh) - F(cx + eh, cy - eh) - F(cx - eh, cy + eh) +
                  F(cx - eh, cy - eh)) / (4 * eh * eh);
    det = hxx * hyy - hxy * hxy;
    if (det == 0 || !std::isfinite(det)) break;
    double sx2 = -(hyy * gx - hxy * gy) / det, sy2 = -(hxx * gy - hxy * gx) / det;
    cx += sx2;
    cy += sy2;
    if (std::hypot(sx2, sy2) < 1e-13 * (1 + std::hypot(cx, cy))) break;
  }
  double refined = F(cx, cy);
  bool near = std::hypot(cx - px(b), cy - py(b)) <= 2 * std::max(g.hx, g.hy);
  if (near && det < 0 && std::hypot(gx, gy) < 1e-7 * (1 + std::fabs(refined)))
    return std::max(0.0, refined - fs);
  return std::max(0.0, grid_level - fs);
}

WellStructure well_structure(const PotentialSpec& spec, double lo, double hi, int n_grid) {
  WellStructure w;
  w.lo = lo;
  w.hi = hi;
  w.n_grid = n_grid;
  auto mins = find_minima(spec, lo, hi, n_grid);
  w.minima.push_back(mins[0]);
  std::vector<Minimum> rest(mins.begin() + 1, mins.end());
  while (!rest.empty()) {
    std::vector<double> set;
    for (const auto& m : w.minima) set.push_back(m.x);
    size_t pick = 0;
    double dmax = -INFINITY;
    std::vector<double> costs;
    for (size_t i = 0; i < rest.size(); ++i) {
      double c = barrier_cost(spec, rest[i].x, set, lo, hi, n_grid);
      costs.push_back(c);
      if (c > dmax) { dmax = c; pick = i; }
    }
    for (size_t i = 0; i < costs.size(); ++i)
      if (i != pick && std::fabs(costs[i] - dmax) < 1e-10)
        throw Error(Err::DegenerateDepths, "two wells share a depth");
    if (!w.depths.empty() && std::fabs(w.depths.back() - dmax) < 1e-10)
      throw Error(Err::DegenerateDepths, "depths not strictly decreasing");
    w.depths.push_back(dmax);
    w.minima.push_back(rest[pick]);
    rest.erase(rest.begin() + static_cast<long>(pick));
  }
  for (size_t i = 1; i < w.depths.size(); ++i)
    if (!(w.depths[i] < w.depths[i - 1]))
      throw Error(Err::DegenerateDepths, "depths not strictly decreasing");
  return w;
}

std::string well_structure_json(const WellStructure& w) {
  nlohmann::json j;
  j["minima"] = nlohmann::json::array();
  for (const auto& m : w.minima) j["minima"].push_back({{"x", m.x}, {"F", m.F}});
  j["depths"] = w.depths;
  j["d0"] = "inf";
  j["domain"] = {w.lo, w.hi};
  j["n_grid"] = w.n_grid;
  j["tolerances"] = {{"minimum_gradient", 1e-12}, {"saddle", 1e-8}, {"degenerate", 1e-10}};
  return j.dump(2);
}

double agmon_distance(const PotentialSpec& spec, double x, const std::vector<double>& sources,
                      double tol) {
  if (spec.dimension != 1) throw Error(Err::InvalidArgument, "agmon_distance is 1D");
  if (sources.empty()) throw Error(Err::InvalidArgument, "no sources");
  double best = INFINITY;
  for (double s : sources) best = std::min(best, std::fabs(sqrtV_integral(spec, x, s, tol)));
  return best;
}

AgmonField agmon_field(const PotentialSpec& spec, const std::vector<double>& nodes,
                       const std::vector<double>& sources) {
  if (nodes.empty()) throw Error(Err::EmptyGrid, "no nodes");
  for (size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1])) throw Error(Err::InvalidArgument, "nodes must increase");
  AgmonField f;
  f.x = nodes;
  f.nx = static_cast<int>(nodes.size());
  f.sources_x = sources;
  // Cumulative integral I along the nodes, then d = min_s |I(x) - I(s)|.
  std::vector<double> I(nodes.size(), 0.0);
  for (size_t i = 1; i < nodes.size(); ++i)
    I[i] = I[i - 1] + sqrtV_integral(spec, nodes[i - 1], nodes[i], 1e-12);
  std::vector<double> Is;
  for (double s : sources) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), s);
    size_t k = it == nodes.end() ? nodes.size() - 1 : static_cast<size_t>(it - nodes.begin());
    Is.push_back(I[k] + sqrtV_integral(spec, nodes[k], s, 1e-12));
  }
  f.dist.resize(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    double d = INFINITY;
    for (double v : Is) d = std::min(d, std::fabs(I[i] - v));
    f.dist[i] = d;
  }
  for (size_t i = 0; i < nodes.size(); ++i)
    for (double s : sources)
      if (nodes[i] == s) f.dist[i] = 0;
  return f;
}

AgmonField agmon_field_2d(const std::function<double(double, double)>& V, const Grid2D& g,
                          const std::vector<std::pair<double, double>>& sources) {
  if (g.nx < 2 || g.ny < 2) throw Error(Err::EmptyGrid, "2D grid too small");
  AgmonField f;
  f.nx = g.nx;
  f.ny = g.ny;
  size_t n = static_cast<size_t>(g.nx) * g.ny;
  f.x.resize(n);
  f.y.resize(n);
  std::vector<double> sv(n);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      size_t k = static_cast<size_t>(j) * g.nx + i;
      f.x[k] = g.x(i);
      f.y[k] = g.y(j);
      sv[k] = std::sqrt(std::max(0.0, V(f.x[k], f.y[k])));
    }
  f.dist.assign(n, INFINITY);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (auto [sx, sy] : sources) {
    int ix = static_cast<int>(std::lround((sx - g.x0) / g.hx));
    int iy = static_cast<int>(std::lround((sy - g.y0) / g.hy));
    if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny)
      throw Error(Err::OutOfDomain, "source outside the grid");
    size_t k = static_cast<size_t>(iy) * g.nx + ix;
    f.dist[k] = 0;
    pq.push({0.0, k});
    f.sources_x.push_back(sx);
    f.sources_y.push_back(sy);
  }
  auto val = [&](int i, int j) -> double {
    if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return INFINITY;
    size_t k = static_cast<size_t>(j) * g.nx + i;
    return done[k] ? f.dist[k] : INFINITY;
  };
  // Dijkstra order; each node takes the smaller of the graph relaxation
  // (trapezoid edge weights) and the first-order eikonal update from finalized neighbors.
  while (!pq.empty()) {
    auto [d, k] = pq.top();
    pq.pop();
    if (done[k] || d > f.dist[k]) continue;
    done[k] = 1;
    int i = static_cast<int>(k % g.nx), j = static_cast<int>(k / g.nx);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        int ni = i + dx, nj = j + dy;
        if (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) continue;
        size_t q = static_cast<size_t>(nj) * g.nx + ni;
        if (done[q]) continue;
        double len = std::hypot(dx * g.hx, dy * g.hy);
        double cand = d + 0.5 * (sv[k] + sv[q]) * len;
        double a = std::min(val(ni - 1, nj), val(ni + 1, nj));
        double b = std::min(val(ni, nj - 1), val(ni, nj + 1));
        if (std::isfinite(a) && std::isfinite(b) && g.hx == g.hy) {
          double fh = sv[q] * g.hx;
          if (std::fabs(a - b) < fh) {
            double e = 0.5 * (a + b + std::sqrt(2 * fh * fh - (a - b) * (a - b)));
            cand = std::min(cand, std::max(e, d));
          }
        }
        if (cand < f.dist[q]) {
          f.dist[q] = cand;
          pq.push({cand, q});
        }
      }
  }
  return f;
}

EikonalReport eikonal_check(const AgmonField& f, const std::function<double(double, double)>& V) {
  EikonalReport rep;
  auto sqv = [&](size_t k) {
    return std::sqrt(std::max(0.0, V(f.x[k], f.y.empty() ? 0.0 : f.y[k])));
  };
  auto edge = [&](size_t p, size_t q) {
    double dy = f.y.empty() ? 0.0 : f.y[q] - f.y[p];
    double len = std::hypot(f.x[q] - f.x[p], dy);
    double w = 0.5 * (sqv(p) + sqv(q)) * len;
    double dd = std::fabs(f.dist[q] - f.dist[p]);
    rep.max_triangle_violation = std::max(rep.max_triangle_violation, dd - w);
    double grad = dd / len;
    rep.max_excess = std::max(rep.max_excess, grad - std::max(sqv(p), sqv(q)));
    double vmax = std::max(sqv(p) * sqv(p), sqv(q) * sqv(q));
    if (vmax > 0) rep.max_ratio_to_V = std::max(rep.max_ratio_to_V, grad / vmax);
  };
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      size_t p = static_cast<size_t>(j) * f.nx + i;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx <= 0) continue;
          int ni = i + dx, nj = j + dy;
          if (ni < 0 || nj < 0 || ni >= f.nx || nj >= f.ny) continue;
          edge(p, static_cast<size_t>(nj) * f.nx + ni);
        }
    }
  return rep;
}

}  // namespace reslab
