#include "pdsim/ccd.hpp"

#include <algorithm>
#include <cmath>

namespace pdsim {

namespace {

constexpr double kRootTol = 1e-13;    // relative to the cubic's magnitude scale
constexpr double kContactTol = 1e-9;  // relative to the pair's extent
constexpr int kBisectIters = 80;

struct Cubic {
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
  double magnitude = 0;  // bound on the size of the products behind f
  double operator()(double t) const { return ((c3 * t + c2) * t + c1) * t + c0; }
};

// Coplanarity polynomial f(t) = (e x g) . q with e, g, q linear in t.
Cubic coplanarity(PairKind kind, const PairPoints& x0, const PairPoints& x1) {
  Vec3 e0, e1, g0, g1, q0, q1;
  const auto& a = x0.p;
  const auto& b = x1.p;
  if (kind == PairKind::VertexTriangle) {
    e0 = a[2] - a[1];
    g0 = a[3] - a[1];
    q0 = a[0] - a[1];
    e1 = (b[2] - b[1]) - e0;
    g1 = (b[3] - b[1]) - g0;
    q1 = (b[0] - b[1]) - q0;
  } else {
    e0 = a[1] - a[0];
    g0 = a[3] - a[2];
    q0 = a[2] - a[0];
    e1 = (b[1] - b[0]) - e0;
    g1 = (b[3] - b[2]) - g0;
    q1 = (b[2] - b[0]) - q0;
  }
  const Vec3 n0 = e0.cross(g0);
  const Vec3 n1 = e0.cross(g1) + e1.cross(g0);
  const Vec3 n2 = e1.cross(g1);
  Cubic f;
  f.c0 = n0.dot(q0);
  f.c1 = n0.dot(q1) + n1.dot(q0);
  f.c2 = n1.dot(q1) + n2.dot(q0);
  f.c3 = n2.dot(q1);
  f.magnitude = (e0.norm() + e1.norm()) * (g0.norm() + g1.norm()) * (q0.norm() + q1.norm());
  return f;
}

PairPoints lerp(const PairPoints& x0, const PairPoints& x1, double t) {
  PairPoints out;
  for (int i = 0; i < 4; ++i) out.p[i] = x0.p[i] + t * (x1.p[i] - x0.p[i]);
  return out;
}

// Bound on |d distance / dt| over the step.
double relative_speed(PairKind kind, const PairPoints& x0, const PairPoints& x1) {
  Vec3 d[4];
  for (int i = 0; i < 4; ++i) d[i] = x1.p[i] - x0.p[i];
  if (kind == PairKind::VertexTriangle) {
    const Vec3 r = d[1];
    return (d[0] - r).norm() + std::max((d[2] - r).norm(), (d[3] - r).norm());
  }
  const Vec3 r = d[0];
  return (d[1] - r).norm() + std::max((d[2] - r).norm(), (d[3] - r).norm());
}

double pair_extent(const PairPoints& x0, const PairPoints& x1) {
  Aabb box;
  for (int i = 0; i < 4; ++i) {
    box.expand(x0.p[i]);
    box.expand(x1.p[i]);
  }
  return (box.hi - box.lo).norm();
}

// Roots of a t^2 + b t + c inside (0, 1).
int quadratic_roots(double a, double b, double c, double out[2]) {
  int n = 0;
  auto keep = [&](double t) {
    if (t > 0.0 && t < 1.0 && std::isfinite(t)) out[n++] = t;
  };
  const double scale = std::abs(a) + std::abs(b) + std::abs(c);
  if (scale == 0.0) return 0;
  if (std::abs(a) <= 1e-14 * scale) {
    if (b != 0.0) keep(-c / b);
    return n;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    keep(-b / (2.0 * a));  // near-double root: keep the vertex as a split point
    return n;
  }
  const double s = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0.0 ? s : -s));
  double r0 = q / a;
  double r1 = q != 0.0 ? c / q : r0;
  if (r0 > r1) std::swap(r0, r1);
  keep(r0);
  if (r1 != r0) keep(r1);
  return n;
}

// Distance-driven advancement for trajectories that stay (numerically)
// coplanar, where the cubic carries no information.
std::optional<double> advance(PairKind kind, const PairPoints& x0, const PairPoints& x1, double eta, double speed) {
  double t = 0.0;
  for (int it = 0; it < 100000; ++it) {
    const double d = pair_proximity(kind, lerp(x0, x1, t)).distance;
    if (d <= eta) return t;
    if (t >= 1.0 || speed <= 0.0) return std::nullopt;
    t = std::min(1.0, t + d / speed);
  }
  return t;
}

}  // namespace

Vec3 pair_difference(PairKind kind, const PairPoints& x, const Vec2& l) {
  const auto& p = x.p;
  if (kind == PairKind::VertexTriangle) return p[1] + l[0] * (p[2] - p[1]) + l[1] * (p[3] - p[1]) - p[0];
  return (p[2] + l[1] * (p[3] - p[2])) - (p[0] + l[0] * (p[1] - p[0]));
}

PairProximity pair_proximity(PairKind kind, const PairPoints& x) {
  PairProximity out;
  const auto& p = x.p;
  if (kind == PairKind::VertexTriangle) {
    const auto c = closest_point_triangle(p[0], p[1], p[2], p[3]);
    out.lambda = c.lambda;
    out.diff = c.point - p[0];
    out.distance = std::sqrt(c.dist2);
  } else {
    const auto c = closest_segment_segment(p[0], p[1], p[2], p[3]);
    out.lambda = Vec2(c.s, c.t);
    out.diff = c.c2 - c.c1;
    out.distance = std::sqrt(c.dist2);
  }
  return out;
}

std::optional<double> full_ccd(PairKind kind, const PairPoints& x0, const PairPoints& x1) {
  const Cubic f = coplanarity(kind, x0, x1);
  const double speed = relative_speed(kind, x0, x1);
  const double eta = kContactTol * pair_extent(x0, x1);
  const double tol = kRootTol * f.magnitude;

  auto touching = [&](double lo, double hi) {
    const double slack = eta + 2.0 * (hi - lo) * speed;
    const double d = std::min(pair_proximity(kind, lerp(x0, x1, lo)).distance,
                              pair_proximity(kind, lerp(x0, x1, hi)).distance);
    return d <= slack;
  };

  if (std::abs(f.c0) + std::abs(f.c1) + std::abs(f.c2) + std::abs(f.c3) <= tol)
    return advance(kind, x0, x1, eta, speed);

  double crit[2];
  const int nc = quadratic_roots(3.0 * f.c3, 2.0 * f.c2, f.c1, crit);
  double breaks[4];
  int nb = 0;
  breaks[nb++] = 0.0;
  for (int i = 0; i < nc; ++i) breaks[nb++] = crit[i];
  breaks[nb++] = 1.0;
  std::sort(breaks, breaks + nb);

  for (int k = 0; k + 1 < nb; ++k) {
    const double ta = breaks[k];
    const double tb = breaks[k + 1];
    const double fa = f(ta);
    const double fb = f(tb);
    if (std::abs(fa) <= tol && touching(ta, ta)) return ta;
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) {
      double lo = ta, hi = tb, flo = fa;
      for (int it = 0; it < kBisectIters && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      if (touching(lo, hi)) return lo;
    }
  }
  if (std::abs(f(1.0)) <= tol && touching(1.0, 1.0)) return 1.0;
  return std::nullopt;
}

std::vector<double> pair_tois(const std::vector<PrimitivePair>& pairs, const Positions& x0, const Positions& x1) {
  const int n = static_cast<int>(pairs.size());
  std::vector<double> t(n, 2.0);
#pragma omp parallel for schedule(dynamic, 64)
  for (int i = 0; i < n; ++i) {
    const auto r = full_ccd(pairs[i], x0, x1);
    if (r) t[i] = *r;
  }
  return t;
}

ToiResult reduce_tois(const std::vector<double>& t, double alpha) {
  ToiResult out;
  for (int i = 0; i < static_cast<int>(t.size()); ++i) {
    if (t[i] > 1.0) continue;
    ++out.impacts;
    if (out.first_pair < 0 || t[i] < out.raw) {
      out.raw = t[i];
      out.first_pair = i;
    }
  }
  out.toi = out.impacts > 0 ? alpha * out.raw : 1.0;
  return out;
}

ToiResult global_toi(const std::vector<PrimitivePair>& pairs, const Positions& x0, const Positions& x1, double alpha) {
  return reduce_tois(pair_tois(pairs, x0, x1), alpha);
}

double query_Q(PairKind kind, const PairPoints& x0, const PairPoints& x1, const Vec2& lambda) {
  return pair_difference(kind, x1, lambda).dot(pair_difference(kind, x0, lambda));
}

namespace {

std::vector<Vec2> triangle_pattern(int m) {
  std::vector<Vec2> pts;
  for (int i = 0; i < m; ++i)
    for (int j = 0; i + j <= m - 1; ++j) pts.emplace_back((i + 1.0 / 3.0) / m, (j + 1.0 / 3.0) / m);
  return pts;
}

std::vector<Vec2> box_pattern(int count) {
  std::vector<Vec2> pts;
  if (count == 1) {
    pts.emplace_back(0.5, 0.5);
  } else if (count == 3) {
    for (int k = 0; k < 3; ++k) pts.emplace_back((k + 0.5) / 3.0, (k + 0.5) / 3.0);
  } else {
    const int gx = count == 6 ? 3 : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    const int gy = (count + gx - 1) / gx;
    for (int i = 0; i < gx; ++i)
      for (int j = 0; j < gy; ++j) pts.emplace_back((i + 0.5) / gx, (j + 0.5) / gy);
  }
  return pts;
}

}  // namespace

double sample_interval(PairKind kind, const std::vector<Vec2>& points) {
  if (points.empty()) return std::numeric_limits<double>::infinity();
  constexpr int N = 128;
  const double g = 1.0 / N;
  double worst = 0.0;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) {
      if (kind == PairKind::VertexTriangle && i + j > N) continue;
      const Vec2 q(i * g, j * g);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : points) best = std::min(best, (p - q).squaredNorm());
      worst = std::max(worst, best);
    }
  // Every domain point lies within g / sqrt(2) of a grid point.
  return std::sqrt(worst) + g / std::sqrt(2.0);
}

SampleSet make_sample_set(PairKind kind, int count, bool projection) {
  if (count < 1) throw Error("sample count must be positive");
  SampleSet s;
  s.kind = kind;
  s.includes_projection = projection;
  if (kind == PairKind::VertexTriangle) {
    int m = 1;
    while (m * (m + 1) / 2 < count) ++m;
    s.points = triangle_pattern(m);
  } else {
    s.points = box_pattern(count);
  }
  s.interval = sample_interval(kind, s.points);
  return s;
}

SampleSet make_lattice_samples(PairKind kind, double rho, bool projection) {
  if (!(rho > 0.0)) throw Error("lattice interval must be positive");
  SampleSet s;
  s.kind = kind;
  s.includes_projection = projection;
  const int N = std::max(1, static_cast<int>(std::ceil(1.0 / (rho * std::sqrt(2.0)))));
  const double g = 1.0 / N;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) {
      if (kind == PairKind::VertexTriangle && i + j > N) continue;
      s.points.emplace_back(i * g, j * g);
    }
  s.interval = g / std::sqrt(2.0);
  return s;
}

bool partial_ccd(PairKind kind, const PairPoints& x0, const PairPoints& x1, const SampleSet& samples,
                 const Vec2* projection) {
  // p2 - p1 is affine in lambda: a + l0 b + l1 c, once per endpoint state.
  auto affine = [kind](const PairPoints& x, Vec3& a, Vec3& b, Vec3& c) {
    const auto& p = x.p;
    if (kind == PairKind::VertexTriangle) {
      a = p[1] - p[0];
      b = p[2] - p[1];
      c = p[3] - p[1];
    } else {
      a = p[2] - p[0];
      b = p[0] - p[1];
      c = p[3] - p[2];
    }
  };
  Vec3 a0, b0, c0, a1, b1, c1;
  affine(x0, a0, b0, c0);
  affine(x1, a1, b1, c1);
  auto Q = [&](const Vec2& l) {
    return (a1 + l[0] * b1 + l[1] * c1).dot(a0 + l[0] * b0 + l[1] * c0);
  };
  if (samples.includes_projection && projection && Q(*projection) <= 0.0) return true;
  for (const auto& l : samples.points)
    if (Q(l) <= 0.0) return true;
  return false;
}

double sample_bound(double H0, double H1, double L, double alpha) {
  if (!(H0 > 0.0 && H1 >= H0 && L > 0.0 && alpha > 0.0 && alpha < 1.0))
    throw Error("sample_bound: need H0 > 0, H1 >= H0, L > 0, 0 < alpha < 1");
  return (1.0 / alpha - 1.0) * H0 * H0 / (2.0 * std::sqrt(2.0) * L * (H1 + 2.0 * L));
}

}  // namespace pdsim
