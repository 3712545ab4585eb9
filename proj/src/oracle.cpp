#include "pdsim/oracle.hpp"

#include "pdsim/kernels.hpp"
#include "pdsim/predicates.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

namespace pdsim {

std::vector<std::pair<int, int>> oracle_intersect(const CollisionWorld& world, const Positions& x, bool prefilter) {
  const int nt = world.triangle_count();
  std::vector<std::pair<int, int>> candidates;
  if (prefilter) {
    std::vector<Aabb> box(nt);
    for (int t = 0; t < nt; ++t)
      for (int v : world.triangles[t]) box[t].expand(row3(x, v));
    std::vector<int> order(nt);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return box[a].lo.x() < box[b].lo.x() || (box[a].lo.x() == box[b].lo.x() && a < b);
    });
    for (int i = 0; i < nt; ++i) {
      const int s = order[i];
      for (int j = i + 1; j < nt; ++j) {
        const int t = order[j];
        if (box[t].lo.x() > box[s].hi.x()) break;
        if (box[s].overlaps(box[t])) candidates.emplace_back(std::min(s, t), std::max(s, t));
      }
    }
    std::sort(candidates.begin(), candidates.end());
  } else {
    for (int s = 0; s < nt; ++s)
      for (int t = s + 1; t < nt; ++t) candidates.emplace_back(s, t);
  }

  const int nc = static_cast<int>(candidates.size());
  std::vector<char> hit(nc, 0);
#pragma omp parallel for schedule(dynamic, 256)
  for (int i = 0; i < nc; ++i) {
    const auto [s, t] = candidates[i];
    if (world.is_obstacle_triangle(s) && world.is_obstacle_triangle(t)) continue;
    hit[i] = mesh_triangles_intersect(x, world.triangles[s], world.triangles[t]) ? 1 : 0;
  }
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < nc; ++i)
    if (hit[i]) out.push_back(candidates[i]);
  return out;
}

namespace {

PairPoints at_time(const PairPoints& x0, const PairPoints& x1, double t) {
  PairPoints out;
  for (int i = 0; i < 4; ++i) out.p[i] = (1.0 - t) * x0.p[i] + t * x1.p[i];
  return out;
}

double signed_distance(PairKind kind, const PairPoints& x) {
  const auto& p = x.p;
  Vec3 n, d;
  if (kind == PairKind::VertexTriangle) {
    n = (p[2] - p[1]).cross(p[3] - p[1]);
    d = p[0] - p[1];
  } else {
    n = (p[1] - p[0]).cross(p[3] - p[2]);
    d = p[2] - p[0];
  }
  const double nn = n.norm();
  return nn > 0.0 ? d.dot(n) / nn : 0.0;
}

}  // namespace

std::optional<double> oracle_ccd(PairKind kind, const PairPoints& x0, const PairPoints& x1, int substeps) {
  if (substeps < 256) throw Error("oracle_ccd needs at least 256 substeps");
  Aabb box;
  for (int i = 0; i < 4; ++i) {
    box.expand(x0.p[i]);
    box.expand(x1.p[i]);
  }
  const double tol = 1e-7 * (box.hi - box.lo).norm();
  auto s = [&](double t) { return signed_distance(kind, at_time(x0, x1, t)); };
  double prev = s(0.0);
  if (pair_proximity(kind, x0).distance <= tol) return 0.0;
  for (int i = 1; i <= substeps; ++i) {
    const double t1 = static_cast<double>(i) / substeps;
    const double cur = s(t1);
    if ((prev <= 0.0 && cur >= 0.0) || (prev >= 0.0 && cur <= 0.0)) {
      double lo = static_cast<double>(i - 1) / substeps, hi = t1, flo = prev;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = s(mid);
        if ((fm <= 0.0) == (flo <= 0.0) && fm != 0.0) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      const double d = std::min(pair_proximity(kind, at_time(x0, x1, lo)).distance,
                                pair_proximity(kind, at_time(x0, x1, hi)).distance);
      if (d <= tol) return lo;
    }
    prev = cur;
  }
  return std::nullopt;
}

std::vector<double> spectrum_report(const Subspace& sub, const Positions& residual, int modes) {
  if (modes > sub.r_bar()) throw Error("spectrum_report: more modes than basis vectors");
  MatX c;
  kernels::serial::project(sub.U, residual, c);
  std::vector<double> out(modes);
  for (int m = 0; m < modes; ++m) out[m] = c.row(m).norm();
  return out;
}

}  // namespace pdsim

namespace pdsim {

void trajectory_bounds(Trajectory& t) {
  t.H0 = pair_proximity(t.kind, t.x0).distance;
  const bool vt = t.kind == PairKind::VertexTriangle;
  // side 1 = {0} or {0,1}; side 2 = the rest
  const int split = vt ? 1 : 2;
  t.H1 = 0.0;
  t.L = 0.0;
  for (const PairPoints* x : {&t.x0, &t.x1}) {
    for (int i = 0; i < split; ++i)
      for (int j = split; j < 4; ++j) t.H1 = std::max(t.H1, (x->p[i] - x->p[j]).norm());
    if (vt) {
      for (int i = 1; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) t.L = std::max(t.L, (x->p[i] - x->p[j]).norm());
    } else {
      t.L = std::max({t.L, (x->p[0] - x->p[1]).norm(), (x->p[2] - x->p[3]).norm()});
    }
  }
}

std::vector<Trajectory> random_trajectories(int count, std::uint64_t seed, const TrajectoryParams& prm) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
  auto unit = [&]() {
    for (;;) {
      const Vec3 v(uni(-1, 1), uni(-1, 1), uni(-1, 1));
      const double n = v.norm();
      if (n > 0.1 && n <= 1.0) return Vec3(v / n);
    }
  };
  auto ball = [&](double r) {
    for (;;) {
      const Vec3 v(uni(-1, 1), uni(-1, 1), uni(-1, 1));
      if (v.norm() <= 1.0) return Vec3(r * v);
    }
  };

  std::vector<Trajectory> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    Trajectory t;
    t.kind = out.size() % 2 == 0 ? PairKind::VertexTriangle : PairKind::EdgeEdge;
    const double L = uni(prm.l_min, prm.l_max);
    const double H0 = uni(prm.h0_min, prm.h0_max);
    Vec3 n;
    if (t.kind == PairKind::VertexTriangle) {
      // Triangle inside a disc of diameter L, vertex straight above an
      // interior point so the start distance is exactly H0.
      const Vec3 e1 = unit();
      const Vec3 e2 = e1.cross(unit()).normalized();
      std::array<Vec3, 3> tri;
      for (auto& p : tri) {
        const double a = uni(0, 2 * std::numbers::pi), r = 0.5 * L * std::sqrt(U(rng));
        p = r * (std::cos(a) * e1 + std::sin(a) * e2);
      }
      const Vec3 nn = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
      if (nn.norm() < 0.05 * L * L) continue;
      n = nn.normalized();
      double b1 = U(rng), b2 = U(rng);
      if (b1 + b2 > 1.0) b1 = 1.0 - b1, b2 = 1.0 - b2;
      const Vec3 foot = tri[0] + b1 * (tri[1] - tri[0]) + b2 * (tri[2] - tri[0]);
      t.x0.p = {foot + H0 * n, tri[0], tri[1], tri[2]};
      n = -n;  // from vertex toward triangle
    } else {
      const Vec3 da = unit();
      Vec3 db = unit();
      if (da.cross(db).norm() < 0.2) continue;
      n = da.cross(db).normalized();
      const double la = uni(0.3, 1.0) * L, lb = uni(0.3, 1.0) * L;
      const double s = uni(0.05, 0.95), u = uni(0.05, 0.95);
      const Vec3 pa = Vec3::Zero(), pb = pa + H0 * n;
      t.x0.p = {pa - s * la * da, pa + (1 - s) * la * da, pb - u * lb * db, pb + (1 - u) * lb * db};
    }
    // Closing motion shared randomly between the sides, plus bounded jitter.
    const double approach = uni(0.0, prm.max_approach) * H0;
    const double share = U(rng);
    const int split = t.kind == PairKind::VertexTriangle ? 1 : 2;
    const Vec3 rigid = ball(prm.max_jitter);
    for (int i = 0; i < 4; ++i) {
      const Vec3 close = (i < split ? share : -(1.0 - share)) * approach * n;
      t.x1.p[i] = t.x0.p[i] + close + rigid + ball(prm.max_jitter);
    }
    trajectory_bounds(t);
    if (t.L > prm.l_max || t.H0 < prm.h0_min || t.H0 > prm.h0_max) continue;
    out.push_back(t);
  }
  return out;
}

}  // namespace pdsim
