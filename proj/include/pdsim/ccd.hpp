#pragma once

#include "pdsim/geometry.hpp"

#include <compare>
#include <optional>

namespace pdsim {

enum class PairKind : std::uint8_t { VertexTriangle = 0, EdgeEdge = 1 };

// VT: v = {vertex, tri0, tri1, tri2}. EE: v = {e0a, e0b, e1a, e1b}.
struct PrimitivePair {
  PairKind kind = PairKind::VertexTriangle;
  std::array<int, 4> v{};

  friend bool operator==(const PrimitivePair&, const PrimitivePair&) = default;
  friend std::strong_ordering operator<=>(const PrimitivePair& a, const PrimitivePair& b) {
    if (a.kind != b.kind) return a.kind <=> b.kind;
    for (int i = 0; i < 4; ++i)
      if (a.v[i] != b.v[i]) return a.v[i] <=> b.v[i];
    return std::strong_ordering::equal;
  }
};

// The four endpoint positions of a pair at one time.
struct PairPoints {
  std::array<Vec3, 4> p;
};

inline PairPoints gather(const PrimitivePair& pair, const Positions& x) {
  return {{row3(x, pair.v[0]), row3(x, pair.v[1]), row3(x, pair.v[2]), row3(x, pair.v[3])}};
}

// Closest-point parameters of a pair at one time. VT lambda are barycentric
// parameters on the triangle, EE lambda are the two edge parameters.
struct PairProximity {
  Vec2 lambda = Vec2::Zero();
  Vec3 diff = Vec3::Zero();  // p2(lambda) - p1(lambda)
  double distance = 0.0;
};

PairProximity pair_proximity(PairKind kind, const PairPoints& x);

// p2(lambda) - p1(lambda): VT p1 = vertex, p2 = point on triangle; EE p1 on
// the first edge, p2 on the second.
Vec3 pair_difference(PairKind kind, const PairPoints& x, const Vec2& lambda);

// Exact-root continuous collision query over the linear trajectory
// x0 -> x1. Returns the earliest impact time in [0, 1]; an impact already
// present at t = 0 is reported as 0. Ambiguous roots resolve to the earlier
// bracket end.
std::optional<double> full_ccd(PairKind kind, const PairPoints& x0, const PairPoints& x1);

inline std::optional<double> full_ccd(const PrimitivePair& pair, const Positions& x0, const Positions& x1) {
  return full_ccd(pair.kind, gather(pair, x0), gather(pair, x1));
}

struct ToiResult {
  double toi = 1.0;      // scaled, what the caller applies
  double raw = 1.0;      // earliest t* over all pairs, 1 if none
  int impacts = 0;
  int first_pair = -1;   // index of the pair with the earliest impact
};

// full_ccd for every pair; entries above 1 mean no impact.
std::vector<double> pair_tois(const std::vector<PrimitivePair>& pairs, const Positions& x0, const Positions& x1);

ToiResult reduce_tois(const std::vector<double>& tois, double alpha);

// Minimum full CCD time over `pairs`, multiplied by alpha when an impact is
// found. An impact at t = 0 yields toi = 0.
ToiResult global_toi(const std::vector<PrimitivePair>& pairs, const Positions& x0, const Positions& x1, double alpha);

// Q(lambda) = (p2^1 - p1^1) . (p2^0 - p1^0)
double query_Q(PairKind kind, const PairPoints& x0, const PairPoints& x1, const Vec2& lambda);

// Samples in the parameter domain of one pair kind.
struct SampleSet {
  PairKind kind = PairKind::VertexTriangle;
  std::vector<Vec2> points;
  double interval = 0.0;  // max distance from a domain point to its nearest sample
  bool includes_projection = true;
};

// Built-in patterns: triangle domain with n = m(m+1)/2 points, box domain with
// 1, 3 or 6 points (other counts use a near-square grid).
SampleSet make_sample_set(PairKind kind, int count, bool projection = true);

// Regular lattice whose interval does not exceed `rho`.
SampleSet make_lattice_samples(PairKind kind, double rho, bool projection = true);

// Conservative estimate of the interval of a point set over the domain.
double sample_interval(PairKind kind, const std::vector<Vec2>& points);

// True when any sampled Q is <= 0. `projection` is the closest-point parameter
// at the start state, used when the set asks for it. Only dot products, no
// root finding.
bool partial_ccd(PairKind kind, const PairPoints& x0, const PairPoints& x1, const SampleSet& samples,
                 const Vec2* projection = nullptr);

// Largest interval that cannot miss an impact before alpha of the step.
double sample_bound(double H0, double H1, double L, double alpha);

}  // namespace pdsim
