#pragma once

// Discretized-control reference for shortest car paths, independent of the
// closed-form solver under test.  One breadth-first search from the origin
// explores the six controls (straight or extremal turn, forward or reverse)
// applied for exactly one arc-length quantum equal to the turn radius times
// one heading bin, so every transition costs the same and headings never
// leave the bin lattice; uniform cost makes breadth-first order optimal.
//
// Cells prune duplicates only: each cell keeps the exact continuous
// position of its first arrival and successors integrate from that stored
// pose, never from the cell center.  Every search path is therefore a
// genuinely drivable trajectory of length depth·quantum, which pins the
// sandwich against the true optimum L*:
//   field ≥ L* − c_comp   (the path ends inside the queried cell, and a
//                          within-cell pose completes to the exact target
//                          at small cost: lateral offsets cost O(√ε))
//   field ≤ L* + c_track  (an optimal path can be shadowed on the control
//                          lattice at bounded detour; pruning can widen
//                          this side but never the other)

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

class RsDistanceField {
 public:
  // half_width bounds |x| and |y| of the searched region; queries must stay
  // far enough inside that optimal paths do not excurse past the boundary
  // (two turn radii of margin is ample for unit-radius cars).
  explicit RsDistanceField(double half_width = 6.0, int heading_bins = 126)
      : na_(heading_bins),
        step_(2.0 * M_PI / heading_bins),
        half_cells_(static_cast<int>(std::ceil(half_width / step_))),
        nx_(2 * half_cells_ + 1),
        depth_(static_cast<std::size_t>(nx_) * nx_ * na_, kUnset),
        px_(depth_.size(), 0.0f),
        py_(depth_.size(), 0.0f) {
    run_bfs();
  }

  // Approximate shortest length from (0,0,0) to the given relative pose.
  // Negative when the pose's cell was never reached (outside the region or
  // clipped by it).
  double query(double x, double y, double theta) const {
    const int ix = static_cast<int>(std::lround(x / step_)) + half_cells_;
    const int iy = static_cast<int>(std::lround(y / step_)) + half_cells_;
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= nx_) return -1.0;
    const std::uint16_t d = depth_[index(ix, iy, heading_bin(theta))];
    if (d == kUnset) return -1.0;
    return d * step_;
  }

  double quantum() const { return step_; }

 private:
  static constexpr std::uint16_t kUnset = 0xFFFF;

  int heading_bin(double theta) const {
    int ia = static_cast<int>(std::lround(theta / step_)) % na_;
    if (ia < 0) ia += na_;
    return ia;
  }

  std::size_t index(int ix, int iy, int ia) const {
    return (static_cast<std::size_t>(ix) * nx_ + iy) * na_ + ia;
  }

  void run_bfs() {
    std::vector<double> cos_tab(na_), sin_tab(na_);
    for (int ia = 0; ia < na_; ++ia) {
      cos_tab[ia] = std::cos(ia * step_);
      sin_tab[ia] = std::sin(ia * step_);
    }

    std::vector<std::uint32_t> frontier, next;
    const std::uint32_t origin =
        static_cast<std::uint32_t>(index(half_cells_, half_cells_, 0));
    depth_[origin] = 0;
    frontier.push_back(origin);

    std::uint16_t level = 0;
    while (!frontier.empty() && level < kUnset - 1) {
      ++level;
      next.clear();
      for (const std::uint32_t code : frontier) {
        const int ia = static_cast<int>(code % na_);
        const double x = px_[code];
        const double y = py_[code];
        for (int gear = -1; gear <= 1; gear += 2) {
          for (int turn = -1; turn <= 1; ++turn) {
            double sx, sy;
            int sia = ia;
            if (turn == 0) {
              sx = x + gear * step_ * cos_tab[ia];
              sy = y + gear * step_ * sin_tab[ia];
            } else {
              // Unit-radius arc advancing the heading by exactly one bin.
              sia = (ia + gear * turn + na_) % na_;
              sx = x + turn * (sin_tab[sia] - sin_tab[ia]);
              sy = y - turn * (cos_tab[sia] - cos_tab[ia]);
            }
            const int jx = static_cast<int>(std::lround(sx / step_)) + half_cells_;
            const int jy = static_cast<int>(std::lround(sy / step_)) + half_cells_;
            if (jx < 0 || jy < 0 || jx >= nx_ || jy >= nx_) continue;
            const std::size_t j = index(jx, jy, sia);
            if (depth_[j] != kUnset) continue;
            depth_[j] = level;
            px_[j] = static_cast<float>(sx);
            py_[j] = static_cast<float>(sy);
            next.push_back(static_cast<std::uint32_t>(j));
          }
        }
      }
      frontier.swap(next);
    }
  }

  int na_;
  double step_;
  int half_cells_;
  int nx_;
  std::vector<std::uint16_t> depth_;
  std::vector<float> px_, py_;
};

}  // namespace oracle
