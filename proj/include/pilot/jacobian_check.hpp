#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "pilot/bundle.hpp"
#include "pilot/engine.hpp"
#include "pilot/jngo.hpp"

namespace pilot {

struct JacobianCheckConfig {
  int triples = 1000;           // (scene, pose, anchor) triples; each is checked at every level
  int anchors_per_scene = 50;
  double step = 1e-6;           // central-difference step on each twist coordinate
  double tolerance = 1e-4;      // on the relative Frobenius error
  std::uint64_t rng_seed = 1;
  Intrinsics intrinsics{89.6, 89.6, 63.5, 63.5, 128, 128};
};

struct JacobianCheckReport {
  int checked = 0;    // (triple, level) pairs compared
  int failures = 0;   // pairs above tolerance
  int skipped = 0;    // pairs whose stencil left the image or crossed a bilinear cell
  double max_relative_error = 0.0;

  bool passed() const { return checked > 0 && failures == 0; }
};

namespace detail {

inline bool same_cell(const PixelPoint& a, const PixelPoint& b, int w, int h) {
  return cell_index(a.u, w) == cell_index(b.u, w) && cell_index(a.v, h) == cell_index(b.v, h);
}

}  // namespace detail

/**
 * Compares the analytic residual Jacobian against central differences of
 * the residual under left perturbations exp(h e_k) T. The bilinear surface
 * is smooth inside a cell only, so stencils that straddle a cell edge are
 * skipped and counted. Both the world gauge and a shifted local gauge are
 * exercised: the first half of each scene uses the origin, the second half
 * the hypothesis centre.
 */
inline JacobianCheckReport jacobian_check(const JacobianCheckConfig& cfg) {
  using Vec = Eigen::Matrix<double, kAppearanceChannels, 1>;
  JacobianCheckReport rep;
  std::mt19937_64 rng(derive_seed(cfg.rng_seed, 0x1ac0));
  std::uniform_real_distribution<double> pos(-1500.0, 1500.0), unit(0.0, 1.0);
  std::uniform_real_distribution<double> yaw(-kPi, kPi), tilt(-5.0 * kDegToRad, 5.0 * kDegToRad);
  const Intrinsics& k = cfg.intrinsics;
  int done = 0;
  for (int s = 0; done < cfg.triples; ++s) {
    const Scene scene(SceneSpec{derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(s), 0x5c), 4000.0, 1.0});
    const EulerAngles att{yaw(rng), (45.0 + 30.0 * unit(rng)) * kDegToRad, tilt(rng)};
    const Vec3 c(pos(rng), pos(rng), 150.0 + 100.0 * unit(rng));
    const Pose gt = camera_pose(c, att);
    const Pyramid query = query_render(scene, gt, k, Degradation{}, 0);
    // Hypothesis a few metres and a degree or two away from the render pose.
    const Vec6 dxi = (Vec6() << 5.0 * (unit(rng) - 0.5), 5.0 * (unit(rng) - 0.5), 2.0 * (unit(rng) - 0.5),
                      0.03 * (unit(rng) - 0.5), 0.03 * (unit(rng) - 0.5), 0.03 * (unit(rng) - 0.5))
                         .finished();
    const Pose hyp = exp(Twist(dxi)) * gt;
    const auto bundle = make_bundle(scene, gt, k, static_cast<size_t>(cfg.anchors_per_scene),
                                    derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(s), 0xa7));
    for (size_t ai = 0; ai < bundle.anchors.size() && done < cfg.triples; ++ai, ++done) {
      const auto& anchor = bundle.anchors[ai];
      const Vec3 origin = ai % 2 ? hyp.translation() : Vec3::Zero();
      for (int level = 0; level < kNumLevels; ++level) {
        const auto q = query_level(query, k, level);
        const auto term = residual(anchor, hyp, q, level, true, origin);
        if (!term) {
          ++rep.skipped;
          continue;
        }
        const PixelPoint p0 = project(q.intrinsics, hyp.inverse().apply(anchor.world_point));
        Eigen::Matrix<double, kAppearanceChannels, 6> fd;
        bool ok = true;
        for (int j = 0; j < 6 && ok; ++j) {
          // Perturb about the gauge origin: T' = from_local exp(h e_j) to_local T.
          const Pose to_local(Mat3::Identity(), -origin), from_local(Mat3::Identity(), origin);
          Vec rs[2];
          for (int sgn = 0; sgn < 2; ++sgn) {
            Vec6 e = Vec6::Zero();
            e[j] = sgn ? -cfg.step : cfg.step;
            const Pose pert = from_local * exp(Twist(e)) * to_local * hyp;
            const auto t = residual(anchor, pert, q, level, false);
            const Vec3 pc = pert.inverse().apply(anchor.world_point);
            if (!t || !detail::same_cell(project(q.intrinsics, pc), p0, q.features->width(), q.features->height())) {
              ok = false;
              break;
            }
            rs[sgn] = t->r;
          }
          if (ok) fd.col(j) = (rs[0] - rs[1]) / (2.0 * cfg.step);
        }
        if (!ok) {
          ++rep.skipped;
          continue;
        }
        const double scale = std::max(term->J.norm(), 1e-8);
        const double rel = (fd - term->J).norm() / scale;
        ++rep.checked;
        rep.max_relative_error = std::max(rep.max_relative_error, rel);
        if (!(rel < cfg.tolerance)) ++rep.failures;
      }
    }
  }
  return rep;
}

}  // namespace pilot
