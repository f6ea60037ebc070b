#include "core/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "core/errors.hpp"

namespace splatprint {

Mat3 Gaussian3D::covariance() const {
  Vec3 s = scales();
  require(s.x >= 1e-9 && s.y >= 1e-9 && s.z >= 1e-9, ErrorCode::SingularCovariance,
          "gaussian scale below 1e-9 mm");
  Mat3 r = rotation.matrix();
  return r * Mat3::diag({s.x * s.x, s.y * s.y, s.z * s.z}) * r.transposed();
}

double eval_gaussian(const Gaussian3D& g, const Vec3& p) {
  Vec3 s = g.scales();
  require(s.x >= 1e-9 && s.y >= 1e-9 && s.z >= 1e-9, ErrorCode::SingularCovariance,
          "gaussian scale below 1e-9 mm");
  // Sigma^-1 = R diag(1/s^2) R^T; evaluate through the rotated offset.
  Vec3 d = p - g.mean;
  Mat3 rt = g.rotation.matrix().transposed();
  Vec3 local = rt * d;
  double q = local.x * local.x / (s.x * s.x) + local.y * local.y / (s.y * s.y) +
             local.z * local.z / (s.z * s.z);
  return g.opacity() * std::exp(-0.5 * q);
}

GaussianCloud init_cloud_from_points(const ColoredPointCloud& points, const CloudInitOpts& opts) {
  require(!points.points.empty(), ErrorCode::EmptyCloud, "cannot seed gaussians from no points");
  const size_t n = points.points.size();

  // Mean distance to the 3 nearest neighbours via a uniform grid hash.
  const double cell = 1.0;
  auto key = [&](const Vec3& p) {
    auto q = [&](double v) { return static_cast<long long>(std::floor(v / cell)); };
    return std::make_tuple(q(p.x), q(p.y), q(p.z));
  };
  struct KeyHash {
    size_t operator()(const std::tuple<long long, long long, long long>& k) const {
      auto [a, b, c] = k;
      size_t h = std::hash<long long>()(a);
      h = h * 1315423911u ^ std::hash<long long>()(b);
      h = h * 2654435761u ^ std::hash<long long>()(c);
      return h;
    }
  };
  std::unordered_map<std::tuple<long long, long long, long long>, std::vector<size_t>, KeyHash>
      grid;
  for (size_t i = 0; i < n; ++i) grid[key(points.points[i])].push_back(i);

  GaussianCloud cloud;
  cloud.gaussians.reserve(n);
  cloud.source_ids.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec3& p = points.points[i];
    double d2_best[3] = {1e30, 1e30, 1e30};
    auto [kx, ky, kz] = key(p);
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(std::make_tuple(kx + dx, ky + dy, kz + dz));
          if (it == grid.end()) continue;
          for (size_t j : it->second) {
            if (j == i) continue;
            double d2 = norm2(points.points[j] - p);
            if (d2 < d2_best[2]) {
              d2_best[2] = d2;
              if (d2_best[2] < d2_best[1]) std::swap(d2_best[1], d2_best[2]);
              if (d2_best[1] < d2_best[0]) std::swap(d2_best[0], d2_best[1]);
            }
          }
        }
    double mean_nn = 0.0;
    int found = 0;
    for (double d2 : d2_best)
      if (d2 < 1e29) { mean_nn += std::sqrt(d2); ++found; }
    mean_nn = found > 0 ? mean_nn / found : opts.max_scale_mm;

    Gaussian3D g;
    g.mean = p;
    double s = std::clamp(opts.scale_factor * mean_nn, opts.min_scale_mm, opts.max_scale_mm);
    double ls = std::log(s);
    g.log_scales = {ls, ls, ls};
    g.opacity_logit = logit(opts.opacity);
    Vec3 c = points.colors[i];
    g.color_logits = {logit(std::clamp(c.x, 0.02, 0.98)), logit(std::clamp(c.y, 0.02, 0.98)),
                      logit(std::clamp(c.z, 0.02, 0.98))};
    cloud.gaussians.push_back(g);
    cloud.source_ids.push_back(static_cast<int>(i));
  }
  return cloud;
}

}  // namespace splatprint
