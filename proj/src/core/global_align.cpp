#include "core/global_align.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "core/errors.hpp"

namespace splatprint {

namespace {

// One Eq. 2 residual term: chi[view][px] - sigma_e (R_e x + t_e).
struct Constraint {
  int view = 0;
  size_t px = 0;
  double conf = 0.0;
  Vec3 x;
};

struct State {
  std::vector<std::vector<Vec3>> chi;
  std::vector<Rotation> rot;
  std::vector<Vec3> tr;
  std::vector<double> log_sigma;
};

struct Grad {
  std::vector<std::vector<Vec3>> chi;
  std::vector<Vec3> rot;
  std::vector<Vec3> tr;
  std::vector<double> log_sigma;
};

struct AdamMoments {
  std::vector<std::vector<Vec3>> chi_m, chi_v;
  std::vector<Vec3> rot_m, rot_v, tr_m, tr_v;
  std::vector<double> ls_m, ls_v;
  int t = 0;
};

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

inline double adam_axis(double g, double& m, double& v, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * g;
  v = kBeta2 * v + (1.0 - kBeta2) * g * g;
  return lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
}

inline Vec3 adam_vec(const Vec3& g, Vec3& m, Vec3& v, double lr, double bc1, double bc2) {
  return {adam_axis(g.x, m.x, v.x, lr, bc1, bc2), adam_axis(g.y, m.y, v.y, lr, bc1, bc2),
          adam_axis(g.z, m.z, v.z, lr, bc1, bc2)};
}

void project_gauge(State& s) {
  double mean = 0.0;
  for (double ls : s.log_sigma) mean += ls;
  mean /= static_cast<double>(s.log_sigma.size());
  if (mean == 0.0) return;
  double lambda = std::exp(-mean);
  for (double& ls : s.log_sigma) ls -= mean;
  for (auto& grid : s.chi)
    for (auto& p : grid) p *= lambda;
}

}  // namespace

ViewGraph build_complete_view_graph(const FingerScene& scene, const NoiseConfig& noise,
                                    double tau_c) {
  const int n = scene.view_count();
  std::vector<EdgeObservation> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      EdgeObservation e;
      e.view_n = a;
      e.view_m = b;
      e.pm_n = scene.oracle_pointmap(a, a, noise);
      e.pm_m = scene.oracle_pointmap(b, a, noise);
      Pointmap self_m = scene.oracle_pointmap(b, b, noise);
      e.pairwise_nm = align_views(self_m, e.pm_m, tau_c);  // frame m -> frame n
      edges.push_back(std::move(e));
    }
  }
  return build_view_graph(n, std::move(edges));
}

double GlobalAlignment::gauge_log_scale_sum() const {
  double s = 0.0;
  for (const auto& p : edge_pose) s += std::log(p.scale);
  return s;
}

ViewGraph build_view_graph(int view_count, std::vector<EdgeObservation> edges) {
  require(view_count >= 2, ErrorCode::InvalidArgument, "need at least two views");
  require(!edges.empty(), ErrorCode::DisconnectedGraph, "view graph has no edges");
  for (const auto& e : edges) {
    require(e.view_n >= 0 && e.view_n < view_count && e.view_m >= 0 && e.view_m < view_count &&
                e.view_n != e.view_m,
            ErrorCode::InvalidArgument, "edge views out of range");
    require(e.pm_n.width > 0 && e.pm_m.width > 0, ErrorCode::InvalidArgument,
            "edge pointmaps missing");
  }
  // Connectivity via union-find.
  std::vector<int> parent(view_count);
  for (int i = 0; i < view_count; ++i) parent[i] = i;
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& e : edges) parent[find(e.view_n)] = find(e.view_m);
  for (int i = 1; i < view_count; ++i)
    require(find(i) == find(0), ErrorCode::DisconnectedGraph,
            "view graph is not connected");
  ViewGraph g;
  g.view_count = view_count;
  g.edges = std::move(edges);
  return g;
}

double global_objective(const ViewGraph& graph, const GlobalAlignment& state,
                        const GlobalOpts& opts) {
  double obj = 0.0, w_total = 0.0;
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const Sim3Transform& pose = state.edge_pose[e];
    for (int side = 0; side < 2; ++side) {
      const Pointmap& pm = side == 0 ? edge.pm_n : edge.pm_m;
      int view = side == 0 ? edge.view_n : edge.view_m;
      for (size_t i = 0; i < pm.points.size(); ++i) {
        double c = pm.confidence[i];
        if (c <= 0.0) continue;
        Vec3 r = state.chi[view][i] - pose.apply(pm.points[i]);
        double n2 = norm2(r);
        obj += c * (opts.squared_norm ? n2
                                      : std::sqrt(n2 + opts.epsilon_mm * opts.epsilon_mm));
        w_total += c;
      }
    }
  }
  return w_total > 0.0 ? obj / w_total : 0.0;
}

GlobalAlignment optimize_global(const ViewGraph& graph, const GlobalOpts& opts) {
  require(opts.max_iters >= 1, ErrorCode::InvalidArgument, "max_iters must be >= 1");
  require(opts.step > 0.0, ErrorCode::InvalidArgument, "step must be positive");
  const int n_views = graph.view_count;
  const size_t n_edges = graph.edges.size();

  // Spanning-tree transport of the pairwise alignments, rooted at view 0.
  std::vector<Sim3Transform> to_global(n_views);
  std::vector<bool> known(n_views, false);
  known[0] = true;
  for (bool progress = true; progress;) {
    progress = false;
    for (const auto& e : graph.edges) {
      const Sim3Transform& t_nm = e.pairwise_nm.transform;  // frame m -> frame n
      if (known[e.view_n] && !known[e.view_m]) {
        to_global[e.view_m] = sim3_compose(to_global[e.view_n], t_nm);
        known[e.view_m] = progress = true;
      } else if (known[e.view_m] && !known[e.view_n]) {
        to_global[e.view_n] = sim3_compose(to_global[e.view_m], sim3_inverse(t_nm));
        known[e.view_n] = progress = true;
      }
    }
  }
  for (int v = 0; v < n_views; ++v)
    require(known[v], ErrorCode::DisconnectedGraph, "view graph is not connected");

  // Per-view grid shapes and constraint lists.
  std::vector<size_t> grid_size(n_views, 0);
  std::vector<std::vector<Constraint>> constraints(n_edges);
  std::vector<std::vector<double>> chi_conf(n_views);
  double w_total = 0.0;
  for (size_t e = 0; e < n_edges; ++e) {
    const auto& edge = graph.edges[e];
    for (int side = 0; side < 2; ++side) {
      const Pointmap& pm = side == 0 ? edge.pm_n : edge.pm_m;
      int view = side == 0 ? edge.view_n : edge.view_m;
      size_t sz = static_cast<size_t>(pm.width) * pm.height;
      if (grid_size[view] == 0) {
        grid_size[view] = sz;
        chi_conf[view].assign(sz, 0.0);
      }
      require(grid_size[view] == sz, ErrorCode::DimensionMismatch,
              "a view appears with inconsistent pointmap grids");
      for (size_t i = 0; i < sz; ++i) {
        double c = pm.confidence[i];
        if (c <= 0.0) continue;
        constraints[e].push_back({view, i, c, pm.points[i]});
        chi_conf[view][i] = std::max(chi_conf[view][i], c);
        w_total += c;
      }
    }
  }
  require(w_total > 0.0, ErrorCode::InvalidArgument, "graph carries no confident pixels");

  // chi is initialized by transporting each view's pointmap through its
  // spanning-tree edge; every remaining occurrence starts from the same grid.
  State state;
  state.chi.resize(n_views);
  for (int v = 0; v < n_views; ++v) state.chi[v].assign(grid_size[v], Vec3{});
  std::vector<bool> chi_set(n_views, false);
  for (size_t e = 0; e < n_edges; ++e) {
    const auto& edge = graph.edges[e];
    const Sim3Transform& base = to_global[edge.view_n];
    for (int side = 0; side < 2; ++side) {
      const Pointmap& pm = side == 0 ? edge.pm_n : edge.pm_m;
      int view = side == 0 ? edge.view_n : edge.view_m;
      if (chi_set[view]) continue;
      for (size_t i = 0; i < pm.points.size(); ++i)
        if (pm.confidence[i] > 0.0) state.chi[view][i] = base.apply(pm.points[i]);
      chi_set[view] = true;
    }
  }
  for (size_t e = 0; e < n_edges; ++e) {
    const Sim3Transform& base = to_global[graph.edges[e].view_n];
    state.rot.push_back(base.rotation);
    state.tr.push_back(base.translation);
    state.log_sigma.push_back(std::log(base.scale));
  }
  project_gauge(state);

  auto make_alignment = [&](const State& s) {
    GlobalAlignment ga;
    ga.chi = s.chi;
    ga.chi_conf = chi_conf;
    ga.chi_valid.resize(n_views);
    for (int v = 0; v < n_views; ++v) {
      // Grids are square in this artifact only by convention; recover W/H from
      // the first pointmap that mentions the view.
      for (const auto& e : graph.edges) {
        const Pointmap* pm = nullptr;
        if (e.view_n == v) pm = &e.pm_n;
        else if (e.view_m == v) pm = &e.pm_m;
        if (pm) {
          ga.chi_valid[v] = BitMask(pm->width, pm->height);
          for (size_t i = 0; i < chi_conf[v].size(); ++i)
            ga.chi_valid[v].bits[i] = chi_conf[v][i] > 0.0 ? 1 : 0;
          break;
        }
      }
    }
    for (size_t e = 0; e < n_edges; ++e)
      ga.edge_pose.push_back(Sim3Transform(std::exp(s.log_sigma[e]), s.rot[e], s.tr[e]));
    return ga;
  };

  const double eps2 = opts.epsilon_mm * opts.epsilon_mm;
  auto evaluate = [&](const State& s, Grad* grad) {
    double obj = 0.0;
    if (grad) {
      grad->chi.assign(n_views, {});
      for (int v = 0; v < n_views; ++v) grad->chi[v].assign(grid_size[v], Vec3{});
      grad->rot.assign(n_edges, Vec3{});
      grad->tr.assign(n_edges, Vec3{});
      grad->log_sigma.assign(n_edges, 0.0);
    }
    for (size_t e = 0; e < n_edges; ++e) {
      const Mat3 r_mat = s.rot[e].matrix();
      const double sigma = std::exp(s.log_sigma[e]);
      for (const auto& c : constraints[e]) {
        Vec3 rx = r_mat * c.x;
        Vec3 mapped = sigma * (rx + s.tr[e]);
        Vec3 r = s.chi[c.view][c.px] - mapped;
        double n2 = norm2(r);
        if (opts.squared_norm) {
          obj += c.conf * n2;
          if (grad) {
            Vec3 g = (2.0 * c.conf / w_total) * r;
            grad->chi[c.view][c.px] += g;
            grad->tr[e] -= sigma * g;
            grad->log_sigma[e] -= dot(g, mapped);
            grad->rot[e] += sigma * cross(g, rx);
          }
        } else {
          double rho = std::sqrt(n2 + eps2);
          obj += c.conf * rho;
          if (grad) {
            Vec3 g = (c.conf / (w_total * rho)) * r;
            grad->chi[c.view][c.px] += g;
            grad->tr[e] -= sigma * g;
            grad->log_sigma[e] -= dot(g, mapped);
            grad->rot[e] += sigma * cross(g, rx);
          }
        }
      }
    }
    return obj / w_total;
  };

  double f_current = evaluate(state, nullptr);
  require(std::isfinite(f_current), ErrorCode::NonFiniteObjective,
          "global alignment objective is not finite at initialization");

  AdamMoments mom;
  mom.chi_m.resize(n_views);
  mom.chi_v.resize(n_views);
  for (int v = 0; v < n_views; ++v) {
    mom.chi_m[v].assign(grid_size[v], Vec3{});
    mom.chi_v[v].assign(grid_size[v], Vec3{});
  }
  mom.rot_m.assign(n_edges, Vec3{});
  mom.rot_v.assign(n_edges, Vec3{});
  mom.tr_m.assign(n_edges, Vec3{});
  mom.tr_v.assign(n_edges, Vec3{});
  mom.ls_m.assign(n_edges, 0.0);
  mom.ls_v.assign(n_edges, 0.0);

  double lr_scale = 1.0;
  int iterations = 0;
  std::vector<double> trace{f_current};
  Grad grad;
  for (int it = 0; it < opts.max_iters; ++it) {
    ++iterations;
    evaluate(state, &grad);
    double lr = opts.step * lr_scale *
                (0.05 + 0.95 * 0.5 * (1.0 + std::cos(kPi * it / opts.max_iters)));

    State trial = state;
    AdamMoments tm = mom;
    ++tm.t;
    double bc1 = 1.0 - std::pow(kBeta1, tm.t);
    double bc2 = 1.0 - std::pow(kBeta2, tm.t);
    for (int v = 0; v < n_views; ++v)
      for (size_t i = 0; i < grid_size[v]; ++i)
        trial.chi[v][i] -= adam_vec(grad.chi[v][i], tm.chi_m[v][i], tm.chi_v[v][i], lr, bc1, bc2);
    for (size_t e = 0; e < n_edges; ++e) {
      Vec3 w = adam_vec(grad.rot[e], tm.rot_m[e], tm.rot_v[e], lr, bc1, bc2);
      trial.rot[e] = Rotation::exp(-w) * trial.rot[e];
      trial.tr[e] -= adam_vec(grad.tr[e], tm.tr_m[e], tm.tr_v[e], lr, bc1, bc2);
      trial.log_sigma[e] -= adam_axis(grad.log_sigma[e], tm.ls_m[e], tm.ls_v[e], lr, bc1, bc2);
    }
    project_gauge(trial);

    double f_trial = evaluate(trial, nullptr);
    require(std::isfinite(f_trial), ErrorCode::NonFiniteObjective,
            "global alignment diverged to a non-finite objective");
    if (f_trial <= f_current) {
      state = std::move(trial);
      mom = std::move(tm);
      f_current = f_trial;
      trace.push_back(f_current);
      lr_scale = std::min(1.0, lr_scale * 1.25);
    } else {
      lr_scale *= 0.5;  // backtrack: reject the step and try smaller
      if (lr_scale < 1e-14) break;
    }
  }

  GlobalAlignment ga = make_alignment(state);
  ga.final_objective = f_current;
  ga.iterations_run = iterations;
  ga.objective_trace = std::move(trace);
  return ga;
}

ColoredPointCloud fuse_point_cloud(const GlobalAlignment& ga, const ViewGraph& graph,
                                   const std::vector<const ImageBuffer*>& view_images,
                                   double confidence_floor, double voxel_mm) {
  require(view_images.size() == ga.chi.size(), ErrorCode::InvalidArgument,
          "need one image per view");
  ColoredPointCloud cloud;
  for (size_t v = 0; v < ga.chi.size(); ++v) {
    const ImageBuffer* img = view_images[v];
    for (size_t i = 0; i < ga.chi[v].size(); ++i) {
      if (!ga.chi_valid[v].bits[i]) continue;
      if (ga.chi_conf[v][i] < confidence_floor) continue;
      cloud.points.push_back(ga.chi[v][i]);
      cloud.confidence.push_back(ga.chi_conf[v][i]);
      if (img) {
        const double* px = &img->pixels[3 * i];
        cloud.colors.push_back({px[0], px[1], px[2]});
      } else {
        cloud.colors.push_back({0.5, 0.5, 0.5});
      }
    }
  }
  require(!cloud.points.empty(), ErrorCode::EmptyCloud,
          "confidence floor removed every point");

  if (voxel_mm > 0.0) {
    // Keep the most confident point per voxel; ties resolve to the earliest.
    std::map<std::tuple<long long, long long, long long>, size_t> best;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
      const Vec3& p = cloud.points[i];
      auto key = std::make_tuple(static_cast<long long>(std::floor(p.x / voxel_mm)),
                                 static_cast<long long>(std::floor(p.y / voxel_mm)),
                                 static_cast<long long>(std::floor(p.z / voxel_mm)));
      auto [it, inserted] = best.try_emplace(key, i);
      if (!inserted && cloud.confidence[i] > cloud.confidence[it->second]) it->second = i;
    }
    ColoredPointCloud down;
    for (const auto& [key, idx] : best) {
      down.points.push_back(cloud.points[idx]);
      down.colors.push_back(cloud.colors[idx]);
      down.confidence.push_back(cloud.confidence[idx]);
    }
    return down;
  }
  return cloud;
}

std::vector<Sim3Transform> estimate_view_poses(const GlobalAlignment& ga,
                                               const std::vector<Pointmap>& self_maps,
                                               double tau_c) {
  require(self_maps.size() == ga.chi.size(), ErrorCode::InvalidArgument,
          "need one self pointmap per view");
  std::vector<Sim3Transform> poses;
  for (size_t v = 0; v < self_maps.size(); ++v) {
    const Pointmap& pm = self_maps[v];
    std::vector<Vec3> src, dst;
    std::vector<double> w;
    for (size_t i = 0; i < pm.points.size(); ++i) {
      if (!pm.valid.bits[i] || pm.confidence[i] < tau_c) continue;
      if (!ga.chi_valid[v].bits[i]) continue;
      src.push_back(pm.points[i]);
      dst.push_back(ga.chi[v][i]);
      w.push_back(pm.confidence[i] * ga.chi_conf[v][i]);
    }
    poses.push_back(weighted_procrustes(src, dst, w).transform);
  }
  return poses;
}

}  // namespace splatprint
