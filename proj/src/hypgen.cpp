#include "mipose/hypgen.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

namespace mipose {

namespace {

constexpr int kNeighborOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                        {0, 1},   {1, -1}, {1, 0},  {1, 1}};

}  // namespace

PixelGraph build_pixel_graph(const PredictionMaps& maps, double delta) {
    PixelGraph g;
    g.width = maps.width;
    g.height = maps.height;
    g.free.assign(std::size_t(g.width) * g.height, 0);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c)
            g.free[g.index(r, c)] = maps.boundary_at(r, c) < delta ? 1 : 0;
    return g;
}

std::vector<std::int32_t> bfs_distances(const PixelGraph& graph, PixelCoord src,
                                        int max_hops) {
    std::vector<std::int32_t> dist(std::size_t(graph.width) * graph.height, -1);
    if (src.row < 0 || src.row >= graph.height || src.col < 0 || src.col >= graph.width)
        return dist;
    std::deque<PixelCoord> queue;
    dist[graph.index(src.row, src.col)] = 0;
    queue.push_back(src);
    while (!queue.empty()) {
        const PixelCoord p = queue.front();
        queue.pop_front();
        const std::int32_t d = dist[graph.index(p.row, p.col)];
        if (max_hops >= 0 && d >= max_hops) continue;
        if (!graph.is_free(p.row, p.col)) continue;  // no edges leave this pixel
        for (const auto& off : kNeighborOffsets) {
            const int rr = p.row + off[0], cc = p.col + off[1];
            if (rr < 0 || rr >= graph.height || cc < 0 || cc >= graph.width) continue;
            if (!graph.is_free(rr, cc)) continue;
            auto& slot = dist[graph.index(rr, cc)];
            if (slot >= 0) continue;
            slot = d + 1;
            queue.push_back({rr, cc});
        }
    }
    return dist;
}

int shortest_path_length(const PixelGraph& graph, PixelCoord a, PixelCoord b) {
    if (a == b) return 0;
    const auto dist = bfs_distances(graph, a);
    if (b.row < 0 || b.row >= graph.height || b.col < 0 || b.col >= graph.width) return -1;
    return dist[graph.index(b.row, b.col)];
}

std::vector<double> normalize_class_probability(const PredictionMaps& maps, int class_id) {
    std::vector<double> pi(std::size_t(maps.width) * maps.height, 0.0);
    double sum = 0.0;
    for (int r = 0; r < maps.height; ++r)
        for (int c = 0; c < maps.width; ++c) {
            const double p = maps.semantic_at(r, c, class_id);
            pi[std::size_t(r) * maps.width + c] = p;
            sum += p;
        }
    if (sum <= 0.0)
        throw DataError("normalize_class_probability: class " + std::to_string(class_id) +
                        " is absent");
    for (double& v : pi) v /= sum;
    return pi;
}

// ---------------------------------------------------------------------------
// Base sampling

BaseSampler::BaseSampler(const PointCloud& cloud, std::vector<double> potentials,
                         const PixelGraph& graph, const PpfTable& table,
                         const HypgenConfig& config, double model_diameter)
    : cloud_(cloud),
      potentials_(std::move(potentials)),
      graph_(graph),
      table_(table),
      config_(config),
      diameter_(model_diameter) {
    if (potentials_.size() != cloud_.size())
        throw DataError("BaseSampler: potential count does not match cloud size");
    epsilon_l_ = config_.epsilon_l > 0
                     ? config_.epsilon_l
                     : std::max(1, (int)(std::hypot(graph.width, graph.height) / 4.0));
    pixel_to_points_.assign(std::size_t(graph.width) * graph.height, {});
    for (int i = 0; i < (int)cloud_.size(); ++i) {
        const PixelCoord& px = cloud_.pixel_origin[i];
        pixel_to_points_[graph.index(px.row, px.col)].push_back(i);
    }
}

int BaseSampler::draw_weighted(const std::vector<double>& weights, Rng& rng) const {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) return -1;
    const double pick = rng.uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (pick < acc) return (int)i;
    }
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0) return (int)i;
    return -1;
}

std::optional<Base> BaseSampler::sample(Rng& rng) {
    if (cloud_.size() < 4) return std::nullopt;
    if (cloud_.normals.size() != cloud_.size())
        throw DataError("BaseSampler: cloud must carry normals");

    const double tau_plane = config_.tau_plane_frac * diameter_;

    // Bounded BFS over the pixel graph, returning candidate point indices at
    // reached pixels. Path lengths must be strictly below epsilon_l.
    std::vector<std::int32_t> dist;
    const auto reachable_points = [&](PixelCoord src) {
        dist = bfs_distances(graph_, src, epsilon_l_ - 1);
        std::vector<int> pts;
        for (std::size_t i = 0; i < dist.size(); ++i)
            if (dist[i] >= 0)
                for (int p : pixel_to_points_[i]) pts.push_back(p);
        return pts;
    };

    const auto ppf_compatible = [&](int i, int j) {
        const Vec3 d = cloud_.points[i] - cloud_.points[j];
        if (d.squaredNorm() < 1e-18) return false;
        const PpfFeature f =
            compute_ppf(cloud_.points[i], cloud_.normals[i], cloud_.points[j], cloud_.normals[j]);
        return table_.contains(quantize_ppf(f, table_.quantization));
    };

    for (int attempt = 0; attempt < std::max(1, config_.retry_budget); ++attempt) {
        const int b1 = draw_weighted(potentials_, rng);
        if (b1 < 0) return std::nullopt;

        const std::vector<int> region = reachable_points(cloud_.pixel_origin[b1]);
        if (region.size() < 4) continue;

        // b2: PPF-compatible, path-reachable, distinct pixel.
        std::vector<int> cand;
        std::vector<double> w;
        for (int p : region) {
            if (p == b1 || potentials_[p] <= 0) continue;
            if (cloud_.pixel_origin[p] == cloud_.pixel_origin[b1]) continue;
            if (!ppf_compatible(b1, p)) continue;
            cand.push_back(p);
            w.push_back(potentials_[p]);
        }
        const int pick2 = draw_weighted(w, rng);
        if (pick2 < 0) continue;
        const int b2 = cand[pick2];

        const auto dist_b2 = bfs_distances(graph_, cloud_.pixel_origin[b2], epsilon_l_ - 1);

        // b3: constraints against both priors plus non-collinearity.
        cand.clear();
        w.clear();
        const Vec3 v12 = cloud_.points[b2] - cloud_.points[b1];
        for (int p : region) {
            if (p == b1 || p == b2 || potentials_[p] <= 0) continue;
            const PixelCoord& px = cloud_.pixel_origin[p];
            if (px == cloud_.pixel_origin[b1] || px == cloud_.pixel_origin[b2]) continue;
            if (dist_b2[graph_.index(px.row, px.col)] < 0) continue;
            const Vec3 v13 = cloud_.points[p] - cloud_.points[b1];
            const double sin_angle =
                v12.cross(v13).norm() / std::max(v12.norm() * v13.norm(), 1e-18);
            if (sin_angle < 0.1) continue;
            if (!ppf_compatible(b1, p) || !ppf_compatible(b2, p)) continue;
            cand.push_back(p);
            w.push_back(potentials_[p]);
        }
        const int pick3 = draw_weighted(w, rng);
        if (pick3 < 0) continue;
        const int b3 = cand[pick3];

        const auto dist_b3 = bfs_distances(graph_, cloud_.pixel_origin[b3], epsilon_l_ - 1);
        const Vec3 plane_n =
            v12.cross(cloud_.points[b3] - cloud_.points[b1]).normalized();

        // b4: constraints against all priors plus coplanarity.
        cand.clear();
        w.clear();
        for (int p : region) {
            if (p == b1 || p == b2 || p == b3 || potentials_[p] <= 0) continue;
            const PixelCoord& px = cloud_.pixel_origin[p];
            if (px == cloud_.pixel_origin[b1] || px == cloud_.pixel_origin[b2] ||
                px == cloud_.pixel_origin[b3])
                continue;
            if (dist_b2[graph_.index(px.row, px.col)] < 0) continue;
            if (dist_b3[graph_.index(px.row, px.col)] < 0) continue;
            if (std::abs(plane_n.dot(cloud_.points[p] - cloud_.points[b1])) > tau_plane)
                continue;
            if (!ppf_compatible(b1, p) || !ppf_compatible(b2, p) || !ppf_compatible(b3, p))
                continue;
            cand.push_back(p);
            w.push_back(potentials_[p]);
        }
        const int pick4 = draw_weighted(w, rng);
        if (pick4 < 0) continue;
        const int b4 = cand[pick4];

        Base base;
        base.point_index = {b1, b2, b3, b4};
        for (int m = 0; m < 4; ++m) {
            const int idx = base.point_index[m];
            base.points[m] = cloud_.points[idx];
            base.normals[m] = cloud_.normals[idx];
            base.pixels[m] = cloud_.pixel_origin[idx];
        }
        return base;
    }
    return std::nullopt;
}

void BaseSampler::apply_dispersion_decay(const Base& base, double gamma) {
    // Unbounded multi-source BFS: the decayed segment is everything the
    // search encounters from the base's pixels.
    std::vector<std::uint8_t> visited(std::size_t(graph_.width) * graph_.height, 0);
    std::deque<PixelCoord> queue;
    for (const PixelCoord& px : base.pixels) {
        const std::size_t i = graph_.index(px.row, px.col);
        if (!visited[i]) {
            visited[i] = 1;
            queue.push_back(px);
        }
    }
    while (!queue.empty()) {
        const PixelCoord p = queue.front();
        queue.pop_front();
        if (!graph_.is_free(p.row, p.col)) continue;
        for (const auto& off : kNeighborOffsets) {
            const int rr = p.row + off[0], cc = p.col + off[1];
            if (rr < 0 || rr >= graph_.height || cc < 0 || cc >= graph_.width) continue;
            if (!graph_.is_free(rr, cc)) continue;
            auto& seen = visited[graph_.index(rr, cc)];
            if (seen) continue;
            seen = 1;
            queue.push_back({rr, cc});
        }
    }
    for (std::size_t i = 0; i < visited.size(); ++i)
        if (visited[i])
            for (int p : pixel_to_points_[i]) potentials_[p] *= gamma;
}

// ---------------------------------------------------------------------------
// Congruent set matching

namespace {

// Closest approach of segments (p1,p2) and (q1,q2); s and t are the clamped
// parametric coordinates of the closest points.
double segment_closest_approach(const Vec3& p1, const Vec3& p2, const Vec3& q1,
                                const Vec3& q2, double& s, double& t) {
    const Vec3 u = p2 - p1, v = q2 - q1, w = p1 - q1;
    const double a = u.dot(u), b = u.dot(v), c = v.dot(v),
                 d = u.dot(w), e = v.dot(w);
    const double denom = a * c - b * b;
    if (denom > 1e-14) {
        s = std::clamp((b * e - c * d) / denom, 0.0, 1.0);
    } else {
        s = 0.0;  // near-parallel
    }
    t = c > 1e-14 ? std::clamp((b * s + e) / c, 0.0, 1.0) : 0.0;
    // Re-clamp s for the chosen t.
    s = a > 1e-14 ? std::clamp((b * t - d) / a, 0.0, 1.0) : 0.0;
    return (w + s * u - t * v).norm();
}

RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst) {
    Vec3 c_src = Vec3::Zero(), c_dst = Vec3::Zero();
    for (const Vec3& p : src) c_src += p;
    for (const Vec3& p : dst) c_dst += p;
    c_src /= (double)src.size();
    c_dst /= (double)dst.size();
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        h += (src[i] - c_src) * (dst[i] - c_dst).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixV() * flip * svd.matrixU().transpose();
    }
    return {Quat(r), c_dst - r * c_src};
}

std::vector<std::pair<int, int>> pairs_near_key(const PpfTable& table, const PpfFeature& f,
                                                double length, double dist_tol) {
    std::vector<std::pair<int, int>> out;
    const PpfKey key = quantize_ppf(f, table.quantization);
    // Scan the +-1 bin neighborhood; quantization boundaries otherwise drop
    // true matches.
    for (int dd = -1; dd <= 1; ++dd)
        for (int d1 = -1; d1 <= 1; ++d1)
            for (int d2 = -1; d2 <= 1; ++d2)
                for (int d3 = -1; d3 <= 1; ++d3) {
                    PpfKey k = key;
                    k.distance_bin += dd;
                    k.angle1_bin += d1;
                    k.angle2_bin += d2;
                    k.angle3_bin += d3;
                    const auto* entries = table.lookup(k);
                    if (!entries) continue;
                    for (const auto& pr : *entries) {
                        const double len =
                            (table.points[pr.first] - table.points[pr.second]).norm();
                        if (std::abs(len - length) <= dist_tol) out.push_back(pr);
                    }
                }
    return out;
}

}  // namespace

std::vector<RigidTransform> match_congruent_sets(const Base& base, const PpfTable& table,
                                                 const CongruenceTolerances& tol,
                                                 int max_results) {
    std::vector<RigidTransform> results;

    // Choose the diagonal pairing whose segments come closest; the (s, t)
    // parameters of the crossing are the rigid-invariant ratios.
    static constexpr int kPairings[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
    int best_pairing = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    double s_base = 0, t_base = 0;
    for (int k = 0; k < 3; ++k) {
        double s, t;
        const double d = segment_closest_approach(
            base.points[kPairings[k][0]], base.points[kPairings[k][1]],
            base.points[kPairings[k][2]], base.points[kPairings[k][3]], s, t);
        if (d < best_dist) {
            best_dist = d;
            best_pairing = k;
            s_base = s;
            t_base = t;
        }
    }
    if (best_pairing < 0 || best_dist > std::max(2.0 * tol.plane, tol.distance)) return results;

    const Vec3& a = base.points[kPairings[best_pairing][0]];
    const Vec3& b = base.points[kPairings[best_pairing][1]];
    const Vec3& c = base.points[kPairings[best_pairing][2]];
    const Vec3& d = base.points[kPairings[best_pairing][3]];
    const Vec3& na = base.normals[kPairings[best_pairing][0]];
    const Vec3& nb = base.normals[kPairings[best_pairing][1]];
    const Vec3& nc = base.normals[kPairings[best_pairing][2]];
    const Vec3& nd = base.normals[kPairings[best_pairing][3]];

    const double len1 = (b - a).norm();
    const double len2 = (d - c).norm();
    if (len1 < 1e-9 || len2 < 1e-9) return results;

    const auto pairs1 = pairs_near_key(table, compute_ppf(a, na, b, nb), len1, tol.distance);
    if (pairs1.empty()) return results;
    const auto pairs2 = pairs_near_key(table, compute_ppf(c, nc, d, nd), len2, tol.distance);
    if (pairs2.empty()) return results;

    // Index the diagonal-crossing points of the first pair set on a grid.
    const double cell = std::max(tol.distance, 1e-9);
    const auto cell_key = [&](const Vec3& p) {
        const auto u = [&](double v) {
            return static_cast<std::uint64_t>(
                       static_cast<std::uint32_t>((int)std::floor(v / cell))) &
                   0x1fffffULL;
        };
        return (u(p.x()) << 42) | (u(p.y()) << 21) | u(p.z());
    };
    std::unordered_map<std::uint64_t, std::vector<int>> grid;
    std::vector<Vec3> e1(pairs1.size());
    for (std::size_t i = 0; i < pairs1.size(); ++i) {
        const Vec3& qi = table.points[pairs1[i].first];
        const Vec3& qj = table.points[pairs1[i].second];
        e1[i] = qi + s_base * (qj - qi);
        grid[cell_key(e1[i])].push_back((int)i);
    }

    const std::array<Vec3, 4> base_pts = {a, b, c, d};
    const double dist_ac = (a - c).norm(), dist_ad = (a - d).norm();
    const double dist_bc = (b - c).norm(), dist_bd = (b - d).norm();

    for (const auto& [k2, l2] : pairs2) {
        const Vec3& qc = table.points[k2];
        const Vec3& qd = table.points[l2];
        const Vec3 e2 = qc + t_base * (qd - qc);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto it = grid.find(cell_key(e2 + cell * Vec3(dx, dy, dz)));
                    if (it == grid.end()) continue;
                    for (int i1 : it->second) {
                        if ((e1[i1] - e2).norm() > tol.distance) continue;
                        const Vec3& qa = table.points[pairs1[i1].first];
                        const Vec3& qb = table.points[pairs1[i1].second];
                        if (std::abs((qa - qc).norm() - dist_ac) > tol.distance) continue;
                        if (std::abs((qa - qd).norm() - dist_ad) > tol.distance) continue;
                        if (std::abs((qb - qc).norm() - dist_bc) > tol.distance) continue;
                        if (std::abs((qb - qd).norm() - dist_bd) > tol.distance) continue;
                        double s_m, t_m;
                        segment_closest_approach(qa, qb, qc, qd, s_m, t_m);
                        if (std::abs(s_m - s_base) > tol.ratio ||
                            std::abs(t_m - t_base) > tol.ratio)
                            continue;
                        const std::array<Vec3, 4> u_pts = {qa, qb, qc, qd};
                        const RigidTransform t = kabsch(u_pts, base_pts);
                        double rms = 0.0;
                        for (int m = 0; m < 4; ++m)
                            rms += (t.apply(u_pts[m]) - base_pts[m]).squaredNorm();
                        rms = std::sqrt(rms / 4.0);
                        if (rms > tol.distance) continue;
                        results.push_back(t);
                        if ((int)results.size() >= max_results) return results;
                    }
                }
    }
    return results;
}

// ---------------------------------------------------------------------------
// LCP, ICP, dedup

double lcp_score(const RigidTransform& transform, const MeshModel& model,
                 const NeighborGrid& cloud_grid, double radius, int max_samples) {
    const auto& pts = model.samples.points;
    if (pts.empty()) return 0.0;
    const int n = max_samples > 0 ? std::min<int>(max_samples, (int)pts.size())
                                  : (int)pts.size();
    int hits = 0;
    for (int i = 0; i < n; ++i)
        if (cloud_grid.any_within(transform.apply(pts[i]), radius)) ++hits;
    return (double)hits / (double)n;
}

double lcp_score(const RigidTransform& transform, const MeshModel& model,
                 const PointCloud& cloud, double radius, int max_samples) {
    if (cloud.empty()) return 0.0;
    return lcp_score(transform, model, NeighborGrid(cloud.points, radius), radius,
                     max_samples);
}

RigidTransform refine_icp(const RigidTransform& initial, const MeshModel& model,
                          const PointCloud& cloud, const NeighborGrid& cloud_grid,
                          double radius, int max_iterations) {
    if (cloud.normals.size() != cloud.points.size()) return initial;
    RigidTransform t = initial;
    const auto& pts = model.samples.points;
    for (int iter = 0; iter < max_iterations; ++iter) {
        Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
        int matches = 0;
        for (const Vec3& p : pts) {
            const Vec3 x = t.apply(p);
            const auto q_idx = cloud_grid.nearest_within(x, radius);
            if (!q_idx) continue;
            const Vec3& q = cloud.points[*q_idx];
            const Vec3& n = cloud.normals[*q_idx];
            const double residual = (x - q).dot(n);
            Eigen::Matrix<double, 6, 1> j;
            j.head<3>() = x.cross(n);
            j.tail<3>() = n;
            ata += j * j.transpose();
            atb -= j * residual;
            ++matches;
        }
        if (matches < 6) break;
        ata += 1e-9 * Eigen::Matrix<double, 6, 6>::Identity();
        const Eigen::Matrix<double, 6, 1> xi = ata.ldlt().solve(atb);
        const Vec3 omega = xi.head<3>();
        const Vec3 delta_t = xi.tail<3>();
        const double angle = omega.norm();
        const RigidTransform delta(
            angle > 1e-14 ? Quat(Eigen::AngleAxisd(angle, omega / angle)) : Quat::Identity(),
            delta_t);
        t = compose(delta, t);
        if (angle + delta_t.norm() < 1e-8) break;
    }
    return t;
}

std::vector<PoseHypothesis> dedup_and_refine(std::vector<PoseCandidateRaw> candidates,
                                             const MeshModel& model, const PointCloud& cloud,
                                             const HypgenConfig& config, int max_hypotheses) {
    struct Indexed {
        PoseCandidateRaw cand;
        int order;
    };
    std::vector<Indexed> sorted;
    sorted.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        sorted.push_back({candidates[i], (int)i});
    std::sort(sorted.begin(), sorted.end(), [](const Indexed& a, const Indexed& b) {
        if (a.cand.lcp != b.cand.lcp) return a.cand.lcp > b.cand.lcp;
        return a.order < b.order;
    });

    const double rot_thresh = config.dedup_rot_deg * PpfQuantization::kPi / 180.0;
    const double trans_thresh = config.dedup_trans_frac * model.diameter;

    std::vector<PoseHypothesis> accepted;
    for (const Indexed& item : sorted) {
        if ((int)accepted.size() >= max_hypotheses) break;
        bool duplicate = false;
        for (const PoseHypothesis& rep : accepted) {
            for (const RigidTransform& sym : model.symmetry_group) {
                const RigidTransform equivalent = compose(item.cand.pose, sym);
                if (rotation_distance(equivalent, rep.pose) <= rot_thresh &&
                    (equivalent.translation - rep.pose.translation).norm() <= trans_thresh) {
                    duplicate = true;
                    break;
                }
            }
            if (duplicate) break;
        }
        if (duplicate) continue;
        PoseHypothesis hyp;
        hyp.pose = item.cand.pose;
        hyp.lcp = item.cand.lcp;
        hyp.source_base = item.cand.source_base;
        accepted.push_back(hyp);
    }

    if (!cloud.empty() && cloud.normals.size() == cloud.points.size()) {
        const double icp_radius = config.icp_radius_frac * model.diameter;
        const NeighborGrid grid(cloud.points, icp_radius);
        const double lcp_radius = config.lcp_radius_frac * model.diameter;
        const NeighborGrid lcp_grid(cloud.points, lcp_radius);
        for (PoseHypothesis& hyp : accepted) {
            hyp.pose = refine_icp(hyp.pose, model, cloud, grid, icp_radius,
                                  config.icp_iterations);
            hyp.lcp = lcp_score(hyp.pose, model, lcp_grid, lcp_radius, -1);
        }
    }
    return accepted;
}

// ---------------------------------------------------------------------------
// Full pipeline

std::vector<ModelContext> prepare_models(std::span<const MeshModel> models,
                                         const HypgenConfig& config) {
    std::vector<ModelContext> out;
    out.reserve(models.size());
    for (const MeshModel& m : models) {
        ModelContext ctx;
        ctx.model = &m;
        ctx.table = build_ppf_table(m, config.model_samples,
                                    PpfQuantization::for_diameter(m.diameter));
        out.push_back(std::move(ctx));
    }
    return out;
}

HypothesisSet generate_hypotheses(const PredictionMaps& maps, const DepthImage& depth,
                                  const CameraIntrinsics& cam,
                                  std::span<const ModelContext> models,
                                  const HypgenConfig& config, std::uint64_t seed) {
    HypothesisSet set;

    PixelGraph graph;
    if (config.use_boundary) {
        graph = build_pixel_graph(maps, config.delta);
    } else {
        // Ablation: ignore boundary predictions entirely.
        graph.width = maps.width;
        graph.height = maps.height;
        graph.free.assign(std::size_t(maps.width) * maps.height, 1);
    }

    for (const ModelContext& ctx : models) {
        const MeshModel& model = *ctx.model;
        ClassHypotheses entry;
        entry.class_id = model.class_id;

        // Labeled pixels: argmax over semantic channels.
        PixelMask mask(std::size_t(maps.width) * maps.height, 0);
        std::size_t labeled = 0;
        for (int r = 0; r < maps.height; ++r)
            for (int c = 0; c < maps.width; ++c)
                if (maps.label_at(r, c) == model.class_id) {
                    mask[std::size_t(r) * maps.width + c] = 1;
                    ++labeled;
                }
        if (labeled < 4) {
            set.classes.push_back(std::move(entry));
            continue;
        }

        const PointCloud cloud = backproject_with_normals(depth, cam, &mask);
        if (cloud.size() < 4) {
            set.classes.push_back(std::move(entry));
            continue;
        }

        std::vector<double> potentials(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
            potentials[i] = maps.semantic_at(cloud.pixel_origin[i].row,
                                             cloud.pixel_origin[i].col, model.class_id);

        BaseSampler sampler(cloud, std::move(potentials), graph, ctx.table, config,
                            model.diameter);
        Rng rng = Rng::seeded(seed, 0xba5e0000ULL + (std::uint64_t)model.class_id);

        CongruenceTolerances tol;
        tol.distance = config.cong_dist_frac * model.diameter;
        tol.ratio = config.ratio_tol;
        tol.plane = config.tau_plane_frac * model.diameter;

        const double lcp_radius = config.lcp_radius_frac * model.diameter;
        const NeighborGrid lcp_grid(cloud.points, lcp_radius);

        std::vector<PoseCandidateRaw> candidates;
        for (int base_idx = 0; base_idx < config.bases_per_class; ++base_idx) {
            std::optional<Base> base = sampler.sample(rng);
            if (!base) continue;
            base->class_id = model.class_id;
            const auto transforms =
                match_congruent_sets(*base, ctx.table, tol, config.max_candidates_per_base);
            for (const RigidTransform& t : transforms) {
                const double lcp =
                    lcp_score(t, model, lcp_grid, lcp_radius, config.lcp_samples);
                if (lcp < config.min_lcp) continue;
                candidates.push_back({t, lcp, base_idx});
            }
            sampler.apply_dispersion_decay(*base, config.gamma);
        }

        entry.hypotheses =
            dedup_and_refine(std::move(candidates), model, cloud, config,
                             config.max_hypotheses);
        set.classes.push_back(std::move(entry));
    }
    return set;
}

}  // namespace mipose
