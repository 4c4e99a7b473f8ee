#include "mipose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mipose/rng.hpp"

namespace mipose {

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {(a.rotation * b.rotation).normalized(), a.rotation * b.translation + a.translation};
}

double rotation_distance(const RigidTransform& a, const RigidTransform& b) {
    double d = std::abs(a.rotation.dot(b.rotation));
    d = std::min(1.0, d);
    return 2.0 * std::acos(d);
}

double model_diameter(const std::vector<Vec3>& vertices) {
    if (vertices.size() < 2) throw DataError("model_diameter: need at least 2 vertices");
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < vertices.size(); ++i)
        for (std::size_t j = i + 1; j < vertices.size(); ++j)
            best = std::max(best, (vertices[i] - vertices[j]).squaredNorm());
    return std::sqrt(best);
}

static Vec3 face_normal(const std::vector<Vec3>& v, const std::array<int, 3>& tri) {
    const Vec3 n = (v[tri[1]] - v[tri[0]]).cross(v[tri[2]] - v[tri[0]]);
    const double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3(0, 0, 1);
}

SurfaceSamples sample_surface(const std::vector<Vec3>& vertices,
                              const std::vector<std::array<int, 3>>& triangles,
                              const std::vector<Vec3>& vertex_normals,
                              int target_count, std::uint64_t seed) {
    SurfaceSamples out;
    const auto vertex_fallback = [&] {
        out.points = vertices;
        out.normals = vertex_normals.size() == vertices.size()
                          ? vertex_normals
                          : std::vector<Vec3>(vertices.size(), Vec3(0, 0, 1));
        return out;
    };
    if (triangles.empty()) return vertex_fallback();

    double total_area = 0.0;
    std::vector<double> cum_area(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        total_area += 0.5 * (vertices[tri[1]] - vertices[tri[0]])
                                .cross(vertices[tri[2]] - vertices[tri[0]])
                                .norm();
        cum_area[t] = total_area;
    }
    if (total_area <= 0.0) return vertex_fallback();

    Rng rng(seed);
    // Dart throwing with a shrinking exclusion radius until the target count
    // is reached. The initial radius assumes near-hexagonal packing. The cell
    // hash at the initial radius stays valid as the radius shrinks.
    const double r0 = std::sqrt(total_area / (target_count * 3.2));
    double radius = r0;
    std::vector<Vec3> accepted;
    std::vector<Vec3> accepted_n;
    std::unordered_map<std::uint64_t, std::vector<int>> cells;
    const auto cell_key = [&](const Vec3& p) {
        const auto u = [](double v, double c) {
            return static_cast<std::uint64_t>(
                       static_cast<std::uint32_t>(static_cast<int>(std::floor(v / c)))) &
                   0x1fffffULL;
        };
        return (u(p.x(), r0) << 42) | (u(p.y(), r0) << 21) | u(p.z(), r0);
    };
    const auto conflicts = [&](const Vec3& p) {
        const double r_sq = radius * radius;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto it = cells.find(cell_key(p + Vec3(dx * r0, dy * r0, dz * r0)));
                    if (it == cells.end()) continue;
                    for (int idx : it->second)
                        if ((accepted[idx] - p).squaredNorm() < r_sq) return true;
                }
        return false;
    };

    for (int round = 0; round < 4 && static_cast<int>(accepted.size()) < target_count; ++round) {
        const int attempts = target_count * 12;
        for (int a = 0; a < attempts && static_cast<int>(accepted.size()) < target_count; ++a) {
            const double pick = rng.uniform01() * total_area;
            const std::size_t t =
                std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin();
            const auto& tri = triangles[std::min(t, triangles.size() - 1)];
            double u = rng.uniform01(), v = rng.uniform01();
            if (u + v > 1.0) {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            const Vec3 p = vertices[tri[0]] + u * (vertices[tri[1]] - vertices[tri[0]]) +
                           v * (vertices[tri[2]] - vertices[tri[0]]);
            if (conflicts(p)) continue;
            cells[cell_key(p)].push_back(static_cast<int>(accepted.size()));
            accepted.push_back(p);
            accepted_n.push_back(face_normal(vertices, tri));
        }
        radius *= 0.75;
    }
    out.points = std::move(accepted);
    out.normals = std::move(accepted_n);
    return out;
}

MeshModel MeshModel::create(std::vector<Vec3> vertices,
                            std::vector<std::array<int, 3>> triangles,
                            std::vector<Vec3> vertex_normals, int class_id,
                            std::vector<RigidTransform> symmetry_group, int sample_count) {
    if (vertices.empty()) throw DataError("MeshModel: empty vertex set");
    for (const auto& tri : triangles)
        for (int idx : tri)
            if (idx < 0 || idx >= static_cast<int>(vertices.size()))
                throw DataError("MeshModel: triangle index out of range");
    if (vertex_normals.empty()) {
        // Accumulate face normals per vertex.
        vertex_normals.assign(vertices.size(), Vec3::Zero());
        for (const auto& tri : triangles) {
            const Vec3 n = (vertices[tri[1]] - vertices[tri[0]])
                               .cross(vertices[tri[2]] - vertices[tri[0]]);
            for (int idx : tri) vertex_normals[idx] += n;
        }
        for (auto& n : vertex_normals) {
            const double len = n.norm();
            n = len > 1e-12 ? Vec3(n / len) : Vec3(0, 0, 1);
        }
    }
    if (vertex_normals.size() != vertices.size())
        throw DataError("MeshModel: normal count does not match vertex count");
    for (const auto& n : vertex_normals)
        if (std::abs(n.norm() - 1.0) > 1e-6)
            throw DataError("MeshModel: vertex normals must have unit length");

    MeshModel m;
    m.vertices = std::move(vertices);
    m.triangles = std::move(triangles);
    m.vertex_normals = std::move(vertex_normals);
    m.class_id = class_id;
    m.diameter = m.vertices.size() >= 2 ? model_diameter(m.vertices) : 0.0;

    bool has_identity = false;
    for (const auto& s : symmetry_group)
        if (rotation_distance(s, RigidTransform::identity()) < 1e-9 &&
            s.translation.norm() < 1e-9)
            has_identity = true;
    m.symmetry_group.clear();
    if (!has_identity) m.symmetry_group.push_back(RigidTransform::identity());
    for (auto& s : symmetry_group) m.symmetry_group.push_back(std::move(s));

    m.samples = sample_surface(m.vertices, m.triangles, m.vertex_normals, sample_count);

    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& tri : m.triangles)
        for (int e = 0; e < 3; ++e) {
            const int a = tri[e], b = tri[(e + 1) % 3];
            edge_count[{std::min(a, b), std::max(a, b)}]++;
        }
    m.watertight = !m.triangles.empty() &&
                   std::all_of(edge_count.begin(), edge_count.end(),
                               [](const auto& kv) { return kv.second == 2; });
    return m;
}

double MeshModel::signed_volume() const {
    double vol = 0.0;
    for (const auto& tri : triangles)
        vol += vertices[tri[0]].dot(vertices[tri[1]].cross(vertices[tri[2]]));
    return vol / 6.0;
}

// ---------------------------------------------------------------------------

static double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

PpfFeature compute_ppf(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
    const Vec3 d = p1 - p2;
    const double dist = d.norm();
    if (dist < 1e-9) throw DataError("compute_ppf: degenerate pair (coincident points)");
    PpfFeature f;
    f.distance = dist;
    f.angle_n1_d = angle_between(n1, d);
    f.angle_n2_d = angle_between(n2, d);
    f.angle_n1_n2 = angle_between(n1, n2);
    return f;
}

PpfKey quantize_ppf(const PpfFeature& f, const PpfQuantization& q) {
    if (q.distance_step <= 0 || q.angle_step <= 0)
        throw DataError("quantize_ppf: quantization steps must be positive");
    const auto abin = [&](double a) {
        const int nbins = static_cast<int>(std::ceil(PpfQuantization::kPi / q.angle_step));
        int b = static_cast<int>(a / q.angle_step);
        return std::clamp(b, 0, nbins - 1);
    };
    PpfKey k;
    k.distance_bin = static_cast<std::int32_t>(f.distance / q.distance_step);
    k.angle1_bin = abin(f.angle_n1_d);
    k.angle2_bin = abin(f.angle_n2_d);
    k.angle3_bin = abin(f.angle_n1_n2);
    return k;
}

PpfTable build_ppf_table(const MeshModel& model, int num_samples,
                         const PpfQuantization& quantization) {
    SurfaceSamples s =
        sample_surface(model.vertices, model.triangles, model.vertex_normals, num_samples);
    if (s.points.size() < 2)
        throw DataError("build_ppf_table: model yields fewer than 2 surface points");
    PpfTable table;
    table.quantization = quantization;
    table.points = std::move(s.points);
    table.normals = std::move(s.normals);
    const int n = static_cast<int>(table.points.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const PpfFeature f =
                compute_ppf(table.points[i], table.normals[i], table.points[j], table.normals[j]);
            table.entries[quantize_ppf(f, quantization)].emplace_back(i, j);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------

NeighborGrid::NeighborGrid(const std::vector<Vec3>& points, double cell_size)
    : points_(points), cell_(cell_size > 0 ? cell_size : 1.0) {
    cells_.reserve(points_.size() * 2);
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
        int c[3];
        cell_of(points_[i], c[0], c[1], c[2]);
        cells_[key_of(c[0], c[1], c[2])].push_back(i);
        for (int a = 0; a < 3; ++a) {
            if (i == 0 || c[a] < cell_lo_[a]) cell_lo_[a] = c[a];
            if (i == 0 || c[a] > cell_hi_[a]) cell_hi_[a] = c[a];
        }
    }
}

void NeighborGrid::cell_of(const Vec3& p, int& ix, int& iy, int& iz) const {
    ix = static_cast<int>(std::floor(p.x() / cell_));
    iy = static_cast<int>(std::floor(p.y() / cell_));
    iz = static_cast<int>(std::floor(p.z() / cell_));
}

NeighborGrid::CellKey NeighborGrid::key_of(int ix, int iy, int iz) const {
    const auto u = [](int v) {
        return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)) & 0x1fffffULL;
    };
    return (u(ix) << 42) | (u(iy) << 21) | u(iz);
}

double NeighborGrid::min_distance(const Vec3& q) const {
    if (points_.empty()) return std::numeric_limits<double>::infinity();
    int c[3];
    cell_of(q, c[0], c[1], c[2]);
    // Rings below this distance cannot contain populated cells; rings above
    // the far corner cannot either.
    int ring_lo = 0, ring_hi = 0;
    for (int a = 0; a < 3; ++a) {
        int toward = 0;
        if (c[a] < cell_lo_[a]) toward = cell_lo_[a] - c[a];
        if (c[a] > cell_hi_[a]) toward = c[a] - cell_hi_[a];
        ring_lo = std::max(ring_lo, toward);
        ring_hi = std::max(ring_hi, std::max(std::abs(c[a] - cell_lo_[a]),
                                             std::abs(c[a] - cell_hi_[a])));
    }
    double best_sq = std::numeric_limits<double>::infinity();
    // Far queries and tiny point sets: a linear scan beats shell traversal.
    if (ring_lo > 4 || points_.size() < 64) {
        for (const Vec3& p : points_) best_sq = std::min(best_sq, (p - q).squaredNorm());
        return std::sqrt(best_sq);
    }
    for (int ring = ring_lo; ring <= ring_hi; ++ring) {
        // Points in cells at Chebyshev cell-distance `ring` are at Euclidean
        // distance >= (ring - 1) * cell; stop once no further ring can win.
        if (best_sq < std::numeric_limits<double>::infinity()) {
            const double lower = (ring - 1) * cell_;
            if (lower > 0 && lower * lower > best_sq) break;
        }
        for (int dx = -ring; dx <= ring; ++dx) {
            for (int dy = -ring; dy <= ring; ++dy) {
                const int step = (std::abs(dx) == ring || std::abs(dy) == ring)
                                     ? 1
                                     : std::max(2 * ring, 1);
                for (int dz = -ring; dz <= ring; dz += step) {
                    auto it = cells_.find(key_of(c[0] + dx, c[1] + dy, c[2] + dz));
                    if (it == cells_.end()) continue;
                    for (int idx : it->second)
                        best_sq = std::min(best_sq, (points_[idx] - q).squaredNorm());
                }
            }
        }
    }
    return std::sqrt(best_sq);
}

std::optional<int> NeighborGrid::nearest_within(const Vec3& q, double max_radius) const {
    if (points_.empty()) return std::nullopt;
    int cx, cy, cz;
    cell_of(q, cx, cy, cz);
    const int reach = static_cast<int>(std::ceil(max_radius / cell_));
    double best_sq = max_radius * max_radius;
    int best = -1;
    for (int dx = -reach; dx <= reach; ++dx) {
        for (int dy = -reach; dy <= reach; ++dy) {
            for (int dz = -reach; dz <= reach; ++dz) {
                auto it = cells_.find(key_of(cx + dx, cy + dy, cz + dz));
                if (it == cells_.end()) continue;
                for (int idx : it->second) {
                    const double d = (points_[idx] - q).squaredNorm();
                    if (d <= best_sq) {
                        best_sq = d;
                        best = idx;
                    }
                }
            }
        }
    }
    if (best < 0) return std::nullopt;
    return best;
}

bool NeighborGrid::any_within(const Vec3& q, double radius) const {
    if (points_.empty()) return false;
    int cx, cy, cz;
    cell_of(q, cx, cy, cz);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const double r_sq = radius * radius;
    for (int dx = -reach; dx <= reach; ++dx)
        for (int dy = -reach; dy <= reach; ++dy)
            for (int dz = -reach; dz <= reach; ++dz) {
                auto it = cells_.find(key_of(cx + dx, cy + dy, cz + dz));
                if (it == cells_.end()) continue;
                for (int idx : it->second)
                    if ((points_[idx] - q).squaredNorm() <= r_sq) return true;
            }
    return false;
}

// ---------------------------------------------------------------------------

AdiTarget::AdiTarget(const RigidTransform& t2, const MeshModel& model) : model_(&model) {
    std::vector<Vec3> transformed;
    transformed.reserve(model.samples.points.size());
    for (const Vec3& p : model.samples.points) transformed.push_back(t2.apply(p));
    const double cell = std::max(model.diameter / 10.0, 1e-6);
    grid_ = NeighborGrid(transformed, cell);
}

double AdiTarget::distance_from(const RigidTransform& t1) const {
    const auto& pts = model_->samples.points;
    if (pts.empty()) throw DataError("adi_distance: model has no sample points");
    double sum = 0.0;
    for (const Vec3& p : pts) sum += grid_.min_distance(t1.apply(p));
    return sum / static_cast<double>(pts.size());
}

double adi_distance(const RigidTransform& t1, const RigidTransform& t2,
                    const MeshModel& model) {
    return AdiTarget(t2, model).distance_from(t1);
}

}  // namespace mipose
