#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mipose/errors.hpp"

namespace mipose {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid body transform: rotation (unit quaternion) followed by translation,
/// in meters. Immutable value type.
struct RigidTransform {
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    RigidTransform() = default;
    RigidTransform(const Quat& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}

    static RigidTransform identity() { return {}; }
    static RigidTransform translate(double x, double y, double z) {
        return {Quat::Identity(), Vec3(x, y, z)};
    }
    static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad,
                                          const Vec3& t = Vec3::Zero()) {
        return {Quat(Eigen::AngleAxisd(angle_rad, axis.normalized())), t};
    }
    static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
        return {Quat(Eigen::Matrix3d(m.block<3, 3>(0, 0))), m.block<3, 1>(0, 3)};
    }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 rotate(const Vec3& v) const { return rotation * v; }

    RigidTransform inverse() const {
        const Quat qi = rotation.conjugate();
        return {qi, -(qi * translation)};
    }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.block<3, 3>(0, 0) = rotation.toRotationMatrix();
        m.block<3, 1>(0, 3) = translation;
        return m;
    }
};

/// a then-applied-after b: result(p) == a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Geodesic rotation distance in radians, in [0, pi].
double rotation_distance(const RigidTransform& a, const RigidTransform& b);

struct PixelCoord {
    int row = 0;
    int col = 0;
    bool operator==(const PixelCoord&) const = default;
};

/// Observed 3D points with unit normals. pixel_origin is populated when the
/// cloud comes from a depth image and is empty otherwise. normals may be
/// empty for clouds that never feed PPF/ICP computations.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<PixelCoord> pixel_origin;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
};

/// Triangulated object model. Construct through `create`, which validates the
/// invariants, computes the diameter and attaches a deterministic surface
/// sampling used by the ADI metric, LCP scoring and ICP.
struct MeshModel {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> vertex_normals;
    int class_id = 0;
    double diameter = 0.0;
    std::vector<RigidTransform> symmetry_group;  // identity always first
    SurfaceSamples samples;
    bool watertight = false;

    static MeshModel create(std::vector<Vec3> vertices,
                            std::vector<std::array<int, 3>> triangles,
                            std::vector<Vec3> vertex_normals, int class_id,
                            std::vector<RigidTransform> symmetry_group = {},
                            int sample_count = kDefaultSampleCount);

    static constexpr int kDefaultSampleCount = 500;

    /// Enclosed volume via the divergence theorem; meaningful for watertight
    /// meshes only.
    double signed_volume() const;
};

/// Max pairwise vertex distance. Throws DataError for fewer than 2 vertices.
double model_diameter(const std::vector<Vec3>& vertices);

/// Poisson-disk style rejection sampling of the surface to approximately
/// `target_count` points with face normals. Falls back to the vertex set when
/// the mesh has no triangles.
SurfaceSamples sample_surface(const std::vector<Vec3>& vertices,
                              const std::vector<std::array<int, 3>>& triangles,
                              const std::vector<Vec3>& vertex_normals,
                              int target_count, std::uint64_t seed = 0x5eedULL);

// ---------------------------------------------------------------------------
// Point-pair features

/// Raw PPF of an ordered point pair: (|d|, angle(n1,d), angle(n2,d),
/// angle(n1,n2)) with d = p1 - p2 and all angles in [0, pi].
struct PpfFeature {
    double distance = 0.0;
    double angle_n1_d = 0.0;
    double angle_n2_d = 0.0;
    double angle_n1_n2 = 0.0;
};

struct PpfQuantization {
    double distance_step = 0.0;   // meters; must be > 0
    double angle_step = 0.20944;  // radians; default 12 degrees

    static PpfQuantization for_diameter(double diameter) {
        return {diameter / 20.0, 12.0 * kPi / 180.0};
    }
    static constexpr double kPi = 3.14159265358979323846;
};

struct PpfKey {
    std::int32_t distance_bin = 0;
    std::int32_t angle1_bin = 0;
    std::int32_t angle2_bin = 0;
    std::int32_t angle3_bin = 0;
    bool operator==(const PpfKey&) const = default;
};

struct PpfKeyHash {
    std::size_t operator()(const PpfKey& k) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (std::int64_t v : {std::int64_t(k.distance_bin), std::int64_t(k.angle1_bin),
                               std::int64_t(k.angle2_bin), std::int64_t(k.angle3_bin)}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Computes the raw PPF. Throws DataError for coincident points
/// (|p1 - p2| < 1e-9).
PpfFeature compute_ppf(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

PpfKey quantize_ppf(const PpfFeature& f, const PpfQuantization& q);

/// Pre-computed PPF index over a deterministic surface sampling of a model.
/// Entries map a quantized key to the ordered sample-index pairs that produce
/// it.
struct PpfTable {
    PpfQuantization quantization;
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::unordered_map<PpfKey, std::vector<std::pair<int, int>>, PpfKeyHash> entries;

    const std::vector<std::pair<int, int>>* lookup(const PpfKey& key) const {
        auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    }
    bool contains(const PpfKey& key) const { return entries.count(key) > 0; }
};

/// Builds the table over `num_samples` surface samples (all vertices when the
/// model has no triangles and fewer vertices than requested). Throws
/// DataError when fewer than 2 points are available.
PpfTable build_ppf_table(const MeshModel& model, int num_samples,
                         const PpfQuantization& quantization);

// ---------------------------------------------------------------------------
// Nearest-neighbor hash grid

/// Uniform hash grid over a fixed point set; answers nearest-distance and
/// radius queries. Cell size should be on the order of typical query radii.
class NeighborGrid {
public:
    NeighborGrid() = default;
    NeighborGrid(const std::vector<Vec3>& points, double cell_size);

    /// Exact distance from q to the closest stored point.
    double min_distance(const Vec3& q) const;
    /// Index of the closest point within max_radius, or nullopt.
    std::optional<int> nearest_within(const Vec3& q, double max_radius) const;
    bool any_within(const Vec3& q, double radius) const;

    bool empty() const { return points_.empty(); }

private:
    using CellKey = std::uint64_t;
    CellKey key_of(int ix, int iy, int iz) const;
    void cell_of(const Vec3& p, int& ix, int& iy, int& iz) const;

    std::vector<Vec3> points_;
    double cell_ = 1.0;
    std::unordered_map<CellKey, std::vector<int>> cells_;
    int cell_lo_[3] = {0, 0, 0};  // bounding box of populated cells
    int cell_hi_[3] = {0, 0, 0};
};

// ---------------------------------------------------------------------------
// ADI pose distance

/// avg over model sample points b1 of min over b2 of |T1(b1) - T2(b2)|.
double adi_distance(const RigidTransform& t1, const RigidTransform& t2,
                    const MeshModel& model);

/// Variant against a prebuilt grid of T2-transformed samples; used in hot
/// loops that compare one ground-truth pose against many hypotheses.
class AdiTarget {
public:
    AdiTarget(const RigidTransform& t2, const MeshModel& model);
    double distance_from(const RigidTransform& t1) const;

private:
    const MeshModel* model_;
    NeighborGrid grid_;
};

}  // namespace mipose
