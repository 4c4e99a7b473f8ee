#pragma once

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/rng.hpp"

namespace testutil {

using mipose::MeshModel;
using mipose::Quat;
using mipose::RigidTransform;
using mipose::Rng;
using mipose::Vec3;

inline constexpr double kPi = 3.14159265358979323846;

/// Axis-aligned box centered at the origin with outward-wound faces and the
/// cuboid symmetry group (180-degree flips about each axis).
inline MeshModel make_box(double sx, double sy, double sz, int class_id,
                          int sample_count = 500, bool with_symmetry = true) {
    const double w = sx / 2, h = sy / 2, d = sz / 2;
    std::vector<Vec3> v = {{-w, -h, -d}, {w, -h, -d}, {w, h, -d}, {-w, h, -d},
                           {-w, -h, d},  {w, -h, d},  {w, h, d},  {-w, h, d}};
    std::vector<std::array<int, 3>> t = {
        {0, 3, 2}, {0, 2, 1},  // z-
        {4, 5, 6}, {4, 6, 7},  // z+
        {0, 1, 5}, {0, 5, 4},  // y-
        {3, 7, 6}, {3, 6, 2},  // y+
        {0, 4, 7}, {0, 7, 3},  // x-
        {1, 2, 6}, {1, 6, 5},  // x+
    };
    std::vector<RigidTransform> sym;
    if (with_symmetry) {
        sym.push_back(RigidTransform::from_axis_angle(Vec3(1, 0, 0), kPi));
        sym.push_back(RigidTransform::from_axis_angle(Vec3(0, 1, 0), kPi));
        sym.push_back(RigidTransform::from_axis_angle(Vec3(0, 0, 1), kPi));
    }
    return MeshModel::create(std::move(v), std::move(t), {}, class_id, std::move(sym),
                             sample_count);
}

/// Point-set model without triangles (samples = vertices).
inline MeshModel make_point_model(std::vector<Vec3> points, int class_id = 1) {
    std::vector<Vec3> normals(points.size(), Vec3(0, 0, 1));
    return MeshModel::create(std::move(points), {}, std::move(normals), class_id);
}

/// Icosphere (subdivided icosahedron) of the given radius.
inline MeshModel make_icosphere(double radius, int class_id, int subdivisions = 2,
                                int sample_count = 500) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                           {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                           {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& p : v) p.normalize();
    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::vector<std::array<int, 3>> next;
        std::map<std::pair<int, int>, int> midpoint;
        const auto mid = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int idx = (int)v.size();
            v.push_back(((v[a] + v[b]) / 2.0).normalized());
            midpoint[key] = idx;
            return idx;
        };
        for (const auto& tri : f) {
            const int ab = mid(tri[0], tri[1]), bc = mid(tri[1], tri[2]),
                      ca = mid(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
        }
        f = std::move(next);
    }
    std::vector<Vec3> normals = v;  // unit sphere: normal == position
    for (Vec3& p : v) p *= radius;
    return MeshModel::create(std::move(v), std::move(f), std::move(normals), class_id, {},
                             sample_count);
}

/// Two parallel square slabs at different depths in one mesh; renders with an
/// interior depth discontinuity.
inline MeshModel make_two_slabs(double size, double gap, int class_id) {
    std::vector<Vec3> v;
    std::vector<std::array<int, 3>> f;
    const double h = size / 2;
    // Front plate spans the left half, rear plate overlaps it on the right.
    const auto add_quad = [&](double x0, double x1, double y0, double y1, double z) {
        const int base = (int)v.size();
        v.emplace_back(x0, y0, z);
        v.emplace_back(x1, y0, z);
        v.emplace_back(x1, y1, z);
        v.emplace_back(x0, y1, z);
        f.push_back({base, base + 1, base + 2});
        f.push_back({base, base + 2, base + 3});
    };
    add_quad(-h, 0.25 * h, -h, h, 0.0);
    add_quad(-0.25 * h, h, -h, h, gap);
    return MeshModel::create(std::move(v), std::move(f), {}, class_id, {}, 200);
}

inline Vec3 random_unit(Rng& rng) {
    while (true) {
        Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double n = v.norm();
        if (n > 1e-3 && n <= 1.0) return v / n;
    }
}

inline RigidTransform random_transform(Rng& rng, double max_translation = 1.0) {
    const Vec3 axis = random_unit(rng);
    const double angle = rng.uniform(0, kPi);
    const Vec3 t(rng.uniform(-max_translation, max_translation),
                 rng.uniform(-max_translation, max_translation),
                 rng.uniform(-max_translation, max_translation));
    return RigidTransform::from_axis_angle(axis, angle, t);
}

}  // namespace testutil
