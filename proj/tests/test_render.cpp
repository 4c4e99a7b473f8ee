#include <doctest.h>

#include <cmath>
#include <deque>

#include "mipose/render.hpp"
#include "testutil.hpp"

using namespace mipose;
using testutil::kPi;

namespace {

MeshModel make_square(double size) {
    const double h = size / 2;
    return MeshModel::create(
        {Vec3(-h, -h, 0), Vec3(h, -h, 0), Vec3(h, h, 0), Vec3(-h, h, 0)},
        {{0, 1, 2}, {0, 2, 3}}, {}, 1, {}, 100);
}

// Morphological border: visible pixels with an 8-neighbor outside the mask.
PixelMask border_oracle(const PixelMask& visible, int w, int h) {
    PixelMask out(visible.size(), 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!visible[std::size_t(r) * w + c]) continue;
            bool edge = false;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (!dr && !dc) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w ||
                        !visible[std::size_t(rr) * w + cc])
                        edge = true;
                }
            if (edge) out[std::size_t(r) * w + c] = 1;
        }
    return out;
}

}  // namespace

TEST_CASE("render_depth: fronto-parallel square has constant depth") {
    const MeshModel square = make_square(0.4);
    const CameraIntrinsics cam;
    const RenderResult res =
        render_depth(square, RigidTransform::translate(0, 0, 2.0), cam);
    REQUIRE(res.visible_count() > 100);
    for (int r = 0; r < cam.height; ++r)
        for (int c = 0; c < cam.width; ++c)
            if (res.visible_mask[std::size_t(r) * cam.width + c])
                CHECK(res.depth.at(r, c) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("render_depth: model behind the camera renders empty") {
    const MeshModel box = testutil::make_box(0.1, 0.1, 0.1, 1, 100);
    const RenderResult res =
        render_depth(box, RigidTransform::translate(0, 0, -1.0), CameraIntrinsics{});
    CHECK(res.visible_count() == 0);
    CHECK(res.boundary_count() == 0);
}

TEST_CASE("render_depth: degenerate intrinsics rejected") {
    CameraIntrinsics cam;
    cam.fx = 0;
    const MeshModel box = testutil::make_box(0.1, 0.1, 0.1, 1, 50);
    CHECK_THROWS_AS(render_depth(box, RigidTransform::translate(0, 0, 1), cam), DataError);
}

TEST_CASE("render_depth: sphere boundary equals the mask border oracle") {
    const MeshModel sphere = testutil::make_icosphere(0.05, 1, 2, 300);
    const CameraIntrinsics cam;
    RenderOptions opts;
    opts.include_occlusion_boundary = false;  // silhouette only
    const RenderResult res =
        render_depth(sphere, RigidTransform::translate(0.02, -0.01, 0.6), cam, opts);
    REQUIRE(res.visible_count() > 200);
    const PixelMask oracle = border_oracle(res.visible_mask, cam.width, cam.height);
    CHECK(res.boundary_mask == oracle);
}

TEST_CASE("render_depth: self-occlusion jump marks interior boundary") {
    const MeshModel slabs = testutil::make_two_slabs(0.2, 0.05, 1);
    const CameraIntrinsics cam;
    const RenderResult res =
        render_depth(slabs, RigidTransform::translate(0, 0, 0.8), cam);
    const PixelMask silhouette = border_oracle(res.visible_mask, cam.width, cam.height);
    int interior_boundary = 0;
    for (std::size_t i = 0; i < res.boundary_mask.size(); ++i)
        if (res.boundary_mask[i] && !silhouette[i]) ++interior_boundary;
    CHECK(interior_boundary > 10);  // the step edge lies inside the mask
}

TEST_CASE("render_depth: deterministic and consistent with scene compositing") {
    const MeshModel box = testutil::make_box(0.08, 0.06, 0.04, 1, 100);
    const CameraIntrinsics cam;
    const RigidTransform pose =
        RigidTransform::from_axis_angle(Vec3(1, 1, 0), 0.4, Vec3(0.02, 0.01, 0.7));
    const RenderResult a = render_depth(box, pose, cam);
    const RenderResult b = render_depth(box, pose, cam);
    CHECK(a.depth.depth == b.depth.depth);  // bit-identical
    CHECK(a.visible_mask == b.visible_mask);

    const MeshModel box2 = testutil::make_box(0.07, 0.07, 0.05, 2, 100);
    const RigidTransform pose2 =
        RigidTransform::from_axis_angle(Vec3(0, 1, 0), -0.3, Vec3(-0.05, 0.02, 0.75));
    const RenderResult solo2 = render_depth(box2, pose2, cam);

    const PlacedModel placed[] = {{&box, pose}, {&box2, pose2}};
    const SceneRender scene = render_scene_depth(placed, cam);
    for (std::size_t i = 0; i < scene.depth.depth.size(); ++i) {
        const double da = a.depth.depth[i], db = solo2.depth.depth[i];
        double expected = 0.0;
        if (da > 0 && db > 0) expected = std::min(da, db);
        else if (da > 0) expected = da;
        else if (db > 0) expected = db;
        CHECK(scene.depth.depth[i] == expected);
    }
}

TEST_CASE("render_depth: convex visible mask is 8-connected") {
    const MeshModel sphere = testutil::make_icosphere(0.04, 1, 2, 200);
    const CameraIntrinsics cam;
    const RenderResult res =
        render_depth(sphere, RigidTransform::translate(-0.03, 0.02, 0.5), cam);
    REQUIRE(res.visible_count() > 0);
    // Flood fill from the first visible pixel must reach all of them.
    const int w = cam.width, h = cam.height;
    std::vector<std::uint8_t> seen(res.visible_mask.size(), 0);
    std::deque<std::pair<int, int>> queue;
    for (int r = 0; r < h && queue.empty(); ++r)
        for (int c = 0; c < w && queue.empty(); ++c)
            if (res.visible_mask[std::size_t(r) * w + c]) {
                queue.emplace_back(r, c);
                seen[std::size_t(r) * w + c] = 1;
            }
    int reached = 0;
    while (!queue.empty()) {
        const auto [r, c] = queue.front();
        queue.pop_front();
        ++reached;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                const std::size_t i = std::size_t(rr) * w + cc;
                if (res.visible_mask[i] && !seen[i]) {
                    seen[i] = 1;
                    queue.emplace_back(rr, cc);
                }
            }
    }
    CHECK(reached == res.visible_count());
}

TEST_CASE("render_scene_depth: empty scene") {
    const SceneRender scene = render_scene_depth({}, CameraIntrinsics{});
    for (double d : scene.depth.depth) CHECK(d == 0.0);
    for (std::int32_t id : scene.instance_ids) CHECK(id == -1);
    for (std::uint8_t b : scene.boundary_mask) CHECK(b == 0);
}

TEST_CASE("render_scene_depth: two separated cubes partition visible pixels") {
    const MeshModel box = testutil::make_box(0.06, 0.06, 0.06, 1, 100);
    const CameraIntrinsics cam;
    const PlacedModel placed[] = {
        {&box, RigidTransform::translate(-0.1, 0, 0.6)},
        {&box, RigidTransform::translate(0.1, 0, 0.6)},
    };
    const SceneRender scene = render_scene_depth(placed, cam);
    int count0 = 0, count1 = 0, boundary_bg = 0;
    for (std::size_t i = 0; i < scene.instance_ids.size(); ++i) {
        if (scene.instance_ids[i] == 0) ++count0;
        if (scene.instance_ids[i] == 1) ++count1;
        if (scene.instance_ids[i] >= 0) CHECK(scene.depth.depth[i] > 0);
        if (scene.instance_ids[i] < 0) CHECK(scene.depth.depth[i] == 0);
        if (scene.boundary_mask[i]) {
            CHECK(scene.instance_ids[i] >= 0);
            ++boundary_bg;
        }
    }
    CHECK(count0 > 100);
    CHECK(count1 > 100);
    CHECK(boundary_bg > 0);  // seam against the background exists
    CHECK(scene.class_ids[0] == 0);
}

TEST_CASE("render_scene_depth: abutting equal-depth cubes keep an id boundary") {
    const MeshModel box = testutil::make_box(0.06, 0.06, 0.06, 1, 100);
    const CameraIntrinsics cam;
    // Faces touch at x = 0; the top faces are coplanar, so no depth cue.
    const PlacedModel placed[] = {
        {&box, RigidTransform::translate(-0.03, 0, 0.6)},
        {&box, RigidTransform::translate(0.03, 0, 0.6)},
    };
    const SceneRender scene = render_scene_depth(placed, cam);

    // Oracle: scan rows for pixels where the instance id transitions 0 -> 1;
    // each such pixel (on either side) must be marked boundary.
    int transitions = 0;
    for (int r = 0; r < cam.height; ++r)
        for (int c = 0; c + 1 < cam.width; ++c) {
            const std::size_t i = std::size_t(r) * cam.width + c;
            const std::int32_t a = scene.instance_ids[i];
            const std::int32_t b = scene.instance_ids[i + 1];
            if (a >= 0 && b >= 0 && a != b) {
                ++transitions;
                CHECK(scene.boundary_mask[i]);
                CHECK(scene.boundary_mask[i + 1]);
            }
        }
    CHECK(transitions > 10);  // a vertical seam line exists
}

TEST_CASE("normals_from_depth: constant plane faces the camera") {
    const CameraIntrinsics cam;
    DepthImage depth(cam.width, cam.height);
    for (double& d : depth.depth) d = 1.5;
    const NormalImage normals = normals_from_depth(depth, cam);
    for (int r = 1; r + 1 < cam.height; ++r)
        for (int c = 1; c + 1 < cam.width; ++c) {
            REQUIRE(normals.is_valid(r, c));
            CHECK(normals.at(r, c).isApprox(Vec3(0, 0, -1), 1e-9));
        }
}

TEST_CASE("normals_from_depth: 45-degree plane matches the analytic normal") {
    const CameraIntrinsics cam;
    DepthImage depth(cam.width, cam.height);
    const double z0 = 1.0;
    for (int r = 0; r < cam.height; ++r)
        for (int c = 0; c < cam.width; ++c) {
            // Plane z = z0 + y in camera coordinates.
            const double denom = 1.0 - (r - cam.cy) / cam.fy;
            depth.at(r, c) = denom > 0.2 ? z0 / denom : 0.0;
        }
    const NormalImage normals = normals_from_depth(depth, cam);
    const Vec3 expected = Vec3(0, 1, -1).normalized();
    int checked = 0;
    for (int r = 40; r < 200; r += 7)
        for (int c = 40; c < 280; c += 11) {
            if (!normals.is_valid(r, c)) continue;
            CHECK(normals.at(r, c).isApprox(expected, 1e-6));
            ++checked;
        }
    CHECK(checked > 100);
}

TEST_CASE("normals_from_depth: pixels adjacent to holes are absent") {
    const CameraIntrinsics cam;
    DepthImage depth(cam.width, cam.height);
    for (double& d : depth.depth) d = 1.0;
    depth.at(100, 100) = 0.0;  // hole
    const NormalImage normals = normals_from_depth(depth, cam);
    CHECK(!normals.is_valid(100, 100));
    CHECK(!normals.is_valid(100, 101));
    CHECK(!normals.is_valid(100, 99));
    CHECK(!normals.is_valid(99, 100));
    CHECK(!normals.is_valid(101, 100));
    CHECK(normals.is_valid(102, 102));
}

TEST_CASE("backproject: principal ray and formula oracle") {
    const CameraIntrinsics cam;
    DepthImage depth(cam.width, cam.height);
    const double z = 1.3;
    depth.at((int)cam.cy, (int)cam.cx) = z;
    PointCloud cloud = backproject(depth, cam);
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.points[0].isApprox(Vec3(0, 0, z), 1e-12));
    CHECK(cloud.pixel_origin[0] == PixelCoord{(int)cam.cy, (int)cam.cx});

    Rng rng(37);
    DepthImage full(cam.width, cam.height);
    for (double& d : full.depth) d = 0.5 + rng.uniform01();
    const PointCloud all = backproject(full, cam);
    REQUIRE(all.size() == full.pixel_count());
    for (int trial = 0; trial < 100; ++trial) {
        const int idx = (int)rng.uniform_index(all.size());
        const auto [r, c] = all.pixel_origin[idx];
        const double d = full.at(r, c);
        const Vec3 expect((c - cam.cx) * d / cam.fx, (r - cam.cy) * d / cam.fy, d);
        CHECK(all.points[idx].isApprox(expect, 1e-12));
        // Round trip: project back to the same pixel.
        const Vec3& p = all.points[idx];
        CHECK((int)std::lround(cam.fx * p.x() / p.z() + cam.cx) == c);
        CHECK((int)std::lround(cam.fy * p.y() / p.z() + cam.cy) == r);
    }
}
