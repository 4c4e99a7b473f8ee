#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "mipose/scenegen.hpp"
#include "mipose/select.hpp"
#include "testutil.hpp"

using namespace mipose;

namespace {

SceneSpec basic_spec(Scenario scenario, std::vector<int> counts, std::uint64_t seed) {
    SceneSpec spec;
    spec.counts = std::move(counts);
    spec.scenario = scenario;
    spec.seed = seed;
    spec.bin_extent = Vec3(0.32, 0.24, 0.15);
    spec.bin_distance = 0.50;
    return spec;
}

}  // namespace

TEST_CASE("generate_scene: exact-fit packed grid, zero overlaps") {
    const double s = 0.06;
    const MeshModel cube = testutil::make_box(s, s, s, 1, 200);
    SceneSpec spec = basic_spec(Scenario::packed, {4}, 42);
    spec.bin_extent = Vec3(2 * s, 2 * s, 0.10);
    const std::vector<MeshModel> models = {testutil::make_box(s, s, s, 1, 200)};

    const GroundTruthScene gt = generate_scene(spec, models);
    REQUIRE(gt.placements.size() == 4);

    // 2x2 grid: centers at +-s/2 in x and y, identical z.
    std::set<std::pair<int, int>> cells;
    for (const Placement& p : gt.placements) {
        const Vec3 t = p.pose.translation;
        cells.insert({(int)std::lround(t.x() / (s / 2)), (int)std::lround(t.y() / (s / 2))});
        CHECK(std::abs(std::abs(t.x()) - s / 2) < 1e-9);
        CHECK(std::abs(std::abs(t.y()) - s / 2) < 1e-9);
        CHECK(rotation_distance(p.pose, RigidTransform::identity()) < 1e-9);
    }
    CHECK(cells.size() == 4);

    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
            const OverlapResult o = pairwise_overlap_volume(
                cube, gt.placements[i].pose, cube, gt.placements[j].pose);
            CHECK(o.volume == 0.0);
        }
}

TEST_CASE("generate_scene: deterministic for a fixed seed") {
    const std::vector<MeshModel> models = {testutil::make_box(0.06, 0.05, 0.04, 1, 150)};
    const SceneSpec spec = basic_spec(Scenario::packed, {6}, 1234);
    const GroundTruthScene a = generate_scene(spec, models);
    const GroundTruthScene b = generate_scene(spec, models);
    REQUIRE(a.placements.size() == b.placements.size());
    for (std::size_t i = 0; i < a.placements.size(); ++i) {
        CHECK(a.placements[i].pose.translation == b.placements[i].pose.translation);
        CHECK(a.placements[i].pose.rotation.coeffs() == b.placements[i].pose.rotation.coeffs());
    }
    CHECK(a.depth.depth == b.depth.depth);
}

TEST_CASE("generate_scene: re-render reproduces stored labels bit-exactly") {
    const std::vector<MeshModel> models = {testutil::make_box(0.06, 0.05, 0.04, 1, 150),
                                           testutil::make_box(0.05, 0.05, 0.05, 2, 150)};
    SceneSpec spec = basic_spec(Scenario::packed, {3, 3}, 77);
    const GroundTruthScene gt = generate_scene(spec, models);

    std::map<int, const MeshModel*> by_class;
    for (const MeshModel& m : models) by_class[m.class_id] = &m;
    std::vector<PlacedModel> placed;
    for (const Placement& p : gt.placements) placed.push_back({by_class.at(p.class_id), p.pose});
    const SceneRender again = render_scene_depth(placed, gt.cam);
    CHECK(again.depth.depth == gt.depth.depth);
    CHECK(again.instance_ids == gt.instance_labels);
    CHECK(again.class_ids == gt.class_labels);
    CHECK(again.boundary_mask == gt.boundary_mask);
}

TEST_CASE("generate_scene: pile stays in the bin with bounded overlaps") {
    const std::vector<MeshModel> models = {testutil::make_box(0.05, 0.04, 0.03, 1, 150)};
    SceneSpec spec = basic_spec(Scenario::pile, {6}, 9);
    const double eps_v = 0.03 * std::abs(models[0].signed_volume());
    const GroundTruthScene gt = generate_scene(spec, models);
    REQUIRE(gt.placements.size() == 6);

    for (const Placement& p : gt.placements) {
        // Transformed AABB within the bin (small slack for the voxel checks).
        Vec3 lo = Vec3::Constant(1e30), hi = Vec3::Constant(-1e30);
        for (const Vec3& v : models[0].vertices) {
            const Vec3 q = p.pose.apply(v);
            lo = lo.cwiseMin(q);
            hi = hi.cwiseMax(q);
        }
        CHECK(lo.x() >= -spec.bin_extent.x() / 2 - 1e-6);
        CHECK(hi.x() <= spec.bin_extent.x() / 2 + 1e-6);
        CHECK(lo.y() >= -spec.bin_extent.y() / 2 - 1e-6);
        CHECK(hi.y() <= spec.bin_extent.y() / 2 + 1e-6);
        CHECK(lo.z() >= spec.bin_distance - 1e-6);
        CHECK(hi.z() <= spec.bin_distance + spec.bin_extent.z() + 1e-6);
    }

    // Voxel oracle at a finer resolution than generation used.
    for (std::size_t i = 0; i < gt.placements.size(); ++i)
        for (std::size_t j = i + 1; j < gt.placements.size(); ++j) {
            const OverlapResult o = pairwise_overlap_volume(
                models[0], gt.placements[i].pose, models[0], gt.placements[j].pose,
                models[0].diameter / 80.0);
            CHECK(o.volume <= eps_v * 1.15);
        }
}

TEST_CASE("generate_scene: refuses an impossible packing") {
    const std::vector<MeshModel> models = {testutil::make_box(0.2, 0.2, 0.05, 7, 100)};
    SceneSpec spec = basic_spec(Scenario::packed, {4}, 3);
    spec.bin_extent = Vec3(0.25, 0.25, 0.1);  // fits one footprint, not four
    CHECK_THROWS_WITH_AS(generate_scene(spec, models),
                         doctest::Contains("class 7"), DataError);
}

TEST_CASE("generate_scene: spec validation") {
    const std::vector<MeshModel> models = {testutil::make_box(0.05, 0.05, 0.05, 1, 100)};
    SceneSpec spec = basic_spec(Scenario::packed, {0}, 3);
    CHECK_THROWS_AS(generate_scene(spec, models), DataError);
    spec = basic_spec(Scenario::packed, {1, 2}, 3);
    CHECK_THROWS_AS(generate_scene(spec, models), DataError);
}

TEST_CASE("simulate_predictions: noiseless limit is exact") {
    const std::vector<MeshModel> models = {testutil::make_box(0.06, 0.05, 0.04, 1, 150)};
    const GroundTruthScene gt =
        generate_scene(basic_spec(Scenario::packed, {4}, 5), models);
    const PredictionMaps maps = simulate_predictions(gt, NoiseConfig::noiseless(), 1);

    for (int r = 0; r < maps.height; ++r)
        for (int c = 0; c < maps.width; ++c) {
            const int label = gt.class_labels[std::size_t(r) * maps.width + c];
            CHECK(maps.semantic_at(r, c, label) == 1.0f);
            CHECK(maps.semantic_at(r, c, 1 - label) == 0.0f);
            const bool on_boundary = gt.boundary_mask[std::size_t(r) * maps.width + c] != 0;
            CHECK(maps.boundary_at(r, c) == (on_boundary ? 1.0f : 0.0f));
        }
}

TEST_CASE("simulate_predictions: channels sum to one under noise") {
    const std::vector<MeshModel> models = {testutil::make_box(0.06, 0.05, 0.04, 1, 150),
                                           testutil::make_box(0.05, 0.05, 0.05, 2, 150)};
    const GroundTruthScene gt =
        generate_scene(basic_spec(Scenario::packed, {2, 2}, 6), models);
    NoiseConfig noise;  // defaults: eta 0.1, sigma 0.5, ...
    noise.seed = 11;
    const PredictionMaps maps = simulate_predictions(gt, noise, 2);
    for (int r = 0; r < maps.height; r += 3)
        for (int c = 0; c < maps.width; c += 3) {
            double sum = 0.0;
            for (int ch = 0; ch <= 2; ++ch) {
                const float p = maps.semantic_at(r, c, ch);
                CHECK(p >= 0.0f);
                CHECK(p <= 1.0f);
                sum += p;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
}

TEST_CASE("simulate_predictions: dropout keeps ~80% of boundary pixels") {
    const std::vector<MeshModel> models = {testutil::make_box(0.06, 0.05, 0.04, 1, 150)};
    const GroundTruthScene gt =
        generate_scene(basic_spec(Scenario::packed, {6}, 8), models);
    NoiseConfig noise = NoiseConfig::noiseless();
    noise.dropout_rate = 0.2;
    noise.seed = 21;
    const PredictionMaps maps = simulate_predictions(gt, noise, 1);

    int total = 0, kept = 0;
    for (std::size_t i = 0; i < gt.boundary_mask.size(); ++i) {
        if (!gt.boundary_mask[i]) continue;
        ++total;
        if (maps.boundary[i] >= 0.5f) ++kept;
    }
    REQUIRE(total > 300);
    CHECK((double)kept / total == doctest::Approx(0.8).epsilon(0.0625));
}

TEST_CASE("simulate_predictions: packed scenes keep every instance visible") {
    const std::vector<MeshModel> models = {testutil::make_box(0.05, 0.05, 0.04, 1, 150)};
    const GroundTruthScene gt =
        generate_scene(basic_spec(Scenario::packed, {9}, 13), models);
    std::set<int> seen;
    for (std::int32_t id : gt.instance_labels)
        if (id >= 0) seen.insert(id);
    CHECK(seen.size() == 9);
}
