#include <doctest.h>

#include <cmath>
#include <set>

#include "mipose/geometry.hpp"
#include "mipose/rng.hpp"
#include "testutil.hpp"

using namespace mipose;
using testutil::kPi;

TEST_CASE("compose: identity and inverse") {
    const RigidTransform id = RigidTransform::identity();
    CHECK(rotation_distance(compose(id, id), id) < 1e-12);
    CHECK(compose(id, id).translation.norm() < 1e-12);

    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const RigidTransform t = testutil::random_transform(rng);
        CHECK(std::abs(t.rotation.norm() - 1.0) < 1e-9);
        const RigidTransform round = compose(t, t.inverse());
        CHECK(rotation_distance(round, id) < 1e-9);
        CHECK(round.translation.norm() < 1e-9);
    }
}

TEST_CASE("compose: pure translations add") {
    const auto t = compose(RigidTransform::translate(1, 0, 0),
                           RigidTransform::translate(0, 2, 0));
    const Vec3 p = t.apply(Vec3::Zero());
    CHECK(p.isApprox(Vec3(1, 2, 0), 1e-12));
}

TEST_CASE("compose: result applies b then a") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const RigidTransform a = testutil::random_transform(rng);
        const RigidTransform b = testutil::random_transform(rng);
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    }
}

TEST_CASE("compute_ppf: orthogonal normals to displacement") {
    const PpfFeature f =
        compute_ppf(Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 0, 1));
    CHECK(f.distance == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.angle_n1_d == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(f.angle_n2_d == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(f.angle_n1_n2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("compute_ppf: antiparallel displacement") {
    // d = p1 - p2 = (0,0,-2); both normals point +z, so both normal-to-d
    // angles are pi and the normals agree.
    const PpfFeature f =
        compute_ppf(Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(0, 0, 2), Vec3(0, 0, 1));
    CHECK(f.distance == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.angle_n1_d == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(f.angle_n2_d == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(f.angle_n1_n2 == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("compute_ppf: degenerate pair") {
    CHECK_THROWS_AS(compute_ppf(Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(0, 0, 0), Vec3(0, 0, 1)),
                    DataError);
}

namespace {

// Independent trigonometric oracle for the raw tuple.
PpfFeature ppf_oracle(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
    const Vec3 d = p1 - p2;
    PpfFeature f;
    f.distance = std::sqrt(d.dot(d));
    const auto ang = [](const Vec3& a, const Vec3& b) {
        const double c = a.dot(b) / (a.norm() * b.norm());
        return std::acos(std::clamp(c, -1.0, 1.0));
    };
    f.angle_n1_d = ang(n1, d);
    f.angle_n2_d = ang(n2, d);
    f.angle_n1_n2 = ang(n1, n2);
    return f;
}

}  // namespace

TEST_CASE("compute_ppf: random pairs against direct trig oracle") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p1(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Vec3 p2 = p1 + 0.1 * testutil::random_unit(rng);
        const Vec3 n1 = testutil::random_unit(rng);
        const Vec3 n2 = testutil::random_unit(rng);
        const PpfFeature a = compute_ppf(p1, n1, p2, n2);
        const PpfFeature b = ppf_oracle(p1, n1, p2, n2);
        CHECK(a.distance == doctest::Approx(b.distance).epsilon(1e-9));
        CHECK(std::abs(a.angle_n1_d - b.angle_n1_d) < 1e-9);
        CHECK(std::abs(a.angle_n2_d - b.angle_n2_d) < 1e-9);
        CHECK(std::abs(a.angle_n1_n2 - b.angle_n1_n2) < 1e-9);
    }
}

TEST_CASE("compute_ppf: argument swap reflects the normal-to-d angles") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p1(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Vec3 p2 = p1 + 0.2 * testutil::random_unit(rng);
        const Vec3 n1 = testutil::random_unit(rng);
        const Vec3 n2 = testutil::random_unit(rng);
        const PpfFeature fwd = compute_ppf(p1, n1, p2, n2);
        const PpfFeature rev = compute_ppf(p2, n2, p1, n1);
        CHECK(rev.distance == doctest::Approx(fwd.distance).epsilon(1e-12));
        CHECK(std::abs(rev.angle_n1_n2 - fwd.angle_n1_n2) < 1e-9);
        CHECK(std::abs(rev.angle_n1_d - (kPi - fwd.angle_n2_d)) < 1e-9);
        CHECK(std::abs(rev.angle_n2_d - (kPi - fwd.angle_n1_d)) < 1e-9);
    }
}

TEST_CASE("compute_ppf: invariant under a common rigid transform") {
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p1(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Vec3 p2 = p1 + 0.3 * testutil::random_unit(rng);
        const Vec3 n1 = testutil::random_unit(rng);
        const Vec3 n2 = testutil::random_unit(rng);
        const RigidTransform g = testutil::random_transform(rng);
        const PpfFeature a = compute_ppf(p1, n1, p2, n2);
        const PpfFeature b = compute_ppf(g.apply(p1), g.rotate(n1), g.apply(p2), g.rotate(n2));
        CHECK(b.distance == doctest::Approx(a.distance).epsilon(1e-9));
        CHECK(std::abs(b.angle_n1_d - a.angle_n1_d) < 1e-9);
        CHECK(std::abs(b.angle_n2_d - a.angle_n2_d) < 1e-9);
        CHECK(std::abs(b.angle_n1_n2 - a.angle_n1_n2) < 1e-9);
    }
}

TEST_CASE("build_ppf_table: two-point model holds both orderings") {
    const MeshModel model = testutil::make_point_model({Vec3(0, 0, 0), Vec3(0.1, 0, 0)});
    const PpfTable table = build_ppf_table(model, 10, PpfQuantization{0.01, 0.2});
    std::size_t entries = 0;
    std::set<std::pair<int, int>> pairs;
    for (const auto& [key, list] : table.entries) {
        entries += list.size();
        for (const auto& p : list) pairs.insert(p);
    }
    CHECK(entries == 2);
    CHECK(pairs.count({0, 1}) == 1);
    CHECK(pairs.count({1, 0}) == 1);
}

TEST_CASE("build_ppf_table: self-lookup finds every sampled pair") {
    const MeshModel model = testutil::make_box(0.08, 0.06, 0.04, 1, 120);
    const PpfQuantization quant = PpfQuantization::for_diameter(model.diameter);
    const PpfTable table = build_ppf_table(model, 120, quant);
    REQUIRE(table.points.size() >= 20);

    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const int i = (int)rng.uniform_index(table.points.size());
        int j = (int)rng.uniform_index(table.points.size());
        if (i == j) j = (j + 1) % (int)table.points.size();
        const PpfFeature f =
            compute_ppf(table.points[i], table.normals[i], table.points[j], table.normals[j]);
        const auto* entries = table.lookup(quantize_ppf(f, quant));
        REQUIRE(entries != nullptr);
        bool found = false;
        for (const auto& [a, b] : *entries)
            if (a == i && b == j) found = true;
        CHECK(found);
    }
}

TEST_CASE("build_ppf_table: deterministic") {
    const MeshModel model = testutil::make_box(0.08, 0.06, 0.04, 1, 80);
    const PpfQuantization quant = PpfQuantization::for_diameter(model.diameter);
    const PpfTable a = build_ppf_table(model, 80, quant);
    const PpfTable b = build_ppf_table(model, 80, quant);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i)
        CHECK(a.points[i] == b.points[i]);
    CHECK(a.entries.size() == b.entries.size());
}

TEST_CASE("build_ppf_table: empty model rejected") {
    const MeshModel one = testutil::make_point_model({Vec3(0, 0, 0)});
    CHECK_THROWS_AS(build_ppf_table(one, 10, PpfQuantization{0.01, 0.2}), DataError);
}

TEST_CASE("model_diameter: cube diagonal and two points") {
    const MeshModel cube = testutil::make_box(1, 1, 1, 1, 50);
    CHECK(cube.diameter == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(model_diameter({Vec3(0, 0, 0), Vec3(5, 0, 0)}) == doctest::Approx(5.0));
    CHECK_THROWS_AS(model_diameter({Vec3(0, 0, 0)}), DataError);
}

TEST_CASE("model_diameter: random cloud against O(n^2) oracle") {
    Rng rng(17);
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i)
        pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double oracle = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j)
            oracle = std::max(oracle, (pts[i] - pts[j]).norm());
    CHECK(model_diameter(pts) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("adi_distance: zero for identical poses") {
    const MeshModel box = testutil::make_box(0.08, 0.06, 0.04, 1, 200);
    Rng rng(19);
    for (int i = 0; i < 10; ++i) {
        const RigidTransform t = testutil::random_transform(rng);
        CHECK(adi_distance(t, t, box) < 1e-12);
    }
}

TEST_CASE("adi_distance: single-point model, unit translation") {
    const MeshModel pt = testutil::make_point_model({Vec3(0, 0, 0)});
    CHECK(adi_distance(RigidTransform::identity(), RigidTransform::translate(1, 0, 0), pt) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adi_distance: cube vertex set maps to itself under 90-degree turn") {
    std::vector<Vec3> corners;
    for (int x : {-1, 1})
        for (int y : {-1, 1})
            for (int z : {-1, 1}) corners.emplace_back(0.5 * x, 0.5 * y, 0.5 * z);
    const MeshModel cube = testutil::make_point_model(corners);
    const RigidTransform quarter = RigidTransform::from_axis_angle(Vec3(0, 0, 1), kPi / 2);
    CHECK(adi_distance(RigidTransform::identity(), quarter, cube) < 1e-12);
}

TEST_CASE("adi_distance: left-invariance under a common camera-frame motion") {
    const MeshModel box = testutil::make_box(0.08, 0.06, 0.04, 1, 200);
    Rng rng(23);
    for (int i = 0; i < 15; ++i) {
        const RigidTransform t1 = testutil::random_transform(rng, 0.1);
        const RigidTransform t2 = testutil::random_transform(rng, 0.1);
        const RigidTransform g = testutil::random_transform(rng, 0.5);
        const double base = adi_distance(t1, t2, box);
        const double moved = adi_distance(compose(g, t1), compose(g, t2), box);
        CHECK(moved == doctest::Approx(base).epsilon(1e-6));
    }
}

TEST_CASE("adi_distance: bounded by the matched-point average") {
    const MeshModel box = testutil::make_box(0.08, 0.06, 0.04, 1, 150);
    Rng rng(29);
    for (int i = 0; i < 15; ++i) {
        const RigidTransform t1 = testutil::random_transform(rng, 0.1);
        const RigidTransform t2 = testutil::random_transform(rng, 0.1);
        const double adi = adi_distance(t1, t2, box);
        CHECK(adi >= 0.0);
        double matched = 0.0;
        for (const Vec3& p : box.samples.points)
            matched += (t1.apply(p) - t2.apply(p)).norm();
        matched /= (double)box.samples.points.size();
        CHECK(adi <= matched + 1e-12);
    }
}

TEST_CASE("MeshModel: invariants at construction") {
    const MeshModel box = testutil::make_box(0.1, 0.1, 0.1, 2);
    for (const Vec3& n : box.vertex_normals)
        CHECK(std::abs(n.norm() - 1.0) < 1e-6);
    REQUIRE(!box.symmetry_group.empty());
    CHECK(rotation_distance(box.symmetry_group[0], RigidTransform::identity()) < 1e-12);
    CHECK(box.watertight);

    CHECK_THROWS_AS(
        MeshModel::create({Vec3(0, 0, 0)}, {}, {Vec3(0, 0, 2)}, 1),  // non-unit normal
        DataError);
}

TEST_CASE("NeighborGrid: exact nearest distances") {
    Rng rng(31);
    std::vector<Vec3> pts;
    for (int i = 0; i < 300; ++i)
        pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const NeighborGrid grid(pts, 0.17);
    for (int q = 0; q < 100; ++q) {
        const Vec3 query(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                         rng.uniform(-1.5, 1.5));
        double brute = 1e30;
        for (const Vec3& p : pts) brute = std::min(brute, (p - query).norm());
        CHECK(grid.min_distance(query) == doctest::Approx(brute).epsilon(1e-12));
        CHECK(grid.any_within(query, brute + 1e-9));
        CHECK(!grid.any_within(query, brute - 1e-9));
    }
}
