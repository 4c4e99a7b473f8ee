#include "mipose/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mipose/rng.hpp"
#include "mipose/select.hpp"

namespace mipose {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

struct Extents {
    Vec3 lo, hi;
};

Extents rotated_extents(const MeshModel& m, const Quat& q) {
    Extents e{Vec3::Constant(1e30), Vec3::Constant(-1e30)};
    for (const Vec3& v : m.vertices) {
        const Vec3 p = q * v;
        e.lo = e.lo.cwiseMin(p);
        e.hi = e.hi.cwiseMax(p);
    }
    return e;
}

Quat random_rotation(Rng& rng) {
    // Shoemake's uniform quaternion sampling.
    const double u1 = rng.uniform01(), u2 = rng.uniform01(), u3 = rng.uniform01();
    const double two_pi = 6.283185307179586;
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    return Quat(a * std::sin(two_pi * u2), a * std::cos(two_pi * u2),
                b * std::sin(two_pi * u3), b * std::cos(two_pi * u3))
        .normalized();
}

Quat jitter_rotation(Rng& rng, double max_angle_rad) {
    if (max_angle_rad <= 0) return Quat::Identity();
    Vec3 axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (axis.norm() < 1e-9) axis = Vec3(0, 0, 1);
    return Quat(Eigen::AngleAxisd(rng.uniform01() * max_angle_rad, axis.normalized()));
}

double default_epsilon_v(std::span<const MeshModel> models) {
    double vmin = 1e30;
    for (const auto& m : models) vmin = std::min(vmin, std::abs(m.signed_volume()));
    return 0.03 * vmin;
}

std::vector<Placement> place_packed(const SceneSpec& spec, std::span<const MeshModel> models,
                                    Rng& rng) {
    int total = 0;
    for (int c : spec.counts) total += c;
    std::vector<Placement> placements;
    if (total == 0) return placements;

    const double ex = spec.bin_extent.x(), ey = spec.bin_extent.y();
    int cols = std::max(1, (int)std::lround(std::sqrt(total * ex / std::max(ey, 1e-9))));
    int rows = (total + cols - 1) / cols;
    while (rows * cols < total) ++cols;
    const double cell_x = ex / cols, cell_y = ey / rows;
    const double floor_z = spec.bin_distance + spec.bin_extent.z();

    int slot = 0;
    for (std::size_t k = 0; k < models.size(); ++k) {
        const MeshModel& model = models[k];
        const Extents e0 = rotated_extents(model, Quat::Identity());
        const double foot_x = e0.hi.x() - e0.lo.x();
        const double foot_y = e0.hi.y() - e0.lo.y();
        if (foot_x > cell_x + 1e-12 || foot_y > cell_y + 1e-12)
            throw DataError("generate_scene: bin too small for requested count of class " +
                            std::to_string(model.class_id));
        // Jitter bounded by the free slack so neighbors cannot interpenetrate.
        const double slack = std::min(cell_x - foot_x, cell_y - foot_y);
        const double trans_jitter = std::min(0.002, slack / 4.0);
        const double rot_jitter =
            std::min(2.0 * kDeg, std::asin(std::clamp(slack / (2.0 * model.diameter), 0.0, 1.0)));

        for (int inst = 0; inst < spec.counts[k]; ++inst, ++slot) {
            const int col = slot % cols, row = slot / cols;
            const Quat q = jitter_rotation(rng, rot_jitter);
            const Extents e = rotated_extents(model, q);
            const double x = -ex / 2 + (col + 0.5) * cell_x + rng.uniform(-1, 1) * trans_jitter;
            const double y = -ey / 2 + (row + 0.5) * cell_y + rng.uniform(-1, 1) * trans_jitter;
            const double z = floor_z - e.hi.z() - std::abs(rng.uniform(-1, 1)) * trans_jitter;
            placements.push_back(
                {model.class_id, inst, RigidTransform(q, Vec3(x, y, z))});
        }
    }
    return placements;
}

std::vector<Placement> place_pile(const SceneSpec& spec, std::span<const MeshModel> models,
                                  Rng& rng, double epsilon_v) {
    std::vector<Placement> placements;
    std::vector<const MeshModel*> placed_models;
    const double floor_z = spec.bin_distance + spec.bin_extent.z();

    for (std::size_t k = 0; k < models.size(); ++k) {
        const MeshModel& model = models[k];
        for (int inst = 0; inst < spec.counts[k]; ++inst) {
            bool placed = false;
            for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
                const Quat q = random_rotation(rng);
                const Extents e = rotated_extents(model, q);
                const double margin_x = (e.hi.x() - e.lo.x()) / 2;
                const double margin_y = (e.hi.y() - e.lo.y()) / 2;
                if (2 * margin_x > spec.bin_extent.x() || 2 * margin_y > spec.bin_extent.y())
                    continue;
                const double cx_lo = -spec.bin_extent.x() / 2 + margin_x;
                const double cx_hi = spec.bin_extent.x() / 2 - margin_x;
                const double cy_lo = -spec.bin_extent.y() / 2 + margin_y;
                const double cy_hi = spec.bin_extent.y() / 2 - margin_y;
                const double x = rng.uniform(cx_lo, cx_hi) - (e.hi.x() + e.lo.x()) / 2;
                const double y = rng.uniform(cy_lo, cy_hi) - (e.hi.y() + e.lo.y()) / 2;

                double z = spec.bin_distance - e.lo.z();
                const double z_rest = floor_z - e.hi.z();
                const double step = model.diameter / 20.0;
                const auto collides = [&](double zc) {
                    const RigidTransform cand(q, Vec3(x, y, zc));
                    for (std::size_t p = 0; p < placements.size(); ++p) {
                        const OverlapResult o = pairwise_overlap_volume(
                            model, cand, *placed_models[p], placements[p].pose,
                            std::min(model.diameter, placed_models[p]->diameter) / 20.0);
                        if (o.volume > epsilon_v) return true;
                    }
                    return false;
                };
                bool hit = false;
                while (z + step <= z_rest) {
                    if (collides(z + step)) {
                        hit = true;
                        break;
                    }
                    z += step;
                }
                if (!hit) z = z_rest;  // settled on the bin floor
                if (collides(z)) continue;
                placements.push_back({model.class_id, inst, RigidTransform(q, Vec3(x, y, z))});
                placed_models.push_back(&model);
                placed = true;
            }
            if (!placed)
                throw DataError("generate_scene: could not place instance of class " +
                                std::to_string(model.class_id));
        }
    }
    return placements;
}

}  // namespace

void SceneSpec::validate(std::size_t num_models) const {
    if (counts.size() != num_models)
        throw DataError("SceneSpec: counts must match the model list");
    for (int c : counts)
        if (c < 1) throw DataError("SceneSpec: counts must be >= 1 per listed class");
    if ((bin_extent.array() <= 0).any()) throw DataError("SceneSpec: bin extent must be positive");
    cam.validate();
}

GroundTruthScene generate_scene(const SceneSpec& spec, std::span<const MeshModel> models,
                                double epsilon_v) {
    spec.validate(models.size());
    Rng rng = Rng::seeded(spec.seed, 0x5ce2eULL);
    const double eps_v = epsilon_v >= 0 ? epsilon_v : default_epsilon_v(models);

    std::vector<Placement> placements = spec.scenario == Scenario::packed
                                            ? place_packed(spec, models, rng)
                                            : place_pile(spec, models, rng, eps_v);

    std::map<int, const MeshModel*> by_class;
    for (const auto& m : models) by_class[m.class_id] = &m;

    std::vector<PlacedModel> placed;
    placed.reserve(placements.size());
    for (const auto& p : placements) placed.push_back({by_class.at(p.class_id), p.pose});

    // Pairwise overlap tolerance holds for every generated scene.
    for (std::size_t i = 0; i + 1 < placed.size(); ++i)
        for (std::size_t j = i + 1; j < placed.size(); ++j) {
            const OverlapResult o = pairwise_overlap_volume(
                *placed[i].model, placed[i].pose, *placed[j].model, placed[j].pose);
            if (o.volume > eps_v * (1.0 + 1e-6))
                throw InvariantError("generate_scene: placement overlap exceeds epsilon_v");
        }

    GroundTruthScene gt;
    gt.seed = spec.seed;
    gt.cam = spec.cam;
    SceneRender render = render_scene_depth(placed, spec.cam);
    gt.depth = std::move(render.depth);
    gt.class_labels = std::move(render.class_ids);
    gt.instance_labels = std::move(render.instance_ids);
    gt.boundary_mask = std::move(render.boundary_mask);
    gt.placements = std::move(placements);

    if (spec.scenario == Scenario::packed) {
        std::vector<int> visible(gt.placements.size(), 0);
        for (std::int32_t id : gt.instance_labels)
            if (id >= 0) visible[id] = 1;
        for (std::size_t i = 0; i < visible.size(); ++i)
            if (!visible[i])
                throw InvariantError("generate_scene: packed instance " + std::to_string(i) +
                                     " is not visible");
    }
    return gt;
}

int PredictionMaps::label_at(int row, int col) const {
    int best = 0;
    float best_p = semantic_at(row, col, 0);
    for (int ch = 1; ch <= num_classes; ++ch) {
        const float p = semantic_at(row, col, ch);
        if (p > best_p) {
            best_p = p;
            best = ch;
        }
    }
    return best;
}

PredictionMaps simulate_predictions(const GroundTruthScene& gt, const NoiseConfig& noise,
                                    int num_classes) {
    const int w = gt.depth.width, h = gt.depth.height;
    PredictionMaps maps;
    maps.width = w;
    maps.height = h;
    maps.num_classes = num_classes;
    maps.semantic.assign(std::size_t(num_classes + 1) * w * h, 0.0f);
    maps.boundary.assign(std::size_t(w) * h, 0.0f);

    Rng rng = Rng::seeded(noise.seed, 0x9a95ULL);
    const int channels = num_classes + 1;
    std::vector<double> p(channels);

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int label = gt.class_labels[std::size_t(r) * w + c];
            for (int ch = 0; ch < channels; ++ch) {
                p[ch] = (ch == label ? 1.0 : 0.0);
                if (noise.eta_sem > 0)
                    p[ch] = (1.0 - noise.eta_sem) * p[ch] + noise.eta_sem / channels;
            }
            if (noise.sigma_sem > 0) {
                double mx = -1e30;
                for (int ch = 0; ch < channels; ++ch) {
                    p[ch] = std::log(std::max(p[ch], 1e-12)) +
                            noise.sigma_sem * rng.gaussian();
                    mx = std::max(mx, p[ch]);
                }
                double sum = 0;
                for (int ch = 0; ch < channels; ++ch) {
                    p[ch] = std::exp(p[ch] - mx);
                    sum += p[ch];
                }
                for (int ch = 0; ch < channels; ++ch) p[ch] /= sum;
            }
            for (int ch = 0; ch < channels; ++ch)
                maps.semantic_at(r, c, ch) = static_cast<float>(p[ch]);
        }
    }

    // Boundary: dropout on the true mask, then a ramped dilation, then
    // speckle.
    std::vector<std::uint8_t> surviving(gt.boundary_mask.size(), 0);
    for (std::size_t i = 0; i < gt.boundary_mask.size(); ++i)
        if (gt.boundary_mask[i])
            surviving[i] = (noise.dropout_rate > 0 && rng.uniform01() < noise.dropout_rate)
                               ? 0
                               : 1;
    const int rad = std::max(0, noise.dilate_radius);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!surviving[std::size_t(r) * w + c]) continue;
            for (int dr = -rad; dr <= rad; ++dr)
                for (int dc = -rad; dc <= rad; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    const int cheb = std::max(std::abs(dr), std::abs(dc));
                    const float v = 1.0f - float(cheb) / float(rad + 1);
                    maps.boundary_at(rr, cc) = std::max(maps.boundary_at(rr, cc), v);
                }
        }
    if (noise.speckle_rate > 0)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                if (rng.uniform01() < noise.speckle_rate) maps.boundary_at(r, c) = 1.0f;

    return maps;
}

}  // namespace mipose
