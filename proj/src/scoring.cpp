#include "mipose/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace mipose {

// ---------------------------------------------------------------------------
// Distance transform (Felzenszwalb & Huttenlocher, exact squared EDT)

namespace {

void dt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
           std::vector<double>& z) {
    const int n = (int)f.size();
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * (double)(q - v[k]) + f[v[k]];
    }
}

}  // namespace

std::vector<float> distance_transform(const PixelMask& mask, int width, int height) {
    const double inf = 1e18;
    std::vector<double> grid(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) grid[i] = mask[i] ? 0.0 : inf;

    std::vector<double> f(std::max(width, height)), d(std::max(width, height));
    std::vector<int> v(std::max(width, height));
    std::vector<double> z(std::max(width, height) + 1);

    // Columns.
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) f[r] = grid[std::size_t(r) * width + c];
        f.resize(height);
        d.resize(height);
        dt_1d(f, d, v, z);
        for (int r = 0; r < height; ++r) grid[std::size_t(r) * width + c] = d[r];
        f.resize(std::max(width, height));
        d.resize(std::max(width, height));
    }
    // Rows.
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) f[c] = grid[std::size_t(r) * width + c];
        f.resize(width);
        d.resize(width);
        dt_1d(f, d, v, z);
        for (int c = 0; c < width; ++c) grid[std::size_t(r) * width + c] = d[c];
        f.resize(std::max(width, height));
        d.resize(std::max(width, height));
    }

    std::vector<float> out(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        out[i] = grid[i] >= inf ? std::numeric_limits<float>::infinity()
                                : (float)std::sqrt(grid[i]);
    return out;
}

SceneObservation prepare_observation(const PredictionMaps& maps, const DepthImage& depth,
                                     const CameraIntrinsics& cam,
                                     const FeatureParams& params) {
    SceneObservation obs;
    obs.depth = &depth;
    obs.maps = &maps;
    obs.normals = normals_from_depth(depth, cam);
    obs.sb_mask.assign(std::size_t(maps.width) * maps.height, 0);
    for (int r = 0; r < maps.height; ++r)
        for (int c = 0; c < maps.width; ++c)
            obs.sb_mask[std::size_t(r) * maps.width + c] =
                maps.boundary_at(r, c) >= params.sb_threshold ? 1 : 0;
    obs.sb_distance = distance_transform(obs.sb_mask, maps.width, maps.height);
    for (float& v : obs.sb_distance) v = std::min(v, (float)params.delta_b);
    return obs;
}

AlignmentFeatures compute_features(const RigidTransform& pose, const MeshModel& model,
                                   const SceneObservation& obs, const CameraIntrinsics& cam,
                                   const FeatureParams& params) {
    AlignmentFeatures out;
    const RenderResult render = render_depth(model, pose, cam);
    const int visible = render.visible_count();
    if (visible == 0) return out;

    const DepthImage& observed = *obs.depth;
    const PredictionMaps& maps = *obs.maps;
    const int w = cam.width;

    int boundary = 0, boundary_on_sb = 0, visible_on_sb = 0, depth_aligned = 0;
    double f4 = 0.0, f5 = 0.0;
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t i = std::size_t(r) * w + c;
            if (!render.visible_mask[i]) continue;
            const bool on_sb = obs.sb_mask[i] != 0;
            if (on_sb) ++visible_on_sb;

            const double d_model = render.depth.at(r, c);
            const double d_obs = observed.at(r, c);
            const bool has_obs = d_obs > 0.0;
            const double depth_diff = has_obs ? std::abs(d_model - d_obs) : 0.0;
            if (has_obs && depth_diff < params.delta_s) ++depth_aligned;

            // f4: label-weighted surface similarity, floored at zero.
            if (has_obs && obs.normals.valid[i]) {
                const double clipped = std::min(depth_diff, params.delta_s);
                const double dot = render.normals[i].dot(obs.normals.normals[i]);
                const double sim = (1.0 - clipped / params.delta_s) * dot;
                if (sim > 0)
                    f4 += maps.semantic_at(r, c, model.class_id) * sim;
            }

            if (render.boundary_mask[i]) {
                ++boundary;
                if (on_sb) ++boundary_on_sb;
                f5 += 1.0 - std::min((double)obs.sb_distance[i], params.delta_b) /
                                params.delta_b;
            }
        }
    }

    out.f1 = boundary > 0 ? (double)boundary_on_sb / boundary : 0.0;
    out.f2 = visible_on_sb > 0 ? (double)boundary_on_sb / visible_on_sb : 0.0;
    out.f3 = (double)depth_aligned / visible;
    out.f4 = f4;
    out.f5 = f5;
    return out;
}

AlignmentFeatures compute_features(const RigidTransform& pose, const MeshModel& model,
                                   const PredictionMaps& maps, const DepthImage& observed,
                                   const CameraIntrinsics& cam, const FeatureParams& params) {
    return compute_features(pose, model, prepare_observation(maps, observed, cam, params),
                            cam, params);
}

// ---------------------------------------------------------------------------
// GBRT

double RegressionTree::predict(const std::array<double, 5>& f) const {
    int node = 0;
    while (!nodes[node].is_leaf())
        node = f[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                               : nodes[node].right;
    return nodes[node].value;
}

double TreeEnsemble::predict(const std::array<double, 5>& f) const {
    double y = initial;
    for (const RegressionTree& tree : trees) y += learning_rate * tree.predict(f);
    return y;
}

double TreeEnsemble::predict(const AlignmentFeatures& f) const { return predict(f.as_array()); }

namespace {

struct TreeBuilder {
    const std::vector<std::array<double, 5>>& x;
    const std::vector<double>& residual;
    const GbrtParams& params;
    RegressionTree tree;

    int build(std::vector<int>& indices, int depth) {
        double sum = 0.0;
        for (int i : indices) sum += residual[i];
        const double mean = indices.empty() ? 0.0 : sum / indices.size();

        TreeNode node;
        node.value = mean;
        const int node_id = (int)tree.nodes.size();
        tree.nodes.push_back(node);

        if (depth >= params.max_depth || (int)indices.size() < 2 * params.min_leaf)
            return node_id;

        // Greedy variance-reduction split; ties resolved toward the lowest
        // feature index, then the lowest threshold.
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_sse = std::numeric_limits<double>::infinity();
        std::vector<int> order = indices;
        for (int feature = 0; feature < 5; ++feature) {
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                return x[a][feature] < x[b][feature];
            });
            double left_sum = 0.0, left_sq = 0.0;
            double total_sq = 0.0;
            for (int i : order) {
                total_sq += residual[i] * residual[i];
            }
            const int n = (int)order.size();
            for (int k = 0; k + 1 < n; ++k) {
                const int i = order[k];
                left_sum += residual[i];
                left_sq += residual[i] * residual[i];
                const double a = x[i][feature];
                const double b = x[order[k + 1]][feature];
                if (a == b) continue;  // can't split between equal values
                const int n_left = k + 1, n_right = n - n_left;
                if (n_left < params.min_leaf || n_right < params.min_leaf) continue;
                const double right_sum = sum - left_sum;
                const double sse = (left_sq - left_sum * left_sum / n_left) +
                                   ((total_sq - left_sq) - right_sum * right_sum / n_right);
                const double threshold = (a + b) / 2.0;
                if (sse < best_sse - 1e-15 ||
                    (std::abs(sse - best_sse) <= 1e-15 &&
                     (feature < best_feature ||
                      (feature == best_feature && threshold < best_threshold)))) {
                    best_sse = sse;
                    best_feature = feature;
                    best_threshold = threshold;
                }
            }
        }
        if (best_feature < 0) return node_id;

        std::vector<int> left, right;
        for (int i : indices)
            (x[i][best_feature] <= best_threshold ? left : right).push_back(i);
        if ((int)left.size() < params.min_leaf || (int)right.size() < params.min_leaf)
            return node_id;

        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        tree.nodes[node_id].left = build(left, depth + 1);
        tree.nodes[node_id].right = build(right, depth + 1);
        return node_id;
    }
};

double mse_of(const TreeEnsemble& ensemble, std::span<const TrainingSample> samples) {
    if (samples.empty()) return -1.0;
    double sum = 0.0;
    for (const TrainingSample& s : samples) {
        const double e = ensemble.predict(s.features) - s.target;
        sum += e * e;
    }
    return sum / samples.size();
}

}  // namespace

TreeEnsemble train_gbrt(std::span<const TrainingSample> samples, const GbrtParams& params,
                        std::span<const TrainingSample> holdout,
                        std::vector<TrainingLogRow>* log) {
    if (samples.empty()) throw DataError("train_gbrt: empty sample set");
    if ((int)samples.size() < params.min_leaf)
        throw DataError("train_gbrt: fewer samples than min_leaf");

    std::vector<std::array<double, 5>> x(samples.size());
    std::vector<double> y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        x[i] = samples[i].features.as_array();
        y[i] = samples[i].target;
    }

    TreeEnsemble ensemble;
    ensemble.learning_rate = params.learning_rate;
    ensemble.initial = std::accumulate(y.begin(), y.end(), 0.0) / y.size();

    std::vector<double> prediction(samples.size(), ensemble.initial);
    std::vector<double> residual(samples.size());
    std::vector<int> all(samples.size());
    std::iota(all.begin(), all.end(), 0);

    for (int round = 0; round < params.n_trees; ++round) {
        for (std::size_t i = 0; i < samples.size(); ++i) residual[i] = y[i] - prediction[i];
        TreeBuilder builder{x, residual, params, {}};
        std::vector<int> indices = all;
        builder.build(indices, 0);
        ensemble.trees.push_back(std::move(builder.tree));
        const RegressionTree& tree = ensemble.trees.back();
        double train_sse = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            prediction[i] += params.learning_rate * tree.predict(x[i]);
            const double e = y[i] - prediction[i];
            train_sse += e * e;
        }
        if (log)
            log->push_back({round + 1, train_sse / samples.size(),
                            holdout.empty() ? -1.0 : mse_of(ensemble, holdout)});
    }
    return ensemble;
}

std::pair<double, double> predict_quality(const TreeEnsemble& ensemble,
                                          const AlignmentFeatures& features,
                                          double acceptance_radius) {
    const double adi = ensemble.predict(features);
    const double score =
        acceptance_radius > 0 ? std::max(0.0, 1.0 - adi / acceptance_radius) : 0.0;
    return {adi, score};
}

// ---------------------------------------------------------------------------

std::vector<TrainingSample> build_training_set(std::span<const SceneSample> scenes,
                                               std::span<const ModelContext> models,
                                               const TrainingSetOptions& options) {
    std::vector<TrainingSample> out;
    for (const SceneSample& scene : scenes) {
        const GroundTruthScene& gt = *scene.gt;
        const HypothesisSet hyps =
            generate_hypotheses(*scene.maps, gt.depth, gt.cam, models, options.hypgen,
                                gt.seed ^ options.seed);
        const SceneObservation obs =
            prepare_observation(*scene.maps, gt.depth, gt.cam, options.features);

        for (const ModelContext& ctx : models) {
            const MeshModel& model = *ctx.model;
            std::vector<AdiTarget> targets;
            for (const Placement& p : gt.placements)
                if (p.class_id == model.class_id) targets.emplace_back(p.pose, model);
            if (targets.empty()) {
                std::cerr << "build_training_set: scene " << scene.scene_id
                          << " has no instances of class " << model.class_id
                          << "; skipping\n";
                continue;
            }
            const ClassHypotheses* entry = hyps.for_class(model.class_id);
            if (!entry) continue;
            for (const PoseHypothesis& hyp : entry->hypotheses) {
                TrainingSample sample;
                sample.features =
                    compute_features(hyp.pose, model, obs, gt.cam, options.features);
                double best = std::numeric_limits<double>::infinity();
                for (const AdiTarget& target : targets)
                    best = std::min(best, target.distance_from(hyp.pose));
                sample.target = best;
                sample.scene_id = scene.scene_id;
                sample.class_id = model.class_id;
                out.push_back(sample);
            }
        }
    }
    return out;
}

}  // namespace mipose
