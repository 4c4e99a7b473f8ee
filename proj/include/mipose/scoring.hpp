#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/hypgen.hpp"
#include "mipose/render.hpp"
#include "mipose/scenegen.hpp"

namespace mipose {

struct AlignmentFeatures {
    double f1 = 0.0;  // model boundary pixels matching the predicted boundary
    double f2 = 0.0;  // predicted-boundary pixels inside V(T) that lie on B(T)
    double f3 = 0.0;  // depth-aligned fraction of V(T)
    double f4 = 0.0;  // label-weighted surface alignment sum over V(T)
    double f5 = 0.0;  // boundary-distance alignment sum over B(T)

    std::array<double, 5> as_array() const { return {f1, f2, f3, f4, f5}; }
};

struct FeatureParams {
    double delta_s = 0.005;    // surface matching threshold, meters
    double delta_b = 10.0;     // boundary matching threshold, pixels
    double sb_threshold = 0.5;  // P_B cut for the predicted boundary set S_B
};

/// Per-scene precomputation shared by every hypothesis: observed normals,
/// the thresholded boundary set S_B and its Euclidean distance transform.
struct SceneObservation {
    const DepthImage* depth = nullptr;
    const PredictionMaps* maps = nullptr;
    NormalImage normals;
    PixelMask sb_mask;
    std::vector<float> sb_distance;  // pixels; clipped to delta_b
};

SceneObservation prepare_observation(const PredictionMaps& maps, const DepthImage& depth,
                                     const CameraIntrinsics& cam, const FeatureParams& params);

/// Exact Euclidean distance transform (squared-parabola two-pass); distances
/// in pixels to the nearest set pixel, infinity when the mask is empty.
std::vector<float> distance_transform(const PixelMask& mask, int width, int height);

AlignmentFeatures compute_features(const RigidTransform& pose, const MeshModel& model,
                                   const SceneObservation& obs, const CameraIntrinsics& cam,
                                   const FeatureParams& params);

/// Convenience variant that builds the per-scene observation internally.
AlignmentFeatures compute_features(const RigidTransform& pose, const MeshModel& model,
                                   const PredictionMaps& maps, const DepthImage& observed,
                                   const CameraIntrinsics& cam, const FeatureParams& params);

// ---------------------------------------------------------------------------
// Gradient boosted regression trees

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const std::array<double, 5>& f) const;
};

struct TreeEnsemble {
    double initial = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;

    double predict(const AlignmentFeatures& f) const;
    double predict(const std::array<double, 5>& f) const;
};

struct TrainingSample {
    AlignmentFeatures features;
    double target = 0.0;  // e_ADI to the closest same-class ground-truth pose
    int scene_id = 0;
    int class_id = 0;
};

struct GbrtParams {
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_leaf = 5;
};

struct TrainingLogRow {
    int round = 0;
    double train_mse = 0.0;
    double holdout_mse = -1.0;  // -1 when no holdout set was given
};

/// Least-squares gradient boosting over f1..f5. Split ties break toward the
/// lowest feature index, then the lowest threshold; training is fully
/// deterministic. Throws DataError on an empty sample set.
TreeEnsemble train_gbrt(std::span<const TrainingSample> samples, const GbrtParams& params,
                        std::span<const TrainingSample> holdout = {},
                        std::vector<TrainingLogRow>* log = nullptr);

/// (predicted ADI, selection score). The score maps the regressed distance
/// to a quality in [0, 1]: max(0, 1 - adi / acceptance_radius), so that
/// maximizing total score prefers poses within the acceptance radius
/// k_l * d_l.
std::pair<double, double> predict_quality(const TreeEnsemble& ensemble,
                                          const AlignmentFeatures& features,
                                          double acceptance_radius);

// ---------------------------------------------------------------------------
// Training-set construction

struct SceneSample {
    const GroundTruthScene* gt = nullptr;
    const PredictionMaps* maps = nullptr;
    int scene_id = 0;
};

struct TrainingSetOptions {
    HypgenConfig hypgen;
    FeatureParams features;
    std::uint64_t seed = 0;
};

/// Runs hypothesis generation on every scene, computes features per
/// hypothesis and targets as the ADI distance to the nearest same-class
/// ground-truth instance. Scenes missing a class are skipped for that class
/// with a warning on stderr.
std::vector<TrainingSample> build_training_set(std::span<const SceneSample> scenes,
                                               std::span<const ModelContext> models,
                                               const TrainingSetOptions& options);

}  // namespace mipose
