#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/render.hpp"

namespace mipose {

enum class Scenario { packed, pile };

/// Describes a synthetic scene to generate. Models are owned by the caller
/// and referenced per class; `counts[k]` instances of `models[k]` are placed.
/// The bin sits in front of the camera: its near face at `bin_distance`
/// along +z, centered on the optical axis, axes aligned with the camera.
struct SceneSpec {
    std::vector<int> counts;
    Scenario scenario = Scenario::packed;
    Vec3 bin_extent = Vec3(0.40, 0.30, 0.20);
    double bin_distance = 0.55;
    std::uint64_t seed = 0;
    CameraIntrinsics cam;

    void validate(std::size_t num_models) const;
};

struct Placement {
    int class_id = 0;
    int instance_id = 0;
    RigidTransform pose;  // model -> camera frame (T^g)
};

struct GroundTruthScene {
    std::vector<Placement> placements;
    DepthImage depth;
    std::vector<std::int32_t> class_labels;
    std::vector<std::int32_t> instance_labels;  // -1 = background
    PixelMask boundary_mask;
    CameraIntrinsics cam;
    std::uint64_t seed = 0;
};

/// Per-pixel class probabilities (channel 0 = background, channel k = class
/// k) and boundary probability, channel-major storage.
struct PredictionMaps {
    int width = 0;
    int height = 0;
    int num_classes = 0;  // K; semantic has K+1 channels

    std::vector<float> semantic;  // (K+1) * height * width
    std::vector<float> boundary;  // height * width

    float semantic_at(int row, int col, int channel) const {
        return semantic[(std::size_t(channel) * height + row) * width + col];
    }
    float& semantic_at(int row, int col, int channel) {
        return semantic[(std::size_t(channel) * height + row) * width + col];
    }
    float boundary_at(int row, int col) const {
        return boundary[std::size_t(row) * width + col];
    }
    float& boundary_at(int row, int col) {
        return boundary[std::size_t(row) * width + col];
    }
    /// argmax over channels, as a class id (0 = background).
    int label_at(int row, int col) const;
};

/// Noise model for the simulated semantic/boundary predictions.
struct NoiseConfig {
    double eta_sem = 0.1;     // mix weight toward the uniform distribution
    double sigma_sem = 0.5;   // per-pixel logit noise
    int dilate_radius = 1;    // boundary ramp radius r (pixels)
    double speckle_rate = 0.02;   // false-positive boundary pixels
    double dropout_rate = 0.1;    // false-negative rate on true boundary pixels
    std::uint64_t seed = 1;

    static NoiseConfig noiseless() { return {0.0, 0.0, 0, 0.0, 0.0, 0}; }
};

/// Deterministic scene synthesis. Packed scenes use grid placement with
/// small pose jitter; pile scenes drop instances with random orientation and
/// settle them on first contact. Throws DataError when the requested counts
/// cannot be placed.
GroundTruthScene generate_scene(const SceneSpec& spec, std::span<const MeshModel> models,
                                double epsilon_v = -1.0);

/// Simulated CNN output for a ground-truth scene: smoothed/noised class
/// probabilities and a ramped/dropout-noised boundary map. With an all-zero
/// config the semantic maps are exactly one-hot and the boundary map equals
/// the ground-truth mask.
PredictionMaps simulate_predictions(const GroundTruthScene& gt, const NoiseConfig& noise,
                                    int num_classes);

}  // namespace mipose
