#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mipose/eval.hpp"
#include "mipose/geometry.hpp"
#include "mipose/hypgen.hpp"
#include "mipose/render.hpp"
#include "mipose/scenegen.hpp"
#include "mipose/scoring.hpp"
#include "mipose/select.hpp"

namespace mipose::io {

namespace fs = std::filesystem;

// --- Mesh models -----------------------------------------------------------

/// ASCII PLY with per-vertex position + normal and triangular faces.
void save_ply(const fs::path& path, const std::vector<Vec3>& vertices,
              const std::vector<Vec3>& normals,
              const std::vector<std::array<int, 3>>& triangles);

struct PlyData {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;
    std::vector<std::array<int, 3>> triangles;
};
PlyData load_ply(const fs::path& path);

/// Symmetry sidecar: one "qw qx qy qz tx ty tz" row per element.
void save_symmetry(const fs::path& path, const std::vector<RigidTransform>& group);
std::vector<RigidTransform> load_symmetry(const fs::path& path);

/// Loads a model from PLY, attaching <ply>.sym when present.
MeshModel load_model(const fs::path& ply_path, int class_id,
                     int sample_count = MeshModel::kDefaultSampleCount);

/// models.json: [{"ply": "...", "class_id": k}, ...]; paths are resolved
/// relative to the json file.
std::vector<MeshModel> load_model_set(const fs::path& json_path,
                                      int sample_count = MeshModel::kDefaultSampleCount);

// --- PGM / raw rasters ------------------------------------------------------

void write_pgm8(const fs::path& path, int width, int height,
                const std::vector<std::uint8_t>& data);
void write_pgm16(const fs::path& path, int width, int height,
                 const std::vector<std::uint16_t>& data);
std::vector<std::uint8_t> read_pgm8(const fs::path& path, int& width, int& height);
std::vector<std::uint16_t> read_pgm16(const fs::path& path, int& width, int& height);

/// Raw little-endian float32 raster with a JSON header next to it
/// (<base>.raw + <base>.json holding width/height/channels).
void write_raster(const fs::path& base_path, int width, int height, int channels,
                  const std::vector<float>& data);
std::vector<float> read_raster(const fs::path& base_path, int& width, int& height,
                               int& channels);

// --- Depth ------------------------------------------------------------------

inline constexpr double kDepthScale = 1e-4;  // meters per 16-bit unit

void save_depth(const fs::path& dir, const DepthImage& depth, double scale = kDepthScale);
DepthImage load_depth(const fs::path& dir);

// --- Scenes -----------------------------------------------------------------

/// Scene directory layout: scene.json, depth.pgm (+depth.json),
/// class_labels.pgm, instance_labels.pgm, boundary.pgm, semantic.raw/.json,
/// boundary_prob.raw/.json. Writes are atomic per file (tmp + rename).
void save_scene(const fs::path& dir, const GroundTruthScene& gt, const PredictionMaps& maps);

GroundTruthScene load_scene_gt(const fs::path& dir);
PredictionMaps load_prediction_maps(const fs::path& dir);
void save_prediction_maps(const fs::path& dir, const PredictionMaps& maps);

// --- Hypotheses -------------------------------------------------------------

void save_hypotheses(const fs::path& path, const HypothesisSet& set);
HypothesisSet load_hypotheses(const fs::path& path);

// --- Ensembles ---------------------------------------------------------------

/// Ensemble JSON with numeric fields as decimal strings (shortest
/// round-trip), so that save/load is value-exact and files are byte-stable.
void save_ensemble(const fs::path& path, const TreeEnsemble& ensemble);
TreeEnsemble load_ensemble(const fs::path& path);

void save_training_log(const fs::path& path, const std::vector<TrainingLogRow>& rows);

// --- Selection reports --------------------------------------------------------

struct SelectionReport {
    std::string solver;  // "exact" | "greedy"
    double objective = 0.0;
    std::int64_t nodes = 0;
    double wall_time_ms = 0.0;
    std::vector<EstimatedPose> poses;
    std::vector<double> scores;  // parallel to poses
};

void save_selection_report(const fs::path& path, const SelectionReport& report);
SelectionReport load_selection_report(const fs::path& path);

// --- Pipeline configuration ---------------------------------------------------

/// Flat key = value configuration file ('#' comments). Unknown keys are
/// rejected. All thresholds live here with their documented defaults.
struct PipelineConfig {
    HypgenConfig hypgen;
    FeatureParams features;
    GbrtParams gbrt;
    NoiseConfig noise;
    double k_l = 0.1;
    double epsilon_v = -1.0;    // <0: 3% of the smaller model volume
    double voxel_frac = 0.025;  // overlap voxel = frac * d_l

    double resolve_epsilon_v(std::span<const MeshModel> models) const;
};

PipelineConfig load_config(const fs::path& path);
PipelineConfig default_config();
void save_config(const fs::path& path, const PipelineConfig& config);

// --- Misc ---------------------------------------------------------------------

void write_text_atomic(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

}  // namespace mipose::io
