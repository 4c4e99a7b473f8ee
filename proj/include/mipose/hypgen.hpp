#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/render.hpp"
#include "mipose/rng.hpp"
#include "mipose/scenegen.hpp"

namespace mipose {

/// 8-neighborhood graph over image pixels; an edge exists iff both endpoints
/// have boundary probability below the threshold used at construction.
struct PixelGraph {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> free;  // pixel participates in edges

    bool is_free(int row, int col) const { return free[std::size_t(row) * width + col] != 0; }
    std::size_t index(int row, int col) const { return std::size_t(row) * width + col; }
};

PixelGraph build_pixel_graph(const PredictionMaps& maps, double delta);

/// BFS hop distances from `src` to every pixel, or -1 where unreachable.
/// max_hops < 0 leaves the search unbounded.
std::vector<std::int32_t> bfs_distances(const PixelGraph& graph, PixelCoord src,
                                        int max_hops = -1);

/// Hop count of the shortest path, or -1 when unreachable.
int shortest_path_length(const PixelGraph& graph, PixelCoord a, PixelCoord b);

/// pi_l: per-pixel class probability normalized over the image (sums to 1).
/// Throws DataError when the channel is zero everywhere.
std::vector<double> normalize_class_probability(const PredictionMaps& maps, int class_id);

struct Base {
    std::array<int, 4> point_index{};  // indices into the class point cloud
    std::array<Vec3, 4> points;
    std::array<Vec3, 4> normals;
    std::array<PixelCoord, 4> pixels;
    int class_id = 0;
};

struct HypgenConfig {
    double delta = 0.5;             // boundary-probability threshold
    int epsilon_l = -1;             // path-length cap in hops; -1: image diagonal / 4
    int bases_per_class = 100;      // A_i
    int retry_budget = 20;          // restarts per base
    double gamma = 0.9;             // dispersion decay factor
    int max_hypotheses = 130;       // H_i
    double tau_plane_frac = 0.02;   // base coplanarity tolerance, fraction of d_l
    double cong_dist_frac = 1.0 / 30.0;  // congruence distance tolerance, of d_l
    double ratio_tol = 0.05;        // diagonal-intersection ratio tolerance
    double lcp_radius_frac = 0.05;  // d_l / 20
    int lcp_samples = 150;          // model samples used by the LCP score
    double min_lcp = 0.05;          // candidates below this are dropped early
    int max_candidates_per_base = 300;
    double dedup_rot_deg = 15.0;
    double dedup_trans_frac = 0.1;  // d_l / 10
    int icp_iterations = 30;
    double icp_radius_frac = 0.1;   // d_l / 10
    int model_samples = 500;        // PPF table sampling density
    bool use_boundary = true;       // ablation switch for the pixel graph

    int resolve_epsilon_l(const CameraIntrinsics& cam) const {
        return epsilon_l > 0 ? epsilon_l : std::max(1, (int)(cam.image_diagonal() / 4.0));
    }
};

struct PoseHypothesis {
    RigidTransform pose;
    double lcp = 0.0;
    int source_base = -1;

    // Filled by the scoring stage.
    std::array<double, 5> features{};
    bool has_features = false;
    double predicted_adi = 0.0;
    double score = 0.0;
    bool has_score = false;
};

struct ClassHypotheses {
    int class_id = 0;
    std::vector<PoseHypothesis> hypotheses;
};

struct HypothesisSet {
    std::vector<ClassHypotheses> classes;

    const ClassHypotheses* for_class(int class_id) const {
        for (const auto& c : classes)
            if (c.class_id == class_id) return &c;
        return nullptr;
    }
};

/// Sequential conditional sampler over a labeled class cloud. Holds the
/// per-point potentials (initialized to P_l) that the dispersion decay
/// updates after every drawn base.
class BaseSampler {
public:
    BaseSampler(const PointCloud& cloud, std::vector<double> potentials,
                const PixelGraph& graph, const PpfTable& table, const HypgenConfig& config,
                double model_diameter);

    /// Draws one base; nullopt when the retry budget is exhausted or the
    /// cloud cannot form a base at all.
    std::optional<Base> sample(Rng& rng);

    /// Multiplies gamma into every potential whose pixel the BFS reaches
    /// from the base's pixels.
    void apply_dispersion_decay(const Base& base, double gamma);

    const std::vector<double>& potentials() const { return potentials_; }

private:
    int draw_weighted(const std::vector<double>& weights, Rng& rng) const;

    const PointCloud& cloud_;
    std::vector<double> potentials_;
    const PixelGraph& graph_;
    const PpfTable& table_;
    HypgenConfig config_;
    double diameter_;
    int epsilon_l_;
    std::vector<std::vector<int>> pixel_to_points_;  // per pixel index
};

struct CongruenceTolerances {
    double distance = 0.0;   // meters
    double ratio = 0.05;
    double plane = 0.0;      // meters
};

/// 4-point congruent set matching of a base against the model's PPF table.
/// Returns the rigid transforms (model frame -> camera frame) of every
/// congruent set found, in deterministic order; empty when none match.
std::vector<RigidTransform> match_congruent_sets(const Base& base, const PpfTable& table,
                                                 const CongruenceTolerances& tol,
                                                 int max_results = 1 << 20);

/// Fraction of transformed model sample points with an observed point within
/// `radius`.
double lcp_score(const RigidTransform& transform, const MeshModel& model,
                 const PointCloud& cloud, double radius, int max_samples = -1);
double lcp_score(const RigidTransform& transform, const MeshModel& model,
                 const NeighborGrid& cloud_grid, double radius, int max_samples = -1);

struct PoseCandidateRaw {
    RigidTransform pose;
    double lcp = 0.0;
    int source_base = -1;
};

/// Greedy symmetry-aware deduplication of LCP-sorted candidates followed by
/// point-to-plane ICP refinement of the representatives.
std::vector<PoseHypothesis> dedup_and_refine(std::vector<PoseCandidateRaw> candidates,
                                             const MeshModel& model, const PointCloud& cloud,
                                             const HypgenConfig& config, int max_hypotheses);

/// Point-to-plane ICP against a cloud with normals; returns the refined pose.
RigidTransform refine_icp(const RigidTransform& initial, const MeshModel& model,
                          const PointCloud& cloud, const NeighborGrid& cloud_grid,
                          double radius, int max_iterations);

struct ModelContext {
    const MeshModel* model = nullptr;
    PpfTable table;
};

/// Builds the per-model PPF tables once; generate_hypotheses consumes these.
std::vector<ModelContext> prepare_models(std::span<const MeshModel> models,
                                         const HypgenConfig& config);

/// Full hypothesis generation for every class: pixel graph, boundary
/// constrained base sampling with dispersion decay, congruent set matching,
/// LCP ranking, dedup and ICP refinement. Deterministic given the seed.
HypothesisSet generate_hypotheses(const PredictionMaps& maps, const DepthImage& depth,
                                  const CameraIntrinsics& cam,
                                  std::span<const ModelContext> models,
                                  const HypgenConfig& config, std::uint64_t seed);

}  // namespace mipose
