#pragma once

#include <span>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/hypgen.hpp"
#include "mipose/scenegen.hpp"
#include "mipose/scoring.hpp"
#include "mipose/select.hpp"

namespace mipose {

struct EstimatedPose {
    int class_id = 0;
    RigidTransform pose;
};

struct InstanceReport {
    int placement_index = -1;  // index into GroundTruthScene::placements
    int class_id = 0;
    bool matched = false;
    bool true_positive = false;
    double adi = -1.0;       // to the matched estimate, when matched
    bool visible = false;    // has at least one labeled pixel
};

struct RecallReport {
    int total_gt = 0;
    int true_positives = 0;
    double recall = 0.0;
    int visible_gt = 0;
    int visible_true_positives = 0;
    double visible_recall = 0.0;  // secondary column: visible instances only
    std::vector<InstanceReport> instances;
};

/// ADI-based recall with greedy nearest-first one-to-one matching per class:
/// candidate (gt, estimate) pairs are consumed in ascending ADI order. A
/// matched instance is a true positive iff ADI < k_l * d_l. The Hungarian
/// option replaces the greedy matching with a minimum-total-ADI assignment.
RecallReport match_and_recall(std::span<const EstimatedPose> estimates,
                              const GroundTruthScene& gt, std::span<const MeshModel> models,
                              double k_l, bool hungarian = false);

struct OracleSelection {
    SelectionProblem problem;
    Selection selection;
    std::vector<EstimatedPose> poses;
};

/// Selection upper bound: replaces the learned score with
/// max(0, 1 - e_ADI(T, nearest same-class T^g) / (k_l * d_l)) and solves the
/// same constrained problem exactly.
OracleSelection oracle_selection(const HypothesisSet& hypotheses,
                                 const GroundTruthScene& gt,
                                 std::span<const MeshModel> models, double k_l,
                                 std::span<const int> capacities, double epsilon_v,
                                 double voxel_size = -1.0);

struct ManualScores {
    double scene = 0.0;         // f3 + f4
    double scene_model = 0.0;   // f1 * f2 * f3 * (f4 + f5)
};

ManualScores manual_objective_baselines(const AlignmentFeatures& f);

/// Minimum-cost one-to-one assignment (Hungarian algorithm) on a rectangular
/// cost matrix; returns, per row, the assigned column or -1.
std::vector<int> hungarian_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace mipose
