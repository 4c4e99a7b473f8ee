#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mipose/geometry.hpp"

namespace mipose {

struct OverlapResult {
    double volume = 0.0;             // m^3
    bool used_shell_fallback = false;  // non-watertight input path
};

/// Volumetric intersection of two placed models, measured on a voxel grid
/// over the AABB intersection (broad phase). voxel_size <= 0 derives
/// min(d1, d2) / 40. Non-watertight models fall back to a dilated
/// surface-shell estimate and are flagged.
OverlapResult pairwise_overlap_volume(const MeshModel& m1, const RigidTransform& t1,
                                      const MeshModel& m2, const RigidTransform& t2,
                                      double voxel_size = -1.0);

struct PoseCandidate {
    const MeshModel* model = nullptr;
    RigidTransform pose;
};

/// All unordered pairs whose overlap volume exceeds epsilon_v, within and
/// across classes. Pairs are returned as indices into `candidates`.
std::vector<std::pair<int, int>> build_conflicts(std::span<const PoseCandidate> candidates,
                                                 double epsilon_v, double voxel_size = -1.0);

struct SelectionItem {
    int class_id = 0;
    int hyp_index = 0;  // index j within the class's hypothesis list
    double score = 0.0;
};

struct SelectionProblem {
    std::vector<SelectionItem> items;
    std::map<int, int> capacities;               // class_id -> N_i
    std::vector<std::pair<int, int>> conflicts;  // unordered item-index pairs
    double epsilon_v = 0.0;

    void validate() const;
};

struct Selection {
    std::vector<std::uint8_t> chosen;  // indicator per item
    double objective = 0.0;
    std::int64_t nodes = 0;  // branch-and-bound nodes (exact solver only)
};

/// Provably optimal selection by depth-first branch-and-bound. Branches on
/// the highest-score undecided item; the upper bound sums the best remaining
/// scores under the capacity constraints while ignoring conflicts.
/// Deterministic tie-breaking by (class_id, hyp_index).
Selection solve_exact(const SelectionProblem& problem);

/// Greedy descending-score pass; feasible by construction and within
/// (1 - 1/e) of optimal for this monotone submodular objective.
Selection solve_greedy(const SelectionProblem& problem);

struct SelectedPose {
    int class_id = 0;
    int hyp_index = 0;
    double score = 0.0;
};

/// Final per-class pose groups for the chosen indicators. Throws DataError if
/// the selection violates capacity or conflict constraints.
std::vector<SelectedPose> assemble_scene(const Selection& selection,
                                         const SelectionProblem& problem);

}  // namespace mipose
