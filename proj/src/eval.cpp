#include "mipose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mipose {

std::vector<int> hungarian_assignment(const std::vector<std::vector<double>>& cost) {
    const int rows = (int)cost.size();
    if (rows == 0) return {};
    const int cols = (int)cost[0].size();
    // Pad to a square matrix with large costs.
    const int n = std::max(rows, cols);
    double big = 0.0;
    for (const auto& row : cost)
        for (double v : row)
            if (std::isfinite(v)) big = std::max(big, v);
    big = big * n + 1.0;
    std::vector<std::vector<double>> a(n + 1, std::vector<double>(n + 1, big));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            a[r + 1][c + 1] = std::isfinite(cost[r][c]) ? cost[r][c] : big;

    // Kuhn-Munkres with potentials (O(n^3)).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(rows, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] >= 1 && p[j] <= rows && j <= cols) assignment[p[j] - 1] = j - 1;
    return assignment;
}

RecallReport match_and_recall(std::span<const EstimatedPose> estimates,
                              const GroundTruthScene& gt, std::span<const MeshModel> models,
                              double k_l, bool hungarian) {
    std::map<int, const MeshModel*> by_class;
    for (const MeshModel& m : models) by_class[m.class_id] = &m;

    RecallReport report;
    report.total_gt = (int)gt.placements.size();

    std::vector<char> gt_visible(gt.placements.size(), 0);
    for (std::int32_t id : gt.instance_labels)
        if (id >= 0 && id < (int)gt_visible.size()) gt_visible[id] = 1;

    report.instances.resize(gt.placements.size());
    for (std::size_t g = 0; g < gt.placements.size(); ++g) {
        report.instances[g].placement_index = (int)g;
        report.instances[g].class_id = gt.placements[g].class_id;
        report.instances[g].visible = gt_visible[g] != 0;
        if (gt_visible[g]) ++report.visible_gt;
    }

    for (const auto& [class_id, model] : by_class) {
        std::vector<int> gt_idx;
        for (std::size_t g = 0; g < gt.placements.size(); ++g)
            if (gt.placements[g].class_id == class_id) gt_idx.push_back((int)g);
        std::vector<int> est_idx;
        for (std::size_t e = 0; e < estimates.size(); ++e)
            if (estimates[e].class_id == class_id) est_idx.push_back((int)e);
        if (gt_idx.empty() || est_idx.empty()) continue;

        std::vector<std::vector<double>> adi(gt_idx.size(),
                                             std::vector<double>(est_idx.size(), 0.0));
        for (std::size_t g = 0; g < gt_idx.size(); ++g) {
            const AdiTarget target(gt.placements[gt_idx[g]].pose, *model);
            for (std::size_t e = 0; e < est_idx.size(); ++e)
                adi[g][e] = target.distance_from(estimates[est_idx[e]].pose);
        }

        std::vector<std::pair<int, int>> matches;  // (g, e) local indices
        if (hungarian) {
            const std::vector<int> assigned = hungarian_assignment(adi);
            for (std::size_t g = 0; g < gt_idx.size(); ++g)
                if (assigned[g] >= 0) matches.emplace_back((int)g, assigned[g]);
        } else {
            struct Pair {
                double adi;
                int g, e;
            };
            std::vector<Pair> pairs;
            for (std::size_t g = 0; g < gt_idx.size(); ++g)
                for (std::size_t e = 0; e < est_idx.size(); ++e)
                    pairs.push_back({adi[g][e], (int)g, (int)e});
            std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
                if (a.adi != b.adi) return a.adi < b.adi;
                if (a.g != b.g) return a.g < b.g;
                return a.e < b.e;
            });
            std::vector<char> g_used(gt_idx.size(), 0), e_used(est_idx.size(), 0);
            for (const Pair& pr : pairs) {
                if (g_used[pr.g] || e_used[pr.e]) continue;
                g_used[pr.g] = 1;
                e_used[pr.e] = 1;
                matches.emplace_back(pr.g, pr.e);
            }
        }

        const double radius = k_l * model->diameter;
        for (const auto& [g, e] : matches) {
            InstanceReport& inst = report.instances[gt_idx[g]];
            inst.matched = true;
            inst.adi = adi[g][e];
            inst.true_positive = adi[g][e] < radius;
            if (inst.true_positive) {
                ++report.true_positives;
                if (inst.visible) ++report.visible_true_positives;
            }
        }
    }

    report.recall = report.total_gt > 0 ? (double)report.true_positives / report.total_gt : 0.0;
    report.visible_recall =
        report.visible_gt > 0 ? (double)report.visible_true_positives / report.visible_gt : 0.0;
    return report;
}

OracleSelection oracle_selection(const HypothesisSet& hypotheses,
                                 const GroundTruthScene& gt,
                                 std::span<const MeshModel> models, double k_l,
                                 std::span<const int> capacities, double epsilon_v,
                                 double voxel_size) {
    std::map<int, const MeshModel*> by_class;
    for (const MeshModel& m : models) by_class[m.class_id] = &m;

    OracleSelection out;
    std::vector<PoseCandidate> candidates;
    std::vector<RigidTransform> poses;

    for (const ClassHypotheses& cls : hypotheses.classes) {
        const MeshModel* model = by_class.at(cls.class_id);
        std::vector<AdiTarget> targets;
        for (const Placement& p : gt.placements)
            if (p.class_id == cls.class_id) targets.emplace_back(p.pose, *model);
        const double radius = k_l * model->diameter;
        for (std::size_t j = 0; j < cls.hypotheses.size(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (const AdiTarget& t : targets)
                best = std::min(best, t.distance_from(cls.hypotheses[j].pose));
            const double score =
                targets.empty() ? 0.0 : std::max(0.0, 1.0 - best / radius);
            out.problem.items.push_back({cls.class_id, (int)j, score});
            candidates.push_back({model, cls.hypotheses[j].pose});
            poses.push_back(cls.hypotheses[j].pose);
        }
    }
    std::size_t cap_idx = 0;
    for (const MeshModel& m : models) {
        if (cap_idx < capacities.size()) out.problem.capacities[m.class_id] = capacities[cap_idx];
        ++cap_idx;
    }
    out.problem.epsilon_v = epsilon_v;
    out.problem.conflicts = build_conflicts(candidates, epsilon_v, voxel_size);
    out.selection = solve_exact(out.problem);
    for (std::size_t i = 0; i < out.selection.chosen.size(); ++i)
        if (out.selection.chosen[i])
            out.poses.push_back({out.problem.items[i].class_id, poses[i]});
    return out;
}

ManualScores manual_objective_baselines(const AlignmentFeatures& f) {
    return {f.f3 + f.f4, f.f1 * f.f2 * f.f3 * (f.f4 + f.f5)};
}

}  // namespace mipose
