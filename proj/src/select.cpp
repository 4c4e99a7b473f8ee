#include "mipose/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

namespace mipose {

namespace {

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    bool intersects(const Aabb& o) const {
        return (lo.array() < o.hi.array()).all() && (o.lo.array() < hi.array()).all();
    }
};

Aabb transformed_aabb(const MeshModel& m, const RigidTransform& t) {
    Aabb box;
    for (const Vec3& v : m.vertices) box.extend(t.apply(v));
    return box;
}

// Sorted z-crossings of a vertical line (x, y) with the transformed mesh.
// Crossing pairs delimit the interior for watertight meshes.
void column_crossings(const std::vector<Vec3>& tri_verts,
                      const std::vector<std::array<int, 3>>& tris, double x, double y,
                      std::vector<double>& out) {
    out.clear();
    for (const auto& tri : tris) {
        const Vec3& a = tri_verts[tri[0]];
        const Vec3& b = tri_verts[tri[1]];
        const Vec3& c = tri_verts[tri[2]];
        const double d1 = (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
        const double d2 = (c.x() - b.x()) * (y - b.y()) - (c.y() - b.y()) * (x - b.x());
        const double d3 = (a.x() - c.x()) * (y - c.y()) - (a.y() - c.y()) * (x - c.x());
        const bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
        const bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
        if (neg && pos) continue;  // outside the xy projection
        // Interpolate z on the triangle plane.
        const Vec3 n = (b - a).cross(c - a);
        if (std::abs(n.z()) < 1e-14) continue;  // vertical triangle: grazing
        const double z = a.z() - (n.x() * (x - a.x()) + n.y() * (y - a.y())) / n.z();
        out.push_back(z);
    }
    std::sort(out.begin(), out.end());
    // Collapse duplicate crossings from shared edges/vertices.
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              out.end());
}

double intervals_overlap(const std::vector<double>& a, const std::vector<double>& b) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); i += 2)
        for (std::size_t j = 0; j + 1 < b.size(); j += 2) {
            const double lo = std::max(a[i], b[j]);
            const double hi = std::min(a[i + 1], b[j + 1]);
            if (hi > lo) total += hi - lo;
        }
    return total;
}

OverlapResult shell_overlap(const MeshModel& m1, const RigidTransform& t1,
                            const MeshModel& m2, const RigidTransform& t2, double voxel) {
    const auto occupy = [&](const MeshModel& m, const RigidTransform& t) {
        std::unordered_set<std::uint64_t> cells;
        const auto key = [&](int ix, int iy, int iz) {
            const auto u = [](int v) {
                return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)) & 0x1fffffULL;
            };
            return (u(ix) << 42) | (u(iy) << 21) | u(iz);
        };
        for (const Vec3& p : m.samples.points) {
            const Vec3 q = t.apply(p);
            const int ix = (int)std::floor(q.x() / voxel);
            const int iy = (int)std::floor(q.y() / voxel);
            const int iz = (int)std::floor(q.z() / voxel);
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz)
                        cells.insert(key(ix + dx, iy + dy, iz + dz));
        }
        return cells;
    };
    const auto c1 = occupy(m1, t1);
    const auto c2 = occupy(m2, t2);
    std::size_t common = 0;
    for (const auto& c : c1)
        if (c2.count(c)) ++common;
    return {static_cast<double>(common) * voxel * voxel * voxel, true};
}

}  // namespace

OverlapResult pairwise_overlap_volume(const MeshModel& m1, const RigidTransform& t1,
                                      const MeshModel& m2, const RigidTransform& t2,
                                      double voxel_size) {
    const double voxel =
        voxel_size > 0 ? voxel_size : std::min(m1.diameter, m2.diameter) / 40.0;

    // Broad phase.
    const Aabb b1 = transformed_aabb(m1, t1);
    const Aabb b2 = transformed_aabb(m2, t2);
    if (!b1.intersects(b2)) return {0.0, false};

    if (!m1.watertight || !m2.watertight) return shell_overlap(m1, t1, m2, t2, voxel);

    const Vec3 lo = b1.lo.cwiseMax(b2.lo);
    const Vec3 hi = b1.hi.cwiseMin(b2.hi);

    std::vector<Vec3> v1(m1.vertices.size()), v2(m2.vertices.size());
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = t1.apply(m1.vertices[i]);
    for (std::size_t i = 0; i < v2.size(); ++i) v2[i] = t2.apply(m2.vertices[i]);

    // Columns at voxel/4 spacing with exact z-interval intersection per
    // column; the slight offset avoids sampling exactly on triangle edges.
    const int super = 4;
    const double h = voxel / super;
    const double jitter = voxel * 1.1e-3;
    const int nx = std::max(1, (int)std::ceil((hi.x() - lo.x()) / h));
    const int ny = std::max(1, (int)std::ceil((hi.y() - lo.y()) / h));

    double volume = 0.0;
    std::vector<double> cross1, cross2;
    for (int ix = 0; ix < nx; ++ix) {
        const double x = lo.x() + (ix + 0.5) * h + jitter;
        for (int iy = 0; iy < ny; ++iy) {
            const double y = lo.y() + (iy + 0.5) * h + jitter;
            column_crossings(v1, m1.triangles, x, y, cross1);
            if (cross1.size() < 2) continue;
            column_crossings(v2, m2.triangles, x, y, cross2);
            if (cross2.size() < 2) continue;
            if (cross1.size() % 2) cross1.pop_back();
            if (cross2.size() % 2) cross2.pop_back();
            volume += intervals_overlap(cross1, cross2) * h * h;
        }
    }
    return {volume, false};
}

std::vector<std::pair<int, int>> build_conflicts(std::span<const PoseCandidate> candidates,
                                                 double epsilon_v, double voxel_size) {
    std::vector<Aabb> boxes(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        boxes[i] = transformed_aabb(*candidates[i].model, candidates[i].pose);

    std::vector<std::pair<int, int>> conflicts;
    for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            if (!boxes[i].intersects(boxes[j])) continue;
            const OverlapResult o =
                pairwise_overlap_volume(*candidates[i].model, candidates[i].pose,
                                        *candidates[j].model, candidates[j].pose, voxel_size);
            if (o.volume > epsilon_v) conflicts.emplace_back((int)i, (int)j);
        }
    }
    return conflicts;
}

void SelectionProblem::validate() const {
    const int n = (int)items.size();
    for (const auto& item : items)
        if (!std::isfinite(item.score)) throw DataError("SelectionProblem: non-finite score");
    for (const auto& [a, b] : conflicts) {
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw DataError("SelectionProblem: conflict index out of range");
        if (a == b) throw DataError("SelectionProblem: self-conflict");
    }
}

namespace {

struct Solver {
    const SelectionProblem& problem;
    std::vector<int> order;            // item indices sorted by descending score
    std::vector<std::vector<int>> adj;  // conflict adjacency (original indices)
    std::vector<int> blocked;           // >0: conflicting with a chosen item
    std::vector<std::uint8_t> chosen;
    std::map<int, int> used;  // per-class chosen count
    double best_value = 0.0;
    std::vector<std::uint8_t> best_chosen;
    std::int64_t nodes = 0;

    explicit Solver(const SelectionProblem& p) : problem(p) {
        const int n = (int)p.items.size();
        adj.resize(n);
        for (const auto& [a, b] : p.conflicts) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        blocked.assign(n, 0);
        chosen.assign(n, 0);
        best_chosen.assign(n, 0);
        for (int i = 0; i < n; ++i)
            if (p.items[i].score > 0) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (p.items[a].score != p.items[b].score) return p.items[a].score > p.items[b].score;
            if (p.items[a].class_id != p.items[b].class_id)
                return p.items[a].class_id < p.items[b].class_id;
            return p.items[a].hyp_index < p.items[b].hyp_index;
        });
    }

    int capacity(int class_id) const {
        auto it = problem.capacities.find(class_id);
        return it == problem.capacities.end() ? std::numeric_limits<int>::max() : it->second;
    }

    bool class_full(int class_id) const {
        auto it = used.find(class_id);
        return it != used.end() && it->second >= capacity(class_id);
    }

    // Upper bound from position `pos`: best remaining scores obeying the
    // capacity constraints, ignoring conflicts among the undecided items.
    double bound_from(int pos, double current) const {
        double b = current;
        std::map<int, int> slack;
        for (int k = pos; k < (int)order.size(); ++k) {
            const int idx = order[k];
            if (blocked[idx]) continue;
            const int cls = problem.items[idx].class_id;
            auto it = slack.find(cls);
            if (it == slack.end()) {
                int u = 0;
                auto uit = used.find(cls);
                if (uit != used.end()) u = uit->second;
                it = slack.emplace(cls, capacity(cls) - u).first;
            }
            if (it->second <= 0) continue;
            --it->second;
            b += problem.items[idx].score;
        }
        return b;
    }

    void dfs(int pos, double current) {
        ++nodes;
        if (pos >= (int)order.size()) {
            if (current > best_value) {
                best_value = current;
                best_chosen = chosen;
            }
            return;
        }
        if (bound_from(pos, current) <= best_value) return;
        const int idx = order[pos];
        const int cls = problem.items[idx].class_id;
        if (!blocked[idx] && !class_full(cls)) {
            chosen[idx] = 1;
            ++used[cls];
            for (int nb : adj[idx]) ++blocked[nb];
            dfs(pos + 1, current + problem.items[idx].score);
            for (int nb : adj[idx]) --blocked[nb];
            --used[cls];
            chosen[idx] = 0;
        }
        dfs(pos + 1, current);
    }
};

Selection greedy_impl(const SelectionProblem& problem) {
    problem.validate();
    const int n = (int)problem.items.size();
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : problem.conflicts) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<int> order;
    for (int i = 0; i < n; ++i)
        if (problem.items[i].score > 0) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (problem.items[a].score != problem.items[b].score)
            return problem.items[a].score > problem.items[b].score;
        if (problem.items[a].class_id != problem.items[b].class_id)
            return problem.items[a].class_id < problem.items[b].class_id;
        return problem.items[a].hyp_index < problem.items[b].hyp_index;
    });

    Selection sel;
    sel.chosen.assign(n, 0);
    std::map<int, int> used;
    std::vector<std::uint8_t> blocked(n, 0);
    for (int idx : order) {
        if (blocked[idx]) continue;
        const int cls = problem.items[idx].class_id;
        auto cap_it = problem.capacities.find(cls);
        const int cap =
            cap_it == problem.capacities.end() ? std::numeric_limits<int>::max() : cap_it->second;
        if (used[cls] >= cap) continue;
        sel.chosen[idx] = 1;
        sel.objective += problem.items[idx].score;
        ++used[cls];
        for (int nb : adj[idx]) blocked[nb] = 1;
    }
    return sel;
}

}  // namespace

Selection solve_exact(const SelectionProblem& problem) {
    problem.validate();
    Solver solver(problem);

    // Seed the incumbent with the greedy solution for early pruning.
    Selection greedy = greedy_impl(problem);
    solver.best_value = greedy.objective;
    solver.best_chosen = greedy.chosen;

    solver.dfs(0, 0.0);

    Selection sel;
    sel.chosen = solver.best_chosen;
    sel.objective = 0.0;
    for (std::size_t i = 0; i < sel.chosen.size(); ++i)
        if (sel.chosen[i]) sel.objective += problem.items[i].score;
    sel.nodes = solver.nodes;
    return sel;
}

Selection solve_greedy(const SelectionProblem& problem) { return greedy_impl(problem); }

std::vector<SelectedPose> assemble_scene(const Selection& selection,
                                         const SelectionProblem& problem) {
    if (selection.chosen.size() != problem.items.size())
        throw DataError("assemble_scene: selection does not match problem");
    std::map<int, int> used;
    for (std::size_t i = 0; i < selection.chosen.size(); ++i) {
        if (!selection.chosen[i]) continue;
        const int cls = problem.items[i].class_id;
        ++used[cls];
        auto cap = problem.capacities.find(cls);
        if (cap != problem.capacities.end() && used[cls] > cap->second)
            throw DataError("assemble_scene: capacity violated for class " +
                            std::to_string(cls));
    }
    for (const auto& [a, b] : problem.conflicts)
        if (selection.chosen[a] && selection.chosen[b])
            throw DataError("assemble_scene: conflicting pair selected");

    std::vector<SelectedPose> out;
    for (std::size_t i = 0; i < selection.chosen.size(); ++i) {
        if (!selection.chosen[i]) continue;
        out.push_back({problem.items[i].class_id, problem.items[i].hyp_index,
                       problem.items[i].score});
    }
    std::sort(out.begin(), out.end(), [](const SelectedPose& a, const SelectedPose& b) {
        return a.class_id != b.class_id ? a.class_id < b.class_id : a.hyp_index < b.hyp_index;
    });
    return out;
}

}  // namespace mipose
