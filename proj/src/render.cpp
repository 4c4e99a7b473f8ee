#include "mipose/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mipose {

namespace {

constexpr double kNearPlane = 1e-4;

struct CameraVertex {
    Vec3 p;  // camera frame
};

// Sutherland-Hodgman clip of a triangle against z >= kNearPlane.
// Returns up to 4 vertices.
int clip_near(const Vec3 (&in)[3], Vec3 (&out)[4]) {
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const Vec3& a = in[i];
        const Vec3& b = in[(i + 1) % 3];
        const bool a_in = a.z() >= kNearPlane;
        const bool b_in = b.z() >= kNearPlane;
        if (a_in) out[n++] = a;
        if (a_in != b_in) {
            const double t = (kNearPlane - a.z()) / (b.z() - a.z());
            out[n++] = a + t * (b - a);
        }
    }
    return n;
}

// Rasterizes one camera-frame triangle into the z-buffer; on a depth win the
// callback receives (pixel index, interpolated depth).
template <typename OnWin>
void raster_triangle(const Vec3& v0, const Vec3& v1, const Vec3& v2,
                     const CameraIntrinsics& cam, DepthImage& zbuf, OnWin&& on_win) {
    Vec3 tri[3] = {v0, v1, v2};
    Vec3 poly[4];
    const int n = clip_near(tri, poly);
    if (n < 3) return;

    for (int f = 1; f + 1 < n; ++f) {
        const Vec3 a = poly[0], b = poly[f], c = poly[f + 1];
        // Screen positions; pixel (row r, col c) samples image point (c, r).
        const double ua = cam.fx * a.x() / a.z() + cam.cx;
        const double va = cam.fy * a.y() / a.z() + cam.cy;
        const double ub = cam.fx * b.x() / b.z() + cam.cx;
        const double vb = cam.fy * b.y() / b.z() + cam.cy;
        const double uc = cam.fx * c.x() / c.z() + cam.cx;
        const double vc = cam.fy * c.y() / c.z() + cam.cy;

        // Edges drawn as lines: grazing sliver triangles at the silhouette
        // otherwise leave sub-pixel holes in the mask.
        const double wa = 1.0 / a.z(), wb = 1.0 / b.z(), wc = 1.0 / c.z();
        const auto raster_edge = [&](double u0, double v0, double w0, double u1, double v1,
                                     double w1) {
            const int steps =
                1 + (int)std::ceil(std::max(std::abs(u1 - u0), std::abs(v1 - v0)));
            for (int i = 0; i <= steps; ++i) {
                const double t = (double)i / steps;
                const int col = (int)std::lround(u0 + t * (u1 - u0));
                const int r = (int)std::lround(v0 + t * (v1 - v0));
                if (col < 0 || col >= cam.width || r < 0 || r >= cam.height) continue;
                const double inv_z = w0 + t * (w1 - w0);
                if (inv_z <= 0) continue;
                const double z = 1.0 / inv_z;
                double& slot = zbuf.at(r, col);
                if (slot == 0.0 || z < slot) {
                    slot = z;
                    on_win(std::size_t(r) * cam.width + col, z);
                }
            }
        };
        raster_edge(ua, va, wa, ub, vb, wb);
        raster_edge(ub, vb, wb, uc, vc, wc);
        raster_edge(uc, vc, wc, ua, va, wa);

        const double area = (ub - ua) * (vc - va) - (uc - ua) * (vb - va);
        if (std::abs(area) < 1e-12) continue;

        const int col_lo = std::max(0, (int)std::ceil(std::min({ua, ub, uc})));
        const int col_hi = std::min(cam.width - 1, (int)std::floor(std::max({ua, ub, uc})));
        const int row_lo = std::max(0, (int)std::ceil(std::min({va, vb, vc})));
        const int row_hi = std::min(cam.height - 1, (int)std::floor(std::max({va, vb, vc})));

        for (int r = row_lo; r <= row_hi; ++r) {
            for (int col = col_lo; col <= col_hi; ++col) {
                const double px = col, py = r;
                const double l0 =
                    ((ub - px) * (vc - py) - (uc - px) * (vb - py)) / area;
                const double l1 =
                    ((uc - px) * (va - py) - (ua - px) * (vc - py)) / area;
                const double l2 = 1.0 - l0 - l1;
                // Slightly permissive edge test: pixels on shared edges must
                // be claimed by at least one of the adjoining triangles.
                constexpr double kEdgeTol = 1e-9;
                if (l0 < -kEdgeTol || l1 < -kEdgeTol || l2 < -kEdgeTol) continue;
                // 1/z is affine in screen space: perspective-correct depth.
                const double inv_z = l0 * wa + l1 * wb + l2 * wc;
                if (inv_z <= 0) continue;
                const double z = 1.0 / inv_z;
                double& slot = zbuf.at(r, col);
                if (slot == 0.0 || z < slot) {
                    slot = z;
                    on_win(std::size_t(r) * cam.width + col, z);
                }
            }
        }
    }
}

PixelMask instance_boundary(const std::vector<std::int32_t>& ids, int width, int height) {
    PixelMask boundary(ids.size(), 0);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const std::size_t i = std::size_t(r) * width + c;
            if (ids[i] < 0) continue;
            bool edge = false;
            for (int dr = -1; dr <= 1 && !edge; ++dr)
                for (int dc = -1; dc <= 1 && !edge; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= height || cc < 0 || cc >= width)
                        edge = true;
                    else if (ids[std::size_t(rr) * width + cc] != ids[i])
                        edge = true;
                }
            boundary[i] = edge ? 1 : 0;
        }
    }
    return boundary;
}

}  // namespace

double CameraIntrinsics::image_diagonal() const {
    return std::sqrt(double(width) * width + double(height) * height);
}

int RenderResult::visible_count() const {
    return (int)std::count(visible_mask.begin(), visible_mask.end(), 1);
}
int RenderResult::boundary_count() const {
    return (int)std::count(boundary_mask.begin(), boundary_mask.end(), 1);
}

RenderResult render_depth(const MeshModel& model, const RigidTransform& pose,
                          const CameraIntrinsics& cam, const RenderOptions& opts) {
    cam.validate();
    RenderResult res;
    res.depth = DepthImage(cam.width, cam.height);
    res.visible_mask.assign(res.depth.pixel_count(), 0);
    res.boundary_mask.assign(res.depth.pixel_count(), 0);
    res.normals.assign(res.depth.pixel_count(), Vec3::Zero());

    std::vector<Vec3> cam_verts(model.vertices.size());
    for (std::size_t i = 0; i < model.vertices.size(); ++i)
        cam_verts[i] = pose.apply(model.vertices[i]);

    for (const auto& tri : model.triangles) {
        const Vec3& a = cam_verts[tri[0]];
        const Vec3& b = cam_verts[tri[1]];
        const Vec3& c = cam_verts[tri[2]];
        Vec3 n = (b - a).cross(c - a);
        const double len = n.norm();
        if (len < 1e-15) continue;
        n /= len;
        if (n.z() > 0) n = -n;  // face the camera
        raster_triangle(a, b, c, cam, res.depth, [&](std::size_t idx, double) {
            res.visible_mask[idx] = 1;
            res.normals[idx] = n;
        });
    }

    const double jump =
        opts.occlusion_jump > 0 ? opts.occlusion_jump : model.diameter / 10.0;
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            const std::size_t i = std::size_t(r) * cam.width + c;
            if (!res.visible_mask[i]) continue;
            bool edge = false;
            for (int dr = -1; dr <= 1 && !edge; ++dr)
                for (int dc = -1; dc <= 1 && !edge; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (!res.depth.in_bounds(rr, cc) ||
                        !res.visible_mask[std::size_t(rr) * cam.width + cc])
                        edge = true;
                    else if (opts.include_occlusion_boundary &&
                             std::abs(res.depth.at(rr, cc) - res.depth.at(r, c)) > jump)
                        edge = true;
                }
            res.boundary_mask[i] = edge ? 1 : 0;
        }
    }
    return res;
}

SceneRender render_scene_depth(std::span<const PlacedModel> placed,
                               const CameraIntrinsics& cam) {
    cam.validate();
    SceneRender scene;
    scene.depth = DepthImage(cam.width, cam.height);
    scene.instance_ids.assign(scene.depth.pixel_count(), -1);
    scene.class_ids.assign(scene.depth.pixel_count(), 0);

    for (std::size_t inst = 0; inst < placed.size(); ++inst) {
        const MeshModel& model = *placed[inst].model;
        std::vector<Vec3> cam_verts(model.vertices.size());
        for (std::size_t i = 0; i < model.vertices.size(); ++i)
            cam_verts[i] = placed[inst].pose.apply(model.vertices[i]);
        for (const auto& tri : model.triangles) {
            raster_triangle(cam_verts[tri[0]], cam_verts[tri[1]], cam_verts[tri[2]], cam,
                            scene.depth, [&](std::size_t idx, double) {
                                scene.instance_ids[idx] = (std::int32_t)inst;
                                scene.class_ids[idx] = model.class_id;
                            });
        }
    }
    scene.boundary_mask = instance_boundary(scene.instance_ids, cam.width, cam.height);
    return scene;
}

NormalImage normals_from_depth(const DepthImage& depth, const CameraIntrinsics& cam) {
    NormalImage out;
    out.width = depth.width;
    out.height = depth.height;
    out.normals.assign(depth.pixel_count(), Vec3::Zero());
    out.valid.assign(depth.pixel_count(), 0);

    const auto lift = [&](int r, int c) {
        const double z = depth.at(r, c);
        return Vec3((c - cam.cx) * z / cam.fx, (r - cam.cy) * z / cam.fy, z);
    };
    for (int r = 1; r + 1 < depth.height; ++r) {
        for (int c = 1; c + 1 < depth.width; ++c) {
            if (depth.at(r, c) <= 0 || depth.at(r, c - 1) <= 0 || depth.at(r, c + 1) <= 0 ||
                depth.at(r - 1, c) <= 0 || depth.at(r + 1, c) <= 0)
                continue;
            const Vec3 dx = lift(r, c + 1) - lift(r, c - 1);
            const Vec3 dy = lift(r + 1, c) - lift(r - 1, c);
            Vec3 n = dx.cross(dy);
            const double len = n.norm();
            if (len < 1e-15) continue;
            n /= len;
            if (n.z() > 0) n = -n;
            const std::size_t i = std::size_t(r) * depth.width + c;
            out.normals[i] = n;
            out.valid[i] = 1;
        }
    }
    return out;
}

PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& cam,
                       const PixelMask* mask) {
    cam.validate();
    PointCloud cloud;
    for (int r = 0; r < depth.height; ++r) {
        for (int c = 0; c < depth.width; ++c) {
            const std::size_t i = std::size_t(r) * depth.width + c;
            if (mask && !(*mask)[i]) continue;
            const double z = depth.at(r, c);
            if (z <= 0) continue;
            cloud.points.emplace_back((c - cam.cx) * z / cam.fx, (r - cam.cy) * z / cam.fy, z);
            cloud.pixel_origin.push_back({r, c});
        }
    }
    return cloud;
}

PointCloud backproject_with_normals(const DepthImage& depth, const CameraIntrinsics& cam,
                                    const PixelMask* mask) {
    cam.validate();
    const NormalImage normals = normals_from_depth(depth, cam);
    PointCloud cloud;
    for (int r = 0; r < depth.height; ++r) {
        for (int c = 0; c < depth.width; ++c) {
            const std::size_t i = std::size_t(r) * depth.width + c;
            if (mask && !(*mask)[i]) continue;
            const double z = depth.at(r, c);
            if (z <= 0 || !normals.valid[i]) continue;
            cloud.points.emplace_back((c - cam.cx) * z / cam.fx, (r - cam.cy) * z / cam.fy, z);
            cloud.normals.push_back(normals.normals[i]);
            cloud.pixel_origin.push_back({r, c});
        }
    }
    return cloud;
}

}  // namespace mipose
