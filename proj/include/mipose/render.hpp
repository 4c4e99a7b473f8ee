#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mipose/geometry.hpp"

namespace mipose {

struct CameraIntrinsics {
    double fx = 280.0;
    double fy = 280.0;
    double cx = 160.0;
    double cy = 120.0;
    int width = 320;
    int height = 240;

    void validate() const {
        if (fx <= 0 || fy <= 0 || width <= 0 || height <= 0 || cx < 0 || cx >= width ||
            cy < 0 || cy >= height)
            throw DataError("CameraIntrinsics: degenerate parameters");
    }
    double image_diagonal() const;
};

/// Per-pixel depth in meters along +z (the viewing direction); 0 = no return.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<double> depth;

    DepthImage() = default;
    DepthImage(int w, int h) : width(w), height(h), depth(std::size_t(w) * h, 0.0) {}
    double at(int row, int col) const { return depth[std::size_t(row) * width + col]; }
    double& at(int row, int col) { return depth[std::size_t(row) * width + col]; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }
    std::size_t pixel_count() const { return depth.size(); }
};

using PixelMask = std::vector<std::uint8_t>;  // one byte per pixel, row-major

struct RenderResult {
    DepthImage depth;
    PixelMask visible_mask;
    PixelMask boundary_mask;
    std::vector<Vec3> normals;  // camera-frame, valid where visible_mask is set

    int visible_count() const;
    int boundary_count() const;
};

struct RenderOptions {
    /// Depth discontinuity (meters) between adjacent visible pixels that marks
    /// a self-occlusion boundary. <= 0 derives d_l/10 from the model.
    double occlusion_jump = -1.0;
    /// When false, the boundary mask keeps only the outer silhouette.
    bool include_occlusion_boundary = true;
};

/// Z-buffer rasterization of the model at `pose`. Deterministic; a model
/// entirely behind the camera yields an empty result.
RenderResult render_depth(const MeshModel& model, const RigidTransform& pose,
                          const CameraIntrinsics& cam, const RenderOptions& opts = {});

struct PlacedModel {
    const MeshModel* model = nullptr;
    RigidTransform pose;
};

struct SceneRender {
    DepthImage depth;
    std::vector<std::int32_t> instance_ids;  // -1 = background
    std::vector<std::int32_t> class_ids;     // 0 = background
    PixelMask boundary_mask;                 // instance-transition pixels
};

/// Joint z-buffer over all placed instances. The boundary mask holds
/// foreground pixels whose 8-neighborhood contains a different instance id
/// (background and out-of-image both count as different).
SceneRender render_scene_depth(std::span<const PlacedModel> placed,
                               const CameraIntrinsics& cam);

struct NormalImage {
    int width = 0;
    int height = 0;
    std::vector<Vec3> normals;
    PixelMask valid;

    bool is_valid(int row, int col) const { return valid[std::size_t(row) * width + col] != 0; }
    const Vec3& at(int row, int col) const { return normals[std::size_t(row) * width + col]; }
};

/// Central-difference surface normals, oriented toward the camera (n_z < 0).
/// Pixels without four valid axis neighbors are marked absent.
NormalImage normals_from_depth(const DepthImage& depth, const CameraIntrinsics& cam);

/// Pinhole inverse projection of valid pixels; retains pixel origins.
/// The optional mask restricts which pixels are lifted.
PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& cam,
                       const PixelMask* mask = nullptr);

/// As `backproject`, additionally attaching depth-derived normals and
/// dropping pixels whose normal is undefined.
PointCloud backproject_with_normals(const DepthImage& depth, const CameraIntrinsics& cam,
                                    const PixelMask* mask = nullptr);

}  // namespace mipose
