// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <vector>

namespace fsplat {

/// Pinhole camera with a world-to-camera pose: p_cam = rotation * p_world + translation.
/// Pixel (col, row) has its center at (col + 0.5, row + 0.5).
struct Camera {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    double near = 0.01;

    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    /// Camera at `eye` looking at `target`, +y of the image pointing along -up.
    static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up, double fov_x_radians, int width, int height);

    /// Orthonormal rotation, positive focal lengths and near plane.
    bool valid() const;
};

/// H x W x 3 image stored row-major with interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(Eigen::ArrayXd::Zero(Eigen::Index(w) * h * 3)) {}

    double& at(int row, int col, int ch) { return pixels[(Eigen::Index(row) * width + col) * 3 + ch]; }
    double at(int row, int col, int ch) const { return pixels[(Eigen::Index(row) * width + col) * 3 + ch]; }

    Eigen::Index pixel_count() const { return Eigen::Index(width) * height; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
    bool all_finite() const { return pixels.allFinite(); }
};

/// A camera with its ground-truth image.
struct View {
    Camera camera;
    Image image;
};

}  // namespace fsplat
