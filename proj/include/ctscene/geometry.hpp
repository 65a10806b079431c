#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include <json.hpp>

namespace ctscene {

struct CameraWaypoint {
    Eigen::Vector3d camera;
    Eigen::Vector3d target;
    Eigen::Vector3d up{0.0, 0.0, 1.0};
};

struct TrajectoryParams {
    double margin = 0.3;  // wall offset for both camera and target
    double h_min = 0.5;
    double h_max = 1.8;
    double d_min = 1.0;          // minimum camera-target distance
    double lateral_period = 0.0;  // zigzag period along the travel axis; 0 = length/3
    double amplitude = -1.0;      // zigzag amplitude; < 0 = fitted to the view-angle budget
    double max_view_angle_deg = 60.0;
};

// Wall-following sweep: camera and target ride opposite walls with a shared
// slow drift and mirrored zigzag offsets, so each step the target moves
// opposite to the camera while the pair stays laterally close; camera height
// reflects the target height (h_min + h_max - h_target).  Every step's camera
// and target xy-displacements have negative dot product, the view rays stay
// within the wall-normal angle budget, and the camera-target distance never
// drops below d_min.
std::vector<CameraWaypoint> zigzag_trajectory(const std::array<double, 4>& bounds,
                                              int n_waypoints, const TrajectoryParams& params);

// Baseline for comparison: camera fixed at the room center, target sweeping
// the perimeter.  In narrow rooms the view rays graze the long walls.
std::vector<CameraWaypoint> center_rotation_trajectory(const std::array<double, 4>& bounds,
                                                       int n_waypoints,
                                                       const TrajectoryParams& params);

// angle between the view ray and the normal of the wall nearest to the target
double view_angle_from_wall_deg(const CameraWaypoint& wp, const std::array<double, 4>& bounds);

nlohmann::json waypoints_to_json(const std::vector<CameraWaypoint>& wps);

// Row-major RGBA float buffers plus depth, same resolution across all four.
struct DepthBuffers {
    int width = 0;
    int height = 0;
    std::vector<float> furniture_rgba;   // w*h*4
    std::vector<float> furniture_depth;  // w*h
    std::vector<float> layout_rgba;
    std::vector<float> layout_depth;

    void validate() const;  // throws std::invalid_argument on shape mismatch
};

// Per-pixel depth test, ties to furniture: out = D_f <= D_l ? I_f : I_l.
std::vector<float> composite(const DepthBuffers& b);

// (u, v) in [0,1]^2 as spherical angles: theta = 2 pi u, phi = pi v;
// out-of-range inputs are clamped with a warning.
Eigen::Vector3d uv_to_sphere(double u, double v);

}  // namespace ctscene
