#include "ctscene/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "ctscene/io.hpp"

namespace ctscene {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Axes {
    int travel;  // 0 = x, 1 = y: the longer side
    int cross;
    double t_lo, t_hi;  // travel span
    double c_lo, c_hi;  // cross span
};

Axes pick_axes(const std::array<double, 4>& bounds) {
    double lx = bounds[2] - bounds[0];
    double ly = bounds[3] - bounds[1];
    if (!(lx > 0.0 && ly > 0.0)) {
        throw std::invalid_argument("trajectory: degenerate room bounds");
    }
    Axes a;
    if (lx >= ly) {
        a.travel = 0;
        a.cross = 1;
        a.t_lo = bounds[0];
        a.t_hi = bounds[2];
        a.c_lo = bounds[1];
        a.c_hi = bounds[3];
    } else {
        a.travel = 1;
        a.cross = 0;
        a.t_lo = bounds[1];
        a.t_hi = bounds[3];
        a.c_lo = bounds[0];
        a.c_hi = bounds[2];
    }
    return a;
}

Eigen::Vector3d assemble(const Axes& a, double travel, double cross, double z) {
    Eigen::Vector3d v;
    v[a.travel == 0 ? 0 : 1] = travel;
    v[a.cross == 0 ? 0 : 1] = cross;
    v[2] = z;
    return v;
}

}  // namespace

std::vector<CameraWaypoint> zigzag_trajectory(const std::array<double, 4>& bounds,
                                              int n_waypoints, const TrajectoryParams& params) {
    if (n_waypoints < 2) {
        throw std::invalid_argument("zigzag_trajectory: need at least 2 waypoints");
    }
    if (!(params.h_min > 0.0 && params.h_max >= params.h_min)) {
        throw std::invalid_argument("zigzag_trajectory: invalid height range");
    }
    Axes ax = pick_axes(bounds);
    const double m = params.margin;
    const double travel_len = ax.t_hi - ax.t_lo - 2.0 * m;
    const double cross_sep = ax.c_hi - ax.c_lo - 2.0 * m;  // camera-to-target wall distance
    if (travel_len <= 0.0 || cross_sep <= 0.0) {
        throw std::invalid_argument("zigzag_trajectory: margin " + format_double(m) +
                                    " leaves no interior");
    }
    if (cross_sep < params.d_min) {
        throw std::invalid_argument("zigzag_trajectory: d_min " + format_double(params.d_min) +
                                    " unattainable, wall separation is " +
                                    format_double(cross_sep));
    }

    // amplitude within the view-angle budget: tan(theta) bounds the lateral
    // offset (2A) and the height split against the wall separation
    const double tan_budget = std::tan(params.max_view_angle_deg * kPi / 180.0) * 0.95;
    const double dz_max = params.h_max - params.h_min;
    double amp_cap2 = tan_budget * tan_budget * cross_sep * cross_sep - dz_max * dz_max;
    double amplitude = params.amplitude;
    if (amplitude < 0.0) {
        amplitude = amp_cap2 > 0.0 ? 0.5 * std::sqrt(amp_cap2) : 0.0;
        amplitude = std::min(amplitude, 0.45 * travel_len);
    }

    // drift span shrunk so travel + zig stays inside the margin frame
    const double drift_lo = ax.t_lo + m + amplitude;
    const double drift_hi = ax.t_hi - m - amplitude;
    if (drift_hi <= drift_lo) {
        throw std::invalid_argument("zigzag_trajectory: amplitude leaves no drift span");
    }

    // zig direction flips every k steps; the slope target keeps each step's
    // lateral motion dominant over the drift so opposite-motion holds
    const int steps = n_waypoints - 1;
    const double drift_step = (drift_hi - drift_lo) / steps;
    double period = params.lateral_period > 0.0 ? params.lateral_period : travel_len / 3.0;
    int cycles = std::max(1, static_cast<int>(std::lround(travel_len / period)));
    if (amplitude > 0.0) {
        int needed = static_cast<int>(std::ceil(1.4 * (drift_hi - drift_lo) / (2.0 * amplitude)));
        cycles = std::max(cycles, needed);
    }
    int k = std::max(1, steps / (2 * cycles));

    const double zig_step = amplitude > 0.0 ? amplitude / k : 0.0;
    if (zig_step <= drift_step && dz_max / steps <= drift_step) {
        throw std::invalid_argument(
            "zigzag_trajectory: lateral amplitude too small to dominate the drift; "
            "opposite-motion cannot hold");
    }

    std::vector<CameraWaypoint> wps;
    wps.reserve(n_waypoints);
    double zig = 0.0;
    double dir = 1.0;
    for (int i = 0; i < n_waypoints; ++i) {
        double u = static_cast<double>(i) / steps;
        // shared drift, mirrored zigzag: the pair stays laterally close while
        // each step's lateral motions oppose
        double cam_travel = drift_lo + (drift_hi - drift_lo) * u + zig;
        double tgt_travel = drift_lo + (drift_hi - drift_lo) * u - zig;
        double z_target = params.h_min + dz_max * u;
        double z_camera = params.h_min + params.h_max - z_target;

        CameraWaypoint wp;
        wp.camera = assemble(ax, cam_travel, ax.c_lo + m, z_camera);
        wp.target = assemble(ax, tgt_travel, ax.c_hi - m, z_target);
        wps.push_back(wp);

        // advance the zig; flip at the amplitude rails
        zig += dir * zig_step;
        if (zig > amplitude - 1e-12 || zig < -amplitude + 1e-12) {
            zig = std::clamp(zig, -amplitude, amplitude);
            dir = -dir;
        }
    }
    return wps;
}

std::vector<CameraWaypoint> center_rotation_trajectory(const std::array<double, 4>& bounds,
                                                       int n_waypoints,
                                                       const TrajectoryParams& params) {
    if (n_waypoints < 2) {
        throw std::invalid_argument("center_rotation_trajectory: need at least 2 waypoints");
    }
    const double cx = 0.5 * (bounds[0] + bounds[2]);
    const double cy = 0.5 * (bounds[1] + bounds[3]);
    const double m = params.margin;
    const double z_cam = 0.5 * (params.h_min + params.h_max);

    std::vector<CameraWaypoint> wps;
    wps.reserve(n_waypoints);
    for (int i = 0; i < n_waypoints; ++i) {
        double phi = 2.0 * kPi * i / n_waypoints;
        // cast the ray from the center to the inset wall frame
        double dx = std::cos(phi), dy = std::sin(phi);
        double tx = dx > 0 ? (bounds[2] - m - cx) / dx : dx < 0 ? (bounds[0] + m - cx) / dx : 1e30;
        double ty = dy > 0 ? (bounds[3] - m - cy) / dy : dy < 0 ? (bounds[1] + m - cy) / dy : 1e30;
        double t = std::min(tx, ty);
        CameraWaypoint wp;
        wp.camera = {cx, cy, z_cam};
        wp.target = {cx + t * dx, cy + t * dy, z_cam};
        wps.push_back(wp);
    }
    return wps;
}

double view_angle_from_wall_deg(const CameraWaypoint& wp, const std::array<double, 4>& bounds) {
    Eigen::Vector3d ray = wp.target - wp.camera;
    double n = ray.norm();
    if (n == 0.0) {
        throw std::invalid_argument("view angle: camera and target coincide");
    }
    // nearest wall to the target decides the normal
    double d_west = wp.target.x() - bounds[0];
    double d_east = bounds[2] - wp.target.x();
    double d_south = wp.target.y() - bounds[1];
    double d_north = bounds[3] - wp.target.y();
    double best = d_west;
    Eigen::Vector3d normal(1, 0, 0);
    if (d_east < best) {
        best = d_east;
        normal = {-1, 0, 0};
    }
    if (d_south < best) {
        best = d_south;
        normal = {0, 1, 0};
    }
    if (d_north < best) {
        best = d_north;
        normal = {0, -1, 0};
    }
    double cosa = std::abs(ray.dot(normal)) / n;
    return std::acos(std::clamp(cosa, -1.0, 1.0)) * 180.0 / kPi;
}

nlohmann::json waypoints_to_json(const std::vector<CameraWaypoint>& wps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& wp : wps) {
        arr.push_back({
            {"camera", {wp.camera.x(), wp.camera.y(), wp.camera.z()}},
            {"target", {wp.target.x(), wp.target.y(), wp.target.z()}},
            {"up", {wp.up.x(), wp.up.y(), wp.up.z()}},
        });
    }
    return arr;
}

void DepthBuffers::validate() const {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("depth buffers: empty resolution");
    }
    size_t n = static_cast<size_t>(width) * height;
    if (furniture_rgba.size() != 4 * n || layout_rgba.size() != 4 * n ||
        furniture_depth.size() != n || layout_depth.size() != n) {
        throw std::invalid_argument("depth buffers: resolution mismatch across planes");
    }
    for (float d : furniture_depth) {
        if (d < 0.0f) throw std::invalid_argument("depth buffers: negative furniture depth");
    }
    for (float d : layout_depth) {
        if (d < 0.0f) throw std::invalid_argument("depth buffers: negative layout depth");
    }
}

std::vector<float> composite(const DepthBuffers& b) {
    b.validate();
    size_t n = static_cast<size_t>(b.width) * b.height;
    std::vector<float> out(4 * n);
    for (size_t i = 0; i < n; ++i) {
        const float* src =
            b.furniture_depth[i] <= b.layout_depth[i] ? &b.furniture_rgba[4 * i] : &b.layout_rgba[4 * i];
        std::copy(src, src + 4, &out[4 * i]);
    }
    return out;
}

Eigen::Vector3d uv_to_sphere(double u, double v) {
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
        log_warn("uv_to_sphere: (u, v) outside [0,1]^2, clamping");
        u = std::clamp(u, 0.0, 1.0);
        v = std::clamp(v, 0.0, 1.0);
    }
    double theta = 2.0 * kPi * u;
    double phi = kPi * v;
    return {std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi)};
}

}  // namespace ctscene
