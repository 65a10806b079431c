#pragma once

#include <optional>

#include "ctscene/layout.hpp"

namespace ctscene {

struct RigidProxy {
    SemanticBox box;
    bool movable = true;
};

struct BoxTransform {
    std::string name;
    Eigen::Vector3d dt = Eigen::Vector3d::Zero();
    double dyaw = 0.0;  // rotation is delegated to an external engine
};

struct UnsupportedConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SettleParams {
    Eigen::Vector3d gravity{0.0, 0.0, -1.0};  // unit length
    double tau = 0.3;                         // minimum support overlap fraction
    std::optional<std::array<double, 4>> room_bounds;  // clamp frame for side steps
};

// Gravity settling over axis-aligned proxies.  With vertical gravity, movable
// boxes are processed bottom-up; each drops to the highest resting surface
// below it (floor or a placed top covering at least tau of its footprint).
// Sub-threshold overlaps on the way down are resolved by minimal horizontal
// separation so the settled scene is interpenetration-free.  Non-vertical
// gravity is restricted to the single-box floor-projection case.
std::vector<BoxTransform> settle(const std::vector<RigidProxy>& proxies,
                                 const SettleParams& params);

std::vector<RigidProxy> apply_transforms(const std::vector<RigidProxy>& proxies,
                                         const std::vector<BoxTransform>& transforms);

// pairwise overlap audit of a settled scene; reuses the layout overlap rule
ViolationReport interpenetration_check(const std::vector<RigidProxy>& proxies,
                                       double eps_overlap = 1e-6);

// true when every movable box rests on the floor or on a top face covering at
// least tau of its footprint, within tolerance
bool support_soundness(const std::vector<RigidProxy>& proxies, double tau, double tol = 1e-9);

nlohmann::json transforms_to_json(const std::vector<BoxTransform>& transforms);
std::vector<BoxTransform> transforms_from_json(const nlohmann::json& j);

// proxies of one room's boxes, movability taken from the box flags
std::vector<RigidProxy> proxies_from_room(const Room& room);

}  // namespace ctscene
