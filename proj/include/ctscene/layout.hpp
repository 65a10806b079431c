#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctscene/refiner.hpp"

namespace ctscene {

// Layout primitive: axis-aligned box with a semantic class and a unique name;
// yaw is the facing direction about +z (0 = facing +x), assigned later.
struct SemanticBox {
    std::string name;
    int class_id = 0;
    Eigen::Vector3d p = Eigen::Vector3d::Zero();  // center, meters
    Eigen::Vector3d s = Eigen::Vector3d::Ones();  // size, meters, > 0
    std::optional<double> yaw;                    // (-pi, pi]
    std::optional<std::string> group;
    bool movable = true;

    double volume() const { return s.x() * s.y() * s.z(); }
    double footprint_area() const { return s.x() * s.y(); }
    Eigen::Vector3d lo() const { return p - 0.5 * s; }
    Eigen::Vector3d hi() const { return p + 0.5 * s; }

    bool operator==(const SemanticBox&) const = default;
};

struct Door {
    std::string wall;  // north | south | east | west
    double from = 0.0;
    double to = 0.0;      // span along the wall axis, absolute coordinates
    double height = 2.0;  // lintel height above the floor

    bool operator==(const Door&) const = default;
};

struct Room {
    std::string name;
    std::array<double, 4> bounds{0, 0, 0, 0};  // x0, y0, x1, y1
    double height = 2.5;
    std::vector<Door> doors;
    std::vector<SemanticBox> boxes;

    double center_x() const { return 0.5 * (bounds[0] + bounds[2]); }
    double center_y() const { return 0.5 * (bounds[1] + bounds[3]); }

    bool operator==(const Room&) const = default;
};

struct OrientationRelation {
    std::string subject;
    std::string target;  // subject faces target

    bool operator==(const OrientationRelation&) const = default;
};

struct HouseLayout {
    std::vector<Room> rooms;
    std::vector<OrientationRelation> relations;
    bool snap_orientations = false;

    const SemanticBox* find_box(const std::string& name) const;
    bool operator==(const HouseLayout&) const = default;
};

enum class ViolationKind { kOverlap, kOutOfBounds, kNameCollision };

struct Violation {
    ViolationKind kind;
    std::vector<std::string> subjects;
    double magnitude;  // overlap volume (m^3) or protrusion distance (m)
};

struct ViolationReport {
    std::vector<Violation> violations;

    bool empty() const { return violations.empty(); }
    double total_overlap_volume() const;
    double total_protrusion() const;
    nlohmann::json to_json() const;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Layout document I/O.  Duplicate box names anywhere in the house are
// rejected; schema violations carry the JSON path in the message.
HouseLayout parse_layout(const nlohmann::json& doc);
HouseLayout parse_layout(const std::string& text);
nlohmann::json serialize_layout(const HouseLayout& h);

// Axis-aligned intersection volume with yaw ignored; boxes with disjoint
// z-extents never conflict.
double overlap_volume(const SemanticBox& a, const SemanticBox& b);

// Every box pair above eps_overlap plus every box protruding from its room,
// in deterministic name order.
ViolationReport validate(const HouseLayout& h, double eps_overlap = 1e-6);

// One deterministic correction: the worst overlapping pair is separated by
// translating the smaller box (least-penetration axis first, clamped to the
// room), accepting only moves that strictly reduce the total violation.
HouseLayout deterministic_refine_step(const HouseLayout& h, double eps_overlap = 1e-6);

struct RefineOutcome {
    HouseLayout layout;
    int iterations;
    ViolationReport report;
};

// Serialize -> validate -> refine dialogue loop until clean or the round
// budget is spent.  Refiner failures and unparsable programs fall back to the
// deterministic step for that round; the best layout seen (by total overlap)
// is never lost.
RefineOutcome refine_loop(const HouseLayout& h, Refiner& refiner, int max_iter,
                          double eps_overlap = 1e-6);

// Per functional group, a reference object (largest footprint, name tiebreak)
// faces the room center; every related box faces its target; cycles are
// broken at the reference.  Boxes without a relation face the room center.
HouseLayout assign_orientations(const HouseLayout& h,
                                const std::vector<OrientationRelation>& relations);

double normalize_yaw(double yaw);
double snap_yaw(double yaw);  // nearest of {0, pi/2, pi, -pi/2}

// Walls, floor and ceiling as named axis-aligned quads (OBJ text); door spans
// are cut out of their wall.
std::string export_planar_mesh(const HouseLayout& h);

}  // namespace ctscene
