#include "ctscene/physics.hpp"

#include <algorithm>
#include <cmath>

namespace ctscene {

namespace {

constexpr double kEps = 1e-9;

double xy_overlap_area(const SemanticBox& a, const SemanticBox& b) {
    double w = std::min(a.hi().x(), b.hi().x()) - std::max(a.lo().x(), b.lo().x());
    double d = std::min(a.hi().y(), b.hi().y()) - std::max(a.lo().y(), b.lo().y());
    if (w <= 0.0 || d <= 0.0) return 0.0;
    return w * d;
}

bool z_intersects(double lo_a, double hi_a, double lo_b, double hi_b) {
    return std::min(hi_a, hi_b) - std::max(lo_a, lo_b) > kEps;
}

void clamp_xy(SemanticBox& b, const std::optional<std::array<double, 4>>& bounds) {
    if (!bounds) return;
    const auto& r = *bounds;
    auto clamp_axis = [](double p, double half, double lo, double hi) {
        if (hi - lo <= 2 * half) return 0.5 * (lo + hi);
        return std::clamp(p, lo + half, hi - half);
    };
    b.p.x() = clamp_axis(b.p.x(), 0.5 * b.s.x(), r[0], r[2]);
    b.p.y() = clamp_axis(b.p.y(), 0.5 * b.s.y(), r[1], r[3]);
}

// single box projected along gravity until its bottom touches the floor plane
BoxTransform project_to_floor(const RigidProxy& proxy, const Eigen::Vector3d& gravity) {
    if (gravity.z() >= -kEps) {
        throw UnsupportedConfiguration("settle: gravity must point below the horizon");
    }
    double bottom = proxy.box.lo().z();
    double travel = bottom / (-gravity.z());
    BoxTransform t;
    t.name = proxy.box.name;
    t.dt = gravity * travel;
    return t;
}

}  // namespace

std::vector<BoxTransform> settle(const std::vector<RigidProxy>& proxies,
                                 const SettleParams& params) {
    if (std::abs(params.gravity.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("settle: gravity must be unit length");
    }
    if (!(params.tau > 0.0 && params.tau <= 1.0)) {
        throw std::invalid_argument("settle: tau must lie in (0, 1]");
    }

    const bool vertical = (params.gravity - Eigen::Vector3d(0, 0, -1)).norm() <= 1e-9;
    if (!vertical) {
        if (proxies.size() != 1 || !proxies.front().movable) {
            throw UnsupportedConfiguration(
                "settle: tilted gravity supports only a single movable box on the floor plane");
        }
        return {project_to_floor(proxies.front(), params.gravity)};
    }

    // static boxes are supports from the start
    std::vector<SemanticBox> placed;
    std::vector<const RigidProxy*> movers;
    for (const auto& p : proxies) {
        if (p.movable) {
            movers.push_back(&p);
        } else {
            placed.push_back(p.box);
        }
    }
    std::sort(movers.begin(), movers.end(), [](const RigidProxy* a, const RigidProxy* b) {
        double ba = a->box.lo().z(), bb = b->box.lo().z();
        if (ba != bb) return ba < bb;
        return a->box.name < b->box.name;
    });

    std::vector<BoxTransform> transforms(proxies.size());
    for (size_t i = 0; i < proxies.size(); ++i) {
        transforms[i].name = proxies[i].box.name;
    }
    auto transform_of = [&](const std::string& name) -> BoxTransform& {
        for (auto& t : transforms) {
            if (t.name == name) return t;
        }
        throw std::logic_error("settle: transform slot missing");
    };

    // descent outcome at the box's current xy: the resting height, and the
    // worst box the destination column would cut through (if any)
    struct Drop {
        double rest;
        const SemanticBox* blocker;
    };
    auto drop_result = [&](const SemanticBox& b, const std::vector<SemanticBox>& placed_boxes) {
        const double foot = b.footprint_area();
        double cur_bottom = b.lo().z();
        Drop d{0.0, nullptr};
        for (const auto& p : placed_boxes) {
            double top = p.hi().z();
            if (top > cur_bottom + kEps) continue;
            if (xy_overlap_area(b, p) >= params.tau * foot) {
                d.rest = std::max(d.rest, top);
            }
        }
        double blocker_area = 0.0;
        for (const auto& p : placed_boxes) {
            double a = xy_overlap_area(b, p);
            if (a <= kEps) continue;
            if (std::abs(p.hi().z() - d.rest) <= kEps && a >= params.tau * foot) {
                continue;  // the support itself
            }
            if (z_intersects(d.rest, d.rest + b.s.z(), p.lo().z(), p.hi().z())) {
                if (a > blocker_area ||
                    (a == blocker_area && d.blocker && p.name < d.blocker->name)) {
                    d.blocker = &p;
                    blocker_area = a;
                }
            }
        }
        return d;
    };

    for (const RigidProxy* mover : movers) {
        SemanticBox b = mover->box;
        bool settled = false;

        // minimal horizontal separations from whatever blocks the drop
        for (int attempt = 0; attempt < 24 && !settled; ++attempt) {
            Drop d = drop_result(b, placed);
            if (d.blocker == nullptr) {
                b.p.z() = d.rest + 0.5 * b.s.z();
                settled = true;
                break;
            }
            const SemanticBox* blocker = d.blocker;
            double dx =
                std::min(b.hi().x(), blocker->hi().x()) - std::max(b.lo().x(), blocker->lo().x());
            double dy =
                std::min(b.hi().y(), blocker->hi().y()) - std::max(b.lo().y(), blocker->lo().y());
            Eigen::Vector3d before = b.p;
            int axis = dx <= dy ? 0 : 1;
            double depth = axis == 0 ? dx : dy;
            double dir = b.p[axis] >= blocker->p[axis] ? 1.0 : -1.0;
            b.p[axis] += dir * (depth + 1e-6);
            clamp_xy(b, params.room_bounds);
            if ((b.p - before).norm() <= kEps) {
                b.p[axis] -= dir * (depth + 1e-6) * 2.0;
                clamp_xy(b, params.room_bounds);
            }
            if ((b.p - before).norm() <= kEps) {
                axis = 1 - axis;
                depth = axis == 0 ? dx : dy;
                dir = b.p[axis] >= blocker->p[axis] ? 1.0 : -1.0;
                b.p[axis] += dir * (depth + 1e-6);
                clamp_xy(b, params.room_bounds);
            }
        }

        if (!settled) {
            // crowded pocket: deterministic sweep for the nearest clear column
            std::array<double, 4> frame;
            if (params.room_bounds) {
                frame = *params.room_bounds;
            } else {
                frame = {b.lo().x(), b.lo().y(), b.hi().x(), b.hi().y()};
                for (const auto& p : placed) {
                    frame[0] = std::min(frame[0], p.lo().x() - b.s.x());
                    frame[1] = std::min(frame[1], p.lo().y() - b.s.y());
                    frame[2] = std::max(frame[2], p.hi().x() + b.s.x());
                    frame[3] = std::max(frame[3], p.hi().y() + b.s.y());
                }
            }
            double step = std::max(0.25, 0.5 * std::min(b.s.x(), b.s.y()));
            const Eigen::Vector3d origin = mover->box.p;
            double best_d = std::numeric_limits<double>::infinity();
            SemanticBox best = b;
            for (double x = frame[0] + 0.5 * b.s.x(); x <= frame[2] - 0.5 * b.s.x() + kEps;
                 x += step) {
                for (double y = frame[1] + 0.5 * b.s.y(); y <= frame[3] - 0.5 * b.s.y() + kEps;
                     y += step) {
                    SemanticBox cand = b;
                    cand.p.x() = x;
                    cand.p.y() = y;
                    Drop drop = drop_result(cand, placed);
                    if (drop.blocker != nullptr) continue;
                    cand.p.z() = drop.rest + 0.5 * cand.s.z();
                    double d = std::hypot(x - origin.x(), y - origin.y());
                    if (d < best_d) {
                        best_d = d;
                        best = cand;
                    }
                }
            }
            if (!std::isfinite(best_d)) {
                throw std::runtime_error("settle: no interpenetration-free spot for '" + b.name +
                                         "'");
            }
            b = best;
        }

        BoxTransform& t = transform_of(b.name);
        t.dt = b.p - mover->box.p;
        placed.push_back(b);
    }
    return transforms;
}

std::vector<RigidProxy> apply_transforms(const std::vector<RigidProxy>& proxies,
                                         const std::vector<BoxTransform>& transforms) {
    std::vector<RigidProxy> out = proxies;
    for (auto& p : out) {
        for (const auto& t : transforms) {
            if (t.name == p.box.name) {
                p.box.p += t.dt;
                break;
            }
        }
    }
    return out;
}

ViolationReport interpenetration_check(const std::vector<RigidProxy>& proxies,
                                       double eps_overlap) {
    ViolationReport report;
    std::vector<const RigidProxy*> sorted;
    for (const auto& p : proxies) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const RigidProxy* a, const RigidProxy* b) { return a->box.name < b->box.name; });
    for (size_t i = 0; i < sorted.size(); ++i) {
        for (size_t j = i + 1; j < sorted.size(); ++j) {
            double vol = overlap_volume(sorted[i]->box, sorted[j]->box);
            if (vol > eps_overlap) {
                report.violations.push_back({ViolationKind::kOverlap,
                                             {sorted[i]->box.name, sorted[j]->box.name},
                                             vol});
            }
        }
    }
    return report;
}

bool support_soundness(const std::vector<RigidProxy>& proxies, double tau, double tol) {
    for (const auto& p : proxies) {
        if (!p.movable) continue;
        double bottom = p.box.lo().z();
        if (std::abs(bottom) <= tol) continue;  // on the floor
        bool supported = false;
        for (const auto& q : proxies) {
            if (&q == &p) continue;
            if (std::abs(q.box.hi().z() - bottom) <= tol &&
                xy_overlap_area(p.box, q.box) >= tau * p.box.footprint_area() - tol) {
                supported = true;
                break;
            }
        }
        if (!supported) return false;
    }
    return true;
}

nlohmann::json transforms_to_json(const std::vector<BoxTransform>& transforms) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : transforms) {
        arr.push_back({{"name", t.name},
                       {"dt", {t.dt.x(), t.dt.y(), t.dt.z()}},
                       {"dyaw", t.dyaw}});
    }
    return arr;
}

std::vector<BoxTransform> transforms_from_json(const nlohmann::json& j) {
    std::vector<BoxTransform> out;
    for (const auto& tj : j) {
        BoxTransform t;
        t.name = tj.at("name").get<std::string>();
        auto dt = tj.at("dt").get<std::vector<double>>();
        if (dt.size() != 3) {
            throw std::invalid_argument("transforms: dt must have 3 entries");
        }
        t.dt = {dt[0], dt[1], dt[2]};
        t.dyaw = tj.value("dyaw", 0.0);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<RigidProxy> proxies_from_room(const Room& room) {
    std::vector<RigidProxy> out;
    for (const auto& b : room.boxes) {
        out.push_back({b, b.movable});
    }
    return out;
}

}  // namespace ctscene
