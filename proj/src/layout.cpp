#include "ctscene/layout.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "ctscene/io.hpp"

namespace ctscene {

namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ParseError(path + ": " + what);
}

double require_number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

std::string require_string(const nlohmann::json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

Eigen::Vector3d require_vec3(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v[i] = require_number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

}  // namespace

const SemanticBox* HouseLayout::find_box(const std::string& name) const {
    for (const auto& r : rooms) {
        for (const auto& b : r.boxes) {
            if (b.name == name) return &b;
        }
    }
    return nullptr;
}

double ViolationReport::total_overlap_volume() const {
    double acc = 0.0;
    for (const auto& v : violations) {
        if (v.kind == ViolationKind::kOverlap) acc += v.magnitude;
    }
    return acc;
}

double ViolationReport::total_protrusion() const {
    double acc = 0.0;
    for (const auto& v : violations) {
        if (v.kind == ViolationKind::kOutOfBounds) acc += v.magnitude;
    }
    return acc;
}

nlohmann::json ViolationReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : violations) {
        const char* kind = v.kind == ViolationKind::kOverlap       ? "overlap"
                           : v.kind == ViolationKind::kOutOfBounds ? "out_of_bounds"
                                                                   : "name_collision";
        arr.push_back({{"kind", kind}, {"subjects", v.subjects}, {"magnitude", v.magnitude}});
    }
    return arr;
}

double normalize_yaw(double yaw) {
    double y = std::fmod(yaw + kPi, 2.0 * kPi);
    if (y <= 0.0) y += 2.0 * kPi;
    return y - kPi;
}

double snap_yaw(double yaw) {
    static const double cardinals[4] = {0.0, kPi / 2.0, kPi, -kPi / 2.0};
    double best = cardinals[0];
    double best_d = 10.0;
    for (double c : cardinals) {
        double d = std::abs(normalize_yaw(yaw - c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

HouseLayout parse_layout(const nlohmann::json& doc) {
    if (!doc.is_object()) fail("$", "expected an object");
    if (!doc.contains("rooms") || !doc["rooms"].is_array()) fail("$.rooms", "expected an array");

    HouseLayout h;
    std::set<std::string> names;
    int ri = 0;
    for (const auto& rj : doc["rooms"]) {
        std::string rpath = "$.rooms[" + std::to_string(ri++) + "]";
        if (!rj.is_object()) fail(rpath, "expected an object");
        Room room;
        room.name = require_string(rj.value("name", nlohmann::json()), rpath + ".name");
        if (!rj.contains("bounds") || !rj["bounds"].is_array() || rj["bounds"].size() != 4) {
            fail(rpath + ".bounds", "expected [x0, y0, x1, y1]");
        }
        for (int i = 0; i < 4; ++i) {
            room.bounds[i] = require_number(rj["bounds"][i], rpath + ".bounds");
        }
        if (!(room.bounds[0] < room.bounds[2] && room.bounds[1] < room.bounds[3])) {
            fail(rpath + ".bounds", "degenerate rectangle");
        }
        room.height = rj.value("height", 2.5);
        if (!(room.height > 0.0)) fail(rpath + ".height", "must be positive");

        if (rj.contains("doors")) {
            int di = 0;
            for (const auto& dj : rj["doors"]) {
                std::string dpath = rpath + ".doors[" + std::to_string(di++) + "]";
                Door door;
                door.wall = require_string(dj.value("wall", nlohmann::json()), dpath + ".wall");
                if (door.wall != "north" && door.wall != "south" && door.wall != "east" &&
                    door.wall != "west") {
                    fail(dpath + ".wall", "expected north|south|east|west");
                }
                door.from = require_number(dj.value("from", nlohmann::json()), dpath + ".from");
                door.to = require_number(dj.value("to", nlohmann::json()), dpath + ".to");
                if (!(door.from < door.to)) fail(dpath, "requires from < to");
                door.height = dj.value("height", 2.0);
                if (!(door.height > 0.0)) fail(dpath + ".height", "must be positive");
                bool along_x = door.wall == "north" || door.wall == "south";
                double lo = along_x ? room.bounds[0] : room.bounds[1];
                double hi = along_x ? room.bounds[2] : room.bounds[3];
                if (door.from < lo - 1e-9 || door.to > hi + 1e-9) {
                    fail(dpath, "span outside the wall");
                }
                room.doors.push_back(door);
            }
        }

        if (rj.contains("boxes")) {
            int bi = 0;
            for (const auto& bj : rj["boxes"]) {
                std::string bpath = rpath + ".boxes[" + std::to_string(bi++) + "]";
                SemanticBox box;
                box.name = require_string(bj.value("name", nlohmann::json()), bpath + ".name");
                if (!names.insert(box.name).second) {
                    fail(bpath + ".name", "name_collision: duplicate box name '" + box.name + "'");
                }
                box.class_id = bj.value("class", 0);
                box.p = require_vec3(bj.value("p", nlohmann::json()), bpath + ".p");
                box.s = require_vec3(bj.value("s", nlohmann::json()), bpath + ".s");
                if (!(box.s.array() > 0.0).all()) fail(bpath + ".s", "sizes must be positive");
                if (bj.contains("yaw")) {
                    box.yaw = normalize_yaw(require_number(bj["yaw"], bpath + ".yaw"));
                }
                if (bj.contains("group")) {
                    box.group = require_string(bj["group"], bpath + ".group");
                }
                box.movable = bj.value("movable", true);
                room.boxes.push_back(std::move(box));
            }
        }
        h.rooms.push_back(std::move(room));
    }

    if (doc.contains("relations")) {
        int i = 0;
        for (const auto& rj : doc["relations"]) {
            std::string path = "$.relations[" + std::to_string(i++) + "]";
            OrientationRelation rel;
            rel.subject = require_string(rj.value("subject", nlohmann::json()), path + ".subject");
            rel.target = require_string(rj.value("target", nlohmann::json()), path + ".target");
            if (!names.count(rel.subject)) fail(path + ".subject", "unknown box name");
            if (!names.count(rel.target)) fail(path + ".target", "unknown box name");
            h.relations.push_back(std::move(rel));
        }
    }
    h.snap_orientations = doc.value("snap_orientations", false);
    return h;
}

HouseLayout parse_layout(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        throw ParseError("$: not valid JSON");
    }
    return parse_layout(doc);
}

nlohmann::json serialize_layout(const HouseLayout& h) {
    nlohmann::json rooms = nlohmann::json::array();
    for (const auto& r : h.rooms) {
        nlohmann::json boxes = nlohmann::json::array();
        for (const auto& b : r.boxes) {
            nlohmann::json bj{
                {"name", b.name},
                {"class", b.class_id},
                {"p", {b.p.x(), b.p.y(), b.p.z()}},
                {"s", {b.s.x(), b.s.y(), b.s.z()}},
            };
            if (b.yaw) bj["yaw"] = *b.yaw;
            if (b.group) bj["group"] = *b.group;
            if (!b.movable) bj["movable"] = false;
            boxes.push_back(std::move(bj));
        }
        nlohmann::json rj{
            {"name", r.name},
            {"bounds", {r.bounds[0], r.bounds[1], r.bounds[2], r.bounds[3]}},
            {"height", r.height},
            {"boxes", std::move(boxes)},
        };
        if (!r.doors.empty()) {
            nlohmann::json doors = nlohmann::json::array();
            for (const auto& d : r.doors) {
                doors.push_back({{"wall", d.wall},
                                 {"from", d.from},
                                 {"to", d.to},
                                 {"height", d.height}});
            }
            rj["doors"] = std::move(doors);
        }
        rooms.push_back(std::move(rj));
    }
    nlohmann::json doc{{"rooms", std::move(rooms)}};
    if (!h.relations.empty()) {
        nlohmann::json rels = nlohmann::json::array();
        for (const auto& rel : h.relations) {
            rels.push_back({{"subject", rel.subject}, {"target", rel.target}});
        }
        doc["relations"] = std::move(rels);
    }
    if (h.snap_orientations) doc["snap_orientations"] = true;
    return doc;
}

double overlap_volume(const SemanticBox& a, const SemanticBox& b) {
    double vol = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        double lo = std::max(a.lo()[axis], b.lo()[axis]);
        double hi = std::min(a.hi()[axis], b.hi()[axis]);
        if (hi <= lo) return 0.0;
        vol *= hi - lo;
    }
    return vol;
}

namespace {

double protrusion_of(const SemanticBox& b, const Room& r) {
    double d = 0.0;
    d = std::max(d, r.bounds[0] - b.lo().x());
    d = std::max(d, b.hi().x() - r.bounds[2]);
    d = std::max(d, r.bounds[1] - b.lo().y());
    d = std::max(d, b.hi().y() - r.bounds[3]);
    d = std::max(d, -b.lo().z());
    d = std::max(d, b.hi().z() - r.height);
    return d;
}

struct BoxRef {
    const SemanticBox* box;
    const Room* room;
};

std::vector<BoxRef> all_boxes(const HouseLayout& h) {
    std::vector<BoxRef> refs;
    for (const auto& r : h.rooms) {
        for (const auto& b : r.boxes) refs.push_back({&b, &r});
    }
    std::sort(refs.begin(), refs.end(),
              [](const BoxRef& a, const BoxRef& b) { return a.box->name < b.box->name; });
    return refs;
}

}  // namespace

ViolationReport validate(const HouseLayout& h, double eps_overlap) {
    if (eps_overlap < 0.0) {
        throw std::invalid_argument("validate: eps_overlap must be >= 0");
    }
    ViolationReport report;
    auto refs = all_boxes(h);
    for (size_t i = 0; i < refs.size(); ++i) {
        for (size_t j = i + 1; j < refs.size(); ++j) {
            double vol = overlap_volume(*refs[i].box, *refs[j].box);
            if (vol > eps_overlap) {
                report.violations.push_back({ViolationKind::kOverlap,
                                             {refs[i].box->name, refs[j].box->name},
                                             vol});
            }
        }
    }
    for (const auto& ref : refs) {
        double d = protrusion_of(*ref.box, *ref.room);
        if (d > 1e-9) {
            report.violations.push_back({ViolationKind::kOutOfBounds, {ref.box->name}, d});
        }
    }
    return report;
}

namespace {

struct Score {
    double overlap;
    double protrusion;
    bool operator<(const Score& o) const {
        if (overlap != o.overlap) return overlap < o.overlap;
        return protrusion < o.protrusion;
    }
    bool operator<=(const Score& o) const { return !(o < *this); }
};

Score score_of(const HouseLayout& h, double eps) {
    auto rep = validate(h, eps);
    return {rep.total_overlap_volume(), rep.total_protrusion()};
}

SemanticBox* find_mutable(HouseLayout& h, const std::string& name, Room** room_out = nullptr) {
    for (auto& r : h.rooms) {
        for (auto& b : r.boxes) {
            if (b.name == name) {
                if (room_out) *room_out = &r;
                return &b;
            }
        }
    }
    return nullptr;
}

void clamp_to_room(SemanticBox& b, const Room& r) {
    auto clamp_axis = [](double p, double half, double lo, double hi) {
        if (hi - lo <= 2 * half) return 0.5 * (lo + hi);  // oversized box: center it
        return std::clamp(p, lo + half, hi - half);
    };
    b.p.x() = clamp_axis(b.p.x(), 0.5 * b.s.x(), r.bounds[0], r.bounds[2]);
    b.p.y() = clamp_axis(b.p.y(), 0.5 * b.s.y(), r.bounds[1], r.bounds[3]);
    b.p.z() = clamp_axis(b.p.z(), 0.5 * b.s.z(), 0.0, r.height);
}

// try moving `name` to each candidate center; keep the first strict improvement
bool try_positions(HouseLayout& h, const std::string& name,
                   const std::vector<Eigen::Vector3d>& candidates, double eps, Score base) {
    Room* room = nullptr;
    SemanticBox* box = find_mutable(h, name, &room);
    Eigen::Vector3d original = box->p;
    for (const auto& c : candidates) {
        box->p = c;
        clamp_to_room(*box, *room);
        if (score_of(h, eps) < base) {
            return true;
        }
    }
    box->p = original;
    return false;
}

bool separate_pair(HouseLayout& h, const std::string& mover_name, const SemanticBox& other,
                   double eps, Score base) {
    Room* room = nullptr;
    SemanticBox* mover = find_mutable(h, mover_name, &room);

    // penetration depth per axis, shallow axes first
    std::array<std::pair<double, int>, 3> depth;
    for (int axis = 0; axis < 3; ++axis) {
        double lo = std::max(mover->lo()[axis], other.lo()[axis]);
        double hi = std::min(mover->hi()[axis], other.hi()[axis]);
        depth[axis] = {hi - lo, axis};
    }
    std::sort(depth.begin(), depth.end());

    const double margin = 1e-3;
    std::vector<Eigen::Vector3d> candidates;
    for (const auto& [d, axis] : depth) {
        double away = mover->p[axis] >= other.p[axis] ? 1.0 : -1.0;
        for (double dir : {away, -away}) {
            Eigen::Vector3d c = mover->p;
            c[axis] += dir * (d + margin);
            candidates.push_back(c);
        }
    }
    if (try_positions(h, mover_name, candidates, eps, base)) {
        return true;
    }

    // coarse grid over the room as a last resort
    double step = std::max(0.25, mover->s.minCoeff() * 0.5);
    std::vector<Eigen::Vector3d> grid;
    for (double x = room->bounds[0] + 0.5 * mover->s.x(); x <= room->bounds[2] - 0.5 * mover->s.x() + 1e-9;
         x += step) {
        for (double y = room->bounds[1] + 0.5 * mover->s.y();
             y <= room->bounds[3] - 0.5 * mover->s.y() + 1e-9; y += step) {
            grid.push_back({x, y, mover->p.z()});
        }
    }
    return try_positions(h, mover_name, grid, eps, base);
}

}  // namespace

HouseLayout deterministic_refine_step(const HouseLayout& h, double eps_overlap) {
    HouseLayout out = h;
    auto report = validate(out, eps_overlap);
    if (report.empty()) {
        return out;
    }
    Score base = {report.total_overlap_volume(), report.total_protrusion()};

    // worst overlap first, deterministic tiebreak on names
    std::vector<const Violation*> overlaps;
    for (const auto& v : report.violations) {
        if (v.kind == ViolationKind::kOverlap) overlaps.push_back(&v);
    }
    std::sort(overlaps.begin(), overlaps.end(), [](const Violation* a, const Violation* b) {
        if (a->magnitude != b->magnitude) return a->magnitude > b->magnitude;
        return a->subjects < b->subjects;
    });

    for (const Violation* v : overlaps) {
        const SemanticBox* a = out.find_box(v->subjects[0]);
        const SemanticBox* b = out.find_box(v->subjects[1]);
        // the smaller box moves; ties move the later name
        bool move_a = a->volume() < b->volume() ||
                      (a->volume() == b->volume() && a->name > b->name);
        const std::string& mover = move_a ? a->name : b->name;
        const std::string& fixed = move_a ? b->name : a->name;
        if (separate_pair(out, mover, *out.find_box(fixed), eps_overlap, base)) {
            return out;
        }
        if (separate_pair(out, fixed, *out.find_box(mover), eps_overlap, base)) {
            return out;
        }
    }

    // protruding boxes: try the bare clamp first, then a relocation search
    std::vector<const Violation*> oob;
    for (const auto& v : report.violations) {
        if (v.kind == ViolationKind::kOutOfBounds) oob.push_back(&v);
    }
    std::sort(oob.begin(), oob.end(), [](const Violation* a, const Violation* b) {
        if (a->magnitude != b->magnitude) return a->magnitude > b->magnitude;
        return a->subjects < b->subjects;
    });
    for (const Violation* v : oob) {
        Room* room = nullptr;
        SemanticBox* box = find_mutable(out, v->subjects[0], &room);
        SemanticBox clamped = *box;
        clamp_to_room(clamped, *room);
        std::vector<Eigen::Vector3d> candidates{clamped.p};
        double step = std::max(0.25, box->s.minCoeff() * 0.5);
        for (double x = room->bounds[0] + 0.5 * box->s.x();
             x <= room->bounds[2] - 0.5 * box->s.x() + 1e-9; x += step) {
            for (double y = room->bounds[1] + 0.5 * box->s.y();
                 y <= room->bounds[3] - 0.5 * box->s.y() + 1e-9; y += step) {
                candidates.push_back({x, y, box->p.z()});
            }
        }
        if (try_positions(out, v->subjects[0], candidates, eps_overlap, base)) {
            return out;
        }
    }
    return h;  // nothing improved
}

RefineOutcome refine_loop(const HouseLayout& h, Refiner& refiner, int max_iter,
                          double eps_overlap) {
    if (max_iter < 1) {
        throw std::invalid_argument("refine_loop: max_iter must be >= 1");
    }
    HouseLayout current = h;
    HouseLayout best = h;
    Score best_score = score_of(h, eps_overlap);

    for (int round = 1; round <= max_iter; ++round) {
        auto report = validate(current, eps_overlap);
        Score cur_score = {report.total_overlap_volume(), report.total_protrusion()};
        if (cur_score < best_score) {
            best = current;
            best_score = cur_score;
        }
        if (report.empty()) {
            return {current, round, report};
        }

        RefinerRequest req{serialize_layout(current).dump(), report.to_json(), round,
                           kDefaultInstructions};
        HouseLayout candidate;
        bool have_candidate = false;
        try {
            RefinerResponse resp = refiner.refine(req);
            candidate = parse_layout(resp.program);
            have_candidate = true;
        } catch (const std::exception&) {
            // refiner failure or unparsable program: deterministic fallback this round
        }
        if (!have_candidate || !(score_of(candidate, eps_overlap) <= cur_score)) {
            candidate = deterministic_refine_step(current, eps_overlap);
        }
        current = std::move(candidate);
    }

    Score final_score = score_of(current, eps_overlap);
    if (final_score < best_score) {
        best = current;
    }
    return {best, max_iter, validate(best, eps_overlap)};
}

namespace {

struct GroupInfo {
    std::map<std::string, std::string> box_group;  // box name -> group key
};

// explicit groups win; ungrouped boxes cluster by footprint-center proximity
GroupInfo derive_groups(const HouseLayout& h, double radius = 1.5) {
    GroupInfo info;
    int ri = 0;
    for (const auto& room : h.rooms) {
        std::vector<const SemanticBox*> loose;
        for (const auto& b : room.boxes) {
            if (b.group) {
                info.box_group[b.name] = "g:" + *b.group + "@" + std::to_string(ri);
            } else {
                loose.push_back(&b);
            }
        }
        // single linkage union-find
        std::vector<int> parent(loose.size());
        for (size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
        std::function<int(int)> find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (size_t i = 0; i < loose.size(); ++i) {
            for (size_t j = i + 1; j < loose.size(); ++j) {
                double dx = loose[i]->p.x() - loose[j]->p.x();
                double dy = loose[i]->p.y() - loose[j]->p.y();
                if (std::hypot(dx, dy) <= radius) {
                    parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
                }
            }
        }
        // name clusters by their lexicographically smallest member
        std::map<int, std::string> cluster_name;
        for (size_t i = 0; i < loose.size(); ++i) {
            int root = find(static_cast<int>(i));
            auto it = cluster_name.find(root);
            if (it == cluster_name.end() || loose[i]->name < it->second) {
                cluster_name[root] = loose[i]->name;
            }
        }
        for (size_t i = 0; i < loose.size(); ++i) {
            info.box_group[loose[i]->name] =
                "c:" + cluster_name[find(static_cast<int>(i))] + "@" + std::to_string(ri);
        }
        ++ri;
    }
    return info;
}

}  // namespace

HouseLayout assign_orientations(const HouseLayout& h,
                                const std::vector<OrientationRelation>& relations) {
    HouseLayout out = h;
    GroupInfo groups = derive_groups(out);

    // validate relations and build the facing map
    std::map<std::string, std::string> faces;
    for (const auto& rel : relations) {
        const SemanticBox* subject = out.find_box(rel.subject);
        const SemanticBox* target = out.find_box(rel.target);
        if (!subject || !target) {
            throw std::invalid_argument("assign_orientations: unknown box in relation " +
                                        rel.subject + " -> " + rel.target);
        }
        if (rel.subject == rel.target) {
            throw std::invalid_argument("assign_orientations: self relation on " + rel.subject);
        }
        if (groups.box_group[rel.subject] != groups.box_group[rel.target]) {
            throw std::invalid_argument("assign_orientations: relation crosses groups: " +
                                        rel.subject + " -> " + rel.target);
        }
        if (!faces.emplace(rel.subject, rel.target).second) {
            throw std::invalid_argument("assign_orientations: conflicting relations for " +
                                        rel.subject);
        }
    }

    // reference per group: largest footprint, smallest name on ties
    std::map<std::string, std::string> reference;
    for (const auto& room : out.rooms) {
        for (const auto& b : room.boxes) {
            const std::string& g = groups.box_group[b.name];
            auto it = reference.find(g);
            if (it == reference.end()) {
                reference[g] = b.name;
                continue;
            }
            const SemanticBox* cur = out.find_box(it->second);
            if (b.footprint_area() > cur->footprint_area() ||
                (b.footprint_area() == cur->footprint_area() && b.name < cur->name)) {
                it->second = b.name;
            }
        }
    }

    // break cycles: prefer dropping the reference's outgoing edge, otherwise
    // the largest-footprint member of the cycle
    std::map<std::string, int> state;  // 0 unseen, 1 in progress, 2 done
    for (const auto& [start, _] : faces) {
        if (state[start] != 0) continue;
        std::vector<std::string> path;
        std::string cur = start;
        while (true) {
            if (state[cur] == 1) {
                // found a cycle: members are path from first occurrence of cur
                auto at = std::find(path.begin(), path.end(), cur);
                std::vector<std::string> cycle(at, path.end());
                std::string drop;
                for (const auto& name : cycle) {
                    const std::string& g = groups.box_group[name];
                    if (reference[g] == name) {
                        drop = name;
                        break;
                    }
                }
                if (drop.empty()) {
                    for (const auto& name : cycle) {
                        if (drop.empty()) {
                            drop = name;
                            continue;
                        }
                        const SemanticBox* a = out.find_box(name);
                        const SemanticBox* d = out.find_box(drop);
                        if (a->footprint_area() > d->footprint_area() ||
                            (a->footprint_area() == d->footprint_area() && a->name < d->name)) {
                            drop = name;
                        }
                    }
                }
                faces.erase(drop);
                break;
            }
            if (state[cur] == 2) break;
            state[cur] = 1;
            path.push_back(cur);
            auto next = faces.find(cur);
            if (next == faces.end()) break;
            cur = next->second;
        }
        for (const auto& name : path) state[name] = 2;
    }

    for (auto& room : out.rooms) {
        for (auto& b : room.boxes) {
            double yaw;
            auto it = faces.find(b.name);
            if (it != faces.end()) {
                const SemanticBox* target = out.find_box(it->second);
                yaw = std::atan2(target->p.y() - b.p.y(), target->p.x() - b.p.x());
            } else {
                yaw = std::atan2(room.center_y() - b.p.y(), room.center_x() - b.p.x());
            }
            yaw = normalize_yaw(yaw);
            if (out.snap_orientations) yaw = snap_yaw(yaw);
            b.yaw = yaw;
        }
    }
    return out;
}

namespace {

struct ObjWriter {
    std::string out;
    int next_vertex = 1;
    int next_normal = 1;

    void object(const std::string& name) { out += "o " + name + "\n"; }

    void quad(const std::array<Eigen::Vector3d, 4>& corners, const Eigen::Vector3d& normal) {
        for (const auto& c : corners) {
            out += "v " + format_double(c.x()) + " " + format_double(c.y()) + " " +
                   format_double(c.z()) + "\n";
        }
        out += "vn " + format_double(normal.x()) + " " + format_double(normal.y()) + " " +
               format_double(normal.z()) + "\n";
        out += "f";
        for (int i = 0; i < 4; ++i) {
            out += " " + std::to_string(next_vertex + i) + "//" + std::to_string(next_normal);
        }
        out += "\n";
        next_vertex += 4;
        next_normal += 1;
    }
};

// wall segments along `axis` at fixed `wall_coord`, with door spans cut out
void emit_wall(ObjWriter& w, const std::string& name, const Room& room, const std::string& wall) {
    bool along_x = wall == "north" || wall == "south";
    double lo = along_x ? room.bounds[0] : room.bounds[1];
    double hi = along_x ? room.bounds[2] : room.bounds[3];
    double coord = wall == "south"   ? room.bounds[1]
                   : wall == "north" ? room.bounds[3]
                   : wall == "west"  ? room.bounds[0]
                                     : room.bounds[2];
    Eigen::Vector3d normal = wall == "south"   ? Eigen::Vector3d(0, 1, 0)
                             : wall == "north" ? Eigen::Vector3d(0, -1, 0)
                             : wall == "west"  ? Eigen::Vector3d(1, 0, 0)
                                               : Eigen::Vector3d(-1, 0, 0);

    auto corner = [&](double a, double z) {
        return along_x ? Eigen::Vector3d(a, coord, z) : Eigen::Vector3d(coord, a, z);
    };
    auto full_quad = [&](double a0, double a1, double z0, double z1) {
        w.quad({corner(a0, z0), corner(a1, z0), corner(a1, z1), corner(a0, z1)}, normal);
    };

    // doors on this wall, sorted
    std::vector<const Door*> doors;
    for (const auto& d : room.doors) {
        if (d.wall == wall) doors.push_back(&d);
    }
    std::sort(doors.begin(), doors.end(),
              [](const Door* a, const Door* b) { return a->from < b->from; });

    w.object(name);
    if (doors.empty()) {
        full_quad(lo, hi, 0.0, room.height);
        return;
    }
    double cursor = lo;
    for (const Door* d : doors) {
        if (d->from > cursor + 1e-12) {
            full_quad(cursor, d->from, 0.0, room.height);
        }
        double lintel = std::min(d->height, room.height);
        if (lintel < room.height - 1e-12) {
            full_quad(d->from, d->to, lintel, room.height);
        }
        cursor = d->to;
    }
    if (cursor < hi - 1e-12) {
        full_quad(cursor, hi, 0.0, room.height);
    }
}

}  // namespace

std::string export_planar_mesh(const HouseLayout& h) {
    ObjWriter w;
    w.out += "# planar room shell\n";
    for (const auto& room : h.rooms) {
        const auto& b = room.bounds;
        w.object(room.name + ".floor");
        w.quad({Eigen::Vector3d(b[0], b[1], 0), Eigen::Vector3d(b[2], b[1], 0),
                Eigen::Vector3d(b[2], b[3], 0), Eigen::Vector3d(b[0], b[3], 0)},
               Eigen::Vector3d(0, 0, 1));
        w.object(room.name + ".ceiling");
        w.quad({Eigen::Vector3d(b[0], b[1], room.height), Eigen::Vector3d(b[0], b[3], room.height),
                Eigen::Vector3d(b[2], b[3], room.height), Eigen::Vector3d(b[2], b[1], room.height)},
               Eigen::Vector3d(0, 0, -1));
        emit_wall(w, room.name + ".wall_south", room, "south");
        emit_wall(w, room.name + ".wall_east", room, "east");
        emit_wall(w, room.name + ".wall_north", room, "north");
        emit_wall(w, room.name + ".wall_west", room, "west");
    }
    return w.out;
}

}  // namespace ctscene
