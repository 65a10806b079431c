#include <doctest.h>

#include <cmath>
#include <random>

#include "ctscene/physics.hpp"
#include "ctscene/rng.hpp"
#include "test_helpers.hpp"

using namespace ctscene;
using ctscene::testing::random_stack;

namespace {

RigidProxy proxy(const std::string& name, double px, double py, double pz, double sx, double sy,
                 double sz, bool movable = true) {
    RigidProxy p;
    p.box.name = name;
    p.box.p = {px, py, pz};
    p.box.s = {sx, sy, sz};
    p.movable = movable;
    return p;
}

SettleParams params_with_bounds() {
    SettleParams p;
    p.room_bounds = std::array<double, 4>{0.0, 0.0, 10.0, 10.0};
    return p;
}

}  // namespace

TEST_CASE("settle basics") {
    SettleParams params = params_with_bounds();

    SUBCASE("box in mid-air falls to the floor") {
        auto t = settle({proxy("a", 5, 5, 5.0, 1, 1, 1)}, params);
        REQUIRE(t.size() == 1);
        CHECK(t[0].dt.z() == doctest::Approx(-4.5).epsilon(1e-12));
        CHECK(t[0].dt.x() == 0.0);
        CHECK(t[0].dyaw == 0.0);
    }

    SUBCASE("a box directly above another stacks on top") {
        auto proxies = std::vector<RigidProxy>{proxy("low", 5, 5, 3.0, 1, 1, 1),
                                               proxy("high", 5, 5, 6.0, 1, 1, 1)};
        auto t = settle(proxies, params);
        auto settled = apply_transforms(proxies, t);
        CHECK(settled[0].box.p.z() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(settled[1].box.p.z() == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(interpenetration_check(settled).empty());
    }

    SUBCASE("no horizontal overlap: straight to the floor") {
        auto proxies = std::vector<RigidProxy>{proxy("a", 2, 2, 0.5, 1, 1, 1),
                                               proxy("b", 7, 7, 4.0, 1, 1, 1)};
        auto t = settle(proxies, params);
        auto settled = apply_transforms(proxies, t);
        CHECK(settled[1].box.p.z() == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("sub-threshold footprint support falls past, displaced sideways") {
        // overlap area 0.1 of the falling unit box < tau = 0.3
        auto proxies = std::vector<RigidProxy>{proxy("table", 5, 5, 0.5, 2, 2, 1, false),
                                               proxy("cup", 6.4, 5, 4.0, 1, 1, 1)};
        auto t = settle(proxies, params);
        auto settled = apply_transforms(proxies, t);
        CHECK(settled[1].box.lo().z() == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(interpenetration_check(settled).empty());
        CHECK(support_soundness(settled, params.tau));
    }

    SUBCASE("at-threshold support holds the box") {
        SettleParams p = params_with_bounds();
        p.tau = 0.3;
        // overlap area 0.4 >= 0.3: rests on the table top
        auto proxies = std::vector<RigidProxy>{proxy("table", 5, 5, 0.5, 2, 2, 1, false),
                                               proxy("cup", 6.1, 5, 4.0, 1, 1, 1)};
        auto t = settle(proxies, p);
        auto settled = apply_transforms(proxies, t);
        CHECK(settled[1].box.lo().z() == doctest::Approx(1.0).epsilon(1e-9));
    }

    SUBCASE("immovable boxes stay put") {
        auto proxies = std::vector<RigidProxy>{proxy("shelf", 5, 5, 2.0, 1, 1, 0.2, false)};
        auto t = settle(proxies, params);
        CHECK(t[0].dt.norm() == 0.0);
    }
}

TEST_CASE("settle parameter validation") {
    SettleParams params = params_with_bounds();

    SUBCASE("gravity must be unit length") {
        SettleParams p = params;
        p.gravity = {0, 0, -2};
        CHECK_THROWS_AS(settle({proxy("a", 5, 5, 1, 1, 1, 1)}, p), std::invalid_argument);
    }

    SUBCASE("tau range") {
        SettleParams p = params;
        p.tau = 0.0;
        CHECK_THROWS_AS(settle({proxy("a", 5, 5, 1, 1, 1, 1)}, p), std::invalid_argument);
    }

    SUBCASE("tilted gravity works for a single box") {
        SettleParams p = params;
        double a = 30.0 * M_PI / 180.0;
        p.gravity = {std::sin(a), 0.0, -std::cos(a)};
        auto proxies = std::vector<RigidProxy>{proxy("a", 5, 5, 2.0, 1, 1, 1)};
        auto t = settle(proxies, p);
        auto settled = apply_transforms(proxies, t);
        CHECK(settled[0].box.lo().z() == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(settled[0].box.p.x() > 5.0);  // slid down-slope
    }

    SUBCASE("tilted gravity with several boxes is rejected") {
        SettleParams p = params;
        double a = 30.0 * M_PI / 180.0;
        p.gravity = {std::sin(a), 0.0, -std::cos(a)};
        auto proxies = std::vector<RigidProxy>{proxy("a", 2, 2, 2, 1, 1, 1),
                                               proxy("b", 7, 7, 2, 1, 1, 1)};
        CHECK_THROWS_AS(settle(proxies, p), UnsupportedConfiguration);
    }

    SUBCASE("tilted gravity pointing up is rejected") {
        SettleParams p = params;
        p.gravity = {1.0, 0.0, 0.0};
        CHECK_THROWS_AS(settle({proxy("a", 5, 5, 2, 1, 1, 1)}, p), UnsupportedConfiguration);
    }
}

TEST_CASE("settle invariants over random stacks") {
    SettleParams params = params_with_bounds();
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto proxies = random_stack(seed);
        auto t1 = settle(proxies, params);
        auto settled = apply_transforms(proxies, t1);

        // no interpenetration
        CHECK(interpenetration_check(settled).empty());
        // support soundness
        CHECK(support_soundness(settled, params.tau));
        // energy monotonicity
        for (size_t i = 0; i < proxies.size(); ++i) {
            CHECK(settled[i].box.p.z() <= proxies[i].box.p.z() + 1e-12);
        }
        // rerun determinism
        auto t1b = settle(proxies, params);
        for (size_t i = 0; i < t1.size(); ++i) {
            CHECK(t1[i].dt == t1b[i].dt);
        }
        // idempotence: settling a settled scene moves nothing
        auto t2 = settle(settled, params);
        for (const auto& t : t2) {
            CHECK(t.dt.norm() <= 1e-9);
        }
    }
}

TEST_CASE("interpenetration_check flags corrupted transforms") {
    auto proxies = std::vector<RigidProxy>{proxy("a", 2, 2, 0.5, 1, 1, 1),
                                           proxy("b", 7, 7, 0.5, 1, 1, 1)};
    std::vector<BoxTransform> bad{{"b", {-5.0, -5.0, 0.0}, 0.0}};
    auto corrupted = apply_transforms(proxies, bad);
    CHECK_FALSE(interpenetration_check(corrupted).empty());
}

TEST_CASE("transforms json round trip") {
    std::vector<BoxTransform> ts{{"a", {0.1, -0.2, -1.5}, 0.0}, {"b", {0, 0, 0}, 0.0}};
    auto j = transforms_to_json(ts);
    auto back = transforms_from_json(j);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "a");
    CHECK((back[0].dt - ts[0].dt).norm() == 0.0);
    CHECK(back[0].dyaw == 0.0);
}

TEST_CASE("proxies_from_room honors movable flags") {
    Room room;
    room.name = "r";
    room.bounds = {0, 0, 5, 5};
    SemanticBox fixed;
    fixed.name = "wardrobe";
    fixed.movable = false;
    fixed.p = {1, 1, 1};
    SemanticBox loose;
    loose.name = "chair";
    loose.p = {3, 3, 2};
    room.boxes = {fixed, loose};
    auto proxies = proxies_from_room(room);
    REQUIRE(proxies.size() == 2);
    CHECK_FALSE(proxies[0].movable);
    CHECK(proxies[1].movable);
}
