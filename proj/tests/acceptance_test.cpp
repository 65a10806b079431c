// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with the measured quantities.  Run via ctest or directly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>

#include "ctscene/consistency.hpp"
#include "ctscene/geometry.hpp"
#include "ctscene/io.hpp"
#include "ctscene/layout.hpp"
#include "ctscene/optimizer.hpp"
#include "ctscene/physics.hpp"
#include "ctscene/rng.hpp"
#include "ctscene/texture.hpp"
#include "test_helpers.hpp"

using namespace ctscene;
using namespace ctscene::testing;
namespace fs = std::filesystem;

namespace {

const DiffusionSchedule& sched() {
    static DiffusionSchedule s = build_schedule(1000, 8.5e-4, 1.2e-2);
    return s;
}
const ConsistencyCoeffs kCoeffs{};

constexpr double kPi = 3.14159265358979323846;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(const char* id, bool pass, const std::string& detail) {
    std::printf("[%s] %s %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, id, ": ", detail);
}

Vec randn_vec(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = n(rng);
    return v;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = static_cast<int>(xs.size());
    for (int i = 0; i < n; ++i) {
        double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

GaussianMixtureOracle acceptance_mixture() {
    // 2-component 2D mixture used across the numerical criteria
    return two_mode(vec2(1.2, -0.9), 0.35);
}

}  // namespace

TEST_CASE("C01 theorem1 scaling") {
    Timer timer;
    auto gm = acceptance_mixture();
    auto rng = rng_stream(101, "c01");

    const std::vector<double> dts{12, 25, 50, 100, 200};
    const int n_states = 8;
    std::vector<Vec> xs, es;
    for (int i = 0; i < n_states; ++i) {
        xs.push_back(randn_vec(rng, 2));
        es.push_back(randn_vec(rng, 2));
    }
    std::vector<double> residuals;
    for (double dt : dts) {
        double acc = 0.0;
        for (int i = 0; i < n_states; ++i) {
            acc += theorem1_decomposition(xs[i], es[i], 400, 400 + int(dt), Condition::all(), gm,
                                          sched(), kCoeffs)
                       .residual_norm;
        }
        residuals.push_back(acc / n_states);
    }
    double slope = loglog_slope(dts, residuals);

    auto pm = point_mass(vec2(-0.4, 0.9));
    double worst_pm = 0.0;
    for (double dt : dts) {
        for (int i = 0; i < n_states; ++i) {
            worst_pm = std::max(worst_pm,
                                theorem1_decomposition(xs[i], es[i], 400, 400 + int(dt),
                                                       Condition::all(), pm, sched(), kCoeffs)
                                    .residual_norm);
        }
    }
    double secs = timer.seconds();
    bool pass = slope >= 1.7 && slope <= 2.3 && worst_pm <= 1e-6 && secs < 10.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "slope=%.3f point_mass_residual=%.2e runtime=%.2fs", slope,
                  worst_pm, secs);
    report("C01 theorem1-scaling", pass, buf);
}

TEST_CASE("C02 theorem2 scaling") {
    Timer timer;
    GaussianMixtureOracle::Component a, b;
    a.weight = 0.85;
    a.mean = vec2(1.5, -1.0);
    a.var = Vec::Constant(2, 0.04);
    b.weight = 0.15;
    b.mean = vec2(9.0, 7.0);
    b.var = Vec::Constant(2, 0.04);
    GaussianMixtureOracle gm({a, b});

    OptimizerConfig tmpl;
    tmpl.total_iters = 2500;
    tmpl.n_warm_up = 1;
    tmpl.t_warm_up = 250;
    tmpl.eta = 0.05;
    tmpl.seed = 7;
    auto result = theorem2_experiment({25, 50, 100, 200}, tmpl, Condition::subset({0}), gm,
                                      sched(), kCoeffs, 50);

    bool ratios_ok = true;
    std::string ratio_text;
    for (size_t i = 1; i < result.gaps.size(); ++i) {
        double ratio = result.gaps[i].median_error / result.gaps[i - 1].median_error;
        ratios_ok = ratios_ok && ratio >= 1.4 && ratio <= 3.0;
        char rb[32];
        std::snprintf(rb, sizeof(rb), "%s%.2f", i > 1 ? "," : "", ratio);
        ratio_text += rb;
    }
    int under = 0;
    for (double e : result.gaps.front().per_seed_error) {
        if (e < 0.1) ++under;
    }
    // non-converged seeds at the finest level count against the quota
    bool finest_ok = under >= 40 && result.gaps.front().total == 50;
    double secs = timer.seconds();
    bool pass = ratios_ok && finest_ok && secs < 60.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "ratios=[%s] finest<0.1: %d/50 runtime=%.2fs",
                  ratio_text.c_str(), under, secs);
    report("C02 theorem2-scaling", pass, buf);
}

TEST_CASE("C03 coefficient claims") {
    bool exact = kCoeffs.c_skip(0.0) == 1.0 && kCoeffs.c_out(0.0) == 0.0;
    double t_star = kCoeffs.min_t_below(1e-7);
    bool threshold_ok = std::abs(t_star - 158.1) <= 0.5;
    // the paper-level working floor of t >= 30 does not reach 1e-7 here
    double c30 = kCoeffs.c_skip(30.0);
    bool gap_recorded = c30 > 1e-7;
    bool pass = exact && threshold_ok && gap_recorded;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "c_skip(0)=%.1f c_out(0)=%.1f min_t(c_skip<=1e-7)=%.4f c_skip(30)=%.3e "
                  "(1e-7 floor first reached at ~158, not 30)",
                  kCoeffs.c_skip(0.0), kCoeffs.c_out(0.0), t_star, c30);
    report("C03 coefficients", pass, buf);
}

TEST_CASE("C04 corollary equivalences") {
    auto gm = acceptance_mixture();
    auto rng = rng_stream(104, "c04");

    int cosine_ok = 0, viv_ok = 0;
    const int trials = 100;
    for (int i = 0; i < trials; ++i) {
        Vec x_pi = randn_vec(rng, 2);
        Vec eps = randn_vec(rng, 2);
        int s = 100 + int(rng() % 700);
        int t = s + 100;
        auto sp = special_case_losses(x_pi, eps, s, t, Condition::all(), gm, sched(), kCoeffs);

        Vec x_s = add_noise(x_pi, s, eps, sched());
        Vec x_st = dpm_step(x_s, s, t, Condition::all(), gm, sched());
        Vec delta = eps_oracle(gm, x_st, t, Condition::all(), sched()) -
                    eps_oracle(gm, x_s, s, Condition::all(), sched());
        auto w = cts_weights(s, t, kCoeffs, sched());
        Vec zeroed = sp.cts_grad - (w.w1 - w.w2) * delta;
        double cosine =
            zeroed.dot(sp.dreamlcm_grad) / (zeroed.norm() * sp.dreamlcm_grad.norm());
        if (cosine >= 0.999) ++cosine_ok;

        Vec eps_hat = eps_oracle(gm, x_s, s, Condition::all(), sched());
        double co = kCoeffs.c_out(s);
        double ratio = sched().sigma[s] / sched().alpha[s];
        double expect = co * co * ratio * ratio * (eps - eps_hat).squaredNorm();
        if (std::abs(sp.vividdreamer_loss - expect) / expect <= 0.05) ++viv_ok;
    }
    bool pass = cosine_ok == trials && viv_ok == trials;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "cosine>=0.999: %d/100, residual gap<=5%%: %d/100", cosine_ok,
                  viv_ok);
    report("C04 corollary", pass, buf);
}

TEST_CASE("C05 solver exactness") {
    Vec mu = vec2(-0.7, 0.25);
    auto gm = point_mass(mu);
    auto rng = rng_stream(105, "c05");
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Vec x = randn_vec(rng, 2) * 2.0;
        double s = 1 + double(rng() % 1000);
        double t = double(rng() % 1001);
        Vec y = dpm_step(x, s, t, Condition::all(), gm, sched());
        auto cs = sched().at(s);
        auto ct = sched().at(t);
        Vec exact = ct.alpha * mu + (ct.sigma / cs.sigma) * (x - cs.alpha * mu);
        worst = std::max(worst, (y - exact).norm());
    }
    bool pass = worst <= 1e-10;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "max deviation over 1000 draws: %.2e", worst);
    report("C05 solver-exactness", pass, buf);
}

TEST_CASE("C06 layout convergence") {
    struct Watcher : Refiner {
        LocalRefiner inner;
        bool monotone = true;
        double last = -1.0;
        RefinerResponse refine(const RefinerRequest& req) override {
            double total = 0.0;
            for (const auto& v : req.violations) {
                if (v.at("kind") == "overlap") total += v.at("magnitude").get<double>();
            }
            if (last >= 0.0 && total > last + 1e-12) monotone = false;
            last = total;
            return inner.refine(req);
        }
    };

    int solved = 0;
    bool monotone = true;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Watcher watcher;
        auto h = random_layout(seed, 5, 15, 3);
        auto out = refine_loop(h, watcher, 20);
        if (out.report.empty()) ++solved;
        monotone = monotone && watcher.monotone;
    }
    bool pass = solved == 100 && monotone;
    char buf[100];
    std::snprintf(buf, sizeof(buf), "solved=%d/100 within 20 rounds, overlap monotone=%s", solved,
                  monotone ? "yes" : "no");
    report("C06 layout-convergence", pass, buf);
}

TEST_CASE("C07 orientation correctness") {
    // scripted room: two chair/desk pairs, a four-chair table group, one cycle
    Room room;
    room.name = "hall";
    room.bounds = {0, 0, 12, 12};
    room.height = 2.7;
    auto box = [](const std::string& name, double x, double y, double sx, double sy,
                  const char* group) {
        SemanticBox b;
        b.name = name;
        b.p = {x, y, 0.5};
        b.s = {sx, sy, 1.0};
        b.group = group;
        return b;
    };
    room.boxes = {
        box("desk_a", 2.0, 1.0, 1.4, 0.7, "pair_a"),
        box("chair_a", 1.0, 1.0, 0.5, 0.5, "pair_a"),
        box("desk_b", 10.0, 2.0, 1.4, 0.7, "pair_b"),
        box("chair_b", 10.0, 1.0, 0.5, 0.5, "pair_b"),
        box("table", 6.0, 6.0, 1.4, 1.4, "dining"),
        box("chair_n", 6.0, 7.2, 0.5, 0.5, "dining"),
        box("chair_s", 6.0, 4.8, 0.5, 0.5, "dining"),
        box("chair_e", 7.2, 6.0, 0.5, 0.5, "dining"),
        box("chair_w", 4.8, 6.0, 0.5, 0.5, "dining"),
        box("sofa", 2.0, 10.0, 2.0, 1.0, "lounge"),
        box("tv", 2.0, 11.5, 1.0, 0.3, "lounge"),
    };
    HouseLayout h;
    h.rooms.push_back(room);

    std::vector<OrientationRelation> rels{
        {"chair_a", "desk_a"}, {"chair_b", "desk_b"},  {"chair_n", "table"}, {"chair_s", "table"},
        {"chair_e", "table"},  {"chair_w", "table"},   {"sofa", "tv"},       {"tv", "sofa"},
    };
    auto out = assign_orientations(h, rels);

    auto yaw_of = [&](const std::string& name) { return *out.find_box(name)->yaw; };
    auto expect_face = [&](const std::string& a, const std::string& b) {
        const auto* s = out.find_box(a);
        const auto* t = out.find_box(b);
        return std::atan2(t->p.y() - s->p.y(), t->p.x() - s->p.x());
    };

    double worst = 0.0;
    auto track = [&](double got, double expect) {
        worst = std::max(worst, std::abs(normalize_yaw(got - expect)));
    };
    track(yaw_of("chair_a"), expect_face("chair_a", "desk_a"));  // = 0
    track(yaw_of("chair_b"), expect_face("chair_b", "desk_b"));  // = pi/2
    track(yaw_of("chair_n"), -kPi / 2);
    track(yaw_of("chair_s"), kPi / 2);
    track(yaw_of("chair_e"), kPi);
    track(yaw_of("chair_w"), 0.0);
    // cycle: sofa has the larger footprint, keeps the default room-center facing
    track(yaw_of("sofa"), std::atan2(6.0 - 10.0, 6.0 - 2.0));
    track(yaw_of("tv"), expect_face("tv", "sofa"));

    bool total = true;
    for (const auto& b : out.rooms[0].boxes) total = total && b.yaw.has_value();

    bool pass = worst <= 1e-6 && total;
    char buf[100];
    std::snprintf(buf, sizeof(buf), "max yaw error=%.2e rad, all assigned=%s", worst,
                  total ? "yes" : "no");
    report("C07 orientation", pass, buf);
}

TEST_CASE("C08 trajectory properties") {
    TrajectoryParams params;
    bool pass = true;
    std::string detail;
    for (auto [name, bounds] : {std::pair<const char*, std::array<double, 4>>{"4x4", {0, 0, 4, 4}},
                                {"2x8", {0, 0, 2, 8}}}) {
        auto wps = zigzag_trajectory(bounds, 64, params);
        bool opposite = true;
        double min_dist = 1e30, max_angle = 0.0;
        for (size_t i = 0; i < wps.size(); ++i) {
            if (i > 0) {
                Eigen::Vector2d dc = (wps[i].camera - wps[i - 1].camera).head<2>();
                Eigen::Vector2d dt = (wps[i].target - wps[i - 1].target).head<2>();
                opposite = opposite && dc.dot(dt) < 0.0;
            }
            min_dist = std::min(min_dist, (wps[i].camera - wps[i].target).norm());
            max_angle = std::max(max_angle, view_angle_from_wall_deg(wps[i], bounds));
        }
        bool ok = opposite && min_dist >= params.d_min && max_angle <= 60.0;
        pass = pass && ok;
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%s[min_dist=%.2f max_angle=%.1f opposite=%s] ", name,
                      min_dist, max_angle, opposite ? "y" : "n");
        detail += buf;
    }
    // contrast case: the center-rotation baseline grazes the long walls
    auto baseline = center_rotation_trajectory({0, 0, 2, 8}, 64, params);
    double baseline_angle = 0.0;
    for (const auto& wp : baseline) {
        baseline_angle = std::max(baseline_angle, view_angle_from_wall_deg(wp, {0, 0, 2, 8}));
    }
    bool contrast = baseline_angle > 60.0;
    pass = pass && contrast;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "baseline max_angle=%.1f (violates budget)", baseline_angle);
    detail += buf;
    report("C08 trajectories", pass, detail);
}

TEST_CASE("C09 compositing oracle") {
    auto rng = rng_stream(109, "c09");
    std::uniform_real_distribution<float> u(0.0f, 8.0f);
    bool pass = true;
    for (int trial = 0; trial < 50; ++trial) {
        DepthBuffers b;
        b.width = 64;
        b.height = 64;
        size_t n = 64 * 64;
        b.furniture_rgba.resize(4 * n);
        b.layout_rgba.resize(4 * n);
        b.furniture_depth.resize(n);
        b.layout_depth.resize(n);
        for (auto& v : b.furniture_rgba) v = u(rng);
        for (auto& v : b.layout_rgba) v = u(rng);
        for (auto& v : b.furniture_depth) v = std::round(u(rng));  // quantized: exact ties occur
        for (auto& v : b.layout_depth) v = std::round(u(rng));

        auto out = composite(b);
        // independent per-pixel loop
        for (size_t i = 0; i < n && pass; ++i) {
            const float* expect = b.furniture_depth[i] <= b.layout_depth[i]
                                      ? &b.furniture_rgba[4 * i]
                                      : &b.layout_rgba[4 * i];
            for (int c = 0; c < 4; ++c) {
                if (out[4 * i + c] != expect[c]) {
                    pass = false;
                    break;
                }
            }
        }
    }
    report("C09 compositing", pass, pass ? "50/50 buffer sets bit-exact" : "mismatch found");
}

TEST_CASE("C10 texture gradient checks") {
    MultiResGrid grid = MultiResGrid::create({2, 4}, 4, 11);
    DecoderParams params = DecoderParams::create(8, 2, 12);
    AnchorSet anchors = AnchorSet::stratified({{0, 0}, {0, 1}}, 3, 13);
    std::vector<UvSample> samples{
        {0.15, 0.25, 0, 0}, {0.8, 0.3, 0, 0}, {0.5, 0.5, 0, 1}, {0.33, 0.9, 0, 1}, {0.6, 0.1, 0, 0},
    };
    TextureRenderer renderer(grid, params, samples, anchors);
    Vec theta = renderer.flatten(grid, params);

    auto rng = rng_stream(110, "c10");
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec upstream(renderer.image_dim());
    for (int i = 0; i < upstream.size(); ++i) upstream[i] = n01(rng);

    Vec analytic = renderer.vjp(theta, Pose{}, upstream);
    const double h = 1e-4;
    Vec fd(theta.size());
    for (int i = 0; i < theta.size(); ++i) {
        Vec tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        fd[i] = upstream.dot(renderer.render(tp, Pose{}) - renderer.render(tm, Pose{})) / (2 * h);
    }
    double rel = (analytic - fd).norm() / (1.0 + fd.norm());

    // normal-group isolation under foreign-bucket perturbation
    Eigen::MatrixXd before = render_patch(grid, params, samples, anchors);
    AnchorSet tampered = anchors;
    for (auto& uv : tampered.buckets[{0, 1}].uvs) uv[0] = 1.0 - uv[0];
    Eigen::MatrixXd after = render_patch(grid, params, samples, tampered);
    bool isolated = true;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].normal_group == 0 && !(before.row(i) == after.row(i))) {
            isolated = false;
        }
    }

    bool pass = rel <= 1e-4 && isolated;
    char buf[100];
    std::snprintf(buf, sizeof(buf), "fd relative error=%.2e, foreign-bucket isolation=%s", rel,
                  isolated ? "bit-exact" : "violated");
    report("C10 texture-gradients", pass, buf);
}

TEST_CASE("C11 physics invariants") {
    Timer timer;
    SettleParams params;
    params.room_bounds = std::array<double, 4>{0.0, 0.0, 10.0, 10.0};

    int clean = 0, sound = 0, idempotent = 0, monotone = 0;
    const int trials = 200;
    for (uint64_t seed = 0; seed < trials; ++seed) {
        auto proxies = random_stack(seed);
        auto t = settle(proxies, params);
        auto settled = apply_transforms(proxies, t);
        if (interpenetration_check(settled).empty()) ++clean;
        if (support_soundness(settled, params.tau)) ++sound;
        bool mono = true;
        for (size_t i = 0; i < proxies.size(); ++i) {
            mono = mono && settled[i].box.p.z() <= proxies[i].box.p.z() + 1e-12;
        }
        if (mono) ++monotone;
        auto t2 = settle(settled, params);
        bool idem = true;
        for (const auto& tr : t2) idem = idem && tr.dt.norm() <= 1e-9;
        if (idem) ++idempotent;
    }
    double secs = timer.seconds();
    bool pass = clean == trials && sound == trials && idempotent == trials &&
                monotone == trials && secs < 5.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "clean=%d sound=%d idempotent=%d monotone=%d of %d, runtime=%.2fs", clean, sound,
                  idempotent, monotone, trials, secs);
    report("C11 physics-invariants", pass, buf);
}

namespace {

std::string slurp_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
        all += f.filename().string();
        all += '\0';
        all += read_file(f);
        all += '\0';
    }
    return all;
}

}  // namespace

TEST_CASE("C12 CLI determinism") {
    const char* cli = std::getenv("CTSCENE_CLI");
    if (cli == nullptr) {
        report("C12 cli-determinism", false, "CTSCENE_CLI not set (run through ctest)");
        return;
    }
    fs::path work = fs::temp_directory_path() / "ctscene_c12";
    fs::remove_all(work);
    fs::create_directories(work);

    // inputs
    auto layout = random_layout(3);
    atomic_write_file(work / "layout.json", serialize_layout(layout).dump(2));
    GaussianMixtureOracle gm = acceptance_mixture();
    atomic_write_file(work / "oracle.json", gm.to_json().dump(2));

    struct Cmd {
        const char* name;
        std::string args;
    };
    std::vector<Cmd> cmds{
        {"theorem1", "cts theorem1 --oracle " + (work / "oracle.json").string() +
                         " --sweep 12,25,50 --states 4"},
        {"optimize", "cts optimize --oracle " + (work / "oracle.json").string() +
                         " --theta 0.4,0.1"},
        {"refine", "layout refine --layout " + (work / "layout.json").string()},
        {"zigzag", "camera zigzag --room 0,0,2,8 --n 32"},
    };

    bool pass = true;
    std::string detail;
    for (const auto& cmd : cmds) {
        fs::path a = work / (std::string(cmd.name) + "_a");
        fs::path b = work / (std::string(cmd.name) + "_b");
        for (const auto& out : {a, b}) {
            std::string full = std::string(cli) + " --seed 42 --out " + out.string() + " " +
                               cmd.args + " > /dev/null 2>&1";
            int rc = std::system(full.c_str());
            if (rc == -1) pass = false;
        }
        bool same = slurp_dir(a) == slurp_dir(b);
        pass = pass && same;
        detail += std::string(cmd.name) + (same ? "=identical " : "=DIFFERS ");
    }
    report("C12 cli-determinism", pass, detail);
    fs::remove_all(work);
}
