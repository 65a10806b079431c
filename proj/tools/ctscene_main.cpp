// ctscene: experiment runner over the library modules.  Every subcommand
// reads its inputs, writes artifacts plus a machine-readable summary.json
// into --out, and exits 0 on success, 1 when a validation or acceptance check
// failed (artifacts are still written), 2 on usage or configuration errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ctscene/consistency.hpp"
#include "ctscene/diffusion.hpp"
#include "ctscene/geometry.hpp"
#include "ctscene/io.hpp"
#include "ctscene/layout.hpp"
#include "ctscene/optimizer.hpp"
#include "ctscene/physics.hpp"
#include "ctscene/refiner.hpp"
#include "ctscene/rng.hpp"
#include "ctscene/texture.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace ctscene;

namespace {

struct GlobalOpts {
    uint64_t seed = 0;
    std::string out_dir = "out";
    std::string config_path;
    std::string refiner_url;
    std::string refiner_token_env;
};

struct Summary {
    std::string command;
    nlohmann::json inputs = nlohmann::json::object();
    std::vector<std::string> outputs;
    nlohmann::json checks = nlohmann::json::object();
    bool pass = true;
};

void note_input(Summary& s, const fs::path& path) {
    s.inputs[path.string()] = file_hash_hex(path);
}

void write_artifact(const GlobalOpts& g, Summary& s, const std::string& name,
                    const std::string& content) {
    fs::create_directories(g.out_dir);
    atomic_write_file(fs::path(g.out_dir) / name, content);
    s.outputs.push_back(name);
}

int finish(const GlobalOpts& g, Summary& s) {
    nlohmann::json j{
        {"tool", "ctscene"}, {"version", kVersion},   {"command", s.command},
        {"seed", g.seed},    {"inputs", s.inputs},    {"outputs", s.outputs},
        {"checks", s.checks}, {"pass", s.pass},
    };
    fs::create_directories(g.out_dir);
    atomic_write_file(fs::path(g.out_dir) / "summary.json", j.dump(2) + "\n");
    return s.pass ? 0 : 1;
}

nlohmann::json load_json(const fs::path& path) {
    auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) {
        throw std::runtime_error("not valid JSON: " + path.string());
    }
    return doc;
}

std::vector<float> read_floats(const fs::path& path, size_t expect) {
    std::string bytes = read_file(path);
    if (bytes.size() != expect * sizeof(float)) {
        throw std::runtime_error(path.string() + ": expected " + std::to_string(expect) +
                                 " float32 values, file holds " +
                                 std::to_string(bytes.size() / sizeof(float)));
    }
    std::vector<float> out(expect);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

std::string floats_to_bytes(const std::vector<float>& v) {
    return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

const DiffusionSchedule& schedule() {
    static DiffusionSchedule sched = build_schedule(1000, 8.5e-4, 1.2e-2);
    return sched;
}

OptimizerConfig config_from_json(const nlohmann::json& j) {
    OptimizerConfig cfg;
    cfg.total_iters = j.value("total_iters", cfg.total_iters);
    cfg.n_min = j.value("n_min", cfg.n_min);
    cfg.n_max = j.value("n_max", cfg.n_max);
    cfg.n_warm_up = j.value("n_warm_up", cfg.n_warm_up);
    cfg.t_warm_up = j.value("t_warm_up", cfg.t_warm_up);
    cfg.t_cut = j.value("t_cut", cfg.t_cut);
    cfg.eta = j.value("eta", cfg.eta);
    cfg.noise_t_threshold = j.value("noise_t_threshold", cfg.noise_t_threshold);
    std::string mode = j.value("noise_removal", "iteration");
    if (mode == "iteration") {
        cfg.noise_removal = NoiseRemovalMode::kIterationCutoff;
    } else if (mode == "timestep") {
        cfg.noise_removal = NoiseRemovalMode::kTimestepThreshold;
    } else if (mode == "both") {
        cfg.noise_removal = NoiseRemovalMode::kBoth;
    } else {
        throw std::runtime_error("config: noise_removal must be iteration|timestep|both");
    }
    return cfg;
}

Condition condition_from_flag(const std::vector<int>& comps) {
    if (comps.empty()) return Condition::all();
    return Condition::subset(comps);
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (!(ys[i] > 0.0)) continue;
        double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    return n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx)
                  : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------- layout ---

int run_layout_validate(const GlobalOpts& g, const std::string& layout_path, double eps) {
    Summary s;
    s.command = "layout validate";
    note_input(s, layout_path);
    HouseLayout h = parse_layout(read_file(layout_path));
    auto report = validate(h, eps);
    write_artifact(g, s, "report.json", report.to_json().dump(2) + "\n");
    s.checks["violations"] = report.violations.size();
    s.checks["total_overlap_volume"] = report.total_overlap_volume();
    s.pass = report.empty();
    return finish(g, s);
}

int run_layout_refine(const GlobalOpts& g, const std::string& layout_path, int max_iter,
                      double eps) {
    Summary s;
    s.command = "layout refine";
    note_input(s, layout_path);
    HouseLayout h = parse_layout(read_file(layout_path));

    std::unique_ptr<Refiner> refiner;
    if (!g.refiner_url.empty()) {
        RefinerEndpoint ep;
        ep.url = g.refiner_url;
        ep.token_env = g.refiner_token_env;
        refiner = std::make_unique<HttpRefiner>(ep);
    } else {
        refiner = std::make_unique<LocalRefiner>();
    }
    auto outcome = refine_loop(h, *refiner, max_iter, eps);
    write_artifact(g, s, "refined.json", serialize_layout(outcome.layout).dump(2) + "\n");
    write_artifact(g, s, "report.json", outcome.report.to_json().dump(2) + "\n");
    s.checks["iterations"] = outcome.iterations;
    s.checks["clean"] = outcome.report.empty();
    s.pass = outcome.report.empty();
    return finish(g, s);
}

int run_layout_orient(const GlobalOpts& g, const std::string& layout_path) {
    Summary s;
    s.command = "layout orient";
    note_input(s, layout_path);
    HouseLayout h = parse_layout(read_file(layout_path));
    HouseLayout oriented = assign_orientations(h, h.relations);
    write_artifact(g, s, "oriented.json", serialize_layout(oriented).dump(2) + "\n");
    int assigned = 0, total = 0;
    for (const auto& r : oriented.rooms) {
        for (const auto& b : r.boxes) {
            ++total;
            if (b.yaw) ++assigned;
        }
    }
    s.checks["boxes"] = total;
    s.checks["assigned"] = assigned;
    s.pass = assigned == total;
    return finish(g, s);
}

int run_layout_export(const GlobalOpts& g, const std::string& layout_path) {
    Summary s;
    s.command = "layout export";
    note_input(s, layout_path);
    HouseLayout h = parse_layout(read_file(layout_path));
    write_artifact(g, s, "mesh.obj", export_planar_mesh(h));
    return finish(g, s);
}

// ---------------------------------------------------------------- camera ---

int run_camera_zigzag(const GlobalOpts& g, const std::vector<double>& room, int n,
                      const TrajectoryParams& params) {
    Summary s;
    s.command = "camera zigzag";
    std::array<double, 4> bounds{room[0], room[1], room[2], room[3]};
    auto wps = zigzag_trajectory(bounds, n, params);
    write_artifact(g, s, "waypoints.json", waypoints_to_json(wps).dump(2) + "\n");

    bool opposite_ok = true;
    double min_dist = std::numeric_limits<double>::infinity();
    double max_angle = 0.0;
    for (size_t i = 0; i < wps.size(); ++i) {
        if (i > 0) {
            Eigen::Vector2d dc = (wps[i].camera - wps[i - 1].camera).head<2>();
            Eigen::Vector2d dt = (wps[i].target - wps[i - 1].target).head<2>();
            opposite_ok = opposite_ok && dc.dot(dt) < 0.0;
        }
        min_dist = std::min(min_dist, (wps[i].camera - wps[i].target).norm());
        max_angle = std::max(max_angle, view_angle_from_wall_deg(wps[i], bounds));
    }
    s.checks["opposite_motion"] = opposite_ok;
    s.checks["min_distance"] = min_dist;
    s.checks["max_view_angle_deg"] = max_angle;
    s.pass = opposite_ok && min_dist >= params.d_min && max_angle <= params.max_view_angle_deg;
    return finish(g, s);
}

// ------------------------------------------------------------------- cts ---

int run_cts_theorem1(const GlobalOpts& g, const std::string& oracle_path,
                     const std::vector<int>& sweep, int s_fixed, int n_states) {
    Summary sum;
    sum.command = "cts theorem1";
    note_input(sum, oracle_path);
    auto gm = GaussianMixtureOracle::from_json(load_json(oracle_path));
    ConsistencyCoeffs coeffs;

    auto rng = rng_stream(g.seed, "cts-theorem1");
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<Vec> xs, es;
    for (int i = 0; i < n_states; ++i) {
        Vec x(gm.dim), e(gm.dim);
        for (int d = 0; d < gm.dim; ++d) {
            x[d] = n01(rng);
            e[d] = n01(rng);
        }
        xs.push_back(x);
        es.push_back(e);
    }

    std::ostringstream csv;
    csv << "dt,residual_norm,term1,term2\n";
    std::vector<double> dts, residuals;
    for (int dt : sweep) {
        double racc = 0, t1acc = 0, t2acc = 0;
        for (int i = 0; i < n_states; ++i) {
            auto rep = theorem1_decomposition(xs[i], es[i], s_fixed, s_fixed + dt,
                                              Condition::all(), gm, schedule(), coeffs);
            racc += rep.residual_norm;
            t1acc += rep.w1_term_norm * rep.w1_term_norm;
            t2acc += rep.w2_term_norm * rep.w2_term_norm;
        }
        double r = racc / n_states;
        csv << dt << ',' << format_double(r) << ',' << format_double(t1acc / n_states) << ','
            << format_double(t2acc / n_states) << '\n';
        dts.push_back(dt);
        residuals.push_back(r);
    }
    double slope = loglog_slope(dts, residuals);
    csv << "slope," << format_double(slope) << ",,\n";
    write_artifact(g, sum, "theorem1.csv", csv.str());

    sum.checks["slope"] = slope;
    sum.checks["s"] = s_fixed;
    sum.pass = slope >= 1.7 && slope <= 2.3;
    return finish(g, sum);
}

int run_cts_theorem2(const GlobalOpts& g, const std::string& oracle_path,
                     const std::vector<int>& gaps, int seeds, const std::vector<int>& cond_comps) {
    Summary sum;
    sum.command = "cts theorem2";
    note_input(sum, oracle_path);
    auto gm = GaussianMixtureOracle::from_json(load_json(oracle_path));
    ConsistencyCoeffs coeffs;

    OptimizerConfig tmpl;
    tmpl.total_iters = 2500;
    tmpl.n_warm_up = 1;
    tmpl.t_warm_up = 250;
    tmpl.eta = 0.05;
    tmpl.seed = g.seed;
    if (!g.config_path.empty()) {
        tmpl = config_from_json(load_json(g.config_path));
        tmpl.seed = g.seed;
    }

    auto result = theorem2_experiment(gaps, tmpl, condition_from_flag(cond_comps), gm, schedule(),
                                      coeffs, seeds);

    std::ostringstream csv;
    csv << "t_cut,median_error,mean_error,converged,total\n";
    bool ratios_ok = true;
    double prev = -1.0;
    nlohmann::json ratios = nlohmann::json::array();
    for (const auto& gr : result.gaps) {
        csv << gr.t_cut << ',' << format_double(gr.median_error) << ','
            << format_double(gr.mean_error) << ',' << gr.converged << ',' << gr.total << '\n';
        if (prev > 0.0) {
            double ratio = gr.median_error / prev;
            ratios.push_back(ratio);
            ratios_ok = ratios_ok && ratio >= 1.4 && ratio <= 3.0;
        }
        prev = gr.median_error;
    }
    csv << "slope," << format_double(result.loglog_slope) << ",,,\n";
    write_artifact(g, sum, "theorem2.csv", csv.str());

    sum.checks["slope"] = result.loglog_slope;
    sum.checks["ratios"] = ratios;
    sum.pass = ratios_ok;
    return finish(g, sum);
}

int run_cts_optimize(const GlobalOpts& g, const std::string& oracle_path,
                     const std::vector<int>& cond_comps, const std::vector<double>& theta_flag) {
    Summary sum;
    sum.command = "cts optimize";
    note_input(sum, oracle_path);
    auto gm = GaussianMixtureOracle::from_json(load_json(oracle_path));
    ConsistencyCoeffs coeffs;

    OptimizerConfig cfg;
    if (!g.config_path.empty()) {
        note_input(sum, g.config_path);
        cfg = config_from_json(load_json(g.config_path));
    }
    cfg.seed = g.seed;

    Vec theta0;
    if (!theta_flag.empty()) {
        if (static_cast<int>(theta_flag.size()) != gm.dim) {
            throw std::runtime_error("--theta must match the oracle dimension");
        }
        theta0 = Eigen::Map<const Vec>(theta_flag.data(), gm.dim);
    } else {
        auto rng = rng_stream(g.seed, "cts-optimize-theta0");
        theta0 = gm.sample(rng, Condition::all());
    }

    auto report =
        optimize(theta0, cfg, condition_from_flag(cond_comps), gm, schedule(), coeffs);
    std::ostringstream csv;
    report.write_csv(csv);
    write_artifact(g, sum, "run.csv", csv.str());
    write_artifact(g, sum, "run_summary.json", report.summary(gm).dump(2) + "\n");
    sum.checks["final_mode_dist"] = gm.nearest_mode_distance(report.final_theta);
    sum.checks["diverged"] = report.diverged;
    sum.pass = !report.diverged;
    return finish(g, sum);
}

// --------------------------------------------------------------- texture ---

int run_texture_fit(const GlobalOpts& g, const std::string& target_path, int width, int height,
                    int steps, double lr) {
    Summary sum;
    sum.command = "texture fit";
    note_input(sum, target_path);
    size_t n = static_cast<size_t>(width) * height;
    auto raw = read_floats(target_path, n * 3);

    MultiResGrid grid = MultiResGrid::create({16, 32}, 8, g.seed ^ fnv1a64("grid"));
    DecoderParams params = DecoderParams::create(16, 4, g.seed ^ fnv1a64("decoder"));
    AnchorSet anchors = AnchorSet::stratified({{0, 0}}, 16, g.seed ^ fnv1a64("anchors"));

    std::vector<UvSample> samples;
    Eigen::MatrixXd target(n, 3);
    for (int j = 0; j < height; ++j) {
        for (int i = 0; i < width; ++i) {
            size_t at = static_cast<size_t>(j) * width + i;
            samples.push_back({(i + 0.5) / width, (j + 0.5) / height, 0, 0});
            for (int c = 0; c < 3; ++c) target(at, c) = raw[3 * at + c];
        }
    }

    auto curve = fit_to_target(grid, params, samples, anchors, target, steps, lr);
    std::ostringstream csv;
    csv << "step,mse\n";
    for (size_t i = 0; i < curve.size(); ++i) {
        csv << i << ',' << format_double(curve[i]) << '\n';
    }
    write_artifact(g, sum, "loss_curve.csv", csv.str());
    fs::create_directories(g.out_dir);
    save_texture(fs::path(g.out_dir) / "texture.bin", grid, params);
    sum.outputs.push_back("texture.bin");

    sum.checks["initial_mse"] = curve.empty() ? 0.0 : curve.front();
    sum.checks["final_mse"] = curve.empty() ? 0.0 : curve.back();
    sum.pass = !curve.empty() && curve.back() <= curve.front();
    return finish(g, sum);
}

int run_texture_gradcheck(const GlobalOpts& g) {
    Summary sum;
    sum.command = "texture gradcheck";

    MultiResGrid grid = MultiResGrid::create({2, 4}, 4, g.seed ^ fnv1a64("gc-grid"));
    DecoderParams params = DecoderParams::create(8, 2, g.seed ^ fnv1a64("gc-decoder"));
    AnchorSet anchors = AnchorSet::stratified({{0, 0}, {0, 1}}, 3, g.seed ^ fnv1a64("gc-anchors"));
    std::vector<UvSample> samples{
        {0.15, 0.25, 0, 0}, {0.8, 0.3, 0, 0}, {0.5, 0.5, 0, 1}, {0.33, 0.9, 0, 1}, {0.6, 0.1, 0, 0},
    };
    TextureRenderer renderer(grid, params, samples, anchors);
    Vec theta = renderer.flatten(grid, params);

    auto rng = rng_stream(g.seed, "texture-gradcheck");
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec upstream(renderer.image_dim());
    for (int i = 0; i < upstream.size(); ++i) upstream[i] = n01(rng);

    Vec analytic = renderer.vjp(theta, Pose{}, upstream);
    const double h = 1e-4;
    double max_err = 0.0;
    Vec fd(theta.size());
    for (int i = 0; i < theta.size(); ++i) {
        Vec tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        fd[i] = upstream.dot(renderer.render(tp, Pose{}) - renderer.render(tm, Pose{})) / (2 * h);
        max_err = std::max(max_err,
                           std::abs(analytic[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
    }
    double rel = (analytic - fd).norm() / (1.0 + fd.norm());

    sum.checks["relative_error"] = rel;
    sum.checks["max_component_error"] = max_err;
    sum.checks["parameters"] = theta.size();
    sum.pass = rel <= 1e-4 && max_err <= 1e-4;
    return finish(g, sum);
}

// --------------------------------------------------------------- physics ---

int run_physics_settle(const GlobalOpts& g, const std::string& layout_path, double tau) {
    Summary sum;
    sum.command = "physics settle";
    note_input(sum, layout_path);
    HouseLayout h = parse_layout(read_file(layout_path));

    nlohmann::json all_transforms = nlohmann::json::array();
    bool clean = true;
    HouseLayout settled_layout = h;
    for (size_t ri = 0; ri < h.rooms.size(); ++ri) {
        SettleParams params;
        params.tau = tau;
        params.room_bounds = h.rooms[ri].bounds;
        auto proxies = proxies_from_room(h.rooms[ri]);
        auto transforms = settle(proxies, params);
        auto settled = apply_transforms(proxies, transforms);
        clean = clean && interpenetration_check(settled).empty() &&
                support_soundness(settled, tau);
        for (const auto& t : transforms) {
            all_transforms.push_back(transforms_to_json({t})[0]);
        }
        for (size_t bi = 0; bi < settled.size(); ++bi) {
            settled_layout.rooms[ri].boxes[bi].p = settled[bi].box.p;
        }
    }
    write_artifact(g, sum, "transforms.json", all_transforms.dump(2) + "\n");
    write_artifact(g, sum, "settled.json", serialize_layout(settled_layout).dump(2) + "\n");
    sum.checks["clean"] = clean;
    sum.pass = clean;
    return finish(g, sum);
}

// ------------------------------------------------------------- composite ---

int run_composite(const GlobalOpts& g, int width, int height, const std::string& f_rgba,
                  const std::string& f_depth, const std::string& l_rgba,
                  const std::string& l_depth) {
    Summary sum;
    sum.command = "composite";
    for (const auto& p : {f_rgba, f_depth, l_rgba, l_depth}) note_input(sum, p);

    size_t n = static_cast<size_t>(width) * height;
    DepthBuffers b;
    b.width = width;
    b.height = height;
    b.furniture_rgba = read_floats(f_rgba, 4 * n);
    b.furniture_depth = read_floats(f_depth, n);
    b.layout_rgba = read_floats(l_rgba, 4 * n);
    b.layout_depth = read_floats(l_depth, n);

    auto out = composite(b);
    write_artifact(g, sum, "composited.rgba", floats_to_bytes(out));
    int furniture_pixels = 0;
    for (size_t i = 0; i < n; ++i) {
        if (b.furniture_depth[i] <= b.layout_depth[i]) ++furniture_pixels;
    }
    sum.checks["furniture_pixels"] = furniture_pixels;
    sum.checks["pixels"] = n;
    return finish(g, sum);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"consistency-trajectory scene toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master seed; subcommands derive labeled streams");
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config file for optimizer runs");
    app.add_option("--refiner-url", g.refiner_url, "external refiner endpoint");
    app.add_option("--refiner-token-env", g.refiner_token_env,
                   "environment variable holding the refiner bearer token");

    // layout
    auto* layout = app.add_subcommand("layout", "layout program tools");
    layout->require_subcommand(1);
    std::string layout_path;
    double eps_overlap = 1e-6;
    int max_iter = 20;

    auto* lv = layout->add_subcommand("validate", "check overlaps and bounds");
    lv->add_option("--layout", layout_path, "layout JSON")->required();
    lv->add_option("--eps", eps_overlap, "overlap tolerance, m^3");

    auto* lr = layout->add_subcommand("refine", "iterative programmatic verification loop");
    lr->add_option("--layout", layout_path, "layout JSON")->required();
    lr->add_option("--max-iter", max_iter, "round budget")->capture_default_str();
    lr->add_option("--eps", eps_overlap, "overlap tolerance, m^3");

    auto* lo = layout->add_subcommand("orient", "cluster-based orientation assignment");
    lo->add_option("--layout", layout_path, "layout JSON")->required();

    auto* le = layout->add_subcommand("export", "planar shell as OBJ");
    le->add_option("--layout", layout_path, "layout JSON")->required();

    // camera
    auto* camera = app.add_subcommand("camera", "camera trajectory tools");
    camera->require_subcommand(1);
    auto* cz = camera->add_subcommand("zigzag", "wall-following adaptive trajectory");
    std::vector<double> room_flag;
    int n_waypoints = 64;
    TrajectoryParams traj;
    cz->add_option("--room", room_flag, "room bounds x0,y0,x1,y1")
        ->required()
        ->expected(4)
        ->delimiter(',');
    cz->add_option("--n", n_waypoints, "waypoint count")->capture_default_str();
    cz->add_option("--margin", traj.margin, "wall offset, m")->capture_default_str();
    cz->add_option("--hmin", traj.h_min, "minimum height, m")->capture_default_str();
    cz->add_option("--hmax", traj.h_max, "maximum height, m")->capture_default_str();
    cz->add_option("--dmin", traj.d_min, "minimum camera-target distance, m")
        ->capture_default_str();

    // cts
    auto* cts = app.add_subcommand("cts", "consistency trajectory experiments");
    cts->require_subcommand(1);
    std::string oracle_path;
    std::vector<int> sweep{12, 25, 50, 100, 200};
    std::vector<int> gaps{25, 50, 100, 200};
    std::vector<int> cond_comps;
    std::vector<double> theta_flag;
    int s_fixed = 400;
    int n_states = 8;
    int n_seeds = 50;

    auto* t1 = cts->add_subcommand("theorem1", "decomposition residual sweep");
    t1->footer("writes theorem1.csv: dt,residual_norm,term1,term2 with a trailing slope row");
    t1->add_option("--oracle", oracle_path, "mixture oracle JSON")->required();
    t1->add_option("--sweep", sweep, "gap values")->delimiter(',');
    t1->add_option("--s", s_fixed, "fixed lower timestep")->capture_default_str();
    t1->add_option("--states", n_states, "random states per gap")->capture_default_str();

    auto* t2 = cts->add_subcommand("theorem2", "convergence-gap scaling");
    t2->footer("writes theorem2.csv: t_cut,median_error,mean_error,converged,total with a trailing slope row");
    t2->add_option("--oracle", oracle_path, "mixture oracle JSON")->required();
    t2->add_option("--gaps", gaps, "t_cut values")->delimiter(',');
    t2->add_option("--seeds", n_seeds, "starts per gap")->capture_default_str();
    t2->add_option("--cond", cond_comps, "condition on components")->delimiter(',');

    auto* opt = cts->add_subcommand("optimize", "single optimization run");
    opt->footer("writes run.csv: iter,t,s,term1,term2,grad_norm,mode_dist");
    opt->add_option("--oracle", oracle_path, "mixture oracle JSON")->required();
    opt->add_option("--cond", cond_comps, "condition on components")->delimiter(',');
    opt->add_option("--theta", theta_flag, "initial parameters")->delimiter(',');

    // texture
    auto* texture = app.add_subcommand("texture", "texture field tools");
    texture->require_subcommand(1);
    std::string target_path;
    int tex_w = 0, tex_h = 0, fit_steps = 500;
    double fit_lr = 0.5;

    auto* tf = texture->add_subcommand("fit", "fit the field to a target image");
    tf->footer("writes loss_curve.csv: step,mse plus the fitted texture.bin container");
    tf->add_option("--target", target_path, "raw float32 RGB image")->required();
    tf->add_option("--width", tex_w, "image width")->required();
    tf->add_option("--height", tex_h, "image height")->required();
    tf->add_option("--steps", fit_steps, "descent steps")->capture_default_str();
    tf->add_option("--lr", fit_lr, "learning rate")->capture_default_str();

    texture->add_subcommand("gradcheck", "finite-difference check of the analytic gradients");

    // physics
    auto* physics = app.add_subcommand("physics", "bounding-box settling");
    physics->require_subcommand(1);
    double tau = 0.3;
    auto* ps = physics->add_subcommand("settle", "drop movable boxes to rest");
    ps->add_option("--layout", layout_path, "layout JSON")->required();
    ps->add_option("--tau", tau, "support overlap fraction")->capture_default_str();

    // composite
    auto* comp = app.add_subcommand("composite", "hybrid depth-test compositing");
    std::string f_rgba, f_depth, l_rgba, l_depth;
    int comp_w = 0, comp_h = 0;
    comp->add_option("--width", comp_w, "buffer width")->required();
    comp->add_option("--height", comp_h, "buffer height")->required();
    comp->add_option("--furniture-rgba", f_rgba, "raw float32 RGBA")->required();
    comp->add_option("--furniture-depth", f_depth, "raw float32 depth")->required();
    comp->add_option("--layout-rgba", l_rgba, "raw float32 RGBA")->required();
    comp->add_option("--layout-depth", l_depth, "raw float32 depth")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (lv->parsed()) return run_layout_validate(g, layout_path, eps_overlap);
        if (lr->parsed()) return run_layout_refine(g, layout_path, max_iter, eps_overlap);
        if (lo->parsed()) return run_layout_orient(g, layout_path);
        if (le->parsed()) return run_layout_export(g, layout_path);
        if (cz->parsed()) return run_camera_zigzag(g, room_flag, n_waypoints, traj);
        if (t1->parsed()) return run_cts_theorem1(g, oracle_path, sweep, s_fixed, n_states);
        if (t2->parsed()) return run_cts_theorem2(g, oracle_path, gaps, n_seeds, cond_comps);
        if (opt->parsed()) return run_cts_optimize(g, oracle_path, cond_comps, theta_flag);
        if (tf->parsed()) return run_texture_fit(g, target_path, tex_w, tex_h, fit_steps, fit_lr);
        if (texture->got_subcommand("gradcheck")) return run_texture_gradcheck(g);
        if (ps->parsed()) return run_physics_settle(g, layout_path, tau);
        if (comp->parsed())
            return run_composite(g, comp_w, comp_h, f_rgba, f_depth, l_rgba, l_depth);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
