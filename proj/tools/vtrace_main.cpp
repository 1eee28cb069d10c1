// vtrace: command-line front end for centreline extraction.
//
//   vtrace normalize | enhance | track | minpath | eval | phantom | sweep | serve
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 compute error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json_config.hpp"
#include "vtrace/centerline.hpp"
#include "vtrace/error.hpp"
#include "vtrace/metrics.hpp"
#include "vtrace/parallel.hpp"
#include "vtrace/minpath.hpp"
#include "vtrace/phantom.hpp"
#include "vtrace/pipeline.hpp"
#include "vtrace/service.hpp"
#include "vtrace/tracker.hpp"
#include "vtrace/vesselness.hpp"
#include "vtrace/volume_io.hpp"

namespace {

using namespace vtrace;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCompute = 4;

std::optional<Vec3> to_point(const std::vector<double>& v, const char* what) {
    if (v.empty()) return std::nullopt;
    if (v.size() != 3) throw UsageError(std::string(what) + " takes exactly three values x,y,z");
    return Vec3{v[0], v[1], v[2]};
}

CLI::Option* point_option(CLI::App* app, const std::string& name, std::vector<double>& target,
                          const std::string& help) {
    return app->add_option(name, target, help)->delimiter(',')->expected(3)->type_name("X,Y,Z");
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

// --- normalize -------------------------------------------------------------

struct NormalizeArgs {
    std::string in, out;
    WindowParams window;
};

void add_normalize(CLI::App& app, NormalizeArgs& a) {
    auto* cmd = app.add_subcommand("normalize", "Window stored CT values into [0, 1] working units");
    cmd->add_option("--in", a.in, "Input volume (.json container or .nhdr)")->required();
    cmd->add_option("--out", a.out, "Output volume header (.json)")->required();
    cmd->add_option("--wc", a.window.window_center, "Window center (HU)")->capture_default_str();
    cmd->add_option("--ww", a.window.window_width, "Window width (HU)")->capture_default_str();
    cmd->add_option("--intercept", a.window.rescale_intercept, "Rescale intercept (HU)")->capture_default_str();
    cmd->add_option("--slope", a.window.rescale_slope, "Rescale slope")->capture_default_str();
}

void run_normalize(const NormalizeArgs& a) {
    const Volume raw = load_volume(a.in);
    const Volume unit = normalize_hu(raw, a.window);
    save_volume(a.out, unit, StorageType::f32,
                {{"window", {{"window_center", a.window.window_center},
                             {"window_width", a.window.window_width},
                             {"rescale_intercept", a.window.rescale_intercept},
                             {"rescale_slope", a.window.rescale_slope}}}});
}

// --- enhance ---------------------------------------------------------------

struct EnhanceArgs {
    std::string in, out;
    std::string preset{"subcutaneous"};
    double alpha{0}, beta{0}, c{0};
    std::vector<double> sigmas{1.0};
    std::string polarity{"bright-on-dark"};
    bool raw_output{false};
    CLI::Option *alpha_opt{}, *beta_opt{}, *c_opt{};
};

void add_enhance(CLI::App& app, EnhanceArgs& a) {
    auto* cmd = app.add_subcommand("enhance", "Frangi vesselness enhancement (normalised to [0, 1])");
    cmd->add_option("--in", a.in, "Normalized-unit input volume")->required();
    cmd->add_option("--out", a.out, "Output volume header (.json)")->required();
    cmd->add_option("--preset", a.preset,
                    "Parameter preset: subcutaneous (alpha 0.5, beta 10, c 500) or "
                    "intramuscular (alpha 0.5, beta 0.5, c 100)")
        ->capture_default_str();
    a.alpha_opt = cmd->add_option("--alpha", a.alpha, "Override alpha (plate vs line sensitivity)");
    a.beta_opt = cmd->add_option("--beta", a.beta, "Override beta (blob sensitivity)");
    a.c_opt = cmd->add_option("--c", a.c, "Override c (structureness sensitivity)");
    cmd->add_option("--sigma", a.sigmas, "Hessian scale(s) in mm; several values take the voxel-wise maximum")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--polarity", a.polarity, "bright-on-dark or dark-on-bright")->capture_default_str();
    cmd->add_flag("--raw-output", a.raw_output, "Write unnormalised vesselness");
}

void run_enhance(const EnhanceArgs& a) {
    FrangiParams p = FrangiParams::preset(a.preset);
    if (a.alpha_opt->count()) p.alpha = a.alpha;
    if (a.beta_opt->count()) p.beta = a.beta;
    if (a.c_opt->count()) p.c = a.c;
    p.polarity = polarity_from_string(a.polarity);
    if (a.sigmas.empty()) throw UsageError("at least one --sigma is required");
    p.sigma_mm = a.sigmas.front();
    p.validate();

    const Volume in = load_volume(a.in);
    const Volume vess = a.sigmas.size() == 1 ? enhance_volume(in, p) : enhance_volume_multiscale(in, p, a.sigmas);
    json attrs = {{"preset", a.preset}, {"frangi", to_json(p)}, {"sigmas_mm", a.sigmas}};
    attrs["normalized"] = !a.raw_output;
    save_volume(a.out, a.raw_output ? vess : normalize_vesselness(vess), StorageType::f32, attrs);
}

// --- track -----------------------------------------------------------------

struct TrackArgs {
    std::string vesselness, intensity, fascia, landmarks, out;
    std::vector<double> seed, toward, direction;
    TrackerConfig cfg;
    std::string correction_source{"vesselness"};
};

void add_tracker_flags(CLI::App* cmd, TrackerConfig& cfg, std::string& source) {
    cmd->add_option("--step", cfg.step_delta_mm, "Step length delta (mm)")->capture_default_str();
    cmd->add_option("--window", cfg.window_side_mm, "Local gradient window side (mm)")->capture_default_str();
    cmd->add_option("--correction-interval", cfg.correction_interval, "Re-centre every N steps")
        ->capture_default_str();
    cmd->add_option("--max-turn", cfg.max_turn_deg, "Maximum direction change per step (degrees)")
        ->capture_default_str();
    cmd->add_option("--cross-section-side", cfg.cross_section_side_mm, "Re-centring patch side (mm)")
        ->capture_default_str();
    cmd->add_option("--cross-section-resolution", cfg.cross_section_resolution_mm,
                    "Re-centring patch sample spacing (mm)")
        ->capture_default_str();
    cmd->add_option("--min-vesselness", cfg.min_vesselness, "Stop after 3 steps below this vesselness")
        ->capture_default_str();
    cmd->add_option("--max-iterations", cfg.max_iterations, "Step budget")->capture_default_str();
    cmd->add_option("--correction-source", source, "vesselness or intensity")->capture_default_str();
}

void add_track(CLI::App& app, TrackArgs& a) {
    auto* cmd = app.add_subcommand("track", "Track a vessel centreline from a seed");
    cmd->add_option("--vesselness", a.vesselness, "Normalised vesselness volume")->required();
    cmd->add_option("--intensity", a.intensity, "Normalised intensity volume (defaults to --vesselness)");
    cmd->add_option("--fascia", a.fascia, "Fascia label volume; tracking stops inside it");
    cmd->add_option("--landmarks", a.landmarks, "Landmark JSON: first point is the seed, second the direction target");
    point_option(cmd, "--seed", a.seed, "Seed point (mm)");
    point_option(cmd, "--toward", a.toward, "Second landmark giving the initial direction (mm)");
    point_option(cmd, "--direction", a.direction, "Explicit initial direction");
    cmd->add_option("--out", a.out, "Centerline JSON output")->required();
    add_tracker_flags(cmd, a.cfg, a.correction_source);
}

void run_track(const TrackArgs& a) {
    pipeline::TrackRequest req;
    req.config = a.cfg;
    req.config.correction_source =
        tracker_config_from_json({{"correction_source", a.correction_source}}).correction_source;
    req.config.validate();
    if (!a.landmarks.empty()) {
        const LandmarkSet ls = load_landmarks(a.landmarks);
        req.seed = ls.points[0];
        if (ls.points.size() > 1) req.toward = ls.points[1];
    }
    if (auto s = to_point(a.seed, "--seed")) req.seed = *s;
    else if (a.landmarks.empty()) throw UsageError("track needs --seed or --landmarks");
    if (auto t = to_point(a.toward, "--toward")) req.toward = t;
    req.direction = to_point(a.direction, "--direction");
    if (req.direction && !a.toward.empty()) throw UsageError("--toward and --direction are exclusive");
    if (req.direction) req.toward.reset();

    const Volume vess = load_volume(a.vesselness);
    const Volume intensity = a.intensity.empty() ? vess : load_volume(a.intensity);
    std::optional<Volume> fascia;
    if (!a.fascia.empty()) fascia = load_volume(a.fascia);
    const Centerline line = pipeline::run_track(vess, intensity, fascia ? &*fascia : nullptr, req);
    write_json_file(a.out, pipeline::track_document(line));
}

// --- minpath ---------------------------------------------------------------

struct SigmoidArgs {
    SigmoidParams params;
    std::string orientation{"bright-is-cheap"};
};

void add_sigmoid_flags(CLI::App* cmd, SigmoidArgs& s, bool with_grid_params) {
    if (with_grid_params) {
        cmd->add_option("--a-s", s.params.a_s, "Sigmoid steepness a_s")->capture_default_str();
        cmd->add_option("--b-s", s.params.b_s, "Sigmoid threshold b_s in [0, 1]")->capture_default_str();
    }
    cmd->add_option("--epsilon", s.params.epsilon, "Cost regulariser epsilon")->capture_default_str();
    cmd->add_option("--orientation", s.orientation, "bright-is-cheap or dark-is-cheap")->capture_default_str();
}

struct MinpathArgs {
    std::string vesselness, intensity, landmarks, out;
    std::vector<double> start, goal;
    SigmoidArgs sigmoid;
    bool no_smooth{false};
    bool omit_timing{false};
};

void add_minpath(CLI::App& app, MinpathArgs& a) {
    auto* cmd = app.add_subcommand("minpath", "A* minimum-cost path between two points");
    cmd->add_option("--vesselness", a.vesselness, "Normalised vesselness volume")->required();
    cmd->add_option("--intensity", a.intensity, "Normalised intensity volume")->required();
    cmd->add_option("--landmarks", a.landmarks, "Landmark JSON: first point start, second goal");
    point_option(cmd, "--start", a.start, "Start point (mm)");
    point_option(cmd, "--goal", a.goal, "Goal point (mm)");
    add_sigmoid_flags(cmd, a.sigmoid, true);
    cmd->add_flag("--no-smooth", a.no_smooth, "Keep raw voxel centres (no 3-point smoothing)");
    cmd->add_flag("--omit-timing", a.omit_timing, "Leave out the timing field for reproducible output");
    cmd->add_option("--out", a.out, "Path JSON output")->required();
}

std::pair<PointMM, PointMM> endpoints(const std::string& landmarks, const std::vector<double>& start,
                                      const std::vector<double>& goal) {
    std::optional<PointMM> s, g;
    if (!landmarks.empty()) {
        const LandmarkSet ls = load_landmarks(landmarks);
        if (ls.points.size() < 2) throw DataError(landmarks + ": needs a start and a goal point");
        s = ls.points[0];
        g = ls.points[1];
    }
    if (auto p = to_point(start, "--start")) s = p;
    if (auto p = to_point(goal, "--goal")) g = p;
    if (!s || !g) throw UsageError("need --start and --goal (or --landmarks)");
    return {*s, *g};
}

SigmoidParams sigmoid_from(const SigmoidArgs& s) {
    SigmoidParams p = s.params;
    p.orientation = sigmoid_orientation_from_string(s.orientation);
    p.validate();
    return p;
}

void run_minpath(const MinpathArgs& a) {
    pipeline::MinpathRequest req;
    std::tie(req.start, req.goal) = endpoints(a.landmarks, a.start, a.goal);
    req.sigmoid = sigmoid_from(a.sigmoid);
    req.smooth = !a.no_smooth;
    const Volume vess = load_volume(a.vesselness);
    const Volume intensity = load_volume(a.intensity);
    const auto result = pipeline::run_minpath(vess, intensity, req);
    write_json_file(a.out, pipeline::minpath_document(result, !a.omit_timing));
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string gt, path, out, name;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    auto* cmd = app.add_subcommand("eval", "Directed landmark-to-path distances");
    cmd->add_option("--gt", a.gt, "Ground-truth landmark JSON")->required();
    cmd->add_option("--path", a.path, "Centerline or path JSON")->required();
    cmd->add_option("--out", a.out, "CSV report (stdout when omitted)");
    cmd->add_option("--name", a.name, "Row label (defaults to the landmark set name)");
}

void run_eval(const EvalArgs& a) {
    const LandmarkSet gt = load_landmarks(a.gt);
    const Centerline line = load_centerline(a.path);
    const PathMetrics m = evaluate(gt, line);
    write_text(a.out, metrics_csv_header() + "\n" + metrics_csv_row(a.name.empty() ? gt.name : a.name, m) + "\n");
}

// --- phantom ---------------------------------------------------------------

struct PhantomArgs {
    std::string spec, out_prefix;
    double landmark_step{2.0};
};

void add_phantom(CLI::App& app, PhantomArgs& a) {
    auto* cmd = app.add_subcommand("phantom", "Synthetic tube phantom with known centreline");
    cmd->add_option("--spec", a.spec, "Phantom JSON description")->required();
    cmd->add_option("--out-prefix", a.out_prefix,
                    "Writes PREFIX.json/.raw, PREFIX_landmarks.json and, with a slab, PREFIX_fascia.json")
        ->required();
    cmd->add_option("--landmark-step", a.landmark_step, "Axis landmark spacing (mm)")->capture_default_str();
}

void run_phantom(const PhantomArgs& a) {
    const auto [spec, grid] = phantom_spec_from_json(read_json_file(a.spec));
    const Phantom ph = generate(spec, grid);
    save_volume(a.out_prefix + ".json", ph.volume);
    const std::string name = std::filesystem::path(a.out_prefix).filename().string();
    write_json_file(a.out_prefix + "_landmarks.json", to_json(axis_landmarks(ph.axis, a.landmark_step, name)));
    if (spec.slab) save_volume(a.out_prefix + "_fascia.json", slab_fascia_mask(spec, grid));
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
    std::string vesselness, intensity, landmarks, gt, out;
    std::vector<double> start, goal;
    SigmoidArgs sigmoid;
    unsigned jobs{0};
    bool no_smooth{false};
    bool omit_timing{false};
};

void add_sweep(CLI::App& app, SweepArgs& a) {
    auto* cmd = app.add_subcommand("sweep", "Minimum-path accuracy/time over the 42-cell (a_s, b_s) grid");
    cmd->add_option("--vesselness", a.vesselness, "Normalised vesselness volume")->required();
    cmd->add_option("--intensity", a.intensity, "Normalised intensity volume")->required();
    cmd->add_option("--gt", a.gt, "Ground-truth landmark JSON")->required();
    cmd->add_option("--landmarks", a.landmarks, "Landmark JSON: first point start, second goal");
    point_option(cmd, "--start", a.start, "Start point (mm)");
    point_option(cmd, "--goal", a.goal, "Goal point (mm)");
    add_sigmoid_flags(cmd, a.sigmoid, false);
    cmd->add_option("--jobs", a.jobs, "Worker threads (0 = hardware concurrency)")->capture_default_str();
    cmd->add_flag("--no-smooth", a.no_smooth, "Evaluate raw voxel paths");
    cmd->add_flag("--omit-timing", a.omit_timing, "Write 0 for elapsed_s for reproducible output");
    cmd->add_option("--out", a.out, "CSV output (stdout when omitted)");
}

void run_sweep(const SweepArgs& a) {
    const auto [start, goal] = endpoints(a.landmarks, a.start, a.goal);
    const SigmoidParams base = sigmoid_from(a.sigmoid);
    const Volume vess = load_volume(a.vesselness);
    const Volume intensity = load_volume(a.intensity);
    const LandmarkSet gt = load_landmarks(a.gt);
    const unsigned jobs = a.jobs == 0 ? default_thread_count() : a.jobs;
    const auto rows = pipeline::run_sweep(vess, intensity, start, goal, gt, base, !a.no_smooth, jobs);
    write_text(a.out, pipeline::sweep_csv(rows, !a.omit_timing));
}

// --- serve -----------------------------------------------------------------

struct ServeArgs {
    ServiceOptions options;
    std::string static_dir;
};

void add_serve(CLI::App& app, ServeArgs& a) {
    auto* cmd = app.add_subcommand("serve", "HTTP service for the browser viewer");
    cmd->add_option("--host", a.options.host, "Bind address")->capture_default_str();
    cmd->add_option("--port", a.options.port, "Bind port (0 = ephemeral)")->capture_default_str();
    cmd->add_option("--static-dir", a.static_dir, "Directory served at /");
    cmd->add_option("--workers", a.options.workers, "Concurrent extraction runs")->capture_default_str();
}

Service* g_service = nullptr;

void run_serve(ServeArgs a) {
    if (!a.static_dir.empty()) a.options.static_dir = a.static_dir;
    Service service(a.options);
    const int port = service.bind();
    if (port < 0) throw DataError("cannot bind " + a.options.host);
    std::cout << "listening on http://" << a.options.host << ':' << port << std::endl;
    g_service = &service;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    service.serve();
    g_service = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vtrace: vessel centreline extraction from 3D volumes"};
    app.require_subcommand(1);
    app.set_config("--config", "", "JSON run configuration; objects keyed by subcommand name");
    app.config_formatter(std::make_shared<vtrace::cli::JsonConfig>());

    NormalizeArgs normalize;
    EnhanceArgs enhance;
    TrackArgs track;
    MinpathArgs minpath;
    EvalArgs eval;
    PhantomArgs phantom;
    SweepArgs sweep;
    ServeArgs serve;
    add_normalize(app, normalize);
    add_enhance(app, enhance);
    add_track(app, track);
    add_minpath(app, minpath);
    add_eval(app, eval);
    add_phantom(app, phantom);
    add_sweep(app, sweep);
    add_serve(app, serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    const CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    try {
        if (name == "normalize") run_normalize(normalize);
        else if (name == "enhance") run_enhance(enhance);
        else if (name == "track") run_track(track);
        else if (name == "minpath") run_minpath(minpath);
        else if (name == "eval") run_eval(eval);
        else if (name == "phantom") run_phantom(phantom);
        else if (name == "sweep") run_sweep(sweep);
        else if (name == "serve") run_serve(serve);
    } catch (const vtrace::Error& e) {
        std::cerr << "vtrace " << name << ": error: " << e.what() << '\n';
        switch (e.category()) {
            case vtrace::Error::Category::usage: return kExitUsage;
            case vtrace::Error::Category::data: return kExitData;
            case vtrace::Error::Category::compute: return kExitCompute;
        }
    } catch (const std::exception& e) {
        std::cerr << "vtrace " << name << ": error: " << e.what() << '\n';
        return kExitCompute;
    }
    return 0;
}
