// Command-line front end: align, recover-camera, evaluate, losses, synth.
// Reports are JSON on stdout or --out; failures are JSON on stderr with exit
// status 2 (input) or 3 (numerical).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmgeo/pmgeo.hpp"
#include "pmgeo/testkit/scene.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace pmgeo;

struct Size2 {
    std::size_t height = kDefaultWorkingSize;
    std::size_t width = kDefaultWorkingSize;
};

Size2 parse_size(const std::string& s) {
    const auto x = s.find('x');
    Size2 out;
    try {
        std::size_t used = 0;
        if (x == std::string::npos) throw std::invalid_argument(s);
        const std::string h = s.substr(0, x), w = s.substr(x + 1);
        out.height = std::stoul(h, &used);
        if (used != h.size()) throw std::invalid_argument(s);
        out.width = std::stoul(w, &used);
        if (used != w.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
        fail(ErrorCode::invalid_input, "expected a size of the form HxW, got '" + s + "'");
    }
    require(out.height > 0 && out.width > 0, "size must be positive");
    return out;
}

Truncation parse_tau(const std::string& s) {
    if (s == "none") return Truncation::none();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) fail(ErrorCode::invalid_input, "tau must be a positive number or 'none'");
    return Truncation::at(v);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        if (item.empty()) continue;
        std::size_t used = 0;
        try {
            out.push_back(std::stod(item, &used));
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) fail(ErrorCode::invalid_input, "bad list entry '" + item + "'");
    }
    return out;
}

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const SimilarityAlign& a) {
    return {{"scale", a.scale},
            {"shift", vec(a.shift)},
            {"shift_mode", a.shift_mode == ShiftMode::one_dimensional ? "1d" : "3d"},
            {"admissible", a.admissible()}};
}

void emit(const json& j, const std::string& out) {
    const std::string text = j.dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out);
    if (!f) fail(ErrorCode::io_failure, "cannot open '" + out + "' for writing");
    f << text;
    if (!f) fail(ErrorCode::io_failure, "write to '" + out + "' failed");
}

PointMap load_points(const std::string& path) { return to_pointmap(read_pmap(path)); }

PointMap resized(const PointMap& pm, Size2 s) {
    return downsample_pointmap(pm, std::min(s.height, pm.height()), std::min(s.width, pm.width()));
}

// ---- align ----------------------------------------------------------------

struct AlignArgs {
    std::string pred, gt, out;
    std::string mode = "affine1d";
    std::string tau = "1";
    std::string resize = "64x64";
    std::string weights = "inv-z";
    std::string lsq_shift = "1d";
    unsigned threads = 0;
};

json run_align(const AlignArgs& a) {
    const Truncation tau = parse_tau(a.tau);
    const Size2 size = parse_size(a.resize);
    require(a.weights == "inv-z" || a.weights == "uniform", "weights must be 'inv-z' or 'uniform'");
    require(a.lsq_shift == "1d" || a.lsq_shift == "3d", "lsq shift must be '1d' or '3d'");
    const PointMap src_pred = load_points(a.pred), src_gt = load_points(a.gt);
    require(src_pred.height() == src_gt.height() && src_pred.width() == src_gt.width(),
            "prediction and ground truth differ in size");
    const PointMap pred = resized(src_pred, size), gt = resized(src_gt, size);
    const Execution exec{a.threads};

    JointSamples s = joint_samples(pred, gt, false);
    if (a.weights == "uniform") std::fill(s.weight.begin(), s.weight.end(), 1.0);

    json j;
    j["mode"] = a.mode;
    j["weights"] = a.weights;
    j["tau"] = tau.enabled() ? json(tau.tau()) : json(nullptr);
    j["resize"] = json::array({pred.height(), pred.width()});
    j["pixels"] = s.size();

    std::optional<AlignResult> r;
    if (a.mode == "scale") r = align_scale_only(s.pred, s.gt, s.weight, tau);
    else if (a.mode == "affine1d") r = align_scale_shift_1d(s.pred, s.gt, s.weight, tau, exec);
    else if (a.mode == "affine3d") r = align_scale_shift_3d(s.pred, s.gt, s.weight, tau, exec);

    if (r) {
        const std::size_t px = s.pixel[r->anchor_index];
        const std::size_t row = px / pred.width(), col = px % pred.width();
        j["alignment"] = to_json(r->align);
        j["objective"] = r->objective;
        j["anchor_index"] = px;
        j["anchor_source_pixel"] = json::array({nearest_source_index(row, src_pred.height(), pred.height()),
                                                nearest_source_index(col, src_pred.width(), pred.width())});
        j["degenerate"] = r->degenerate;
        return j;
    }
    if (a.mode == "median") {
        const MedianNormalizers n = align_median_baseline(pred, gt);
        const SimilarityAlign c = n.composed();
        j["alignment"] = to_json(c);
        j["objective"] = l1_alignment_objective(s.pred, s.gt, s.weight, c, tau);
        j["anchor_index"] = nullptr;
        j["pred_normalizer"] = to_json(n.pred);
        j["gt_normalizer"] = to_json(n.gt);
        return j;
    }
    if (a.mode == "lsq") {
        const ShiftMode m = a.lsq_shift == "1d" ? ShiftMode::one_dimensional : ShiftMode::three_dimensional;
        const AlignResult l = align_least_squares(s.pred, s.gt, s.weight, m);
        j["alignment"] = to_json(l.align);
        j["objective"] = l1_alignment_objective(s.pred, s.gt, s.weight, l.align, tau);
        j["squared_objective"] = l.objective;
        j["anchor_index"] = nullptr;
        return j;
    }
    fail(ErrorCode::invalid_input, "unknown alignment mode '" + a.mode + "'");
}

// ---- recover-camera -------------------------------------------------------

struct CameraArgs {
    std::string input, out;
    std::string resize = "64x64";
    int max_iterations = CameraOptions{}.max_iterations;
};

json camera_json(const CameraSolution& c, const ImageGrid* full) {
    json j{{"focal", c.focal},
           {"shift_z", c.shift_z},
           {"iterations", c.iterations},
           {"final_residual", c.final_residual}};
    if (full && c.focal > 0.0) {
        const FovDegrees fov = fov_from_focal(c.focal, *full);
        j["fov_vertical_deg"] = fov.vertical;
        j["fov_horizontal_deg"] = fov.horizontal;
    }
    return j;
}

json run_camera(const CameraArgs& a) {
    const Size2 size = parse_size(a.resize);
    const PointMap pm = load_points(a.input);
    CameraOptions opt;
    opt.max_iterations = a.max_iterations;
    const CameraSolution c = recover_camera(pm, size.height, size.width, opt);
    const ImageGrid full = ImageGrid::centered(pm.height(), pm.width());
    json j = camera_json(c, &full);
    j["resize"] = json::array({std::min(size.height, pm.height()), std::min(size.width, pm.width())});
    return j;
}

// ---- evaluate -------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> files;
    std::string out, repr = "point-affine", regions;
    double z_max = 0.0;
    std::size_t align_size = 0;
    unsigned threads = 0;
};

std::vector<std::vector<std::size_t>> load_regions(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_failure, "cannot open '" + path + "' for reading");
    std::vector<std::vector<std::size_t>> regions;
    try {
        const json j = json::parse(in);
        require(j.is_array(), "regions: expected a JSON list of pixel-index arrays");
        for (const auto& r : j) {
            require(r.is_array(), "regions: expected a JSON list of pixel-index arrays");
            auto& out = regions.emplace_back();
            for (const auto& i : r) {
                require(i.is_number_unsigned(), "regions: pixel indices must be non-negative integers");
                out.push_back(i.get<std::size_t>());
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::invalid_input, std::string("regions: ") + e.what());
    }
    return regions;
}

json report_json(const MetricReport& m) {
    return {{"representation", to_string(m.representation)},
            {"rel", m.rel},
            {"delta1", m.delta1},
            {"n_pixels", m.pixels},
            {"excluded", m.excluded},
            {"skipped_regions", m.skipped_regions}};
}

struct EvalOutcome {
    MetricReport report;
    json detail;
};

EvalOutcome evaluate_pair(const std::string& pred_path, const std::string& gt_path, Representation repr,
                          const std::vector<std::vector<std::size_t>>* regions, const EvalArgs& a, Execution exec) {
    EvalOptions opt;
    opt.align_size = a.align_size;
    opt.exec = exec;
    const PmapFile pf = read_pmap(pred_path), gf = read_pmap(gt_path);
    EvalOutcome o;
    switch (repr) {
        case Representation::point_scale: o.report = eval_point_scale(to_pointmap(pf), to_pointmap(gf), opt); break;
        case Representation::point_affine: o.report = eval_point_affine(to_pointmap(pf), to_pointmap(gf), opt); break;
        case Representation::point_local:
            require(regions != nullptr, "point-local evaluation needs --regions");
            o.report = eval_point_local(to_pointmap(pf), to_pointmap(gf), *regions, opt);
            break;
        case Representation::depth_scale:
        case Representation::depth_affine:
            o.report = eval_depth(to_depth(pf), to_depth(gf),
                                  repr == Representation::depth_scale ? DepthMode::scale : DepthMode::affine, opt);
            break;
        case Representation::disparity_affine: {
            require(pf.channels == 1, "disparity evaluation expects a single-channel prediction");
            const DisparityReport d = eval_disparity_affine(to_disparity(pf), to_depth(gf), a.z_max, opt);
            o.report = d.metrics;
            o.detail = {{"a", d.fit.a}, {"b", d.fit.b}, {"z_max", d.fit.z_max}};
            break;
        }
    }
    if (repr != Representation::point_local && repr != Representation::disparity_affine)
        o.detail = {{"alignment", to_json(o.report.alignment)}};
    return o;
}

json run_evaluate(const EvalArgs& a) {
    require(!a.files.empty() && a.files.size() % 2 == 0, "evaluate expects <pred> <gt> pairs");
    const Representation repr = parse_representation(a.repr == "disparity" ? "disparity-affine" : a.repr);
    std::optional<std::vector<std::vector<std::size_t>>> regions;
    if (!a.regions.empty()) regions = load_regions(a.regions);
    const std::size_t pairs = a.files.size() / 2;
    const Execution exec{a.threads};

    auto single = [&](std::size_t k, Execution e) {
        return evaluate_pair(a.files[2 * k], a.files[2 * k + 1], repr, regions ? &*regions : nullptr, a, e);
    };
    auto merged = [](const EvalOutcome& o) {
        json j = report_json(o.report);
        if (!o.detail.is_null()) j.update(o.detail);
        return j;
    };
    if (pairs == 1) return merged(single(0, exec));

    // images in parallel, one solver thread each
    std::vector<std::optional<EvalOutcome>> outcomes(pairs);
    parallel_chunks(pairs, exec, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) outcomes[k] = single(k, Execution{1});
    });
    json images = json::array();
    std::vector<MetricReport> reports;
    for (std::size_t k = 0; k < pairs; ++k) {
        json j = merged(*outcomes[k]);
        j["pred"] = a.files[2 * k];
        j["gt"] = a.files[2 * k + 1];
        images.push_back(j);
        reports.push_back(outcomes[k]->report);
    }
    return {{"images", images}, {"macro_average", report_json(macro_average(reports))}};
}

// ---- losses ---------------------------------------------------------------

struct LossArgs {
    std::string pred, gt, out;
    std::string preset;
    std::optional<std::string> scales;
    double focal = 0.0;
    std::size_t anchors = kDefaultAnchorsPerScale;
    std::uint64_t seed = 0;
    double trim = 0.05;
    std::string tau = "1";
    std::size_t align_size = kDefaultWorkingSize;
    std::string normals, mask, inf_mask;
    unsigned threads = 0;
};

json run_losses(const LossArgs& a) {
    LossConfig cfg = a.preset.empty() ? LossConfig{} : LossConfig::preset(parse_preset(a.preset));
    if (a.scales) cfg.scales = parse_list(*a.scales);
    cfg.anchors_per_scale = a.anchors;
    cfg.seed = a.seed;
    cfg.trim_fraction = a.trim;
    cfg.tau = parse_tau(a.tau);
    cfg.align_size = a.align_size;

    const PointMap pred = load_points(a.pred), gt = load_points(a.gt);
    LossInputs in;
    in.pred = &pred;
    in.gt = &gt;
    in.focal = a.focal;
    std::vector<Vec3> normals;
    Mask normals_valid;
    if (!a.normals.empty()) {
        const PointMap n = load_points(a.normals);
        normals.assign(n.points().begin(), n.points().end());
        normals_valid = n.mask();
        in.gt_normals = &normals;
        in.gt_normals_valid = &normals_valid;
    }
    std::vector<double> pred_mask;
    Mask inf_mask;
    require(a.mask.empty() == a.inf_mask.empty(), "--mask and --inf-mask must be given together");
    if (!a.mask.empty()) {
        pred_mask = scalar_channel(read_pmap(a.mask));
        for (double v : scalar_channel(read_pmap(a.inf_mask))) inf_mask.push_back(v != 0.0 ? 1 : 0);
        in.pred_mask = &pred_mask;
        in.inf_mask = &inf_mask;
    }

    const LossBreakdown b = compute_losses(in, cfg, Execution{a.threads});
    json local = json::array();
    for (const auto& s : b.local)
        local.push_back({{"alpha", s.alpha}, {"value", s.value}, {"spheres", s.spheres}, {"members", s.members}});
    return {{"global", b.global},
            {"global_pixels", b.global_pixels},
            {"global_kept", b.global_kept},
            {"global_alignment", to_json(b.global_alignment)},
            {"local", local},
            {"skipped_spheres", b.skipped_spheres},
            {"normal", b.normal ? json(*b.normal) : json(nullptr)},
            {"normal_skipped", b.normal_skipped},
            {"mask", b.mask ? json(*b.mask) : json(nullptr)},
            {"total", b.total},
            {"trim", cfg.trim_fraction},
            {"seed", cfg.seed},
            {"anchors", cfg.anchors_per_scale}};
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string family = "plane", out, size = "64x64";
    std::uint64_t seed = 0;
    double focal = 500.0, shift = 0.0, depth = 4.0;
};

json run_synth(const SynthArgs& a) {
    require(!a.out.empty(), "synth needs --out <dir>");
    const Size2 size = parse_size(a.size);
    const auto family = testkit::parse_family(a.family);
    const auto sc = testkit::make_scene(
        family, testkit::SceneParams{size.height, size.width, a.focal, a.shift, a.depth}, a.seed);
    std::error_code ec;
    std::filesystem::create_directories(a.out, ec);
    if (ec) fail(ErrorCode::io_failure, "cannot create '" + a.out + "': " + ec.message());
    const std::filesystem::path dir(a.out);

    write_pmap((dir / "pointmap.pmap").string(), from_pointmap(sc.pointmap));
    write_pmap((dir / "depth.pmap").string(), from_scalar_map(sc.depth));
    PointMap normals(sc.depth.height(), sc.depth.width(), sc.normals, sc.depth.mask());
    write_pmap((dir / "normals.pmap").string(), from_pointmap(normals));
    json regions = json::array({json::array(), json::array()});
    for (std::size_t i = 0; i < sc.label.size(); ++i)
        if (sc.depth.valid(i)) regions[sc.label[i]].push_back(i);
    std::ofstream((dir / "regions.json").string()) << regions.dump() << "\n";

    const json meta{{"family", to_string(family)},
                    {"seed", a.seed},
                    {"height", size.height},
                    {"width", size.width},
                    {"focal", sc.focal},
                    {"shift", sc.shift_true},
                    {"depth", a.depth},
                    {"valid_pixels", sc.pointmap.valid_count()},
                    {"files", {"pointmap.pmap", "depth.pmap", "normals.pmap", "regions.json"}}};
    std::ofstream((dir / "scene.json").string()) << meta.dump(2) << "\n";
    return meta;
}

int report_error(const std::string& code, const std::string& message, int status, json extra = nullptr) {
    json j{{"error", {{"code", code}, {"message", message}}}};
    if (!extra.is_null()) j["error"]["last_iterate"] = extra;
    std::cerr << j.dump() << "\n";
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point-map alignment, camera recovery, losses and evaluation"};
    app.require_subcommand(1);

    AlignArgs al;
    auto* align = app.add_subcommand("align", "Fit scale and shift mapping a predicted point map onto ground truth");
    align->add_option("pred", al.pred, "Predicted point map (.pmap)")->required();
    align->add_option("gt", al.gt, "Ground-truth point map (.pmap)")->required();
    align->add_option("--mode", al.mode, "scale | affine1d | affine3d | median | lsq")->capture_default_str();
    align->add_option("--tau", al.tau, "Residual cap, or 'none'")->capture_default_str();
    align->add_option("--resize", al.resize, "Working size HxW (maps are never upsampled)")->capture_default_str();
    align->add_option("--weights", al.weights, "inv-z | uniform")->capture_default_str();
    align->add_option("--lsq-shift", al.lsq_shift, "Shift of the lsq mode: 1d | 3d")->capture_default_str();
    align->add_option("--threads", al.threads, "Worker threads (0 = all cores)");
    align->add_option("--out", al.out, "Output JSON (default stdout)");

    CameraArgs ca;
    auto* camera = app.add_subcommand("recover-camera", "Recover focal length and z shift from a point map");
    camera->add_option("pointmap", ca.input, "Point map (.pmap)")->required();
    camera->add_option("--resize", ca.resize, "Working size HxW")->capture_default_str();
    camera->add_option("--max-iterations", ca.max_iterations, "Iteration budget")->capture_default_str();
    camera->add_option("--out", ca.out, "Output JSON (default stdout)");

    EvalArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Align and score predictions against ground truth");
    evaluate->add_option("files", ev.files, "<pred> <gt> [<pred> <gt> ...]")->required();
    evaluate->add_option("--repr", ev.repr,
                         "point-scale | point-affine | point-local | depth-scale | depth-affine | disparity")
        ->capture_default_str();
    evaluate->add_option("--regions", ev.regions, "Regions JSON for point-local");
    evaluate->add_option("--z-max", ev.z_max, "Disparity clamp depth (default: largest valid depth)");
    evaluate->add_option("--align-size", ev.align_size, "Align on at most NxN sampled pixels (0 = all)")
        ->capture_default_str();
    evaluate->add_option("--threads", ev.threads, "Worker threads (0 = all cores)");
    evaluate->add_option("--out", ev.out, "Output JSON (default stdout)");

    LossArgs lo;
    std::string scales;
    auto* losses = app.add_subcommand("losses", "Evaluate the training losses");
    losses->add_option("pred", lo.pred, "Predicted point map (.pmap)")->required();
    losses->add_option("gt", lo.gt, "Ground-truth point map (.pmap)")->required();
    losses->add_option("--focal", lo.focal, "Ground-truth focal in pixels (needed for local scales)");
    auto* scales_opt = losses->add_option("--scales", scales, "Comma-separated sphere scales alpha")
                           ->default_str("0.25,0.0625,0.015625");
    losses->add_option("--preset", lo.preset, "Loss combination A | B | C | D");
    losses->add_option("--anchors", lo.anchors, "Anchors per scale")->capture_default_str();
    losses->add_option("--seed", lo.seed, "Anchor sampling seed")->capture_default_str();
    losses->add_option("--trim", lo.trim, "Fraction of largest per-pixel losses dropped")->capture_default_str();
    losses->add_option("--tau", lo.tau, "Residual cap, or 'none'")->capture_default_str();
    losses->add_option("--align-size", lo.align_size, "Alignment lattice size")->capture_default_str();
    losses->add_option("--normals", lo.normals, "Ground-truth normals (.pmap, 3 channels)");
    losses->add_option("--mask", lo.mask, "Predicted validity probabilities (.pmap, 1 channel)");
    losses->add_option("--inf-mask", lo.inf_mask, "Ground-truth infinity mask (.pmap, 1 channel, nonzero = infinite)");
    losses->add_option("--threads", lo.threads, "Worker threads (0 = all cores)");
    losses->add_option("--out", lo.out, "Output JSON (default stdout)");

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "Write a synthetic scene fixture");
    synth->add_option("--family", sy.family, "plane | two-plane | sphere-patch | two-cluster")->capture_default_str();
    synth->add_option("--seed", sy.seed, "Scene seed")->capture_default_str();
    synth->add_option("--size", sy.size, "Image size HxW")->capture_default_str();
    synth->add_option("--focal", sy.focal, "Focal length in pixels")->capture_default_str();
    synth->add_option("--shift", sy.shift, "Depth shift subtracted from the point map")->capture_default_str();
    synth->add_option("--depth", sy.depth, "Characteristic scene depth")->capture_default_str();
    synth->add_option("--out", sy.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("invalid_input", e.what(), 2);
    }

    try {
        if (align->parsed()) emit(run_align(al), al.out);
        else if (camera->parsed()) emit(run_camera(ca), ca.out);
        else if (evaluate->parsed()) emit(run_evaluate(ev), ev.out);
        else if (losses->parsed()) {
            if (scales_opt->count() > 0) lo.scales = scales;
            emit(run_losses(lo), lo.out);
        } else if (synth->parsed()) emit(run_synth(sy), "");
    } catch (const ConvergenceError& e) {
        return report_error(std::string(to_string(e.code())), e.what(), exit_status(e.code()),
                            camera_json(e.last(), nullptr));
    } catch (const Error& e) {
        return report_error(std::string(to_string(e.code())), e.what(), exit_status(e.code()));
    } catch (const std::exception& e) {
        return report_error("internal_error", e.what(), 2);
    }
    return 0;
}
