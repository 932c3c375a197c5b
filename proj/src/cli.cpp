#include "grapetrack/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "grapetrack/annotations.hpp"
#include "grapetrack/association.hpp"
#include "grapetrack/dataset_index.hpp"
#include "grapetrack/detections.hpp"
#include "grapetrack/error.hpp"
#include "grapetrack/file_io.hpp"
#include "grapetrack/image.hpp"
#include "grapetrack/mask_io.hpp"
#include "grapetrack/metrics.hpp"
#include "grapetrack/rle.hpp"
#include "grapetrack/scribble_seg.hpp"
#include "grapetrack/sfm_model.hpp"
#include "grapetrack/synth.hpp"
#include "text_util.hpp"

namespace grapetrack {

namespace {

namespace fs = std::filesystem;

struct EvalArgs {
    std::string gt;
    std::string pred;
    std::string task = "instances";
    std::string iou = "0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    double conf = 0.9;
    std::string out;
};

struct TrackArgs {
    std::string model_dir;
    std::string detections;
    int min_edges = 5;
    std::string window = "unbounded";
    std::string projection = "observed";
    double conf = 0.9;
    unsigned threads = std::clamp(std::thread::hardware_concurrency(), 1u, 8u);
    std::string out;
};

struct SynthArgs {
    SceneConfig scene;
    int min_edges = 5;
    double jitter = 0.0;
    std::string out;
};

struct ScribbleArgs {
    std::string image;
    std::string scribbles;
    std::string bbox;
    double h_min = 8.0;
    double lambda = 0.5;
    std::string out;
};

struct ValidateArgs {
    std::string gt;
};

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message()));
}

std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
    std::vector<double> out;
    for (auto f : detail::split_char(text, ',')) {
        double v = 0.0;
        if (!detail::parse_double(detail::trim(f), v)) {
            throw ValidationError(fmt::format("{}: '{}' is not a number", what, detail::trim(f)));
        }
        out.push_back(v);
    }
    return out;
}

std::optional<int> parse_window(std::string_view text) {
    if (text == "unbounded") return std::nullopt;
    int w = 0;
    if (!detail::parse_int(text, w) || w < 1) {
        throw ValidationError(fmt::format("--window must be a positive integer or 'unbounded', got '{}'", text));
    }
    return w;
}

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const auto task = parse_task(a.task);
    if (!task) throw ValidationError(fmt::format("unknown task '{}' (semantic, boxes, instances)", a.task));
    EvalOptions opt;
    opt.task = *task;
    opt.iou_thresholds = parse_double_list(a.iou, "--iou");
    opt.confidence_threshold = a.conf;
    if (!(a.conf >= 0.0 && a.conf <= 1.0)) throw ValidationError("--conf must be in [0, 1]");

    const auto gt = load_annotation_dir(a.gt);
    const auto pred = load_samples(a.pred);
    for (const auto& w : gt.warnings) err << "warning: " << w << '\n';
    for (const auto& w : pred.warnings) err << "warning: " << w << '\n';
    if (opt.task != Task::boxes &&
        std::none_of(gt.samples.begin(), gt.samples.end(), [](const auto& s) { return s.masks.has_value(); })) {
        throw ValidationError(fmt::format("task '{}' needs masks but '{}' has none", a.task, a.gt));
    }

    const auto report = evaluate_dataset(pred.samples, gt.samples, opt);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    const auto csv = report_to_csv(report);
    if (!a.out.empty()) {
        make_dir(a.out);
        write_file(fs::path(a.out) / "report.json", report_to_json(report));
        write_file(fs::path(a.out) / "report.csv", csv);
    }
    out << csv;
    return 0;
}

int run_track(const TrackArgs& a, std::ostream& out, std::ostream&) {
    TrackingOptions opt;
    opt.min_edges = a.min_edges;
    if (a.min_edges < 0) throw ValidationError("--min-edges must be >= 0");
    opt.graph.window = parse_window(a.window);
    opt.graph.threads = std::max(1u, a.threads);
    const auto mode = parse_projection_mode(a.projection);
    if (!mode) throw ValidationError(fmt::format("unknown projection '{}' (observed, reprojected)", a.projection));
    opt.projection = *mode;
    opt.confidence_threshold = a.conf;

    const auto model = load_sparse_model(a.model_dir);
    const auto frames = load_detections_manifest(a.detections);
    const auto result = run_tracking(model, frames, opt);
    if (!a.out.empty()) {
        make_dir(a.out);
        write_file(fs::path(a.out) / "tracks.json", tracks_to_json(result.tracks, frames));
        write_file(fs::path(a.out) / "labels.csv", labels_to_csv(result.annotation, frames));
    }
    out << "count=" << result.annotation.count << '\n';
    return 0;
}

std::string scene_config_text(const SynthArgs& a) {
    const auto& c = a.scene;
    return fmt::format(
        "clusters={}\nframes={}\npoints={}\nwidth={}\nheight={}\nstep={}\ndropout={}\nocclusion={}\nseed={}\n"
        "radius={}\nbackground={}\nmin-edges={}\njitter={}\n",
        c.n_clusters, c.n_frames, c.points_per_cluster, c.width, c.height, c.camera_step, c.dropout_p,
        c.occlusion_p, c.seed, c.cluster_radius_px, c.background_points, a.min_edges, a.jitter);
}

int run_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
    const auto scene = generate_scene(a.scene);
    make_dir(a.out);
    write_scene(scene, a.out);
    if (a.jitter > 0.0) {
        write_file(fs::path(a.out) / "detections.jsonl",
                   format_detections_manifest(perturb_detections(scene, a.jitter, a.scene.seed ^ 0x9e3779b97f4a7c15ULL)));
    }
    write_file(fs::path(a.out) / "scene.cfg", scene_config_text(a));
    out << "expected_count=" << oracle_expected_count(scene, a.min_edges) << '\n';
    return 0;
}

PixelRect parse_bbox(std::string_view text) {
    const auto v = parse_double_list(text, "--bbox");
    if (v.size() != 4) throw ValidationError("--bbox expects x0,y0,x1,y1");
    PixelRect r{int(v[0]), int(v[1]), int(v[2]), int(v[3])};
    if (r.empty()) throw ValidationError("--bbox is empty");
    return r;
}

int run_scribble(const ScribbleArgs& a, std::ostream& out, std::ostream&) {
    RgbImage crop;
    try {
        crop = read_ppm(read_file_bytes(a.image));
    } catch (const Error& e) {
        throw ValidationError(fmt::format("{}: {}", a.image, e.what()));
    }
    ScribbleSet scribbles;
    try {
        scribbles = parse_scribbles(read_file_text(a.scribbles));
    } catch (const Error& e) {
        throw ValidationError(fmt::format("{}: {}", a.scribbles, e.what()));
    }
    ScribbleOptions opt;
    opt.h_min = a.h_min;
    opt.lambda_spatial = a.lambda;
    if (!a.bbox.empty()) opt.bbox = parse_bbox(a.bbox);
    const auto mask = segment_with_scribbles(crop, scribbles, opt);

    // Overlay: grape pixels tinted toward magenta.
    RgbImage overlay = crop;
    for (int y = 0; y < crop.height; ++y) {
        for (int x = 0; x < crop.width; ++x) {
            if (!mask.test(x, y)) continue;
            auto* p = overlay.rgb.data() + 3 * (std::size_t(y) * crop.width + x);
            p[0] = std::uint8_t((p[0] + 255) / 2);
            p[1] = std::uint8_t(p[1] / 2);
            p[2] = std::uint8_t((p[2] + 255) / 2);
        }
    }
    make_dir(a.out);
    write_file(fs::path(a.out) / "mask.rle", encode_rle(mask));
    write_file(fs::path(a.out) / "overlay.ppm", write_ppm(overlay));
    out << "pixels=" << mask.popcount() << '\n';
    return 0;
}

int run_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
    const fs::path root(a.gt);
    const auto index = load_dataset_dir(root);
    struct Row {
        std::size_t images = 0, boxed = 0, masked = 0;
    };
    std::map<std::string, Row> rows;
    Row total;
    std::set<std::string> mask_exts{".npz", ".npy", ".rle"};
    for (const auto& e : index.entries) {
        auto& row = rows[e.variety_prefix];
        ++row.images;
        std::optional<MaskStack> stack;
        if (e.has_masks) {
            for (const auto& ext : mask_exts) {
                const auto p = root / (e.image_id + ext);
                if (!fs::exists(p)) continue;
                std::optional<ImageDims> expected;
                if (auto d = index.image_dims.find(e.image_id); d != index.image_dims.end()) expected = d->second;
                try {
                    stack = load_mask_stack(read_file_bytes(p), *mask_format_for(p.string()), expected);
                } catch (const Error& ex) {
                    throw ValidationError(fmt::format("{}: {}", p.string(), ex.what()));
                }
            }
        }
        const auto box_path = root / (e.image_id + ".txt");
        if (!fs::exists(box_path)) {
            err << "warning: image '" << e.image_id << "' has no box file\n";
            continue;
        }
        ImageDims dims;
        if (auto d = index.image_dims.find(e.image_id); d != index.image_dims.end()) {
            dims = d->second;
        } else if (stack) {
            dims = {stack->width, stack->height};
        } else {
            throw ValidationError(fmt::format("no dimensions for image '{}': add it to dims.txt", e.image_id));
        }
        BoxList boxes;
        try {
            boxes = parse_yolo_boxes(read_file_text(box_path), dims);
        } catch (const Error& ex) {
            throw ValidationError(fmt::format("{}: {}", box_path.string(), ex.what()));
        }
        for (const auto& w : boxes.warnings) err << "warning: " << box_path.string() << ':' << w.line << ": " << w.message << '\n';
        row.boxed += boxes.boxes.size();
        if (stack) {
            if (stack->masks.size() != boxes.boxes.size()) {
                throw ValidationError(fmt::format("image '{}': {} boxes but {} mask slices", e.image_id,
                                                  boxes.boxes.size(), stack->masks.size()));
            }
            row.masked += stack->masks.size();
        }
    }
    out << "prefix,variety,images,boxed_clusters,masked_clusters\n";
    for (const auto& [prefix, r] : rows) {
        out << fmt::format("{},{},{},{},{}\n", prefix, variety_name(prefix), r.images, r.boxed, r.masked);
        total.images += r.images;
        total.boxed += r.boxed;
        total.masked += r.masked;
    }
    out << fmt::format("total,,{},{},{}\n", total.images, total.boxed, total.masked);
    err << fmt::format("splits: train={} test={} unassigned={}\n", index.count(Split::train), index.count(Split::test),
                       index.count(Split::unassigned));
    return 0;
}

// Splices `key=value` lines from --config in front of the command-line flags
// so that the latter, parsed later, take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    if (args.size() < 2) return args;
    std::optional<std::string> path;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].starts_with("--config=")) path = args[i].substr(9);
    }
    if (!path) return args;
    const std::string text = read_file_text(*path);
    std::vector<std::string> from_file;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || detail::trim(line.substr(0, eq)).empty()) {
            throw ValidationError(fmt::format("{}:{}: expected key=value", *path, line_no));
        }
        from_file.push_back("--" + std::string(detail::trim(line.substr(0, eq))));
        from_file.emplace_back(detail::trim(line.substr(eq + 1)));
    }
    std::vector<std::string> out{args[0], args[1]};
    out.insert(out.end(), from_file.begin(), from_file.end());
    out.insert(out.end(), args.begin() + 2, args.end());
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Grape cluster detection evaluation and SfM-based tracking toolkit", "grapetrack"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    const auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file; command-line flags take precedence");
    };

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth (P, R, F1, AP per IoU)");
    eval->add_option("--gt", ev.gt, "Ground-truth directory (<id>.txt boxes, optional masks, dims.txt)")->required();
    eval->add_option("--pred", ev.pred, "Prediction directory or detections manifest (.jsonl)")->required();
    eval->add_option("--task", ev.task, "semantic | boxes | instances")->capture_default_str();
    eval->add_option("--iou", ev.iou, "Comma-separated IoU thresholds, strictly increasing")->capture_default_str();
    eval->add_option("--conf", ev.conf, "Confidence threshold applied before P/R/F1")->capture_default_str();
    eval->add_option("--out", ev.out, "Directory for report.json and report.csv");
    add_config(eval);

    TrackArgs tr;
    auto* track = app.add_subcommand("track", "Associate per-frame detections through the sparse model and count");
    track->add_option("--model-dir", tr.model_dir, "COLMAP text model directory")->required();
    track->add_option("--detections", tr.detections, "Detections manifest (.jsonl)")->required();
    track->add_option("--min-edges", tr.min_edges, "Shortest track kept, in edges")->capture_default_str();
    track->add_option("--window", tr.window, "Largest frame gap for an edge, or 'unbounded'")->capture_default_str();
    track->add_option("--projection", tr.projection, "observed | reprojected")->capture_default_str();
    track->add_option("--conf", tr.conf, "Drop instances below this confidence")->capture_default_str();
    track->add_option("--threads", tr.threads, "Worker threads (results do not depend on it)")->capture_default_str();
    track->add_option("--out", tr.out, "Directory for tracks.json and labels.csv");
    add_config(track);

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with known cluster count");
    synth->add_option("--out", sy.out, "Scene directory")->required();
    synth->add_option("--seed", sy.scene.seed)->capture_default_str();
    synth->add_option("--clusters", sy.scene.n_clusters)->capture_default_str();
    synth->add_option("--frames", sy.scene.n_frames)->capture_default_str();
    synth->add_option("--points", sy.scene.points_per_cluster, "3-D points per cluster")->capture_default_str();
    synth->add_option("--width", sy.scene.width)->capture_default_str();
    synth->add_option("--height", sy.scene.height)->capture_default_str();
    synth->add_option("--step", sy.scene.camera_step, "Camera translation per frame (scene units)")->capture_default_str();
    synth->add_option("--dropout", sy.scene.dropout_p)->capture_default_str();
    synth->add_option("--occlusion", sy.scene.occlusion_p)->capture_default_str();
    synth->add_option("--radius", sy.scene.cluster_radius_px, "Cluster point radius in pixels")->capture_default_str();
    synth->add_option("--background", sy.scene.background_points)->capture_default_str();
    synth->add_option("--min-edges", sy.min_edges, "min_edges used for the printed expected count")->capture_default_str();
    synth->add_option("--jitter", sy.jitter, "Mask center jitter in pixels for the exported detections")->capture_default_str();
    add_config(synth);

    ScribbleArgs sc;
    auto* scribble = app.add_subcommand("scribble", "Segment one cluster crop from scribbles");
    scribble->add_option("--image", sc.image, "Crop as binary PPM (P6)")->required();
    scribble->add_option("--scribbles", sc.scribbles, "Scribble JSON")->required();
    scribble->add_option("--bbox", sc.bbox, "x0,y0,x1,y1 (half-open); default whole crop");
    scribble->add_option("--h-min", sc.h_min, "Minimum basin depth for the watershed")->capture_default_str();
    scribble->add_option("--lambda", sc.lambda, "Spatial weight of the propagation cost")->capture_default_str();
    scribble->add_option("--out", sc.out, "Directory for mask.rle and overlay.ppm")->required();
    add_config(scribble);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Check a dataset directory and print per-variety counts");
    validate->add_option("--gt", va.gt, "Dataset directory")->required();
    add_config(validate);

    try {
        auto args = expand_config(raw_args);
        std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
        try {
            app.parse(std::move(reversed));
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err) == 0 ? 0 : 2;
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out, err) == 0 ? 0 : 2;
        } catch (const CLI::ParseError& e) {
            app.exit(e, err, err);
            return 2;
        }
        if (eval->parsed()) return run_eval(ev, out, err);
        if (track->parsed()) return run_track(tr, out, err);
        if (synth->parsed()) return run_synth(sy, out, err);
        if (scribble->parsed()) return run_scribble(sc, out, err);
        if (validate->parsed()) return run_validate(va, out, err);
        err << "error: no subcommand\n";
        return 2;
    } catch (const ContractError& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace grapetrack
