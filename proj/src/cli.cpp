#include "lucidcam/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lucidcam/cam.hpp"
#include "lucidcam/data.hpp"
#include "lucidcam/errors.hpp"
#include "lucidcam/model.hpp"
#include "lucidcam/nn.hpp"
#include "lucidcam/optim.hpp"
#include "lucidcam/persist.hpp"
#include "lucidcam/png_io.hpp"
#include "lucidcam/render.hpp"
#include "lucidcam/rng.hpp"

namespace lucidcam {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp.string());
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot replace " + path.string());
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RgbImage rgb_from_unit(const Tensor& image) {
    int h = static_cast<int>(image.dim(1));
    int w = static_cast<int>(image.dim(2));
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t* px = out.px(x, y);
            for (int c = 0; c < 3; ++c) {
                long v = std::lround(static_cast<double>(image.at(c, y, x)) * 255.0);
                px[c] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
            }
        }
    }
    return out;
}

Tensor image_from_png(const fs::path& path) {
    DecodedPng png = read_png(path);
    Tensor t({3, png.height, png.width});
    for (int y = 0; y < png.height; ++y) {
        for (int x = 0; x < png.width; ++x) {
            const std::uint8_t* px = &png.pixels[static_cast<std::size_t>(y * png.width + x) *
                                                 static_cast<std::size_t>(png.channels)];
            for (int c = 0; c < 3; ++c) {
                std::uint8_t v = png.channels == 1 ? px[0] : px[c];
                t.at(c, y, x) = static_cast<float>(v) / 255.0f;
            }
        }
    }
    return t;
}

// Accepts either a directory that contains the named split (out/train,
// out/valid) or a directory that is itself a single split.
Dataset load_split(const fs::path& root, const std::string& name) {
    fs::path dir = root / name;
    if (!fs::exists(dir / "images")) {
        if (fs::exists(root / "images")) {
            dir = root;
        } else {
            throw DataError("no '" + name + "' split under " + root.string() +
                            " (expected " + (dir / "images").string() + ")");
        }
    }
    std::optional<fs::path> masks;
    if (fs::exists(dir / "masks")) masks = dir / "masks";
    return load_image_dir(dir / "images", dir / "labels.csv", masks);
}

ModelSpec spec_for(const Dataset& data) {
    if (data.empty()) throw DataError("dataset is empty");
    return ModelSpec::small_cam_net(static_cast<int>(data.front().image.dim(1)));
}

// Flag beats config file beats LUCIDCAM_SEED beats the default of 0.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    const char* env = std::getenv("LUCIDCAM_SEED");
    if (env == nullptr) return flag_value;
    std::string s(env);
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw ArgumentError("LUCIDCAM_SEED must be an unsigned integer, got '" + s + "'");
    }
    return static_cast<std::uint64_t>(v);
}

int parse_class(const std::string& s) {
    if (s == "auto") return -1;
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw ArgumentError("--class must be auto, 0 or 1, got '" + s + "'");
}

int parse_layer(const ModelSpec& spec, const std::string& name) {
    if (name == "last-conv") return spec.last_conv_index();
    if (name.rfind("conv", 0) == 0) {
        const std::string rest = name.substr(4);
        char* end = nullptr;
        long k = std::strtol(rest.c_str(), &end, 10);
        std::vector<int> convs = spec.conv_layer_indices();
        if (rest.empty() || end != rest.c_str() + rest.size() || k < 0 ||
            k >= static_cast<long>(convs.size())) {
            throw ArgumentError("no such conv layer '" + name + "' (model has " +
                                std::to_string(convs.size()) + " conv layers)");
        }
        return convs[static_cast<std::size_t>(k)];
    }
    throw ArgumentError("--layer must be last-conv or convK, got '" + name + "'");
}

std::vector<double> parse_wds(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        std::string tok = csv.substr(pos, comma - pos);
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size()) {
            throw ArgumentError("--wds expects comma-separated numbers, got '" + csv + "'");
        }
        out.push_back(v);
        pos = comma + 1;
    }
    if (out.empty()) throw ArgumentError("--wds must name at least one value");
    return out;
}

int argmax2(const Tensor& probs) {
    int best = 0;
    for (std::int64_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = static_cast<int>(i);
    }
    return best;
}

json lr_result_json(const LrFindResult& r) {
    json out = {{"suggested_lr", r.suggested_lr},
                {"diverged", r.diverged},
                {"min_smoothed", r.min_smoothed}};
    out["divergence_lr"] = r.diverged ? json(r.divergence_lr) : json(nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// subcommands

struct GenOpts {
    std::string out;
    int n_train = 2000;
    int n_valid = 500;
    int size = 96;
    double pos_frac = 0.4;
    double bright_frac = 0.01;
    double dark_frac = 0.01;
    std::uint64_t seed = 0;
    int workers = 1;
};

int cmd_gen_data(const GenOpts& o) {
    DataGenConfig base;
    base.size = o.size;
    base.pos_frac = o.pos_frac;
    base.bright_outlier_frac = o.bright_frac;
    base.dark_outlier_frac = o.dark_frac;

    auto run_split = [&](const char* name, int n, std::uint64_t stream) {
        DataGenConfig cfg = base;
        cfg.n_samples = n;
        cfg.seed = substream(o.seed, stream).state();
        Dataset data = generate_dataset(cfg, o.workers);
        json manifest = {{"split", name},
                         {"n", cfg.n_samples},
                         {"size", cfg.size},
                         {"pos_frac", cfg.pos_frac},
                         {"bright_outlier_frac", cfg.bright_outlier_frac},
                         {"dark_outlier_frac", cfg.dark_outlier_frac},
                         {"seed", cfg.seed},
                         {"root_seed", o.seed}};
        write_dataset(data, fs::path(o.out) / name, manifest.dump());
        return data.size();
    };
    std::size_t n_train = run_split("train", o.n_train, 0);
    std::size_t n_valid = run_split("valid", o.n_valid, 1);
    std::cout << json{{"train", n_train}, {"valid", n_valid}, {"out", o.out}}.dump() << "\n";
    return 0;
}

struct FindLrOpts {
    std::string data;
    std::string out;
    std::string plot;
    double lr_min = 1e-6;
    double lr_max = 1.0;
    int iters = 200;
    double wd = 1e-4;
    int batch = 32;
    std::uint64_t seed = 0;
};

int cmd_find_lr(const FindLrOpts& o) {
    OutlierFilterResult filtered = filter_outliers(load_split(o.data, "train"));
    ModelSpec spec = spec_for(filtered.kept);
    Parameters params = Parameters::init(spec, o.seed);
    LrFindConfig cfg;
    cfg.lr_min = o.lr_min;
    cfg.lr_max = o.lr_max;
    cfg.iters = o.iters;
    cfg.weight_decay = o.wd;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    LrFindResult r = lr_find(spec, params, filtered.kept, cfg);
    write_lr_curve(r, o.out);
    if (!o.plot.empty()) {
        std::vector<PlotPoint> pts;
        pts.reserve(r.curve.size());
        for (std::size_t i = 0; i < r.curve.size(); ++i) {
            pts.push_back({static_cast<double>(i), r.curve[i].smoothed_loss});
        }
        write_png(plot_series(pts, 640, 400), o.plot);
    }
    std::cout << lr_result_json(r).dump() << "\n";
    return 0;
}

struct GridWdOpts {
    std::string data;
    std::string out;
    std::string wds = "1e-2,1e-4,1e-6";
    int iters = 200;
    int batch = 32;
    std::uint64_t seed = 0;
};

int cmd_grid_wd(const GridWdOpts& o) {
    std::vector<double> wds = parse_wds(o.wds);
    OutlierFilterResult filtered = filter_outliers(load_split(o.data, "train"));
    ModelSpec spec = spec_for(filtered.kept);
    Parameters params = Parameters::init(spec, o.seed);
    LrFindConfig cfg;
    cfg.iters = o.iters;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    WdGridResult g = wd_grid_search(spec, params, filtered.kept, wds, cfg);
    json curves = json::array();
    for (const WdCurve& c : g.curves) {
        json entry = lr_result_json(c.result);
        entry["wd"] = c.weight_decay;
        curves.push_back(entry);
    }
    json report = {{"selected_wd", g.selected}, {"curves", curves}};
    write_text_atomic(o.out, report.dump(2) + "\n");
    std::cout << json{{"selected_wd", g.selected}}.dump() << "\n";
    return 0;
}

struct TrainOpts {
    std::string data;
    std::string out;
    std::string log;
    double max_lr = 2e-2;
    double wd = 1e-4;
    int epochs1 = 1;
    int epochs2 = 3;
    int batch = 32;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainOpts& o) {
    OutlierFilterResult filtered = filter_outliers(load_split(o.data, "train"));
    Dataset valid = load_split(o.data, "valid");
    ModelSpec spec = spec_for(filtered.kept);
    Parameters params = Parameters::init(spec, o.seed);
    TrainConfig cfg;
    cfg.epochs_phase1 = o.epochs1;
    cfg.epochs_phase2 = o.epochs2;
    cfg.max_lr = o.max_lr;
    cfg.weight_decay = o.wd;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;

    std::optional<JsonlMetricsSink> sink;
    if (!o.log.empty()) sink.emplace(o.log);
    auto [trained, report] =
        train(spec, std::move(params), filtered.kept, valid, cfg, sink ? &*sink : nullptr);

    CheckpointMeta meta;
    meta.seed = o.seed;
    meta.training = {{"max_lr", num(o.max_lr)},
                     {"weight_decay", num(o.wd)},
                     {"epochs_phase1", std::to_string(o.epochs1)},
                     {"epochs_phase2", std::to_string(o.epochs2)},
                     {"batch_size", std::to_string(o.batch)},
                     {"removed_outliers", std::to_string(filtered.removed.size())},
                     {"final_accuracy", num(report.final_accuracy)}};
    save_checkpoint(spec, trained, meta, o.out);
    std::cout << json{{"final_accuracy", report.final_accuracy},
                      {"steps", report.steps.size()},
                      {"removed_outliers", filtered.removed.size()},
                      {"model", o.out}}
                     .dump()
              << "\n";
    return 0;
}

struct EvalOpts {
    std::string data;
    std::string model;
    int workers = 1;
};

int cmd_eval(const EvalOpts& o) {
    LoadedCheckpoint ck = load_checkpoint(o.model);
    Dataset valid = load_split(o.data, "valid");
    EvalResult r = evaluate(ck.spec, ck.params, valid, o.workers);
    std::cout << json{{"accuracy", r.accuracy}, {"loss", r.loss}, {"n", valid.size()}}.dump()
              << "\n";
    return 0;
}

struct ExplainOpts {
    std::string model;
    std::string image;
    std::string out;
    std::string cls = "auto";
    std::string layer = "last-conv";
    double alpha = 0.4;
    bool panel = false;
};

int cmd_explain(const ExplainOpts& o) {
    int class_index = parse_class(o.cls);
    LoadedCheckpoint ck = load_checkpoint(o.model);
    int layer_id = parse_layer(ck.spec, o.layer);
    Tensor img = image_from_png(o.image);

    Tensor probs = softmax(forward(ck.spec, ck.params, img).logits());
    int predicted = argmax2(probs);
    if (class_index < 0) class_index = predicted;

    Heatmap heat = grad_cam(ck.spec, ck.params, img, class_index, layer_id);
    RgbImage rendered = overlay(to_grayscale(img), apply_colormap(heat.values), o.alpha);
    double prob_pred = static_cast<double>(probs[predicted]);
    if (o.panel) {
        PanelEntry entry;
        entry.image = std::move(rendered);
        entry.predicted = predicted;
        entry.actual = -1; // ground truth unknown for a bare image
        entry.loss = -std::log(std::max(prob_pred, 1e-30));
        entry.probability = prob_pred;
        rendered = compose_panel({entry}, 1);
    }
    write_png(rendered, o.out);
    std::cout << json{{"predicted", predicted},
                      {"probability", prob_pred},
                      {"class", class_index},
                      {"layer", layer_id},
                      {"all_zero", heat.all_zero},
                      {"raw_max", heat.raw_max},
                      {"out", o.out}}
                     .dump()
              << "\n";
    return 0;
}

struct TopLossesOpts {
    std::string model;
    std::string data;
    std::string out;
    int k = 9;
    int columns = 3;
    double alpha = 0.4;
    bool grad_cam = false;
};

int cmd_top_losses(const TopLossesOpts& o) {
    LoadedCheckpoint ck = load_checkpoint(o.model);
    Dataset valid = load_split(o.data, "valid");
    std::vector<LossEntry> entries = top_losses(ck.spec, ck.params, valid, o.k);

    std::unordered_map<std::string, const Sample*> by_id;
    for (const Sample& s : valid) by_id[s.id] = &s;
    int last_conv = ck.spec.last_conv_index();

    std::vector<PanelEntry> tiles;
    tiles.reserve(entries.size());
    for (const LossEntry& e : entries) {
        const Sample& s = *by_id.at(e.id);
        PanelEntry tile;
        if (o.grad_cam) {
            Heatmap heat = grad_cam(ck.spec, ck.params, s.image, e.predicted, last_conv);
            tile.image = overlay(to_grayscale(s.image), apply_colormap(heat.values), o.alpha);
        } else {
            tile.image = rgb_from_unit(s.image);
        }
        tile.predicted = e.predicted;
        tile.actual = e.actual;
        tile.loss = e.loss;
        tile.probability = e.probability;
        tiles.push_back(std::move(tile));
    }
    write_png(compose_panel(tiles, o.columns), o.out);
    std::cout << json{{"count", entries.size()}, {"out", o.out}}.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// config file pre-pass

// Pulls --config out of args and returns its path ('' if absent). The file's
// keys are injected as flag tokens right after the subcommand, so explicit
// flags (parsed with take_last) always win.
std::string extract_config(std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 1; i < args.size();) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ArgumentError("--config needs a file path");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    return path;
}

void inject_config(std::vector<std::string>& args, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path + ": invalid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw FormatError(path + ": config must be a JSON object");

    std::vector<std::string> tokens;
    for (const auto& [key, value] : cfg.items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) tokens.push_back("--" + key);
            continue;
        }
        tokens.push_back("--" + key);
        tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
    if (args.size() < 2) return; // no subcommand; the parser will complain
    args.insert(args.begin() + 2, tokens.begin(), tokens.end());
}

} // namespace

int run_cli(std::vector<std::string> args) {
    try {
        std::string config_path = extract_config(args);
        if (!config_path.empty()) inject_config(args, config_path);

        CLI::App app{"small CNN trainer with Grad-CAM explanations for histology-style patches"};
        app.require_subcommand(1);

        std::string dummy_config;
        auto add_config_flag = [&dummy_config](CLI::App* cmd) {
            cmd->add_option("--config", dummy_config,
                            "JSON file of option defaults (explicit flags win)");
        };

        // gen-data -----------------------------------------------------
        GenOpts gen;
        CLI::App* gen_cmd =
            app.add_subcommand("gen-data", "synthesize a train/valid patch corpus");
        gen_cmd->add_option("--out", gen.out, "output root (gets train/ and valid/)")
            ->required()
            ->take_last();
        gen_cmd->add_option("--n-train", gen.n_train, "training samples")->take_last();
        gen_cmd->add_option("--n-valid", gen.n_valid, "validation samples")->take_last();
        gen_cmd->add_option("--size", gen.size, "patch side length in pixels")->take_last();
        gen_cmd->add_option("--pos-frac", gen.pos_frac, "fraction of positive samples")
            ->take_last();
        gen_cmd->add_option("--bright-frac", gen.bright_frac, "fraction of bright outliers")
            ->take_last();
        gen_cmd->add_option("--dark-frac", gen.dark_frac, "fraction of dark outliers")
            ->take_last();
        CLI::Option* gen_seed = gen_cmd->add_option("--seed", gen.seed, "corpus seed")
                                    ->take_last();
        gen_cmd->add_option("--workers", gen.workers, "generator threads")->take_last();
        add_config_flag(gen_cmd);

        // find-lr ------------------------------------------------------
        FindLrOpts flr;
        CLI::App* flr_cmd = app.add_subcommand("find-lr", "learning-rate range test");
        flr_cmd->add_option("--data", flr.data, "dataset root from gen-data")->required()
            ->take_last();
        flr_cmd->add_option("--lr-min", flr.lr_min, "sweep start")->take_last();
        flr_cmd->add_option("--lr-max", flr.lr_max, "sweep end")->take_last();
        flr_cmd->add_option("--iters", flr.iters, "ladder rungs")->take_last();
        flr_cmd->add_option("--wd", flr.wd, "weight decay during the sweep")->take_last();
        flr_cmd->add_option("--batch", flr.batch, "batch size")->take_last();
        CLI::Option* flr_seed = flr_cmd->add_option("--seed", flr.seed, "init/sampling seed")
                                    ->take_last();
        flr_cmd->add_option("--out", flr.out, "curve CSV path")->required()->take_last();
        flr_cmd->add_option("--plot", flr.plot, "optional smoothed-loss plot PNG")
            ->take_last();
        add_config_flag(flr_cmd);

        // grid-wd ------------------------------------------------------
        GridWdOpts gwd;
        CLI::App* gwd_cmd =
            app.add_subcommand("grid-wd", "weight-decay grid over lr range tests");
        gwd_cmd->add_option("--data", gwd.data, "dataset root from gen-data")->required()
            ->take_last();
        gwd_cmd->add_option("--wds", gwd.wds, "comma-separated weight decays")->take_last();
        gwd_cmd->add_option("--iters", gwd.iters, "ladder rungs per candidate")->take_last();
        gwd_cmd->add_option("--batch", gwd.batch, "batch size")->take_last();
        CLI::Option* gwd_seed = gwd_cmd->add_option("--seed", gwd.seed, "init/sampling seed")
                                    ->take_last();
        gwd_cmd->add_option("--out", gwd.out, "report JSON path")->required()->take_last();
        add_config_flag(gwd_cmd);

        // train --------------------------------------------------------
        TrainOpts tr;
        CLI::App* tr_cmd = app.add_subcommand("train", "two-phase one-cycle training run");
        tr_cmd->add_option("--data", tr.data, "dataset root from gen-data")->required()
            ->take_last();
        tr_cmd->add_option("--max-lr", tr.max_lr, "one-cycle peak learning rate")
            ->take_last();
        tr_cmd->add_option("--wd", tr.wd, "weight decay")->take_last();
        tr_cmd->add_option("--epochs1", tr.epochs1, "frozen-phase epochs")->take_last();
        tr_cmd->add_option("--epochs2", tr.epochs2, "unfrozen-phase epochs")->take_last();
        tr_cmd->add_option("--batch", tr.batch, "batch size")->take_last();
        CLI::Option* tr_seed = tr_cmd->add_option("--seed", tr.seed, "init/shuffle seed")
                                  ->take_last();
        tr_cmd->add_option("--out", tr.out, "checkpoint path (.lcam)")->required()
            ->take_last();
        tr_cmd->add_option("--log", tr.log, "metrics JSONL path")->take_last();
        add_config_flag(tr_cmd);

        // eval ---------------------------------------------------------
        EvalOpts ev;
        CLI::App* ev_cmd = app.add_subcommand("eval", "loss/accuracy on the validation split");
        ev_cmd->add_option("--data", ev.data, "dataset root from gen-data")->required()
            ->take_last();
        ev_cmd->add_option("--model", ev.model, "checkpoint path")->required()->take_last();
        ev_cmd->add_option("--workers", ev.workers, "evaluation threads")->take_last();
        add_config_flag(ev_cmd);

        // explain ------------------------------------------------------
        ExplainOpts ex;
        CLI::App* ex_cmd = app.add_subcommand("explain", "Grad-CAM overlay for one image");
        ex_cmd->add_option("--model", ex.model, "checkpoint path")->required()->take_last();
        ex_cmd->add_option("--image", ex.image, "input PNG")->required()->take_last();
        ex_cmd->add_option("--class", ex.cls, "auto|0|1: class to explain")->take_last();
        ex_cmd->add_option("--layer", ex.layer, "last-conv or convK tap")->take_last();
        ex_cmd->add_option("--alpha", ex.alpha, "overlay blend weight")->take_last();
        ex_cmd->add_option("--out", ex.out, "overlay PNG path")->required()->take_last();
        ex_cmd->add_flag("--panel", ex.panel, "wrap the overlay in a captioned tile");
        add_config_flag(ex_cmd);

        // top-losses ---------------------------------------------------
        TopLossesOpts tl;
        CLI::App* tl_cmd =
            app.add_subcommand("top-losses", "panel of the k worst validation samples");
        tl_cmd->add_option("--model", tl.model, "checkpoint path")->required()->take_last();
        tl_cmd->add_option("--data", tl.data, "dataset root from gen-data")->required()
            ->take_last();
        tl_cmd->add_option("--k", tl.k, "tiles to show")->take_last();
        tl_cmd->add_option("--columns", tl.columns, "panel columns")->take_last();
        tl_cmd->add_option("--alpha", tl.alpha, "overlay blend weight with --grad-cam")
            ->take_last();
        tl_cmd->add_option("--out", tl.out, "panel PNG path")->required()->take_last();
        tl_cmd->add_flag("--grad-cam", tl.grad_cam, "overlay Grad-CAM on each tile");
        add_config_flag(tl_cmd);

        if (args.size() >= 2 && !args[1].empty() && args[1][0] != '-' &&
            app.get_subcommand_no_throw(args[1]) == nullptr) {
            std::cerr << "error: unknown subcommand '" << args[1]
                      << "' (run with --help for the list)\n";
            return 2;
        }

        std::vector<const char*> argv;
        argv.reserve(args.size());
        for (const std::string& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            int code = app.exit(e); // prints help or the parse error
            return code == 0 ? 0 : 2;
        }

        if (gen_cmd->parsed()) {
            gen.seed = resolve_seed(gen_seed, gen.seed);
            return cmd_gen_data(gen);
        }
        if (flr_cmd->parsed()) {
            flr.seed = resolve_seed(flr_seed, flr.seed);
            return cmd_find_lr(flr);
        }
        if (gwd_cmd->parsed()) {
            gwd.seed = resolve_seed(gwd_seed, gwd.seed);
            return cmd_grid_wd(gwd);
        }
        if (tr_cmd->parsed()) {
            tr.seed = resolve_seed(tr_seed, tr.seed);
            return cmd_train(tr);
        }
        if (ev_cmd->parsed()) return cmd_eval(ev);
        if (ex_cmd->parsed()) return cmd_explain(ex);
        if (tl_cmd->parsed()) return cmd_top_losses(tl);
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

int run_cli(int argc, const char* const* argv) {
    return run_cli(std::vector<std::string>(argv, argv + argc));
}

} // namespace lucidcam
