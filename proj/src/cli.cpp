#include "lapfield/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>

#include "lapfield/analytics.hpp"
#include "lapfield/atomic_file.hpp"
#include "lapfield/codec.hpp"
#include "lapfield/eval.hpp"
#include "lapfield/image_io.hpp"
#include "lapfield/laplacian.hpp"
#include "lapfield/parallel.hpp"
#include "lapfield/train.hpp"

namespace lapfield::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kToolVersion = "1.0.0";

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 1;
    int threads = 1;
    bool verbose = false;
};

std::string version_text() {
    std::ostringstream os;
    os << "lapfield " << kToolVersion << "\n"
       << "field container (.lapc) format version " << kCodecVersion << "\n"
       << "kernel checkpoint format version " << kCheckpointVersion;
    return os.str();
}

SolverId solver_or_usage(const std::string& name) {
    const auto id = parse_solver_id(name);
    if (!id) throw UsageError("unknown solver '" + name + "'");
    return *id;
}

void require_directory(const std::string& dir, const char* flag) {
    if (dir.empty()) throw UsageError(std::string(flag) + " is required (or set LAPFIELD_DATA_DIR)");
}

struct LoadedImages {
    std::vector<RasterImage> images;
    std::vector<std::string> names;
};

LoadedImages load_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ImageIoError("not a directory: " + dir.string());
    LoadedImages out;
    for (const auto& f : list_png_files(dir)) {
        out.images.push_back(read_png(f));
        out.names.push_back(f.filename().string());
    }
    if (out.images.empty()) throw ImageIoError("no PNG images in " + dir.string());
    return out;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
    write_file_atomically(path, fill);
}

// --------------------------------------------------------------------------

struct EncodeArgs {
    std::string in, out, stencil = "k0", mode = "sparse";
    double threshold = 0.0, quant = 0.0;
};

void add_encode(CLI::App& app, EncodeArgs& a) {
    app.add_option("--in", a.in, "source PNG")->required();
    app.add_option("--out", a.out, "output .lapc file")->required();
    app.add_option("--stencil", a.stencil, "k0, k1, k2 or k3")->capture_default_str();
    app.add_option("--threshold", a.threshold, "drop |L| <= T")->capture_default_str();
    app.add_option("--quant", a.quant, "quantization step, 0 disables")->capture_default_str();
    app.add_option("--mode", a.mode, "sparse or dense")->capture_default_str();
}

int run_encode(const EncodeArgs& a, const Globals&, std::ostream& out) {
    EncodeOptions opt;
    const auto st = parse_stencil_id(a.stencil);
    if (!st) throw UsageError("unknown stencil '" + a.stencil + "'");
    const auto mode = parse_storage_mode(a.mode);
    if (!mode) throw UsageError("--mode must be sparse or dense");
    if (!(a.threshold >= 0.0) || !std::isfinite(a.threshold)) throw UsageError("--threshold must be >= 0");
    if (!(a.quant >= 0.0) || !std::isfinite(a.quant)) throw UsageError("--quant must be >= 0");
    opt.stencil = *st;
    opt.mode = *mode;
    opt.threshold = a.threshold;
    opt.quant = a.quant;

    const auto e = encode(read_png(a.in), opt);
    const auto bytes = serialize(e);
    write_bytes_atomically(a.out, std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
    out << e.height << "x" << e.width << "x" << e.channels() << " " << to_string(e.stencil) << " " << to_string(e.mode)
        << " nonzero " << e.nonzero_count() << " ratio " << sparsity_ratio(e) << " bytes " << bytes.size() << "\n";
    return ok;
}

// --------------------------------------------------------------------------

struct DecodeArgs {
    std::string in, out, solver = "dst", checkpoint, truth, error_map;
    double tolerance = 1e-6;
    int max_iterations = 100000, levels = 0, depth = 8;
};

void add_decode(CLI::App& app, DecodeArgs& a) {
    app.add_option("--in", a.in, ".lapc file")->required();
    app.add_option("--out", a.out, "output PNG")->required();
    app.add_option("--solver", a.solver, "dst, multigrid, wcnn, cholesky, jacobi, gauss-seidel, sor")->capture_default_str();
    app.add_option("--checkpoint", a.checkpoint, "kernel checkpoint (wcnn)");
    app.add_option("--tolerance", a.tolerance, "relative residual target")->capture_default_str();
    app.add_option("--max-iterations", a.max_iterations)->capture_default_str();
    app.add_option("--levels", a.levels, "wcnn levels, 0 = automatic")->capture_default_str();
    app.add_option("--truth", a.truth, "reference PNG; prints the MSE of the unclamped reconstruction");
    app.add_option("--error-map", a.error_map, "PNG heatmap of |U - truth| (needs --truth)");
    app.add_option("--depth", a.depth, "PNG bit depth, 8 or 16")->capture_default_str();
}

int run_decode(const DecodeArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    DecodeOptions opt;
    opt.solver.solver = solver_or_usage(a.solver);
    opt.solver.tolerance = a.tolerance;
    opt.solver.max_iterations = a.max_iterations;
    opt.levels = a.levels;
    try {
        opt.solver.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (opt.solver.solver == SolverId::wcnn && a.checkpoint.empty()) throw UsageError("--solver wcnn requires --checkpoint");
    if (!a.error_map.empty() && a.truth.empty()) throw UsageError("--error-map requires --truth");
    if (a.depth != 8 && a.depth != 16) throw UsageError("--depth must be 8 or 16");
    if (a.levels < 0) throw UsageError("--levels must be >= 0");

    const auto encoded = load_encoded(a.in);
    KernelSet kernels;
    if (opt.solver.solver == SolverId::wcnn) {
        kernels = load_checkpoint(a.checkpoint);
        opt.kernels = &kernels;
    }
    const auto sol = reconstruct(encoded, opt);
    if (!sol.report.converged) {
        err << "error: " << to_string(sol.report.solver) << " did not reach tolerance " << a.tolerance << " in "
            << sol.report.iterations << " iterations (residual " << sol.report.final_residual() << ")\n";
        return numerical_failure;
    }
    for (const auto& p : sol.image.planes())
        if (!all_finite(p)) {
            err << "error: reconstruction contains non-finite values\n";
            return numerical_failure;
        }

    std::optional<RasterImage> truth;
    if (!a.truth.empty()) {
        truth = promote_channels(read_png(a.truth), sol.image.channels());
        if (!truth->same_geometry(sol.image)) throw ImageIoError("--truth image does not match the decoded size");
    }

    write_png(a.out, sol.image, a.depth == 16 ? PngDepth::bits16 : PngDepth::bits8);
    if (!a.error_map.empty()) write_heatmap_png(a.error_map, error_map(sol.image, *truth));

    out << "solver " << to_string(sol.report.solver) << " iterations " << sol.report.iterations << " residual "
        << sol.report.final_residual() << " seconds " << sol.report.seconds << "\n";
    if (truth) out << "mse " << std::setprecision(10) << mean_squared_error(sol.image, *truth) << "\n";
    if (g.verbose) {
        for (std::size_t i = 0; i < sol.report.residual_history.size(); ++i)
            out << "residual[" << i << "] " << sol.report.residual_history[i] << "\n";
    }
    return ok;
}

// --------------------------------------------------------------------------

struct TrainArgs {
    std::string data, heldout_data, init, out, record;
    int heldout = 2, patch_size = 64, patches = 200, heldout_patches = 50, batch = 32, epochs = 2000, kernel_size = 5,
        levels = 0, channels = 3, checkpoint_every = 0;
    double lr = 1e-5;
    bool no_augment = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
    app.add_option("--data", a.data, "directory of training PNGs")->envname("LAPFIELD_DATA_DIR");
    app.add_option("--heldout-data", a.heldout_data, "separate held-out directory");
    app.add_option("--heldout", a.heldout, "images of --data held out when --heldout-data is absent")->capture_default_str();
    app.add_option("--patch-size", a.patch_size)->capture_default_str();
    app.add_option("--patches", a.patches, "training patches")->capture_default_str();
    app.add_option("--heldout-patches", a.heldout_patches)->capture_default_str();
    app.add_option("--batch", a.batch)->capture_default_str();
    app.add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
    app.add_option("--epochs", a.epochs)->capture_default_str();
    app.add_option("--kernel-size", a.kernel_size)->capture_default_str();
    app.add_option("--levels", a.levels, "0 = automatic")->capture_default_str();
    app.add_option("--channels", a.channels)->capture_default_str();
    app.add_flag("--no-augment", a.no_augment, "disable rotations and mirror flips");
    app.add_option("--init", a.init, "starting checkpoint");
    app.add_option("--checkpoint-every", a.checkpoint_every, "epochs between checkpoint writes to --out")->capture_default_str();
    app.add_option("--out", a.out, "output checkpoint")->required();
    app.add_option("--record", a.record, "CSV of per-epoch losses");
}

int run_train(const TrainArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    require_directory(a.data, "--data");
    TrainConfig cfg;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.epochs = a.epochs;
    cfg.kernel_size = a.kernel_size;
    cfg.levels = a.levels;
    cfg.seed = g.seed;
    cfg.checkpoint_every = a.checkpoint_every;
    if (a.checkpoint_every > 0) cfg.checkpoint_path = a.out;
    try {
        cfg.validate();
        if (a.patches < 1 || a.heldout_patches < 0) throw InvalidArgument("patch counts must be positive");
        require_min_dims(a.patch_size, a.patch_size, "--patch-size");
        if (a.channels < 1) throw InvalidArgument("--channels must be positive");
        if (a.heldout < 0) throw InvalidArgument("--heldout must be >= 0");
        if (cfg.levels > 0) check_levels(a.patch_size, a.patch_size, cfg.levels);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    auto train_images = load_directory(a.data).images;
    std::vector<RasterImage> heldout_images;
    if (!a.heldout_data.empty()) {
        heldout_images = load_directory(a.heldout_data).images;
    } else if (a.heldout > 0) {
        if (a.heldout >= static_cast<int>(train_images.size()))
            throw InvalidArgument("--heldout leaves no training images");
        auto split = split_by_image(std::move(train_images), a.heldout, g.seed);
        train_images = std::move(split.train);
        heldout_images = std::move(split.heldout);
    }

    PatchOptions po;
    po.patch_size = a.patch_size;
    po.count = a.patches;
    po.augment = !a.no_augment;
    po.seed = g.seed;
    po.channels = a.channels;
    const auto train_set = sample_patches(train_images, po);
    std::vector<TrainingPair> heldout_set;
    if (!heldout_images.empty() && a.heldout_patches > 0) {
        po.count = a.heldout_patches;
        po.seed = g.seed + 1;
        heldout_set = sample_patches(heldout_images, po);
    }

    std::optional<KernelSet> start;
    if (!a.init.empty()) {
        start = load_checkpoint(a.init);
        if (start->channels() == 1 && a.channels > 1) start = replicate_channels(*start, a.channels);
        if (start->channels() != a.channels) throw CheckpointError("--init checkpoint has the wrong channel count");
        cfg.kernel_size = start->kernel_size();
    }

    TrainResult res;
    try {
        res = train_loop(cfg, train_set, heldout_set, start ? &*start : nullptr);
    } catch (const TrainingDiverged& e) {
        err << "error: " << e.what() << " after " << e.record().train_loss.size() << " completed epochs\n";
        return numerical_failure;
    }

    save_checkpoint(a.out, res.kernels);
    if (!a.record.empty()) write_text(a.record, [&](std::ostream& os) { res.record.write_csv(os); });
    if (g.verbose)
        for (std::size_t e = 0; e < res.record.train_loss.size(); ++e)
            out << "epoch " << e + 1 << " train " << res.record.train_loss[e] << " heldout " << res.record.heldout_loss[e] << "\n";
    out << "parameters " << res.kernels.parameter_count() << " patches " << train_set.size() << " heldout patches "
        << heldout_set.size() << "\n";
    out << "heldout loss " << res.record.initial_heldout_loss << " -> "
        << (res.record.heldout_loss.empty() ? res.record.initial_heldout_loss : res.record.heldout_loss.back())
        << " in " << res.record.seconds << " s\n";
    return ok;
}

// --------------------------------------------------------------------------

struct EvalArgs {
    std::string data, checkpoint, compare, baseline, out;
    int levels = 0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    app.add_option("--data", a.data, "directory of test PNGs")->envname("LAPFIELD_DATA_DIR");
    app.add_option("--checkpoint", a.checkpoint, "trained kernels (column 'wcnn')");
    app.add_option("--compare", a.compare, "fixed wavelet kernels for a second column ('wavelet')");
    app.add_option("--baseline", a.baseline, "checkpoint-free solver column, e.g. dst");
    app.add_option("--levels", a.levels, "0 = automatic")->capture_default_str();
    app.add_option("--out", a.out, "CSV report");
}

int run_eval(const EvalArgs& a, const Globals&, std::ostream& out) {
    require_directory(a.data, "--data");
    if (a.checkpoint.empty() && a.baseline.empty()) throw UsageError("eval needs --checkpoint and/or --baseline");
    if (!a.compare.empty() && a.checkpoint.empty()) throw UsageError("--compare requires --checkpoint");
    std::optional<SolverId> baseline;
    if (!a.baseline.empty()) {
        baseline = solver_or_usage(a.baseline);
        if (*baseline == SolverId::wcnn) throw UsageError("--baseline must be a classical solver");
    }
    if (a.levels < 0) throw UsageError("--levels must be >= 0");

    std::vector<EvalMethod> methods;
    int channels = 0;
    if (!a.compare.empty()) {
        auto ks = load_checkpoint(a.compare);
        methods.push_back(wcnn_method("wavelet", std::move(ks), a.levels));
    }
    if (!a.checkpoint.empty()) {
        auto ks = load_checkpoint(a.checkpoint);
        if (ks.channels() > 1) channels = ks.channels();
        methods.push_back(wcnn_method("wcnn", std::move(ks), a.levels));
    }
    if (baseline) methods.push_back(solver_method(*baseline));

    auto loaded = load_directory(a.data);
    if (channels == 0)
        for (const auto& img : loaded.images) channels = std::max(channels, img.channels());
    const auto pairs = image_pairs(loaded.images, channels);
    const auto report = evaluate(pairs, loaded.names, methods);

    out << "image";
    for (const auto& m : report.methods) out << "  " << m;
    out << "\n";
    const auto old_prec = out.precision(8);
    for (std::size_t i = 0; i < report.images.size(); ++i) {
        out << report.images[i];
        for (double v : report.mse[i]) out << "  " << v;
        out << "\n";
    }
    out << "mean";
    for (double v : report.mean()) out << "  " << v;
    out << "\n";
    out.precision(old_prec);
    if (!a.out.empty()) write_text(a.out, [&](std::ostream& os) { report.write_csv(os); });
    return ok;
}

// --------------------------------------------------------------------------

struct StatsArgs {
    std::string data, out, field = "laplacian";
    int bins = 257;
    double lo = -64.0, hi = 64.0;
};

void add_stats(CLI::App& app, StatsArgs& a) {
    app.add_option("--data", a.data, "directory of PNGs")->envname("LAPFIELD_DATA_DIR");
    app.add_option("--out", a.out, "distribution CSV")->required();
    app.add_option("--bins", a.bins)->capture_default_str();
    app.add_option("--lo", a.lo)->capture_default_str();
    app.add_option("--hi", a.hi)->capture_default_str();
    app.add_option("--field", a.field, "laplacian, gradient-x or intensity")->capture_default_str();
}

int run_stats(const StatsArgs& a, const Globals&, std::ostream& out) {
    require_directory(a.data, "--data");
    const HistogramSpec spec{a.bins, a.lo, a.hi};
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const auto kind = parse_field_kind(a.field);
    if (!kind) throw UsageError("unknown --field '" + a.field + "'");

    const auto loaded = load_directory(a.data);
    const auto dist = dataset_distribution(loaded.images, loaded.names, spec, *kind);
    write_text(a.out, [&](std::ostream& os) { dist.write_csv(os); });

    out << "image  laplace_location  laplace_scale  central_laplacian  central_intensity\n";
    for (std::size_t i = 0; i < loaded.images.size(); ++i) {
        const auto fit = laplace_fit(lapfield::laplacian(loaded.images[i]));
        const auto sp = compare_sparsity(loaded.images[i]);
        out << loaded.names[i] << "  " << fit.location << "  " << fit.scale << "  " << sp.laplacian << "  "
            << sp.intensity << "\n";
    }
    return ok;
}

// --------------------------------------------------------------------------

struct SpectrumArgs {
    std::string checkpoint, out, kernel = "H", png;
    int channel = 0, fft_size = 64;
    bool log_scale = false;
};

void add_spectrum(CLI::App& app, SpectrumArgs& a) {
    app.add_option("--checkpoint", a.checkpoint)->required();
    app.add_option("--out", a.out, "spectrum CSV")->required();
    app.add_option("--kernel", a.kernel, "H, G or K")->capture_default_str();
    app.add_option("--channel", a.channel)->capture_default_str();
    app.add_option("--fft-size", a.fft_size)->capture_default_str();
    app.add_option("--png", a.png, "heatmap of the magnitude");
    app.add_flag("--log", a.log_scale, "log-scaled heatmap");
}

int run_spectrum(const SpectrumArgs& a, const Globals&, std::ostream& out) {
    if (a.kernel != "H" && a.kernel != "G" && a.kernel != "K") throw UsageError("--kernel must be H, G or K");
    if (a.fft_size < 3) throw UsageError("--fft-size must be at least 3");
    const auto ks = load_checkpoint(a.checkpoint);
    if (a.channel < 0 || a.channel >= ks.channels())
        throw UsageError("--channel out of range for a " + std::to_string(ks.channels()) + "-channel checkpoint");
    const auto& ck = ks.channel(a.channel);
    const Plane& k = a.kernel == "H" ? ck.analysis : a.kernel == "G" ? ck.detail : ck.synthesis;
    if (a.fft_size < k.rows()) throw UsageError("--fft-size is smaller than the kernel");
    const Plane s = kernel_spectrum(k, a.fft_size);
    write_text(a.out, [&](std::ostream& os) { write_spectrum_csv(os, s); });
    if (!a.png.empty()) write_heatmap_png(a.png, s, a.log_scale);
    const double dc = s(a.fft_size / 2, a.fft_size / 2);
    const double margin = low_pass_margin(s);
    out << "kernel " << a.kernel << " channel " << a.channel << " dc " << dc << " nyquist_max " << dc - margin
        << (margin > 0 ? " low-pass\n" : " not low-pass\n");
    return ok;
}

// --------------------------------------------------------------------------

struct BenchArgs {
    std::vector<std::string> solvers{"dst", "multigrid"};
    std::vector<int> sizes{256, 512, 1024};
    int reps = 5;
    std::string checkpoint, out;
};

void add_bench(CLI::App& app, BenchArgs& a) {
    app.add_option("--solvers", a.solvers, "comma-separated solver list")->delimiter(',')->capture_default_str();
    app.add_option("--sizes", a.sizes, "comma-separated square resolutions")->delimiter(',')->capture_default_str();
    app.add_option("--reps", a.reps, "timed repetitions (>= 3)")->capture_default_str();
    app.add_option("--checkpoint", a.checkpoint, "kernels for the wcnn solver");
    app.add_option("--out", a.out, "CSV report");
}

int run_bench(const BenchArgs& a, const Globals& g, std::ostream& out) {
    BenchOptions opt;
    opt.solvers.clear();
    for (const auto& s : a.solvers) opt.solvers.push_back(solver_or_usage(s));
    opt.resolutions = a.sizes;
    opt.reps = a.reps;
    opt.seed = g.seed;
    const bool wants_wcnn = std::find(opt.solvers.begin(), opt.solvers.end(), SolverId::wcnn) != opt.solvers.end();
    if (wants_wcnn && a.checkpoint.empty()) throw UsageError("benchmarking wcnn requires --checkpoint");
    KernelSet ks;
    if (wants_wcnn) {
        ks = load_checkpoint(a.checkpoint);
        opt.kernels = &ks;
    }
    try {
        opt.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    retain_freed_memory();
    const auto rows = benchmark_solvers(opt);
    write_bench_csv(out, rows);
    if (!a.out.empty()) write_text(a.out, [&](std::ostream& os) { write_bench_csv(os, rows); });
    return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Laplacian field image codec, Poisson solvers and shared-kernel wavelet network", "lapfield"};
    app.set_version_flag("--version", version_text());
    app.fallthrough();
    app.require_subcommand(1);

    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads")->capture_default_str();
    app.add_flag("-v,--verbose", g.verbose);

    EncodeArgs enc;
    DecodeArgs dec;
    TrainArgs tr;
    EvalArgs ev;
    StatsArgs st;
    SpectrumArgs sp;
    BenchArgs be;
    auto* c_enc = app.add_subcommand("encode", "image PNG -> Laplacian field container");
    auto* c_dec = app.add_subcommand("decode", "Laplacian field container -> image PNG");
    auto* c_tr = app.add_subcommand("train", "train the shared-kernel network on image patches");
    auto* c_ev = app.add_subcommand("eval", "reconstruction MSE over an image directory");
    auto* c_st = app.add_subcommand("stats", "Laplacian value distribution of an image directory");
    auto* c_sp = app.add_subcommand("spectrum", "magnitude spectrum of a checkpoint kernel");
    auto* c_be = app.add_subcommand("bench", "time solvers across resolutions");
    add_encode(*c_enc, enc);
    add_decode(*c_dec, dec);
    add_train(*c_tr, tr);
    add_eval(*c_ev, ev);
    add_stats(*c_st, st);
    add_spectrum(*c_sp, sp);
    add_bench(*c_be, be);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::CallForVersion&) {
        out << version_text() << "\n";
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return usage_error;
    }

    try {
        if (g.threads < 1) throw UsageError("--threads must be at least 1");
        set_thread_count(g.threads);
        if (c_enc->parsed()) return run_encode(enc, g, out);
        if (c_dec->parsed()) return run_decode(dec, g, out, err);
        if (c_tr->parsed()) return run_train(tr, g, out, err);
        if (c_ev->parsed()) return run_eval(ev, g, out);
        if (c_st->parsed()) return run_stats(st, g, out);
        if (c_sp->parsed()) return run_spectrum(sp, g, out);
        if (c_be->parsed()) return run_bench(be, g, out);
        err << app.help();
        return usage_error;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const CodecError& e) {
        err << "error: " << e.what() << "\n";
        return data_error;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return numerical_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return data_error;
    }
}

}  // namespace lapfield::cli
