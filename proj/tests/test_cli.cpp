#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lapfield/cli.hpp"
#include "lapfield/eval.hpp"
#include "lapfield/image_io.hpp"
#include "lapfield/laplacian.hpp"
#include "lapfield/wcnn.hpp"
#include "test_support.hpp"

using namespace lapfield;
namespace fs = std::filesystem;

namespace {

const fs::path kNatural = fs::path(LAPFIELD_TESTDATA_DIR) / "natural";
const fs::path kTable3 = fs::path(LAPFIELD_TESTDATA_DIR) / "kernels" / "table3.ckpt";

struct Outcome {
    int code;
    std::string out, err;
};

Outcome lapfield_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lapfield");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& tag) {
        dir = fs::temp_directory_path() / ("lapfield_cli_" + tag + "_" + std::to_string(std::random_device{}()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

double reported(const std::string& text, const std::string& key) {
    std::istringstream is(text);
    std::string word;
    while (is >> word)
        if (word == key) {
            double v;
            is >> v;
            return v;
        }
    FAIL("missing '" << key << "' in output:\n" << text);
    return 0.0;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string image(const char* name) { return (kNatural / name).string(); }

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
    const auto r = lapfield_cli({});
    CHECK(r.code == cli::usage_error);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(r.out.empty());
}

TEST_CASE("version lists format versions") {
    const auto r = lapfield_cli({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out.find("format version 1") != std::string::npos);
    CHECK(r.out.find("checkpoint format version 1") != std::string::npos);
}

TEST_CASE("unknown flag and bad values are usage errors") {
    Scratch s("usage");
    CHECK(lapfield_cli({"encode", "--in", image("00_astronaut.png")}).code == cli::usage_error);
    CHECK(lapfield_cli({"encode", "--in", image("00_astronaut.png"), "--out", s / "a.lapc", "--bogus"}).code ==
          cli::usage_error);
    CHECK(lapfield_cli({"encode", "--in", image("00_astronaut.png"), "--out", s / "a.lapc", "--threshold", "-1"}).code ==
          cli::usage_error);
    CHECK(lapfield_cli({"encode", "--in", image("00_astronaut.png"), "--out", s / "a.lapc", "--stencil", "k9"}).code ==
          cli::usage_error);
    CHECK_FALSE(fs::exists(s / "a.lapc"));
}

TEST_CASE("encode then decode with DST reproduces the image") {
    Scratch s("roundtrip");
    for (const char* name : {"00_astronaut.png", "08_moon.png"}) {
        CAPTURE(name);
        const auto e = lapfield_cli({"encode", "--in", image(name), "--out", s / "f.lapc"});
        REQUIRE(e.code == 0);
        const auto d = lapfield_cli({"decode", "--in", s / "f.lapc", "--out", s / "r.png", "--truth", image(name),
                                     "--error-map", s / "err.png"});
        REQUIRE(d.code == 0);
        CHECK(reported(d.out, "mse") < 1e-3);
        const auto back = read_png(s / "r.png");
        const auto truth = read_png(image(name));
        CHECK(mean_squared_error(back, truth) == 0.0);
        CHECK(read_png(s / "err.png").height() == truth.height());
    }
}

TEST_CASE("decode global options may follow the subcommand") {
    Scratch s("globals");
    REQUIRE(lapfield_cli({"encode", "--in", image("09_brick.png"), "--out", s / "f.lapc", "--seed", "5"}).code == 0);
    const auto d = lapfield_cli({"--threads", "2", "decode", "--in", s / "f.lapc", "--out", s / "r.png", "--solver",
                                 "multigrid", "--truth", image("09_brick.png")});
    REQUIRE(d.code == 0);
    CHECK(reported(d.out, "mse") < 1e-3);
}

TEST_CASE("corrupted container exits 2 with bad magic") {
    Scratch s("corrupt");
    REQUIRE(lapfield_cli({"encode", "--in", image("08_moon.png"), "--out", s / "f.lapc"}).code == 0);
    auto bytes = slurp(s / "f.lapc");
    bytes[0] = 'X';
    std::ofstream(s / "bad.lapc", std::ios::binary) << bytes;
    const auto d = lapfield_cli({"decode", "--in", s / "bad.lapc", "--out", s / "r.png"});
    CHECK(d.code == cli::data_error);
    CHECK(d.err.find("bad magic") != std::string::npos);
    CHECK_FALSE(fs::exists(s / "r.png"));

    std::ofstream(s / "short.lapc", std::ios::binary) << bytes.substr(0, 40).replace(0, 1, "L");
    const auto t = lapfield_cli({"decode", "--in", s / "short.lapc", "--out", s / "r.png"});
    CHECK(t.code == cli::data_error);
    CHECK(t.err.find("truncated") != std::string::npos);
}

TEST_CASE("missing inputs are data errors") {
    Scratch s("missing");
    CHECK(lapfield_cli({"encode", "--in", s / "nope.png", "--out", s / "f.lapc"}).code == cli::data_error);
    CHECK(lapfield_cli({"decode", "--in", s / "nope.lapc", "--out", s / "r.png"}).code == cli::data_error);
    CHECK(lapfield_cli({"eval", "--data", s / "nodir", "--baseline", "dst"}).code == cli::data_error);
    CHECK_FALSE(fs::exists(s / "f.lapc"));
}

TEST_CASE("wcnn decode needs a checkpoint before any work") {
    Scratch s("wcnn");
    REQUIRE(lapfield_cli({"encode", "--in", image("08_moon.png"), "--out", s / "f.lapc"}).code == 0);
    const auto r = lapfield_cli({"decode", "--in", s / "f.lapc", "--out", s / "r.png", "--solver", "wcnn"});
    CHECK(r.code == cli::usage_error);
    CHECK(r.err.find("--checkpoint") != std::string::npos);
    CHECK_FALSE(fs::exists(s / "r.png"));

    const auto ok = lapfield_cli(
        {"decode", "--in", s / "f.lapc", "--out", s / "r.png", "--solver", "wcnn", "--checkpoint", kTable3.string()});
    CHECK(ok.code == 0);
    CHECK(fs::exists(s / "r.png"));

    std::ofstream(s / "bad.ckpt") << "not a checkpoint\n";
    const auto bad = lapfield_cli(
        {"decode", "--in", s / "f.lapc", "--out", s / "q.png", "--solver", "wcnn", "--checkpoint", s / "bad.ckpt"});
    CHECK(bad.code == cli::data_error);
    CHECK_FALSE(fs::exists(s / "q.png"));
}

TEST_CASE("solver that misses its tolerance exits 3 without output") {
    Scratch s("nonconv");
    REQUIRE(lapfield_cli({"encode", "--in", image("08_moon.png"), "--out", s / "f.lapc"}).code == 0);
    const auto r = lapfield_cli(
        {"decode", "--in", s / "f.lapc", "--out", s / "r.png", "--solver", "jacobi", "--max-iterations", "5"});
    CHECK(r.code == cli::numerical_failure);
    CHECK_FALSE(fs::exists(s / "r.png"));
}

TEST_CASE("perfect solver stub scores zero") {
    RasterImage truth = testing::random_byte_image(16, 16, 3, 4);
    std::vector<TrainingPair> pairs{{laplacian(truth), truth, 0}};
    EvalMethod perfect{"perfect", [](const TrainingPair& p) { return p.truth; }};
    const auto report = evaluate(pairs, {"one.png"}, {perfect});
    REQUIRE(report.mse.size() == 1);
    CHECK(report.mse[0][0] == 0.0);
    CHECK(report.mean()[0] == 0.0);
}

TEST_CASE("eval with the DST baseline") {
    Scratch s("eval");
    fs::create_directories(s.dir / "imgs");
    fs::copy_file(kNatural / "02_coffee.png", s.dir / "imgs" / "02_coffee.png");
    fs::copy_file(kNatural / "07_camera.png", s.dir / "imgs" / "07_camera.png");
    const auto r = lapfield_cli({"eval", "--data", s / "imgs", "--baseline", "dst", "--out", s / "e.csv"});
    REQUIRE(r.code == 0);
    CHECK(reported(r.out, "mean") < 1e-3);
    std::istringstream csv(slurp(s / "e.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "image,dst");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 3);

    CHECK(lapfield_cli({"eval", "--data", s / "imgs"}).code == cli::usage_error);
}

TEST_CASE("eval comparison mode has one column per model") {
    Scratch s("compare");
    fs::create_directories(s.dir / "imgs");
    fs::copy_file(kNatural / "08_moon.png", s.dir / "imgs" / "08_moon.png");
    const auto r = lapfield_cli({"eval", "--data", s / "imgs", "--checkpoint", kTable3.string(), "--compare",
                                 kTable3.string(), "--out", s / "e.csv"});
    REQUIRE(r.code == 0);
    const auto csv = slurp(s / "e.csv");
    CHECK(csv.substr(0, csv.find('\n')) == "image,wavelet,wcnn");
    CHECK(r.out.find("wavelet") != std::string::npos);
}

TEST_CASE("train writes a reproducible 177-parameter checkpoint") {
    Scratch s("train");
    fs::create_directories(s.dir / "imgs");
    for (const char* n : {"00_astronaut.png", "07_camera.png", "08_moon.png"})
        fs::copy_file(kNatural / n, s.dir / "imgs" / n);
    auto args = [&](const std::string& out) {
        return std::vector<std::string>{"train", "--data", s / "imgs", "--heldout", "1", "--patch-size", "16",
                                        "--patches", "12", "--heldout-patches", "4", "--batch", "4", "--epochs", "3",
                                        "--levels", "2", "--lr", "1e-3", "--seed", "9", "--out", out, "--record",
                                        out + ".csv"};
    };
    const auto a = lapfield_cli(args(s / "a.ckpt"));
    REQUIRE(a.code == 0);
    const auto b = lapfield_cli(args(s / "b.ckpt"));
    REQUIRE(b.code == 0);
    CHECK(slurp(s / "a.ckpt") == slurp(s / "b.ckpt"));
    CHECK(slurp(s / "a.ckpt.csv") == slurp(s / "b.ckpt.csv"));
    CHECK(load_checkpoint(s / "a.ckpt").parameter_count() == 177);
}

TEST_CASE("diverging training exits 3 and leaves no checkpoint") {
    Scratch s("diverge");
    fs::create_directories(s.dir / "imgs");
    fs::copy_file(kNatural / "00_astronaut.png", s.dir / "imgs" / "00_astronaut.png");
    const auto r = lapfield_cli({"train", "--data", s / "imgs", "--heldout", "0", "--patch-size", "16", "--patches",
                                 "8", "--batch", "4", "--epochs", "20", "--levels", "2", "--lr", "1e200", "--out",
                                 s / "x.ckpt"});
    CHECK(r.code == cli::numerical_failure);
    CHECK_FALSE(fs::exists(s / "x.ckpt"));
}

TEST_CASE("stats, spectrum and bench write their reports") {
    Scratch s("reports");
    const auto st = lapfield_cli({"stats", "--data", kNatural.string(), "--out", s / "dist.csv"});
    REQUIRE(st.code == 0);
    CHECK(fs::file_size(s / "dist.csv") > 0);

    const auto sp = lapfield_cli({"spectrum", "--checkpoint", kTable3.string(), "--out", s / "spec.csv", "--png",
                                  s / "spec.png"});
    REQUIRE(sp.code == 0);
    CHECK(sp.out.find(" low-pass") != std::string::npos);
    CHECK(read_png(s / "spec.png").height() == 64);

    const auto be = lapfield_cli({"bench", "--solvers", "dst", "--sizes", "32", "--reps", "3", "--out", s / "b.csv"});
    REQUIRE(be.code == 0);
    CHECK(slurp(s / "b.csv").rfind("solver,resolution,median_seconds,mse\ndst,32,", 0) == 0);
    CHECK(lapfield_cli({"bench", "--solvers", "wcnn", "--sizes", "32"}).code == cli::usage_error);
    CHECK(lapfield_cli({"bench", "--solvers", "dst", "--sizes", "32", "--reps", "2"}).code == cli::usage_error);
}
