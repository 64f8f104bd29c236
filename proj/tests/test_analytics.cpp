#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lapfield/analytics.hpp"
#include "lapfield/image_io.hpp"
#include "lapfield/laplacian.hpp"
#include "test_support.hpp"

using namespace lapfield;
using namespace lapfield::testing;

namespace {

const std::filesystem::path kNatural = std::filesystem::path(LAPFIELD_TESTDATA_DIR) / "natural";

ScalarField single(Plane p) { return ScalarField(std::vector<Plane>{std::move(p)}); }

}  // namespace

TEST_CASE("histogram of a constant field") {
    const auto h = field_histogram(single(Plane(6, 6, 3.0)))[0];
    CHECK(h.counts.size() == 257);
    CHECK(h.total() == 36);
    int occupied = 0;
    for (auto c : h.counts) occupied += c != 0;
    CHECK(occupied == 1);
    const auto cdf = h.cdf();
    const int b = h.spec.bin_of(3.0);
    CHECK(cdf[static_cast<std::size_t>(b - 1)] == 0.0);
    CHECK(cdf[static_cast<std::size_t>(b)] == 1.0);
    CHECK(cdf.back() == 1.0);
}

TEST_CASE("default bins are centred on zero") {
    const HistogramSpec s;
    CHECK(s.bin_of(0.0) == 128);
    CHECK(s.bin_of(0.2) == 128);
    CHECK(s.bin_of(-0.2) == 128);
    CHECK(s.bin_of(-1e9) == 0);
    CHECK(s.bin_of(1e9) == 256);
    CHECK(s.bin_of(64.0) == 256);
    CHECK(Histogram{s, {}}.center(128) == doctest::Approx(0.0));
    CHECK_THROWS_AS((HistogramSpec{1, 0, 1}.validate()), InvalidArgument);
    CHECK_THROWS_AS((HistogramSpec{4, 1, 1}.validate()), InvalidArgument);
}

TEST_CASE("histogram counts match a naive tally") {
    const Plane p = random_plane(8, 8, 3, -80, 80);
    const HistogramSpec spec{16, -50, 50};
    const auto h = field_histogram(single(p), spec)[0];
    std::vector<std::uint64_t> naive(16, 0);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            const double x = p(r, c);
            int b = 0;
            while (b < 15 && x >= -50 + (b + 1) * 100.0 / 16) ++b;
            ++naive[static_cast<std::size_t>(b)];
        }
    CHECK(h.counts == naive);
    CHECK(h.total() == 64);

    const auto d = h.density();
    double integral = 0.0;
    for (double v : d) integral += v * spec.bin_width();
    CHECK(integral == doctest::Approx(1.0));
    const auto cdf = h.cdf();
    for (std::size_t i = 1; i < cdf.size(); ++i) CHECK(cdf[i] >= cdf[i - 1]);
    CHECK(cdf.back() == 1.0);
}

TEST_CASE("negated field mirrors the histogram") {
    Plane p = random_plane(16, 16, 4, -70, 70);
    Plane q = p;
    for (double& v : q.values()) v = -v;
    const auto a = field_histogram(single(p))[0], b = field_histogram(single(q))[0];
    for (std::size_t i = 0; i < a.counts.size(); ++i) CHECK(a.counts[i] == b.counts[a.counts.size() - 1 - i]);
    CHECK_THROWS_AS(field_histogram(ScalarField(std::vector<Plane>{})), InvalidArgument);
}

TEST_CASE("gradient field") {
    RasterImage img(3, 4, 1);
    for (int c = 0; c < 4; ++c) img(1, c, 0) = c * c;
    const auto g = gradient_x(img);
    CHECK(g(1, 0, 0) == 1.0);
    CHECK(g(1, 2, 0) == 5.0);
    CHECK(g(1, 3, 0) == -9.0);
    CHECK(parse_field_kind("gradient-x") == FieldKind::gradient_x);
    CHECK_FALSE(parse_field_kind("curl").has_value());
}

TEST_CASE("dataset distribution") {
    const auto a = random_byte_image(20, 20, 3, 1), b = random_byte_image(20, 20, 1, 2);
    const auto one = dataset_distribution({a}, {"a"});
    CHECK(one.mean_density == one.per_image[0].density());
    CHECK(one.per_image[0].total() == 1200);

    const auto twice = dataset_distribution({a, a}, {"a", "a2"});
    for (std::size_t i = 0; i < one.mean_density.size(); ++i)
        CHECK(twice.mean_density[i] == doctest::Approx(one.mean_density[i]).epsilon(1e-15));

    const auto ab = dataset_distribution({a, b}, {"a", "b"}), ba = dataset_distribution({b, a}, {"b", "a"});
    for (std::size_t i = 0; i < ab.mean_density.size(); ++i)
        CHECK(ab.mean_density[i] == doctest::Approx(ba.mean_density[i]).epsilon(1e-15));

    std::ostringstream csv;
    ab.write_csv(csv);
    CHECK(csv.str().rfind("bin_center,mean_density,log10_mean_density,a,b\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv.str()) lines += ch == '\n';
    CHECK(lines == 258);

    CHECK_THROWS_AS(dataset_distribution(std::vector<RasterImage>{}, {}), InvalidArgument);
    const auto grad = dataset_distribution({a}, {"a"}, {}, FieldKind::gradient_x);
    CHECK(grad.per_image[0].total() == 1200);
}

TEST_CASE("laplacian values concentrate near zero on natural images") {
    const auto d = dataset_distribution(kNatural);
    REQUIRE(d.per_image.size() == 10);
    const auto bins = d.mean_density;
    const auto peak = std::max_element(bins.begin(), bins.end()) - bins.begin();
    CHECK(std::abs(peak - 128) <= 2);

    const auto hubble = compare_sparsity(read_png(kNatural / "05_hubble_deep_field.png"));
    CHECK(hubble.laplacian == 191075.0 / 196608.0);
    CHECK(hubble.intensity == 185128.0 / 196608.0);
    const auto moon = compare_sparsity(read_png(kNatural / "08_moon.png"));
    CHECK(moon.laplacian == 63570.0 / 65536.0);
    CHECK(moon.intensity == 58032.0 / 65536.0);
}

TEST_CASE("central fraction") {
    const std::vector<double> v{-10, -1, 0, 0.5, 1, 2, 9};
    CHECK(central_fraction(v) == doctest::Approx(4.0 / 7.0));
    CHECK(central_fraction(std::vector<double>{0, 0}) == 1.0);
    CHECK_THROWS_AS(central_fraction(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("laplace fit") {
    const auto z = laplace_fit(std::vector<double>(10, 0.0));
    CHECK(z.location == 0.0);
    CHECK(z.scale == 0.0);

    const auto two = laplace_fit(std::vector<double>{-3, 3, -3, 3});
    CHECK(two.location == 0.0);
    CHECK(two.scale == 3.0);
    CHECK(two.mean_abs_deviation == 3.0);

    std::mt19937_64 rng(7);
    std::exponential_distribution<double> ex(0.5);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> s(100000);
    for (double& x : s) x = 1.5 + (sign(rng) ? 1 : -1) * ex(rng);
    const auto f = laplace_fit(s);
    CHECK(f.scale >= 1.9);
    CHECK(f.scale <= 2.1);
    CHECK(f.location == doctest::Approx(1.5).epsilon(0.05));

    const auto hubble = laplace_fit(laplacian(read_png(kNatural / "05_hubble_deep_field.png")));
    CHECK(hubble.location == 1.0);
    CHECK(hubble.scale == doctest::Approx(16.605051676432293).epsilon(1e-12));

    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("kernel spectrum") {
    Plane delta(3, 3);
    delta(0, 0) = 1.0;
    const Plane flat = kernel_spectrum(delta, 8), zero = kernel_spectrum(Plane(5, 5), 16);
    for (double v : flat.values()) CHECK(v == doctest::Approx(1.0));
    for (double v : zero.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(kernel_spectrum(Plane(5, 5), 4), InvalidArgument);

    const Plane k = random_plane(5, 5, 9);
    for (int n : {16, 15}) {
        const Plane s = kernel_spectrum(k, n);
        double sum = 0.0;
        for (double v : k.values()) sum += v;
        CHECK(s(n / 2, n / 2) == doctest::Approx(std::abs(sum)));
        for (int i = 1; i < n; ++i)
            for (int j = 1; j < n; ++j) {
                // |F(-u, -v)| = |F(u, v)| for real kernels.
                const int mi = (n % 2 ? n - 1 : n) - i, mj = (n % 2 ? n - 1 : n) - j;
                CHECK(s(i, j) == doctest::Approx(s(mi, mj)).epsilon(1e-12));
            }
    }
}

TEST_CASE("published analysis kernel is low-pass") {
    const auto ks = load_checkpoint(std::filesystem::path(LAPFIELD_TESTDATA_DIR) / "kernels" / "table3.ckpt");
    const Plane s = kernel_spectrum(ks.channel(0).analysis, 64);
    CHECK(s(32, 32) == doctest::Approx(3.985).epsilon(1e-12));
    CHECK(s(32, 33) == doctest::Approx(3.9641435405807255).epsilon(1e-12));
    double edge = 0.0;
    for (int i = 0; i < 64; ++i) edge = std::max({edge, s(0, i), s(i, 0)});
    CHECK(edge == doctest::Approx(0.02312853404997289).epsilon(1e-12));
    CHECK(low_pass_margin(s) == doctest::Approx(3.985 - 0.02312853404997289).epsilon(1e-12));

    std::ostringstream csv;
    write_spectrum_csv(csv, kernel_spectrum(ks.channel(0).analysis, 8));
    CHECK(csv.str().rfind("u,v,magnitude\n-4,-4,", 0) == 0);
}

TEST_CASE("synthetic benchmark image") {
    const auto a = synthetic_natural_image(64, 48, 2, 5);
    CHECK(a == synthetic_natural_image(64, 48, 2, 5));
    CHECK_FALSE(a == synthetic_natural_image(64, 48, 2, 6));
    double lo = 255, hi = 0;
    for (const auto& p : a.planes())
        for (double v : p.values()) {
            CHECK(v == std::round(v));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    CHECK(lo == 0.0);
    CHECK(hi == 255.0);
}

TEST_CASE("benchmark harness") {
    BenchOptions opt;
    opt.resolutions = {32};
    opt.solvers = {SolverId::dst};
    opt.reps = 3;
    const auto one = benchmark_solvers(opt);
    REQUIRE(one.size() == 1);
    CHECK(one[0].median_seconds > 0.0);
    CHECK(one[0].mse < 1e-6);
    CHECK(one[0].reps == 3);

    const auto ks = load_checkpoint(std::filesystem::path(LAPFIELD_TESTDATA_DIR) / "kernels" / "table3.ckpt");
    opt.resolutions = {48, 32};
    opt.solvers = {SolverId::wcnn, SolverId::multigrid, SolverId::dst};
    opt.kernels = &ks;
    const auto rows = benchmark_solvers(opt);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].solver == SolverId::dst);
    CHECK(rows[0].resolution == 32);
    CHECK(rows[1].resolution == 48);
    CHECK(rows[2].solver == SolverId::multigrid);
    CHECK(rows[4].solver == SolverId::wcnn);

    std::ostringstream csv;
    write_bench_csv(csv, rows);
    CHECK(csv.str().rfind("solver,resolution,median_seconds,mse\ndst,32,", 0) == 0);

    opt.kernels = nullptr;
    CHECK_THROWS_AS(benchmark_solvers(opt), InvalidArgument);
    opt.solvers = {SolverId::dst};
    opt.reps = 2;
    CHECK_THROWS_AS(benchmark_solvers(opt), InvalidArgument);
    opt.reps = 3;
    opt.solvers = {SolverId::cholesky};
    opt.resolutions = {128};
    CHECK_THROWS_AS(benchmark_solvers(opt), InvalidArgument);
}

TEST_CASE("error map and heatmap export") {
    RasterImage a(4, 4, 2, 10.0), b(4, 4, 2, 10.0);
    b(1, 1, 0) = 14.0;
    b(1, 1, 1) = 12.0;
    const Plane e = error_map(a, b);
    CHECK(e(1, 1) == 3.0);
    CHECK(e(0, 0) == 0.0);

    const auto dir = std::filesystem::temp_directory_path() / "lapfield_heatmap_test";
    std::filesystem::create_directories(dir);
    write_heatmap_png(dir / "e.png", e);
    const auto back = read_png(dir / "e.png");
    CHECK(back(1, 1, 0) == 255.0);
    CHECK(back(0, 0, 0) == 0.0);
    write_heatmap_png(dir / "log.png", e, true);
    CHECK(read_png(dir / "log.png")(1, 1, 0) == 255.0);
    CHECK_THROWS_AS(write_heatmap_png(dir / "neg.png", random_plane(4, 4, 1), true), InvalidArgument);
    std::filesystem::remove_all(dir);
}
