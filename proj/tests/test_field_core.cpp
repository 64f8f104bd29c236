#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lapfield/image_io.hpp"
#include "lapfield/laplacian.hpp"
#include "lapfield/parallel.hpp"
#include "test_support.hpp"

using namespace lapfield;
using namespace lapfield::testing;

TEST_CASE("stencil coefficients") {
    const auto k0 = stencil(StencilId::k0);
    CHECK(k0.c == std::array<double, 9>{0, 1, 0, 1, -4, 1, 0, 1, 0});

    const auto k1 = stencil(StencilId::k1);
    for (int i = 0; i < 9; ++i) CHECK(k1.c[i] == (i == 4 ? -4.0 : 0.5));

    const auto k2 = stencil(StencilId::k2);
    CHECK(k2.at(-1, -1) == -0.25);
    CHECK(k2.at(0, 1) == 1.25);

    const auto k3 = stencil(StencilId::k3);
    CHECK(k3.at(-1, -1) == doctest::Approx(1.0 / 3.0));
    CHECK(k3.at(1, 0) == doctest::Approx(2.0 / 3.0));

    for (auto id : {StencilId::k0, StencilId::k1, StencilId::k2, StencilId::k3}) {
        const auto s = stencil(id);
        CHECK(s.center() == -4.0);
        double sum = 0.0;
        for (double v : s.c) sum += v;
        CHECK(std::abs(sum) < 1e-15);
        CHECK(parse_stencil_id(to_string(id)) == id);
    }
    CHECK_FALSE(parse_stencil_id("k4").has_value());
}

TEST_CASE("laplacian of a constant image under zero padding") {
    RasterImage img(8, 8, 1, 5.0);
    const auto f = laplacian(img);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            const bool edge_r = r == 0 || r == 7, edge_c = c == 0 || c == 7;
            const double expected = edge_r && edge_c ? -10.0 : (edge_r || edge_c ? -5.0 : 0.0);
            CHECK(f(r, c, 0) == expected);
        }

    for (auto id : {StencilId::k1, StencilId::k2, StencilId::k3}) {
        const auto g = laplacian(img, stencil(id));
        for (int r = 1; r < 7; ++r)
            for (int c = 1; c < 7; ++c) CHECK(std::abs(g(r, c, 0)) < 1e-12);
    }
}

TEST_CASE("laplacian of a quadratic is 4 in the interior") {
    RasterImage img(9, 11, 1);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 11; ++j) img(i, j, 0) = i * i + j * j;
    const auto f = laplacian(img);
    for (int i = 1; i < 8; ++i)
        for (int j = 1; j < 10; ++j) CHECK(f(i, j, 0) == 4.0);
}

TEST_CASE("laplacian equals the dense matrix product") {
    for (auto id : {StencilId::k0, StencilId::k1, StencilId::k2, StencilId::k3}) {
        const auto st = stencil(id);
        const Plane u = random_plane(4, 4, 11);
        const auto a = dense_laplacian_matrix(4, 4, st);
        const Plane expected = dense_multiply(a, u);
        RasterImage img(std::vector<Plane>{u});
        CHECK(max_abs_diff(laplacian(img, st).channel(0), expected) < 1e-12);
    }
}

TEST_CASE("matrix-free operator matches laplacian bit for bit") {
    for (std::uint32_t s = 0; s < 100; ++s) {
        const int rows = 3 + static_cast<int>(s % 9), cols = 3 + static_cast<int>((s * 7) % 13);
        const auto st = stencil(static_cast<StencilId>(s % 4));
        auto field = random_field(rows, cols, 1 + static_cast<int>(s % 3), s);
        const auto mf = apply_laplacian_matrix_free(field, st);
        const auto lap = laplacian(retag<IntensityTag>(field), st);
        for (int c = 0; c < mf.channels(); ++c) {
            auto a = mf.channel(c).values();
            auto b = lap.channel(c).values();
            REQUIRE(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("zero input gives zero output") {
    ScalarField z(6, 7, 2);
    const auto out = apply_laplacian_matrix_free(z, stencil(StencilId::k0));
    for (const auto& p : out.planes()) CHECK(max_abs(p) == 0.0);
}

TEST_CASE("linearity") {
    const auto st = stencil(StencilId::k3);
    for (std::uint32_t s = 0; s < 20; ++s) {
        const Plane u = random_plane(13, 10, s), v = random_plane(13, 10, 1000 + s);
        const double a = 0.5 + s, b = -3.0 + 0.25 * s;
        Plane mix(13, 10);
        for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * u.values()[i] + b * v.values()[i];
        const Plane lhs = apply_laplacian(mix, st);
        const Plane lu = apply_laplacian(u, st), lv = apply_laplacian(v, st);
        for (std::size_t i = 0; i < mix.size(); ++i) {
            const double rhs = a * lu.values()[i] + b * lv.values()[i];
            CHECK(std::abs(lhs.values()[i] - rhs) <= 1e-6 * std::max(1.0, std::abs(rhs)));
        }
    }
}

TEST_CASE("k0 locality: one pixel touches at most five outputs") {
    const auto st = stencil(StencilId::k0);
    const Plane base = random_plane(10, 10, 3);
    const Plane lb = apply_laplacian(base, st);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 10; ++c) {
            Plane p = base;
            p(r, c) += 1.0;
            const Plane lp = apply_laplacian(p, st);
            int changed = 0;
            for (std::size_t i = 0; i < lp.size(); ++i) changed += lp.values()[i] != lb.values()[i];
            CHECK(changed <= 5);
            CHECK(changed >= 3);
        }
}

TEST_CASE("channels are processed independently") {
    auto img = random_byte_image(12, 9, 3, 42);
    for (int threads : {1, 3}) {
        set_thread_count(threads);
        const auto f = laplacian(img);
        for (int c = 0; c < 3; ++c) {
            RasterImage single(std::vector<Plane>{img.channel(c)});
            CHECK(laplacian(single).channel(0) == f.channel(c));
        }
    }
    set_thread_count(1);
}

TEST_CASE("grids smaller than 3x3 are rejected") {
    CHECK_THROWS_AS(laplacian(RasterImage(2, 5, 1)), InvalidArgument);
    CHECK_THROWS_AS(laplacian(RasterImage(5, 2, 1)), InvalidArgument);
    CHECK_NOTHROW(laplacian(RasterImage(3, 3, 1)));
}

TEST_CASE("png roundtrip") {
    const auto dir = std::filesystem::temp_directory_path() / "lapfield_png_test";
    std::filesystem::create_directories(dir);

    auto img = random_byte_image(17, 23, 3, 9);
    write_png(dir / "rgb8.png", img);
    CHECK(read_png(dir / "rgb8.png") == img);

    auto gray = random_byte_image(5, 6, 1, 10);
    gray(0, 0, 0) = 300.0;  // clamped on export
    gray(0, 1, 0) = -4.0;
    write_png(dir / "gray16.png", gray, PngDepth::bits16);
    const auto back = read_png(dir / "gray16.png");
    CHECK(back(0, 0, 0) == doctest::Approx(255.0));
    CHECK(back(0, 1, 0) == 0.0);
    CHECK(back(3, 3, 0) == doctest::Approx(gray(3, 3, 0)).epsilon(1e-9));

    CHECK_THROWS_AS(read_png(dir / "missing.png"), ImageIoError);
    {
        std::ofstream bad(dir / "bad.png");
        bad << "not a png";
    }
    CHECK_THROWS_AS(read_png(dir / "bad.png"), ImageIoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("bundled natural images load") {
    const auto files = list_png_files(std::filesystem::path(LAPFIELD_TESTDATA_DIR) / "natural");
    REQUIRE(files.size() == 10);
    for (const auto& f : files) {
        const auto img = read_png(f);
        CHECK(img.height() == 256);
        CHECK(img.width() == 256);
        CHECK((img.channels() == 1 || img.channels() == 3));
        CHECK(promote_channels(img, 3).channels() == 3);
    }
}
