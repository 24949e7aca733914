#include <gtest/gtest.h>

#include <png.h>

#include <random>

#include "octseg/image_io.hpp"
#include "octseg/phantom.hpp"
#include "test_support.hpp"

using namespace octseg;
using support::TempDir;
using graph::Boundary;
using graph::BoundaryLabel;

namespace {

ErrorCode load_error(const std::filesystem::path& p) {
    try {
        io::load_grayscale(p);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error for " << p;
    return ErrorCode::IoError;
}

layers::SegmentationResult small_result() {
    layers::SegmentationResult r;
    r.source_id = "small";
    r.rows = 12;
    r.cols = 3;
    r.ilm = {BoundaryLabel::ILM, {5, 5, 6}, 1.5};
    r.rnfl = {BoundaryLabel::RNFL, {7, 8, 8}, 2.5};
    r.rpe = {BoundaryLabel::RPE, {10, 10, 11}, 3.5};
    r.metrics = metrics::compute_metrics(ImageF(12, 3, 0.5), r.ilm, r.rnfl, r.rpe, {});
    return r;
}

int count_differing(const io::RgbImage& img, std::uint8_t background) {
    int n = 0;
    for (const io::Rgb& p : img.values()) n += (p.r != background || p.g != background || p.b != background) ? 1 : 0;
    return n;
}

}  // namespace

TEST(LoadGrayscale, BinaryPgmNormalized) {
    TempDir dir;
    support::write_file(dir / "a.pgm", std::string("P5\n2 2\n255\n") + std::string{'\x00', '\xff', '\x80', '\x40'});
    const BScan img = io::load_grayscale(dir / "a.pgm");
    ASSERT_EQ(img.rows(), 2);
    ASSERT_EQ(img.cols(), 2);
    EXPECT_EQ(img(0, 0), 0.0);
    EXPECT_EQ(img(0, 1), 1.0);
    EXPECT_EQ(img(1, 0), 128 / 255.0);
    EXPECT_EQ(img(1, 1), 64 / 255.0);
}

TEST(LoadGrayscale, AllZeroPgm) {
    TempDir dir;
    support::write_file(dir / "z.pgm", "P5\n16 16\n255\n" + std::string(256, '\0'));
    const BScan img = io::load_grayscale(dir / "z.pgm");
    EXPECT_EQ(img.rows(), 16);
    for (double v : img.pixels.values()) EXPECT_EQ(v, 0.0);
}

TEST(LoadGrayscale, AsciiPgmWithComment) {
    TempDir dir;
    support::write_file(dir / "a.pgm", "P2\n# note\n3 1\n10\n0 5 10\n");
    const BScan img = io::load_grayscale(dir / "a.pgm");
    EXPECT_EQ(img(0, 1), 0.5);
    EXPECT_EQ(img(0, 2), 1.0);
}

TEST(LoadGrayscale, Errors) {
    TempDir dir;
    EXPECT_EQ(load_error(dir / "missing.pgm"), ErrorCode::FileNotFound);
    support::write_file(dir / "empty.pgm", "");
    EXPECT_EQ(load_error(dir / "empty.pgm"), ErrorCode::EmptyImage);
    support::write_file(dir / "zero.pgm", "P5\n0 4\n255\n");
    EXPECT_EQ(load_error(dir / "zero.pgm"), ErrorCode::EmptyImage);
    support::write_file(dir / "short.pgm", "P5\n4 4\n255\nabc");
    EXPECT_EQ(load_error(dir / "short.pgm"), ErrorCode::InvalidImage);
    support::write_file(dir / "color.ppm", "P6\n1 1\n255\nabc");
    EXPECT_EQ(load_error(dir / "color.ppm"), ErrorCode::UnsupportedFormat);
    support::write_file(dir / "fake.png", "\x89PNG\r\n\x1a\n garbage");
    EXPECT_EQ(load_error(dir / "fake.png"), ErrorCode::InvalidImage);
}

TEST(SaveLoad, PgmRoundTrip8And16Bit) {
    TempDir dir;
    std::mt19937_64 rng(41);
    const ImageF img = support::random_image(9, 7, rng);
    for (unsigned maxval : {255u, 65535u}) {
        io::save_pgm(dir / "r.pgm", img, maxval);
        const BScan back = io::load_grayscale(dir / "r.pgm");
        for (std::size_t i = 0; i < img.size(); ++i)
            EXPECT_NEAR(back.pixels.values()[i], img.values()[i], 0.5 / maxval + 1e-12);
    }
}

TEST(SaveLoad, PngRoundTrip8And16Bit) {
    TempDir dir;
    std::mt19937_64 rng(42);
    const ImageF img = support::random_image(9, 7, rng);
    for (int depth : {8, 16}) {
        io::save_png_gray(dir / "r.png", img, depth);
        const BScan back = io::load_grayscale(dir / "r.png");
        const double maxval = depth == 8 ? 255.0 : 65535.0;
        for (std::size_t i = 0; i < img.size(); ++i)
            EXPECT_NEAR(back.pixels.values()[i], img.values()[i], 0.5 / maxval + 1e-12) << depth;
    }
}

TEST(Boundaries, CsvRows) {
    const std::string csv = io::boundaries_csv({small_result().ilm, small_result().rnfl, small_result().rpe});
    EXPECT_EQ(csv, "column,ilm_row,rnfl_row,rpe_row\n0,5,7,10\n1,5,8,10\n2,6,8,11\n");
}

TEST(Boundaries, CsvRoundTrip) {
    TempDir dir;
    const layers::SegmentationResult r = small_result();
    io::write_boundaries(r, dir / "b.csv", io::BoundaryFormat::Csv);
    const graph::BoundarySet back = io::read_boundaries_csv(dir / "b.csv");
    EXPECT_EQ(back.ilm.row, r.ilm.row);
    EXPECT_EQ(back.rnfl.row, r.rnfl.row);
    EXPECT_EQ(back.rpe.row, r.rpe.row);
}

TEST(Boundaries, JsonContent) {
    TempDir dir;
    const layers::SegmentationResult r = small_result();
    io::write_boundaries(r, dir / "b.json", io::BoundaryFormat::Json);
    const auto j = nlohmann::json::parse(support::read_file(dir / "b.json"));
    EXPECT_EQ(j["source_id"], "small");
    EXPECT_EQ(j["boundaries"]["ilm"].get<std::vector<int>>(), r.ilm.row);
    EXPECT_EQ(j["boundaries"]["rpe"].get<std::vector<int>>(), r.rpe.row);
    EXPECT_EQ(j["costs"]["rnfl"].get<double>(), 2.5);
    EXPECT_EQ(j["metrics"]["total_thickness"]["px"].get<std::vector<int>>(), (std::vector<int>{5, 5, 5}));
    EXPECT_TRUE(j["corrections"].is_array());
}

TEST(Boundaries, EmptyResultRejected) {
    TempDir dir;
    layers::SegmentationResult empty;
    try {
        io::write_boundaries(empty, dir / "e.csv", io::BoundaryFormat::Csv);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Precondition);
    }
    EXPECT_FALSE(std::filesystem::exists(dir / "e.csv"));
}

TEST(Boundaries, MalformedCsvRejected) {
    TempDir dir;
    support::write_file(dir / "bad.csv", "column,ilm_row,rnfl_row,rpe_row\n0,1,2\n");
    EXPECT_THROW(io::read_boundaries_csv(dir / "bad.csv"), Error);
    support::write_file(dir / "gap.csv", "column,ilm_row,rnfl_row,rpe_row\n0,1,2,3\n2,1,2,3\n");
    EXPECT_THROW(io::read_boundaries_csv(dir / "gap.csv"), Error);
    support::write_file(dir / "head.csv", "a,b,c,d\n0,1,2,3\n");
    EXPECT_THROW(io::read_boundaries_csv(dir / "head.csv"), Error);
}

TEST(Metrics, CsvWithMicrometres) {
    layers::SegmentationResult r = small_result();
    metrics::MetricsConfig cfg;
    cfg.axial_scale = 2.0;
    r.metrics = metrics::compute_metrics(ImageF(12, 3, 0.5), r.ilm, r.rnfl, r.rpe, cfg);
    const std::string csv = io::metrics_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "column,rnfl_px,total_px,inner_px,rnfl_um,total_um,inner_um");
    EXPECT_NE(csv.find("\n0,2,5,3,4,10,6\n"), std::string::npos);
}

TEST(Overlay, FlatBoundariesColorThreeRows) {
    const ImageF img(20, 8, 0.5);
    const Boundary ilm{BoundaryLabel::ILM, std::vector<int>(8, 3), 0.0};
    const Boundary rnfl{BoundaryLabel::RNFL, std::vector<int>(8, 6), 0.0};
    const Boundary rpe{BoundaryLabel::RPE, std::vector<int>(8, 15), 0.0};
    const io::RgbImage out = io::render_overlay(img, {ilm, rnfl, rpe});
    EXPECT_EQ(count_differing(out, 128), 3 * 8);
    EXPECT_EQ(out(3, 0).r, 255);
    EXPECT_EQ(out(6, 0).g, 255);
    EXPECT_EQ(out(15, 0).b, 255);
}

TEST(Overlay, LaterBoundaryWinsOnOverlap) {
    const ImageF img(20, 8, 0.5);
    const Boundary ilm{BoundaryLabel::ILM, std::vector<int>(8, 3), 0.0};
    const Boundary rpe{BoundaryLabel::RPE, std::vector<int>(8, 15), 0.0};
    const io::RgbImage out = io::render_overlay(img, {ilm, ilm, rpe});
    EXPECT_LT(count_differing(out, 128), 3 * 8);
    EXPECT_EQ(out(3, 2).r, 0);
    EXPECT_EQ(out(3, 2).g, 255);
}

TEST(Overlay, OutOfBoundsRowRejected) {
    const ImageF img(20, 2, 0.5);
    const Boundary ok{BoundaryLabel::ILM, {3, 3}, 0.0};
    const Boundary bad{BoundaryLabel::RPE, {3, 20}, 0.0};
    try {
        io::render_overlay(img, {ok, ok, bad});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Precondition);
    }
}

TEST(Overlay, WrittenPngDecodes) {
    TempDir dir;
    const layers::SegmentationResult r = small_result();
    io::write_overlay(BScan(ImageF(12, 3, 0.5)), r, dir / "o.png");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    ASSERT_TRUE(png_image_begin_read_from_file(&image, (dir / "o.png").c_str()));
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
    ASSERT_TRUE(png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr));
    EXPECT_EQ(image.width, 3u);
    EXPECT_EQ(image.height, 12u);
    const std::size_t ilm_px = (5 * 3 + 0) * 3;
    EXPECT_EQ(buf[ilm_px], 255);
    EXPECT_EQ(buf[ilm_px + 1], 0);
}

TEST(WriteAtomic, NoTempFilesLeft) {
    TempDir dir;
    io::write_text_atomic(dir / "t.txt", "hello");
    io::write_text_atomic(dir / "t.txt", "again");
    EXPECT_EQ(support::read_file(dir / "t.txt"), "again");
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) files += e.is_regular_file() ? 1 : 0;
    EXPECT_EQ(files, 1);
}
