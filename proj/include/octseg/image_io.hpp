#pragma once

// Grayscale PGM/PNG input, and boundary, metrics and overlay output.

#include <png.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "octseg/error.hpp"
#include "octseg/graph_search.hpp"
#include "octseg/image.hpp"
#include "octseg/layers.hpp"

namespace octseg::io {

namespace fs = std::filesystem;
using graph::Boundary;
using graph::BoundaryLabel;
using graph::BoundarySet;
using layers::SegmentationResult;

enum class BoundaryFormat { Csv, Json };

// ---------------------------------------------------------------------------
// Atomic file output

namespace detail {

inline fs::path temp_sibling(const fs::path& target) {
    static std::atomic<unsigned long long> counter{0};
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    return target.string() + ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
}

}  // namespace detail

// Runs `write(temp)` and renames the temporary file over `target`.
template <typename WriteFn>
void write_atomic(const fs::path& target, WriteFn&& write) {
    const fs::path temp = detail::temp_sibling(target);
    try {
        write(temp);
    } catch (...) {
        std::error_code ec;
        fs::remove(temp, ec);
        throw;
    }
    std::error_code ec;
    fs::rename(temp, target, ec);
    if (ec) {
        fs::remove(temp, ec);
        throw Error(ErrorCode::IoError, "cannot write " + target.string());
    }
}

inline void write_text_atomic(const fs::path& target, const std::string& text) {
    write_atomic(target, [&](const fs::path& temp) {
        std::ofstream out(temp, std::ios::binary);
        require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + target.string() + " for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.close();
        require(!out.fail(), ErrorCode::IoError, "write failed for " + target.string());
    });
}

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::error_code ec;
    require(fs::is_regular_file(path, ec), ErrorCode::FileNotFound, path.string());
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::FileNotFound, path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Header tokens of a PGM, skipping whitespace and '#' comments.
class PgmCursor {
public:
    PgmCursor(const std::vector<unsigned char>& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

    long long number() {
        skip_space();
        require(pos_ < bytes_.size() && std::isdigit(bytes_[pos_]), ErrorCode::InvalidImage,
                name_ + ": malformed PGM header");
        long long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            require(v <= 1'000'000'000LL, ErrorCode::InvalidImage, name_ + ": PGM value too large");
        }
        return v;
    }

    // The single whitespace byte separating the header from P5 raster data.
    void end_header() {
        require(pos_ < bytes_.size() && std::isspace(bytes_[pos_]), ErrorCode::InvalidImage,
                name_ + ": malformed PGM header");
        ++pos_;
    }

    std::size_t pos() const noexcept { return pos_; }

private:
    void skip_space() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    const std::string& name_;
    std::size_t pos_ = 2;
};

inline BScan decode_pgm(const std::vector<unsigned char>& bytes, const std::string& name) {
    const bool binary = bytes[1] == '5';
    PgmCursor cur(bytes, name);
    const long long cols = cur.number(), rows = cur.number(), maxval = cur.number();
    require(rows > 0 && cols > 0, ErrorCode::EmptyImage, name + ": zero-sized image");
    require(maxval >= 1 && maxval <= 65535, ErrorCode::UnsupportedFormat,
            name + ": PGM maxval must lie in [1,65535]");
    require(rows * cols <= 1LL << 28, ErrorCode::InvalidImage, name + ": image too large");

    ImageF px(static_cast<int>(rows), static_cast<int>(cols));
    auto out = px.values();
    const double scale = static_cast<double>(maxval);
    if (binary) {
        cur.end_header();
        const std::size_t width = maxval > 255 ? 2 : 1;
        require(bytes.size() - cur.pos() >= out.size() * width, ErrorCode::InvalidImage, name + ": truncated raster");
        const unsigned char* p = bytes.data() + cur.pos();
        for (std::size_t i = 0; i < out.size(); ++i) {
            const unsigned v = width == 2 ? (unsigned{p[2 * i]} << 8) | p[2 * i + 1] : p[i];
            require(v <= maxval, ErrorCode::InvalidImage, name + ": sample exceeds maxval");
            out[i] = v / scale;
        }
    } else {
        for (double& v : out) {
            const long long s = cur.number();
            require(s <= maxval, ErrorCode::InvalidImage, name + ": sample exceeds maxval");
            v = static_cast<double>(s) / scale;
        }
    }
    return BScan(std::move(px), name);
}

struct PngReadState {
    std::FILE* file = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    char message[256] = {};

    ~PngReadState() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (file) std::fclose(file);
    }
};

inline void png_error_to_buffer(png_structp png, png_const_charp msg) {
    auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
    std::snprintf(state->message, sizeof state->message, "%s", msg);
    png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

// Raw samples of a single-channel 8- or 16-bit PNG. Returns false and fills `state.message`
// if libpng reported an error. Owning containers live in the caller so the longjmp skips no
// destructors.
inline bool png_read_gray(PngReadState& state, std::uint32_t& width, std::uint32_t& height, int& depth,
                          int& color_type, std::vector<unsigned char>& raster, std::vector<png_bytep>& rows) {
    if (setjmp(png_jmpbuf(state.png))) return false;
    png_init_io(state.png, state.file);
    png_read_info(state.png, state.info);
    width = png_get_image_width(state.png, state.info);
    height = png_get_image_height(state.png, state.info);
    depth = png_get_bit_depth(state.png, state.info);
    color_type = png_get_color_type(state.png, state.info);
    if (color_type != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16) || width == 0 || height == 0) return true;
    const std::size_t stride = png_get_rowbytes(state.png, state.info);
    raster.resize(stride * height);
    rows.resize(height);
    for (std::uint32_t r = 0; r < height; ++r) rows[r] = raster.data() + r * stride;
    png_read_image(state.png, rows.data());
    png_read_end(state.png, nullptr);
    return true;
}

inline BScan decode_png(const fs::path& path, const std::string& name) {
    PngReadState state;
    state.file = std::fopen(path.string().c_str(), "rb");
    require(state.file != nullptr, ErrorCode::FileNotFound, name);
    state.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_to_buffer, png_ignore_warning);
    require(state.png != nullptr, ErrorCode::IoError, "libpng initialisation failed");
    state.info = png_create_info_struct(state.png);
    require(state.info != nullptr, ErrorCode::IoError, "libpng initialisation failed");

    std::uint32_t width = 0, height = 0;
    int depth = 0, color_type = 0;
    std::vector<unsigned char> raster;
    std::vector<png_bytep> rows;
    require(png_read_gray(state, width, height, depth, color_type, raster, rows), ErrorCode::InvalidImage,
            name + ": " + state.message);
    require(color_type == PNG_COLOR_TYPE_GRAY, ErrorCode::UnsupportedFormat,
            name + ": PNG must be single-channel grayscale");
    require(depth == 8 || depth == 16, ErrorCode::UnsupportedFormat, name + ": PNG bit depth must be 8 or 16");
    require(width > 0 && height > 0, ErrorCode::EmptyImage, name + ": zero-sized image");

    ImageF px(static_cast<int>(height), static_cast<int>(width));
    auto out = px.values();
    const double scale = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (depth == 16 ? (unsigned{raster[2 * i]} << 8) | raster[2 * i + 1] : raster[i]) / scale;
    return BScan(std::move(px), name);
}

}  // namespace detail

// Reads an 8/16-bit PGM (P2/P5) or single-channel PNG; samples are divided by the format's
// maximum value.
inline BScan load_grayscale(const fs::path& path) {
    const std::vector<unsigned char> bytes = detail::read_bytes(path);
    const std::string name = path.string();
    require(!bytes.empty(), ErrorCode::EmptyImage, name + ": empty file");
    static constexpr unsigned char png_magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(std::begin(png_magic), std::end(png_magic), bytes.begin()))
        return detail::decode_png(path, name);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5'))
        return detail::decode_pgm(bytes, name);
    throw Error(ErrorCode::UnsupportedFormat, name + ": expected PGM (P2/P5) or grayscale PNG");
}

// ---------------------------------------------------------------------------
// Image output

inline std::uint16_t quantize(double v, unsigned maxval) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
}

// Binary PGM (P5); `maxval` 255 writes one byte per sample, larger values two (big-endian).
inline void save_pgm(const fs::path& path, const ImageF& img, unsigned maxval = 255) {
    require(maxval >= 1 && maxval <= 65535, ErrorCode::InvalidArgument, "PGM maxval must lie in [1,65535]");
    std::string data = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n" +
                       std::to_string(maxval) + "\n";
    data.reserve(data.size() + img.size() * 2);
    for (double v : img.values()) {
        const std::uint16_t q = quantize(v, maxval);
        if (maxval > 255) data.push_back(static_cast<char>(q >> 8));
        data.push_back(static_cast<char>(q & 0xff));
    }
    write_text_atomic(path, data);
}

namespace detail {

inline void write_png_file(const fs::path& path, int width, int height, int depth, int color_type,
                           const std::vector<unsigned char>& raster) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    if (color_type == PNG_COLOR_TYPE_RGB)
        image.format = PNG_FORMAT_RGB;
    else
        image.format = depth == 16 ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
    write_atomic(path, [&](const fs::path& temp) {
        const int ok = png_image_write_to_file(&image, temp.string().c_str(), 0, raster.data(), 0, nullptr);
        const std::string message = image.message;
        png_image_free(&image);
        require(ok != 0, ErrorCode::IoError, "cannot write " + path.string() + ": " + message);
    });
}

}  // namespace detail

// Single-channel PNG, 8- or 16-bit.
inline void save_png_gray(const fs::path& path, const ImageF& img, int bit_depth = 8) {
    require(bit_depth == 8 || bit_depth == 16, ErrorCode::InvalidArgument, "PNG bit depth must be 8 or 16");
    require(!img.empty(), ErrorCode::EmptyImage, "cannot write an empty image");
    std::vector<unsigned char> raster;
    if (bit_depth == 8) {
        raster.reserve(img.size());
        for (double v : img.values()) raster.push_back(static_cast<unsigned char>(quantize(v, 255)));
        detail::write_png_file(path, img.cols(), img.rows(), 8, PNG_COLOR_TYPE_GRAY, raster);
    } else {
        // The simplified writer takes native-endian 16-bit samples.
        raster.resize(img.size() * 2);
        auto* samples = reinterpret_cast<std::uint16_t*>(raster.data());
        std::size_t i = 0;
        for (double v : img.values()) samples[i++] = quantize(v, 65535);
        detail::write_png_file(path, img.cols(), img.rows(), 16, PNG_COLOR_TYPE_GRAY, raster);
    }
}

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kIlmColor{255, 0, 0};
inline constexpr Rgb kRnflColor{0, 255, 0};
inline constexpr Rgb kRpeColor{0, 0, 255};

using RgbImage = Grid<Rgb>;

// Grayscale background with one pixel per column for each of ILM, RNFL and RPE, drawn in
// that order so later boundaries cover earlier ones where they coincide.
inline RgbImage render_overlay(const ImageF& img, const BoundarySet& b) {
    const std::array<std::pair<const Boundary*, Rgb>, 3> layers{
        {{&b.ilm, kIlmColor}, {&b.rnfl, kRnflColor}, {&b.rpe, kRpeColor}}};
    for (const auto& [boundary, color] : layers) {
        require(boundary->cols() == img.cols(), ErrorCode::DimensionMismatch, "boundary width differs from image");
        for (int r : boundary->row)
            require(r >= 0 && r < img.rows(), ErrorCode::Precondition, "boundary row outside image");
    }
    RgbImage out(img.rows(), img.cols());
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            const auto v = static_cast<std::uint8_t>(quantize(img(r, c), 255));
            out(r, c) = {v, v, v};
        }
    for (const auto& [boundary, color] : layers)
        for (int c = 0; c < img.cols(); ++c) out((*boundary)[c], c) = color;
    return out;
}

inline void save_png_rgb(const fs::path& path, const RgbImage& img) {
    std::vector<unsigned char> raster;
    raster.reserve(img.size() * 3);
    for (const Rgb& p : img.values()) raster.insert(raster.end(), {p.r, p.g, p.b});
    detail::write_png_file(path, img.cols(), img.rows(), 8, PNG_COLOR_TYPE_RGB, raster);
}

inline void write_overlay(const BScan& bscan, const SegmentationResult& result, const fs::path& path) {
    save_png_rgb(path, render_overlay(bscan.pixels, {result.ilm, result.rnfl, result.rpe}));
}

// ---------------------------------------------------------------------------
// Boundary and metrics files

inline void check_boundaries(const BoundarySet& b) {
    require(b.ilm.cols() > 0, ErrorCode::Precondition, "boundaries are empty");
    require(b.rnfl.cols() == b.ilm.cols() && b.rpe.cols() == b.ilm.cols(), ErrorCode::DimensionMismatch,
            "boundaries differ in column count");
}

inline std::string boundaries_csv(const BoundarySet& b) {
    check_boundaries(b);
    std::ostringstream out;
    out << "column,ilm_row,rnfl_row,rpe_row\n";
    for (int c = 0; c < b.ilm.cols(); ++c) out << c << ',' << b.ilm[c] << ',' << b.rnfl[c] << ',' << b.rpe[c] << '\n';
    return out.str();
}

inline nlohmann::ordered_json profile_json(const metrics::ThicknessProfile& p) {
    nlohmann::ordered_json j;
    j["upper"] = p.upper_label;
    j["lower"] = p.lower_label;
    j["mean_px"] = p.mean();
    j["min_px"] = p.min();
    j["max_px"] = p.max();
    j["px"] = p.px;
    if (p.axial_scale) j["um"] = p.micrometres();
    return j;
}

inline nlohmann::ordered_json result_json(const SegmentationResult& r) {
    check_boundaries({r.ilm, r.rnfl, r.rpe});
    nlohmann::ordered_json j;
    j["source_id"] = r.source_id;
    j["rows"] = r.rows;
    j["cols"] = r.cols;
    j["boundaries"] = {{"ilm", r.ilm.row}, {"rnfl", r.rnfl.row}, {"rpe", r.rpe.row}};
    j["costs"] = {{"ilm", r.ilm.cost}, {"rnfl", r.rnfl.cost}, {"rpe", r.rpe.cost}};

    nlohmann::ordered_json m;
    m["axial_scale_um_per_px"] =
        r.metrics.rnfl.axial_scale ? nlohmann::ordered_json(*r.metrics.rnfl.axial_scale) : nlohmann::ordered_json();
    m["rnfl_thickness"] = profile_json(r.metrics.rnfl);
    m["total_thickness"] = profile_json(r.metrics.total);
    m["inner_thickness"] = profile_json(r.metrics.inner);
    m["rnfl_intensity"] = r.metrics.rnfl_intensity;
    m["retina_intensity"] = r.metrics.retina_intensity;
    m["rpe_intensity"] = r.metrics.rpe_intensity;
    j["metrics"] = m;

    auto corrections = nlohmann::ordered_json::array();
    for (const auto& c : r.corrections) {
        nlohmann::ordered_json e;
        e["first_column"] = c.first;
        e["last_column"] = c.last;
        e["source"] = std::string(layers::to_string(c.source));
        e["iteration"] = c.iteration;
        e["shift_px"] = c.shift_px;
        e["dark_fraction"] = c.dark_fraction;
        corrections.push_back(e);
    }
    j["corrections"] = corrections;
    j["flags"] = r.flags.names();
    j["binarize_threshold"] = r.binarize_threshold;
    j["ilm_intensity_estimate"] = r.i_hat ? nlohmann::ordered_json(*r.i_hat) : nlohmann::ordered_json();
    j["discontinuities"] = r.discontinuities;
    return j;
}

inline void write_boundaries(const BoundarySet& b, const fs::path& path) { write_text_atomic(path, boundaries_csv(b)); }

inline void write_boundaries(const SegmentationResult& result, const fs::path& path, BoundaryFormat format) {
    if (format == BoundaryFormat::Csv)
        write_text_atomic(path, boundaries_csv({result.ilm, result.rnfl, result.rpe}));
    else
        write_text_atomic(path, result_json(result).dump(2) + "\n");
}

inline std::string metrics_csv(const SegmentationResult& r) {
    const auto& m = r.metrics;
    require(!m.rnfl.px.empty() && m.total.px.size() == m.rnfl.px.size() && m.inner.px.size() == m.rnfl.px.size(),
            ErrorCode::Precondition, "metrics are empty or inconsistent");
    const bool um = m.rnfl.axial_scale.has_value();
    std::ostringstream out;
    out << "column,rnfl_px,total_px,inner_px" << (um ? ",rnfl_um,total_um,inner_um" : "") << '\n';
    out.precision(17);
    for (std::size_t c = 0; c < m.rnfl.px.size(); ++c) {
        out << c << ',' << m.rnfl.px[c] << ',' << m.total.px[c] << ',' << m.inner.px[c];
        if (um) {
            const double s = *m.rnfl.axial_scale;
            out << ',' << m.rnfl.px[c] * s << ',' << m.total.px[c] * s << ',' << m.inner.px[c] * s;
        }
        out << '\n';
    }
    return out.str();
}

inline void write_metrics_csv(const SegmentationResult& result, const fs::path& path) {
    write_text_atomic(path, metrics_csv(result));
}

// Parses a `column,ilm_row,rnfl_row,rpe_row` file; columns must be 0..n-1 in order.
inline BoundarySet read_boundaries_csv(const fs::path& path) {
    std::error_code ec;
    require(fs::is_regular_file(path, ec), ErrorCode::FileNotFound, path.string());
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::FileNotFound, path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::InvalidArgument, path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == "column,ilm_row,rnfl_row,rpe_row", ErrorCode::InvalidArgument,
            path.string() + ": expected header column,ilm_row,rnfl_row,rpe_row");
    BoundarySet out{{BoundaryLabel::ILM, {}, 0.0}, {BoundaryLabel::RNFL, {}, 0.0}, {BoundaryLabel::RPE, {}, 0.0}};
    int expected = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::array<long long, 4> v{};
        char sep = 0;
        bool ok = static_cast<bool>(fields >> v[0]);
        for (std::size_t i = 1; ok && i < 4; ++i) ok = (fields >> sep >> v[i]) && sep == ',';
        ok = ok && (fields >> std::ws).eof();
        require(ok, ErrorCode::InvalidArgument, path.string() + ": malformed line '" + line + "'");
        require(v[0] == expected, ErrorCode::InvalidArgument,
                path.string() + ": column " + std::to_string(v[0]) + " out of sequence");
        ++expected;
        out.ilm.row.push_back(static_cast<int>(v[1]));
        out.rnfl.row.push_back(static_cast<int>(v[2]));
        out.rpe.row.push_back(static_cast<int>(v[3]));
    }
    require(expected > 0, ErrorCode::InvalidArgument, path.string() + ": no boundary rows");
    return out;
}

}  // namespace octseg::io
