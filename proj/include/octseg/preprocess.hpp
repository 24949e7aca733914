#pragma once

// Phase-1 front half: smoothing, per-column median, binarization, morphological
// cleanup, and extraction of the per-column edge that bounds the RNFL search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/image.hpp"

namespace octseg::preprocess {

enum class BinarizeMethod { Fixed, Otsu };

struct PreprocessConfig {
    int smooth_kernel = 5;
    double smooth_sigma = 1.5;
    int column_median_window = 7;
    BinarizeMethod binarize_method = BinarizeMethod::Otsu;
    std::optional<double> fixed_threshold;
    int closing_se = 2;
    int min_area_px = 500;
    // Area floor of the second removal pass; unset means "image column count".
    std::optional<int> band_area_floor;

    void validate() const {
        auto odd_pos = [](int w) { return w >= 1 && w % 2 == 1; };
        require(odd_pos(smooth_kernel), ErrorCode::ConfigError, "preprocess.smooth_kernel must be odd and >= 1");
        require(smooth_sigma > 0.0 && std::isfinite(smooth_sigma), ErrorCode::ConfigError,
                "preprocess.smooth_sigma must be > 0");
        require(odd_pos(column_median_window), ErrorCode::ConfigError,
                "preprocess.column_median_window must be odd and >= 1");
        require(closing_se >= 1, ErrorCode::ConfigError, "preprocess.closing_se must be >= 1");
        require(min_area_px >= 1, ErrorCode::ConfigError, "preprocess.min_area_px must be >= 1");
        require(!band_area_floor || *band_area_floor >= 1, ErrorCode::ConfigError,
                "preprocess.band_area_floor must be >= 1");
        if (fixed_threshold) {
            require(*fixed_threshold >= 0.0 && *fixed_threshold <= 1.0, ErrorCode::ConfigError,
                    "preprocess.fixed_threshold must lie in [0,1]");
        }
        require(binarize_method != BinarizeMethod::Fixed || fixed_threshold.has_value(), ErrorCode::ConfigError,
                "preprocess.binarize_method=fixed requires fixed_threshold");
    }
};

// Per-column row of the topmost remaining bright pixel; nullopt where the column is empty.
struct Phase1Edge {
    std::vector<std::optional<int>> first_bright_row;

    int cols() const noexcept { return static_cast<int>(first_bright_row.size()); }
    std::size_t present_count() const {
        return static_cast<std::size_t>(
            std::count_if(first_bright_row.begin(), first_bright_row.end(), [](auto& r) { return r.has_value(); }));
    }
};

// ---------------------------------------------------------------------------
// Filters

namespace detail {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

inline std::vector<double> gaussian_kernel_1d(int size, double sigma) {
    const int half = size / 2;
    std::vector<double> k(static_cast<std::size_t>(size));
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + half)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace detail

// Normalized 2-D Gaussian kernel (outer product of the 1-D kernel). Exposed for tests.
inline Grid<double> gaussian_kernel_2d(int size, double sigma) {
    const auto k = detail::gaussian_kernel_1d(size, sigma);
    Grid<double> out(size, size);
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) out(i, j) = k[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(j)];
    return out;
}

// Separable Gaussian with replicate borders, clamped to [0,1].
inline ImageF smooth(const ImageF& img, const PreprocessConfig& cfg) {
    const int rows = img.rows(), cols = img.cols();
    if (img.empty()) return img;
    const auto k = detail::gaussian_kernel_1d(cfg.smooth_kernel, cfg.smooth_sigma);
    const int half = cfg.smooth_kernel / 2;

    ImageF horiz(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int j = -half; j <= half; ++j)
                acc += k[static_cast<std::size_t>(j + half)] * img(r, detail::clamp_index(c + j, cols));
            horiz(r, c) = acc;
        }
    }
    ImageF out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i)
                acc += k[static_cast<std::size_t>(i + half)] * horiz(detail::clamp_index(r + i, rows), c);
            out(r, c) = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

inline BScan smooth(const BScan& img, const PreprocessConfig& cfg) {
    return BScan(smooth(img.pixels, cfg), img.source_id);
}

// Running median down each column with replicate padding.
inline ImageF column_median(const ImageF& img, int window) {
    require(window >= 1 && window % 2 == 1, ErrorCode::InvalidArgument, "median window must be odd and >= 1");
    require(window <= img.rows(), ErrorCode::InvalidArgument,
            "median window " + std::to_string(window) + " exceeds image height " + std::to_string(img.rows()));
    const int rows = img.rows(), cols = img.cols(), half = window / 2;
    ImageF out(rows, cols);
    std::vector<double> buf(static_cast<std::size_t>(window));
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            for (int i = -half; i <= half; ++i)
                buf[static_cast<std::size_t>(i + half)] = img(detail::clamp_index(r + i, rows), c);
            std::nth_element(buf.begin(), buf.begin() + half, buf.end());
            out(r, c) = buf[static_cast<std::size_t>(half)];
        }
    }
    return out;
}

inline BScan column_median(const BScan& img, const PreprocessConfig& cfg) {
    return BScan(column_median(img.pixels, cfg.column_median_window), img.source_id);
}

// ---------------------------------------------------------------------------
// Binarization

inline constexpr int kHistogramBins = 256;

inline int histogram_bin(double v) {
    return std::clamp(static_cast<int>(std::floor(v * kHistogramBins)), 0, kHistogramBins - 1);
}

struct ThresholdResult {
    double threshold = 0.5;
    // Set when Otsu had no valid cut (single occupied bin); threshold then falls back to 0.5.
    bool degenerate = false;
};

// Otsu's threshold over a 256-bin histogram. Pixels in bins above the chosen cut
// are foreground, so the returned intensity threshold is (cut + 1) / 256.
inline ThresholdResult otsu_threshold(const ImageF& img) {
    std::array<double, kHistogramBins> hist{};
    for (double v : img.values()) hist[static_cast<std::size_t>(histogram_bin(v))] += 1.0;
    const double total = static_cast<double>(img.size());
    if (total == 0.0) return {0.5, true};

    double sum_all = 0.0;
    for (int i = 0; i < kHistogramBins; ++i) sum_all += i * hist[static_cast<std::size_t>(i)];

    double w0 = 0.0, sum0 = 0.0, best = 0.0;
    int best_cut = -1;
    for (int t = 0; t < kHistogramBins - 1; ++t) {
        w0 += hist[static_cast<std::size_t>(t)];
        sum0 += t * hist[static_cast<std::size_t>(t)];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_cut = t;
        }
    }
    if (best_cut < 0) return {0.5, true};
    return {static_cast<double>(best_cut + 1) / kHistogramBins, false};
}

inline BinaryImage threshold_image(const ImageF& img, double threshold) {
    BinaryImage out(img.rows(), img.cols());
    auto src = img.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
    return out;
}

struct BinarizeResult {
    BinaryImage mask;
    ThresholdResult threshold;
};

inline BinarizeResult binarize_detailed(const ImageF& img, const PreprocessConfig& cfg) {
    ThresholdResult t;
    if (cfg.binarize_method == BinarizeMethod::Fixed) {
        require(cfg.fixed_threshold.has_value(), ErrorCode::ConfigError, "fixed binarization needs a threshold");
        t.threshold = *cfg.fixed_threshold;
    } else {
        t = otsu_threshold(img);
    }
    return {threshold_image(img, t.threshold), t};
}

inline BinaryImage binarize(const ImageF& img, const PreprocessConfig& cfg) {
    return binarize_detailed(img, cfg).mask;
}

// ---------------------------------------------------------------------------
// Morphology

namespace detail {

// Square structuring element covering offsets [0, side-1]^2 (origin at the top-left cell).
// The operation runs on a canvas padded by side-1 on every edge so the result equals the
// unbounded-plane closing restricted to the image window.
inline BinaryImage padded(const BinaryImage& img, int pad) {
    BinaryImage out(img.rows() + 2 * pad, img.cols() + 2 * pad);
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) out(r + pad, c + pad) = img(r, c);
    return out;
}

// dilation: out(p) = OR_{b in [0,s)^2} in(p - b)
inline BinaryImage dilate_square(const BinaryImage& in, int side) {
    const int rows = in.rows(), cols = in.cols();
    BinaryImage horiz(rows, cols), out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            std::uint8_t v = 0;
            for (int b = 0; b < side && !v; ++b)
                if (c - b >= 0) v = in(r, c - b);
            horiz(r, c) = v;
        }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            std::uint8_t v = 0;
            for (int b = 0; b < side && !v; ++b)
                if (r - b >= 0) v = horiz(r - b, c);
            out(r, c) = v;
        }
    return out;
}

// erosion: out(p) = AND_{b in [0,s)^2} in(p + b); outside the canvas counts as false
inline BinaryImage erode_square(const BinaryImage& in, int side) {
    const int rows = in.rows(), cols = in.cols();
    BinaryImage horiz(rows, cols), out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            std::uint8_t v = 1;
            for (int b = 0; b < side && v; ++b) v = (c + b < cols) ? in(r, c + b) : 0;
            horiz(r, c) = v;
        }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            std::uint8_t v = 1;
            for (int b = 0; b < side && v; ++b) v = (r + b < rows) ? horiz(r + b, c) : 0;
            out(r, c) = v;
        }
    return out;
}

}  // namespace detail

// Morphological closing (dilate then erode) with a se_side x se_side square.
inline BinaryImage close(const BinaryImage& img, int se_side) {
    require(se_side >= 1, ErrorCode::InvalidArgument, "structuring element side must be >= 1");
    if (se_side == 1 || img.empty()) return img;
    const int pad = se_side - 1;
    const BinaryImage closed = detail::erode_square(detail::dilate_square(detail::padded(img, pad), se_side), se_side);
    BinaryImage out(img.rows(), img.cols());
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) out(r, c) = closed(r + pad, c + pad);
    return out;
}

// ---------------------------------------------------------------------------
// Connected components (8-connected)

struct Component {
    int label = 0;
    int area = 0;
    int top_row = 0;     // smallest row of any pixel
    int top_col = 0;     // leftmost column among pixels on top_row
    int min_col = 0;
    int max_col = 0;
};

struct Labeling {
    Grid<int> labels;  // 0 = background, otherwise 1-based component label
    std::vector<Component> components;  // components[i].label == i + 1
};

namespace detail {

struct DisjointSet {
    std::vector<int> parent;
    int make() {
        parent.push_back(static_cast<int>(parent.size()));
        return static_cast<int>(parent.size()) - 1;
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) std::swap(a, b);
        parent[static_cast<std::size_t>(a)] = b;
    }
};

}  // namespace detail

// Two-pass union-find labeling. Labels are numbered in raster order of each component's
// first pixel, so the output is deterministic.
inline Labeling label_components(const BinaryImage& img) {
    const int rows = img.rows(), cols = img.cols();
    Grid<int> provisional(rows, cols, -1);
    detail::DisjointSet ds;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!img(r, c)) continue;
            int current = -1;
            // Already-visited 8-neighbours: W, NW, N, NE.
            constexpr std::array<std::array<int, 2>, 4> prior{{{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};
            for (auto [dr, dc] : prior) {
                const int rr = r + dr, cc = c + dc;
                if (!img.in_bounds(rr, cc) || provisional(rr, cc) < 0) continue;
                if (current < 0)
                    current = provisional(rr, cc);
                else
                    ds.unite(current, provisional(rr, cc));
            }
            provisional(r, c) = current < 0 ? ds.make() : current;
        }
    }

    Labeling out{Grid<int>(rows, cols, 0), {}};
    std::vector<int> root_to_label(ds.parent.size(), 0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (provisional(r, c) < 0) continue;
            const auto root = static_cast<std::size_t>(ds.find(provisional(r, c)));
            if (root_to_label[root] == 0) {
                out.components.push_back({static_cast<int>(out.components.size()) + 1, 0, r, c, c, c});
                root_to_label[root] = static_cast<int>(out.components.size());
            }
            const int label = root_to_label[root];
            out.labels(r, c) = label;
            Component& comp = out.components[static_cast<std::size_t>(label - 1)];
            ++comp.area;
            comp.min_col = std::min(comp.min_col, c);
            comp.max_col = std::max(comp.max_col, c);
        }
    }
    return out;
}

// Clears every 8-connected component with fewer than min_area pixels.
inline BinaryImage remove_small(const BinaryImage& img, int min_area) {
    require(min_area >= 1, ErrorCode::InvalidArgument, "min_area must be >= 1");
    const Labeling lab = label_components(img);
    BinaryImage out = img;
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            const int label = lab.labels(r, c);
            if (label > 0 && lab.components[static_cast<std::size_t>(label - 1)].area < min_area) out(r, c) = 0;
        }
    return out;
}

inline Phase1Edge first_bright_rows(const BinaryImage& mask) {
    Phase1Edge edge;
    edge.first_bright_row.assign(static_cast<std::size_t>(mask.cols()), std::nullopt);
    for (int c = 0; c < mask.cols(); ++c)
        for (int r = 0; r < mask.rows(); ++r)
            if (mask(r, c)) {
                edge.first_bright_row[static_cast<std::size_t>(c)] = r;
                break;
            }
    return edge;
}

// Removes the first (topmost) white region: the component holding the globally topmost
// true pixel, ties to the leftmost column. Components that were split off the same band
// (vessel shadows, a fovea pinch) are removed with it: any remaining component that sits
// above another remaining component in at least half of its columns.
inline BinaryImage remove_top_band(const BinaryImage& mask, bool include_fragments = true) {
    const Labeling lab = label_components(mask);
    if (lab.components.empty()) return mask;

    const Component* top = &lab.components.front();
    for (const Component& comp : lab.components)
        if (comp.top_row < top->top_row || (comp.top_row == top->top_row && comp.top_col < top->top_col)) top = &comp;

    std::vector<std::uint8_t> removed(lab.components.size() + 1, 0);
    removed[static_cast<std::size_t>(top->label)] = 1;

    if (include_fragments) {
        const int rows = mask.rows(), cols = mask.cols();
        std::vector<int> columns_total(removed.size(), 0), columns_stacked(removed.size(), 0);
        for (int c = 0; c < cols; ++c) {
            // Walk the column bottom-up, tracking whether a different surviving component lies below.
            int deepest_label_below = 0;
            std::vector<int> seen_in_column;
            for (int r = rows - 1; r >= 0; --r) {
                const int label = lab.labels(r, c);
                if (label == 0 || removed[static_cast<std::size_t>(label)]) continue;
                if (std::find(seen_in_column.begin(), seen_in_column.end(), label) == seen_in_column.end()) {
                    seen_in_column.push_back(label);
                    ++columns_total[static_cast<std::size_t>(label)];
                    if (deepest_label_below != 0 && deepest_label_below != label)
                        ++columns_stacked[static_cast<std::size_t>(label)];
                }
                if (deepest_label_below == 0) deepest_label_below = label;
            }
        }
        for (const Component& comp : lab.components) {
            const auto l = static_cast<std::size_t>(comp.label);
            if (!removed[l] && columns_total[l] > 0 && 2 * columns_stacked[l] >= columns_total[l]) removed[l] = 1;
        }
    }

    BinaryImage out = mask;
    for (int r = 0; r < mask.rows(); ++r)
        for (int c = 0; c < mask.cols(); ++c)
            if (removed[static_cast<std::size_t>(lab.labels(r, c))]) out(r, c) = 0;
    return out;
}

struct Phase1Result {
    BinaryImage mask;  // cleaned mask after the top band was deleted
    Phase1Edge edge;
    ThresholdResult threshold;
};

// smooth -> column median -> binarize -> close -> remove_small(min_area) -> close ->
// remove_small(band floor) -> delete the first white region -> per-column first bright row.
// Throws Phase1Empty when nothing survives.
inline Phase1Result phase1_pipeline(const BScan& img, const PreprocessConfig& cfg) {
    cfg.validate();
    const ImageF smoothed = smooth(img.pixels, cfg);
    const int largest_odd = img.rows() % 2 == 1 ? img.rows() : img.rows() - 1;
    const ImageF filtered = column_median(smoothed, std::min(cfg.column_median_window, std::max(1, largest_odd)));
    BinarizeResult bin = binarize_detailed(filtered, cfg);

    BinaryImage mask = close(bin.mask, cfg.closing_se);
    mask = remove_small(mask, cfg.min_area_px);
    mask = close(mask, cfg.closing_se);
    mask = remove_small(mask, cfg.band_area_floor.value_or(std::max(1, img.cols())));
    mask = remove_top_band(mask);

    Phase1Edge edge = first_bright_rows(mask);
    require(edge.present_count() > 0, ErrorCode::Phase1Empty, "no bright region survives below the top band");
    return {std::move(mask), std::move(edge), bin.threshold};
}

}  // namespace octseg::preprocess
