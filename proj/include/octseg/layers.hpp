#pragma once

// Full B-scan segmentation: RPE approximation, ILM/RPE extraction, flattening, the
// Phase-1 RNFL region of interest with discontinuity handling, and the Phase-2
// intensity-based correction of the RNFL boundary.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/graph_search.hpp"
#include "octseg/image.hpp"
#include "octseg/metrics.hpp"
#include "octseg/preprocess.hpp"

namespace octseg::layers {

using graph::Boundary;
using graph::BoundaryLabel;
using graph::GradientField;
using graph::GradientPair;
using graph::GraphConfig;
using graph::RoiMask;
using preprocess::Phase1Edge;

struct LayersConfig {
    int rpe_half_band = 20;       // RPE search band around the brightest-row approximation
    int ilm_clearance = 10;       // ILM search stays strictly above rpe - clearance
    int rpe_median_window = 15;   // across-column median on the brightest-row track
    int edge_margin = 2;          // RNFL search stops this many rows above the Phase-1 edge
    int gap_threshold = 3;        // Phase-1 edge jumps larger than this are discontinuities
    int fallback_depth_divisor = 8;  // Phase-1-empty fallback ROI depth = rows / divisor
    bool presmooth_gradients = false;  // graph weights from the Gaussian-smoothed image

    void validate() const {
        require(rpe_half_band >= 1, ErrorCode::ConfigError, "layers.rpe_half_band must be >= 1");
        require(ilm_clearance >= 0, ErrorCode::ConfigError, "layers.ilm_clearance must be >= 0");
        require(rpe_median_window >= 1 && rpe_median_window % 2 == 1, ErrorCode::ConfigError,
                "layers.rpe_median_window must be odd and >= 1");
        require(edge_margin >= 0, ErrorCode::ConfigError, "layers.edge_margin must be >= 0");
        require(gap_threshold >= 0, ErrorCode::ConfigError, "layers.gap_threshold must be >= 0");
        require(fallback_depth_divisor >= 1, ErrorCode::ConfigError, "layers.fallback_depth_divisor must be >= 1");
    }
};

struct Phase2Config {
    bool enabled = true;
    double k = 0.9;
    int depth_px = 5;
    double low_fraction = 0.60;
    int shift_px = 3;
    double rank_lo = 0.7;
    double rank_hi = 0.9;
    int max_iterations = 10;
    bool extra_probe = true;
    // false: correct when the dark fraction is below low_fraction (literal rule);
    // true: correct when it is at or above low_fraction.
    bool invert_polarity = false;

    void validate() const {
        require(k > 0.0 && k <= 1.0, ErrorCode::ConfigError, "phase2.k must lie in (0,1]");
        require(depth_px >= 1, ErrorCode::ConfigError, "phase2.depth_px must be >= 1");
        require(low_fraction >= 0.0 && low_fraction <= 1.0, ErrorCode::ConfigError,
                "phase2.low_fraction must lie in [0,1]");
        require(shift_px >= 1, ErrorCode::ConfigError, "phase2.shift_px must be >= 1");
        require(rank_lo >= 0.0 && rank_lo < rank_hi && rank_hi <= 1.0, ErrorCode::ConfigError,
                "phase2 ranks must satisfy 0 <= rank_lo < rank_hi <= 1");
        require(max_iterations >= 1, ErrorCode::ConfigError, "phase2.max_iterations must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// RPE approximation and ILM/RPE extraction

namespace detail {

inline std::vector<int> median_across_columns(const std::vector<int>& values, int window) {
    const int n = static_cast<int>(values.size()), half = window / 2;
    std::vector<int> out(values.size()), buf(static_cast<std::size_t>(window));
    for (int c = 0; c < n; ++c) {
        for (int i = -half; i <= half; ++i)
            buf[static_cast<std::size_t>(i + half)] = values[static_cast<std::size_t>(std::clamp(c + i, 0, n - 1))];
        std::nth_element(buf.begin(), buf.begin() + half, buf.end());
        out[static_cast<std::size_t>(c)] = buf[static_cast<std::size_t>(half)];
    }
    return out;
}

inline int lower_median(std::vector<int> v) {
    if (v.empty()) return 0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace detail

// Row of maximum intensity per column (smallest row on ties), median-filtered across columns.
inline Boundary approximate_rpe(const ImageF& img, int median_window = 15) {
    require(img.rows() > 0 && img.cols() > 0, ErrorCode::EmptyImage, "empty image");
    std::vector<int> argmax(static_cast<std::size_t>(img.cols()), 0);
    for (int c = 0; c < img.cols(); ++c) {
        int best = 0;
        for (int r = 1; r < img.rows(); ++r)
            if (img(r, c) > img(best, c)) best = r;
        argmax[static_cast<std::size_t>(c)] = best;
    }
    return {BoundaryLabel::RAW, detail::median_across_columns(argmax, median_window), 0.0};
}

struct IlmRpe {
    Boundary ilm;
    Boundary rpe;
    bool degenerate = false;  // gradients carried no information; boundaries are placeholders
};

inline IlmRpe segment_ilm_rpe(const ImageF& img, const GradientPair& grads, const GraphConfig& graph_cfg,
                              const LayersConfig& cfg) {
    const int rows = img.rows(), cols = img.cols();
    if (grads.degenerate) {
        return {{BoundaryLabel::ILM, std::vector<int>(static_cast<std::size_t>(cols), 0), 0.0},
                {BoundaryLabel::RPE, std::vector<int>(static_cast<std::size_t>(cols), rows - 1), 0.0},
                true};
    }

    const Boundary approx = approximate_rpe(img, cfg.rpe_median_window);
    std::vector<int> lo(static_cast<std::size_t>(cols)), hi(static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) {
        lo[static_cast<std::size_t>(c)] = approx[c] - cfg.rpe_half_band;
        hi[static_cast<std::size_t>(c)] = approx[c] + cfg.rpe_half_band;
    }
    Boundary rpe = graph::shortest_boundary(grads.dark_to_light, RoiMask::from_ranges(rows, lo, hi), graph_cfg,
                                            BoundaryLabel::RPE);

    for (int c = 0; c < cols; ++c) {
        lo[static_cast<std::size_t>(c)] = 0;
        hi[static_cast<std::size_t>(c)] = std::max(0, rpe[c] - cfg.ilm_clearance - 1);
    }
    Boundary ilm = graph::shortest_boundary(grads.dark_to_light, RoiMask::from_ranges(rows, lo, hi), graph_cfg,
                                            BoundaryLabel::ILM);

    for (int c = 0; c < cols; ++c)
        require(ilm[c] < rpe[c], ErrorCode::OrderingViolation,
                "ILM at or below RPE at column " + std::to_string(c));
    return {std::move(ilm), std::move(rpe), false};
}

inline IlmRpe segment_ilm_rpe(const BScan& img, const GraphConfig& graph_cfg, const LayersConfig& cfg = {}) {
    return segment_ilm_rpe(img.pixels, graph::vertical_gradients(img.pixels), graph_cfg, cfg);
}

// ---------------------------------------------------------------------------
// Flattening

struct Flattened {
    ImageF image;
    std::vector<int> shifts;  // new_row = old_row + shifts[c]
    int target_row = 0;
};

// Shifts every column so the reference boundary lands on its median row. Vacated pixels
// take the column's nearest edge value.
inline Flattened flatten(const ImageF& img, const Boundary& reference) {
    require(reference.cols() == img.cols(), ErrorCode::DimensionMismatch, "reference boundary width differs");
    for (int r : reference.row)
        require(r >= 0 && r < img.rows(), ErrorCode::Precondition, "reference boundary outside image");
    Flattened out{ImageF(img.rows(), img.cols()), {}, detail::lower_median(reference.row)};
    out.shifts.resize(reference.row.size());
    for (int c = 0; c < img.cols(); ++c) {
        const int s = out.target_row - reference[c];
        out.shifts[static_cast<std::size_t>(c)] = s;
        for (int r = 0; r < img.rows(); ++r) out.image(r, c) = img(std::clamp(r - s, 0, img.rows() - 1), c);
    }
    return out;
}

struct ShiftedBoundary {
    Boundary boundary;
    bool clamped = false;
};

namespace detail {

inline ShiftedBoundary shift_rows(const Boundary& b, std::span<const int> shifts, int rows, int sign) {
    require(static_cast<std::size_t>(b.cols()) == shifts.size(), ErrorCode::DimensionMismatch,
            "boundary and shift vector differ in length");
    ShiftedBoundary out{b, false};
    for (std::size_t c = 0; c < shifts.size(); ++c) {
        const int moved = b.row[c] + sign * shifts[c];
        const int kept = std::clamp(moved, 0, rows - 1);
        out.clamped = out.clamped || kept != moved;
        out.boundary.row[c] = kept;
    }
    return out;
}

}  // namespace detail

// Maps a boundary from original to flattened coordinates.
inline ShiftedBoundary flatten_boundary(const Boundary& b, std::span<const int> shifts, int rows) {
    return detail::shift_rows(b, shifts, rows, +1);
}

// Maps a boundary from flattened back to original coordinates.
inline ShiftedBoundary unflatten_boundary(const Boundary& b, std::span<const int> shifts, int rows) {
    return detail::shift_rows(b, shifts, rows, -1);
}

// ---------------------------------------------------------------------------
// Discontinuities of the Phase-1 edge

enum class Section { Left, Middle, Right };
enum class DiscontinuityKind { Jump, AbsentBorder };

constexpr std::string_view to_string(Section s) {
    switch (s) {
        case Section::Left: return "left";
        case Section::Middle: return "middle";
        case Section::Right: return "right";
    }
    return "left";
}

inline Section section_of(int column, int cols) {
    if (column < cols / 3) return Section::Left;
    if (column < 2 * cols / 3) return Section::Middle;
    return Section::Right;
}

// A break between column `column` and `column + 1`.
struct Discontinuity {
    int column = 0;
    int gap_px = 0;
    Section section = Section::Left;
    DiscontinuityKind kind = DiscontinuityKind::Jump;
};

struct DiscontinuitySet {
    std::vector<Discontinuity> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
};

// Jumps larger than gap_threshold, plus both borders of every run of columns without an
// edge. Border entries carry the distance from the present edge row to the image bottom
// as their gap (at least gap_threshold + 1).
inline DiscontinuitySet detect_discontinuities(const Phase1Edge& edge, int rows, int gap_threshold = 3) {
    DiscontinuitySet out;
    const int cols = edge.cols();
    for (int c = 0; c + 1 < cols; ++c) {
        const auto& a = edge.first_bright_row[static_cast<std::size_t>(c)];
        const auto& b = edge.first_bright_row[static_cast<std::size_t>(c + 1)];
        if (a && b) {
            const int gap = std::abs(*b - *a);
            if (gap > gap_threshold) out.entries.push_back({c, gap, section_of(c, cols), DiscontinuityKind::Jump});
        } else if (a.has_value() != b.has_value()) {
            const int present = a ? *a : *b;
            out.entries.push_back({c, std::max(rows - present, gap_threshold + 1), section_of(c, cols),
                                   DiscontinuityKind::AbsentBorder});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// RNFL region of interest

struct RnflRoi {
    std::vector<int> lo;  // shallowest admissible row per column
    std::vector<int> hi;  // deepest admissible row per column
    bool fovea_copy_used = false;
    int fovea_offset = 0;
    int fovea_first = -1;  // inclusive column span of the ILM-copy rule
    int fovea_last = -1;
    bool absent_fallback_used = false;
    int median_offset = 0;

    RoiMask mask(int rows) const { return RoiMask::from_ranges(rows, lo, hi); }
};

inline RnflRoi rnfl_roi(const Boundary& ilm, const Phase1Edge& edge, const DiscontinuitySet& disc, int rows,
                        const LayersConfig& cfg = {}) {
    const int cols = ilm.cols();
    require(edge.cols() == cols, ErrorCode::DimensionMismatch, "edge and ILM widths differ");
    RnflRoi roi;
    roi.lo.resize(static_cast<std::size_t>(cols));
    roi.hi.resize(static_cast<std::size_t>(cols));

    std::vector<int> offsets;
    for (int c = 0; c < cols; ++c)
        if (const auto& e = edge.first_bright_row[static_cast<std::size_t>(c)])
            offsets.push_back(*e - cfg.edge_margin - ilm[c]);
    roi.median_offset =
        offsets.empty() ? std::max(1, rows / cfg.fallback_depth_divisor) : std::max(1, detail::lower_median(offsets));

    for (int c = 0; c < cols; ++c) {
        const auto& e = edge.first_bright_row[static_cast<std::size_t>(c)];
        roi.lo[static_cast<std::size_t>(c)] = ilm[c] + 1;
        if (e) {
            roi.hi[static_cast<std::size_t>(c)] = *e - cfg.edge_margin;
        } else {
            roi.hi[static_cast<std::size_t>(c)] = ilm[c] + roi.median_offset;
            roi.absent_fallback_used = true;
        }
    }

    // Fovea: between the outermost middle-section jumps the bound follows a copy of the ILM.
    std::vector<Discontinuity> middle;
    for (const auto& d : disc.entries)
        if (d.section == Section::Middle && d.kind == DiscontinuityKind::Jump) middle.push_back(d);
    if (!middle.empty()) {
        const int mid_first = cols / 3, mid_last = 2 * cols / 3 - 1;
        if (middle.size() >= 2) {
            const Discontinuity& a = middle.front();
            const Discontinuity& b = middle.back();
            roi.fovea_offset = (a.gap_px + b.gap_px + 3) / 4;  // ceil(avg / 2)
            roi.fovea_first = a.column + 1;
            roi.fovea_last = b.column;
        } else {
            const Discontinuity& d = middle.front();
            roi.fovea_offset = (d.gap_px + 1) / 2;
            // Apply on the side of the jump where the edge sits deeper below the ILM.
            auto mean_depth = [&](int first, int last) {
                double sum = 0.0;
                int n = 0;
                for (int c = first; c <= last; ++c)
                    if (const auto& e = edge.first_bright_row[static_cast<std::size_t>(c)]) {
                        sum += *e - ilm[c];
                        ++n;
                    }
                return n == 0 ? -1.0 : sum / n;
            };
            if (mean_depth(mid_first, d.column) >= mean_depth(d.column + 1, mid_last)) {
                roi.fovea_first = mid_first;
                roi.fovea_last = d.column;
            } else {
                roi.fovea_first = d.column + 1;
                roi.fovea_last = mid_last;
            }
        }
        roi.fovea_copy_used = true;
        for (int c = roi.fovea_first; c <= roi.fovea_last; ++c)
            if (edge.first_bright_row[static_cast<std::size_t>(c)])
                roi.hi[static_cast<std::size_t>(c)] = ilm[c] + roi.fovea_offset;
    }

    for (int c = 0; c < cols; ++c) {
        auto& lo = roi.lo[static_cast<std::size_t>(c)];
        auto& hi = roi.hi[static_cast<std::size_t>(c)];
        lo = std::clamp(lo, 0, rows - 1);
        hi = std::clamp(std::max(hi, lo), 0, rows - 1);
    }
    return roi;
}

// ---------------------------------------------------------------------------
// Phase 2

// Mean of sorted(values)[ceil(lo*n) .. ceil(hi*n)), at least one element.
inline double order_statistic_mean(std::vector<double> values, double rank_lo, double rank_hi) {
    require(!values.empty(), ErrorCode::InvalidArgument, "order statistic of an empty vector");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    constexpr double eps = 1e-9;
    auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(rank_lo * n - eps)));
    auto last = static_cast<std::size_t>(std::max(0.0, std::ceil(rank_hi * n - eps)));
    first = std::min(first, values.size() - 1);
    last = std::clamp(last, first + 1, values.size());
    double sum = 0.0;
    for (std::size_t i = first; i < last; ++i) sum += values[i];
    return sum / static_cast<double>(last - first);
}

// Reference intensity of the layer just below the ILM: per-column means over depth_px rows,
// sorted, averaged over the [rank_lo, rank_hi) order-statistic window.
inline double ilm_intensity_estimate(const ImageF& img, const Boundary& ilm, const Phase2Config& cfg) {
    require(ilm.cols() == img.cols(), ErrorCode::DimensionMismatch, "ILM width differs from image");
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(img.cols()));
    for (int c = 0; c < img.cols(); ++c) {
        require(ilm[c] >= 0 && ilm[c] < img.rows(), ErrorCode::Precondition, "ILM outside image");
        if (ilm[c] + cfg.depth_px >= img.rows()) continue;
        double sum = 0.0;
        for (int r = ilm[c] + 1; r <= ilm[c] + cfg.depth_px; ++r) sum += img(r, c);
        means.push_back(sum / cfg.depth_px);
    }
    require(!means.empty(), ErrorCode::TooShortBelowIlm,
            "fewer than " + std::to_string(cfg.depth_px) + " rows below the ILM in every column");
    return order_statistic_mean(means, cfg.rank_lo, cfg.rank_hi);
}

enum class IntervalSource { Discontinuity, Probe };

constexpr std::string_view to_string(IntervalSource s) {
    return s == IntervalSource::Discontinuity ? "discontinuity" : "probe";
}

struct Interval {
    int first = 0;  // inclusive
    int last = 0;   // inclusive
    IntervalSource source = IntervalSource::Discontinuity;
};

struct Correction {
    int first = 0;
    int last = 0;
    IntervalSource source = IntervalSource::Discontinuity;
    int iteration = 0;       // 1-based
    int shift_px = 0;
    double dark_fraction = 0.0;  // measured before this shift
};

// Intervals delimited by left/right-section discontinuities, followed (when extra_probe
// is set) by fixed-width probe tiles across the left and right sections.
inline std::vector<Interval> phase2_intervals(const DiscontinuitySet& disc, int cols, bool extra_probe) {
    std::vector<Interval> out;
    const std::array<std::pair<int, int>, 2> sections{{{0, cols / 3 - 1}, {2 * cols / 3, cols - 1}}};
    for (auto [first, last] : sections) {
        if (last < first) continue;
        std::vector<int> cuts;
        for (const auto& d : disc.entries)
            if (d.section != Section::Middle && d.column >= first && d.column <= last) cuts.push_back(d.column);
        if (cuts.empty()) continue;
        int start = first;
        for (int cut : cuts) {
            if (cut >= start) out.push_back({start, cut, IntervalSource::Discontinuity});
            start = cut + 1;
        }
        if (start <= last) out.push_back({start, last, IntervalSource::Discontinuity});
    }
    if (extra_probe) {
        const int width = std::max(1, cols / 8);
        for (auto [first, last] : sections)
            for (int a = first; a <= last; a += width)
                out.push_back({a, std::min(last, a + width - 1), IntervalSource::Probe});
    }
    return out;
}

// Fraction of columns in [first, last] whose mean over the depth_px rows below the
// boundary is below `threshold`. Columns with no rows below are skipped; nullopt if none count.
inline std::optional<double> dark_fraction(const ImageF& img, const Boundary& b, int first, int last, int depth_px,
                                           double threshold) {
    int counted = 0, dark = 0;
    for (int c = first; c <= last; ++c) {
        const int r0 = b[c] + 1, r1 = std::min(img.rows() - 1, b[c] + depth_px);
        if (r0 > r1) continue;
        double sum = 0.0;
        for (int r = r0; r <= r1; ++r) sum += img(r, c);
        ++counted;
        if (sum / (r1 - r0 + 1) < threshold) ++dark;
    }
    if (counted == 0) return std::nullopt;
    return static_cast<double>(dark) / counted;
}

namespace detail {

// Re-solves columns [first, last] under the ROI ranges, pinned to the existing boundary just
// outside the interval. The stitch window widens until a path honouring the step bound exists.
inline bool resolve_interval(const GradientField& field, std::span<const int> lo, std::span<const int> hi, Boundary& b,
                             int first, int last, const GraphConfig& cfg) {
    const int rows = field.rows(), cols = field.cols();
    for (int margin = 0;; ++margin) {
        const int s = std::max(0, first - margin), e = std::min(cols - 1, last + margin);
        const int sub_first = s > 0 ? s - 1 : s;  // include pin columns when they exist
        const int sub_last = e < cols - 1 ? e + 1 : e;
        const int width = sub_last - sub_first + 1;
        auto admissible = [&](int r, int c) {
            const int col = c + sub_first;
            if (col < s || col > e) return r == b[col];
            return r >= lo[static_cast<std::size_t>(col)] && r <= hi[static_cast<std::size_t>(col)];
        };
        auto weight = [&](int r, int c, int r2) {
            return graph::edge_weight(field.g(r, c + sub_first), field.g(r2, c + 1 + sub_first), cfg);
        };
        try {
            Boundary sub = graph::dijkstra_column_path(rows, width, cfg.max_vertical_step, cfg.w_min, admissible, weight);
            for (int c = s; c <= e; ++c) b.row[static_cast<std::size_t>(c)] = sub[c - sub_first];
            return true;
        } catch (const Error& err) {
            if (err.code() != ErrorCode::NoPath) throw;
            if (s == 0 && e == cols - 1) return false;
        }
    }
}

}  // namespace detail

struct Phase2Result {
    Boundary rnfl;
    std::vector<Correction> corrections;
    std::vector<int> hi;  // final ROI lower bounds (deepest rows)
    bool capped = false;  // some interval still failed the test after max_iterations
};

// For each interval, while the share of columns that are dark below the boundary fails the
// test, raise the interval's ROI floor to shift_px above the current boundary (or above the
// previous floor, whichever is higher) and re-solve it locally.
inline Phase2Result phase2_correct(const ImageF& img, const Boundary& rnfl, const RnflRoi& roi,
                                   const DiscontinuitySet& disc, double i_hat, const Phase2Config& cfg,
                                   const GradientField& field, const GraphConfig& graph_cfg) {
    cfg.validate();
    const int cols = img.cols();
    require(rnfl.cols() == cols && static_cast<int>(roi.lo.size()) == cols && field.g.same_shape(img),
            ErrorCode::DimensionMismatch, "phase2 inputs differ in size");
    Phase2Result out{rnfl, {}, roi.hi, false};
    const double threshold = cfg.k * i_hat;

    auto fires = [&](double fraction) {
        return cfg.invert_polarity ? fraction >= cfg.low_fraction : fraction < cfg.low_fraction;
    };

    for (const Interval& iv : phase2_intervals(disc, cols, cfg.extra_probe)) {
        for (int iteration = 1;; ++iteration) {
            const auto fraction = dark_fraction(img, out.rnfl, iv.first, iv.last, cfg.depth_px, threshold);
            if (!fraction || !fires(*fraction)) break;
            if (iteration > cfg.max_iterations) {
                out.capped = true;
                break;
            }
            bool moved = false;
            std::vector<int> saved_hi(out.hi.begin() + iv.first, out.hi.begin() + iv.last + 1);
            for (int c = iv.first; c <= iv.last; ++c) {
                auto& h = out.hi[static_cast<std::size_t>(c)];
                const int raised = std::max(roi.lo[static_cast<std::size_t>(c)], std::min(h, out.rnfl[c]) - cfg.shift_px);
                moved = moved || raised != h;
                h = raised;
            }
            if (!moved) break;  // floor already at ILM + 1 across the interval
            Boundary before = out.rnfl;
            if (!detail::resolve_interval(field, roi.lo, out.hi, out.rnfl, iv.first, iv.last, graph_cfg)) {
                std::copy(saved_hi.begin(), saved_hi.end(), out.hi.begin() + iv.first);
                out.rnfl = std::move(before);
                out.capped = true;
                break;
            }
            out.corrections.push_back({iv.first, iv.last, iv.source, iteration, cfg.shift_px, *fraction});
        }
    }
    if (!out.corrections.empty()) out.rnfl.cost = graph::path_cost(field, out.rnfl.row, graph_cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Whole pipeline

struct SegmentConfig {
    preprocess::PreprocessConfig preprocess;
    GraphConfig graph;
    LayersConfig layers;
    Phase2Config phase2;
    metrics::MetricsConfig metrics;

    void validate() const {
        preprocess.validate();
        graph.validate();
        layers.validate();
        phase2.validate();
        metrics.validate();
    }
};

struct SegmentationFlags {
    bool phase1_empty_fallback = false;
    bool otsu_degenerate = false;
    bool degenerate_gradient = false;
    bool fovea_copy_used = false;
    bool absent_edge_fallback = false;
    bool phase2_capped = false;
    bool phase2_skipped = false;
    bool unflatten_clamped = false;
    bool rnfl_clamped = false;

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        auto add = [&](bool set, const char* name) {
            if (set) out.emplace_back(name);
        };
        add(phase1_empty_fallback, "phase1_empty_fallback");
        add(otsu_degenerate, "otsu_degenerate");
        add(degenerate_gradient, "degenerate_gradient");
        add(fovea_copy_used, "fovea_copy_used");
        add(absent_edge_fallback, "absent_edge_fallback");
        add(phase2_capped, "phase2_capped");
        add(phase2_skipped, "phase2_skipped");
        add(unflatten_clamped, "unflatten_clamped");
        add(rnfl_clamped, "rnfl_clamped");
        return out;
    }
};

struct SegmentationResult {
    std::string source_id;
    int rows = 0;
    int cols = 0;
    Boundary ilm;
    Boundary rnfl;
    Boundary rpe;
    metrics::MetricsSummary metrics;
    std::vector<Correction> corrections;
    SegmentationFlags flags;
    double binarize_threshold = 0.0;
    std::optional<double> i_hat;
    std::size_t discontinuities = 0;
};

inline SegmentationResult segment_all(const BScan& img, const SegmentConfig& cfg) {
    validate_bscan(img);
    cfg.validate();
    const int rows = img.rows(), cols = img.cols();

    SegmentationResult res;
    res.source_id = img.source_id;
    res.rows = rows;
    res.cols = cols;

    std::optional<preprocess::Phase1Result> p1;
    try {
        p1 = preprocess::phase1_pipeline(img, cfg.preprocess);
        res.binarize_threshold = p1->threshold.threshold;
        res.flags.otsu_degenerate = p1->threshold.degenerate;
    } catch (const Error& err) {
        if (err.code() != ErrorCode::Phase1Empty) throw;
        res.flags.phase1_empty_fallback = true;
    }

    // The brightest-row estimate of the RPE always reads the smoothed image: speckle clamps
    // many pixels to 1.0 and the argmax tie rule would otherwise favour shallow layers.
    const ImageF smoothed = preprocess::smooth(img.pixels, cfg.preprocess);
    const ImageF& gradient_source = cfg.layers.presmooth_gradients ? smoothed : img.pixels;
    const GradientPair grads = graph::vertical_gradients(gradient_source);
    IlmRpe ilm_rpe = segment_ilm_rpe(smoothed, grads, cfg.graph, cfg.layers);
    res.flags.degenerate_gradient = ilm_rpe.degenerate;

    // RNFL work happens on the RPE-flattened image.
    const Flattened flat = flatten(img.pixels, ilm_rpe.rpe);
    const Flattened flat_source = flatten(gradient_source, ilm_rpe.rpe);
    const GradientPair flat_grads = graph::vertical_gradients(flat_source.image);
    const Boundary ilm_f = flatten_boundary(ilm_rpe.ilm, flat.shifts, rows).boundary;
    const Boundary rpe_f = flatten_boundary(ilm_rpe.rpe, flat.shifts, rows).boundary;

    DiscontinuitySet disc;
    RnflRoi roi;
    if (p1) {
        Phase1Edge edge_f = p1->edge;
        for (int c = 0; c < cols; ++c)
            if (auto& e = edge_f.first_bright_row[static_cast<std::size_t>(c)])
                *e = std::clamp(*e + flat.shifts[static_cast<std::size_t>(c)], 0, rows - 1);
        disc = detect_discontinuities(edge_f, rows, cfg.layers.gap_threshold);
        roi = rnfl_roi(ilm_f, edge_f, disc, rows, cfg.layers);
        res.flags.fovea_copy_used = roi.fovea_copy_used;
        res.flags.absent_edge_fallback = roi.absent_fallback_used;
    } else {
        roi.lo.resize(static_cast<std::size_t>(cols));
        roi.hi.resize(static_cast<std::size_t>(cols));
        for (int c = 0; c < cols; ++c) {
            roi.lo[static_cast<std::size_t>(c)] = ilm_f[c] + 1;
            roi.hi[static_cast<std::size_t>(c)] = ilm_f[c] + rows / cfg.layers.fallback_depth_divisor;
        }
    }
    res.discontinuities = disc.size();

    // Search below the ILM and strictly above the RPE.
    for (int c = 0; c < cols; ++c) {
        auto& lo = roi.lo[static_cast<std::size_t>(c)];
        auto& hi = roi.hi[static_cast<std::size_t>(c)];
        lo = std::clamp(lo, 0, rows - 1);
        hi = std::min(hi, rpe_f[c] - 1);
        hi = std::clamp(std::max(hi, lo), 0, rows - 1);
    }

    Boundary rnfl_f =
        graph::shortest_boundary(flat_grads.light_to_dark, roi.mask(rows), cfg.graph, BoundaryLabel::RNFL);

    if (cfg.phase2.enabled) {
        try {
            res.i_hat = ilm_intensity_estimate(flat.image, ilm_f, cfg.phase2);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::TooShortBelowIlm) throw;
            res.flags.phase2_skipped = true;
        }
        if (res.i_hat) {
            Phase2Result p2 = phase2_correct(flat.image, rnfl_f, roi, disc, *res.i_hat, cfg.phase2,
                                             flat_grads.light_to_dark, cfg.graph);
            rnfl_f = std::move(p2.rnfl);
            res.corrections = std::move(p2.corrections);
            res.flags.phase2_capped = p2.capped;
        }
    } else {
        res.flags.phase2_skipped = true;
    }

    ShiftedBoundary rnfl = unflatten_boundary(rnfl_f, flat.shifts, rows);
    res.flags.unflatten_clamped = rnfl.clamped;
    res.ilm = std::move(ilm_rpe.ilm);
    res.rpe = std::move(ilm_rpe.rpe);
    res.rnfl = std::move(rnfl.boundary);
    res.rnfl.label = BoundaryLabel::RNFL;
    for (int c = 0; c < cols; ++c) {
        auto& r = res.rnfl.row[static_cast<std::size_t>(c)];
        const int kept = std::clamp(r, res.ilm[c], res.rpe[c]);
        res.flags.rnfl_clamped = res.flags.rnfl_clamped || kept != r;
        r = kept;
    }

    res.metrics = metrics::compute_metrics(img.pixels, res.ilm, res.rnfl, res.rpe, cfg.metrics);
    return res;
}

}  // namespace octseg::layers
