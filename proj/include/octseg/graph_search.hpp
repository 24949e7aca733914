#pragma once

// Gradient-weighted pixel graphs and ROI-constrained minimum-cost boundary search.
//
// The graph is a left-to-right DAG: pixel (r, c) links to (r', c + 1) for |r' - r| <= m.
// A virtual source feeds every admissible pixel of column 0 and every admissible pixel of
// the last column drains into a virtual sink, both at cost w_min, so endpoints are free.
// Edge weights follow w = 2 - (g_a + g_b) + w_min.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/image.hpp"

namespace octseg::graph {

enum class Direction { DarkToLight, LightToDark };

struct GradientField {
    Grid<double> g;  // values in [0,1]
    Direction direction = Direction::DarkToLight;

    int rows() const noexcept { return g.rows(); }
    int cols() const noexcept { return g.cols(); }
};

struct GradientPair {
    GradientField dark_to_light;
    GradientField light_to_dark;
    bool degenerate = false;  // constant derivative field; both maps are 0.5 everywhere
};

struct RoiMask {
    Grid<std::uint8_t> admissible;

    RoiMask() = default;
    RoiMask(int rows, int cols, bool fill) : admissible(rows, cols, fill ? 1 : 0) {}

    int rows() const noexcept { return admissible.rows(); }
    int cols() const noexcept { return admissible.cols(); }
    bool operator()(int r, int c) const noexcept { return admissible(r, c) != 0; }

    // Rows lo[c]..hi[c] inclusive are admissible in column c (clipped to the image).
    static RoiMask from_ranges(int rows, std::span<const int> lo, std::span<const int> hi) {
        require(lo.size() == hi.size(), ErrorCode::DimensionMismatch, "ROI range vectors differ in length");
        RoiMask roi(rows, static_cast<int>(lo.size()), false);
        for (int c = 0; c < roi.cols(); ++c) {
            const int a = std::max(0, lo[static_cast<std::size_t>(c)]);
            const int b = std::min(rows - 1, hi[static_cast<std::size_t>(c)]);
            for (int r = a; r <= b; ++r) roi.admissible(r, c) = 1;
        }
        return roi;
    }
};

struct GraphConfig {
    double w_min = 1e-5;
    int max_vertical_step = 1;

    void validate() const {
        require(w_min > 0.0 && std::isfinite(w_min), ErrorCode::ConfigError, "graph.w_min must be > 0");
        require(max_vertical_step >= 1 && max_vertical_step <= 8, ErrorCode::ConfigError,
                "graph.max_vertical_step must lie in [1,8]");
    }
};

enum class BoundaryLabel { ILM, RNFL, RPE, RAW };

constexpr std::string_view to_string(BoundaryLabel label) {
    switch (label) {
        case BoundaryLabel::ILM: return "ILM";
        case BoundaryLabel::RNFL: return "RNFL";
        case BoundaryLabel::RPE: return "RPE";
        case BoundaryLabel::RAW: return "RAW";
    }
    return "RAW";
}

struct Boundary {
    BoundaryLabel label = BoundaryLabel::RAW;
    std::vector<int> row;
    double cost = 0.0;

    int cols() const noexcept { return static_cast<int>(row.size()); }
    int operator[](int c) const noexcept { return row[static_cast<std::size_t>(c)]; }
};

struct BoundarySet {
    Boundary ilm;
    Boundary rnfl;
    Boundary rpe;
};

// Raw derivative d(r,c) = I(r+1,c) - I(r,c) (last row replicates the one above it),
// min-max normalized over the whole image.
inline GradientPair vertical_gradients(const ImageF& img) {
    require(img.rows() >= 2, ErrorCode::InvalidArgument, "vertical gradients need at least two rows");
    const int rows = img.rows(), cols = img.cols();
    Grid<double> d(rows, cols);
    for (int r = 0; r < rows - 1; ++r)
        for (int c = 0; c < cols; ++c) d(r, c) = img(r + 1, c) - img(r, c);
    for (int c = 0; c < cols; ++c) d(rows - 1, c) = d(rows - 2, c);

    const auto [lo_it, hi_it] = std::minmax_element(d.values().begin(), d.values().end());
    const double lo = *lo_it, hi = *hi_it;

    GradientPair out;
    out.dark_to_light = {Grid<double>(rows, cols, 0.5), Direction::DarkToLight};
    out.light_to_dark = {Grid<double>(rows, cols, 0.5), Direction::LightToDark};
    if (!(hi > lo)) {
        out.degenerate = true;
        return out;
    }
    const double span = hi - lo;
    auto src = d.values();
    auto dl = out.dark_to_light.g.values();
    auto ld = out.light_to_dark.g.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dl[i] = (src[i] - lo) / span;
        ld[i] = 1.0 - dl[i];
    }
    return out;
}

inline GradientPair vertical_gradients(const BScan& img) { return vertical_gradients(img.pixels); }

constexpr double edge_weight(double g_a, double g_b, const GraphConfig& cfg) noexcept {
    return 2.0 - (g_a + g_b) + cfg.w_min;
}

// Single-source Dijkstra over the column DAG. `admissible(r, c)` selects nodes and
// `weight(r, c, r2)` prices the edge (r, c) -> (r2, c + 1). Ties on distance prefer the
// predecessor with the smaller row; the sink prefers the smaller end row.
template <typename AdmissibleFn, typename WeightFn>
Boundary dijkstra_column_path(int rows, int cols, int max_step, double endpoint_weight, AdmissibleFn&& admissible,
                              WeightFn&& weight) {
    require(rows > 0 && cols > 0, ErrorCode::InvalidArgument, "empty graph");
    for (int c = 0; c < cols; ++c) {
        bool any = false;
        for (int r = 0; r < rows && !any; ++r) any = admissible(r, c);
        require(any, ErrorCode::DisconnectedRoi, "column " + std::to_string(c) + " has no admissible pixel");
    }

    const auto node = [cols](int r, int c) { return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c); };
    const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<int> pred_row(n, -1);
    std::vector<std::uint8_t> settled(n, 0);

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (int r = 0; r < rows; ++r) {
        if (!admissible(r, 0)) continue;
        dist[node(r, 0)] = endpoint_weight;
        heap.emplace(endpoint_weight, node(r, 0));
    }

    while (!heap.empty()) {
        const auto [du, u] = heap.top();
        heap.pop();
        if (settled[u] || du > dist[u]) continue;
        settled[u] = 1;
        const int r = static_cast<int>(u / static_cast<std::size_t>(cols));
        const int c = static_cast<int>(u % static_cast<std::size_t>(cols));
        if (c + 1 >= cols) continue;
        const int r_lo = std::max(0, r - max_step), r_hi = std::min(rows - 1, r + max_step);
        for (int r2 = r_lo; r2 <= r_hi; ++r2) {
            if (!admissible(r2, c + 1)) continue;
            const std::size_t v = node(r2, c + 1);
            if (settled[v]) continue;
            const double nd = du + weight(r, c, r2);
            if (nd < dist[v] || (nd == dist[v] && r < pred_row[v])) {
                const bool improved = nd < dist[v];
                dist[v] = nd;
                pred_row[v] = r;
                if (improved) heap.emplace(nd, v);
            }
        }
    }

    int best_row = -1;
    double best = inf;
    for (int r = 0; r < rows; ++r) {
        if (!admissible(r, cols - 1)) continue;
        const double total = dist[node(r, cols - 1)] + endpoint_weight;
        if (total < best) {
            best = total;
            best_row = r;
        }
    }
    require(best_row >= 0, ErrorCode::NoPath, "no path satisfies the vertical step bound inside the ROI");

    Boundary out;
    out.cost = best;
    out.row.assign(static_cast<std::size_t>(cols), 0);
    int r = best_row;
    for (int c = cols - 1; c >= 0; --c) {
        out.row[static_cast<std::size_t>(c)] = r;
        r = pred_row[node(r, c)];
    }
    return out;
}

// Minimum-cost boundary through `field` restricted to `roi`.
inline Boundary shortest_boundary(const GradientField& field, const RoiMask& roi, const GraphConfig& cfg,
                                  BoundaryLabel label = BoundaryLabel::RAW) {
    cfg.validate();
    require(field.g.same_shape(roi.admissible), ErrorCode::DimensionMismatch, "field and ROI sizes differ");
    const auto& g = field.g;
    Boundary b = dijkstra_column_path(
        g.rows(), g.cols(), cfg.max_vertical_step, cfg.w_min, [&](int r, int c) { return roi(r, c); },
        [&](int r, int c, int r2) { return edge_weight(g(r, c), g(r2, c + 1), cfg); });
    b.label = label;
    return b;
}

// Prices a path exactly as shortest_boundary accumulates it: source link, edges left to
// right, then the sink link.
inline double path_cost(const GradientField& field, std::span<const int> rows, const GraphConfig& cfg) {
    double cost = cfg.w_min;
    for (std::size_t c = 0; c + 1 < rows.size(); ++c)
        cost += edge_weight(field.g(rows[c], static_cast<int>(c)), field.g(rows[c + 1], static_cast<int>(c + 1)), cfg);
    return cost + cfg.w_min;
}

}  // namespace octseg::graph
