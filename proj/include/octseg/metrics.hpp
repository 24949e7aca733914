#pragma once

// Layer thickness profiles and band intensity summaries.

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/graph_search.hpp"
#include "octseg/image.hpp"

namespace octseg::metrics {

using graph::Boundary;

struct MetricsConfig {
    std::optional<double> axial_scale;  // micrometres per pixel
    int rpe_half_window = 2;

    void validate() const {
        require(!axial_scale || (*axial_scale > 0.0 && std::isfinite(*axial_scale)), ErrorCode::ConfigError,
                "metrics.axial_scale must be > 0");
        require(rpe_half_window >= 0, ErrorCode::ConfigError, "metrics.rpe_half_window must be >= 0");
    }
};

// Axial (row-direction) distance between two boundaries, one value per column.
struct ThicknessProfile {
    std::string upper_label;
    std::string lower_label;
    std::vector<int> px;
    std::optional<double> axial_scale;

    double mean() const {
        return px.empty() ? 0.0 : std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
    }
    int min() const { return px.empty() ? 0 : *std::min_element(px.begin(), px.end()); }
    int max() const { return px.empty() ? 0 : *std::max_element(px.begin(), px.end()); }

    std::vector<double> micrometres() const {
        std::vector<double> out;
        if (!axial_scale) return out;
        out.reserve(px.size());
        for (int v : px) out.push_back(v * *axial_scale);
        return out;
    }
};

inline ThicknessProfile thickness_profile(const Boundary& upper, const Boundary& lower,
                                          std::optional<double> axial_scale = std::nullopt) {
    require(upper.cols() == lower.cols(), ErrorCode::DimensionMismatch, "boundaries differ in column count");
    ThicknessProfile out{std::string(graph::to_string(upper.label)), std::string(graph::to_string(lower.label)), {},
                         axial_scale};
    out.px.reserve(upper.row.size());
    for (int c = 0; c < upper.cols(); ++c) {
        require(upper[c] <= lower[c], ErrorCode::OrderingViolation,
                "upper boundary below lower boundary at column " + std::to_string(c));
        out.px.push_back(lower[c] - upper[c]);
    }
    return out;
}

// Mean intensity over {(r, c) : upper[c] <= r <= lower[c]}.
inline double band_intensity(const ImageF& img, std::span<const int> upper, std::span<const int> lower) {
    require(upper.size() == lower.size() && static_cast<int>(upper.size()) == img.cols(),
            ErrorCode::DimensionMismatch, "band boundaries must span every image column");
    double sum = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < img.cols(); ++c) {
        const int a = upper[static_cast<std::size_t>(c)], b = lower[static_cast<std::size_t>(c)];
        require(a <= b, ErrorCode::OrderingViolation, "band upper edge below lower edge at column " + std::to_string(c));
        require(a >= 0 && b < img.rows(), ErrorCode::Precondition, "band outside image at column " + std::to_string(c));
        for (int r = a; r <= b; ++r) sum += img(r, c);
        count += static_cast<std::size_t>(b - a + 1);
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

inline double band_intensity(const ImageF& img, const Boundary& upper, const Boundary& lower) {
    return band_intensity(img, std::span<const int>(upper.row), std::span<const int>(lower.row));
}

struct MetricsSummary {
    ThicknessProfile rnfl;   // ILM -> RNFL
    ThicknessProfile total;  // ILM -> RPE
    ThicknessProfile inner;  // RNFL -> RPE
    double rnfl_intensity = 0.0;
    double retina_intensity = 0.0;
    double rpe_intensity = 0.0;
};

inline MetricsSummary compute_metrics(const ImageF& img, const Boundary& ilm, const Boundary& rnfl, const Boundary& rpe,
                                      const MetricsConfig& cfg) {
    MetricsSummary m;
    m.rnfl = thickness_profile(ilm, rnfl, cfg.axial_scale);
    m.total = thickness_profile(ilm, rpe, cfg.axial_scale);
    m.inner = thickness_profile(rnfl, rpe, cfg.axial_scale);
    m.rnfl_intensity = band_intensity(img, ilm, rnfl);
    m.retina_intensity = band_intensity(img, ilm, rpe);

    std::vector<int> lo(rpe.row.size()), hi(rpe.row.size());
    for (std::size_t c = 0; c < rpe.row.size(); ++c) {
        lo[c] = std::max(0, rpe.row[c] - cfg.rpe_half_window);
        hi[c] = std::min(img.rows() - 1, rpe.row[c] + cfg.rpe_half_window);
    }
    m.rpe_intensity = band_intensity(img, lo, hi);
    return m;
}

}  // namespace octseg::metrics
