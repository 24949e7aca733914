#pragma once

// Synthetic B-scans with known ILM / RNFL / RPE rows, and scoring of predicted
// boundaries against them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/graph_search.hpp"
#include "octseg/image.hpp"

namespace octseg::phantom {

using graph::Boundary;
using graph::BoundaryLabel;

struct ControlPoint {
    double col = 0.0;
    double row = 0.0;
};

// Monotone piecewise-cubic (Fritsch-Carlson) row function through control points,
// held constant beyond the first and last point.
class Curve {
public:
    Curve() = default;
    explicit Curve(std::vector<ControlPoint> points) : points_(std::move(points)) {
        std::sort(points_.begin(), points_.end(), [](auto& a, auto& b) { return a.col < b.col; });
        fit();
    }

    static Curve flat(double row) { return Curve({{0.0, row}}); }
    static Curve line(double col0, double row0, double col1, double row1) { return Curve({{col0, row0}, {col1, row1}}); }

    const std::vector<ControlPoint>& points() const noexcept { return points_; }

    double operator()(double col) const {
        require(!points_.empty(), ErrorCode::InvalidArgument, "curve without control points");
        if (points_.size() == 1 || col <= points_.front().col) return points_.front().row;
        if (col >= points_.back().col) return points_.back().row;
        const auto it = std::upper_bound(points_.begin(), points_.end(), col,
                                         [](double v, const ControlPoint& p) { return v < p.col; });
        const std::size_t i = static_cast<std::size_t>(it - points_.begin()) - 1;
        const double h = points_[i + 1].col - points_[i].col;
        const double t = (col - points_[i].col) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * points_[i].row + (t3 - 2 * t2 + t) * h * slopes_[i] +
               (-2 * t3 + 3 * t2) * points_[i + 1].row + (t3 - t2) * h * slopes_[i + 1];
    }

private:
    void fit() {
        const std::size_t n = points_.size();
        slopes_.assign(n, 0.0);
        if (n < 2) return;
        std::vector<double> secant(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = points_[i + 1].col - points_[i].col;
            require(h > 0.0, ErrorCode::InvalidArgument, "curve control points share a column");
            secant[i] = (points_[i + 1].row - points_[i].row) / h;
        }
        slopes_[0] = secant[0];
        slopes_[n - 1] = secant[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i)
            slopes_[i] = secant[i - 1] * secant[i] <= 0.0 ? 0.0 : (secant[i - 1] + secant[i]) / 2.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (secant[i] == 0.0) {
                slopes_[i] = slopes_[i + 1] = 0.0;
                continue;
            }
            const double a = slopes_[i] / secant[i], b = slopes_[i + 1] / secant[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double tau = 3.0 / std::sqrt(s);
                slopes_[i] = tau * a * secant[i];
                slopes_[i + 1] = tau * b * secant[i];
            }
        }
    }

    std::vector<ControlPoint> points_;
    std::vector<double> slopes_;
};

struct LayerIntensities {
    double vitreous = 0.05;
    double rnfl_band = 0.7;
    double inner_tissue = 0.3;
    double rpe_band = 0.95;
    double below = 0.2;
};

struct FoveaSpec {
    double center = 0.0;
    double width = 40.0;       // pinch span; the dip's raised cosine has this half-width
    double dip_depth = 0.0;    // rows the ILM and RNFL sink at the centre
    bool rnfl_pinch = false;   // RNFL thickness forced to zero over the central `width` columns
    double pinch_taper = 12.0; // columns over which thickness recovers outside the pinch
};

struct VesselSpec {
    double column = 0.0;
    double width = 4.0;
    double attenuation = 0.5;  // multiplicative factor applied below the ILM
};

// Bright-capped band laid over a column range to plant a deeper light-to-dark edge inside
// the RNFL search region. Rows are measured downward from the RNFL curve: a linear ramp up
// to the cap, the cap, a sharp drop to the body, then a fade back to the tissue.
struct HyperreflectiveBand {
    double first_col = 0.0;
    double last_col = 0.0;
    double depth = 4.0;          // rows between RNFL curve and the start of the ramp
    int ramp_thickness = 10;
    int cap_thickness = 2;
    double cap_intensity = 1.0;
    int body_thickness = 6;
    double body_intensity = 0.72;
    int fade_thickness = 6;      // linear fade from body intensity back to the surrounding tissue
    double rnfl_intensity = -1.0;  // RNFL intensity over the band's columns; negative keeps the default
};

struct PhantomSpec {
    int rows = 160;
    int cols = 256;
    Curve ilm = Curve::flat(40.0);
    Curve rnfl = Curve::flat(50.0);
    Curve rpe = Curve::flat(110.0);
    int rpe_thickness = 6;
    LayerIntensities intensity;
    std::optional<FoveaSpec> fovea;
    std::vector<VesselSpec> vessels;
    std::vector<HyperreflectiveBand> bands;
    double speckle_sigma = 0.0;
    std::uint64_t seed = 1;

    static PhantomSpec default_spec() {
        PhantomSpec s;
        s.ilm = Curve({{0.0, 38.0}, {128.0, 42.0}, {255.0, 40.0}});
        s.rnfl = Curve({{0.0, 50.0}, {128.0, 50.0}, {255.0, 51.0}});
        s.rpe = Curve({{0.0, 108.0}, {255.0, 112.0}});
        s.fovea = FoveaSpec{128.0, 40.0, 10.0, false, 12.0};
        return s;
    }
};

using GroundTruth = graph::BoundarySet;

struct Phantom {
    BScan image;
    GroundTruth truth;
};

struct TruthCurves {
    std::vector<double> ilm, rnfl, rpe;
};

// Real-valued boundary curves after the fovea dip and pinch are applied.
inline TruthCurves truth_curves(const PhantomSpec& spec) {
    TruthCurves out;
    for (int c = 0; c < spec.cols; ++c) {
        double ilm = spec.ilm(c), rnfl = spec.rnfl(c);
        const double rpe = spec.rpe(c);
        if (spec.fovea) {
            const FoveaSpec& f = *spec.fovea;
            const double dx = std::abs(c - f.center);
            if (dx < f.width) {
                const double dip = f.dip_depth * 0.5 * (1.0 + std::cos(std::numbers::pi * dx / f.width));
                ilm += dip;
                rnfl += dip;
            }
            if (f.rnfl_pinch) {
                const double half = f.width / 2.0;
                double keep = 1.0;
                if (dx < half)
                    keep = 0.0;
                else if (f.pinch_taper > 0.0 && dx < half + f.pinch_taper)
                    keep = (dx - half) / f.pinch_taper;
                rnfl = ilm + (rnfl - ilm) * keep;
            }
        }
        out.ilm.push_back(ilm);
        out.rnfl.push_back(rnfl);
        out.rpe.push_back(rpe);
    }
    return out;
}

inline void validate(const PhantomSpec& spec) {
    require(spec.rows >= kMinPipelineSide && spec.cols >= kMinPipelineSide, ErrorCode::InvalidArgument,
            "phantom must be at least 16x16");
    require(spec.rpe_thickness >= 1, ErrorCode::InvalidArgument, "rpe_thickness must be >= 1");
    require(spec.speckle_sigma >= 0.0 && std::isfinite(spec.speckle_sigma), ErrorCode::InvalidArgument,
            "speckle_sigma must be >= 0");
    const auto& in = spec.intensity;
    for (double v : {in.vitreous, in.rnfl_band, in.inner_tissue, in.rpe_band, in.below})
        require(v >= 0.0 && v <= 1.0, ErrorCode::InvalidArgument, "layer intensities must lie in [0,1]");
    for (const auto& v : spec.vessels)
        require(v.attenuation >= 0.0 && v.attenuation <= 1.0 && v.width > 0.0, ErrorCode::InvalidArgument,
                "vessel attenuation must lie in [0,1] and width > 0");
    for (const auto& b : spec.bands) {
        require(b.cap_intensity >= 0.0 && b.cap_intensity <= 1.0 && b.body_intensity >= 0.0 &&
                    b.body_intensity <= 1.0 && b.rnfl_intensity <= 1.0,
                ErrorCode::InvalidArgument, "band intensities must lie in [0,1]");
        require(b.ramp_thickness >= 0 && b.cap_thickness >= 0 && b.body_thickness >= 0 && b.fade_thickness >= 0 && b.depth >= 0.0,
                ErrorCode::InvalidArgument, "band thicknesses must be >= 0");
    }
    const TruthCurves tc = truth_curves(spec);
    for (int c = 0; c < spec.cols; ++c) {
        const auto i = static_cast<std::size_t>(c);
        require(tc.ilm[i] <= tc.rnfl[i] && tc.rnfl[i] <= tc.rpe[i], ErrorCode::OrderingViolation,
                "curves must satisfy ilm <= rnfl <= rpe (column " + std::to_string(c) + ")");
        require(tc.ilm[i] >= 1.0 && tc.rpe[i] + spec.rpe_thickness <= spec.rows - 2, ErrorCode::OrderingViolation,
                "curves leave the image (column " + std::to_string(c) + ")");
    }
}

// Row r belongs to: vitreous if r <= ilm, RNFL if r <= rnfl, inner tissue if r <= rpe,
// RPE if r <= rpe + rpe_thickness, otherwise the layer below. Speckle multiplies each
// pixel by (1 + sigma * n), n ~ N(0,1), drawn in raster order from a seeded engine.
inline Phantom generate(const PhantomSpec& spec) {
    validate(spec);
    const TruthCurves tc = truth_curves(spec);
    const auto cols = static_cast<std::size_t>(spec.cols);
    Phantom out;
    out.truth.ilm = {BoundaryLabel::ILM, std::vector<int>(cols), 0.0};
    out.truth.rnfl = {BoundaryLabel::RNFL, std::vector<int>(cols), 0.0};
    out.truth.rpe = {BoundaryLabel::RPE, std::vector<int>(cols), 0.0};
    for (std::size_t c = 0; c < cols; ++c) {
        out.truth.ilm.row[c] = static_cast<int>(std::lround(tc.ilm[c]));
        out.truth.rnfl.row[c] = static_cast<int>(std::lround(tc.rnfl[c]));
        out.truth.rpe.row[c] = static_cast<int>(std::lround(tc.rpe[c]));
    }

    const LayerIntensities& in = spec.intensity;
    ImageF px(spec.rows, spec.cols);
    for (int c = 0; c < spec.cols; ++c) {
        const int ilm = out.truth.ilm[c], rnfl = out.truth.rnfl[c], rpe = out.truth.rpe[c];
        double rnfl_level = in.rnfl_band;
        for (const auto& b : spec.bands)
            if (c >= b.first_col && c <= b.last_col && b.rnfl_intensity >= 0.0) rnfl_level = b.rnfl_intensity;
        for (int r = 0; r < spec.rows; ++r) {
            double v;
            if (r <= ilm)
                v = in.vitreous;
            else if (r <= rnfl)
                v = rnfl_level;
            else if (r <= rpe)
                v = in.inner_tissue;
            else if (r <= rpe + spec.rpe_thickness)
                v = in.rpe_band;
            else
                v = in.below;
            px(r, c) = v;
        }
        for (const auto& b : spec.bands) {
            if (c < b.first_col || c > b.last_col) continue;
            const int top = rnfl + 1 + static_cast<int>(std::lround(b.depth));
            int r = top;
            auto put = [&](double v) {
                if (r > rnfl && r <= rpe) px(r, c) = v;
            };
            for (int i = 1; i <= b.ramp_thickness; ++i, ++r)
                put(in.inner_tissue + (b.cap_intensity - in.inner_tissue) * i / (b.ramp_thickness + 1));
            for (int i = 0; i < b.cap_thickness; ++i, ++r)
                put(b.cap_intensity);
            for (int i = 0; i < b.body_thickness; ++i, ++r) put(b.body_intensity);
            for (int i = 1; i <= b.fade_thickness; ++i, ++r)
                put(b.body_intensity + (in.inner_tissue - b.body_intensity) * i / (b.fade_thickness + 1));
        }
        for (const auto& v : spec.vessels) {
            if (c < v.column - v.width / 2.0 || c >= v.column + v.width / 2.0) continue;
            for (int r = ilm + 1; r < spec.rows; ++r) px(r, c) *= v.attenuation;
        }
    }

    if (spec.speckle_sigma > 0.0) {
        std::mt19937_64 engine(spec.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& v : px.values()) v = std::clamp(v * (1.0 + spec.speckle_sigma * normal(engine)), 0.0, 1.0);
    }
    out.image = BScan(std::move(px), "phantom-seed-" + std::to_string(spec.seed));
    return out;
}

// ---------------------------------------------------------------------------
// Scoring

struct BoundaryScore {
    std::string label;
    double mae = 0.0;
    int max_abs = 0;
    double within_1px = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct Tolerances {
    double ilm = 1.0;
    double rnfl = 1.0;
    double rpe = 1.0;
};

struct EvalReport {
    std::array<BoundaryScore, 3> boundaries;  // ILM, RNFL, RPE
    bool pass = true;
};

inline BoundaryScore score_boundary(const Boundary& pred, const Boundary& truth, double tolerance) {
    require(pred.cols() == truth.cols(), ErrorCode::DimensionMismatch,
            "column count mismatch: " + std::to_string(pred.cols()) + " vs " + std::to_string(truth.cols()));
    BoundaryScore s{std::string(graph::to_string(truth.label)), 0.0, 0, 0.0, tolerance, true};
    if (pred.row.empty()) return s;
    long long sum = 0;
    int within = 0;
    for (int c = 0; c < pred.cols(); ++c) {
        const int err = std::abs(pred[c] - truth[c]);
        sum += err;
        s.max_abs = std::max(s.max_abs, err);
        within += err <= 1 ? 1 : 0;
    }
    s.mae = static_cast<double>(sum) / pred.cols();
    s.within_1px = static_cast<double>(within) / pred.cols();
    s.pass = s.mae <= tolerance;
    return s;
}

inline EvalReport evaluate(const GroundTruth& pred, const GroundTruth& truth, const Tolerances& tol = {}) {
    EvalReport r;
    r.boundaries[0] = score_boundary(pred.ilm, truth.ilm, tol.ilm);
    r.boundaries[1] = score_boundary(pred.rnfl, truth.rnfl, tol.rnfl);
    r.boundaries[2] = score_boundary(pred.rpe, truth.rpe, tol.rpe);
    r.pass = std::all_of(r.boundaries.begin(), r.boundaries.end(), [](auto& b) { return b.pass; });
    return r;
}

}  // namespace octseg::phantom
