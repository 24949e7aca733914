#pragma once

// JSON run configuration: one object per module section plus `phantom` and `io`.
// Absent keys keep their defaults; unknown keys and out-of-range values are errors.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "octseg/error.hpp"
#include "octseg/layers.hpp"
#include "octseg/phantom.hpp"

namespace octseg::config {

using json = nlohmann::ordered_json;

struct IoConfig {
    std::string output_dir = ".";
    std::vector<std::string> formats{"csv", "json"};
    bool overlay = false;
    int jobs = 1;

    bool wants(std::string_view format) const {
        return std::find(formats.begin(), formats.end(), format) != formats.end();
    }

    void validate() const {
        require(!formats.empty(), ErrorCode::ConfigError, "io.formats must name at least one format");
        for (const auto& f : formats)
            require(f == "csv" || f == "json", ErrorCode::ConfigError, "io.formats entries must be csv or json");
        require(jobs >= 1 && jobs <= 256, ErrorCode::ConfigError, "io.jobs must lie in [1,256]");
    }
};

struct RunConfig {
    layers::SegmentConfig segment;
    phantom::PhantomSpec phantom = phantom::PhantomSpec::default_spec();
    IoConfig io;

    void validate() const {
        segment.validate();
        io.validate();
    }
};

// ---------------------------------------------------------------------------
// Field visitors shared by reading and writing

template <typename V>
void visit(preprocess::PreprocessConfig& c, V& v) {
    v("smooth_kernel", c.smooth_kernel);
    v("smooth_sigma", c.smooth_sigma);
    v("column_median_window", c.column_median_window);
    v("binarize_method", c.binarize_method);
    v("fixed_threshold", c.fixed_threshold);
    v("closing_se", c.closing_se);
    v("min_area_px", c.min_area_px);
    v("band_area_floor", c.band_area_floor);
}

template <typename V>
void visit(graph::GraphConfig& c, V& v) {
    v("w_min", c.w_min);
    v("max_vertical_step", c.max_vertical_step);
}

template <typename V>
void visit(layers::LayersConfig& c, V& v) {
    v("rpe_half_band", c.rpe_half_band);
    v("ilm_clearance", c.ilm_clearance);
    v("rpe_median_window", c.rpe_median_window);
    v("edge_margin", c.edge_margin);
    v("gap_threshold", c.gap_threshold);
    v("fallback_depth_divisor", c.fallback_depth_divisor);
    v("presmooth_gradients", c.presmooth_gradients);
}

template <typename V>
void visit(layers::Phase2Config& c, V& v) {
    v("enabled", c.enabled);
    v("k", c.k);
    v("depth_px", c.depth_px);
    v("low_fraction", c.low_fraction);
    v("shift_px", c.shift_px);
    v("rank_lo", c.rank_lo);
    v("rank_hi", c.rank_hi);
    v("max_iterations", c.max_iterations);
    v("extra_probe", c.extra_probe);
    v("invert_polarity", c.invert_polarity);
}

template <typename V>
void visit(metrics::MetricsConfig& c, V& v) {
    v("axial_scale", c.axial_scale);
    v("rpe_half_window", c.rpe_half_window);
}

template <typename V>
void visit(IoConfig& c, V& v) {
    v("output_dir", c.output_dir);
    v("formats", c.formats);
    v("overlay", c.overlay);
    v("jobs", c.jobs);
}

template <typename V>
void visit(phantom::LayerIntensities& c, V& v) {
    v("vitreous", c.vitreous);
    v("rnfl_band", c.rnfl_band);
    v("inner_tissue", c.inner_tissue);
    v("rpe_band", c.rpe_band);
    v("below", c.below);
}

template <typename V>
void visit(phantom::FoveaSpec& c, V& v) {
    v("center", c.center);
    v("width", c.width);
    v("dip_depth", c.dip_depth);
    v("rnfl_pinch", c.rnfl_pinch);
    v("pinch_taper", c.pinch_taper);
}

template <typename V>
void visit(phantom::VesselSpec& c, V& v) {
    v("column", c.column);
    v("width", c.width);
    v("attenuation", c.attenuation);
}

template <typename V>
void visit(phantom::HyperreflectiveBand& c, V& v) {
    v("first_col", c.first_col);
    v("last_col", c.last_col);
    v("depth", c.depth);
    v("ramp_thickness", c.ramp_thickness);
    v("cap_thickness", c.cap_thickness);
    v("cap_intensity", c.cap_intensity);
    v("body_thickness", c.body_thickness);
    v("body_intensity", c.body_intensity);
    v("fade_thickness", c.fade_thickness);
    v("rnfl_intensity", c.rnfl_intensity);
}

template <typename V>
void visit(phantom::PhantomSpec& c, V& v) {
    v("rows", c.rows);
    v("cols", c.cols);
    v("ilm_curve", c.ilm);
    v("rnfl_curve", c.rnfl);
    v("rpe_curve", c.rpe);
    v("rpe_thickness", c.rpe_thickness);
    v("intensity", c.intensity);
    v("fovea", c.fovea);
    v("vessels", c.vessels);
    v("bands", c.bands);
    v("speckle_sigma", c.speckle_sigma);
    v("seed", c.seed);
}

template <typename V>
void visit(RunConfig& c, V& v) {
    v("preprocess", c.segment.preprocess);
    v("graph", c.segment.graph);
    v("layers", c.segment.layers);
    v("phase2", c.segment.phase2);
    v("metrics", c.segment.metrics);
    v("phantom", c.phantom);
    v("io", c.io);
}

// ---------------------------------------------------------------------------
// Reading

template <typename T>
void read_value(const json& j, T& out, const std::string& where);

class Reader {
public:
    Reader(const json& object, std::string where) : object_(object), where_(std::move(where)) {
        require(object_.is_object(), ErrorCode::ConfigError, where_label() + " must be an object");
    }

    template <typename T>
    void operator()(const char* key, T& field) {
        known_.insert(key);
        const auto it = object_.find(key);
        if (it == object_.end()) return;
        read_value(*it, field, where_.empty() ? key : where_ + "." + key);
    }

    void finish() const {
        for (const auto& [key, value] : object_.items())
            require(known_.count(key) != 0, ErrorCode::ConfigError, "unknown key '" + qualified(key) + "'");
    }

private:
    std::string where_label() const { return where_.empty() ? "config" : where_; }
    std::string qualified(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    const json& object_;
    std::string where_;
    std::set<std::string> known_;
};

inline void read_curve(const json& j, phantom::Curve& out, const std::string& where) {
    if (j.is_number()) {
        out = phantom::Curve::flat(j.get<double>());
        return;
    }
    require(j.is_array() && !j.empty(), ErrorCode::ConfigError,
            where + " must be a number or a non-empty array of [col, row] pairs");
    std::vector<phantom::ControlPoint> points;
    for (const auto& p : j) {
        require(p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number(), ErrorCode::ConfigError,
                where + " entries must be [col, row] pairs");
        points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    try {
        out = phantom::Curve(std::move(points));
    } catch (const Error& err) {
        throw Error(ErrorCode::ConfigError, where + ": " + err.what());
    }
}

template <typename T>
void read_value(const json& j, T& out, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
        require(j.is_boolean(), ErrorCode::ConfigError, where + " must be a boolean");
        out = j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        require(j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0), ErrorCode::ConfigError,
                where + " must be a non-negative integer");
        out = j.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
        require(j.is_number_integer(), ErrorCode::ConfigError, where + " must be an integer");
        const long long v = j.get<long long>();
        require(v >= std::numeric_limits<T>::min() && v <= std::numeric_limits<T>::max(), ErrorCode::ConfigError,
                where + " is out of range");
        out = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
        require(j.is_number(), ErrorCode::ConfigError, where + " must be a number");
        out = j.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        require(j.is_string(), ErrorCode::ConfigError, where + " must be a string");
        out = j.get<std::string>();
    } else if constexpr (std::is_same_v<T, preprocess::BinarizeMethod>) {
        require(j.is_string(), ErrorCode::ConfigError, where + " must be \"otsu\" or \"fixed\"");
        const auto s = j.get<std::string>();
        require(s == "otsu" || s == "fixed", ErrorCode::ConfigError, where + " must be \"otsu\" or \"fixed\"");
        out = s == "otsu" ? preprocess::BinarizeMethod::Otsu : preprocess::BinarizeMethod::Fixed;
    } else if constexpr (std::is_same_v<T, phantom::Curve>) {
        read_curve(j, out, where);
    } else if constexpr (requires { typename T::value_type; out.has_value(); }) {
        if (j.is_null()) {
            out.reset();
        } else {
            typename T::value_type v = out.value_or(typename T::value_type{});
            read_value(j, v, where);
            out = std::move(v);
        }
    } else if constexpr (requires { typename T::value_type; out.push_back(std::declval<typename T::value_type>()); }) {
        require(j.is_array(), ErrorCode::ConfigError, where + " must be an array");
        T items;
        for (std::size_t i = 0; i < j.size(); ++i) {
            typename T::value_type v{};
            read_value(j[i], v, where + "[" + std::to_string(i) + "]");
            items.push_back(std::move(v));
        }
        out = std::move(items);
    } else {
        Reader reader(j, where);
        visit(out, reader);
        reader.finish();
    }
}

// ---------------------------------------------------------------------------
// Writing

template <typename T>
json write_value(const T& value);

class Writer {
public:
    template <typename T>
    void operator()(const char* key, T& field) {
        out[key] = write_value(field);
    }

    json out = json::object();
};

template <typename T>
json write_value(const T& value) {
    if constexpr (std::is_same_v<T, preprocess::BinarizeMethod>) {
        return value == preprocess::BinarizeMethod::Otsu ? "otsu" : "fixed";
    } else if constexpr (std::is_same_v<T, phantom::Curve>) {
        json points = json::array();
        for (const auto& p : value.points()) points.push_back({p.col, p.row});
        return points;
    } else if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) {
        return value;
    } else if constexpr (requires { typename T::value_type; value.has_value(); }) {
        return value ? write_value(*value) : json();
    } else if constexpr (requires { typename T::value_type; value.begin(); }) {
        json items = json::array();
        for (const auto& v : value) items.push_back(write_value(v));
        return items;
    } else {
        Writer writer;
        visit(const_cast<T&>(value), writer);
        return writer.out;
    }
}

// ---------------------------------------------------------------------------
// Entry points

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& err) {
        throw Error(ErrorCode::ConfigError, origin + ": " + err.what());
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    std::error_code ec;
    require(std::filesystem::is_regular_file(path, ec), ErrorCode::ConfigError,
            "config file not found: " + path.string());
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::ConfigError, "cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_json_text(text.str(), path.string());
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    read_value(j, cfg, "");
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json_file(path)); }

inline json to_json(const RunConfig& cfg) { return write_value(cfg); }

inline phantom::PhantomSpec phantom_spec_from_json(const json& j) {
    phantom::PhantomSpec spec = phantom::PhantomSpec::default_spec();
    read_value(j, spec, "phantom");
    return spec;
}

inline phantom::PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
    return phantom_spec_from_json(read_json_file(path));
}

inline json to_json(const phantom::PhantomSpec& spec) { return write_value(spec); }

}  // namespace octseg::config
