#pragma once

// Phantom families shared by the unit tests and the acceptance runner.

#include <cstdint>

#include "octseg/phantom.hpp"

namespace suites {

using octseg::phantom::Curve;
using octseg::phantom::FoveaSpec;
using octseg::phantom::HyperreflectiveBand;
using octseg::phantom::PhantomSpec;

// Tilted layers with a fovea dip; i in [0, 20) varies tilt, dip depth and RNFL thickness.
inline PhantomSpec layered(int i, double speckle_sigma = 0.0, std::uint64_t seed = 1) {
    PhantomSpec s = PhantomSpec::default_spec();
    const double tilt = (i % 5 - 2) * 0.08;
    s.ilm = Curve::line(0.0, 40.0, 255.0, 40.0 + tilt * 127.5);
    s.rnfl = Curve::line(0.0, 50.0, 255.0, 50.0 + tilt * 127.5 + i % 3);
    s.rpe = Curve::line(0.0, 108.0, 255.0, 108.0 + tilt * 255.0);
    s.fovea->dip_depth = 4.0 + i % 7;
    s.speckle_sigma = speckle_sigma;
    s.seed = seed;
    return s;
}

// RNFL fades over the right third and slightly beyond, where a brighter band with a sharp
// light-to-dark drop sits a few rows deeper inside the RNFL search region.
inline PhantomSpec false_edge(int i) {
    PhantomSpec s = PhantomSpec::default_spec();
    s.fovea.reset();
    const double tilt = (i % 5 - 2) * 0.03;
    s.ilm = Curve::line(0.0, 40.0, 255.0, 40.0 + tilt * 255.0);
    s.rnfl = Curve::line(0.0, 50.0 + i % 3, 255.0, 50.0 + i % 3 + tilt * 255.0);
    s.rpe = Curve::line(0.0, 112.0, 255.0, 112.0 + tilt * 255.0);
    s.intensity.rpe_band = 1.0;
    HyperreflectiveBand b;
    b.first_col = 166.0;  // 90 of 256 columns, mostly inside the right section
    b.last_col = 255.0;
    b.depth = 3.0 + i % 4;
    b.rnfl_intensity = 0.4;
    s.bands.push_back(b);
    return s;
}

// RNFL thickness pinched to zero over the fovea.
inline PhantomSpec pinch(int i) {
    PhantomSpec s = PhantomSpec::default_spec();
    s.fovea = FoveaSpec{110.0 + 4.0 * i, 30.0 + 2.0 * i, 6.0 + i % 5, true, 12.0};
    return s;
}

}  // namespace suites
