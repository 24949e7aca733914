// Segments a B-scan file and prints a coarse RNFL thickness profile in micrometres.
//
//   thickness_report <image.pgm|image.png> [um_per_px]

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "octseg/octseg.hpp"

using namespace octseg;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: thickness_report <image> [um_per_px]\n";
        return 2;
    }
    try {
        const BScan scan = io::load_grayscale(argv[1]);
        layers::SegmentConfig cfg;
        cfg.metrics.axial_scale = argc > 2 ? std::atof(argv[2]) : 3.9;
        const layers::SegmentationResult r = layers::segment_all(scan, cfg);

        const std::vector<double> um = r.metrics.rnfl.micrometres();
        const int step = std::max(1, r.cols / 16);
        std::cout << "column  rnfl_um  total_um\n" << std::fixed << std::setprecision(1);
        for (int c = 0; c < r.cols; c += step)
            std::cout << std::setw(6) << c << std::setw(9) << um[static_cast<std::size_t>(c)] << std::setw(10)
                      << r.metrics.total.micrometres()[static_cast<std::size_t>(c)] << '\n';
        std::cout << "mean RNFL " << r.metrics.rnfl.mean() * *cfg.metrics.axial_scale << " um\n";
        for (const auto& flag : r.flags.names()) std::cout << "flag: " << flag << '\n';
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
