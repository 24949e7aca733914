#pragma once

// Deliberately naive reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "octseg/image.hpp"

namespace oracle {

using octseg::BinaryImage;
using octseg::Grid;
using octseg::ImageF;

// Direct 2-D convolution with a 2-D Gaussian normalized over the full window; replicate borders.
inline ImageF gaussian(const ImageF& img, int size, double sigma) {
    const int half = size / 2;
    double norm = 0.0;
    for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j) norm += std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
    ImageF out(img.rows(), img.cols());
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i)
                for (int j = -half; j <= half; ++j) {
                    const int rr = std::clamp(r + i, 0, img.rows() - 1);
                    const int cc = std::clamp(c + j, 0, img.cols() - 1);
                    acc += std::exp(-(i * i + j * j) / (2.0 * sigma * sigma)) / norm * img(rr, cc);
                }
            out(r, c) = std::clamp(acc, 0.0, 1.0);
        }
    return out;
}

// Sort the replicate-padded window and take its middle element.
inline ImageF column_median(const ImageF& img, int window) {
    const int half = window / 2;
    ImageF out(img.rows(), img.cols());
    for (int c = 0; c < img.cols(); ++c)
        for (int r = 0; r < img.rows(); ++r) {
            std::vector<double> w;
            for (int i = r - half; i <= r + half; ++i) w.push_back(img(std::clamp(i, 0, img.rows() - 1), c));
            std::sort(w.begin(), w.end());
            out(r, c) = w[w.size() / 2];
        }
    return out;
}

// Otsu by exhaustive search: every cut re-partitions the raw pixel list from scratch.
// Returns the first cut with the largest between-class variance, or -1 if none is valid.
inline int otsu_cut(const ImageF& img) {
    std::vector<int> bins;
    for (double v : img.values()) bins.push_back(std::clamp(static_cast<int>(std::floor(v * 256)), 0, 255));
    int best_cut = -1;
    double best = 0.0;
    for (int t = 0; t < 255; ++t) {
        double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (int b : bins) {
            if (b <= t) {
                n0 += 1;
                s0 += b;
            } else {
                n1 += 1;
                s1 += b;
            }
        }
        if (n0 == 0 || n1 == 0) continue;
        const double d = s0 / n0 - s1 / n1;
        const double between = n0 * n1 * d * d;
        if (between > best) {
            best = between;
            best_cut = t;
        }
    }
    return best_cut;
}

// Closing by set algebra on the unbounded plane with B = {0..s-1}^2:
// D = X (+) B, C = {q : q + b in D for all b in B}, restricted to the image window.
inline BinaryImage closing(const BinaryImage& img, int side) {
    std::set<std::pair<int, int>> dilated;
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c)
            if (img(r, c))
                for (int i = 0; i < side; ++i)
                    for (int j = 0; j < side; ++j) dilated.insert({r + i, c + j});
    BinaryImage out(img.rows(), img.cols());
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            bool all = true;
            for (int i = 0; i < side && all; ++i)
                for (int j = 0; j < side && all; ++j) all = dilated.count({r + i, c + j}) > 0;
            out(r, c) = all ? 1 : 0;
        }
    return out;
}

// Breadth-first flood fill, 8-connectivity. Returns per-pixel component ids (0 = background)
// and component areas indexed by id.
inline std::pair<Grid<int>, std::vector<int>> flood_label(const BinaryImage& img) {
    Grid<int> ids(img.rows(), img.cols(), 0);
    std::vector<int> areas{0};
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            if (!img(r, c) || ids(r, c)) continue;
            const int id = static_cast<int>(areas.size());
            areas.push_back(0);
            std::deque<std::pair<int, int>> queue{{r, c}};
            ids(r, c) = id;
            while (!queue.empty()) {
                auto [y, x] = queue.front();
                queue.pop_front();
                ++areas.back();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (img.in_bounds(yy, xx) && img(yy, xx) && !ids(yy, xx)) {
                            ids(yy, xx) = id;
                            queue.push_back({yy, xx});
                        }
                    }
            }
        }
    return {std::move(ids), std::move(areas)};
}

inline BinaryImage remove_small(const BinaryImage& img, int min_area) {
    auto [ids, areas] = flood_label(img);
    BinaryImage out = img;
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c)
            if (ids(r, c) && areas[static_cast<std::size_t>(ids(r, c))] < min_area) out(r, c) = 0;
    return out;
}

// Minimum cost over every left-to-right path with |step| <= max_step, priced as
// w_min + sum of (2 - g_a - g_b + w_min) left to right + w_min.
inline double brute_force_min_path(const Grid<double>& g, int max_step, double w_min) {
    const int rows = g.rows(), cols = g.cols();
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> path(static_cast<std::size_t>(cols));
    std::function<void(int, double)> extend = [&](int c, double acc) {
        if (c == cols) {
            best = std::min(best, acc + w_min);
            return;
        }
        const int prev = path[static_cast<std::size_t>(c - 1)];
        for (int r = std::max(0, prev - max_step); r <= std::min(rows - 1, prev + max_step); ++r) {
            path[static_cast<std::size_t>(c)] = r;
            extend(c + 1, acc + (2.0 - (g(prev, c - 1) + g(r, c)) + w_min));
        }
    };
    for (int r = 0; r < rows; ++r) {
        path[0] = r;
        extend(1, w_min);
    }
    return best;
}

// Mean over {(r, c) : upper[c] <= r <= lower[c]} by explicit double loop.
inline double band_mean(const ImageF& img, const std::vector<int>& upper, const std::vector<int>& lower) {
    double sum = 0.0;
    long long n = 0;
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c)
            if (r >= upper[static_cast<std::size_t>(c)] && r <= lower[static_cast<std::size_t>(c)]) {
                sum += img(r, c);
                ++n;
            }
    return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace oracle
