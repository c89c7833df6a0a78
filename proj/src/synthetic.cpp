#include "chitree/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "chitree/rng.hpp"

namespace chitree {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;

std::vector<std::string> letter_levels(int n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
    return out;
}

std::vector<std::string> numbered_levels(int n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) out.push_back("v" + std::to_string(i));
    return out;
}

} // namespace

Dataset gen_chessboard(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> cls(n);
    std::vector<double> x1(n), x2(n);
    std::vector<std::vector<double>> noise(8, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const int label = static_cast<int>(rng.below(2)); // 0-based; class 1 on even cells
        cls[r] = label == 0 ? "1" : "2";
        // pick one of the 8 board cells whose color matches the class
        const int pick = static_cast<int>(rng.below(8));
        int seen = 0, ci = 0, cj = 0;
        for (int i = 0; i < 4 && seen <= pick; ++i) {
            for (int j = 0; j < 4 && seen <= pick; ++j) {
                if ((i + j) % 2 != label) continue;
                ci = i;
                cj = j;
                ++seen;
            }
        }
        x1[r] = -1.0 + 0.5 * (static_cast<double>(ci) + rng.uniform());
        x2[r] = -1.0 + 0.5 * (static_cast<double>(cj) + rng.uniform());
        for (int v = 0; v < 8; ++v) noise[v][r] = rng.uniform();
    }
    DatasetBuilder b(n);
    b.set_class(cls);
    b.add_numeric("X1", std::move(x1));
    b.add_numeric("X2", std::move(x2));
    for (int v = 0; v < 8; ++v) b.add_numeric("X" + std::to_string(v + 3), std::move(noise[v]));
    return b.build();
}

Dataset gen_circle_lines(std::size_t n, std::uint64_t seed) {
    if (n == 0 || n % 3 != 0)
        throw std::invalid_argument("circle-lines size must be a positive multiple of 3");
    Rng rng(seed);
    std::vector<std::string> cls(n);
    std::vector<double> x1(n), x2(n);
    std::vector<std::vector<double>> noise(3, std::vector<double>(n));
    std::vector<std::vector<std::int32_t>> cats(3, std::vector<std::int32_t>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const int label = static_cast<int>(r % 3);
        cls[r] = std::to_string(label + 1);
        if (label == 0) {
            const double theta = rng.uniform(0.0, kTwoPi);
            x1[r] = std::cos(theta);
            x2[r] = std::sin(theta);
        } else {
            const double u = rng.uniform(-1.0, 1.0);
            x1[r] = u;
            x2[r] = label == 1 ? u : -u;
        }
        for (int v = 0; v < 3; ++v) noise[v][r] = rng.uniform();
        for (int v = 0; v < 3; ++v) cats[v][r] = static_cast<std::int32_t>(rng.below(21));
    }
    DatasetBuilder b(n);
    b.set_class(cls);
    b.add_numeric("X1", std::move(x1));
    b.add_numeric("X2", std::move(x2));
    for (int v = 0; v < 3; ++v) b.add_numeric("X" + std::to_string(v + 3), std::move(noise[v]));
    for (int v = 0; v < 3; ++v)
        b.add_categorical("X" + std::to_string(v + 6), std::move(cats[v]), numbered_levels(21));
    return b.build();
}

Dataset gen_bias_scenario(BiasKind kind, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> cls(n);
    std::vector<std::int32_t> x1(n), x2(n), x3(n);
    std::vector<double> x4(n), x5(n), x6(n);

    // joint cell probabilities of (X2, X3) in the dependence scenario,
    // row-major over 3 x 6 cells
    static const double joint[18] = {
        1.0 / 12, 1.0 / 12, 1.0 / 24, 1.0 / 24, 1.0 / 24, 1.0 / 24,
        1.0 / 24, 1.0 / 24, 1.0 / 12, 1.0 / 12, 1.0 / 24, 1.0 / 24,
        1.0 / 24, 1.0 / 24, 1.0 / 24, 1.0 / 24, 1.0 / 12, 1.0 / 12,
    };

    for (std::size_t r = 0; r < n; ++r) {
        cls[r] = rng.below(2) == 0 ? "1" : "2";
        x1[r] = static_cast<std::int32_t>(rng.below(2));
        if (kind == BiasKind::Independence) {
            const double u = rng.uniform();
            x2[r] = u < 1.0 / 6 ? 0 : (u < 0.5 ? 1 : 2);
            x3[r] = static_cast<std::int32_t>(rng.below(6));
            x4[r] = rng.chi_squared_1();
            x5[r] = rng.normal();
        } else {
            const double u = rng.uniform();
            double acc = 0.0;
            int cell = 17;
            for (int c = 0; c < 18; ++c) {
                acc += joint[c];
                if (u < acc) {
                    cell = c;
                    break;
                }
            }
            x2[r] = cell / 6;
            x3[r] = cell % 6;
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            x4[r] = z1;
            x5[r] = 0.7 * z1 + std::sqrt(1.0 - 0.49) * z2;
        }
        x6[r] = rng.uniform();
    }
    DatasetBuilder b(n);
    b.set_class(cls);
    b.add_categorical("X1", std::move(x1), letter_levels(2));
    b.add_categorical("X2", std::move(x2), letter_levels(3));
    b.add_categorical("X3", std::move(x3), letter_levels(6));
    b.add_numeric("X4", std::move(x4));
    b.add_numeric("X5", std::move(x5));
    b.add_numeric("X6", std::move(x6));
    return b.build();
}

} // namespace chitree
