#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace chitree {

// Seeded generator with hand-rolled variate transforms.  std::* distributions
// are implementation-defined, so every transform lives here to keep output
// byte-identical across compilers and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : material_(mix64(seed)), engine_(material_) {}

    // Independent child stream; derive(i) and derive(j) do not collide for i != j.
    Rng derive(std::uint64_t stream) const {
        Rng child(0);
        child.material_ = mix64(material_ + 0x9e3779b97f4a7c15ull * (stream + 1));
        child.engine_.seed(child.material_);
        child.have_spare_ = false;
        return child;
    }

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer on [0, n)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = max - max % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // standard normal via Box-Muller; the pair partner is cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double chi_squared_1() {
        const double z = normal();
        return z * z;
    }

    // index into a fixed probability vector by CDF inversion
    int categorical(const std::vector<double>& probs) {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

private:
    static std::uint64_t mix64(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t material_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace chitree
