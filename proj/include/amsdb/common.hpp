#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace amsdb {

using i64 = std::int64_t;
using Shape = std::vector<i64>;

inline i64 numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), i64{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

// Error taxonomy; the CLI maps these onto its exit-code contract
// (ConfigError/ShapeError/ValueError -> 1, DataError -> 2, NumericError -> 3).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct ValueError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distributions here are hand-rolled so streams are reproducible independent
// of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    i64 index(i64 n) {
        return static_cast<i64>(uniform() * static_cast<double>(n)) % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; one draw consumed per call pair, cached in between.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // normal(0, stddev) resampled into [-2*stddev, 2*stddev]
    double trunc_normal(double stddev) {
        for (;;) {
            const double x = normal() * stddev;
            if (std::abs(x) <= 2.0 * stddev) return x;
        }
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (i64 i = static_cast<i64>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<std::size_t>(i)],
                      v[static_cast<std::size_t>(index(i + 1))]);
        }
    }

    // Independent child stream (used to split init/shuffle/augment streams).
    Rng fork(std::uint64_t salt) {
        return Rng(eng_() ^ (salt * 0x9e3779b97f4a7c15ull));
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace amsdb
