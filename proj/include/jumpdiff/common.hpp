#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpdiff {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using Span = std::span<double>;

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// State left the configured safety box; carries the model time at which it happened.
struct ExplosionError : std::runtime_error {
    double time;
    explicit ExplosionError(double t)
        : std::runtime_error("state left safety box at t=" + std::to_string(t)), time(t) {}
};

inline double sq(double x) { return x * x; }

inline double norm2(ConstSpan x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double dist2(ConstSpan a, ConstSpan b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += sq(a[i] - b[i]);
    return std::sqrt(s);
}

inline void check(bool ok, const std::string& what) {
    if (!ok) throw ModelError(what);
}

}  // namespace jumpdiff
