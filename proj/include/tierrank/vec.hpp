#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace tierrank {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

inline std::vector<double> normalized(std::span<const double> a) {
    std::vector<double> out(a.begin(), a.end());
    const double n = norm(a);
    if (n > 0.0) {
        for (double& x : out) x /= n;
    }
    return out;
}

}  // namespace tierrank
