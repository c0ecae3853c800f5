#pragma once

#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "notefuse/core/errors.hpp"

namespace notefuse::eval {

struct Interval {
    double low = 0.0;
    double high = 0.0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n-1), the display quantity
};

// Student-t interval: mean +/- t(level, n-1) * std / sqrt(n).
inline Interval confidence_interval(const std::vector<double>& values, double level = 0.95) {
    const size_t n = values.size();
    if (n < 2) throw input_error("confidence_interval: need at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double std = std::sqrt(ss / static_cast<double>(n - 1));

    boost::math::students_t dist(static_cast<double>(n - 1));
    const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
    const double half = t * std / std::sqrt(static_cast<double>(n));
    return {mean - half, mean + half, mean, std};
}

}  // namespace notefuse::eval
