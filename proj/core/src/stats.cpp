// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/stats.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {
namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;

double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEpsilon) return h;
    }
    fail(ErrorCode::degenerate, fmt::format("incomplete beta continued fraction did not converge (a={}, b={}, x={})", a, b, x));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, ErrorCode::invalid_argument, "incomplete beta needs a, b > 0");
    require(x >= 0.0 && x <= 1.0, ErrorCode::invalid_argument, "incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    require(dof > 0.0, ErrorCode::invalid_argument, "t distribution needs dof > 0");
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

double student_t_cdf(double t, double dof) {
    const double tail = 0.5 * student_t_two_sided_p(t, dof);
    return t > 0.0 ? 1.0 - tail : tail;
}

std::string_view to_string(TestFlag f) {
    switch (f) {
        case TestFlag::ok: return "ok";
        case TestFlag::zero_variance: return "zero_variance";
        case TestFlag::too_few_samples: return "too_few_samples";
    }
    return "unknown";
}

TTestResult paired_t_test(std::span<const double> differences) {
    TTestResult r;
    r.n = differences.size();
    require(r.n >= 1, ErrorCode::invalid_argument, "paired t-test needs at least one difference");
    for (double d : differences) {
        require(std::isfinite(d), ErrorCode::non_finite, "paired t-test input is not finite");
        r.mean += d;
    }
    r.mean /= static_cast<double>(r.n);
    if (r.n < 2) {
        r.flag = TestFlag::too_few_samples;
        r.t = std::numeric_limits<double>::quiet_NaN();
        r.p = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    double ss = 0.0;
    for (double d : differences) ss += (d - r.mean) * (d - r.mean);
    r.dof = r.n - 1;
    r.stddev = std::sqrt(ss / static_cast<double>(r.dof));
    if (r.stddev == 0.0) {
        r.flag = TestFlag::zero_variance;
        if (r.mean == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean);
            r.p = 0.0;
        }
        return r;
    }
    r.t = r.mean / (r.stddev / std::sqrt(static_cast<double>(r.n)));
    r.p = student_t_two_sided_p(r.t, static_cast<double>(r.dof));
    return r;
}

}  // namespace saeaudit
