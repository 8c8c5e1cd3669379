// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace saeaudit {

// Regularized incomplete beta I_x(a, b), evaluated with the modified Lentz
// continued fraction. Absolute error is below 1e-13 for the (a, b) ranges a
// t-test produces.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided_p(double t, double dof);

enum class TestFlag {
    ok,
    zero_variance,  // all differences equal; t is +-inf (or 0 when the mean is 0)
    too_few_samples,  // n < 2, no test performed
};

std::string_view to_string(TestFlag f);

struct TTestResult {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1)
    double t = 0.0;
    double p = 1.0;
    std::size_t dof = 0;
    TestFlag flag = TestFlag::ok;

    bool degenerate() const { return flag != TestFlag::ok; }
};

// Paired two-sided t-test on already-differenced values (one-sample test of
// mean zero, n - 1 degrees of freedom).
TTestResult paired_t_test(std::span<const double> differences);

}  // namespace saeaudit
