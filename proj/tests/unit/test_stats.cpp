// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/stats.hpp"

using namespace saeaudit;

namespace {

// Two-sided p from Boost's Student-t, independent of the library's
// continued-fraction evaluation.
double boost_two_sided(double t, double dof) {
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

TEST_CASE("incomplete beta against Boost") {
    for (double a : {0.5, 1.0, 2.5, 15.0})
        for (double b : {0.5, 1.0, 3.0})
            for (double x : {0.0, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0})
                CHECK(incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-12));
    CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.5), Error);
    CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), Error);
}

TEST_CASE("Student-t CDF against Boost") {
    for (double dof : {1.0, 2.0, 4.0, 29.0, 200.0})
        for (double t : {-40.0, -3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 8.0}) {
            boost::math::students_t dist(dof);
            CHECK(std::abs(student_t_cdf(t, dof) - boost::math::cdf(dist, t)) < 1e-12);
        }
    CHECK(student_t_cdf(0.0, 5.0) == 0.5);
    CHECK(student_t_two_sided_p(0.0, 5.0) == 1.0);
}

TEST_CASE("paired t-test p-values match an independent t CDF for n in {2, 5, 30}") {
    Rng rng(31);
    for (std::size_t n : {2u, 5u, 30u})
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> d(n);
            const double shift = rng.uniform(-1.0, 1.0);
            for (auto& x : d) x = shift + rng.normal();
            const auto r = paired_t_test(d);
            REQUIRE(r.flag == TestFlag::ok);
            double mean = 0.0;
            for (double x : d) mean += x;
            mean /= static_cast<double>(n);
            double ss = 0.0;
            for (double x : d) ss += (x - mean) * (x - mean);
            const double sd = std::sqrt(ss / static_cast<double>(n - 1));
            const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
            CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
            CHECK(r.dof == n - 1);
            CHECK(std::abs(r.p - boost_two_sided(t, static_cast<double>(n - 1))) < 1e-6);
        }
}

TEST_CASE("closed forms") {
    const auto r = paired_t_test(std::vector<double>{1.0, -1.0});
    CHECK(r.mean == 0.0);
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
    // n = 2 has one degree of freedom: p = 1 - 2 atan(|t|) / pi.
    const auto s = paired_t_test(std::vector<double>{1.0, 3.0});
    CHECK(s.t == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.p == doctest::Approx(1.0 - 2.0 * std::atan(2.0) / M_PI).epsilon(1e-12));
}

TEST_CASE("degenerate samples are flagged") {
    const auto one = paired_t_test(std::vector<double>{0.7});
    CHECK(one.flag == TestFlag::too_few_samples);
    CHECK(std::isnan(one.t));
    CHECK(std::isnan(one.p));
    CHECK(one.degenerate());

    const auto flat = paired_t_test(std::vector<double>{2.0, 2.0, 2.0});
    CHECK(flat.flag == TestFlag::zero_variance);
    CHECK(flat.t == std::numeric_limits<double>::infinity());
    CHECK(flat.p == 0.0);
    const auto neg = paired_t_test(std::vector<double>{-2.0, -2.0});
    CHECK(neg.t == -std::numeric_limits<double>::infinity());
    const auto zero = paired_t_test(std::vector<double>{0.0, 0.0});
    CHECK(zero.t == 0.0);
    CHECK(zero.p == 1.0);
    CHECK(zero.flag == TestFlag::zero_variance);

    CHECK_THROWS_AS(paired_t_test(std::vector<double>{}), Error);
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0, NAN}), Error);
}

TEST_CASE("the test is antisymmetric in the sign of the differences") {
    Rng rng(4);
    std::vector<double> d(9), neg(9);
    for (std::size_t i = 0; i < 9; ++i) {
        d[i] = 0.4 + rng.normal();
        neg[i] = -d[i];
    }
    const auto a = paired_t_test(d), b = paired_t_test(neg);
    CHECK(a.mean == -b.mean);
    CHECK(a.t == -b.t);
    CHECK(a.p == b.p);
}
