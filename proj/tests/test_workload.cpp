#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "slosim/error.hpp"
#include "slosim/spec_io.hpp"
#include "slosim/workload.hpp"

using namespace slosim;

namespace {

EmpiricalCdf small_cdf() { return parse_cdf("# toy\n100 0.0\n1000 0.5\n10000 1.0\n"); }

// Integral of the quantile function over (0, 1) by the midpoint rule.
double numeric_mean(const EmpiricalCdf& cdf, int n = 200000) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += cdf_quantile(cdf, (i + 0.5) / n);
    return sum / n;
}

}  // namespace

TEST(Cdf, QuantileIsLinearBetweenPoints) {
    const auto cdf = small_cdf();
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 0.0), 100.0);
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 0.25), 550.0);
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 0.5), 1000.0);
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 0.75), 5500.0);
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 1.0), 10000.0);
}

TEST(Cdf, AtomAtFirstPoint) {
    const auto cdf = parse_cdf("50 0.3\n150 1.0\n");
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 0.1), 50.0);
    EXPECT_DOUBLE_EQ(cdf_quantile(cdf, 0.3), 50.0);
    EXPECT_NEAR(cdf_quantile(cdf, 0.65), 100.0, 1e-9);
}

TEST(Cdf, MeanMatchesQuantileIntegral) {
    for (const char* name : {"google", "facebook", "alibaba", "websearch"}) {
        const auto cdf = load_cdf_file(bundled_data_dir() / "cdf" / (std::string(name) + ".txt"));
        const double m = mean_flow_size(cdf);
        EXPECT_NEAR(m, numeric_mean(cdf), 1e-3 * m) << name;
    }
}

TEST(Cdf, RejectsMalformedInput) {
    EXPECT_THROW(parse_cdf(""), ConfigError);
    EXPECT_THROW(parse_cdf("100 0.0\n50 1.0\n"), ConfigError);      // sizes decrease
    EXPECT_THROW(parse_cdf("100 0.5\n200 0.4\n300 1.0\n"), ConfigError);
    EXPECT_THROW(parse_cdf("100 0.0\n200 0.9\n"), ConfigError);     // does not reach 1
    EXPECT_THROW(parse_cdf("100 zero\n"), ConfigError);
}

TEST(Distributions, ClosedFormMeans) {
    EXPECT_DOUBLE_EQ(mean_flow_size(ConstantSize{1234.0}), 1234.0);
    EXPECT_DOUBLE_EQ(mean_flow_size(ExponentialSize{5000.0}), 5000.0);
    EXPECT_NEAR(mean_flow_size(LogNormalSize{8.0, 1.0}), std::exp(8.5), 1e-6);
    EXPECT_NEAR(mean_gap(LogNormalGap{10.0, 2.0}), std::exp(12.0), 1e-3);
    EXPECT_DOUBLE_EQ(mean_gap(ExponentialGap{777.0}), 777.0);
}

TEST(Distributions, MuForLoadHitsTargetRate) {
    const Bytes mean = 68468.0;
    for (double sigma : {0.0, 1.0, 1.5, 2.0}) {
        const double rate = gbps(10.0);
        const double mu = mu_for_load(rate, mean, sigma);
        EXPECT_NEAR(offered_rate(ConstantSize{mean}, LogNormalGap{mu, sigma}), rate, 1e-9 * rate);
    }
    EXPECT_THROW(mu_for_load(0.0, mean, 1.0), ConfigError);
}

TEST(Distributions, SampleMeansConverge) {
    Rng rng(7);
    const InterarrivalProcess gaps = LogNormalGap{std::log(1000.0) - 0.5, 1.0};
    const FlowSizeDistribution sizes = ExponentialSize{2000.0};
    double g = 0.0, s = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        g += sample_gap(gaps, rng);
        s += sample_flow_size(sizes, rng);
    }
    EXPECT_NEAR(g / n, 1000.0, 15.0);
    EXPECT_NEAR(s / n, 2000.0, 20.0);
}

TEST(Distributions, SizesAreWholeAndPositive) {
    Rng rng(3);
    const FlowSizeDistribution sizes = LogNormalSize{1.0, 2.0};
    for (int i = 0; i < 10000; ++i) {
        const Bytes b = sample_flow_size(sizes, rng);
        EXPECT_GE(b, 1.0);
        EXPECT_EQ(b, std::round(b));
    }
}

TEST(Arrivals, SortedWithSequentialIds) {
    Rng rng(11);
    const auto arr = generate_arrivals(ConstantSize{100.0}, ExponentialGap{50.0}, 1000, 2, rng);
    ASSERT_EQ(arr.size(), 1000u);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        EXPECT_EQ(arr[i].flow_id, i);
        EXPECT_EQ(arr[i].class_id, 2u);
        EXPECT_GT(arr[i].arrival_time, i == 0 ? 0.0 : arr[i - 1].arrival_time);
    }
}

TEST(Streams, IndependentAndReproducible) {
    EXPECT_EQ(stream_seed(1, 0), stream_seed(1, 0));
    EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
    EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));

    // Neighbouring streams should be uncorrelated.
    Rng a(stream_seed(42, 0)), b(stream_seed(42, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 100000;
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
        const double x = u(a), y = u(b);
        sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
    EXPECT_LT(std::abs(corr), 0.02);
}

TEST(Distributions, ValidationRejectsBadParameters) {
    EXPECT_THROW(validate(FlowSizeDistribution{ConstantSize{0.0}}), ConfigError);
    EXPECT_THROW(validate(FlowSizeDistribution{LogNormalSize{1.0, -1.0}}), ConfigError);
    EXPECT_THROW(validate(InterarrivalProcess{ExponentialGap{0.0}}), ConfigError);
    EXPECT_THROW(validate(InterarrivalProcess{LogNormalGap{NAN, 1.0}}), ConfigError);
    EXPECT_NO_THROW(validate(FlowSizeDistribution{ExponentialSize{10.0}}));
}
