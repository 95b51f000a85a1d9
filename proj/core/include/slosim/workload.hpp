#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "slosim/units.hpp"

namespace slosim {

using Rng = std::mt19937_64;

/// Seed for the independent random stream of one traffic class (or any other
/// numbered consumer) derived from a global seed. SplitMix64 finalizer, so
/// neighbouring indices give unrelated streams.
std::uint64_t stream_seed(std::uint64_t global_seed, std::uint64_t index);

struct CdfPoint {
    Bytes size;
    double cum_prob;

    friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Piecewise-linear CDF over flow sizes. Points are strictly increasing in
/// size, cumulative probability non-decreasing and ending at exactly 1.
struct EmpiricalCdf {
    std::vector<CdfPoint> points;

    friend bool operator==(const EmpiricalCdf&, const EmpiricalCdf&) = default;
};

struct LogNormalSize {
    double mu;     // ln-bytes
    double sigma;

    friend bool operator==(const LogNormalSize&, const LogNormalSize&) = default;
};

struct ExponentialSize {
    Bytes mean;

    friend bool operator==(const ExponentialSize&, const ExponentialSize&) = default;
};

struct ConstantSize {
    Bytes size;

    friend bool operator==(const ConstantSize&, const ConstantSize&) = default;
};

using FlowSizeDistribution =
    std::variant<EmpiricalCdf, LogNormalSize, ExponentialSize, ConstantSize>;

struct LogNormalGap {
    double mu;     // ln-nanoseconds
    double sigma;

    friend bool operator==(const LogNormalGap&, const LogNormalGap&) = default;
};

struct ExponentialGap {
    Nanos mean;

    friend bool operator==(const ExponentialGap&, const ExponentialGap&) = default;
};

using InterarrivalProcess = std::variant<LogNormalGap, ExponentialGap>;

struct FlowArrival {
    FlowId flow_id;
    ClassId class_id;
    Nanos arrival_time;
    Bytes size;

    friend bool operator==(const FlowArrival&, const FlowArrival&) = default;
};

// Throw ConfigError when the distribution breaks its invariants.
void validate(const FlowSizeDistribution& dist);
void validate(const InterarrivalProcess& process);

/// Parses the plain-text CDF format: one "size_bytes cum_prob" pair per line,
/// '#' starts a comment line. The result is validated.
EmpiricalCdf parse_cdf(std::string_view text);
EmpiricalCdf load_cdf_file(const std::filesystem::path& path);

/// Inverse transform of a uniform draw, linear in bytes between points.
/// Draws at or below the first point's probability return the first size.
/// Not rounded.
Bytes cdf_quantile(const EmpiricalCdf& cdf, double u);

/// Mean of the piecewise-linear distribution (trapezoidal over segments).
Bytes mean_flow_size(const FlowSizeDistribution& dist);
Nanos mean_gap(const InterarrivalProcess& process);

/// Draw one flow size, rounded to the nearest byte and at least 1.
Bytes sample_flow_size(const FlowSizeDistribution& dist, Rng& rng);
Nanos sample_gap(const InterarrivalProcess& process, Rng& rng);

/// Log-normal location giving a mean gap of mean_flow_size / target_rate.
double mu_for_load(BytesPerNs target_rate, Bytes mean_flow_size, double sigma);

/// Offered load implied by a size distribution and arrival process.
BytesPerNs offered_rate(const FlowSizeDistribution& sizes, const InterarrivalProcess& gaps);

/// `count` arrivals with cumulative gaps starting after t=0. Flow ids are
/// assigned 0..count-1; callers re-number when merging classes.
std::vector<FlowArrival> generate_arrivals(const FlowSizeDistribution& sizes,
                                           const InterarrivalProcess& gaps,
                                           std::size_t count, ClassId class_id, Rng& rng);

}  // namespace slosim
