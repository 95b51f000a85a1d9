#pragma once

#include <iosfwd>
#include <vector>

#include "slosim/units.hpp"
#include "slosim/workload.hpp"

namespace slosim {

/// Host-side token bucket: tokens accrue at `rate` up to `bucket` bytes.
struct LeakyBucketParams {
    BytesPerNs rate = gbps(10.0);
    Bytes bucket = kilobytes(100.0);
    FlowSizeDistribution sizes = ExponentialSize{10000.0};
    InterarrivalProcess gaps = ExponentialGap{1000.0};

    void validate() const;
};

struct ShaperResult {
    std::vector<Nanos> host_delays;         // departure - arrival, per message
    std::vector<Bytes> downstream_lengths;  // backlog seen by each departing message
    std::vector<Nanos> arrivals;
    std::vector<Nanos> departures;
    std::vector<Bytes> sizes;
    bool stable = true;                     // false when offered load >= rate
};

/// Messages depart atomically in FIFO order once the bucket holds enough
/// tokens for the whole message; a message larger than the bucket waits
/// for the deficit to refill and leaves the bucket empty. Departures feed a
/// FIFO served at `rate`, sampled just before each message joins it.
ShaperResult simulate_shaper(const LeakyBucketParams& params, std::size_t count, Rng& rng);

/// Same, on a given trace of (arrival time, size).
ShaperResult simulate_shaper(const LeakyBucketParams& params, const std::vector<Nanos>& arrivals,
                             const std::vector<Bytes>& sizes);

/// Nearest-rank percentile of arbitrary samples; p in (0, 1].
double nearest_rank(std::vector<double> samples, double p);

struct SweepRow {
    Bytes bucket;
    double percentile;
    double host_delay;     // ns
    double downstream;     // bytes
};

/// Runs every bucket size on the same pinned trace.
std::vector<SweepRow> shaper_sweep(const LeakyBucketParams& params, const std::vector<Bytes>& buckets,
                                   const std::vector<double>& percentiles, std::size_t count, std::uint64_t seed);

enum class SweepMetric { HostDelay, Downstream };

/// CSV with header b,percentile,value for one metric.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, SweepMetric metric);

}  // namespace slosim
