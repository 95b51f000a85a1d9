#include "slosim/shaper.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "slosim/error.hpp"

namespace slosim {

void LeakyBucketParams::validate() const {
    std::vector<std::string> problems;
    if (!(rate > 0.0)) problems.emplace_back("shaper.rate: must be positive");
    if (!(bucket > 0.0)) problems.emplace_back("shaper.bucket: must be positive");
    try {
        slosim::validate(sizes);
        slosim::validate(gaps);
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) problems.push_back("shaper: " + p);
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

ShaperResult simulate_shaper(const LeakyBucketParams& params, const std::vector<Nanos>& arrivals,
                             const std::vector<Bytes>& sizes) {
    const BytesPerNs r = params.rate;
    const Bytes b = params.bucket;
    ShaperResult out;
    out.arrivals = arrivals;
    out.sizes = sizes;
    out.host_delays.reserve(arrivals.size());
    out.downstream_lengths.reserve(arrivals.size());
    out.departures.reserve(arrivals.size());

    Bytes level = b;
    Nanos level_at = 0.0;
    Nanos last_departure = 0.0;
    Bytes backlog = 0.0;
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        const Nanos start = std::max(arrivals[i], last_departure);
        level = std::min(b, level + r * (start - level_at));
        const Nanos wait = std::max(0.0, sizes[i] - level) / r;
        const Nanos depart = start + wait;
        level = level + r * wait - sizes[i];
        level_at = depart;

        backlog = std::max(0.0, backlog - r * (depart - last_departure));
        out.downstream_lengths.push_back(backlog);
        backlog += sizes[i];

        last_departure = depart;
        out.departures.push_back(depart);
        out.host_delays.push_back(depart - arrivals[i]);
    }
    return out;
}

ShaperResult simulate_shaper(const LeakyBucketParams& params, std::size_t count, Rng& rng) {
    params.validate();
    if (offered_rate(params.sizes, params.gaps) >= params.rate) {
        ShaperResult out;
        out.stable = false;
        return out;
    }
    std::vector<Nanos> arrivals;
    std::vector<Bytes> sizes;
    arrivals.reserve(count);
    sizes.reserve(count);
    Nanos t = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        t += sample_gap(params.gaps, rng);
        arrivals.push_back(t);
        sizes.push_back(sample_flow_size(params.sizes, rng));
    }
    return simulate_shaper(params, arrivals, sizes);
}

double nearest_rank(std::vector<double> samples, double p) {
    if (samples.empty()) throw ConfigError("percentile of an empty sample");
    const auto n = samples.size();
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    auto nth = samples.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(samples.begin(), nth, samples.end());
    return *nth;
}

std::vector<SweepRow> shaper_sweep(const LeakyBucketParams& params, const std::vector<Bytes>& buckets,
                                   const std::vector<double>& percentiles, std::size_t count, std::uint64_t seed) {
    std::vector<SweepRow> rows;
    for (Bytes b : buckets) {
        LeakyBucketParams p = params;
        p.bucket = b;
        Rng rng(seed);
        const ShaperResult res = simulate_shaper(p, count, rng);
        if (!res.stable) throw ConfigError("shaper: offered load must stay below the token rate");
        for (double q : percentiles)
            rows.push_back({b, q, nearest_rank(res.host_delays, q), nearest_rank(res.downstream_lengths, q)});
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, SweepMetric metric) {
    out << "b,percentile,value\n";
    for (const auto& r : rows)
        out << r.bucket << ',' << r.percentile << ','
            << (metric == SweepMetric::HostDelay ? r.host_delay : r.downstream) << '\n';
}

}  // namespace slosim
