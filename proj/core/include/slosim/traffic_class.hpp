#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slosim/slo.hpp"
#include "slosim/workload.hpp"

namespace slosim {

struct TrafficClassSpec {
    std::string name;
    FlowSizeDistribution flow_sizes = ConstantSize{1000.0};
    InterarrivalProcess interarrivals = ExponentialGap{1000.0};
    std::vector<SliDef> slis;
    std::optional<SloExpr> slo;
    // Lower is served first; only the strict-priority discipline reads it.
    std::optional<int> priority_rank;

    BytesPerNs offered_rate() const { return slosim::offered_rate(flow_sizes, interarrivals); }

    friend bool operator==(const TrafficClassSpec&, const TrafficClassSpec&) = default;
};

/// Throws ConfigError listing every broken invariant of one class.
void validate(const TrafficClassSpec& spec);

/// Names must be unique across a configuration.
void validate(const std::vector<TrafficClassSpec>& classes);

std::vector<FlowArrival> generate_arrivals(const TrafficClassSpec& spec, std::size_t count,
                                           ClassId class_id, Rng& rng);

}  // namespace slosim
