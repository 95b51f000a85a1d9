#pragma once

#include <string>
#include <vector>

#include "slosim/engine.hpp"
#include "slosim/spec_io.hpp"

namespace testing_helpers {

using namespace slosim;

// A class at `rate` offered load with log-normal gaps of burstiness sigma.
inline TrafficClassSpec make_class(std::string name, FlowSizeDistribution sizes, BytesPerNs rate, double sigma) {
    TrafficClassSpec c;
    c.name = std::move(name);
    const Bytes mean = mean_flow_size(sizes);
    c.flow_sizes = std::move(sizes);
    c.interarrivals = LogNormalGap{mu_for_load(rate, mean, sigma), sigma};
    c.slis.push_back(SliDef{"p99", Percentile{0.99}, std::nullopt});
    return c;
}

inline EmpiricalCdf bundled_cdf(const std::string& name) {
    return load_cdf_file(bundled_data_dir() / "cdf" / (name + ".txt"));
}

// Flows given by (arrival, size), all in class 0 unless a class is supplied.
inline std::vector<FlowArrival> trace(const std::vector<std::pair<Nanos, Bytes>>& flows,
                                      const std::vector<ClassId>& classes = {}) {
    std::vector<FlowArrival> out;
    for (std::size_t i = 0; i < flows.size(); ++i)
        out.push_back({i, classes.empty() ? ClassId{0} : classes[i], flows[i].first, flows[i].second});
    return out;
}

}  // namespace testing_helpers
