#include "slosim/traffic_class.hpp"

#include <set>

#include "slosim/error.hpp"

namespace slosim {

namespace {

void collect_class_problems(const TrafficClassSpec& spec, const std::string& prefix,
                            std::vector<std::string>& problems) {
    if (spec.name.empty()) problems.push_back(prefix + "name: must not be empty");
    try {
        validate(spec.flow_sizes);
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) problems.push_back(prefix + "flowsizes: " + p);
    }
    try {
        validate(spec.interarrivals);
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) problems.push_back(prefix + "interarrivals: " + p);
    }

    std::set<std::string> names;
    for (const auto& sli : spec.slis) {
        if (!names.insert(sli.name).second)
            problems.push_back(prefix + "slis: duplicate SLI name \"" + sli.name + "\"");
        if (const auto* pct = std::get_if<Percentile>(&sli.metric); pct && !(pct->p > 0.0 && pct->p < 1.0))
            problems.push_back(prefix + "slis." + sli.name + ".metric: percentile must be in (0, 1)");
        if (sli.size_filter && !(sli.size_filter->lo < sli.size_filter->hi))
            problems.push_back(prefix + "slis." + sli.name + ".size_range: lo must be below hi");
    }
    if (spec.slo) {
        if (spec.slis.empty()) problems.push_back(prefix + "slis: an SLO needs at least one SLI");
        for (const auto& ident : identifiers(*spec.slo))
            if (!names.count(ident))
                problems.push_back(prefix + "slo: class \"" + spec.name + "\" references undeclared SLI \"" +
                                   ident + "\"");
    }
}

}  // namespace

void validate(const TrafficClassSpec& spec) {
    std::vector<std::string> problems;
    collect_class_problems(spec, "", problems);
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

void validate(const std::vector<TrafficClassSpec>& classes) {
    std::vector<std::string> problems;
    std::set<std::string> names;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const std::string prefix = "classes[" + std::to_string(i) + "].";
        collect_class_problems(classes[i], prefix, problems);
        if (!names.insert(classes[i].name).second)
            problems.push_back(prefix + "name: duplicate class name \"" + classes[i].name + "\"");
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::vector<FlowArrival> generate_arrivals(const TrafficClassSpec& spec, std::size_t count,
                                           ClassId class_id, Rng& rng) {
    return generate_arrivals(spec.flow_sizes, spec.interarrivals, count, class_id, rng);
}

}  // namespace slosim
