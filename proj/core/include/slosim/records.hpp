#pragma once

#include <optional>
#include <span>
#include <vector>

#include "slosim/slo.hpp"
#include "slosim/units.hpp"

namespace slosim {

struct FlowRecord {
    FlowId flow_id = 0;
    ClassId class_id = 0;
    Bytes size = 0.0;
    Nanos arrival = 0.0;
    Nanos completion = 0.0;
    Nanos latency = 0.0;
    double slowdown = 0.0;
    // False for flows still in the system when a run was aborted; their
    // completion is the abort time, so latency and slowdown are lower bounds.
    bool completed = true;

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Nearest-rank percentile (1-based index ceil(p*n)) of the slowdowns of
/// records passing the filter. nullopt when none pass.
std::optional<double> slowdown_percentile(std::span<const FlowRecord> records, double p,
                                          const SizeRange& filter = {});

struct SizeBin {
    Bytes max_size;
    std::vector<FlowRecord> records;
};

/// Sorts by size and splits into at most num_bins contiguous groups whose
/// counts differ by at most one. Each bin is labelled with its largest size.
std::vector<SizeBin> bin_by_size(std::span<const FlowRecord> records, std::size_t num_bins);

}  // namespace slosim
