#include "slosim/records.hpp"

#include <algorithm>
#include <cmath>

namespace slosim {

std::optional<double> slowdown_percentile(std::span<const FlowRecord> records, double p,
                                          const SizeRange& filter) {
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& r : records)
        if (filter.contains(r.size)) values.push_back(r.slowdown);
    if (values.empty()) return std::nullopt;

    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

std::vector<SizeBin> bin_by_size(std::span<const FlowRecord> records, std::size_t num_bins) {
    std::vector<FlowRecord> sorted(records.begin(), records.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const FlowRecord& a, const FlowRecord& b) { return a.size < b.size; });
    const std::size_t n = sorted.size();
    const std::size_t bins = std::min(std::max<std::size_t>(num_bins, 1), n);

    std::vector<SizeBin> out;
    out.reserve(bins);
    std::size_t start = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        // The first n % bins bins take one extra record.
        std::size_t count = n / bins + (b < n % bins ? 1 : 0);
        SizeBin bin;
        bin.records.assign(sorted.begin() + static_cast<std::ptrdiff_t>(start),
                           sorted.begin() + static_cast<std::ptrdiff_t>(start + count));
        bin.max_size = bin.records.back().size;
        out.push_back(std::move(bin));
        start += count;
    }
    return out;
}

}  // namespace slosim
