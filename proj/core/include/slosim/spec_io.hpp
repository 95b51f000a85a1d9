#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slosim/engine.hpp"
#include "slosim/optimizer.hpp"
#include "slosim/shaper.hpp"

namespace slosim {

struct OutputConfig {
    std::string path;               // empty: no CSV file
    std::string format = "summary"; // summary | csv | json

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ShaperSpec {
    LeakyBucketParams params;
    std::vector<Bytes> buckets;     // sweep grid; defaults around params.bucket
    std::vector<double> percentiles{0.5, 0.9, 0.99, 0.999};
    std::size_t count = 100000;
};

struct ScenarioSpec {
    std::size_t count = 20;
    std::size_t n_classes = 3;  // 3 or 5

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct SpecDocument {
    bool has_classes = false;
    SimConfig sim;
    OptimizerConfig optimizer;
    OutputConfig output;
    std::optional<ShaperSpec> shaper;
    ScenarioSpec scenarios;
};

/// Parses and validates a spec. Every problem is reported in one
/// ConfigError, each prefixed with its field path. CDF paths resolve against
/// `base_dir`, then the bundled data directory.
SpecDocument parse_spec(std::string_view json_text, const std::filesystem::path& base_dir = {});
SpecDocument load_spec(const std::filesystem::path& path);

/// Serializes in base units (ns, B, B/ns) with CDFs inlined, so that
/// parse_spec(serialize_spec(d)) reproduces d exactly.
std::string serialize_spec(const SpecDocument& doc);

/// "100Gbps", "10us", "125KB" or a bare number in base units.
double parse_rate(std::string_view text);
double parse_time(std::string_view text);
double parse_size(std::string_view text);

/// Directory holding the bundled CDF files and example specs; the
/// SLOSIM_DATA_DIR environment variable overrides the build-time default.
std::filesystem::path bundled_data_dir();

}  // namespace slosim
