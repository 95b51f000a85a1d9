#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slosim/bottleneck.hpp"
#include "slosim/engine.hpp"

namespace slosim {

struct OptimizerConfig {
    std::size_t max_iterations = 50;
    double baseline_weight_tolerance = 0.01;   // absolute, on w
    double capacity_search_tolerance = 0.02;   // relative bracket width
    std::size_t replications = 1;              // loss = mean over pinned seeds
    std::uint64_t seed = 1;                    // scenario sampling; probes use the SimConfig seed
    double min_probe_weight = 1.0 / 128.0;
    double capacity_cap_factor = 16.0;         // bracket ceiling, times offered load
    double loss_floor = -2.0;
    std::size_t workers = 1;                   // 0 = one per hardware thread

    void validate() const;
};

/// Smallest weight (to tolerance) at which each class meets its SLO alone on
/// a link of capacity w*C. nullopt marks a class infeasible even at w = 1.
std::vector<std::optional<double>> find_baselines(const SimConfig& cfg, const OptimizerConfig& opt);

/// Whether class k alone, on w*C, meets its SLO. Exposed for probing.
bool baseline_probe(const SimConfig& cfg, std::size_t k, double w);

struct IterationRecord {
    WeightAllocation weights;
    std::vector<double> losses;
};

struct OptimizationOutcome {
    WeightAllocation weights;
    bool success = false;
    std::string reason;  // "met", "min loss positive", "stalled", "timeout", "infeasible baseline"
    std::vector<IterationRecord> trace;
    std::vector<std::optional<double>> baselines;
};

/// Per-class losses for a weight vector; one simulation in practice.
using LossFunction = std::function<std::vector<double>(const WeightAllocation&)>;

/// The weight loop on an arbitrary loss oracle, starting from `initial`
/// (normalized first). On timeout the best weights seen are returned.
OptimizationOutcome weight_loop(const WeightAllocation& initial, const LossFunction& losses,
                                std::size_t max_iterations, double loss_floor = -2.0);

/// One pass of weight transfers for sorted losses. Returns true if any weight
/// moved. `losses` are already clamped.
bool transfer_weights(std::vector<double>& weights, const std::vector<double>& losses);

/// Losses for cfg under `weights`, averaged over opt.replications pinned seeds.
std::vector<double> simulate_losses(const SimConfig& cfg, const WeightAllocation& weights,
                                    const OptimizerConfig& opt);

/// Baselines, then the weight loop with simulated losses.
OptimizationOutcome optimize_weights(const SimConfig& cfg, const OptimizerConfig& opt);

struct CapacityStrategy {
    enum class Kind { SharedFifo, OptimizedWeights, Static };
    Kind kind = Kind::SharedFifo;
    WithinClass within = WithinClass::Fifo;

    static CapacityStrategy shared_fifo() { return {Kind::SharedFifo, WithinClass::Fifo}; }
    static CapacityStrategy optimized(WithinClass w) { return {Kind::OptimizedWeights, w}; }
    static CapacityStrategy static_split() { return {Kind::Static, WithinClass::Fifo}; }
};
std::string to_string(const CapacityStrategy& s);

struct CapacityResult {
    std::optional<BytesPerNs> capacity;  // nullopt: not found below the cap
    std::size_t probes = 0;
    std::vector<BytesPerNs> per_class;   // Static only
};

/// The template's capacity and r_init are replaced by each probed capacity.
CapacityResult min_bandwidth(const SimConfig& tmpl, const CapacityStrategy& strategy, const OptimizerConfig& opt);

/// Capacity search on an arbitrary monotone predicate: bracket by doubling
/// from `load` (assumed to fail), bisect to `tolerance` relative width.
CapacityResult search_capacity(BytesPerNs load, double tolerance, double cap_factor,
                               const std::function<bool(BytesPerNs)>& meets);

double inflation(BytesPerNs c_fifo, BytesPerNs c_other);

struct SampleSpace {
    std::vector<std::filesystem::path> cdf_files;
    double sigma_lo = 1.0, sigma_hi = 2.0;
    double rate3_lo_gbps = 5.0, rate3_hi_gbps = 10.0;
    double rate5_lo_gbps = 3.0, rate5_hi_gbps = 6.0;
    double slo_lo = 3.0, slo_hi = 8.0;
    double percentile = 0.99;

    /// Google, Facebook and Alibaba CDFs from the bundled data directory.
    static SampleSpace standard();
};

struct SampledClass {
    std::string cdf;        // file stem
    double sigma;
    double rate_gbps;
    double slo_threshold;   // small flows; large flows get twice this
};

struct SampledScenario {
    std::vector<TrafficClassSpec> classes;
    std::vector<SampledClass> params;

    double min_threshold() const;
    double max_sigma() const;
    /// Some class has both a tight SLO (< 4) and bursty arrivals (sigma > 1.7).
    bool tight_bursty() const;
};

/// n_classes must be 3 or 5. SLIs split at the network's BDP.
SampledScenario sample_scenario(const SampleSpace& space, std::size_t n_classes, Rng& rng,
                                const NetworkConfig& net);

struct ScenarioRow {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    SampledScenario scenario;
    std::optional<BytesPerNs> fifo, weighted_fifo, weighted_fq, static_split;
};

/// Samples `count` scenarios from `seed` and searches every strategy on each,
/// in parallel over scenarios. `tmpl` supplies network, cc and sim controls.
std::vector<ScenarioRow> run_scenarios(const SimConfig& tmpl, const SampleSpace& space, std::size_t count,
                                       std::size_t n_classes, std::uint64_t seed, const OptimizerConfig& opt,
                                       const std::function<void(const ScenarioRow&)>& on_row = {});

void write_manifest_csv(std::ostream& out, const std::vector<ScenarioRow>& rows);

}  // namespace slosim
