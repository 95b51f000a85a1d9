#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slosim/bottleneck.hpp"
#include "slosim/ccmodel.hpp"
#include "slosim/records.hpp"
#include "slosim/slo.hpp"
#include "slosim/traffic_class.hpp"
#include "slosim/units.hpp"
#include "slosim/workload.hpp"

namespace slosim {

struct NetworkConfig {
    BytesPerNs capacity = gbps(100.0);
    Nanos rtt = micros(10.0);
    Nanos dt = 0.0;  // 0 selects tau / 20

    Nanos tau() const { return rtt / 2.0; }
    Nanos step() const { return dt > 0.0 ? dt : tau() / 20.0; }
    /// Whole steps per one-way delay.
    std::size_t steps_per_tau() const;

    void validate() const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// size / C + rtt: the latency of a flow alone on an idle network.
Nanos min_latency(Bytes size, const NetworkConfig& net);

struct SimConfig {
    NetworkConfig network;
    QueueDiscipline discipline = SharedFifo{};
    WeightAllocation weights;  // empty means equal weights
    CcParams cc = CcParams::swp_d();
    std::vector<TrafficClassSpec> classes;
    // Total across classes, split in proportion to each class's arrival rate
    // so every class spans roughly the same simulated interval.
    std::size_t num_flows = 100000;
    double warmup_fraction = 0.05;
    std::uint64_t seed = 1;
    std::size_t replications = 1;

    // Bottleneck runs at this fraction of C while hosts and slowdowns keep
    // using C. Baseline probes use it to model a fixed share of the link.
    double bottleneck_scale = 1.0;
    // Runs still holding flows past horizon_factor * last_arrival +
    // horizon_slack are aborted as unstable. Short traces of large flows
    // may need a larger slack.
    double horizon_factor = 2.0;
    Nanos horizon_slack = 1e6;
    double timeout_s = 0.0;  // wall-clock guard, 0 disables

    /// Throws ConfigError listing every problem.
    void validate() const;

    WeightAllocation effective_weights() const;
    std::vector<int> priority_ranks() const;
};

/// Per-class flow counts for cfg.num_flows.
std::vector<std::size_t> flow_counts(const SimConfig& cfg);

/// All classes' arrivals merged by time. Flow ids are positions in that order.
std::vector<FlowArrival> generate_workload(const SimConfig& cfg);

enum class Termination { Completed, Horizon, Timeout };
std::string_view to_string(Termination t);

struct SimCounters {
    double bytes_offered = 0.0;   // sizes of admitted flows
    double bytes_sent = 0.0;
    double bytes_drained = 0.0;
    std::vector<double> peak_queue;      // per class
    std::vector<double> drained_per_class;
    std::uint64_t steps = 0;
    Nanos end_time = 0.0;
    double wall_seconds = 0.0;
};

struct SimResult {
    // Per class, in completion order. Incomplete flows of an aborted run come
    // last with completed == false.
    std::vector<std::vector<FlowRecord>> per_class;
    SimCounters counters;
    Termination termination = Termination::Completed;

    bool stable() const { return termination == Termination::Completed; }
    /// All records sorted by flow id.
    std::vector<FlowRecord> all_records() const;
};

/// State visible to observers after each step.
struct StepView {
    std::uint64_t step;
    Nanos t;                       // step start
    double bytes_sent;             // cumulative, all sources
    double bytes_in_flight;        // sent but not yet at the switch
    double bytes_queued;
    double bytes_drained;          // cumulative
    std::span<const ByteCount> queued_per_class;
    std::span<const ByteCount> drained_this_step;  // per class
    std::span<const ClassSignal> signals;          // this step's sample
};

/// Per-flow view for observers.
struct FlowView {
    FlowId flow_id;
    ClassId class_id;
    std::uint64_t admit_step;
    ByteCount size;
    ByteCount sent;
    ByteCount sent_uncontrolled;
    BytesPerNs rate;  // rate used during the last step
    bool controlled;
};

class Simulator {
public:
    using Observer = std::function<void(const StepView&)>;

    /// Arrivals must be sorted by time with flow ids 0..n-1 in that order.
    Simulator(const SimConfig& cfg, std::vector<FlowArrival> arrivals);
    ~Simulator();
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    void set_observer(Observer obs);

    /// Advances one step. Returns false once every flow has completed.
    bool step();
    /// Steps until time t or completion.
    void run_until(Nanos t);
    /// Runs to completion or until a guard fires.
    SimResult run();

    Nanos now() const;
    std::uint64_t current_step() const;
    /// Flows admitted and not yet fully sent.
    std::vector<FlowView> sending_flows() const;
    std::optional<FlowView> flow(FlowId id) const;
    const Bottleneck& bottleneck() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Generates the workload from cfg and runs it.
SimResult run_simulation(const SimConfig& cfg);
SimResult run_simulation(const SimConfig& cfg, std::vector<FlowArrival> arrivals);

/// Drops the first `fraction` of each class's completed flows.
std::span<const FlowRecord> post_warmup(std::span<const FlowRecord> records, double fraction);

struct ClassReport {
    std::string name;
    SliValues slis;
    std::optional<Verdict> verdict;        // absent when the class has no SLO
    std::optional<BindingTerm> binding;
    std::size_t flows = 0;
    std::size_t censored = 0;
};

std::vector<ClassReport> evaluate(const SimConfig& cfg, const SimResult& result);

/// Loss per class for the optimizer. Classes without an SLO report -1.
std::vector<double> class_losses(const std::vector<ClassReport>& reports);

bool all_met(const std::vector<ClassReport>& reports);

/// Derived seed for replication r; replication 0 uses the base seed.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t r);

struct Interval {
    double mean = 0.0;
    double half_width = 0.0;  // Student-t 95%; 0 for a single sample
    std::size_t n = 0;
};
Interval mean_ci95(std::span<const double> samples);

/// CSV with header flow_id,class,size_bytes,arrival_ns,completion_ns,slowdown.
void write_records_csv(std::ostream& out, const SimConfig& cfg, const SimResult& result);

}  // namespace slosim
