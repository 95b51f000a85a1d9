#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "slosim/units.hpp"

namespace slosim {

class WeightAllocation;

/// Parameters of the abstract congestion-control model.
struct CcParams {
    BytesPerNs r_init = gbps(100.0);   // initial send rate
    double target_utilization = 1.0;   // U
    Bytes queue_threshold = 0.0;       // T
    double beta = 0.0;                 // 0 or 1: react to uncontrolled traffic
    double eta = 5.0;                  // convergence smoothing

    /// DCTCP-like: full utilization, reacts to queues above 100 KB.
    static CcParams swp_d();
    /// HPCC-like: 90% utilization, reacts to uncontrolled traffic, zero queue target.
    static CcParams swp_h();

    void validate() const;

    friend bool operator==(const CcParams&, const CcParams&) = default;
};

/// Per-flow congestion state as seen by the model.
struct FlowCcState {
    FlowId flow_id = 0;
    ClassId class_id = 0;
    Nanos arrival_time = 0.0;
    Bytes size = 0.0;
    Bytes bytes_sent = 0.0;
    BytesPerNs rho = 0.0;
    bool controlled = false;

    bool has_unsent() const { return bytes_sent < size; }
};

/// One class's congestion signals at one instant.
struct ClassSignal {
    BytesPerNs uncontrolled_rate = 0.0;  // r_u,k
    Bytes queue = 0.0;                   // Q_k
    std::uint32_t controlled = 0;        // N_k
    bool active = false;

    friend bool operator==(const ClassSignal&, const ClassSignal&) = default;
};

/// Uncontrolled rate a flow contributes at time t: its initial window
/// min(r_init*2tau, S) averaged over the 2tau before feedback arrives.
BytesPerNs uncontrolled_rate_of_flow(const FlowCcState& flow, Nanos t, Nanos tau, BytesPerNs r_init);

/// Per-class signals from flow and queue state. `queue` and `drained` are
/// indexed by class; a class is active when it has queued bytes or drained
/// bytes during the current step.
std::vector<ClassSignal> class_signals(std::span<const FlowCcState> flows,
                                       std::span<const Bytes> queue,
                                       std::span<const Bytes> drained, Nanos t, Nanos tau,
                                       BytesPerNs r_init);

/// Update-rule value for one class. Capacity and queue are taken at t - tau,
/// uncontrolled rate and controlled count at t - 2tau. Requires
/// controlled_lag >= 1; the result may be negative.
BytesPerNs update_rule(const CcParams& params, BytesPerNs capacity_lag, BytesPerNs uncontrolled_lag,
                       Bytes queue_lag, std::uint32_t controlled_lag, Nanos tau);

/// Ideal rate R(t): r_init within 2tau of arrival, else the clamped rule.
BytesPerNs ideal_rate(const FlowCcState& flow, Nanos t, BytesPerNs rule_value,
                      const CcParams& params, Nanos tau);

/// One explicit step of d(rho)/dt = (R - rho) / (eta * tau), clamped to
/// [0, r_init]. Throws ConfigError when dt > eta * tau.
BytesPerNs smooth_rate(BytesPerNs rho, BytesPerNs ideal, Nanos dt, const CcParams& params, Nanos tau);

/// Capacity available to class k: w_k * C / W(active classes plus k).
BytesPerNs class_capacity(const WeightAllocation& weights, std::span<const bool> active, ClassId k,
                          BytesPerNs capacity);

/// Ring buffer of per-step class signals. Lookups before the first recorded
/// step return zero, inactive samples.
class SignalHistory {
public:
    SignalHistory(std::size_t num_classes, Nanos dt, std::size_t capacity_steps);

    /// Appends the sample for the next step and returns a reference so the
    /// caller can patch fields known only at the end of the step.
    std::vector<ClassSignal>& record(std::span<const ClassSignal> sample);

    /// Sample recorded `lag_steps` steps before the most recent one.
    const std::vector<ClassSignal>& at_lag_steps(std::size_t lag_steps) const;

    /// Sample recorded nearest to (now - lag).
    const std::vector<ClassSignal>& at_lag(Nanos lag) const;

    /// Forget everything; lookups return zeros until new samples arrive.
    void reset();

    std::size_t recorded() const { return recorded_; }
    std::size_t capacity() const { return ring_.size(); }
    Nanos step_size() const { return dt_; }

private:
    Nanos dt_;
    std::vector<std::vector<ClassSignal>> ring_;
    std::vector<ClassSignal> zeros_;
    std::size_t head_ = 0;       // slot of the most recent sample
    std::size_t recorded_ = 0;
};

}  // namespace slosim
