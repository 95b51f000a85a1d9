#include "slosim/ccmodel.hpp"

#include <algorithm>
#include <cmath>

#include "slosim/bottleneck.hpp"
#include "slosim/error.hpp"

namespace slosim {

CcParams CcParams::swp_d() { return CcParams{gbps(100.0), 1.0, kilobytes(100.0), 0.0, 5.5}; }

CcParams CcParams::swp_h() { return CcParams{gbps(100.0), 0.9, 0.0, 1.0, 5.0}; }

void CcParams::validate() const {
    std::vector<std::string> problems;
    if (!(r_init > 0.0)) problems.emplace_back("cc.r_init must be positive");
    if (!(target_utilization > 0.0 && target_utilization <= 1.0))
        problems.emplace_back("cc.u_target must be in (0, 1]");
    if (!(queue_threshold >= 0.0)) problems.emplace_back("cc.thresh must be non-negative");
    if (beta != 0.0 && beta != 1.0) problems.emplace_back("cc.beta must be 0 or 1");
    if (!(eta > 0.0)) problems.emplace_back("cc.eta must be positive");
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

BytesPerNs uncontrolled_rate_of_flow(const FlowCcState& flow, Nanos t, Nanos tau, BytesPerNs r_init) {
    const Nanos age = t - flow.arrival_time;
    const Nanos window = 2.0 * tau;
    if (age < 0.0 || age > window) return 0.0;
    return std::min(r_init * window, flow.size) / window;
}

std::vector<ClassSignal> class_signals(std::span<const FlowCcState> flows, std::span<const Bytes> queue,
                                       std::span<const Bytes> drained, Nanos t, Nanos tau,
                                       BytesPerNs r_init) {
    std::vector<ClassSignal> out(queue.size());
    for (std::size_t k = 0; k < queue.size(); ++k) {
        out[k].queue = queue[k];
        out[k].active = queue[k] > 0.0 || (k < drained.size() && drained[k] > 0.0);
    }
    for (const auto& f : flows) {
        auto& s = out[f.class_id];
        s.uncontrolled_rate += uncontrolled_rate_of_flow(f, t, tau, r_init);
        if (t - f.arrival_time > 2.0 * tau && f.has_unsent()) ++s.controlled;
    }
    return out;
}

BytesPerNs update_rule(const CcParams& params, BytesPerNs capacity_lag, BytesPerNs uncontrolled_lag,
                       Bytes queue_lag, std::uint32_t controlled_lag, Nanos tau) {
    const double drain = std::max(0.0, queue_lag - params.queue_threshold) / (2.0 * tau);
    return (params.target_utilization * capacity_lag - params.beta * uncontrolled_lag - drain) /
           static_cast<double>(controlled_lag);
}

BytesPerNs ideal_rate(const FlowCcState& flow, Nanos t, BytesPerNs rule_value, const CcParams& params,
                      Nanos tau) {
    if (t - flow.arrival_time <= 2.0 * tau) return params.r_init;
    return std::max(0.0, rule_value);
}

BytesPerNs smooth_rate(BytesPerNs rho, BytesPerNs ideal, Nanos dt, const CcParams& params, Nanos tau) {
    const Nanos horizon = params.eta * tau;
    if (!(dt > 0.0) || dt > horizon)
        throw ConfigError("integration step must be in (0, eta*tau] for rate smoothing");
    const BytesPerNs next = rho + dt * (ideal - rho) / horizon;
    return std::clamp(next, 0.0, params.r_init);
}

BytesPerNs class_capacity(const WeightAllocation& weights, std::span<const bool> active, ClassId k,
                          BytesPerNs capacity) {
    double w_active = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (l == k || active[l]) w_active += weights[l];
    return weights[k] * capacity / w_active;
}

SignalHistory::SignalHistory(std::size_t num_classes, Nanos dt, std::size_t capacity_steps)
    : dt_(dt),
      ring_(std::max<std::size_t>(capacity_steps, 1), std::vector<ClassSignal>(num_classes)),
      zeros_(num_classes) {}

std::vector<ClassSignal>& SignalHistory::record(std::span<const ClassSignal> sample) {
    head_ = recorded_ == 0 ? 0 : (head_ + 1) % ring_.size();
    auto& slot = ring_[head_];
    slot.assign(sample.begin(), sample.end());
    ++recorded_;
    return slot;
}

const std::vector<ClassSignal>& SignalHistory::at_lag_steps(std::size_t lag_steps) const {
    if (lag_steps >= recorded_ || lag_steps >= ring_.size()) return zeros_;
    return ring_[(head_ + ring_.size() - lag_steps) % ring_.size()];
}

const std::vector<ClassSignal>& SignalHistory::at_lag(Nanos lag) const {
    const auto steps = static_cast<std::size_t>(std::llround(std::max(0.0, lag) / dt_));
    return at_lag_steps(steps);
}

void SignalHistory::reset() {
    recorded_ = 0;
    head_ = 0;
}

}  // namespace slosim
