#include "slosim/bottleneck.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "slosim/error.hpp"

namespace slosim {

std::string to_string(const QueueDiscipline& d) {
    struct {
        std::string operator()(const SharedFifo&) const { return "fifo"; }
        std::string operator()(const StrictPriority&) const { return "priority"; }
        std::string operator()(const WeightedClasses& w) const {
            return w.within == WithinClass::Fifo ? "weighted-fifo" : "weighted-fq";
        }
        std::string operator()(const ProcessorSharing& p) const { return p.weighted ? "wrr" : "rr"; }
    } visitor;
    return std::visit(visitor, d);
}

bool uses_weights(const QueueDiscipline& d) {
    if (std::holds_alternative<WeightedClasses>(d)) return true;
    if (const auto* ps = std::get_if<ProcessorSharing>(&d)) return ps->weighted;
    return false;
}

WeightAllocation::WeightAllocation(std::vector<double> weights) : weights_(std::move(weights)) {
    for (std::size_t k = 0; k < weights_.size(); ++k)
        if (!(weights_[k] > 0.0) || !std::isfinite(weights_[k]))
            throw ConfigError("weight for class " + std::to_string(k) + " must be positive and finite");
}

WeightAllocation WeightAllocation::uniform(std::size_t n) {
    return WeightAllocation(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

WeightAllocation WeightAllocation::normalized() const {
    const double s = sum();
    std::vector<double> w(weights_);
    for (auto& x : w) x /= s;
    return WeightAllocation(std::move(w));
}

double WeightAllocation::sum() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

std::vector<ByteCount> water_fill(std::span<const ByteCount> demand, std::span<const double> weight,
                                  ByteCount budget) {
    const std::size_t n = demand.size();
    std::vector<ByteCount> out(n, 0);
    const ByteCount total = std::accumulate(demand.begin(), demand.end(), ByteCount{0});
    const ByteCount target = std::min(budget, total);
    if (target <= 0) return out;
    if (target == total) {
        std::copy(demand.begin(), demand.end(), out.begin());
        return out;
    }

    std::vector<std::size_t> order;
    double w_left = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (demand[k] > 0) {
            order.push_back(k);
            w_left += weight[k];
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return static_cast<double>(demand[a]) / weight[a] < static_cast<double>(demand[b]) / weight[b];
    });

    // Fluid solution: entries whose demand fits under the current level are
    // satisfied in full, the rest share what remains at a common level.
    std::vector<double> fluid(n, 0.0);
    double left = static_cast<double>(target);
    std::size_t i = 0;
    for (; i < order.size(); ++i) {
        const std::size_t k = order[i];
        const auto d = static_cast<double>(demand[k]);
        if (d * w_left > left * weight[k]) break;
        fluid[k] = d;
        left -= d;
        w_left -= weight[k];
    }
    const double level = w_left > 0.0 ? left / w_left : 0.0;
    for (std::size_t j = i; j < order.size(); ++j) {
        const std::size_t k = order[j];
        fluid[k] = std::min(static_cast<double>(demand[k]), weight[k] * level);
    }

    ByteCount assigned = 0;
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = std::min(demand[k], static_cast<ByteCount>(std::floor(fluid[k])));
        assigned += out[k];
    }

    // Hand out rounding leftovers by largest fractional part.
    ByteCount leftover = target - assigned;
    while (leftover > 0) {
        std::vector<std::size_t> open;
        for (std::size_t k = 0; k < n; ++k)
            if (out[k] < demand[k]) open.push_back(k);
        std::stable_sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
            return fluid[a] - std::floor(fluid[a]) > fluid[b] - std::floor(fluid[b]);
        });
        for (std::size_t k : open) {
            if (leftover == 0) break;
            ++out[k];
            --leftover;
            fluid[k] = std::floor(fluid[k]);
        }
    }
    return out;
}

Nanos ServicePlan::time_for(ClassId k, double class_bytes, Nanos dt) const {
    switch (mode_) {
        case Mode::Serial:
            return std::min(class_bytes / rate_, dt);
        case Mode::Priority:
            return std::min((static_cast<double>(before_[k]) + class_bytes) / rate_, dt);
        case Mode::Gps: {
            const double v = class_bytes / gps_weight_[k];
            auto it = std::lower_bound(breaks_.begin(), breaks_.end(), v,
                                       [](const auto& b, double x) { return b.first < x; });
            if (it == breaks_.end()) return std::min(breaks_.back().second, dt);
            if (it == breaks_.begin()) return 0.0;
            const auto& [v1, s1] = *it;
            const auto& [v0, s0] = *(it - 1);
            const double s = s0 + (v - v0) * (s1 - s0) / (v1 - v0);
            return std::min(s, dt);
        }
    }
    return dt;
}

Bottleneck::Bottleneck(QueueDiscipline discipline, std::size_t num_classes, BytesPerNs capacity,
                       std::vector<int> priority_ranks)
    : discipline_(discipline), capacity_(capacity), class_queued_(num_classes, 0) {
    if (!(capacity > 0.0)) throw ConfigError("bottleneck capacity must be positive");
    if (num_classes == 0) throw ConfigError("bottleneck needs at least one class");

    priority_order_.resize(num_classes);
    std::iota(priority_order_.begin(), priority_order_.end(), ClassId{0});
    if (std::holds_alternative<StrictPriority>(discipline_)) {
        if (priority_ranks.empty()) {
            priority_ranks.resize(num_classes);
            std::iota(priority_ranks.begin(), priority_ranks.end(), 0);
        }
        if (priority_ranks.size() != num_classes)
            throw ConfigError("strict priority needs one rank per class");
        std::stable_sort(priority_order_.begin(), priority_order_.end(),
                         [&](ClassId a, ClassId b) { return priority_ranks[a] < priority_ranks[b]; });
        for (std::size_t i = 1; i < num_classes; ++i)
            if (priority_ranks[priority_order_[i]] == priority_ranks[priority_order_[i - 1]])
                throw ConfigError("strict priority requires distinct priority ranks");
    }

    if (fair_within()) {
        fair_.resize(num_classes);
    } else if (!std::holds_alternative<SharedFifo>(discipline_)) {
        fifo_.resize(num_classes);
    }
}

bool Bottleneck::fair_within() const {
    const auto* w = std::get_if<WeightedClasses>(&discipline_);
    return w && w->within == WithinClass::FairQueue;
}

ByteCount Bottleneck::flow_queued(FlowId flow) const {
    return flow < flow_queued_.size() ? flow_queued_[flow] : 0;
}

std::size_t Bottleneck::entries(ClassId cls) const {
    if (fair_within()) return fair_[cls].size();
    if (std::holds_alternative<SharedFifo>(discipline_))
        return static_cast<std::size_t>(
            std::count_if(shared_.begin(), shared_.end(), [&](const Segment& s) { return s.cls == cls; }));
    return fifo_[cls].size();
}

void Bottleneck::enqueue(ClassId cls, FlowId flow, ByteCount bytes) {
    if (bytes <= 0) return;
    class_queued_[cls] += bytes;
    total_queued_ += bytes;
    if (flow >= flow_queued_.size()) {
        const std::size_t n = std::max<std::size_t>(flow + 1, 2 * flow_queued_.size());
        flow_queued_.resize(n, 0);
        if (fair_within()) fair_index_.resize(n, kNoEntry);
    }
    flow_queued_[flow] += bytes;

    if (fair_within()) {
        auto& slot = fair_index_[flow];
        if (slot == kNoEntry) {
            slot = fair_[cls].size();
            fair_[cls].push_back({flow, bytes});
        } else {
            if (slot >= fair_[cls].size() || fair_[cls][slot].flow != flow)
                throw std::logic_error("flow " + std::to_string(flow) + " enqueued in two classes");
            fair_[cls][slot].bytes += bytes;
        }
        return;
    }
    auto& q = std::holds_alternative<SharedFifo>(discipline_) ? shared_ : fifo_[cls];
    if (!q.empty() && q.back().flow == flow && q.back().cls == cls)
        q.back().bytes += bytes;
    else
        q.push_back({flow, cls, bytes});
}

ServicePlan Bottleneck::service_allocation(const WeightAllocation& weights, Nanos dt) {
    const std::size_t n = class_queued_.size();
    ServicePlan plan;
    plan.budget.assign(n, 0);
    plan.rate_ = capacity_;

    const double raw = credit_ + capacity_ * dt;
    const auto link_budget = static_cast<ByteCount>(std::floor(raw));
    // Credit only carries over while the link stays busy.
    credit_ = total_queued_ >= link_budget ? raw - static_cast<double>(link_budget) : 0.0;
    ByteCount left = std::min(link_budget, total_queued_);
    plan.total = left;
    if (left == 0) return plan;

    if (std::holds_alternative<SharedFifo>(discipline_)) {
        plan.mode_ = ServicePlan::Mode::Serial;
        for (const auto& seg : shared_) {
            if (left == 0) break;
            const ByteCount take = std::min(left, seg.bytes);
            plan.budget[seg.cls] += take;
            left -= take;
        }
        return plan;
    }

    if (std::holds_alternative<StrictPriority>(discipline_)) {
        plan.mode_ = ServicePlan::Mode::Priority;
        plan.before_.assign(n, 0);
        ByteCount served = 0;
        for (ClassId k : priority_order_) {
            const ByteCount take = std::min(left, class_queued_[k]);
            plan.budget[k] = take;
            plan.before_[k] = served;
            served += take;
            left -= take;
        }
        return plan;
    }

    std::vector<double> w(n, 1.0);
    if (uses_weights(discipline_)) {
        if (weights.size() != n) throw ConfigError("weight allocation does not match class count");
        for (std::size_t k = 0; k < n; ++k) w[k] = weights[k];
    }
    plan.budget = water_fill(class_queued_, w, left);

    // Fluid GPS timeline over the step: virtual time V advances at
    // C / (weight of classes still backlogged).
    plan.mode_ = ServicePlan::Mode::Gps;
    plan.gps_weight_ = w;
    std::vector<std::size_t> order;
    double w_busy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (class_queued_[k] > 0) {
            order.push_back(k);
            w_busy += w[k];
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return static_cast<double>(class_queued_[a]) / w[a] < static_cast<double>(class_queued_[b]) / w[b];
    });
    plan.breaks_.reserve(order.size() + 1);
    plan.breaks_.emplace_back(0.0, 0.0);
    double v = 0.0;
    Nanos s = 0.0;
    for (std::size_t k : order) {
        const double vk = static_cast<double>(class_queued_[k]) / w[k];
        if (vk > v) {
            s += (vk - v) * w_busy / capacity_;
            v = vk;
            plan.breaks_.emplace_back(v, s);
        }
        w_busy -= w[k];
    }
    return plan;
}

void Bottleneck::consume_flow(FlowId flow, ByteCount bytes, bool& emptied) {
    assert(flow < flow_queued_.size() && flow_queued_[flow] >= bytes);
    flow_queued_[flow] -= bytes;
    emptied = flow_queued_[flow] == 0;
}

void Bottleneck::drain_fifo(std::deque<Segment>& q, ClassId cls, ByteCount budget, const ServicePlan& plan,
                            Nanos t, Nanos dt, std::vector<DrainChunk>& out, bool shared) {
    ByteCount done = 0;
    while (budget > 0 && !q.empty()) {
        Segment& seg = q.front();
        const ByteCount take = std::min(budget, seg.bytes);
        seg.bytes -= take;
        budget -= take;
        done += take;
        class_queued_[seg.cls] -= take;
        total_queued_ -= take;
        bool emptied = false;
        consume_flow(seg.flow, take, emptied);
        const Nanos when = t + plan.time_for(shared ? 0 : cls, static_cast<double>(done), dt);
        out.push_back({seg.flow, seg.cls, take, when, emptied});
        if (seg.bytes == 0) q.pop_front();
    }
}

void Bottleneck::drain_fair(ClassId cls, ByteCount budget, const ServicePlan& plan, Nanos t, Nanos dt,
                            std::vector<DrainChunk>& out) {
    auto& backlog = fair_[cls];
    if (budget <= 0 || backlog.empty()) return;
    const std::size_t m = backlog.size();

    std::vector<ByteCount> demand(m);
    for (std::size_t i = 0; i < m; ++i) demand[i] = backlog[i].bytes;
    const std::vector<double> ones(m, 1.0);
    const std::vector<ByteCount> alloc = water_fill(demand, ones, budget);

    // Within the class every backlogged flow drains at the same rate, so a
    // flow with backlog b empties once the class has drained sum(min(b_i, b)).
    std::vector<ByteCount> sorted(demand);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> prefix(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + static_cast<double>(sorted[i]);
    auto class_bytes_at = [&](ByteCount b) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), b) - sorted.begin());
        return prefix[pos] + static_cast<double>(b) * static_cast<double>(m - pos);
    };
    const Nanos end_time = t + plan.time_for(cls, static_cast<double>(budget), dt);

    for (std::size_t i = 0; i < m; ++i) {
        if (alloc[i] == 0) continue;
        Backlog& b = backlog[i];
        const bool whole = alloc[i] == b.bytes;
        const Nanos when = whole ? t + plan.time_for(cls, class_bytes_at(b.bytes), dt) : end_time;
        b.bytes -= alloc[i];
        class_queued_[cls] -= alloc[i];
        total_queued_ -= alloc[i];
        bool emptied = false;
        consume_flow(b.flow, alloc[i], emptied);
        out.push_back({b.flow, cls, alloc[i], when, emptied});
    }

    // Compact emptied entries, keeping first-arrival order.
    std::size_t w = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (backlog[i].bytes == 0) {
            fair_index_[backlog[i].flow] = kNoEntry;
            continue;
        }
        if (w != i) {
            backlog[w] = backlog[i];
            fair_index_[backlog[w].flow] = w;
        }
        ++w;
    }
    backlog.resize(w);
}

void Bottleneck::drain(const ServicePlan& plan, Nanos t, Nanos dt, std::vector<DrainChunk>& out) {
    if (plan.total == 0) return;
    if (std::holds_alternative<SharedFifo>(discipline_)) {
        drain_fifo(shared_, 0, plan.total, plan, t, dt, out, true);
        return;
    }
    for (ClassId k = 0; k < class_queued_.size(); ++k) {
        if (fair_within())
            drain_fair(k, plan.budget[k], plan, t, dt, out);
        else
            drain_fifo(fifo_[k], k, plan.budget[k], plan, t, dt, out, false);
    }
}

}  // namespace slosim
