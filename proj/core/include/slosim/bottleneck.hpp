#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slosim/units.hpp"

namespace slosim {

// Queued data is tracked in whole bytes so conservation holds exactly.
using ByteCount = std::int64_t;

enum class WithinClass { Fifo, FairQueue };

struct SharedFifo {
    friend bool operator==(const SharedFifo&, const SharedFifo&) = default;
};
struct StrictPriority {
    friend bool operator==(const StrictPriority&, const StrictPriority&) = default;
};
struct WeightedClasses {
    WithinClass within = WithinClass::Fifo;
    friend bool operator==(const WeightedClasses&, const WeightedClasses&) = default;
};
// Fluid limit of (deficit/weighted) round robin across classes, FIFO within.
struct ProcessorSharing {
    bool weighted = false;
    friend bool operator==(const ProcessorSharing&, const ProcessorSharing&) = default;
};

using QueueDiscipline = std::variant<SharedFifo, StrictPriority, WeightedClasses, ProcessorSharing>;

std::string to_string(const QueueDiscipline& d);

/// True for disciplines whose classes see weighted capacity shares.
bool uses_weights(const QueueDiscipline& d);

/// Per-class scheduling weights. Inputs need only be positive; normalized()
/// rescales them to sum to one.
class WeightAllocation {
public:
    WeightAllocation() = default;
    explicit WeightAllocation(std::vector<double> weights);

    static WeightAllocation uniform(std::size_t n);

    WeightAllocation normalized() const;

    double operator[](std::size_t k) const { return weights_[k]; }
    double& operator[](std::size_t k) { return weights_[k]; }
    std::size_t size() const { return weights_.size(); }
    bool empty() const { return weights_.empty(); }
    double sum() const;
    std::span<const double> values() const { return weights_; }

    friend bool operator==(const WeightAllocation&, const WeightAllocation&) = default;

private:
    std::vector<double> weights_;
};

/// Integer water-filling: splits `budget` in proportion to `weight` among
/// entries with positive demand, never exceeding a demand, redistributing
/// leftovers until the budget or all demand is exhausted.
std::vector<ByteCount> water_fill(std::span<const ByteCount> demand, std::span<const double> weight,
                                  ByteCount budget);

/// Per-step service decision: how many bytes each class may drain, plus the
/// in-step timing model used to interpolate completion instants.
class ServicePlan {
public:
    std::vector<ByteCount> budget;
    ByteCount total = 0;

    /// Offset into the step at which class k has drained `class_bytes`.
    Nanos time_for(ClassId k, double class_bytes, Nanos dt) const;

private:
    friend class Bottleneck;
    enum class Mode { Serial, Priority, Gps };
    Mode mode_ = Mode::Serial;
    BytesPerNs rate_ = 0.0;
    std::vector<ByteCount> before_;          // Priority: bytes served ahead of class
    std::vector<double> gps_weight_;         // Gps: weight among backlogged classes
    std::vector<std::pair<double, Nanos>> breaks_;  // Gps: (virtual time, real offset)
};

struct DrainChunk {
    FlowId flow_id;
    ClassId class_id;
    ByteCount bytes;
    Nanos time;          // absolute time the chunk's last byte left the queue
    bool flow_emptied;   // the flow has nothing left queued
};

class Bottleneck {
public:
    Bottleneck(QueueDiscipline discipline, std::size_t num_classes, BytesPerNs capacity,
               std::vector<int> priority_ranks = {});

    /// A flow stays in one class. Flow ids index internal tables, so keep
    /// them small and dense.
    void enqueue(ClassId cls, FlowId flow, ByteCount bytes);

    /// Budgets for one step of length dt. Draws the step's whole-byte budget
    /// from a fractional link credit, so call exactly once per step.
    ServicePlan service_allocation(const WeightAllocation& weights, Nanos dt);

    /// Drains according to `plan`; step starts at t. Appends to `out`.
    void drain(const ServicePlan& plan, Nanos t, Nanos dt, std::vector<DrainChunk>& out);

    ByteCount queued(ClassId cls) const { return class_queued_[cls]; }
    ByteCount total_queued() const { return total_queued_; }
    ByteCount flow_queued(FlowId flow) const;
    std::span<const ByteCount> queued_per_class() const { return class_queued_; }
    std::size_t num_classes() const { return class_queued_.size(); }
    BytesPerNs capacity() const { return capacity_; }
    const QueueDiscipline& discipline() const { return discipline_; }

    /// Number of stored segments (FIFO) or backlog entries (fair queue) in a class.
    std::size_t entries(ClassId cls) const;

private:
    struct Segment {
        FlowId flow;
        ClassId cls;
        ByteCount bytes;
    };
    struct Backlog {
        FlowId flow;
        ByteCount bytes;
    };

    bool fair_within() const;
    void consume_flow(FlowId flow, ByteCount bytes, bool& emptied);
    void drain_fifo(std::deque<Segment>& q, ClassId cls, ByteCount budget, const ServicePlan& plan,
                    Nanos t, Nanos dt, std::vector<DrainChunk>& out, bool shared);
    void drain_fair(ClassId cls, ByteCount budget, const ServicePlan& plan, Nanos t, Nanos dt,
                    std::vector<DrainChunk>& out);

    QueueDiscipline discipline_;
    BytesPerNs capacity_;
    double credit_ = 0.0;
    std::vector<ClassId> priority_order_;
    std::deque<Segment> shared_;
    std::vector<std::deque<Segment>> fifo_;
    std::vector<std::vector<Backlog>> fair_;
    // Indexed by flow id; ids are expected to be dense.
    static constexpr std::size_t kNoEntry = static_cast<std::size_t>(-1);
    std::vector<std::size_t> fair_index_;  // position in fair_[class]
    std::vector<ByteCount> flow_queued_;
    std::vector<ByteCount> class_queued_;
    ByteCount total_queued_ = 0;
};

}  // namespace slosim
