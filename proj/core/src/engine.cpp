#include "slosim/engine.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>

#include "slosim/error.hpp"

namespace slosim {

std::size_t NetworkConfig::steps_per_tau() const {
    return static_cast<std::size_t>(std::llround(tau() / step()));
}

void NetworkConfig::validate() const {
    std::vector<std::string> problems;
    if (!(capacity > 0.0)) problems.emplace_back("network.link: capacity must be positive");
    if (!(rtt > 0.0)) problems.emplace_back("network.rtt: must be positive");
    if (dt < 0.0) problems.emplace_back("sim.dt: must be positive");
    if (problems.empty()) {
        const double ratio = tau() / step();
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
            problems.emplace_back("sim.dt: must divide rtt/2 evenly");
        else if (ratio < 4.0 - 1e-9)
            problems.emplace_back("sim.dt: must be at most rtt/8");
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

Nanos min_latency(Bytes size, const NetworkConfig& net) { return size / net.capacity + net.rtt; }

void SimConfig::validate() const {
    std::vector<std::string> problems;
    auto absorb = [&](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            problems.insert(problems.end(), e.problems().begin(), e.problems().end());
        }
    };
    absorb([&] { network.validate(); });
    absorb([&] { cc.validate(); });
    if (classes.empty()) problems.emplace_back("classes: at least one class is required");
    absorb([&] { slosim::validate(classes); });
    if (num_flows < 1) problems.emplace_back("sim.num_flows: must be at least 1");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 0.5))
        problems.emplace_back("sim.warmup: must be in [0, 0.5)");
    if (replications < 1) problems.emplace_back("sim.replications: must be at least 1");
    if (!(bottleneck_scale > 0.0)) problems.emplace_back("sim.bottleneck_scale: must be positive");
    if (!(horizon_factor >= 1.0)) problems.emplace_back("sim.horizon_factor: must be at least 1");
    if (!weights.empty() && weights.size() != classes.size())
        problems.emplace_back("queue.weights: need one weight per class");
    if (network.rtt > 0.0 && cc.eta > 0.0 && network.step() > cc.eta * network.tau())
        problems.emplace_back("sim.dt: must not exceed eta * rtt/2");
    if (std::holds_alternative<StrictPriority>(discipline)) {
        auto ranks = priority_ranks();
        std::sort(ranks.begin(), ranks.end());
        if (std::adjacent_find(ranks.begin(), ranks.end()) != ranks.end())
            problems.emplace_back("classes: strict priority requires distinct priority ranks");
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

WeightAllocation SimConfig::effective_weights() const {
    if (weights.empty() || !uses_weights(discipline)) return WeightAllocation::uniform(classes.size());
    return weights.normalized();
}

std::vector<int> SimConfig::priority_ranks() const {
    std::vector<int> ranks(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k)
        ranks[k] = classes[k].priority_rank.value_or(static_cast<int>(k));
    return ranks;
}

std::vector<std::size_t> flow_counts(const SimConfig& cfg) {
    std::vector<double> lambda;
    for (const auto& c : cfg.classes) lambda.push_back(1.0 / mean_gap(c.interarrivals));
    const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    std::vector<std::size_t> counts;
    for (double l : lambda) {
        const auto n = std::llround(static_cast<double>(cfg.num_flows) * l / total);
        counts.push_back(static_cast<std::size_t>(std::max<long long>(1, n)));
    }
    return counts;
}

std::vector<FlowArrival> generate_workload(const SimConfig& cfg) {
    const auto counts = flow_counts(cfg);
    std::vector<FlowArrival> all;
    for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
        Rng rng(stream_seed(cfg.seed, k));
        auto arr = generate_arrivals(cfg.classes[k], counts[k], static_cast<ClassId>(k), rng);
        all.insert(all.end(), arr.begin(), arr.end());
    }
    std::stable_sort(all.begin(), all.end(), [](const FlowArrival& a, const FlowArrival& b) {
        if (a.arrival_time != b.arrival_time) return a.arrival_time < b.arrival_time;
        return a.class_id < b.class_id;
    });
    for (std::size_t i = 0; i < all.size(); ++i) all[i].flow_id = i;
    return all;
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Completed: return "completed";
        case Termination::Horizon: return "unstable";
        case Termination::Timeout: return "timeout";
    }
    return "?";
}

std::vector<FlowRecord> SimResult::all_records() const {
    std::vector<FlowRecord> out;
    for (const auto& recs : per_class) out.insert(out.end(), recs.begin(), recs.end());
    std::sort(out.begin(), out.end(), [](const FlowRecord& a, const FlowRecord& b) { return a.flow_id < b.flow_id; });
    return out;
}

struct Simulator::Impl {
    struct Flow {
        FlowId id = 0;
        ClassId cls = 0;
        Nanos arrival = 0.0;
        ByteCount size = 0;
        ByteCount sent = 0;
        ByteCount sent_uncontrolled = 0;
        ByteCount drained = 0;
        std::uint64_t admit_step = 0;
        double credit = 0.0;
        BytesPerNs rho = 0.0;
        BytesPerNs last_rate = 0.0;
        bool admitted = false;
        bool controlled = false;
        bool done = false;
    };
    struct PipeItem {
        ClassId cls;
        FlowId flow;
        ByteCount bytes;
    };
    struct Expiry {
        std::uint64_t step;
        ClassId cls;
        BytesPerNs rate;
    };

    Impl(const SimConfig& c, std::vector<FlowArrival> arr)
        : cfg(c),
          arrivals(std::move(arr)),
          num_classes(c.classes.size()),
          dt(c.network.step()),
          tau(c.network.tau()),
          lag(c.network.steps_per_tau()),
          link(c.network.capacity * c.bottleneck_scale),
          host_rate(std::min(c.cc.r_init, c.network.capacity)),
          weights(c.effective_weights()),
          bn(c.discipline, c.classes.size(), c.network.capacity * c.bottleneck_scale, c.priority_ranks()),
          history(c.classes.size(), dt, 2 * lag + 2),
          pipe(lag),
          ru_now(num_classes, 0.0),
          ru_count(num_classes, 0),
          sample(num_classes),
          drained_step(num_classes, 0),
          rule(num_classes, 0.0),
          rule_valid(num_classes, 0),
          active_buf(new bool[num_classes]),
          groups(num_classes) {
        flows.resize(arrivals.size());
        for (std::size_t i = 0; i < arrivals.size(); ++i) {
            const auto& a = arrivals[i];
            if (a.flow_id != i) throw ConfigError("arrivals must carry flow ids 0..n-1 in time order");
            if (i > 0 && a.arrival_time < arrivals[i - 1].arrival_time)
                throw ConfigError("arrivals must be sorted by time");
            if (a.class_id >= num_classes) throw ConfigError("arrival references an unknown class");
            Flow& f = flows[i];
            f.id = a.flow_id;
            f.cls = a.class_id;
            f.arrival = a.arrival_time;
            f.size = std::max<ByteCount>(1, std::llround(a.size));
        }
        result.per_class.resize(num_classes);
        result.counters.peak_queue.assign(num_classes, 0.0);
        result.counters.drained_per_class.assign(num_classes, 0.0);

        // Which classes' signals each class's congestion control aggregates.
        const auto ranks = c.priority_ranks();
        for (std::size_t k = 0; k < num_classes; ++k) {
            for (std::size_t m = 0; m < num_classes; ++m) {
                const bool member = std::visit(
                    [&](const auto& d) {
                        using D = std::decay_t<decltype(d)>;
                        if constexpr (std::is_same_v<D, SharedFifo>) return true;
                        else if constexpr (std::is_same_v<D, StrictPriority>) return ranks[m] <= ranks[k];
                        else return m == k;
                    },
                    c.discipline);
                if (member) groups[k].push_back(static_cast<ClassId>(m));
            }
        }
        per_class_capacity = std::holds_alternative<WeightedClasses>(c.discipline) ||
                             std::holds_alternative<ProcessorSharing>(c.discipline);

        const Nanos last = arrivals.empty() ? 0.0 : arrivals.back().arrival_time;
        horizon = c.horizon_factor * last + c.horizon_slack;
        wall_start = std::chrono::steady_clock::now();
    }

    std::uint64_t admit_step_for(Nanos t) const {
        const double x = std::ceil(t / dt - 1e-9);
        return x <= 0.0 ? 0 : static_cast<std::uint64_t>(x);
    }

    bool finished() const { return next_arrival == arrivals.size() && live == 0; }

    void maybe_skip_idle() {
        if (live != 0 || next_arrival == arrivals.size()) return;
        const std::uint64_t target = admit_step_for(arrivals[next_arrival].arrival_time);
        const std::uint64_t last_expiry = ru_expiry.empty() ? 0 : ru_expiry.back().step;
        // Every lagged sample the target step can see is empty, so forgetting
        // the history is exact.
        if (target >= 2 * lag + std::max(n + 1, last_expiry)) {
            n = target;
            history.reset();
            ru_expiry.clear();
            std::fill(ru_now.begin(), ru_now.end(), 0.0);
            std::fill(ru_count.begin(), ru_count.end(), 0);
        }
    }

    void admit(Nanos t) {
        (void)t;
        while (next_arrival < arrivals.size() && admit_step_for(arrivals[next_arrival].arrival_time) <= n) {
            Flow& f = flows[next_arrival++];
            f.admitted = true;
            f.admit_step = n;
            f.rho = host_rate;
            sending.push_back(f.id);
            ++live;
            result.counters.bytes_offered += static_cast<double>(f.size);
            const Nanos window = 2.0 * tau;
            const BytesPerNs u = std::min(host_rate * window, static_cast<double>(f.size)) / window;
            ru_now[f.cls] += u;
            ++ru_count[f.cls];
            ru_expiry.push_back({n + 2 * lag, f.cls, u});
        }
    }

    void complete(Flow& f, Nanos when, bool completed) {
        f.done = true;
        --live;
        FlowRecord r;
        r.flow_id = f.id;
        r.class_id = f.cls;
        r.size = static_cast<double>(f.size);
        r.arrival = f.arrival;
        r.completion = when;
        r.latency = when - f.arrival;
        r.slowdown = r.latency / min_latency(r.size, cfg.network);
        r.completed = completed;
        result.per_class[f.cls].push_back(r);
    }

    bool step() {
        if (finished()) return false;
        maybe_skip_idle();
        const Nanos t = static_cast<double>(n) * dt;
        admit(t);

        // Queue signal is the fluid backlog left by the previous step, taken
        // before this step's arrivals land.
        for (std::size_t k = 0; k < num_classes; ++k)
            sample[k] = ClassSignal{0.0, static_cast<double>(bn.queued(static_cast<ClassId>(k))), 0, false};

        auto& slot = pipe[n % lag];
        for (const auto& item : slot) {
            bn.enqueue(item.cls, item.flow, item.bytes);
            in_flight -= item.bytes;
        }
        slot.clear();

        while (!ru_expiry.empty() && ru_expiry.front().step <= n) {
            const auto& e = ru_expiry.front();
            if (--ru_count[e.cls] == 0)
                ru_now[e.cls] = 0.0;
            else
                ru_now[e.cls] -= e.rate;
            ru_expiry.pop_front();
        }

        for (std::size_t k = 0; k < num_classes; ++k) {
            sample[k].uncontrolled_rate = ru_now[k];
            result.counters.peak_queue[k] =
                std::max(result.counters.peak_queue[k], static_cast<double>(bn.queued(static_cast<ClassId>(k))));
        }
        for (FlowId id : sending) {
            Flow& f = flows[id];
            if (!f.controlled && n >= f.admit_step + 2 * lag) f.controlled = true;
            if (f.controlled) ++sample[f.cls].controlled;
        }
        auto& recorded = history.record(sample);

        const auto& at_tau = history.at_lag_steps(lag);
        const auto& at_rtt = history.at_lag_steps(2 * lag);
        for (std::size_t k = 0; k < num_classes; ++k) active_buf[k] = at_tau[k].active;
        for (std::size_t k = 0; k < num_classes; ++k) {
            double q = 0.0, ru = 0.0;
            std::uint32_t ctl = 0;
            for (ClassId m : groups[k]) {
                q += at_tau[m].queue;
                ru += at_rtt[m].uncontrolled_rate;
                ctl += at_rtt[m].controlled;
            }
            rule_valid[k] = ctl >= 1;
            if (!rule_valid[k]) continue;
            const BytesPerNs cap =
                per_class_capacity
                    ? class_capacity(weights, std::span<const bool>(active_buf.get(), num_classes),
                                     static_cast<ClassId>(k), link)
                    : link;
            rule[k] = update_rule(cfg.cc, cap, ru, q, ctl, tau);
        }

        std::size_t keep = 0;
        for (std::size_t i = 0; i < sending.size(); ++i) {
            Flow& f = flows[sending[i]];
            BytesPerNs rate = host_rate;
            if (f.controlled) {
                // With no controlled flows visible in the lagged sample the
                // rule is undefined and the current rate is held.
                if (rule_valid[f.cls]) {
                    const BytesPerNs ideal = std::max(0.0, rule[f.cls]);
                    f.rho = std::min(smooth_rate(f.rho, ideal, dt, cfg.cc, tau), host_rate);
                }
                rate = f.rho;
            }
            f.last_rate = rate;
            const double raw = f.credit + rate * dt;
            ByteCount bytes = static_cast<ByteCount>(std::floor(raw));
            f.credit = raw - static_cast<double>(bytes);
            bytes = std::min(bytes, f.size - f.sent);
            if (bytes > 0) {
                slot.push_back({f.cls, f.id, bytes});
                f.sent += bytes;
                if (!f.controlled) f.sent_uncontrolled += bytes;
                in_flight += bytes;
                sent_total += bytes;
            }
            if (f.sent < f.size) sending[keep++] = f.id;
        }
        sending.resize(keep);

        const ServicePlan plan = bn.service_allocation(weights, dt);
        chunks.clear();
        bn.drain(plan, t, dt, chunks);
        std::fill(drained_step.begin(), drained_step.end(), 0);
        for (const auto& c : chunks) {
            drained_step[c.class_id] += c.bytes;
            drained_total += c.bytes;
            Flow& f = flows[c.flow_id];
            f.drained += c.bytes;
            if (f.drained == f.size) complete(f, c.time + tau, true);
        }
        for (std::size_t k = 0; k < num_classes; ++k) {
            recorded[k].active = bn.queued(static_cast<ClassId>(k)) > 0 || drained_step[k] > 0;
            result.counters.drained_per_class[k] += static_cast<double>(drained_step[k]);
        }

        ++result.counters.steps;
        if (observer) {
            StepView v{n,
                       t,
                       static_cast<double>(sent_total),
                       static_cast<double>(in_flight),
                       static_cast<double>(bn.total_queued()),
                       static_cast<double>(drained_total),
                       bn.queued_per_class(),
                       drained_step,
                       recorded};
            observer(v);
        }
        ++n;
        return !finished();
    }

    void abort(Termination why) {
        const Nanos t = static_cast<double>(n) * dt;
        result.termination = why;
        for (auto& f : flows)
            if (f.admitted && !f.done) complete(f, t, false);
    }

    SimResult finish() {
        result.counters.bytes_sent = static_cast<double>(sent_total);
        result.counters.bytes_drained = static_cast<double>(drained_total);
        result.counters.end_time = static_cast<double>(n) * dt;
        result.counters.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
        return std::move(result);
    }

    SimResult run() {
        while (!finished()) {
            if (static_cast<double>(n) * dt > horizon) {
                abort(Termination::Horizon);
                break;
            }
            if (cfg.timeout_s > 0.0 && (n & 0xffff) == 0 &&
                std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count() >
                    cfg.timeout_s) {
                abort(Termination::Timeout);
                break;
            }
            step();
        }
        return finish();
    }

    FlowView view(const Flow& f) const {
        return FlowView{f.id, f.cls, f.admit_step, f.size, f.sent, f.sent_uncontrolled, f.last_rate, f.controlled};
    }

    SimConfig cfg;
    std::vector<FlowArrival> arrivals;
    std::size_t num_classes;
    Nanos dt;
    Nanos tau;
    std::size_t lag;
    BytesPerNs link;
    BytesPerNs host_rate;
    WeightAllocation weights;
    Bottleneck bn;
    SignalHistory history;
    std::vector<std::vector<PipeItem>> pipe;
    std::vector<Flow> flows;
    std::vector<FlowId> sending;
    std::size_t next_arrival = 0;
    std::size_t live = 0;
    std::uint64_t n = 0;
    std::deque<Expiry> ru_expiry;
    std::vector<double> ru_now;
    std::vector<std::size_t> ru_count;
    std::vector<ClassSignal> sample;
    std::vector<ByteCount> drained_step;
    std::vector<double> rule;
    std::vector<char> rule_valid;
    std::unique_ptr<bool[]> active_buf;
    std::vector<std::vector<ClassId>> groups;
    bool per_class_capacity = false;
    std::vector<DrainChunk> chunks;
    ByteCount in_flight = 0;
    ByteCount sent_total = 0;
    ByteCount drained_total = 0;
    Nanos horizon = 0.0;
    std::chrono::steady_clock::time_point wall_start;
    Observer observer;
    SimResult result;
};

Simulator::Simulator(const SimConfig& cfg, std::vector<FlowArrival> arrivals) {
    cfg.validate();
    impl_ = std::make_unique<Impl>(cfg, std::move(arrivals));
}

Simulator::~Simulator() = default;

void Simulator::set_observer(Observer obs) { impl_->observer = std::move(obs); }

bool Simulator::step() { return impl_->step(); }

void Simulator::run_until(Nanos t) {
    while (!impl_->finished() && now() < t) impl_->step();
}

SimResult Simulator::run() { return impl_->run(); }

Nanos Simulator::now() const { return static_cast<double>(impl_->n) * impl_->dt; }

std::uint64_t Simulator::current_step() const { return impl_->n; }

std::vector<FlowView> Simulator::sending_flows() const {
    std::vector<FlowView> out;
    for (FlowId id : impl_->sending) out.push_back(impl_->view(impl_->flows[id]));
    return out;
}

std::optional<FlowView> Simulator::flow(FlowId id) const {
    if (id >= impl_->flows.size() || !impl_->flows[id].admitted) return std::nullopt;
    return impl_->view(impl_->flows[id]);
}

const Bottleneck& Simulator::bottleneck() const { return impl_->bn; }

SimResult run_simulation(const SimConfig& cfg) {
    cfg.validate();
    return run_simulation(cfg, generate_workload(cfg));
}

SimResult run_simulation(const SimConfig& cfg, std::vector<FlowArrival> arrivals) {
    Simulator sim(cfg, std::move(arrivals));
    return sim.run();
}

std::span<const FlowRecord> post_warmup(std::span<const FlowRecord> records, double fraction) {
    const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(records.size())));
    return records.subspan(std::min(drop, records.size()));
}

std::vector<ClassReport> evaluate(const SimConfig& cfg, const SimResult& result) {
    std::vector<ClassReport> out;
    for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
        const auto& spec = cfg.classes[k];
        const auto recs = post_warmup(result.per_class[k], cfg.warmup_fraction);
        ClassReport rep;
        rep.name = spec.name;
        rep.flows = recs.size();
        rep.censored = static_cast<std::size_t>(
            std::count_if(recs.begin(), recs.end(), [](const FlowRecord& r) { return !r.completed; }));
        for (const auto& sli : spec.slis) rep.slis[sli.name] = compute_sli(sli, recs);
        if (spec.slo) {
            rep.verdict = eval_slo(*spec.slo, rep.slis);
            if (upper_bounds_only(*spec.slo)) rep.binding = class_loss(*spec.slo, rep.slis);
        }
        out.push_back(std::move(rep));
    }
    return out;
}

std::vector<double> class_losses(const std::vector<ClassReport>& reports) {
    std::vector<double> out;
    for (const auto& r : reports) {
        if (r.binding)
            out.push_back(r.binding->loss);
        else if (r.verdict)
            throw ConfigError("class \"" + r.name + "\": loss needs an SLO of upper-bound comparisons");
        else
            out.push_back(-1.0);
    }
    return out;
}

bool all_met(const std::vector<ClassReport>& reports) {
    return std::all_of(reports.begin(), reports.end(),
                       [](const ClassReport& r) { return !r.verdict || *r.verdict == Verdict::Met; });
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t r) {
    return r == 0 ? seed : stream_seed(seed, 0x5eed0000ULL + r);
}

Interval mean_ci95(std::span<const double> samples) {
    Interval iv;
    iv.n = samples.size();
    if (iv.n == 0) return iv;
    iv.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(iv.n);
    if (iv.n < 2) return iv;
    double ss = 0.0;
    for (double x : samples) ss += (x - iv.mean) * (x - iv.mean);
    const double sd = std::sqrt(ss / static_cast<double>(iv.n - 1));
    boost::math::students_t dist(static_cast<double>(iv.n - 1));
    iv.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd /
                    std::sqrt(static_cast<double>(iv.n));
    return iv;
}

namespace {

void put_double(std::ostream& out, double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), res.ptr - buf.data());
}

}  // namespace

void write_records_csv(std::ostream& out, const SimConfig& cfg, const SimResult& result) {
    out << "flow_id,class,size_bytes,arrival_ns,completion_ns,slowdown\n";
    for (const auto& r : result.all_records()) {
        out << r.flow_id << ',' << cfg.classes[r.class_id].name << ',' << static_cast<long long>(r.size) << ',';
        put_double(out, r.arrival);
        out << ',';
        put_double(out, r.completion);
        out << ',';
        put_double(out, r.slowdown);
        out << '\n';
    }
}

}  // namespace slosim
