#include "slosim/optimizer.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "slosim/error.hpp"
#include "slosim/parallel.hpp"
#include "slosim/spec_io.hpp"

namespace slosim {

void OptimizerConfig::validate() const {
    std::vector<std::string> problems;
    if (max_iterations < 1) problems.emplace_back("optimizer.max_iterations: must be at least 1");
    if (!(baseline_weight_tolerance > 0.0 && baseline_weight_tolerance < 0.5))
        problems.emplace_back("optimizer.baseline_weight_tolerance: must be in (0, 0.5)");
    if (!(capacity_search_tolerance > 0.0 && capacity_search_tolerance < 0.5))
        problems.emplace_back("optimizer.capacity_search_tolerance: must be in (0, 0.5)");
    if (replications < 1) problems.emplace_back("optimizer.replications: must be at least 1");
    if (!(min_probe_weight > 0.0 && min_probe_weight < 1.0))
        problems.emplace_back("optimizer.min_probe_weight: must be in (0, 1)");
    if (!(capacity_cap_factor > 1.0)) problems.emplace_back("optimizer.capacity_cap_factor: must exceed 1");
    if (!(loss_floor < 0.0)) problems.emplace_back("optimizer.loss_floor: must be negative");
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

namespace {

// Class k's arrivals from the same random stream it uses in the joint run,
// relabelled as class 0.
std::vector<FlowArrival> class_arrivals(const SimConfig& cfg, std::size_t k) {
    const auto counts = flow_counts(cfg);
    Rng rng(stream_seed(cfg.seed, k));
    auto arr = generate_arrivals(cfg.classes[k], counts[k], 0, rng);
    for (std::size_t i = 0; i < arr.size(); ++i) arr[i].flow_id = i;
    return arr;
}

SimConfig single_class(const SimConfig& cfg, std::size_t k) {
    SimConfig one = cfg;
    one.classes = {cfg.classes[k]};
    one.classes[0].priority_rank.reset();
    one.discipline = SharedFifo{};
    one.weights = WeightAllocation{};
    one.num_flows = flow_counts(cfg)[k];
    return one;
}

bool run_meets(const SimConfig& cfg, std::vector<FlowArrival> arrivals) {
    SimResult res = run_simulation(cfg, std::move(arrivals));
    return res.stable() && all_met(evaluate(cfg, res));
}

SimConfig at_capacity(const SimConfig& tmpl, BytesPerNs c) {
    SimConfig cfg = tmpl;
    cfg.network.capacity = c;
    cfg.cc.r_init = c;
    return cfg;
}

BytesPerNs offered_load(const SimConfig& cfg) {
    double load = 0.0;
    for (const auto& c : cfg.classes) load += c.offered_rate();
    return load;
}

}  // namespace

bool baseline_probe(const SimConfig& cfg, std::size_t k, double w) {
    const BytesPerNs share = w * cfg.bottleneck_scale * cfg.network.capacity;
    // A share below the offered load can only build an unbounded queue.
    if (cfg.classes[k].offered_rate() >= share) return false;
    SimConfig one = single_class(cfg, k);
    one.bottleneck_scale = cfg.bottleneck_scale * w;
    return run_meets(one, class_arrivals(cfg, k));
}

std::vector<std::optional<double>> find_baselines(const SimConfig& cfg, const OptimizerConfig& opt) {
    cfg.validate();
    opt.validate();
    std::vector<std::optional<double>> out(cfg.classes.size());
    parallel_for(cfg.classes.size(), resolve_workers(opt.workers), [&](std::size_t k) {
        if (!cfg.classes[k].slo) {
            out[k] = opt.min_probe_weight;
            return;
        }
        if (!baseline_probe(cfg, k, 1.0)) return;
        double lo = opt.min_probe_weight;
        if (baseline_probe(cfg, k, lo)) {
            out[k] = lo;
            return;
        }
        double hi = 1.0;
        while (hi - lo > opt.baseline_weight_tolerance) {
            const double mid = 0.5 * (lo + hi);
            (baseline_probe(cfg, k, mid) ? hi : lo) = mid;
        }
        out[k] = hi;
    });
    return out;
}

bool transfer_weights(std::vector<double>& weights, const std::vector<double>& losses) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });

    bool moved = false;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = order[j];
        const std::size_t q = order[n - 1 - j];
        if (losses[k] >= 0.0 || losses[q] <= 0.0) break;
        const double delta = std::abs(losses[k] / 2.0) * weights[k];
        weights[k] -= delta;
        weights[q] += delta;
        if (!(weights[k] > 0.0)) throw std::logic_error("weight transfer drove a weight to zero");
        moved = true;
    }
    return moved;
}

OptimizationOutcome weight_loop(const WeightAllocation& initial, const LossFunction& losses,
                                std::size_t max_iterations, double loss_floor) {
    OptimizationOutcome out;
    const WeightAllocation start = initial.normalized();
    std::vector<double> w(start.values().begin(), start.values().end());
    double best_worst = std::numeric_limits<double>::infinity();
    WeightAllocation best;

    for (std::size_t it = 0; it < max_iterations; ++it) {
        const WeightAllocation current{w};
        std::vector<double> l = losses(current);
        if (l.size() != w.size()) throw std::logic_error("loss function returned the wrong number of losses");
        for (auto& x : l) x = std::max(x, loss_floor);
        out.trace.push_back({current, l});

        const double worst = *std::max_element(l.begin(), l.end());
        if (worst < best_worst) {
            best_worst = worst;
            best = current;
        }
        if (worst < 0.0) {
            out.weights = current;
            out.success = true;
            out.reason = "met";
            return out;
        }
        if (*std::min_element(l.begin(), l.end()) > 0.0) {
            out.weights = current;
            out.reason = "min loss positive";
            return out;
        }
        // Losses are deterministic for pinned seeds, so an iteration that
        // moves nothing would repeat forever.
        if (!transfer_weights(w, l)) {
            out.weights = current;
            out.reason = "stalled";
            return out;
        }
    }
    out.weights = best;
    out.reason = "timeout";
    return out;
}

std::vector<double> simulate_losses(const SimConfig& cfg, const WeightAllocation& weights,
                                    const OptimizerConfig& opt) {
    std::vector<double> sum(cfg.classes.size(), 0.0);
    for (std::size_t r = 0; r < opt.replications; ++r) {
        SimConfig run = cfg;
        run.weights = weights;
        run.seed = replication_seed(cfg.seed, r);
        const SimResult res = run_simulation(run);
        const auto l = class_losses(evaluate(run, res));
        for (std::size_t k = 0; k < l.size(); ++k) sum[k] += l[k];
    }
    for (auto& x : sum) x /= static_cast<double>(opt.replications);
    return sum;
}

OptimizationOutcome optimize_weights(const SimConfig& cfg, const OptimizerConfig& opt) {
    cfg.validate();
    opt.validate();
    if (!uses_weights(cfg.discipline))
        throw ConfigError("queue.discipline: weight optimization needs a weighted discipline");
    for (const auto& c : cfg.classes)
        if (c.slo && !upper_bounds_only(*c.slo))
            throw ConfigError("classes." + c.name + ".slo: the optimizer needs upper-bound comparisons");

    auto baselines = find_baselines(cfg, opt);
    if (std::any_of(baselines.begin(), baselines.end(), [](const auto& b) { return !b; })) {
        OptimizationOutcome out;
        out.weights = WeightAllocation::uniform(cfg.classes.size());
        out.reason = "infeasible baseline";
        out.baselines = std::move(baselines);
        return out;
    }
    std::vector<double> init;
    for (const auto& b : baselines) init.push_back(*b);
    auto out = weight_loop(
        WeightAllocation(init), [&](const WeightAllocation& w) { return simulate_losses(cfg, w, opt); },
        opt.max_iterations, opt.loss_floor);
    out.baselines = std::move(baselines);
    return out;
}

std::string to_string(const CapacityStrategy& s) {
    switch (s.kind) {
        case CapacityStrategy::Kind::SharedFifo: return "fifo";
        case CapacityStrategy::Kind::OptimizedWeights:
            return s.within == WithinClass::Fifo ? "weighted-fifo" : "weighted-fq";
        case CapacityStrategy::Kind::Static: return "static";
    }
    return "?";
}

CapacityResult search_capacity(BytesPerNs load, double tolerance, double cap_factor,
                               const std::function<bool(BytesPerNs)>& meets) {
    if (!(load > 0.0)) throw ConfigError("capacity search needs a positive offered load");
    CapacityResult res;
    BytesPerNs lo = load;
    BytesPerNs hi = 2.0 * load;
    while (true) {
        ++res.probes;
        if (meets(hi)) break;
        lo = hi;
        hi *= 2.0;
        if (hi > cap_factor * load) return res;
    }
    while ((hi - lo) / hi > tolerance) {
        const BytesPerNs mid = 0.5 * (lo + hi);
        ++res.probes;
        (meets(mid) ? hi : lo) = mid;
    }
    res.capacity = hi;
    return res;
}

CapacityResult min_bandwidth(const SimConfig& tmpl, const CapacityStrategy& strategy, const OptimizerConfig& opt) {
    tmpl.validate();
    opt.validate();
    const double tol = opt.capacity_search_tolerance;

    switch (strategy.kind) {
        case CapacityStrategy::Kind::SharedFifo: {
            SimConfig base = tmpl;
            base.discipline = SharedFifo{};
            const auto arrivals = generate_workload(base);
            return search_capacity(offered_load(base), tol, opt.capacity_cap_factor, [&](BytesPerNs c) {
                return run_meets(at_capacity(base, c), arrivals);
            });
        }
        case CapacityStrategy::Kind::OptimizedWeights: {
            SimConfig base = tmpl;
            base.discipline = WeightedClasses{strategy.within};
            return search_capacity(offered_load(base), tol, opt.capacity_cap_factor, [&](BytesPerNs c) {
                return optimize_weights(at_capacity(base, c), opt).success;
            });
        }
        case CapacityStrategy::Kind::Static: {
            CapacityResult total;
            double sum = 0.0;
            for (std::size_t k = 0; k < tmpl.classes.size(); ++k) {
                const SimConfig one = single_class(tmpl, k);
                const auto arrivals = class_arrivals(tmpl, k);
                auto r = search_capacity(offered_load(one), tol, opt.capacity_cap_factor, [&](BytesPerNs c) {
                    return run_meets(at_capacity(one, c), arrivals);
                });
                total.probes += r.probes;
                if (!r.capacity) return CapacityResult{std::nullopt, total.probes, {}};
                total.per_class.push_back(*r.capacity);
                sum += *r.capacity;
            }
            total.capacity = sum;
            return total;
        }
    }
    return {};
}

double inflation(BytesPerNs c_fifo, BytesPerNs c_other) {
    if (!(c_fifo > 0.0 && c_other > 0.0)) throw ConfigError("inflation needs positive capacities");
    return c_fifo / c_other;
}

SampleSpace SampleSpace::standard() {
    const std::filesystem::path dir = bundled_data_dir() / "cdf";
    SampleSpace s;
    s.cdf_files = {dir / "google.txt", dir / "facebook.txt", dir / "alibaba.txt"};
    return s;
}

double SampledScenario::min_threshold() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : params) m = std::min(m, p.slo_threshold);
    return m;
}

double SampledScenario::max_sigma() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.sigma);
    return m;
}

bool SampledScenario::tight_bursty() const {
    return std::any_of(params.begin(), params.end(),
                       [](const SampledClass& c) { return c.slo_threshold < 4.0 && c.sigma > 1.7; });
}

SampledScenario sample_scenario(const SampleSpace& space, std::size_t n_classes, Rng& rng, const NetworkConfig& net) {
    if (n_classes != 3 && n_classes != 5) throw ConfigError("scenarios have 3 or 5 classes");
    if (space.cdf_files.empty()) throw ConfigError("sample space lists no CDF files");
    std::vector<EmpiricalCdf> cdfs;
    for (const auto& p : space.cdf_files) cdfs.push_back(load_cdf_file(p));

    const double rate_lo = n_classes == 3 ? space.rate3_lo_gbps : space.rate5_lo_gbps;
    const double rate_hi = n_classes == 3 ? space.rate3_hi_gbps : space.rate5_hi_gbps;
    const Bytes bdp = net.capacity * net.rtt;

    SampledScenario out;
    for (std::size_t k = 0; k < n_classes; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, cdfs.size() - 1);
        const std::size_t which = pick(rng);
        const double sigma = std::uniform_real_distribution<double>(space.sigma_lo, space.sigma_hi)(rng);
        const double rate = std::uniform_real_distribution<double>(rate_lo, rate_hi)(rng);
        const double thr = std::uniform_real_distribution<double>(space.slo_lo, space.slo_hi)(rng);

        TrafficClassSpec c;
        c.name = "class" + std::to_string(k);
        c.flow_sizes = cdfs[which];
        c.interarrivals = LogNormalGap{mu_for_load(gbps(rate), mean_flow_size(cdfs[which]), sigma), sigma};
        c.slis = {SliDef{"small_p99", Percentile{space.percentile}, SizeRange{0.0, bdp}},
                  SliDef{"large_p99", Percentile{space.percentile}, SizeRange{bdp, std::numeric_limits<double>::infinity()}}};
        c.slo = SloExpr::all_of({SloExpr::compare("small_p99", CmpOp::Less, thr),
                                 SloExpr::compare("large_p99", CmpOp::Less, 2.0 * thr)});
        out.classes.push_back(std::move(c));
        out.params.push_back({space.cdf_files[which].stem().string(), sigma, rate, thr});
    }
    return out;
}

std::vector<ScenarioRow> run_scenarios(const SimConfig& tmpl, const SampleSpace& space, std::size_t count,
                                       std::size_t n_classes, std::uint64_t seed, const OptimizerConfig& opt,
                                       const std::function<void(const ScenarioRow&)>& on_row) {
    std::vector<ScenarioRow> rows(count);
    for (std::size_t i = 0; i < count; ++i) {
        rows[i].index = i;
        rows[i].seed = stream_seed(seed, i);
        Rng rng(rows[i].seed);
        rows[i].scenario = sample_scenario(space, n_classes, rng, tmpl.network);
    }
    OptimizerConfig inner = opt;
    inner.workers = 1;
    std::mutex mu;
    parallel_for(count, resolve_workers(opt.workers), [&](std::size_t i) {
        ScenarioRow& row = rows[i];
        SimConfig cfg = tmpl;
        cfg.classes = row.scenario.classes;
        cfg.weights = WeightAllocation{};
        cfg.seed = row.seed;
        row.fifo = min_bandwidth(cfg, CapacityStrategy::shared_fifo(), inner).capacity;
        row.weighted_fifo = min_bandwidth(cfg, CapacityStrategy::optimized(WithinClass::Fifo), inner).capacity;
        row.weighted_fq = min_bandwidth(cfg, CapacityStrategy::optimized(WithinClass::FairQueue), inner).capacity;
        row.static_split = min_bandwidth(cfg, CapacityStrategy::static_split(), inner).capacity;
        if (on_row) {
            std::lock_guard lock(mu);
            on_row(row);
        }
    });
    return rows;
}

namespace {

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) s += ';';
        s += fmt(items[i]);
    }
    return s;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string gbps_or_empty(const std::optional<BytesPerNs>& c) { return c ? num(to_gbps(*c)) : std::string{}; }

}  // namespace

void write_manifest_csv(std::ostream& out, const std::vector<ScenarioRow>& rows) {
    out << "scenario,seed,n_classes,cdfs,sigmas,rates_gbps,slo_thresholds,min_threshold,max_sigma,tight_bursty,"
           "fifo_gbps,weighted_fifo_gbps,weighted_fq_gbps,static_gbps\n";
    for (const auto& r : rows) {
        const auto& p = r.scenario.params;
        out << r.index << ',' << r.seed << ',' << p.size() << ','
            << join(p, [](const SampledClass& c) { return c.cdf; }) << ','
            << join(p, [](const SampledClass& c) { return num(c.sigma); }) << ','
            << join(p, [](const SampledClass& c) { return num(c.rate_gbps); }) << ','
            << join(p, [](const SampledClass& c) { return num(c.slo_threshold); }) << ','
            << num(r.scenario.min_threshold()) << ',' << num(r.scenario.max_sigma()) << ','
            << (r.scenario.tight_bursty() ? 1 : 0) << ','
            << gbps_or_empty(r.fifo) << ',' << gbps_or_empty(r.weighted_fifo) << ','
            << gbps_or_empty(r.weighted_fq) << ',' << gbps_or_empty(r.static_split) << '\n';
    }
}

}  // namespace slosim
