// Acceptance checks, one line per criterion.
//
//   slosim_acceptance [--only N ...] [--known-failures N ...] [--report FILE]
//
// Exit status is 0 when every failing criterion is listed as a known failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "helpers.hpp"
#include "slosim/optimizer.hpp"
#include "slosim/shaper.hpp"

using namespace slosim;
using testing_helpers::make_class;
using testing_helpers::trace;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string pct(double x) { return fmt::format("{:.2f}%", 100.0 * x); }

bool within_rel(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }

// 1. Byte conservation at every step on randomized configurations.
Outcome conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240611);
    const char* cdfs[] = {"google", "facebook", "alibaba", "websearch"};
    std::size_t violations = 0, steps = 0, unstable = 0;
    std::string first;
    for (int s = 0; s < 20; ++s) {
        SimConfig cfg;
        std::uniform_int_distribution<int> pick_d(0, 4), pick_c(0, 3), pick_n(1, 4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        switch (pick_d(rng)) {
            case 0: cfg.discipline = SharedFifo{}; break;
            case 1: cfg.discipline = StrictPriority{}; break;
            case 2: cfg.discipline = WeightedClasses{WithinClass::Fifo}; break;
            case 3: cfg.discipline = WeightedClasses{WithinClass::FairQueue}; break;
            default: cfg.discipline = ProcessorSharing{}; break;
        }
        cfg.cc = u(rng) < 0.5 ? CcParams::swp_d() : CcParams::swp_h();
        const int n = pick_n(rng);
        const double load = 0.3 + 0.6 * u(rng);
        std::vector<double> w;
        for (int k = 0; k < n; ++k) {
            auto c = make_class("c" + std::to_string(k), testing_helpers::bundled_cdf(cdfs[pick_c(rng)]),
                                load * cfg.network.capacity / n, 1.0 + u(rng));
            c.priority_rank = k;
            cfg.classes.push_back(std::move(c));
            w.push_back(0.05 + u(rng));
        }
        cfg.weights = WeightAllocation(w);
        cfg.num_flows = 10000;
        cfg.seed = rng();

        const auto arrivals = generate_workload(cfg);
        double generated = 0.0;
        for (const auto& a : arrivals) generated += a.size;
        Simulator sim(cfg, arrivals);
        sim.set_observer([&](const StepView& v) {
            ++steps;
            ByteCount q = 0;
            for (auto x : v.queued_per_class) q += x;
            if (v.bytes_sent != v.bytes_in_flight + v.bytes_queued + v.bytes_drained ||
                static_cast<double>(q) != v.bytes_queued) {
                if (!violations) first = fmt::format("scenario {} step {}", s, v.step);
                ++violations;
            }
        });
        const auto res = sim.run();
        if (!res.stable()) ++unstable;
        if (res.stable() && (res.counters.bytes_drained != generated || res.counters.bytes_offered != generated)) {
            if (!violations) first = fmt::format("scenario {} totals", s);
            ++violations;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {violations == 0 && secs < 120.0,
            fmt::format("{} steps checked, {} violations{}{}, {} runs hit the horizon, {:.1f} s of 120", steps,
                        violations, violations ? " first at " : "", first, unstable, secs)};
}

// 2. Weighted share floor, at the scheduler and end to end.
Outcome weighted_share() {
    const NetworkConfig net;
    const Nanos dt = net.step();
    const WeightAllocation w({0.4, 0.6});

    // Scheduler alone, both classes permanently backlogged.
    Bottleneck bn(WeightedClasses{WithinClass::Fifo}, 2, net.capacity);
    bn.enqueue(0, 0, 1'000'000'000);
    bn.enqueue(1, 1, 1'000'000'000);
    std::vector<DrainChunk> out;
    double d[2] = {0, 0};
    const int steps = 40000;
    for (int i = 0; i < steps; ++i) {
        out.clear();
        bn.drain(bn.service_allocation(w, dt), i * dt, dt, out);
        for (const auto& c : out) d[c.class_id] += static_cast<double>(c.bytes);
    }
    const double s0 = d[0] / (d[0] + d[1]), s1 = d[1] / (d[0] + d[1]);
    Bottleneck solo(WeightedClasses{WithinClass::Fifo}, 2, net.capacity);
    solo.enqueue(0, 0, 1'000'000'000);
    double d0 = 0.0;
    for (int i = 0; i < steps; ++i) {
        out.clear();
        solo.drain(solo.service_allocation(w, dt), i * dt, dt, out);
        for (const auto& c : out) d0 += static_cast<double>(c.bytes);
    }
    const double solo_frac = d0 / (net.capacity * steps * dt);

    // End to end: one long flow per class under rate control. Class 1's
    // flow ends near 3 ms; class 0's runs on.
    SimConfig cfg;
    cfg.discipline = WeightedClasses{WithinClass::Fifo};
    cfg.weights = w;
    cfg.classes = {make_class("a", ConstantSize{1.0}, gbps(1.0), 1.0), make_class("b", ConstantSize{1.0}, gbps(1.0), 1.0)};
    Simulator sim(cfg, trace({{0.0, 1e12}, {0.0, 22.5e6}}, {0, 1}));
    double e[2] = {0, 0}, after = 0.0;
    sim.set_observer([&](const StepView& v) {
        if (v.t >= 0.5e6 && v.t < 2.5e6)
            for (int k = 0; k < 2; ++k) e[k] += static_cast<double>(v.drained_this_step[k]);
        if (v.t >= 4e6 && v.t < 6e6) after += static_cast<double>(v.drained_this_step[0]);
    });
    sim.run_until(6e6);
    const double e0 = e[0] / (e[0] + e[1]), e1 = e[1] / (e[0] + e[1]);
    const double after_frac = after / (net.capacity * 2e6);

    const bool pass = within_rel(s0, 0.4, 0.01) && within_rel(s1, 0.6, 0.01) && solo_frac >= 0.99 &&
                      within_rel(e0, 0.4, 0.01) && within_rel(e1, 0.6, 0.01) && after_frac >= 0.99;
    return {pass, fmt::format("scheduler shares {:.5f}/{:.5f}, alone {}; end to end {:.5f}/{:.5f}, alone {}", s0, s1,
                              pct(solo_frac), e0, e1, pct(after_frac))};
}

struct FixedPoint {
    double rate;   // drain rate, B/ns
    double queue;  // mean bytes queued
};

FixedPoint lone_flow_steady_state(const CcParams& cc) {
    SimConfig cfg;
    cfg.cc = cc;
    cfg.classes = {make_class("a", ConstantSize{1.0}, gbps(1.0), 1.0)};
    Simulator sim(cfg, trace({{0.0, 1e13}}));
    double drained = 0.0, qsum = 0.0;
    std::size_t n = 0;
    sim.set_observer([&](const StepView& v) {
        if (v.t < 2e6) return;
        drained += static_cast<double>(v.drained_this_step[0]);
        qsum += v.bytes_queued;
        ++n;
    });
    sim.run_until(3e6);
    return {drained / (static_cast<double>(n) * cfg.network.step()), qsum / static_cast<double>(n)};
}

// 3. Congestion-control fixed points for one long flow.
Outcome cc_fixed_points() {
    const NetworkConfig net;
    const auto d = lone_flow_steady_state(CcParams::swp_d());
    const auto h = lone_flow_steady_state(CcParams::swp_h());
    const bool d_rate = within_rel(d.rate, net.capacity, 0.05);
    const bool d_queue = within_rel(d.queue, 100000.0, 0.10);
    const bool h_rate = within_rel(h.rate, 0.9 * net.capacity, 0.05);
    // "Q -> 0": less than one 1000-byte packet on average.
    const bool h_queue = h.queue < 1000.0;
    return {d_rate && d_queue && h_rate && h_queue,
            fmt::format("SWP-D rate {:.2f} Gbps [{}] Q {:.0f} B [{}]; SWP-H rate {:.2f} Gbps [{}] Q {:.0f} B [{}]",
                        to_gbps(d.rate), d_rate ? "ok" : "off", d.queue, d_queue ? "ok" : "off", to_gbps(h.rate),
                        h_rate ? "ok" : "off", h.queue, h_queue ? "ok" : "off")};
}

// 4. Smoothing step response reaches 1 - 1/e of the step after eta * tau.
Outcome ewma_step() {
    const NetworkConfig net;
    const Nanos dt = net.step(), tau = net.tau();
    std::vector<std::string> parts;
    bool pass = true;

    for (const auto& cc : {CcParams::swp_d(), CcParams::swp_h()}) {
        BytesPerNs rho = 0.0;
        const BytesPerNs target = net.capacity;
        Nanos t = 0.0;
        while (rho < (1.0 - std::exp(-1.0)) * target) {
            rho = smooth_rate(rho, target, dt, cc, tau);
            t += dt;
        }
        const double expect = cc.eta * tau;
        const bool ok = within_rel(t, expect, 0.05);
        pass = pass && ok;
        parts.push_back(fmt::format("rule eta={} {:.0f} ns vs {:.0f}", cc.eta, t, expect));
    }

    // In the engine: a lone flow leaves its first 2 tau at C, then the rule
    // asks for U * C with U = 0.5 once the controlled count reaches it.
    for (const auto& base : {CcParams::swp_d(), CcParams::swp_h()}) {
        SimConfig cfg;
        cfg.cc = base;
        cfg.cc.target_utilization = 0.5;
        cfg.cc.beta = 0.0;
        cfg.cc.queue_threshold = 1e9;
        cfg.classes = {make_class("a", ConstantSize{1.0}, gbps(1.0), 1.0)};
        Simulator sim(cfg, trace({{0.0, 1e13}}));
        const BytesPerNs hi = cfg.cc.r_init, lo = 0.5 * net.capacity;
        const BytesPerNs cross = hi - (1.0 - std::exp(-1.0)) * (hi - lo);
        std::optional<Nanos> start, hit;
        BytesPerNs prev = hi;
        while (sim.now() < 1e6 && !hit) {
            sim.step();
            const auto v = sim.flow(0);
            if (!v || !v->controlled) continue;
            if (!start && v->rate < prev) start = sim.now() - 2 * dt;  // last step at the old rate ended here
            if (start && v->rate <= cross) hit = sim.now() - dt;
            prev = v->rate;
        }
        const double expect = cfg.cc.eta * tau;
        const bool ok = start && hit && within_rel(*hit - *start, expect, 0.05);
        pass = pass && ok;
        parts.push_back(hit && start ? fmt::format("engine eta={} {:.0f} ns vs {:.0f}", cfg.cc.eta, *hit - *start, expect)
                                     : fmt::format("engine eta={} never crossed", cfg.cc.eta));
    }
    std::string detail;
    for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
    return {pass, detail};
}

// 5. Every flow's first 2 tau carries min(r_init * 2 tau, S).
Outcome uncontrolled_budget() {
    std::size_t checked = 0, bad = 0;
    double worst = 0.0;
    std::vector<CcParams> variants{CcParams::swp_d(), CcParams::swp_h(), CcParams::swp_d()};
    variants[2].r_init = gbps(40.0);
    std::uint64_t seed = 50;
    for (const auto& cc : variants) {
        SimConfig cfg;
        cfg.cc = cc;
        cfg.discipline = WeightedClasses{WithinClass::Fifo};
        cfg.classes = {make_class("web", testing_helpers::bundled_cdf("websearch"), gbps(30.0), 1.5),
                       make_class("rpc", testing_helpers::bundled_cdf("google"), gbps(20.0), 2.0)};
        cfg.num_flows = 10000;
        cfg.seed = seed++;
        const auto arrivals = generate_workload(cfg);
        Simulator sim(cfg, arrivals);
        while (sim.step()) {
        }
        const double window = 2.0 * cfg.network.tau();
        const double quantum = cc.r_init * cfg.network.step();
        for (const auto& a : arrivals) {
            const auto v = sim.flow(a.flow_id);
            ++checked;
            if (!v) {
                ++bad;
                continue;
            }
            const double err = std::abs(static_cast<double>(v->sent_uncontrolled) - std::min(cc.r_init * window, a.size));
            worst = std::max(worst, err / quantum);
            if (err > quantum) ++bad;
        }
    }
    return {bad == 0, fmt::format("{} flows over 3 configurations, {} outside one step quantum, worst {:.3f} quanta",
                                  checked, bad, worst)};
}

// Straight transcription of the weight loop, for comparison.
struct RefOutcome {
    std::vector<std::vector<double>> weights_seen;
    bool success = false;
    std::string why;
};

RefOutcome reference_loop(std::vector<double> weights, const std::vector<std::vector<double>>& script,
                          std::size_t max_iter) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    for (double& w : weights) w /= sum;
    RefOutcome out;
    for (std::size_t it = 0; it < max_iter; ++it) {
        out.weights_seen.push_back(weights);
        const auto& raw = script[std::min(it, script.size() - 1)];
        std::vector<std::pair<std::size_t, double>> losses;
        for (std::size_t k = 0; k < raw.size(); ++k) losses.emplace_back(k, raw[k]);
        std::sort(losses.begin(), losses.end(), [](auto a, auto b) { return a.second < b.second; });
        if (std::all_of(losses.begin(), losses.end(), [](auto p) { return p.second < 0.0; })) {
            out.success = true;
            out.why = "met";
            return out;
        }
        if (losses[0].second > 0.0) {
            out.why = "min loss positive";
            return out;
        }
        std::vector<std::pair<std::size_t, double>> rev(losses.rbegin(), losses.rend());
        for (std::size_t i = 0; i < losses.size(); ++i) {
            const auto [k, lk] = losses[i];
            const auto [q, lq] = rev[i];
            if (lk >= 0.0 || lq <= 0.0) break;
            const double delta = std::abs(lk / 2.0) * weights[k];
            weights[k] -= delta;
            weights[q] += delta;
        }
    }
    out.why = "timeout";
    return out;
}

// 6. Weight loop against the reference on scripted losses.
Outcome weight_loop_conformance() {
    struct Case {
        const char* name;
        std::vector<std::vector<double>> script;
        std::size_t max_iter;
        std::string reason;
        bool success;
    };
    const std::vector<double> start{1.0, 1.5, 2.5};
    const std::vector<Case> cases{
        {"converges", {{-0.2, -0.4, 0.3}, {-0.1, -0.3, 0.12}, {-0.05, -0.25, 0.02}, {-0.04, -0.2, -0.01}}, 20, "met", true},
        {"all violated", {{-0.3, 0.2, 0.6}, {0.1, 0.2, 0.4}}, 20, "min loss positive", false},
        {"timeout", {{-0.5, 0.35, -0.1}, {-0.45, 0.3, -0.15}, {-0.4, 0.25, -0.2}}, 6, "timeout", false},
    };
    double max_dev = 0.0, max_norm = 0.0;
    std::vector<std::string> bad;
    for (const auto& c : cases) {
        std::size_t calls = 0;
        const auto got = weight_loop(
            WeightAllocation(start),
            [&](const WeightAllocation&) { return c.script[std::min(calls++, c.script.size() - 1)]; }, c.max_iter);
        const auto ref = reference_loop(start, c.script, c.max_iter);
        if (got.reason != c.reason || ref.why != c.reason || got.success != c.success || ref.success != c.success)
            bad.push_back(fmt::format("{}: branch {} (reference {})", c.name, got.reason, ref.why));
        if (got.trace.size() != ref.weights_seen.size()) {
            bad.push_back(fmt::format("{}: {} iterations vs {}", c.name, got.trace.size(), ref.weights_seen.size()));
            continue;
        }
        for (std::size_t i = 0; i < got.trace.size(); ++i) {
            max_norm = std::max(max_norm, std::abs(got.trace[i].weights.sum() - 1.0));
            for (std::size_t k = 0; k < 3; ++k)
                max_dev = std::max(max_dev, std::abs(got.trace[i].weights[k] - ref.weights_seen[i][k]));
        }
    }
    // Hand-computed first transfer of the first case: start weights
    // 0.2/0.3/0.5, losses -0.2/-0.4/0.3. Class 1 (loss -0.4) gives
    // 0.2 * 0.3 = 0.06 to class 2.
    {
        std::size_t calls = 0;
        const auto got = weight_loop(
            WeightAllocation(start),
            [&](const WeightAllocation&) { return cases[0].script[std::min(calls++, cases[0].script.size() - 1)]; }, 2);
        const std::vector<double> expect{0.2, 0.24, 0.56};
        for (std::size_t k = 0; k < 3; ++k)
            max_dev = std::max(max_dev, std::abs(got.trace.at(1).weights[k] - expect[k]));
    }
    const bool pass = bad.empty() && max_dev <= 1e-12 && max_norm <= 1e-9;
    std::string detail = fmt::format("max deviation from reference {:.1e}, max |sum - 1| {:.1e}", max_dev, max_norm);
    for (const auto& b : bad) detail += "; " + b;
    return {pass, detail};
}

// 7. Foreground/background isolation at one switch.
struct IsolationRow {
    double fg = 0.0, bg = 0.0;
    bool stable = true;
};

SimConfig isolation_config(double bg_load, const QueueDiscipline& d, double fg_weight) {
    SimConfig c;
    c.cc = CcParams::swp_h();
    c.discipline = d;
    c.weights = WeightAllocation({fg_weight, 1.0 - fg_weight});
    const FlowSizeDistribution sizes = testing_helpers::bundled_cdf("google");
    const Bytes bdp = c.network.capacity * c.network.rtt;
    auto mk = [&](const char* name, double load, int rank) {
        auto t = make_class(name, sizes, load * c.network.capacity, 2.0);
        t.slis = {SliDef{"p99", Percentile{0.99}, SizeRange{0.0, bdp}}};
        t.slo = parse_slo("p99 < 2.5");
        t.priority_rank = rank;
        return t;
    };
    c.classes = {mk("fg", 0.1, 0), mk("bg", bg_load, 1)};
    // Same foreground sample size at every background load.
    c.num_flows = static_cast<std::size_t>(std::llround(20000.0 * (0.1 + bg_load) / 0.1));
    c.horizon_slack = 1e7;
    return c;
}

IsolationRow isolation_point(double bg_load, const QueueDiscipline& d, double fg_weight = 0.5) {
    IsolationRow row;
    const int reps = 3;
    for (int r = 0; r < reps; ++r) {
        auto c = isolation_config(bg_load, d, fg_weight);
        c.seed = replication_seed(7, r);
        const auto res = run_simulation(c);
        const auto rep = evaluate(c, res);
        row.stable = row.stable && res.stable();
        row.fg += rep[0].slis.at("p99").value_or(INFINITY) / reps;
        row.bg += rep[1].slis.at("p99").value_or(INFINITY) / reps;
    }
    return row;
}

Outcome isolation_sweep() {
    const auto t0 = std::chrono::steady_clock::now();
    const double loads[] = {0.2, 0.5, 0.8};
    std::map<double, IsolationRow> prio, fifo;
    for (double b : loads) {
        prio[b] = isolation_point(b, StrictPriority{});
        fifo[b] = isolation_point(b, SharedFifo{});
    }
    // Smallest foreground weight meeting the SLO at 80% background, found by
    // bisection between an equal split and nearly all of the link.
    const QueueDiscipline wf = WeightedClasses{WithinClass::Fifo};
    double lo = 0.5, hi = 0.999;
    std::optional<double> tuned;
    IsolationRow tuned_row = isolation_point(0.8, wf, hi);
    if (tuned_row.fg < 2.5) {
        tuned = hi;
        while (hi - lo > 0.005) {
            const double mid = 0.5 * (lo + hi);
            const auto r = isolation_point(0.8, wf, mid);
            if (r.fg < 2.5) {
                hi = mid;
                tuned = mid;
                tuned_row = r;
            } else {
                lo = mid;
            }
        }
    }
    std::map<double, IsolationRow> weighted;
    for (double b : loads) weighted[b] = b == 0.8 ? tuned_row : isolation_point(b, wf, tuned.value_or(0.999));

    const bool a = std::all_of(std::begin(loads), std::end(loads), [&](double b) { return prio[b].fg < 2.5; });
    const bool b = fifo[0.8].fg >= 2.5;
    const bool c = tuned && std::all_of(std::begin(loads), std::end(loads), [&](double x) { return weighted[x].fg < 2.5; }) &&
                   weighted[0.8].bg * 5.0 <= prio[0.8].bg;
    std::string detail = fmt::format("(a) {} (b) {} (c) {};", a ? "ok" : "no", b ? "ok" : "no", c ? "ok" : "no");
    for (double x : loads)
        detail += fmt::format(" bg={:.1f} prio {:.2f}/{:.2f} fifo {:.2f}/{:.2f} wtd {:.2f}/{:.2f};", x, prio[x].fg,
                              prio[x].bg, fifo[x].fg, fifo[x].bg, weighted[x].fg, weighted[x].bg);
    detail += tuned ? fmt::format(" fg weight {:.4f}", *tuned) : std::string(" no fg weight up to 0.999 meets the SLO");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail += fmt::format("; {:.0f} s of 900", secs);
    return {a && b && c && secs < 900.0, detail};
}

// 8 and 9 share one batch of scenarios.
std::optional<std::vector<ScenarioRow>> g_rows;
double g_rows_seconds = 0.0;

const std::vector<ScenarioRow>& scenario_rows() {
    if (!g_rows) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto doc = load_spec(bundled_data_dir() / "specs" / "scenarios.json");
        OptimizerConfig opt = doc.optimizer;
        g_rows = run_scenarios(doc.sim, SampleSpace::standard(), 20, 3, opt.seed, opt, [](const ScenarioRow& r) {
            std::cerr << fmt::format("  scenario {} done\n", r.index);
        });
        std::ofstream csv("acceptance_scenarios.csv");
        write_manifest_csv(csv, *g_rows);
        g_rows_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *g_rows;
}

double cap_or_inf(const std::optional<BytesPerNs>& c) { return c ? *c : INFINITY; }

double median(std::vector<double> xs) {
    if (xs.empty()) return NAN;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Outcome scenarios_inflation() {
    const auto& rows = scenario_rows();
    std::vector<double> all, tight;
    std::size_t fq_ok = 0, skipped = 0;
    for (const auto& r : rows) {
        const double f = cap_or_inf(r.fifo), w = cap_or_inf(r.weighted_fifo);
        if (cap_or_inf(r.weighted_fq) <= w) ++fq_ok;
        if (std::isinf(f) && std::isinf(w)) {
            ++skipped;
            continue;
        }
        const double infl = f / w;
        all.push_back(infl);
        if (r.scenario.tight_bursty()) tight.push_back(infl);
    }
    const double m_all = median(all), m_tight = median(tight);
    const double fq_frac = static_cast<double>(fq_ok) / static_cast<double>(rows.size());
    const bool pass =
        m_all > 1.15 && !tight.empty() && m_tight > 1.3 && fq_frac >= 0.8 && g_rows_seconds < 4 * 3600.0;
    return {pass, fmt::format("median inflation {:.3f} over {} scenarios; tight-bursty median {:.3f} over {}; "
                              "weighted-fq <= weighted-fifo in {}; {} skipped with no feasible capacity; "
                              "batch {:.0f} s of 14400",
                              m_all, all.size(), m_tight, tight.size(), pct(fq_frac), skipped, g_rows_seconds)};
}

Outcome scenarios_static() {
    const auto& rows = scenario_rows();
    std::size_t ok = 0;
    for (const auto& r : rows)
        if (cap_or_inf(r.static_split) >= cap_or_inf(r.weighted_fifo)) ++ok;
    const double frac = static_cast<double>(ok) / static_cast<double>(rows.size());
    return {frac >= 0.9, fmt::format("static >= weighted-fifo in {} of {} ({})", ok, rows.size(), pct(frac))};
}

// 10. Leaky bucket: burstiness inflates host delay; bucket size trades
// host delay for downstream queueing.
Outcome leaky_bucket() {
    LeakyBucketParams p;
    p.rate = gbps(10.0);
    p.bucket = kilobytes(100.0);
    p.sizes = ExponentialSize{10000.0};
    const std::size_t count = 200000;
    const double load = 0.95 * p.rate;

    p.gaps = LogNormalGap{mu_for_load(load, 10000.0, 1.5), 1.5};
    Rng r1(1);
    const auto bursty = simulate_shaper(p, count, r1);
    p.gaps = ExponentialGap{10000.0 / load};
    Rng r2(1);
    const auto poisson = simulate_shaper(p, count, r2);
    const double hb = nearest_rank(bursty.host_delays, 0.99), hp = nearest_rank(poisson.host_delays, 0.99);

    p.gaps = LogNormalGap{mu_for_load(load, 10000.0, 1.5), 1.5};
    const std::vector<Bytes> buckets{25e3, 50e3, 100e3, 200e3, 400e3, 800e3};
    bool mono = true;
    std::string sweep;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto rows = shaper_sweep(p, buckets, {0.99}, count, seed);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (!(rows[i].host_delay < rows[i - 1].host_delay) || !(rows[i].downstream >= rows[i - 1].downstream)) {
                mono = false;
                sweep += fmt::format(" seed {} {:.0f}KB->{:.0f}KB host {:.0f}->{:.0f} ns downstream {:.0f}->{:.0f} B;",
                                     seed, rows[i - 1].bucket / 1e3, rows[i].bucket / 1e3, rows[i - 1].host_delay,
                                     rows[i].host_delay, rows[i - 1].downstream, rows[i].downstream);
            }
        }
    }
    const bool ratio_ok = bursty.stable && poisson.stable && hb >= 5.0 * hp;
    return {ratio_ok && mono, fmt::format("P99 host delay lognormal {:.1f} us vs Poisson {:.1f} us (x{:.1f}); sweep {}{}",
                                          hb / 1e3, hp / 1e3, hb / hp, mono ? "monotone on seeds 1-3" : "not monotone:",
                                          sweep)};
}

// 11. Wall-clock for 50k Google flows at 30% load.
Outcome performance() {
    SimConfig cfg;
    cfg.classes = {make_class("g", testing_helpers::bundled_cdf("google"), gbps(30.0), 2.0)};
    cfg.num_flows = 50000;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run_simulation(cfg);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {res.stable() && s <= 300.0,
            fmt::format("{:.2f} s wall clock, {} steps, {}", s, res.counters.steps, to_string(res.termination))};
}

// 12. Same spec and seed, byte-identical CSV from two CLI runs.
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / fmt::format("slosim_accept_{}", ::getpid());
    fs::create_directories(dir);
    const fs::path specs = bundled_data_dir() / "specs";
    struct Job {
        std::string args;
        std::vector<std::string> outputs;
    };
    const std::vector<Job> jobs{
        {fmt::format("run \"{}\" --seed 42 --flows 20000", (specs / "weighted.json").string()), {"run.csv"}},
        {fmt::format("shaper \"{}\" --seed 42 --flows 50000", (specs / "shaper.json").string()),
         {"run.csv", "run.downstream.csv"}},
    };
    bool pass = true;
    std::string detail;
    for (const auto& job : jobs) {
        std::vector<std::string> contents[2];
        for (int i = 0; i < 2; ++i) {
            const fs::path out = dir / fmt::format("{}", i) / "run.csv";
            fs::create_directories(out.parent_path());
            const std::string cmd =
                fmt::format("\"{}\" {} --out \"{}\" > /dev/null", SLOSIM_BINARY, job.args, out.string());
            const int rc = std::system(cmd.c_str());
            if (rc == -1 || WEXITSTATUS(rc) > 1) {
                pass = false;
                detail += fmt::format(" '{}' exited {};", job.args.substr(0, job.args.find(' ')), WEXITSTATUS(rc));
            }
            for (const auto& name : job.outputs) contents[i].push_back(slurp(out.parent_path() / name));
        }
        for (std::size_t k = 0; k < job.outputs.size(); ++k) {
            const bool same = !contents[0][k].empty() && contents[0][k] == contents[1][k];
            pass = pass && same;
            detail += fmt::format(" {} {} {} bytes {};", job.args.substr(0, job.args.find(' ')), job.outputs[k],
                                  contents[0][k].size(), same ? "identical" : "DIFFER");
        }
    }
    fs::remove_all(dir);
    return {pass, detail.empty() ? detail : detail.substr(1)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slosim acceptance checks"};
    std::vector<int> only, known;
    std::string report;
    app.add_option("--only", only, "criteria to run (default: all)");
    app.add_option("--known-failures", known, "criteria expected to fail");
    app.add_option("--report", report, "also write the result lines here");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> criteria{
        conservation, weighted_share, cc_fixed_points, ewma_step,           uncontrolled_budget, weight_loop_conformance,
        isolation_sweep, scenarios_inflation, scenarios_static, leaky_bucket, performance,         determinism};

    const std::set<int> expected_fail(known.begin(), known.end());
    std::vector<std::string> lines;
    std::vector<int> unexpected_fail, unexpected_pass;
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
        if (!only.empty() && std::find(only.begin(), only.end(), i) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool known_fail = expected_fail.count(i) > 0;
        const std::string line = fmt::format("criterion {}: {}{} ({:.1f} s) {}", i, o.pass ? "PASS" : "FAIL",
                                             !o.pass && known_fail ? " [known]" : "", s, o.detail);
        std::cout << line << std::endl;
        lines.push_back(line);
        if (!o.pass && !known_fail) unexpected_fail.push_back(i);
        if (o.pass && known_fail) unexpected_pass.push_back(i);
    }
    for (int i : unexpected_pass) std::cout << fmt::format("note: criterion {} listed as known failure but passed\n", i);
    if (!report.empty()) {
        std::ofstream out(report);
        for (const auto& l : lines) out << l << '\n';
    }
    return unexpected_fail.empty() ? 0 : 1;
}
