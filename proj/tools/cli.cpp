#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slosim/engine.hpp"
#include "slosim/error.hpp"
#include "slosim/optimizer.hpp"
#include "slosim/parallel.hpp"
#include "slosim/shaper.hpp"
#include "slosim/spec_io.hpp"

namespace slosim::cli {

namespace {

using json = nlohmann::json;

struct Flags {
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> flows;
    std::optional<double> dt_ns;
    std::optional<std::size_t> replications;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<std::size_t> max_iters;
    std::optional<double> timeout_s;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> count;
    std::optional<std::size_t> n_classes;
};

std::string fmt(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string opt_fmt(const std::optional<double>& v, int precision = 4) { return v ? fmt(*v, precision) : "n/a"; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("output.path: cannot write " + path);
    return f;
}

// Flags win over the spec file. --replications feeds the simulator for `run`
// and the optimizer everywhere else.
void apply(SpecDocument& doc, const Flags& f, const std::string& command) {
    if (f.seed) {
        doc.sim.seed = *f.seed;
        doc.optimizer.seed = *f.seed;
    }
    if (f.flows) {
        doc.sim.num_flows = *f.flows;
        if (doc.shaper) doc.shaper->count = *f.flows;
    }
    if (f.dt_ns) doc.sim.network.dt = *f.dt_ns;
    if (f.replications) {
        if (command == "run")
            doc.sim.replications = *f.replications;
        else
            doc.optimizer.replications = *f.replications;
    }
    if (f.out) doc.output.path = *f.out;
    if (f.format) doc.output.format = *f.format;
    if (f.max_iters) doc.optimizer.max_iterations = *f.max_iters;
    if (f.timeout_s) doc.sim.timeout_s = *f.timeout_s;
    if (f.workers) doc.optimizer.workers = *f.workers;
    if (f.count) doc.scenarios.count = *f.count;
    if (f.n_classes) doc.scenarios.n_classes = *f.n_classes;

    std::vector<std::string> problems;
    auto collect = [&](auto&& check) {
        try {
            check();
        } catch (const ConfigError& e) {
            problems.insert(problems.end(), e.problems().begin(), e.problems().end());
        }
    };
    if (doc.has_classes) collect([&] { doc.sim.validate(); });
    collect([&] { doc.optimizer.validate(); });
    if (doc.scenarios.n_classes != 3 && doc.scenarios.n_classes != 5)
        problems.emplace_back("scenarios.n_classes: must be 3 or 5");
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

void require_classes(const SpecDocument& doc) {
    if (!doc.has_classes || doc.sim.classes.empty()) throw ConfigError("classes: this command needs traffic classes");
}

// ---- run ----

struct ClassSummary {
    std::string name;
    std::map<std::string, Interval> slis;  // over replications
    std::optional<Verdict> verdict;
    std::optional<BindingTerm> binding;
    std::size_t flows = 0;
    std::size_t censored = 0;
};

std::vector<ClassSummary> summarize(const SimConfig& cfg, const std::vector<std::vector<ClassReport>>& reps) {
    std::vector<ClassSummary> out;
    for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
        const auto& spec = cfg.classes[k];
        ClassSummary s;
        s.name = spec.name;
        SliValues means;
        for (const auto& def : spec.slis) {
            std::vector<double> xs;
            bool absent = false;
            for (const auto& rep : reps) {
                const auto& v = rep[k].slis.at(def.name);
                if (v)
                    xs.push_back(*v);
                else
                    absent = true;
            }
            if (absent || xs.empty()) {
                means[def.name] = std::nullopt;
            } else {
                s.slis[def.name] = mean_ci95(xs);
                means[def.name] = s.slis[def.name].mean;
            }
        }
        for (const auto& rep : reps) {
            s.flows += rep[k].flows;
            s.censored += rep[k].censored;
        }
        if (spec.slo) {
            s.verdict = eval_slo(*spec.slo, means);
            if (upper_bounds_only(*spec.slo)) s.binding = class_loss(*spec.slo, means);
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct BinRow {
    Bytes max_size;
    std::size_t flows;
    double p50, p99;
};

std::vector<BinRow> bin_table(const SimConfig& cfg, const SimResult& result, std::size_t k) {
    std::vector<FlowRecord> done;
    for (const auto& r : post_warmup(result.per_class[k], cfg.warmup_fraction))
        if (r.completed) done.push_back(r);
    std::vector<BinRow> rows;
    for (const auto& bin : bin_by_size(done, 10))
        rows.push_back({bin.max_size, bin.records.size(), *slowdown_percentile(bin.records, 0.5),
                        *slowdown_percentile(bin.records, 0.99)});
    return rows;
}

int command_run(const SpecDocument& doc, std::ostream& out, std::ostream& err) {
    require_classes(doc);
    const SimConfig& cfg = doc.sim;
    const std::size_t reps = std::max<std::size_t>(1, cfg.replications);
    std::vector<std::vector<ClassReport>> reports(reps);
    std::vector<Termination> ends(reps);
    std::optional<SimResult> first;
    parallel_for(reps, resolve_workers(doc.optimizer.workers), [&](std::size_t r) {
        SimConfig c = cfg;
        c.seed = replication_seed(cfg.seed, r);
        SimResult res = run_simulation(c);
        reports[r] = evaluate(c, res);
        ends[r] = res.termination;
        if (r == 0) first = std::move(res);
    });

    const auto bad = std::find_if(ends.begin(), ends.end(), [](Termination t) { return t != Termination::Completed; });
    const bool stable = bad == ends.end();
    const auto summary = summarize(cfg, reports);
    bool met = true;
    for (const auto& s : summary)
        if (s.verdict && *s.verdict != Verdict::Met) met = false;

    if (!doc.output.path.empty()) {
        auto f = open_out(doc.output.path);
        write_records_csv(f, cfg, *first);
    }

    if (doc.output.format == "csv") {
        write_records_csv(out, cfg, *first);
    } else if (doc.output.format == "json") {
        json j;
        j["stable"] = stable;
        j["termination"] = std::string(to_string(stable ? Termination::Completed : *bad));
        j["replications"] = reps;
        j["classes"] = json::array();
        for (std::size_t k = 0; k < summary.size(); ++k) {
            const auto& s = summary[k];
            json c;
            c["name"] = s.name;
            c["flows"] = s.flows;
            c["censored"] = s.censored;
            c["verdict"] = s.verdict ? json(std::string(to_string(*s.verdict))) : json(nullptr);
            for (const auto& [name, iv] : s.slis) c["slis"][name] = {{"mean", iv.mean}, {"ci95", iv.half_width}};
            if (s.binding)
                c["binding"] = {{"sli", s.binding->ident},
                                {"value", opt_json(s.binding->value)},
                                {"threshold", s.binding->threshold},
                                {"loss", s.binding->loss}};
            json bins = json::array();
            for (const auto& b : bin_table(cfg, *first, k))
                bins.push_back({{"max_size", b.max_size}, {"flows", b.flows}, {"p50", b.p50}, {"p99", b.p99}});
            c["bins"] = bins;
            j["classes"].push_back(c);
        }
        out << j.dump(2) << '\n';
    } else {
        out << "run: " << cfg.num_flows << " flows, " << reps << " replication(s), " << to_string(cfg.discipline)
            << ", seed " << cfg.seed << '\n';
        if (!stable)
            out << "UNSTABLE: " << to_string(*bad) << " guard fired; censored flows carry lower-bound slowdowns\n";
        for (std::size_t k = 0; k < summary.size(); ++k) {
            const auto& s = summary[k];
            out << "\nclass " << s.name << ": " << (s.verdict ? std::string(to_string(*s.verdict)) : "no slo")
                << " (" << s.flows << " flows";
            if (s.censored) out << ", " << s.censored << " censored";
            out << ")\n";
            for (const auto& def : cfg.classes[k].slis) {
                auto it = s.slis.find(def.name);
                out << "  " << def.name << " = ";
                if (it == s.slis.end())
                    out << "absent";
                else if (reps > 1)
                    out << fmt(it->second.mean) << " +/- " << fmt(it->second.half_width);
                else
                    out << fmt(it->second.mean);
                out << '\n';
            }
            if (cfg.classes[k].slo) out << "  slo: " << to_string(*cfg.classes[k].slo) << '\n';
            if (s.binding)
                out << "  binding: " << s.binding->ident << " = " << opt_fmt(s.binding->value) << " vs "
                    << fmt(s.binding->threshold) << " (loss " << fmt(s.binding->loss) << ")\n";
            out << "  size_bin_max      flows     p50      p99\n";
            for (const auto& b : bin_table(cfg, *first, k)) {
                char line[96];
                std::snprintf(line, sizeof line, "  %12.0f %10zu %7.3f %8.3f\n", b.max_size, b.flows, b.p50, b.p99);
                out << line;
            }
        }
    }
    if (!stable) {
        err << "simulation unstable: " << to_string(*bad) << '\n';
        return kUnstable;
    }
    return met ? kOk : kNotMet;
}

// ---- optimize ----

int command_optimize(const SpecDocument& doc, std::ostream& out) {
    require_classes(doc);
    const auto outcome = optimize_weights(doc.sim, doc.optimizer);
    const auto& classes = doc.sim.classes;

    if (!doc.output.path.empty()) {
        auto f = open_out(doc.output.path);
        f << "iteration,class,weight,loss\n";
        for (std::size_t i = 0; i < outcome.trace.size(); ++i)
            for (std::size_t k = 0; k < classes.size(); ++k)
                f << i << ',' << classes[k].name << ',' << outcome.trace[i].weights[k] << ','
                  << outcome.trace[i].losses[k] << '\n';
    }

    if (doc.output.format == "json") {
        json j;
        j["success"] = outcome.success;
        j["reason"] = outcome.reason;
        for (std::size_t k = 0; k < classes.size(); ++k) {
            j["weights"][classes[k].name] = outcome.weights.empty() ? json(nullptr) : json(outcome.weights[k]);
            j["baselines"][classes[k].name] =
                k < outcome.baselines.size() ? opt_json(outcome.baselines[k]) : json(nullptr);
        }
        j["trace"] = json::array();
        for (const auto& it : outcome.trace) j["trace"].push_back({{"weights", it.weights.values()}, {"losses", it.losses}});
        out << j.dump(2) << '\n';
    } else {
        out << "optimize: " << (outcome.success ? "success" : "failed") << " (" << outcome.reason << ")\n";
        out << "baselines:";
        for (std::size_t k = 0; k < outcome.baselines.size(); ++k)
            out << ' ' << classes[k].name << '=' << opt_fmt(outcome.baselines[k], 3);
        out << '\n';
        for (std::size_t i = 0; i < outcome.trace.size(); ++i) {
            out << "iter " << i << ':';
            for (std::size_t k = 0; k < classes.size(); ++k)
                out << ' ' << classes[k].name << " w=" << fmt(outcome.trace[i].weights[k], 3)
                    << " l=" << fmt(outcome.trace[i].losses[k], 3);
            out << '\n';
        }
        if (!outcome.weights.empty()) {
            out << "weights:";
            for (std::size_t k = 0; k < classes.size(); ++k)
                out << ' ' << classes[k].name << '=' << fmt(outcome.weights[k], 4);
            out << '\n';
        }
    }
    return outcome.success ? kOk : kNotMet;
}

// ---- minbw ----

int command_minbw(const SpecDocument& doc, std::ostream& out) {
    require_classes(doc);
    const std::vector<CapacityStrategy> strategies{CapacityStrategy::shared_fifo(),
                                                   CapacityStrategy::optimized(WithinClass::Fifo),
                                                   CapacityStrategy::optimized(WithinClass::FairQueue),
                                                   CapacityStrategy::static_split()};
    std::vector<CapacityResult> results(strategies.size());
    parallel_for(strategies.size(), resolve_workers(doc.optimizer.workers), [&](std::size_t i) {
        OptimizerConfig inner = doc.optimizer;
        inner.workers = 1;
        results[i] = min_bandwidth(doc.sim, strategies[i], inner);
    });
    const auto& fifo = results[0].capacity;
    auto infl = [&](const CapacityResult& r) -> std::optional<double> {
        if (!fifo || !r.capacity) return std::nullopt;
        return inflation(*fifo, *r.capacity);
    };

    if (!doc.output.path.empty()) {
        auto f = open_out(doc.output.path);
        f << "strategy,capacity_gbps,fifo_inflation,probes\n";
        for (std::size_t i = 0; i < strategies.size(); ++i) {
            f << to_string(strategies[i]) << ',';
            if (results[i].capacity) f << to_gbps(*results[i].capacity);
            f << ',';
            if (auto x = infl(results[i])) f << *x;
            f << ',' << results[i].probes << '\n';
        }
    }

    bool all_found = true;
    if (doc.output.format == "json") {
        json j = json::array();
        for (std::size_t i = 0; i < strategies.size(); ++i) {
            const auto& c = results[i].capacity;
            j.push_back({{"strategy", to_string(strategies[i])},
                         {"capacity_gbps", c ? json(to_gbps(*c)) : json(nullptr)},
                         {"fifo_inflation", opt_json(infl(results[i]))},
                         {"probes", results[i].probes}});
        }
        out << j.dump(2) << '\n';
    } else {
        out << "strategy          capacity_gbps  fifo_inflation  probes\n";
        for (std::size_t i = 0; i < strategies.size(); ++i) {
            const auto& c = results[i].capacity;
            char line[128];
            std::snprintf(line, sizeof line, "%-17s %13s %15s %7zu\n", to_string(strategies[i]).c_str(),
                          c ? fmt(to_gbps(*c), 2).c_str() : "not found", opt_fmt(infl(results[i]), 3).c_str(),
                          results[i].probes);
            out << line;
        }
    }
    for (const auto& r : results) all_found = all_found && r.capacity.has_value();
    return all_found ? kOk : kNotMet;
}

// ---- scenarios ----

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

int command_scenarios(const SpecDocument& doc, std::ostream& out, std::ostream& err) {
    const auto rows = run_scenarios(doc.sim, SampleSpace::standard(), doc.scenarios.count, doc.scenarios.n_classes,
                                    doc.optimizer.seed, doc.optimizer, [&](const ScenarioRow& r) {
                                        err << "scenario " << r.index << " done\n";
                                    });
    if (!doc.output.path.empty()) {
        auto f = open_out(doc.output.path);
        write_manifest_csv(f, rows);
    }
    if (doc.output.format == "csv") {
        write_manifest_csv(out, rows);
        return kOk;
    }
    std::vector<double> wfifo, wfq;
    std::size_t fq_le = 0, static_ge = 0, both = 0;
    for (const auto& r : rows) {
        if (r.fifo && r.weighted_fifo) wfifo.push_back(inflation(*r.fifo, *r.weighted_fifo));
        if (r.fifo && r.weighted_fq) wfq.push_back(inflation(*r.fifo, *r.weighted_fq));
        if (r.weighted_fifo && r.weighted_fq && r.static_split) {
            ++both;
            fq_le += *r.weighted_fq <= *r.weighted_fifo;
            static_ge += *r.static_split >= *r.weighted_fifo;
        }
    }
    if (doc.output.format == "json") {
        json j;
        j["scenarios"] = rows.size();
        j["median_inflation_weighted_fifo"] = wfifo.empty() ? json(nullptr) : json(median(wfifo));
        j["median_inflation_weighted_fq"] = wfq.empty() ? json(nullptr) : json(median(wfq));
        j["fq_not_worse"] = fq_le;
        j["static_not_better"] = static_ge;
        j["comparable"] = both;
        out << j.dump(2) << '\n';
    } else {
        out << rows.size() << " scenarios, " << doc.scenarios.n_classes << " classes each\n";
        if (!wfifo.empty()) out << "median fifo inflation over weighted-fifo: " << fmt(median(wfifo), 3) << '\n';
        if (!wfq.empty()) out << "median fifo inflation over weighted-fq:   " << fmt(median(wfq), 3) << '\n';
        out << "weighted-fq <= weighted-fifo: " << fq_le << '/' << both << '\n';
        out << "static >= weighted-fifo:      " << static_ge << '/' << both << '\n';
    }
    return kOk;
}

// ---- shaper ----

int command_shaper(const SpecDocument& doc, std::ostream& out, std::ostream& err) {
    if (!doc.shaper) throw ConfigError("shaper: this command needs a shaper section");
    const ShaperSpec& s = *doc.shaper;
    if (offered_rate(s.params.sizes, s.params.gaps) >= s.params.rate) {
        err << "shaper overloaded: offered load is not below the token rate\n";
        return kUnstable;
    }
    const auto rows = shaper_sweep(s.params, s.buckets, s.percentiles, s.count, doc.sim.seed);

    if (!doc.output.path.empty()) {
        auto f = open_out(doc.output.path);
        write_sweep_csv(f, rows, SweepMetric::HostDelay);
        std::string down = doc.output.path;
        const auto dot = down.rfind(".csv");
        down = (dot == std::string::npos ? down : down.substr(0, dot)) + ".downstream.csv";
        auto g = open_out(down);
        write_sweep_csv(g, rows, SweepMetric::Downstream);
    }
    if (doc.output.format == "csv") {
        write_sweep_csv(out, rows, SweepMetric::HostDelay);
    } else if (doc.output.format == "json") {
        json j = json::array();
        for (const auto& r : rows)
            j.push_back({{"bucket", r.bucket}, {"percentile", r.percentile},
                         {"host_delay_ns", r.host_delay}, {"downstream_bytes", r.downstream}});
        out << j.dump(2) << '\n';
    } else {
        out << "bucket_bytes  percentile  host_delay_us  downstream_kb\n";
        for (const auto& r : rows) {
            char line[96];
            std::snprintf(line, sizeof line, "%12.0f  %10.4f  %13.3f  %13.3f\n", r.bucket, r.percentile,
                          r.host_delay / 1e3, r.downstream / 1e3);
            out << line;
        }
    }
    return kOk;
}

void add_common(CLI::App* app, Flags& f, bool spec_required) {
    auto* spec = app->add_option("spec", f.spec, "spec file (JSON)");
    if (spec_required) spec->required();
    app->add_option("--seed", f.seed, "random seed");
    app->add_option("--flows", f.flows, "number of flows (messages for the shaper)");
    app->add_option("--dt-ns", f.dt_ns, "integration step in ns");
    app->add_option("--replications", f.replications, "independent replications");
    app->add_option("--out", f.out, "CSV output path");
    app->add_option("--format", f.format, "stdout format")->check(CLI::IsMember({"summary", "csv", "json"}));
    app->add_option("--max-iters", f.max_iters, "weight loop iteration cap");
    app->add_option("--timeout-s", f.timeout_s, "wall-clock limit per simulation");
    app->add_option("--workers", f.workers, "worker threads, 0 for all cores");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Flow-level single-bottleneck simulator and switch weight optimizer", "slosim"};
    app.require_subcommand(1);
    Flags f;
    add_common(app.add_subcommand("run", "simulate a spec and check its SLOs"), f, true);
    add_common(app.add_subcommand("optimize", "search switch weights that meet every SLO"), f, true);
    add_common(app.add_subcommand("minbw", "minimum link capacity per scheduling strategy"), f, true);
    auto* sc = app.add_subcommand("scenarios", "batch of sampled configurations");
    add_common(sc, f, false);
    sc->add_option("--count", f.count, "number of scenarios");
    sc->add_option("--n-classes", f.n_classes, "classes per scenario (3 or 5)");
    add_common(app.add_subcommand("shaper", "leaky-bucket host delay and downstream queue sweep"), f, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        SpecDocument doc;
        if (!f.spec.empty())
            doc = load_spec(f.spec);
        else
            doc.scenarios = ScenarioSpec{};
        apply(doc, f, command);
        if (command == "run") return command_run(doc, out, err);
        if (command == "optimize") return command_optimize(doc, out);
        if (command == "minbw") return command_minbw(doc, out);
        if (command == "scenarios") return command_scenarios(doc, out, err);
        return command_shaper(doc, out, err);
    } catch (const ConfigError& e) {
        err << "configuration error:\n";
        for (const auto& p : e.problems()) err << "  " << p << '\n';
        return kConfigError;
    }
}

}  // namespace slosim::cli
