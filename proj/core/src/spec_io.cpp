#include "slosim/spec_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slosim/error.hpp"

#ifndef SLOSIM_DATA_DIR
#define SLOSIM_DATA_DIR "data"
#endif

namespace slosim {

using json = nlohmann::json;

namespace {

struct Unit {
    std::string_view name;
    double scale;
};

constexpr Unit kRateUnits[] = {{"tbps", 1e12 / 8e9}, {"gbps", 1.0 / 8.0}, {"mbps", 1e6 / 8e9},
                               {"kbps", 1e3 / 8e9},  {"bps", 1.0 / 8e9},  {"b/ns", 1.0}};
constexpr Unit kTimeUnits[] = {{"ns", 1.0}, {"us", 1e3}, {"\xc2\xb5s", 1e3}, {"ms", 1e6}, {"s", 1e9}};
constexpr Unit kSizeUnits[] = {{"gb", 1e9}, {"mb", 1e6}, {"kb", 1e3}, {"b", 1.0}};

template <std::size_t N>
double parse_with_units(std::string_view text, const Unit (&units)[N], std::string_view what) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr == text.data())
        throw ConfigError("expected a " + std::string(what) + " like \"" +
                          std::string(units[0].name) + "\" quantity, got \"" + std::string(text) + "\"");
    std::string unit(trim(std::string_view(res.ptr, static_cast<std::size_t>(text.data() + text.size() - res.ptr))));
    if (unit.empty()) return value;
    std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& u : units)
        if (unit == u.name) return value * u.scale;
    throw ConfigError("unknown " + std::string(what) + " unit \"" + unit + "\"");
}

// Collects problems while walking the document so one pass reports all.
class Reader {
public:
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& msg) { problems.push_back(path + ": " + msg); }

    template <class F>
    std::optional<double> quantity(const json& j, const std::string& path, F&& parse) {
        try {
            if (j.is_number()) return j.get<double>();
            if (j.is_string()) return parse(j.get<std::string>());
            fail(path, "expected a number or a string with units");
        } catch (const ConfigError& e) {
            fail(path, e.what());
        }
        return std::nullopt;
    }

    std::optional<double> rate(const json& j, const std::string& p) { return quantity(j, p, parse_rate); }
    std::optional<double> time(const json& j, const std::string& p) { return quantity(j, p, parse_time); }
    std::optional<double> size(const json& j, const std::string& p) { return quantity(j, p, parse_size); }

    std::optional<double> number(const json& j, const std::string& path) {
        if (j.is_number()) return j.get<double>();
        fail(path, "expected a number");
        return std::nullopt;
    }

    template <class T>
    std::optional<T> integer(const json& j, const std::string& path) {
        if (j.is_number_integer() && j.get<long long>() >= 0) return j.get<T>();
        fail(path, "expected a non-negative integer");
        return std::nullopt;
    }

    std::optional<std::string> string(const json& j, const std::string& path) {
        if (j.is_string()) return j.get<std::string>();
        fail(path, "expected a string");
        return std::nullopt;
    }

    void unknown_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> known) {
        if (!obj.is_object()) return;
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (std::find(known.begin(), known.end(), it.key()) == known.end())
                fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
    }
};

std::filesystem::path resolve_cdf(const std::string& name, const std::filesystem::path& base) {
    namespace fs = std::filesystem;
    const fs::path p(name);
    if (p.is_absolute()) return p;
    for (const fs::path& dir : {base, bundled_data_dir() / "cdf", bundled_data_dir()}) {
        if (dir.empty()) continue;
        if (fs::exists(dir / p)) return dir / p;
    }
    return base.empty() ? p : base / p;
}

std::optional<FlowSizeDistribution> read_sizes(Reader& r, const json& j, const std::string& path,
                                                const std::filesystem::path& base) {
    if (!j.is_object() || j.size() != 1) {
        r.fail(path, "expected exactly one of cdf, cdf_points, lognormal, exponential, constant");
        return std::nullopt;
    }
    const std::string key = j.begin().key();
    const json& v = j.begin().value();
    const std::string sub = path + "." + key;
    try {
        if (key == "cdf") {
            auto name = r.string(v, sub);
            if (!name) return std::nullopt;
            const auto file = resolve_cdf(*name, base);
            if (!std::filesystem::exists(file)) {
                r.fail(sub, "CDF file \"" + *name + "\" not found");
                return std::nullopt;
            }
            return load_cdf_file(file);
        }
        if (key == "cdf_points") {
            EmpiricalCdf cdf;
            if (!v.is_array()) {
                r.fail(sub, "expected an array of [size, cum_prob] pairs");
                return std::nullopt;
            }
            for (const auto& pt : v) {
                if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
                    r.fail(sub, "expected [size, cum_prob] pairs");
                    return std::nullopt;
                }
                cdf.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
            }
            validate(FlowSizeDistribution{cdf});
            return cdf;
        }
        if (key == "lognormal") {
            r.unknown_keys(v, sub, {"mu", "sigma"});
            auto mu = r.number(v.value("mu", json()), sub + ".mu");
            auto sigma = r.number(v.value("sigma", json()), sub + ".sigma");
            if (!mu || !sigma) return std::nullopt;
            return LogNormalSize{*mu, *sigma};
        }
        if (key == "exponential") {
            r.unknown_keys(v, sub, {"mean"});
            auto mean = r.size(v.value("mean", json()), sub + ".mean");
            if (!mean) return std::nullopt;
            return ExponentialSize{*mean};
        }
        if (key == "constant") {
            auto s = r.size(v, sub);
            if (!s) return std::nullopt;
            return ConstantSize{*s};
        }
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) r.fail(sub, p);
        return std::nullopt;
    }
    r.fail(sub, "unknown flow-size distribution");
    return std::nullopt;
}

std::optional<InterarrivalProcess> read_gaps(Reader& r, const json& j, const std::string& path,
                                             const std::optional<FlowSizeDistribution>& sizes) {
    if (!j.is_object() || j.size() != 1) {
        r.fail(path, "expected exactly one of lognormal, exponential");
        return std::nullopt;
    }
    const std::string key = j.begin().key();
    const json& v = j.begin().value();
    const std::string sub = path + "." + key;
    auto mean_size = [&]() -> std::optional<double> {
        if (!sizes) return std::nullopt;
        try {
            return mean_flow_size(*sizes);
        } catch (const ConfigError&) {
            return std::nullopt;
        }
    };
    if (key == "lognormal") {
        r.unknown_keys(v, sub, {"mu", "sigma", "rate"});
        auto sigma = r.number(v.value("sigma", json()), sub + ".sigma");
        if (!sigma) return std::nullopt;
        if (v.contains("rate")) {
            if (v.contains("mu")) r.fail(sub, "give mu or rate, not both");
            auto rate = r.rate(v["rate"], sub + ".rate");
            auto mean = mean_size();
            if (!rate || !mean) return std::nullopt;
            if (!(*rate > 0.0)) {
                r.fail(sub + ".rate", "must be positive");
                return std::nullopt;
            }
            return LogNormalGap{mu_for_load(*rate, *mean, *sigma), *sigma};
        }
        auto mu = r.number(v.value("mu", json()), sub + ".mu");
        if (!mu) return std::nullopt;
        return LogNormalGap{*mu, *sigma};
    }
    if (key == "exponential") {
        r.unknown_keys(v, sub, {"mean", "rate"});
        if (v.contains("rate")) {
            auto rate = r.rate(v["rate"], sub + ".rate");
            auto mean = mean_size();
            if (!rate || !mean) return std::nullopt;
            if (!(*rate > 0.0)) {
                r.fail(sub + ".rate", "must be positive");
                return std::nullopt;
            }
            return ExponentialGap{*mean / *rate};
        }
        auto mean = r.time(v.value("mean", json()), sub + ".mean");
        if (!mean) return std::nullopt;
        return ExponentialGap{*mean};
    }
    r.fail(sub, "unknown interarrival process");
    return std::nullopt;
}

std::optional<SliDef> read_sli(Reader& r, const json& j, const std::string& path) {
    r.unknown_keys(j, path, {"name", "metric", "attr", "size_range"});
    SliDef d;
    auto name = r.string(j.value("name", json()), path + ".name");
    if (!name) return std::nullopt;
    d.name = *name;
    if (j.contains("attr") && j["attr"] != "slowdowns") r.fail(path + ".attr", "only \"slowdowns\" is supported");
    const json m = j.value("metric", json("p99"));
    if (m.is_string()) {
        const auto s = m.get<std::string>();
        if (s == "mean")
            d.metric = Mean{};
        else if (s == "max")
            d.metric = Max{};
        else if (s == "p99")
            d.metric = Percentile{0.99};
        else
            r.fail(path + ".metric", "expected mean, max, p99 or {\"percentile\": p}");
    } else if (m.is_object() && m.contains("percentile")) {
        auto p = r.number(m["percentile"], path + ".metric.percentile");
        if (p) d.metric = Percentile{*p};
    } else {
        r.fail(path + ".metric", "expected mean, max, p99 or {\"percentile\": p}");
    }
    if (j.contains("size_range")) {
        const auto& sr = j["size_range"];
        if (!sr.is_array() || sr.size() != 2) {
            r.fail(path + ".size_range", "expected [lo, hi]");
        } else {
            auto lo = r.size(sr[0], path + ".size_range[0]");
            std::optional<double> hi = std::numeric_limits<double>::infinity();
            if (!sr[1].is_null() && !(sr[1].is_string() && sr[1] == "inf")) hi = r.size(sr[1], path + ".size_range[1]");
            if (lo && hi) d.size_filter = SizeRange{*lo, *hi};
        }
    }
    return d;
}

std::optional<TrafficClassSpec> read_class(Reader& r, const json& j, const std::string& path,
                                           const std::filesystem::path& base) {
    if (!j.is_object()) {
        r.fail(path, "expected an object");
        return std::nullopt;
    }
    r.unknown_keys(j, path, {"name", "flowsizes", "interarrivals", "slis", "slo", "priority"});
    TrafficClassSpec c;
    bool ok = true;
    if (auto name = r.string(j.value("name", json()), path + ".name"))
        c.name = *name;
    else
        ok = false;
    auto sizes = read_sizes(r, j.value("flowsizes", json()), path + ".flowsizes", base);
    auto gaps = read_gaps(r, j.value("interarrivals", json()), path + ".interarrivals", sizes);
    ok = ok && sizes && gaps;
    if (sizes) c.flow_sizes = *sizes;
    if (gaps) c.interarrivals = *gaps;
    if (j.contains("slis")) {
        if (!j["slis"].is_array()) {
            r.fail(path + ".slis", "expected an array");
            ok = false;
        } else {
            for (std::size_t i = 0; i < j["slis"].size(); ++i) {
                auto d = read_sli(r, j["slis"][i], path + ".slis[" + std::to_string(i) + "]");
                if (d)
                    c.slis.push_back(*d);
                else
                    ok = false;
            }
        }
    }
    if (j.contains("slo")) {
        if (auto text = r.string(j["slo"], path + ".slo")) {
            try {
                c.slo = parse_slo(*text);
            } catch (const SloSyntaxError& e) {
                r.fail(path + ".slo", e.what());
                ok = false;
            }
        }
    }
    if (j.contains("priority")) {
        if (j["priority"].is_number_integer())
            c.priority_rank = j["priority"].get<int>();
        else
            r.fail(path + ".priority", "expected an integer");
    }
    if (!ok) return std::nullopt;
    return c;
}

void read_queue(Reader& r, const json& j, SimConfig& sim, std::vector<std::string>& weight_names,
                std::vector<double>& weight_values) {
    auto within_from = [&](const json& obj) {
        const std::string w = obj.value("within", std::string("fifo"));
        if (w == "fifo") return WithinClass::Fifo;
        if (w == "fq") return WithinClass::FairQueue;
        r.fail("queue.within", "expected fifo or fq");
        return WithinClass::Fifo;
    };
    std::string name;
    json obj = json::object();
    if (j.is_string()) {
        name = j.get<std::string>();
    } else if (j.is_object()) {
        r.unknown_keys(j, "queue", {"discipline", "within", "weights", "weighted"});
        obj = j;
        name = j.value("discipline", std::string());
    } else {
        r.fail("queue", "expected a discipline name or object");
        return;
    }
    if (name == "fifo")
        sim.discipline = SharedFifo{};
    else if (name == "priority")
        sim.discipline = StrictPriority{};
    else if (name == "weighted")
        sim.discipline = WeightedClasses{within_from(obj)};
    else if (name == "ps" || name == "rr")
        sim.discipline = ProcessorSharing{obj.value("weighted", false)};
    else if (name == "wrr" || name == "drr")
        sim.discipline = ProcessorSharing{true};
    else
        r.fail("queue.discipline", "expected fifo, priority, weighted, ps, rr, wrr or drr");

    if (obj.contains("weights")) {
        const auto& w = obj["weights"];
        if (!w.is_object()) {
            r.fail("queue.weights", "expected a map from class name to weight");
            return;
        }
        for (auto it = w.begin(); it != w.end(); ++it) {
            if (auto v = r.number(it.value(), "queue.weights." + it.key())) {
                weight_names.push_back(it.key());
                weight_values.push_back(*v);
            }
        }
    }
}

void read_cc(Reader& r, const json& j, CcParams& cc) {
    if (!j.is_object()) {
        r.fail("cc", "expected an object");
        return;
    }
    r.unknown_keys(j, "cc", {"preset", "r_init", "u_target", "thresh", "beta", "eta"});
    if (j.contains("preset")) {
        const auto p = j.value("preset", std::string());
        if (p == "swp-d")
            cc = CcParams::swp_d();
        else if (p == "swp-h")
            cc = CcParams::swp_h();
        else
            r.fail("cc.preset", "expected swp-d or swp-h");
    }
    if (j.contains("r_init"))
        if (auto v = r.rate(j["r_init"], "cc.r_init")) cc.r_init = *v;
    if (j.contains("u_target"))
        if (auto v = r.number(j["u_target"], "cc.u_target")) cc.target_utilization = *v;
    if (j.contains("thresh"))
        if (auto v = r.size(j["thresh"], "cc.thresh")) cc.queue_threshold = *v;
    if (j.contains("beta"))
        if (auto v = r.number(j["beta"], "cc.beta")) cc.beta = *v;
    if (j.contains("eta"))
        if (auto v = r.number(j["eta"], "cc.eta")) cc.eta = *v;
}

void read_sim(Reader& r, const json& j, SimConfig& sim) {
    r.unknown_keys(j, "sim", {"num_flows", "seed", "warmup", "dt", "replications", "horizon_factor", "timeout_s"});
    if (j.contains("num_flows"))
        if (auto v = r.integer<std::size_t>(j["num_flows"], "sim.num_flows")) sim.num_flows = *v;
    if (j.contains("seed"))
        if (auto v = r.integer<std::uint64_t>(j["seed"], "sim.seed")) sim.seed = *v;
    if (j.contains("warmup"))
        if (auto v = r.number(j["warmup"], "sim.warmup")) sim.warmup_fraction = *v;
    if (j.contains("dt"))
        if (auto v = r.time(j["dt"], "sim.dt")) {
            if (*v <= 0.0)
                r.fail("sim.dt", "must be positive");
            else
                sim.network.dt = *v;
        }
    if (j.contains("replications"))
        if (auto v = r.integer<std::size_t>(j["replications"], "sim.replications")) sim.replications = *v;
    if (j.contains("horizon_factor"))
        if (auto v = r.number(j["horizon_factor"], "sim.horizon_factor")) sim.horizon_factor = *v;
    if (j.contains("timeout_s"))
        if (auto v = r.number(j["timeout_s"], "sim.timeout_s")) sim.timeout_s = *v;
}

void read_optimizer(Reader& r, const json& j, OptimizerConfig& opt) {
    r.unknown_keys(j, "optimizer",
                   {"max_iterations", "baseline_tolerance", "capacity_tolerance", "replications", "seed",
                    "min_probe_weight", "capacity_cap_factor", "workers"});
    if (j.contains("max_iterations"))
        if (auto v = r.integer<std::size_t>(j["max_iterations"], "optimizer.max_iterations")) opt.max_iterations = *v;
    if (j.contains("baseline_tolerance"))
        if (auto v = r.number(j["baseline_tolerance"], "optimizer.baseline_tolerance"))
            opt.baseline_weight_tolerance = *v;
    if (j.contains("capacity_tolerance"))
        if (auto v = r.number(j["capacity_tolerance"], "optimizer.capacity_tolerance"))
            opt.capacity_search_tolerance = *v;
    if (j.contains("replications"))
        if (auto v = r.integer<std::size_t>(j["replications"], "optimizer.replications")) opt.replications = *v;
    if (j.contains("seed"))
        if (auto v = r.integer<std::uint64_t>(j["seed"], "optimizer.seed")) opt.seed = *v;
    if (j.contains("min_probe_weight"))
        if (auto v = r.number(j["min_probe_weight"], "optimizer.min_probe_weight")) opt.min_probe_weight = *v;
    if (j.contains("capacity_cap_factor"))
        if (auto v = r.number(j["capacity_cap_factor"], "optimizer.capacity_cap_factor"))
            opt.capacity_cap_factor = *v;
    if (j.contains("workers"))
        if (auto v = r.integer<std::size_t>(j["workers"], "optimizer.workers")) opt.workers = *v;
}

std::optional<ShaperSpec> read_shaper(Reader& r, const json& j, const std::filesystem::path& base) {
    r.unknown_keys(j, "shaper", {"rate", "bucket", "buckets", "percentiles", "count", "flowsizes", "interarrivals"});
    ShaperSpec s;
    if (j.contains("rate"))
        if (auto v = r.rate(j["rate"], "shaper.rate")) s.params.rate = *v;
    if (j.contains("bucket"))
        if (auto v = r.size(j["bucket"], "shaper.bucket")) s.params.bucket = *v;
    if (j.contains("count"))
        if (auto v = r.integer<std::size_t>(j["count"], "shaper.count")) s.count = *v;
    std::optional<FlowSizeDistribution> sizes;
    if (j.contains("flowsizes")) {
        sizes = read_sizes(r, j["flowsizes"], "shaper.flowsizes", base);
        if (sizes) s.params.sizes = *sizes;
    } else {
        sizes = s.params.sizes;
    }
    if (j.contains("interarrivals"))
        if (auto g = read_gaps(r, j["interarrivals"], "shaper.interarrivals", sizes)) s.params.gaps = *g;
    if (j.contains("buckets")) {
        if (!j["buckets"].is_array()) {
            r.fail("shaper.buckets", "expected an array");
        } else {
            for (std::size_t i = 0; i < j["buckets"].size(); ++i)
                if (auto v = r.size(j["buckets"][i], "shaper.buckets[" + std::to_string(i) + "]"))
                    s.buckets.push_back(*v);
        }
    }
    if (j.contains("percentiles")) {
        s.percentiles.clear();
        if (!j["percentiles"].is_array()) {
            r.fail("shaper.percentiles", "expected an array");
        } else {
            for (std::size_t i = 0; i < j["percentiles"].size(); ++i)
                if (auto v = r.number(j["percentiles"][i], "shaper.percentiles[" + std::to_string(i) + "]"))
                    s.percentiles.push_back(*v);
        }
    }
    if (s.buckets.empty())
        for (double f : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) s.buckets.push_back(f * s.params.bucket);
    try {
        s.params.validate();
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) r.problems.push_back(p);
    }
    return s;
}

// Byte offset to "line L, column C" for parse errors.
std::string location(std::string_view text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

double parse_rate(std::string_view text) { return parse_with_units(text, kRateUnits, "rate"); }
double parse_time(std::string_view text) { return parse_with_units(text, kTimeUnits, "time"); }
double parse_size(std::string_view text) { return parse_with_units(text, kSizeUnits, "size"); }

std::filesystem::path bundled_data_dir() {
    // Installed builds point SLOSIM_DATA_DIR at <prefix>/share/slosim.
    if (const char* env = std::getenv("SLOSIM_DATA_DIR"); env && *env) return env;
    return SLOSIM_DATA_DIR;
}

SpecDocument parse_spec(std::string_view json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("parse error at " + location(json_text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("spec must be a JSON object");

    Reader r;
    SpecDocument doc;
    r.unknown_keys(root, "", {"network", "queue", "cc", "classes", "sim", "optimizer", "output", "shaper", "scenarios"});

    if (root.contains("network")) {
        const auto& n = root["network"];
        r.unknown_keys(n, "network", {"link", "rtt"});
        if (n.contains("link"))
            if (auto v = r.rate(n["link"], "network.link")) doc.sim.network.capacity = *v;
        if (n.contains("rtt"))
            if (auto v = r.time(n["rtt"], "network.rtt")) doc.sim.network.rtt = *v;
    }
    std::vector<std::string> weight_names;
    std::vector<double> weight_values;
    if (root.contains("queue")) read_queue(r, root["queue"], doc.sim, weight_names, weight_values);
    if (root.contains("cc")) read_cc(r, root["cc"], doc.sim.cc);
    if (root.contains("sim")) read_sim(r, root["sim"], doc.sim);
    if (root.contains("optimizer")) read_optimizer(r, root["optimizer"], doc.optimizer);
    if (root.contains("output")) {
        const auto& o = root["output"];
        r.unknown_keys(o, "output", {"path", "format"});
        if (o.contains("path"))
            if (auto v = r.string(o["path"], "output.path")) doc.output.path = *v;
        if (o.contains("format"))
            if (auto v = r.string(o["format"], "output.format")) {
                if (*v != "summary" && *v != "csv" && *v != "json")
                    r.fail("output.format", "expected summary, csv or json");
                doc.output.format = *v;
            }
    }
    if (root.contains("shaper")) doc.shaper = read_shaper(r, root["shaper"], base_dir);
    if (root.contains("scenarios")) {
        const auto& sc = root["scenarios"];
        r.unknown_keys(sc, "scenarios", {"count", "n_classes"});
        if (sc.contains("count"))
            if (auto v = r.integer<std::size_t>(sc["count"], "scenarios.count")) doc.scenarios.count = *v;
        if (sc.contains("n_classes"))
            if (auto v = r.integer<std::size_t>(sc["n_classes"], "scenarios.n_classes")) {
                if (*v != 3 && *v != 5) r.fail("scenarios.n_classes", "must be 3 or 5");
                doc.scenarios.n_classes = *v;
            }
    }

    bool classes_ok = true;
    if (root.contains("classes")) {
        doc.has_classes = true;
        const auto& cs = root["classes"];
        if (!cs.is_array()) {
            r.fail("classes", "expected an array");
            classes_ok = false;
        } else {
            for (std::size_t i = 0; i < cs.size(); ++i) {
                auto c = read_class(r, cs[i], "classes[" + std::to_string(i) + "]", base_dir);
                if (c)
                    doc.sim.classes.push_back(std::move(*c));
                else
                    classes_ok = false;
            }
        }
    } else if (!doc.shaper && !root.contains("scenarios")) {
        r.fail("classes", "required unless the spec only configures the shaper or scenarios");
    }

    if (!weight_names.empty()) {
        std::vector<double> w(doc.sim.classes.size(), 0.0);
        std::vector<bool> seen(w.size(), false);
        for (std::size_t i = 0; i < weight_names.size(); ++i) {
            auto it = std::find_if(doc.sim.classes.begin(), doc.sim.classes.end(),
                                   [&](const TrafficClassSpec& c) { return c.name == weight_names[i]; });
            if (it == doc.sim.classes.end()) {
                if (classes_ok) r.fail("queue.weights." + weight_names[i], "no class with this name");
                continue;
            }
            const auto k = static_cast<std::size_t>(it - doc.sim.classes.begin());
            w[k] = weight_values[i];
            seen[k] = true;
        }
        if (classes_ok) {
            bool complete = true;
            for (std::size_t k = 0; k < w.size(); ++k) {
                if (!seen[k]) {
                    r.fail("queue.weights", "missing weight for class \"" + doc.sim.classes[k].name + "\"");
                    complete = false;
                } else if (!(w[k] > 0.0)) {
                    r.fail("queue.weights." + doc.sim.classes[k].name, "must be positive");
                    complete = false;
                }
            }
            if (complete) doc.sim.weights = WeightAllocation(w);
        }
    }

    if (doc.has_classes && classes_ok) {
        try {
            doc.sim.validate();
        } catch (const ConfigError& e) {
            for (const auto& p : e.problems())
                if (std::find(r.problems.begin(), r.problems.end(), p) == r.problems.end()) r.problems.push_back(p);
        }
    }
    try {
        doc.optimizer.validate();
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) r.problems.push_back(p);
    }
    if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
    return doc;
}

SpecDocument load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read spec file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str(), path.parent_path());
}

namespace {

json sizes_json(const FlowSizeDistribution& d) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, EmpiricalCdf>) {
                json pts = json::array();
                for (const auto& p : x.points) pts.push_back({p.size, p.cum_prob});
                return {{"cdf_points", pts}};
            } else if constexpr (std::is_same_v<T, LogNormalSize>) {
                return {{"lognormal", {{"mu", x.mu}, {"sigma", x.sigma}}}};
            } else if constexpr (std::is_same_v<T, ExponentialSize>) {
                return {{"exponential", {{"mean", x.mean}}}};
            } else {
                return {{"constant", x.size}};
            }
        },
        d);
}

json gaps_json(const InterarrivalProcess& g) {
    if (const auto* l = std::get_if<LogNormalGap>(&g)) return {{"lognormal", {{"mu", l->mu}, {"sigma", l->sigma}}}};
    return {{"exponential", {{"mean", std::get<ExponentialGap>(g).mean}}}};
}

json sli_json(const SliDef& d) {
    json j;
    j["name"] = d.name;
    j["attr"] = "slowdowns";
    if (const auto* p = std::get_if<Percentile>(&d.metric))
        j["metric"] = {{"percentile", p->p}};
    else
        j["metric"] = std::holds_alternative<Mean>(d.metric) ? "mean" : "max";
    if (d.size_filter) {
        json hi = std::isinf(d.size_filter->hi) ? json("inf") : json(d.size_filter->hi);
        j["size_range"] = {d.size_filter->lo, hi};
    }
    return j;
}

}  // namespace

std::string serialize_spec(const SpecDocument& doc) {
    json root;
    const auto& sim = doc.sim;
    root["network"] = {{"link", sim.network.capacity}, {"rtt", sim.network.rtt}};

    json queue = json::object();
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, SharedFifo>) {
                queue["discipline"] = "fifo";
            } else if constexpr (std::is_same_v<D, StrictPriority>) {
                queue["discipline"] = "priority";
            } else if constexpr (std::is_same_v<D, WeightedClasses>) {
                queue["discipline"] = "weighted";
                queue["within"] = d.within == WithinClass::Fifo ? "fifo" : "fq";
            } else {
                queue["discipline"] = "ps";
                queue["weighted"] = d.weighted;
            }
        },
        sim.discipline);
    if (!sim.weights.empty() && sim.weights.size() == sim.classes.size()) {
        json w = json::object();
        for (std::size_t k = 0; k < sim.classes.size(); ++k) w[sim.classes[k].name] = sim.weights[k];
        queue["weights"] = w;
    }
    root["queue"] = queue;
    root["cc"] = {{"r_init", sim.cc.r_init},
                  {"u_target", sim.cc.target_utilization},
                  {"thresh", sim.cc.queue_threshold},
                  {"beta", sim.cc.beta},
                  {"eta", sim.cc.eta}};

    if (doc.has_classes) {
        json classes = json::array();
        for (const auto& c : sim.classes) {
            json cj;
            cj["name"] = c.name;
            cj["flowsizes"] = sizes_json(c.flow_sizes);
            cj["interarrivals"] = gaps_json(c.interarrivals);
            json slis = json::array();
            for (const auto& s : c.slis) slis.push_back(sli_json(s));
            cj["slis"] = slis;
            if (c.slo) cj["slo"] = to_string(*c.slo);
            if (c.priority_rank) cj["priority"] = *c.priority_rank;
            classes.push_back(cj);
        }
        root["classes"] = classes;
    }

    json simj = {{"num_flows", sim.num_flows},
                 {"seed", sim.seed},
                 {"warmup", sim.warmup_fraction},
                 {"replications", sim.replications},
                 {"horizon_factor", sim.horizon_factor},
                 {"timeout_s", sim.timeout_s}};
    if (sim.network.dt > 0.0) simj["dt"] = sim.network.dt;
    root["sim"] = simj;

    const auto& o = doc.optimizer;
    root["optimizer"] = {{"max_iterations", o.max_iterations},
                         {"baseline_tolerance", o.baseline_weight_tolerance},
                         {"capacity_tolerance", o.capacity_search_tolerance},
                         {"replications", o.replications},
                         {"seed", o.seed},
                         {"min_probe_weight", o.min_probe_weight},
                         {"capacity_cap_factor", o.capacity_cap_factor},
                         {"workers", o.workers}};
    root["output"] = {{"path", doc.output.path}, {"format", doc.output.format}};
    root["scenarios"] = {{"count", doc.scenarios.count}, {"n_classes", doc.scenarios.n_classes}};

    if (doc.shaper) {
        const auto& s = *doc.shaper;
        root["shaper"] = {{"rate", s.params.rate},
                          {"bucket", s.params.bucket},
                          {"buckets", s.buckets},
                          {"percentiles", s.percentiles},
                          {"count", s.count},
                          {"flowsizes", sizes_json(s.params.sizes)},
                          {"interarrivals", gaps_json(s.params.gaps)}};
    }
    return root.dump(2) + "\n";
}

}  // namespace slosim
