#include "slosim/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "slosim/error.hpp"

namespace slosim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string> cdf_problems(const EmpiricalCdf& cdf) {
    std::vector<std::string> problems;
    const auto& pts = cdf.points;
    if (pts.empty()) {
        problems.emplace_back("empirical CDF has no points");
        return problems;
    }
    if (pts.front().cum_prob < 0.0) problems.emplace_back("first cum_prob is negative");
    if (pts.back().cum_prob != 1.0) problems.emplace_back("last cum_prob must be exactly 1.0");
    if (pts.front().size < 1.0) problems.emplace_back("sizes must be at least 1 byte");
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (!(pts[i].size > pts[i - 1].size))
            problems.push_back("sizes not strictly increasing at point " + std::to_string(i));
        if (pts[i].cum_prob < pts[i - 1].cum_prob)
            problems.push_back("cum_prob decreasing at point " + std::to_string(i));
    }
    return problems;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t global_seed, std::uint64_t index) {
    std::uint64_t z = global_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void validate(const FlowSizeDistribution& dist) {
    std::visit(overloaded{
                   [](const EmpiricalCdf& c) {
                       auto problems = cdf_problems(c);
                       if (!problems.empty()) throw ConfigError(std::move(problems));
                   },
                   [](const LogNormalSize& l) {
                       if (!(l.sigma >= 0.0) || !std::isfinite(l.mu))
                           throw ConfigError("log-normal size needs finite mu and sigma >= 0");
                   },
                   [](const ExponentialSize& e) {
                       if (!(e.mean >= 1.0)) throw ConfigError("exponential size mean must be >= 1 byte");
                   },
                   [](const ConstantSize& c) {
                       if (!(c.size >= 1.0)) throw ConfigError("constant size must be >= 1 byte");
                   },
               },
               dist);
}

void validate(const InterarrivalProcess& process) {
    std::visit(overloaded{
                   [](const LogNormalGap& l) {
                       if (!(l.sigma >= 0.0) || !std::isfinite(l.mu))
                           throw ConfigError("log-normal interarrival needs finite mu and sigma >= 0");
                   },
                   [](const ExponentialGap& e) {
                       if (!(e.mean > 0.0)) throw ConfigError("exponential interarrival mean must be > 0");
                   },
               },
               process);
}

EmpiricalCdf parse_cdf(std::string_view text) {
    EmpiricalCdf cdf;
    std::vector<std::string> problems;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        double size = 0.0;
        double prob = 0.0;
        if (!(fields >> size >> prob)) {
            problems.push_back("line " + std::to_string(lineno) + ": expected \"size_bytes cum_prob\"");
            continue;
        }
        cdf.points.push_back({size, prob});
    }
    if (problems.empty()) problems = cdf_problems(cdf);
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cdf;
}

EmpiricalCdf load_cdf_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CDF file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_cdf(buf.str());
    } catch (const ConfigError& e) {
        std::vector<std::string> problems;
        for (const auto& p : e.problems()) problems.push_back(path.string() + ": " + p);
        throw ConfigError(std::move(problems));
    }
}

Bytes cdf_quantile(const EmpiricalCdf& cdf, double u) {
    const auto& pts = cdf.points;
    auto it = std::lower_bound(pts.begin(), pts.end(), u,
                               [](const CdfPoint& p, double v) { return p.cum_prob < v; });
    if (it == pts.begin()) return pts.front().size;
    if (it == pts.end()) return pts.back().size;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    if (hi.cum_prob == lo.cum_prob) return hi.size;
    return lo.size + (hi.size - lo.size) * (u - lo.cum_prob) / (hi.cum_prob - lo.cum_prob);
}

Bytes mean_flow_size(const FlowSizeDistribution& dist) {
    return std::visit(overloaded{
                          [](const EmpiricalCdf& c) {
                              const auto& pts = c.points;
                              double mean = pts.front().cum_prob * pts.front().size;
                              for (std::size_t i = 1; i < pts.size(); ++i)
                                  mean += (pts[i].cum_prob - pts[i - 1].cum_prob) *
                                          0.5 * (pts[i].size + pts[i - 1].size);
                              return mean;
                          },
                          [](const LogNormalSize& l) { return std::exp(l.mu + 0.5 * l.sigma * l.sigma); },
                          [](const ExponentialSize& e) { return e.mean; },
                          [](const ConstantSize& c) { return c.size; },
                      },
                      dist);
}

Nanos mean_gap(const InterarrivalProcess& process) {
    return std::visit(overloaded{
                          [](const LogNormalGap& l) { return std::exp(l.mu + 0.5 * l.sigma * l.sigma); },
                          [](const ExponentialGap& e) { return e.mean; },
                      },
                      process);
}

Bytes sample_flow_size(const FlowSizeDistribution& dist, Rng& rng) {
    const double raw = std::visit(
        overloaded{
            [&](const EmpiricalCdf& c) {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                return cdf_quantile(c, u(rng));
            },
            [&](const LogNormalSize& l) { return std::lognormal_distribution<double>(l.mu, l.sigma)(rng); },
            [&](const ExponentialSize& e) { return std::exponential_distribution<double>(1.0 / e.mean)(rng); },
            [](const ConstantSize& c) { return c.size; },
        },
        dist);
    return std::max(1.0, std::round(raw));
}

Nanos sample_gap(const InterarrivalProcess& process, Rng& rng) {
    double gap = std::visit(
        overloaded{
            [&](const LogNormalGap& l) { return std::lognormal_distribution<double>(l.mu, l.sigma)(rng); },
            [&](const ExponentialGap& e) { return std::exponential_distribution<double>(1.0 / e.mean)(rng); },
        },
        process);
    // Gaps must be strictly positive; underflow of exp() can produce 0.
    return std::max(gap, 1e-9);
}

double mu_for_load(BytesPerNs target_rate, Bytes mean_flow_size, double sigma) {
    if (!(target_rate > 0.0)) throw ConfigError("target rate must be positive");
    return std::log(mean_flow_size / target_rate) - 0.5 * sigma * sigma;
}

BytesPerNs offered_rate(const FlowSizeDistribution& sizes, const InterarrivalProcess& gaps) {
    return mean_flow_size(sizes) / mean_gap(gaps);
}

std::vector<FlowArrival> generate_arrivals(const FlowSizeDistribution& sizes,
                                           const InterarrivalProcess& gaps,
                                           std::size_t count, ClassId class_id, Rng& rng) {
    std::vector<FlowArrival> out;
    out.reserve(count);
    Nanos t = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        t += sample_gap(gaps, rng);
        Bytes size = sample_flow_size(sizes, rng);
        out.push_back({static_cast<FlowId>(i), class_id, t, size});
    }
    return out;
}

}  // namespace slosim
