#pragma once

// Reference computations written independently of the library code they
// check. Slow and simple on purpose.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

// Progressive filling: raise a common level in small steps until the budget
// is spent or every demand is met. Fluid (real-valued) shares.
inline std::vector<double> progressive_fill(const std::vector<double>& demand, const std::vector<double>& weight,
                                            double budget) {
    const std::size_t n = demand.size();
    std::vector<double> got(n, 0.0);
    std::vector<bool> frozen(n);
    for (std::size_t k = 0; k < n; ++k) frozen[k] = demand[k] <= 0.0;
    double left = budget;
    while (left > 1e-9) {
        double w = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (!frozen[k]) w += weight[k];
        if (w == 0.0) break;
        // Largest level increment before someone saturates or money runs out.
        double inc = left / w;
        for (std::size_t k = 0; k < n; ++k)
            if (!frozen[k]) inc = std::min(inc, (demand[k] - got[k]) / weight[k]);
        for (std::size_t k = 0; k < n; ++k) {
            if (frozen[k]) continue;
            got[k] += inc * weight[k];
            left -= inc * weight[k];
            if (demand[k] - got[k] <= 1e-9) frozen[k] = true;
        }
    }
    return got;
}

// rho(t) for d(rho)/dt = (R - rho) / (eta tau) with constant R.
inline double ewma(double rho0, double target, double t, double eta, double tau) {
    return target + (rho0 - target) * std::exp(-t / (eta * tau));
}

// Token bucket walked in fixed ticks: tokens accrue every tick (capped at the
// bucket unless the head message is larger and is waiting for them), the
// head departs on the first tick with enough tokens.
struct TickShaper {
    std::vector<double> departures;
};

inline TickShaper tick_shaper(const std::vector<double>& arrivals, const std::vector<double>& sizes, double rate,
                              double bucket, double tick) {
    TickShaper out;
    double tokens = bucket;
    double t = 0.0;
    std::size_t i = 0;
    while (i < arrivals.size()) {
        if (arrivals[i] <= t + 1e-12) {
            if (tokens >= sizes[i] - 1e-6) {
                tokens -= sizes[i];
                out.departures.push_back(t);
                ++i;
                continue;
            }
        }
        const double cap = (i < arrivals.size() && arrivals[i] <= t) ? std::max(bucket, sizes[i]) : bucket;
        tokens = std::min(cap, tokens + rate * tick);
        t += tick;
    }
    return out;
}

// M/M/1 mean sojourn time.
inline double mm1_sojourn(double lambda, double mu) { return 1.0 / (mu - lambda); }

// Nearest-rank percentile by full sort.
inline double percentile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs.size())));
    rank = std::clamp<std::size_t>(rank, 1, xs.size());
    return xs[rank - 1];
}

}  // namespace oracle
