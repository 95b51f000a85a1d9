#pragma once

#include <cstdint>

// Internal units: time in nanoseconds, sizes in bytes, rates in bytes/ns.
// 100 Gbps == 12.5 B/ns.
namespace slosim {

using Nanos = double;
using Bytes = double;
using BytesPerNs = double;

using FlowId = std::uint64_t;
using ClassId = std::uint32_t;

constexpr BytesPerNs gbps(double g) { return g / 8.0; }
constexpr double to_gbps(BytesPerNs r) { return r * 8.0; }
constexpr Nanos micros(double us) { return us * 1000.0; }
constexpr Bytes kilobytes(double kb) { return kb * 1000.0; }

}  // namespace slosim
