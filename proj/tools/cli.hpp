#pragma once

#include <iosfwd>

namespace slosim::cli {

// Exit statuses shared by every command.
enum Exit : int {
    kOk = 0,
    kNotMet = 1,       // an SLO violated or indeterminate, optimization failed, capacity not found
    kConfigError = 2,
    kUnstable = 3,     // a run hit the horizon guard or the shaper is overloaded
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slosim::cli
