#include "slosim/error.hpp"

namespace slosim {

namespace {
std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}
}  // namespace

ConfigError::ConfigError(std::string message)
    : std::runtime_error(message), problems_{std::move(message)} {}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

}  // namespace slosim
