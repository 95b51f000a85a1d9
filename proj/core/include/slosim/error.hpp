#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace slosim {

// Invalid or inconsistent configuration. Carries every problem found, each
// prefixed with the field path it concerns.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::string message);
    explicit ConfigError(std::vector<std::string> problems);

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

}  // namespace slosim
