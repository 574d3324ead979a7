// INI configuration: sections [price], [demand], [cost], [mdp], [controller], [sim].
#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "l2lab/simulator.hpp"

namespace l2lab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing keys keep their defaults; unknown sections or keys and malformed
/// values raise ConfigError. The price floor is always mu/100.
ScenarioConfig parse_config(std::istream& in, const std::string& source = "<config>");
ScenarioConfig load_config(const std::string& path);

/// Every key with its resolved value, in a form parse_config reads back exactly.
std::string render_config(const ScenarioConfig& config);
void write_config(const std::string& path, const ScenarioConfig& config);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace l2lab
