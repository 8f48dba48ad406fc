#pragma once

#include "nvloc/table.hpp"

#include <map>
#include <string>
#include <vector>

namespace nvloc {

/// Parsed scenario file: key/value pairs grouped into sections. Repeated
/// keys are kept in order (used for bath spin lists).
struct Scenario {
    std::string name;
    std::string kind;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    std::string source_path;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double number(const std::string& section, const std::string& key) const;
    double number_or(const std::string& section, const std::string& key, double fallback) const;
    int integer_or(const std::string& section, const std::string& key, int fallback) const;
    std::vector<std::string> all(const std::string& section, const std::string& key) const;
};

/// Parse a scenario file (ini-style sections, '#' comments). Errors carry
/// file:line context.
Scenario parse_scenario_file(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& label = "<string>");

/// Dispatch on scenario kind: cp-sweep | cp-nutation | correlation |
/// pulsepol-sweep | selective | azimuth-protocol | sync-readout |
/// delay-scan | field-fit.
ResultTable run_scenario(const Scenario& sc);

}  // namespace nvloc
