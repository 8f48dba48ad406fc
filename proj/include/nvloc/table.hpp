#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nvloc {

/// Column-labeled numeric series plus a flat summary of fitted quantities.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, std::variant<double, std::string>>> summary;

    void add_summary(std::string key, double v) { summary.emplace_back(std::move(key), v); }
    void add_summary(std::string key, std::string v) {
        summary.emplace_back(std::move(key), std::move(v));
    }
};

/// Deterministic %.10g formatting used for all emitted numbers.
std::string format_number(double v);

std::string to_csv(const ResultTable& t);
std::string to_json(const ResultTable& t);
std::string summary_json(const ResultTable& t);

void write_file(const std::string& path, const std::string& content);

}  // namespace nvloc
