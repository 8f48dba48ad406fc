#include "nvloc/table.hpp"

#include "nvloc/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace nvloc {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string to_csv(const ResultTable& t) {
    std::string out;
    for (size_t i = 0; i < t.columns.size(); ++i) {
        out += t.columns[i];
        out += (i + 1 < t.columns.size()) ? ',' : '\n';
    }
    for (const auto& row : t.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            out += format_number(row[i]);
            out += (i + 1 < row.size()) ? ',' : '\n';
        }
    }
    return out;
}

namespace {

nlohmann::ordered_json summary_to_json(const ResultTable& t) {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : t.summary) {
        if (std::holds_alternative<double>(v)) {
            // round-trip through the fixed formatting so json and csv agree
            j[k] = std::stod(format_number(std::get<double>(v)));
        } else {
            j[k] = std::get<std::string>(v);
        }
    }
    return j;
}

}  // namespace

std::string to_json(const ResultTable& t) {
    nlohmann::ordered_json j;
    j["columns"] = t.columns;
    j["rows"] = t.rows;
    j["summary"] = summary_to_json(t);
    return j.dump(2) + "\n";
}

std::string summary_json(const ResultTable& t) {
    return summary_to_json(t).dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot write " + path);
    out << content;
}

}  // namespace nvloc
