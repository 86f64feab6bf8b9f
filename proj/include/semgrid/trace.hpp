#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "semgrid/common.hpp"

namespace semgrid {

struct TraceEvent {
    double t_s = 0.0;
    std::string kind;
    std::string detail;
};

/// Columnar time series emitted by the simulator at the SC cadence, plus
/// run metadata and the event log. The CSV form round-trips through
/// write_csv / read_csv:
///   #! key = value          metadata
///   #@ <t> <kind> <detail>  event log
///   header row, then one data row per SC boundary
class Trace {
public:
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // one vector per column
    std::map<std::string, std::string> meta;
    std::vector<TraceEvent> events;

    size_t rows() const { return data.empty() ? 0 : data[0].size(); }

    int col(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }

    int col_required(const std::string& name) const {
        const int c = col(name);
        require(c >= 0, "trace: missing column " + name);
        return c;
    }

    double at(size_t row, int c) const { return data[static_cast<size_t>(c)][row]; }

    double meta_num(const std::string& key, double fallback) const {
        auto it = meta.find(key);
        if (it == meta.end()) return fallback;
        return std::strtod(it->second.c_str(), nullptr);
    }

    int n_agents() const { return static_cast<int>(meta_num("n_agents", 0)); }

    void add_row(const std::vector<double>& row) {
        require(row.size() == columns.size(), "trace: row width mismatch");
        if (data.size() != columns.size()) data.assign(columns.size(), {});
        for (size_t i = 0; i < row.size(); ++i) data[i].push_back(row[i]);
    }

    void write_csv(std::ostream& os) const {
        for (const auto& [k, v] : meta) os << "#! " << k << " = " << v << "\n";
        for (const auto& e : events)
            os << "#@ " << fmt(e.t_s) << " " << e.kind << " " << (e.detail.empty() ? "-" : e.detail) << "\n";
        for (size_t i = 0; i < columns.size(); ++i)
            os << columns[i] << (i + 1 < columns.size() ? "," : "\n");
        const size_t n = rows();
        for (size_t r = 0; r < n; ++r) {
            for (size_t c = 0; c < columns.size(); ++c)
                os << fmt(data[c][r]) << (c + 1 < columns.size() ? "," : "\n");
        }
    }

    std::string to_csv_string() const {
        std::ostringstream ss;
        write_csv(ss);
        return ss.str();
    }

    static Trace read_csv(std::istream& is) {
        Trace t;
        std::string line;
        bool header_done = false;
        while (std::getline(is, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line.rfind("#! ", 0) == 0) {
                const auto eq = line.find(" = ", 3);
                require(eq != std::string::npos, "trace: malformed metadata line");
                t.meta[line.substr(3, eq - 3)] = line.substr(eq + 3);
                continue;
            }
            if (line.rfind("#@ ", 0) == 0) {
                std::istringstream ls(line.substr(3));
                TraceEvent e;
                ls >> e.t_s >> e.kind;
                std::getline(ls, e.detail);
                if (!e.detail.empty() && e.detail.front() == ' ') e.detail.erase(0, 1);
                if (e.detail == "-") e.detail.clear();
                t.events.push_back(std::move(e));
                continue;
            }
            if (line.front() == '#') continue;
            if (!header_done) {
                std::istringstream ls(line);
                std::string cell;
                while (std::getline(ls, cell, ',')) t.columns.push_back(cell);
                t.data.assign(t.columns.size(), {});
                header_done = true;
                continue;
            }
            std::istringstream ls(line);
            std::string cell;
            size_t c = 0;
            while (std::getline(ls, cell, ',')) {
                require(c < t.columns.size(), "trace: row wider than header");
                t.data[c].push_back(std::strtod(cell.c_str(), nullptr));
                ++c;
            }
            require(c == t.columns.size(), "trace: row narrower than header");
        }
        require(header_done, "trace: no header row");
        return t;
    }

    // Shortest representation that round-trips exactly through strtod.
    static std::string fmt(double v) {
        char buf[40];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    }
};

}  // namespace semgrid
