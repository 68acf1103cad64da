#pragma once

#include "harvest/chain.hpp"
#include "harvest/grid.hpp"
#include "harvest/simulate.hpp"
#include "harvest/solver.hpp"
#include "harvest/verify.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace harvest::io {

/// Floats are printed with 12 significant digits in every CSV.
inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

// ---------------------------------------------------------------------------
// value / policy tables (live nodes only; regimes are 1-based in files)
// ---------------------------------------------------------------------------

inline void write_value_csv(const std::string& path, const Grid& grid, const ValueField& v,
                            const PolicyField& policy) {
    std::ofstream out = open_out(path);
    out << "x,alpha,V,step_type,c\n";
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < v.regimes(); ++a)
            out << num(grid.node(i)) << ',' << a + 1 << ',' << num(v(i, a)) << ','
                << step_code(policy.step_at(i, a)) << ',' << num(policy.control_at(i, a))
                << '\n';
}

inline void write_policy_csv(const std::string& path, const Grid& grid,
                             const PolicyField& policy) {
    std::ofstream out = open_out(path);
    out << "x,alpha,step_type,c\n";
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < policy.m0; ++a)
            out << num(grid.node(i)) << ',' << a + 1 << ','
                << step_code(policy.step_at(i, a)) << ',' << num(policy.control_at(i, a))
                << '\n';
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}
} // namespace detail

struct ValuePolicyTable {
    ValueField value;
    PolicyField policy;
    bool has_value = false;
};

/// Read a value or policy table back onto a grid; every (live node, regime)
/// must be present and every x must be a live node of the grid.
inline ValuePolicyTable read_table_csv(const std::string& path, const Grid& grid,
                                       std::size_t regimes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);

    const auto header = detail::split_csv_line(line);
    int col_x = -1, col_a = -1, col_v = -1, col_step = -1, col_c = -1;
    for (int k = 0; k < static_cast<int>(header.size()); ++k) {
        if (header[k] == "x") col_x = k;
        else if (header[k] == "alpha") col_a = k;
        else if (header[k] == "V") col_v = k;
        else if (header[k] == "step_type") col_step = k;
        else if (header[k] == "c") col_c = k;
    }
    if (col_x < 0 || col_a < 0 || col_step < 0 || col_c < 0)
        throw std::runtime_error(path + ": missing required columns");

    ValuePolicyTable table;
    table.value = ValueField(grid.size(), regimes, 0.0);
    table.policy = PolicyField(grid.size(), regimes);
    table.has_value = col_v >= 0;
    std::vector<bool> seen(grid.size() * regimes, false);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        std::size_t i;
        try {
            i = grid.index_of(std::stod(fields.at(col_x)));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": state is not on the configured grid: " + line);
        }
        if (!grid.is_live(i))
            throw std::runtime_error(path + ": state below the floor: " + line);
        const long a1 = std::stol(fields.at(col_a));
        if (a1 < 1 || static_cast<std::size_t>(a1) > regimes)
            throw std::runtime_error(path + ": regime out of range: " + line);
        const std::size_t a = static_cast<std::size_t>(a1 - 1);
        if (col_v >= 0) table.value(i, a) = std::stod(fields.at(col_v));
        table.policy.step[table.policy.idx(i, a)] =
            step_from_code(std::stoi(fields.at(col_step)));
        table.policy.control[table.policy.idx(i, a)] = std::stod(fields.at(col_c));
        seen[i * regimes + a] = true;
    }
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < regimes; ++a)
            if (!seen[i * regimes + a])
                throw std::runtime_error(path + ": grid mismatch, missing node " +
                                         num(grid.node(i)) + " regime " +
                                         std::to_string(a + 1));
    return table;
}

// ---------------------------------------------------------------------------
// thresholds / kernel / payoff / verify reports
// ---------------------------------------------------------------------------

inline void write_thresholds_csv(const std::string& path,
                                 const std::vector<RegimeThresholds>& thresholds) {
    std::ofstream out = open_out(path);
    out << "alpha,L1,L2,L3,ordered,band_violations\n";
    for (std::size_t a = 0; a < thresholds.size(); ++a) {
        const RegimeThresholds& th = thresholds[a];
        out << a + 1 << ',';
        out << (th.renew_upper ? num(*th.renew_upper) : std::string{}) << ',';
        out << (th.rate_harvest_lower ? num(*th.rate_harvest_lower) : std::string{}) << ',';
        out << (th.impulse_lower ? num(*th.impulse_lower) : std::string{}) << ',';
        out << (th.ordered ? 1 : 0) << ',' << th.interval_violations.size() << '\n';
    }
}

inline void write_kernel_csv(const std::string& path, const HarvestModel& model,
                             const Grid& grid, const TransitionKernel& kernel) {
    std::ofstream out = open_out(path);
    out << "x,alpha,step,c,target_x,target_alpha,prob,dt\n";
    auto emit = [&](double x, std::size_t a, int step, double c, const KernelRow& row) {
        for (const KernelEntry& e : row.entries) {
            // node -1 is the exit state one step below the lattice
            const double target_x = e.node >= 0
                                        ? grid.node(static_cast<std::size_t>(e.node))
                                        : grid.node(0) - grid.spacing();
            out << num(x) << ',' << a + 1 << ',' << step << ',' << num(c) << ','
                << num(target_x) << ',' << e.regime + 1 << ',' << num(e.prob) << ','
                << num(row.dt) << '\n';
        }
    };
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i) {
        const double x = grid.node(i);
        for (std::size_t a = 0; a < model.num_regimes; ++a) {
            if (i < grid.upper_index())
                for (std::size_t ci = 0; ci < model.control.control_set.size(); ++ci)
                    emit(x, a, 0, model.control.control_set[ci],
                         kernel.diffusion_row(i, a, ci));
            if (i > grid.floor_index())
                emit(x, a, 1, 0.0, impulse_transitions(grid, i, a, StepType::Harvest));
            if (i < grid.upper_index())
                emit(x, a, -1, 0.0, impulse_transitions(grid, i, a, StepType::Renew));
        }
    }
}

struct StartEstimate {
    double x0 = 0.0;
    std::size_t alpha0 = 0; // zero-based
    PayoffEstimate estimate;
};

inline void write_payoff_csv(const std::string& path,
                             const std::vector<StartEstimate>& rows) {
    std::ofstream out = open_out(path);
    out << "x0,alpha0,mean,std_error,n_paths,censored_fraction,tail_bound\n";
    for (const auto& r : rows)
        out << num(r.x0) << ',' << r.alpha0 + 1 << ',' << num(r.estimate.mean) << ','
            << num(r.estimate.std_error) << ',' << r.estimate.n_paths << ','
            << num(r.estimate.censored_fraction) << ',' << num(r.estimate.tail_bound)
            << '\n';
}

inline void write_path_log_csv(const std::string& path, const PathLog& log) {
    std::ofstream out = open_out(path);
    out << "t,x,alpha,c,dY,dZ,discounted_payoff_so_far\n";
    for (const PathLogRow& row : log)
        out << num(row.t) << ',' << num(row.x) << ',' << row.alpha + 1 << ','
            << num(row.c) << ',' << num(row.dY) << ',' << num(row.dZ) << ','
            << num(row.payoff_so_far) << '\n';
}

inline void write_verify_csv(const std::string& path, const verify::VerifyReport& report) {
    std::ofstream out = open_out(path);
    out << "name,pass,measured,bound,tolerance,claim,detail\n";
    for (const auto& c : report.checks)
        out << c.name << ',' << (c.pass ? 1 : 0) << ',' << num(c.measured) << ','
            << num(c.bound) << ',' << num(c.tolerance) << ',' << csv_escape(c.claim) << ','
            << csv_escape(c.detail) << '\n';
}

inline void write_verify_text(const std::string& path, const verify::VerifyReport& report) {
    std::ofstream out = open_out(path);
    for (const auto& c : report.checks) {
        out << (c.pass ? "PASS" : "FAIL") << "  " << c.name
            << "  measured=" << num(c.measured) << "  bound=" << num(c.bound)
            << "  tolerance=" << num(c.tolerance) << "\n      claim: " << c.claim << '\n';
        if (!c.detail.empty()) out << "      " << c.detail << '\n';
    }
}

} // namespace harvest::io
