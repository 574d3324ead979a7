// Versioned CSV artifacts. The first line of every file is
// "# l2lab-csv v<version> <kind>"; readers reject other versions or kinds.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "l2lab/fee_oracles.hpp"
#include "l2lab/mdp.hpp"
#include "l2lab/simulator.hpp"

namespace l2lab {

inline constexpr int kCsvVersion = 1;

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvTable {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const;
    [[nodiscard]] double number(std::size_t row, const std::string& name) const;
};

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& kind, const std::vector<std::string>& columns);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    CsvWriter& cell(double v);
    CsvWriter& cell(std::int64_t v);
    CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
    CsvWriter& cell(std::uint64_t v);
    CsvWriter& cell(const std::string& v);
    void end_row();
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

CsvTable read_csv(const std::string& path, const std::string& expected_kind);

void write_solution_csv(const std::string& path, const MdpSolution& solution);
void write_thresholds_csv(const std::string& path, const MdpSolution& solution);
void write_pnl_csv(const std::string& path, const std::vector<PnlEstimate>& curve);
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);
void write_summary_csv(const std::string& path, const std::vector<Trajectory>& trajectories);
void write_switch_matrix_csv(const std::string& path, const SwitchMatrix& m);
void write_kappa_csv(const std::string& path, const std::vector<KappaRow>& rows);

}  // namespace l2lab
