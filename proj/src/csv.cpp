#include "l2lab/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "l2lab/config.hpp"

namespace l2lab {

namespace {

std::string header_line(const std::string& kind) { return "# l2lab-csv v" + std::to_string(kCsvVersion) + " " + kind; }

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

struct CsvWriter::Impl {
    std::ofstream out;
    std::string path;
    std::size_t width = 0;
    std::size_t filled = 0;
};

CsvWriter::CsvWriter(const std::string& path, const std::string& kind, const std::vector<std::string>& columns)
    : impl_(std::make_unique<Impl>()) {
    impl_->path = path;
    impl_->width = columns.size();
    impl_->out.open(path, std::ios::binary);
    if (!impl_->out) throw CsvError("cannot write '" + path + "'");
    impl_->out << header_line(kind) << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c) impl_->out << (c ? "," : "") << columns[c];
    impl_->out << '\n';
}

CsvWriter::~CsvWriter() = default;

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(std::int64_t v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(std::uint64_t v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& v) {
    if (impl_->filled == impl_->width) throw CsvError(impl_->path + ": too many cells in row");
    impl_->out << (impl_->filled ? "," : "") << v;
    ++impl_->filled;
    return *this;
}

void CsvWriter::end_row() {
    if (impl_->filled != impl_->width) throw CsvError(impl_->path + ": row has too few cells");
    impl_->out << '\n';
    impl_->filled = 0;
}

void CsvWriter::close() {
    impl_->out.close();
    if (!impl_->out) throw CsvError("failed writing '" + impl_->path + "'");
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw CsvError("no column '" + name + "' in " + kind + " table");
    return static_cast<std::size_t>(it - columns.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& text = rows.at(row).at(column(name));
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw CsvError("non-numeric cell '" + text + "' in column " + name);
    }
    return v;
}

CsvTable read_csv(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw CsvError(path + ": empty file");
    const std::string prefix = "# l2lab-csv v";
    if (line.rfind(prefix, 0) != 0) throw CsvError(path + ": missing version header");
    std::istringstream header(line.substr(prefix.size()));
    int version = 0;
    std::string kind;
    header >> version >> kind;
    if (version != kCsvVersion) {
        throw CsvError(path + ": unsupported CSV version " + std::to_string(version) + " (expected " +
                       std::to_string(kCsvVersion) + ")");
    }
    if (kind != expected_kind) throw CsvError(path + ": expected a " + expected_kind + " table, found " + kind);

    CsvTable table;
    table.kind = kind;
    if (!std::getline(in, line)) throw CsvError(path + ": missing column header");
    table.columns = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != table.columns.size()) throw CsvError(path + ": ragged row");
        table.rows.push_back(std::move(cells));
    }
    return table;
}

void write_solution_csv(const std::string& path, const MdpSolution& s) {
    CsvWriter w(path, "solution", {"q", "price_index", "price", "value", "action"});
    for (int q = 0; q <= s.q_max; ++q) {
        for (std::size_t i = 0; i < s.n_price(); ++i) {
            w.cell(q).cell(static_cast<std::int64_t>(i)).cell(s.prices[i]).cell(s.value_at(q, i));
            w.cell(std::string(s.action_at(q, i) == Action::post_all ? "post_all" : "hold"));
            w.end_row();
        }
    }
    w.close();
}

void write_thresholds_csv(const std::string& path, const MdpSolution& s) {
    CsvWriter w(path, "thresholds", {"price_index", "price", "q_star"});
    for (std::size_t i = 0; i < s.n_price(); ++i) {
        w.cell(static_cast<std::int64_t>(i)).cell(s.prices[i]).cell(s.thresholds[i]);
        w.end_row();
    }
    w.close();
}

void write_pnl_csv(const std::string& path, const std::vector<PnlEstimate>& curve) {
    CsvWriter w(path, "pnl", {"fee", "revenue", "cost", "pnl", "std_err"});
    for (const auto& p : curve) {
        w.cell(p.fee).cell(p.revenue).cell(p.expected_cost).cell(p.pnl).cell(p.std_err);
        w.end_row();
    }
    w.close();
}

void write_trajectory_csv(const std::string& path, const Trajectory& t) {
    CsvWriter w(path, "trajectory",
                {"update_index", "block_index", "delta", "g", "f_last", "p_last", "x_obs", "y_obs", "tau", "i", "j",
                 "i_frac", "j_frac"});
    for (const auto& r : t.records) {
        w.cell(r.update_index).cell(r.block_index).cell(r.delta).cell(r.g).cell(r.f_last).cell(r.p_last);
        w.cell(r.x_obs).cell(r.y_obs).cell(r.tau).cell(r.i).cell(r.j).cell(r.i_frac).cell(r.j_frac);
        w.end_row();
    }
    w.close();
}

void write_summary_csv(const std::string& path, const std::vector<Trajectory>& trajectories) {
    CsvWriter w(path, "summary",
                {"replica", "final_f", "final_p", "final_g", "i_frac", "j_frac", "mean_queue", "total_compensation",
                 "blocks", "total_arrivals", "total_posted", "final_queue", "forced_closes"});
    for (const auto& t : trajectories) {
        const auto& s = t.summary;
        w.cell(s.replica).cell(s.final_f).cell(s.final_p).cell(s.final_g).cell(s.i_frac).cell(s.j_frac);
        w.cell(s.mean_queue).cell(s.total_compensation).cell(s.blocks).cell(s.total_arrivals).cell(s.total_posted);
        w.cell(s.final_queue).cell(s.forced_closes);
        w.end_row();
    }
    w.close();
}

void write_switch_matrix_csv(const std::string& path, const SwitchMatrix& m) {
    const auto [pi_f, pi_p] = stationary_split(m);
    CsvWriter w(path, "switch_matrix", {"p00", "p01", "p10", "p11", "pi_f", "pi_p"});
    w.cell(m.p00).cell(m.p01).cell(m.p10).cell(m.p11).cell(pi_f).cell(pi_p);
    w.end_row();
    w.close();
}

void write_kappa_csv(const std::string& path, const std::vector<KappaRow>& rows) {
    CsvWriter w(path, "kappa_sweep", {"kappa", "p00", "p01", "p10", "p11", "pi_f", "pi_p", "minority_proportion"});
    for (const auto& r : rows) {
        w.cell(r.kappa).cell(r.matrix.p00).cell(r.matrix.p01).cell(r.matrix.p10).cell(r.matrix.p11);
        w.cell(r.pi_f).cell(r.pi_p).cell(r.minority);
        w.end_row();
    }
    w.close();
}

}  // namespace l2lab
