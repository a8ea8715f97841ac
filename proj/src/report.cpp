#include "dfl/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dfl/error.hpp"

namespace dfl {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_records_csv(std::ostream& out, const std::vector<RoundRecord>& records) {
  out << kRecordsHeader << '\n';
  for (const auto& r : records) {
    out << r.round << ',' << format_double(r.train_loss) << ',' << format_double(r.grad_norm_z_sq) << ','
        << format_double(r.consensus) << ',';
    if (r.test_accuracy) out << format_double(*r.test_accuracy);
    out << ',' << format_double(r.psi_round) << ',' << format_double(r.elapsed_ms) << '\n';
  }
}

namespace {

double parse_cell(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects "inf"/"nan" spellings produced by iostreams on some platforms.
    if (cell == "inf") return std::numeric_limits<double>::infinity();
    if (cell == "-inf") return -std::numeric_limits<double>::infinity();
    if (cell == "nan" || cell == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw DataError("records csv line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

}  // namespace

std::vector<RoundRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("records csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordsHeader) throw DataError("records csv header mismatch: '" + line + "'");
  std::vector<RoundRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) {
      throw DataError("records csv line " + std::to_string(lineno) + ": expected 7 cells, got " +
                      std::to_string(cells.size()));
    }
    RoundRecord r;
    const double round = parse_cell(cells[0], lineno);
    if (round < 0 || round != std::floor(round)) throw DataError("records csv: bad round on line " + std::to_string(lineno));
    r.round = static_cast<std::size_t>(round);
    r.train_loss = parse_cell(cells[1], lineno);
    r.grad_norm_z_sq = parse_cell(cells[2], lineno);
    r.consensus = parse_cell(cells[3], lineno);
    if (!cells[4].empty()) r.test_accuracy = parse_cell(cells[4], lineno);
    r.psi_round = parse_cell(cells[5], lineno);
    r.elapsed_ms = parse_cell(cells[6], lineno);
    out.push_back(r);
  }
  return out;
}

std::vector<RoundRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read records file '" + path + "'");
  return read_records_csv(in);
}

ExperimentConfig resolved(const ExperimentConfig& cfg) {
  ExperimentConfig out = cfg;
  out.run.topology = cfg.run.resolved_topology();
  return out;
}

namespace {

json record_json(const RoundRecord& r) {
  json j{{"round", r.round},
         {"train_loss", r.train_loss},
         {"grad_norm_z_sq", r.grad_norm_z_sq},
         {"consensus", r.consensus},
         {"psi_round", r.psi_round}};
  j["test_accuracy"] = r.test_accuracy ? json(*r.test_accuracy) : json(nullptr);
  return j;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json make_summary(const ExperimentConfig& cfg, const RunResult& result) {
  json res{{"rounds", result.records.empty() ? 0 : result.records.back().round},
           {"records", result.records.size()},
           {"disconnected_rounds", result.disconnected_rounds}};
  if (!result.records.empty()) res["final"] = record_json(result.records.back());
  if (cfg.run.verification_mode) {
    const auto& v = result.verification;
    res["verification"] = {{"mean_sequence", v.mean_sequence},
                           {"auxiliary_sequence", v.auxiliary_sequence},
                           {"virtual_sequence", v.virtual_sequence},
                           {"mean_after_mix", v.mean_after_mix},
                           {"rounds_checked", v.rounds_checked}};
  }
  return json{{"format", kSummaryFormat}, {"config", to_json(resolved(cfg))}, {"result", res}};
}

json analyze_records(const std::vector<RoundRecord>& records) {
  json j{{"records", records.size()}};
  if (records.empty()) return j;
  j["final"] = record_json(records.back());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) best = std::min(best, r.grad_norm_z_sq);
  j["best_grad_norm_z_sq"] = best;
  try {
    const double slope = rate_fit(records);
    j["rate_fit_slope"] = finite_or_null(slope);
    if (std::isinf(slope)) j["rate_fit_note"] = "converged to exactly zero";
  } catch (const DataError& e) {
    j["rate_fit_slope"] = nullptr;
    j["rate_fit_note"] = e.what();
  }
  return j;
}

json to_json(const StabilityReport& rep) {
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  return json{{"delta", rep.delta},
              {"sup_gap_xbar", rep.sup_gap_xbar},
              {"sup_gap_z", rep.sup_gap_z},
              {"tau0_round", opt(rep.tau0_round)},
              {"tau0_step", opt(rep.tau0_step)},
              {"tau0_iteration", opt(rep.tau0_iteration)},
              {"identical_before_tau0", rep.identical_before_tau0},
              {"U", rep.U},
              {"L_G", rep.L_G},
              {"L", rep.L},
              {"psi", rep.psi},
              {"mu", rep.mu},
              {"kappa_psi", opt(rep.kappa)},
              {"theorem_tau0", opt(rep.theorem_tau0)},
              {"probe_samples", rep.probe_samples}};
}

}  // namespace dfl
