#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dfl/config.hpp"

namespace dfl {

inline constexpr const char* kRecordsHeader =
    "round,train_loss,grad_norm_z_sq,consensus,test_accuracy,psi_round,elapsed_ms";
inline constexpr const char* kSummaryFormat = "dfl-summary-v1";

/// Header plus one row per record; doubles at 17 significant digits, empty
/// cell for a missing test accuracy.
void write_records_csv(std::ostream& out, const std::vector<RoundRecord>& records);
std::vector<RoundRecord> read_records_csv(std::istream& in);
std::vector<RoundRecord> load_records_csv(const std::string& path);

/// {"format", "config" (fully resolved), "result"}; loadable by load_experiment.
json make_summary(const ExperimentConfig& cfg, const RunResult& result);

/// Resolves derived seeds so the stored config reproduces the run as is.
ExperimentConfig resolved(const ExperimentConfig& cfg);

/// Record-level summary used by `analyze`: final metrics, best gradient
/// norm, and the rate fit when there are enough records.
json analyze_records(const std::vector<RoundRecord>& records);

json to_json(const StabilityReport& rep);

/// Formats with 17 significant digits.
std::string format_double(double v);

}  // namespace dfl
