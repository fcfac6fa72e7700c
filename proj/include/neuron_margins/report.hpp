#pragma once

#include <filesystem>
#include <string>

#include "neuron_margins/margins.hpp"
#include "neuron_margins/stats.hpp"

namespace neuron_margins {

// margins.csv layout:
//   concept,neurons,target_n,nontarget_n,tla_gt0,non_tla_gt0,...
// with one non_tla_gt<percent> column per fraction and neurons joined
// by '+' (e.g. 22+54+63). Percent cells carry exactly 3 decimals.
std::string margin_table_to_csv(const MarginTable& table);
std::string margin_table_to_markdown(const MarginTable& table);
void save_margin_table(const MarginTable& table, const std::filesystem::path& path);

// Parses the layout above. Loaded rates are scaled percents (e.g. 32.714
// -> 32714/100000); counts of 0 mark rows whose sample sizes are unknown
// (hand-transcribed tables).
MarginTable load_margin_table(const std::filesystem::path& path);

struct AuditViolation {
    std::string message;
};

// Structural audit of a margin table: Non-TLA monotone non-increasing
// across fractions per row, rates within [0, 100], the subset bound
// (a superset ensemble never out-rates a subset on Non-TLA), and
// (concept, neuron set) uniqueness.
std::vector<AuditViolation> audit_margin_table(const MarginTable& table);

// comparison.csv: per evaluable row, calibration vs evaluation Non-TLA
// side by side per fraction.
std::string comparison_to_csv(const MarginTable& calib, const MarginTable& eval);

// hypotheses.csv: one row per (concept, ensemble, fraction) MWU.
std::string hypotheses_to_csv(const HypothesisReport& report);

// summary.md: counts per fraction, per-fraction and pooled signed-rank
// results, and the non-evaluable list.
std::string summary_to_markdown(const HypothesisReport& report);

// Human-readable block for the standalone test runner (>= 4 significant
// digits on p; exact results also carry the rational tail count).
std::string format_test_result(const TestResult& result, const std::string& title);

}  // namespace neuron_margins
