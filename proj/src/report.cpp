#include "neuron_margins/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "neuron_margins/common.hpp"
#include "neuron_margins/csv.hpp"

namespace neuron_margins {

namespace {

// 0 -> "0", 0.2 -> "20", 0.125 -> "12.5"
std::string percent_label(double fraction) {
    double v = fraction * 100.0;
    double r = std::round(v);
    if (std::abs(v - r) < 1e-9) return std::to_string(static_cast<long long>(r));
    return csv::format_double(v);
}

std::string fmt_p(double p) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", p);
    return buf;
}

std::string fmt_stat(double v) {
    double r = std::round(v);
    if (std::abs(v - r) < 1e-9) return std::to_string(static_cast<long long>(r));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

Rate parse_rate_cell(const std::string& cell, const std::string& path, std::size_t line) {
    if (cell == "n/a" || cell.empty()) return Rate{};
    std::int64_t digits = 0;
    std::int64_t scale = 1;
    bool seen_dot = false;
    std::size_t digit_count = 0;
    for (char c : cell) {
        if (c == '.') {
            if (seen_dot) throw ParseError(path, line, "bad rate cell \"" + cell + "\"");
            seen_dot = true;
            continue;
        }
        if (c < '0' || c > '9')
            throw ParseError(path, line, "bad rate cell \"" + cell + "\"");
        if (++digit_count > 12) throw ParseError(path, line, "rate cell too long: " + cell);
        digits = digits * 10 + (c - '0');
        if (seen_dot) scale *= 10;
    }
    if (digit_count == 0) throw ParseError(path, line, "bad rate cell \"" + cell + "\"");
    // percent p = digits/scale; stored as rate num/den with 100*num/den = p
    Rate rate{digits, scale * 100};
    if (rate.num > rate.den)
        throw ParseError(path, line, "rate above 100%: " + cell);
    return rate;
}

std::vector<std::size_t> parse_neuron_key(const std::string& key, const std::string& path,
                                          std::size_t line) {
    std::vector<std::size_t> neurons;
    std::size_t start = 0;
    while (start <= key.size()) {
        std::size_t plus = key.find('+', start);
        std::string part = key.substr(start, plus == std::string::npos ? plus : plus - start);
        long long n = csv::parse_int(part, path, line);
        if (n < 0) throw ParseError(path, line, "negative neuron index in \"" + key + "\"");
        neurons.push_back(static_cast<std::size_t>(n));
        if (plus == std::string::npos) break;
        start = plus + 1;
    }
    if (neurons.empty() || !std::is_sorted(neurons.begin(), neurons.end()) ||
        std::adjacent_find(neurons.begin(), neurons.end()) != neurons.end())
        throw ParseError(path, line, "neuron list \"" + key + "\" must be sorted and unique");
    return neurons;
}

// a < b on exact rationals (defined rates only)
bool rate_less(const Rate& a, const Rate& b) { return a.num * b.den < b.num * a.den; }

}  // namespace

std::string margin_table_to_csv(const MarginTable& table) {
    std::vector<std::string> header{"concept", "neurons", "target_n", "nontarget_n", "tla_gt0"};
    for (double f : table.fractions) header.push_back("non_tla_gt" + percent_label(f));
    std::string out = csv::join_row(header);
    for (const MarginRow& row : table.rows) {
        std::vector<std::string> cells{row.ensemble.concept_tag, row.ensemble.neuron_key(),
                                       std::to_string(row.target_count),
                                       std::to_string(row.nontarget_count),
                                       row.tla_at_zero.str3()};
        for (const Rate& r : row.non_tla) cells.push_back(r.str3());
        out += csv::join_row(cells);
    }
    return out;
}

std::string margin_table_to_markdown(const MarginTable& table) {
    std::string out = "| concept | neurons | target n | non-target n | TLA >0 |";
    std::string rule = "| --- | --- | --- | --- | --- |";
    for (double f : table.fractions) {
        std::string label = percent_label(f);
        out += " non-TLA >" + label + (label == "0" ? "" : "%") + " |";
        rule += " --- |";
    }
    out += "\n" + rule + "\n";
    for (const MarginRow& row : table.rows) {
        out += "| " + row.ensemble.concept_tag + " | " + row.ensemble.neuron_key() + " | " +
               std::to_string(row.target_count) + " | " + std::to_string(row.nontarget_count) +
               " | " + row.tla_at_zero.str3() + " |";
        for (const Rate& r : row.non_tla) out += " " + r.str3() + " |";
        out += "\n";
    }
    return out;
}

void save_margin_table(const MarginTable& table, const std::filesystem::path& path) {
    csv::write_file(path, margin_table_to_csv(table));
}

MarginTable load_margin_table(const std::filesystem::path& path) {
    csv::Table raw = csv::read_file(path);
    const std::vector<std::string>& h = raw.header.cells;
    std::vector<std::string> fixed{"concept", "neurons", "target_n", "nontarget_n", "tla_gt0"};
    if (h.size() < fixed.size() + 1 ||
        !std::equal(fixed.begin(), fixed.end(), h.begin()))
        throw ParseError(raw.path, raw.header.line,
                         "expected header concept,neurons,target_n,nontarget_n,tla_gt0,"
                         "non_tla_gt...");
    MarginTable table;
    for (std::size_t i = fixed.size(); i < h.size(); ++i) {
        const std::string prefix = "non_tla_gt";
        if (h[i].rfind(prefix, 0) != 0)
            throw ParseError(raw.path, raw.header.line, "unexpected column \"" + h[i] + "\"");
        double percent = csv::parse_double(h[i].substr(prefix.size()), raw.path, raw.header.line);
        table.fractions.push_back(percent / 100.0);
    }
    for (std::size_t i = 1; i < table.fractions.size(); ++i)
        if (!(table.fractions[i] > table.fractions[i - 1]))
            throw ParseError(raw.path, raw.header.line,
                             "non_tla columns must have increasing thresholds");

    for (const csv::Row& row : raw.rows) {
        if (row.cells.size() != h.size())
            throw ParseError(raw.path, row.line, "expected " + std::to_string(h.size()) + " cells");
        MarginRow out;
        out.ensemble.concept_tag = normalize_tag(row.cells[0]);
        out.ensemble.neurons = parse_neuron_key(row.cells[1], raw.path, row.line);
        long long tn = csv::parse_int(row.cells[2], raw.path, row.line);
        long long nn = csv::parse_int(row.cells[3], raw.path, row.line);
        if (tn < 0 || nn < 0) throw ParseError(raw.path, row.line, "negative counts");
        out.target_count = tn;
        out.nontarget_count = nn;
        out.tla_at_zero = parse_rate_cell(row.cells[4], raw.path, row.line);
        for (std::size_t i = 5; i < row.cells.size(); ++i)
            out.non_tla.push_back(parse_rate_cell(row.cells[i], raw.path, row.line));
        out.evaluable = out.tla_at_zero.defined() ||
                        std::any_of(out.non_tla.begin(), out.non_tla.end(),
                                    [](const Rate& r) { return r.defined(); });
        table.rows.push_back(std::move(out));
    }
    return table;
}

std::vector<AuditViolation> audit_margin_table(const MarginTable& table) {
    std::vector<AuditViolation> violations;
    auto add = [&](std::string msg) { violations.push_back(AuditViolation{std::move(msg)}); };

    std::set<std::pair<std::string, std::vector<std::size_t>>> seen;
    for (const MarginRow& row : table.rows) {
        std::string label = row.ensemble.concept_tag + " [" + row.ensemble.neuron_key() + "]";
        if (!seen.emplace(row.ensemble.concept_tag, row.ensemble.neurons).second)
            add("duplicate row " + label);
        if (row.tla_at_zero.defined() &&
            (row.tla_at_zero.num < 0 || row.tla_at_zero.num > row.tla_at_zero.den))
            add(label + ": TLA outside [0, 100]");
        for (std::size_t i = 0; i < row.non_tla.size(); ++i) {
            const Rate& r = row.non_tla[i];
            if (!r.defined()) continue;
            if (r.num < 0 || r.num > r.den) add(label + ": non-TLA outside [0, 100]");
            if (i > 0 && row.non_tla[i - 1].defined() &&
                rate_less(row.non_tla[i - 1], r))
                add(label + ": non-TLA rises from " + row.non_tla[i - 1].str3() + " to " +
                    r.str3() + " with the threshold");
        }
    }

    // subset bound on non-TLA: adding members can only shrink the
    // activating image set
    for (const MarginRow& small : table.rows) {
        for (const MarginRow& big : table.rows) {
            if (small.ensemble.concept_tag != big.ensemble.concept_tag) continue;
            if (big.ensemble.neurons.size() <= small.ensemble.neurons.size()) continue;
            if (!std::includes(big.ensemble.neurons.begin(), big.ensemble.neurons.end(),
                               small.ensemble.neurons.begin(), small.ensemble.neurons.end()))
                continue;
            for (std::size_t i = 0; i < std::min(small.non_tla.size(), big.non_tla.size()); ++i) {
                if (!small.non_tla[i].defined() || !big.non_tla[i].defined()) continue;
                if (rate_less(small.non_tla[i], big.non_tla[i]))
                    add(big.ensemble.concept_tag + ": ensemble [" + big.ensemble.neuron_key() +
                        "] non-TLA " + big.non_tla[i].str3() + " exceeds subset [" +
                        small.ensemble.neuron_key() + "] " + small.non_tla[i].str3() +
                        " at threshold index " + std::to_string(i));
            }
        }
    }
    return violations;
}

std::string comparison_to_csv(const MarginTable& calib, const MarginTable& eval) {
    if (calib.rows.size() != eval.rows.size())
        throw ValidationError("comparison needs row-aligned margin tables");
    std::vector<std::string> header{"concept", "neurons"};
    for (double f : calib.fractions) {
        header.push_back("calib_non_tla_gt" + percent_label(f));
        header.push_back("eval_non_tla_gt" + percent_label(f));
    }
    std::string out = csv::join_row(header);
    for (std::size_t i = 0; i < calib.rows.size(); ++i) {
        const MarginRow& c = calib.rows[i];
        const MarginRow& e = eval.rows[i];
        std::vector<std::string> cells{c.ensemble.concept_tag, c.ensemble.neuron_key()};
        for (std::size_t fi = 0; fi < calib.fractions.size(); ++fi) {
            cells.push_back(c.non_tla[fi].str3());
            cells.push_back(e.evaluable ? e.non_tla[fi].str3() : "n/a");
        }
        out += csv::join_row(cells);
    }
    return out;
}

std::string hypotheses_to_csv(const HypothesisReport& report) {
    std::string out = csv::join_row({"concept", "neurons", "fraction", "calib_non_tla",
                                     "eval_non_tla", "u", "z", "p", "method", "n_calib",
                                     "n_eval", "rejected", "confirmed"});
    for (const HypothesisRow& row : report.rows) {
        Ensemble e{row.concept_tag, row.neurons};
        out += csv::join_row(
            {row.concept_tag, e.neuron_key(), csv::format_double(row.fraction),
             row.calib_rate.str3(), row.eval_rate.str3(), fmt_stat(row.mwu.statistic),
             row.mwu.method == Method::normal_approx ? fmt_p(row.mwu.z) : "",
             fmt_p(row.mwu.p_value), to_string(row.mwu.method), std::to_string(row.mwu.n.n1),
             std::to_string(row.mwu.n.n2), row.mwu.rejected ? "true" : "false",
             row.confirmed ? "true" : "false"});
    }
    return out;
}

std::string summary_to_markdown(const HypothesisReport& report) {
    std::string out = "# validation summary\n\n";
    out += "- alpha: " + csv::format_double(report.alpha) + "\n";
    out += std::string("- sample construction: ") +
           (report.raw_samples ? "raw normalized activations" : "binary activation indicators") +
           "\n";
    out += "- zero policy (signed-rank): " + to_string(report.zero_policy) + "\n";
    out += std::string("- multiple-comparison correction: ") +
           (report.holm ? "holm-bonferroni" : "none") + "\n\n";

    out += "hypotheses tested: " + std::to_string(report.total_hypotheses) + "\n";
    out += "hypotheses rejected: " + std::to_string(report.total_rejected) + "\n\n";

    out += "| threshold | tested | rejected | signed-rank n | signed-rank p | decision |\n";
    out += "| --- | --- | --- | --- | --- | --- |\n";
    for (const FractionSummary& s : report.fractions) {
        std::string label = ">" + percent_label(s.fraction) +
                            (percent_label(s.fraction) == "0" ? "" : "%");
        out += "| " + label + " | " + std::to_string(s.tested) + " | " +
               std::to_string(s.rejected) + " | ";
        if (s.wilcoxon_applicable) {
            out += std::to_string(s.wilcoxon.n.n1) + " | " + fmt_p(s.wilcoxon.p_value) + " | " +
                   (s.wilcoxon.degenerate ? "degenerate"
                                          : (s.wilcoxon.rejected ? "reject" : "fail to reject")) +
                   " |\n";
        } else {
            out += "n/a | n/a | not applicable |\n";
        }
    }
    out += "\n";
    if (report.pooled_applicable) {
        out += "pooled signed-rank over " + std::to_string(report.pooled.n.n1) +
               " confirmed pairs: W+ = " + fmt_stat(report.pooled.statistic) +
               ", p = " + fmt_p(report.pooled.p_value) + " (" + to_string(report.pooled.method) +
               "), " + (report.pooled.rejected ? "reject" : "fail to reject") + "\n";
    } else {
        out += "pooled signed-rank: not applicable (no confirmed hypotheses)\n";
    }
    out += "\n";
    if (report.not_evaluable.empty()) {
        out += "not evaluable: none\n";
    } else {
        out += "not evaluable:\n";
        for (const std::string& label : report.not_evaluable) out += "- " + label + "\n";
    }
    return out;
}

std::string format_test_result(const TestResult& result, const std::string& title) {
    std::string out = title + "\n";
    bool signed_rank = result.n.n2 == 0;
    if (signed_rank) {
        out += "  pairs: " + std::to_string(result.n.n1) + " (" + std::to_string(result.n.zeros) +
               " zero difference(s), " + std::to_string(result.n.used) + " used)\n";
        out += "  zero policy: " + to_string(result.zero_policy) + "\n";
    } else {
        out += "  n: a = " + std::to_string(result.n.n1) + ", b = " + std::to_string(result.n.n2) +
               "\n";
    }
    out += "  alternative: " + to_string(result.alternative) + "\n";
    out += "  method: " + to_string(result.method);
    if (result.method == Method::normal_approx)
        out += " (tie-corrected, continuity-corrected)";
    out += "\n";
    out += std::string("  ") + (signed_rank ? "W+" : "U") + " = " + fmt_stat(result.statistic) +
           "\n";
    if (result.method == Method::normal_approx && !result.degenerate)
        out += "  z = " + fmt_p(result.z) + "\n";
    out += "  p = " + fmt_p(result.p_value);
    if (result.exact_p.defined())
        out += " (= " + std::to_string(result.exact_p.num) + "/" +
               std::to_string(result.exact_p.den) + ")";
    out += "\n";
    if (result.degenerate) out += "  degenerate input (zero variance); p forced to 1\n";
    out += "  rejected at alpha " + csv::format_double(result.alpha) + ": " +
           (result.rejected ? "yes" : "no") + "\n";
    return out;
}

}  // namespace neuron_margins
