#include "neuron_margins/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neuron_margins/common.hpp"
#include "neuron_margins/csv.hpp"

namespace neuron_margins {

std::string to_string(Alternative a) {
    switch (a) {
        case Alternative::greater: return "greater";
        case Alternative::less: return "less";
        case Alternative::two_sided: return "two-sided";
    }
    return "?";
}

std::string to_string(Method m) {
    return m == Method::exact ? "exact" : "normal-approx";
}

std::string to_string(ZeroPolicy z) {
    return z == ZeroPolicy::wilcoxon ? "wilcoxon" : "pratt";
}

Alternative alternative_from_string(const std::string& s) {
    if (s == "greater") return Alternative::greater;
    if (s == "less") return Alternative::less;
    if (s == "two-sided" || s == "two_sided") return Alternative::two_sided;
    throw ValidationError("unknown alternative \"" + s + "\" (greater|less|two-sided)");
}

ZeroPolicy zero_policy_from_string(const std::string& s) {
    if (s == "wilcoxon") return ZeroPolicy::wilcoxon;
    if (s == "pratt") return ZeroPolicy::pratt;
    throw ValidationError("unknown zero policy \"" + s + "\" (wilcoxon|pratt)");
}

MethodChoice method_choice_from_string(const std::string& s) {
    if (s == "auto" || s == "automatic") return MethodChoice::automatic;
    if (s == "exact") return MethodChoice::exact;
    if (s == "normal") return MethodChoice::normal;
    throw ValidationError("unknown method \"" + s + "\" (auto|exact|normal)");
}

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void require_finite(const std::vector<double>& values, const char* what) {
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError(std::string(what) + " contains a non-finite value");
}

// Sum of (t^3 - t) over tie groups of a sorted value list.
double tie_correction_sum(std::vector<double> sorted_values) {
    double sum = 0.0;
    std::size_t i = 0;
    while (i < sorted_values.size()) {
        std::size_t j = i;
        while (j < sorted_values.size() && sorted_values[j] == sorted_values[i]) ++j;
        double t = static_cast<double>(j - i);
        sum += t * t * t - t;
        i = j;
    }
    return sum;
}

bool choose_fits_u64(std::size_t n, std::size_t k, std::uint64_t& out) {
    if (k > n) return false;
    k = std::min(k, n - k);
    unsigned __int128 c = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > static_cast<unsigned __int128>(UINT64_MAX)) return false;
    }
    out = static_cast<std::uint64_t>(c);
    return true;
}

ExactP reduce(std::uint64_t num, std::uint64_t den) {
    std::uint64_t g = std::gcd(num == 0 ? den : num, den);
    return ExactP{num / g, den / g};
}

ExactP two_sided_exact(std::uint64_t n_le, std::uint64_t n_ge, std::uint64_t den) {
    std::uint64_t tail = std::min(n_le, n_ge);
    std::uint64_t num = tail > den / 2 ? den : 2 * tail;  // cap at 1 without overflow
    return reduce(std::min(num, den), den);
}

}  // namespace

std::vector<double> rank_with_ties(const std::vector<double>& values) {
    require_finite(values, "rank input");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        // positions i..j-1 share the average of ranks i+1..j
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                          Alternative alternative, double alpha, MethodChoice method) {
    if (a.empty() || b.empty())
        throw ValidationError("mann-whitney needs at least one value per sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");

    std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    std::vector<double> pooled;
    pooled.reserve(n);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> ranks = rank_with_ties(pooled);

    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < n1; ++i) rank_sum_a += ranks[i];
    double u_a = rank_sum_a - static_cast<double>(n1) * (n1 + 1) / 2.0;

    std::vector<double> sorted_pooled = pooled;
    std::sort(sorted_pooled.begin(), sorted_pooled.end());
    double tie_sum = tie_correction_sum(std::move(sorted_pooled));
    bool tie_free = tie_sum == 0.0;

    std::size_t m = std::min(n1, n2);
    std::uint64_t total_arrangements = 0;
    bool exact_ok = tie_free && m <= 25 && n <= 200 && choose_fits_u64(n, m, total_arrangements);

    bool use_exact;
    if (method == MethodChoice::exact) {
        if (!exact_ok)
            throw ValidationError(
                std::string("exact mann-whitney unavailable: ") +
                (!tie_free ? "samples contain ties"
                           : "sample sizes exceed the exact-enumeration bounds"));
        use_exact = true;
    } else {
        use_exact = method == MethodChoice::automatic && exact_ok;
    }

    TestResult result;
    result.statistic = u_a;
    result.alternative = alternative;
    result.alpha = alpha;
    result.n = SampleSizes{n1, n2, n, 0};

    if (use_exact) {
        // Count size-m subsets of ranks {1..n} by rank sum; run the DP on the
        // smaller sample and translate the tail through U_a + U_b = n1*n2.
        bool count_a = n1 <= n2;
        double rank_sum_counted = count_a
                                      ? rank_sum_a
                                      : static_cast<double>(n) * (n + 1) / 2.0 - rank_sum_a;
        long long observed = std::llround(rank_sum_counted);  // integral: tie-free ranks

        std::size_t max_sum = m * (2 * n - m + 1) / 2;
        std::vector<std::vector<std::uint64_t>> ways(
            m + 1, std::vector<std::uint64_t>(max_sum + 1, 0));
        ways[0][0] = 1;
        for (std::size_t r = 1; r <= n; ++r)
            for (std::size_t j = std::min(m, r); j >= 1; --j)
                for (std::size_t s = max_sum; s >= r; --s)
                    ways[j][s] += ways[j - 1][s - r];

        std::uint64_t n_le = 0, n_ge = 0, total = 0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            std::uint64_t w = ways[m][s];
            total += w;
            if (static_cast<long long>(s) <= observed) n_le += w;
            if (static_cast<long long>(s) >= observed) n_ge += w;
        }
        if (total != total_arrangements)
            throw ValidationError("internal: exact mann-whitney enumeration mismatch");

        // large U_a <=> large rank sum of a <=> SMALL rank sum of b
        std::uint64_t tail_greater = count_a ? n_ge : n_le;
        std::uint64_t tail_less = count_a ? n_le : n_ge;
        switch (alternative) {
            case Alternative::greater: result.exact_p = reduce(tail_greater, total); break;
            case Alternative::less: result.exact_p = reduce(tail_less, total); break;
            case Alternative::two_sided:
                result.exact_p = two_sided_exact(tail_less, tail_greater, total);
                break;
        }
        result.method = Method::exact;
        result.p_value = result.exact_p.value();
    } else {
        double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
        double nn = static_cast<double>(n);
        double sigma2 = (static_cast<double>(n1) * static_cast<double>(n2) / 12.0) *
                        ((nn + 1.0) - tie_sum / (nn * (nn - 1.0)));
        result.method = Method::normal_approx;
        if (sigma2 <= 0.0) {
            result.degenerate = true;
            result.p_value = 1.0;
            result.z = 0.0;
        } else {
            double sigma = std::sqrt(sigma2);
            switch (alternative) {
                case Alternative::greater:
                    result.z = (u_a - mu - 0.5) / sigma;
                    result.p_value = normal_sf(result.z);
                    break;
                case Alternative::less:
                    result.z = (u_a - mu + 0.5) / sigma;
                    result.p_value = normal_cdf(result.z);
                    break;
                case Alternative::two_sided: {
                    double shift = std::max(0.0, std::abs(u_a - mu) - 0.5);
                    result.z = (u_a >= mu ? shift : -shift) / sigma;
                    result.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(result.z)));
                    break;
                }
            }
        }
    }
    result.p_value = std::clamp(result.p_value, 0.0, 1.0);
    result.rejected = result.p_value < alpha;
    return result;
}

TestResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs,
                                Alternative alternative, double alpha, ZeroPolicy zero_policy,
                                MethodChoice method) {
    if (pairs.empty()) throw ValidationError("signed-rank test needs at least one pair");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");

    std::vector<double> diffs;
    diffs.reserve(pairs.size());
    for (const auto& [x, y] : pairs) {
        if (!std::isfinite(x) || !std::isfinite(y))
            throw ValidationError("pair contains a non-finite value");
        diffs.push_back(y - x);
    }

    std::size_t n_total = diffs.size();
    std::size_t n_zero = static_cast<std::size_t>(
        std::count(diffs.begin(), diffs.end(), 0.0));

    TestResult result;
    result.alternative = alternative;
    result.alpha = alpha;
    result.zero_policy = zero_policy;
    result.n = SampleSizes{n_total, 0, n_total - n_zero, n_zero};

    if (n_zero == n_total) {
        result.degenerate = true;
        result.p_value = 1.0;
        result.rejected = false;
        return result;
    }

    // ranks of |d|: over nonzero diffs only (wilcoxon) or over all diffs
    // with the zero ranks discarded afterwards (pratt)
    std::vector<double> used_diffs, used_ranks;
    if (zero_policy == ZeroPolicy::wilcoxon) {
        for (double d : diffs)
            if (d != 0.0) used_diffs.push_back(d);
        std::vector<double> abs_d;
        abs_d.reserve(used_diffs.size());
        for (double d : used_diffs) abs_d.push_back(std::abs(d));
        used_ranks = rank_with_ties(abs_d);
    } else {
        std::vector<double> abs_d;
        abs_d.reserve(diffs.size());
        for (double d : diffs) abs_d.push_back(std::abs(d));
        std::vector<double> all_ranks = rank_with_ties(abs_d);
        for (std::size_t i = 0; i < diffs.size(); ++i) {
            if (diffs[i] == 0.0) continue;
            used_diffs.push_back(diffs[i]);
            used_ranks.push_back(all_ranks[i]);
        }
    }

    double w_plus = 0.0;
    for (std::size_t i = 0; i < used_diffs.size(); ++i)
        if (used_diffs[i] > 0.0) w_plus += used_ranks[i];
    result.statistic = w_plus;

    std::size_t n_used = used_diffs.size();
    bool exact_ok = n_used >= 1 && n_used <= 25;
    bool use_exact;
    if (method == MethodChoice::exact) {
        if (!exact_ok)
            throw ValidationError("exact signed-rank unavailable: more than 25 nonzero pairs");
        use_exact = true;
    } else {
        use_exact = method == MethodChoice::automatic && exact_ok;
    }

    if (use_exact) {
        // Enumerate the 2^n sign assignments over the observed (possibly
        // tied) ranks; doubled ranks keep everything integral.
        std::vector<long long> doubled;
        doubled.reserve(n_used);
        long long max2 = 0;
        for (double r : used_ranks) {
            doubled.push_back(std::llround(2.0 * r));
            max2 += doubled.back();
        }
        std::vector<std::uint64_t> f(static_cast<std::size_t>(max2) + 1, 0);
        f[0] = 1;
        long long reached = 0;
        for (long long r2 : doubled) {
            reached += r2;
            for (long long s = reached; s >= r2; --s) f[s] += f[s - r2];
        }
        std::uint64_t den = std::uint64_t{1} << n_used;
        long long observed = std::llround(2.0 * w_plus);
        std::uint64_t n_le = 0, n_ge = 0;
        for (long long s = 0; s <= max2; ++s) {
            if (s <= observed) n_le += f[s];
            if (s >= observed) n_ge += f[s];
        }
        switch (alternative) {
            case Alternative::greater: result.exact_p = reduce(n_ge, den); break;
            case Alternative::less: result.exact_p = reduce(n_le, den); break;
            case Alternative::two_sided: result.exact_p = two_sided_exact(n_le, n_ge, den); break;
        }
        result.method = Method::exact;
        result.p_value = result.exact_p.value();
    } else {
        std::vector<double> sorted_ranks = used_ranks;
        std::sort(sorted_ranks.begin(), sorted_ranks.end());
        double tie_sum = tie_correction_sum(std::move(sorted_ranks));

        double mn, sigma2;
        if (zero_policy == ZeroPolicy::wilcoxon) {
            double nu = static_cast<double>(n_used);
            mn = nu * (nu + 1.0) / 4.0;
            sigma2 = nu * (nu + 1.0) * (2.0 * nu + 1.0) / 24.0 - tie_sum / 48.0;
        } else {
            double nt = static_cast<double>(n_total);
            double nz = static_cast<double>(n_zero);
            mn = (nt * (nt + 1.0) - nz * (nz + 1.0)) / 4.0;
            sigma2 = (nt * (nt + 1.0) * (2.0 * nt + 1.0) - nz * (nz + 1.0) * (2.0 * nz + 1.0)) /
                         24.0 -
                     tie_sum / 48.0;
        }
        result.method = Method::normal_approx;
        if (sigma2 <= 0.0) {
            result.degenerate = true;
            result.p_value = 1.0;
        } else {
            double sigma = std::sqrt(sigma2);
            switch (alternative) {
                case Alternative::greater:
                    result.z = (w_plus - mn - 0.5) / sigma;
                    result.p_value = normal_sf(result.z);
                    break;
                case Alternative::less:
                    result.z = (w_plus - mn + 0.5) / sigma;
                    result.p_value = normal_cdf(result.z);
                    break;
                case Alternative::two_sided: {
                    double shift = std::max(0.0, std::abs(w_plus - mn) - 0.5);
                    result.z = (w_plus >= mn ? shift : -shift) / sigma;
                    result.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(result.z)));
                    break;
                }
            }
        }
    }
    result.p_value = std::clamp(result.p_value, 0.0, 1.0);
    result.rejected = result.p_value < alpha;
    return result;
}

namespace {

std::vector<double> per_image_samples(const Ensemble& ensemble,
                                      const std::vector<std::string>& image_ids,
                                      const DatasetBundle& bundle,
                                      const ThresholdTable& thresholds, std::size_t fraction_idx,
                                      bool raw_samples) {
    std::vector<double> out;
    out.reserve(image_ids.size());
    for (const std::string& id : image_ids) {
        const std::vector<double>& act = bundle.activations.activations_for(id);
        if (raw_samples) {
            double v = std::numeric_limits<double>::infinity();
            for (std::size_t n : ensemble.neurons) {
                double max = thresholds.max_activation[n];
                v = std::min(v, max > 0.0 ? act[n] / max : 0.0);
            }
            out.push_back(v);
        } else {
            out.push_back(ensemble_activates(act, ensemble, thresholds, fraction_idx) ? 1.0 : 0.0);
        }
    }
    return out;
}

std::string row_label(const Ensemble& e) { return e.concept_tag + " [" + e.neuron_key() + "]"; }

void apply_holm(std::vector<HypothesisRow>& rows) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows[a].mwu.p_value < rows[b].mwu.p_value;
    });
    std::size_t m = rows.size();
    bool stopped = false;
    for (std::size_t k = 0; k < m; ++k) {
        HypothesisRow& row = rows[order[k]];
        if (!stopped && row.mwu.p_value < row.mwu.alpha / static_cast<double>(m - k)) {
            row.confirmed = true;
        } else {
            stopped = true;
            row.confirmed = false;
        }
    }
}

}  // namespace

HypothesisReport run_hypotheses(const MarginTable& calib, const MarginTable& eval,
                                const DatasetBundle& eval_bundle,
                                const DatasetBundle& calib_bundle, const AnalysisConfig& config,
                                const HypothesisOptions& opts) {
    config.validate();
    if (calib.rows.size() != eval.rows.size())
        throw ValidationError("calibration and evaluation margin tables are not row-aligned");

    ThresholdTable thresholds = compute_thresholds(calib_bundle.activations, config.thresholds);

    HypothesisReport report;
    report.alpha = config.alpha;
    report.raw_samples = opts.raw_samples;
    report.holm = opts.holm;
    report.zero_policy = opts.zero_policy;
    std::map<std::string, Partition> calib_parts, eval_parts;
    auto partition_of = [](std::map<std::string, Partition>& cache, const std::string& tag,
                           const DatasetBundle& bundle) -> const Partition& {
        auto it = cache.find(tag);
        if (it == cache.end()) it = cache.emplace(tag, partition_images(tag, bundle)).first;
        return it->second;
    };

    for (std::size_t i = 0; i < calib.rows.size(); ++i) {
        const MarginRow& crow = calib.rows[i];
        const MarginRow& erow = eval.rows[i];
        if (crow.ensemble.concept_tag != erow.ensemble.concept_tag ||
            crow.ensemble.neurons != erow.ensemble.neurons)
            throw ValidationError("margin tables disagree at row " + std::to_string(i));
        if (!erow.evaluable) {
            report.not_evaluable.push_back(row_label(crow.ensemble));
            continue;
        }
        const Partition& cp = partition_of(calib_parts, crow.ensemble.concept_tag, calib_bundle);
        const Partition& ep = partition_of(eval_parts, crow.ensemble.concept_tag, eval_bundle);
        for (std::size_t fi = 0; fi < calib.fractions.size(); ++fi) {
            std::vector<double> sample_calib = per_image_samples(
                crow.ensemble, cp.nontarget_ids, calib_bundle, thresholds, fi, opts.raw_samples);
            std::vector<double> sample_eval = per_image_samples(
                crow.ensemble, ep.nontarget_ids, eval_bundle, thresholds, fi, opts.raw_samples);

            HypothesisRow row;
            row.concept_tag = crow.ensemble.concept_tag;
            row.neurons = crow.ensemble.neurons;
            row.fraction = calib.fractions[fi];
            row.fraction_idx = fi;
            row.calib_rate = crow.non_tla[fi];
            row.eval_rate = erow.non_tla[fi];
            row.mwu = mann_whitney_u(sample_calib, sample_eval, Alternative::greater,
                                     config.alpha, opts.method);
            row.confirmed = row.mwu.rejected;
            report.rows.push_back(std::move(row));
        }
    }

    if (opts.holm) apply_holm(report.rows);

    std::vector<std::pair<double, double>> pooled_pairs;
    for (std::size_t fi = 0; fi < calib.fractions.size(); ++fi) {
        FractionSummary summary;
        summary.fraction = calib.fractions[fi];
        std::vector<std::pair<double, double>> confirmed_pairs;
        for (const HypothesisRow& row : report.rows) {
            if (row.fraction_idx != fi) continue;
            ++summary.tested;
            if (!row.confirmed) continue;
            ++summary.rejected;
            confirmed_pairs.emplace_back(row.calib_rate.percent(), row.eval_rate.percent());
        }
        if (!confirmed_pairs.empty()) {
            summary.wilcoxon_applicable = true;
            summary.wilcoxon = wilcoxon_signed_rank(confirmed_pairs, Alternative::less,
                                                    config.alpha, opts.zero_policy, opts.method);
            pooled_pairs.insert(pooled_pairs.end(), confirmed_pairs.begin(),
                                confirmed_pairs.end());
        }
        report.total_hypotheses += summary.tested;
        report.total_rejected += summary.rejected;
        report.fractions.push_back(std::move(summary));
    }
    if (!pooled_pairs.empty()) {
        report.pooled_applicable = true;
        report.pooled = wilcoxon_signed_rank(pooled_pairs, Alternative::less, config.alpha,
                                             opts.zero_policy, opts.method);
    }
    return report;
}

std::vector<LabeledPair> load_pairs(const std::filesystem::path& path) {
    csv::Table raw = csv::read_file(path);
    if (raw.header.cells != std::vector<std::string>{"concept", "google", "ade20k"})
        throw ParseError(raw.path, raw.header.line, "expected header concept,google,ade20k");
    if (raw.rows.empty()) throw ValidationError(raw.path + ": no data rows");
    std::vector<LabeledPair> pairs;
    pairs.reserve(raw.rows.size());
    for (const csv::Row& row : raw.rows) {
        if (row.cells.size() != 3) throw ParseError(raw.path, row.line, "expected 3 cells");
        pairs.push_back(LabeledPair{row.cells[0],
                                    csv::parse_double(row.cells[1], raw.path, row.line),
                                    csv::parse_double(row.cells[2], raw.path, row.line)});
    }
    return pairs;
}

TestResult wilcoxon_from_pairs(const std::filesystem::path& path, Alternative alternative,
                               double alpha, ZeroPolicy zero_policy, MethodChoice method) {
    std::vector<LabeledPair> labeled = load_pairs(path);
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(labeled.size());
    for (const LabeledPair& p : labeled) pairs.emplace_back(p.x, p.y);
    return wilcoxon_signed_rank(pairs, alternative, alpha, zero_policy, method);
}

GroupSamples load_group_samples(const std::filesystem::path& path) {
    csv::Table raw = csv::read_file(path);
    if (raw.header.cells != std::vector<std::string>{"group", "value"})
        throw ParseError(raw.path, raw.header.line, "expected header group,value");
    GroupSamples out;
    for (const csv::Row& row : raw.rows) {
        if (row.cells.size() != 2) throw ParseError(raw.path, row.line, "expected 2 cells");
        const std::string& g = row.cells[0];
        if (g.empty()) throw ParseError(raw.path, row.line, "empty group label");
        double v = csv::parse_double(row.cells[1], raw.path, row.line);
        if (out.label_a.empty() || g == out.label_a) {
            out.label_a = g;
            out.a.push_back(v);
        } else if (out.label_b.empty() || g == out.label_b) {
            out.label_b = g;
            out.b.push_back(v);
        } else {
            throw ValidationError(raw.path + ": more than two groups (saw \"" + out.label_a +
                                  "\", \"" + out.label_b + "\", \"" + g + "\")");
        }
    }
    if (out.a.empty() || out.b.empty())
        throw ValidationError(raw.path + ": need two non-empty groups");
    return out;
}

}  // namespace neuron_margins
