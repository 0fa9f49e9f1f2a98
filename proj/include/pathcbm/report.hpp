#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pathcbm/binio.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/harness.hpp"
#include "pathcbm/survival.hpp"
#include "pathcbm/table.hpp"

namespace pathcbm {

// Binary stores for analysis results, so stratification, fairness reports,
// and plot-data export can run as separate CLI steps without refitting.

inline constexpr char kSettingResultMagic[9] = "pcbmres1";
inline constexpr char kBenchmarkMagic[9] = "pcbmben1";
inline constexpr char kStratifyMagic[9] = "pcbmstr1";
inline constexpr char kFairnessMagic[9] = "pcbmfar1";

// Stratification results keep the subset of bundle samples they were
// computed on so later steps can re-attach outcomes and demographics.
struct StratifyStore {
    std::string setting;                       // slug of the risk model setting
    std::vector<std::size_t> sample_indices;   // into the bundle's sample order
    std::vector<std::string> patient_ids;      // same order as risks
    std::vector<double> risks;
    StratifyResult result;
};

namespace detail {

inline void write_u64(std::ostream& out, std::size_t v) {
    binio::write_pod<std::uint64_t>(out, v);
}

inline std::size_t read_u64(std::istream& in, const char* what) {
    return static_cast<std::size_t>(binio::read_pod<std::uint64_t>(in, what));
}

inline void write_size_vec(std::ostream& out, const std::vector<std::size_t>& v) {
    write_u64(out, v.size());
    for (std::size_t x : v) write_u64(out, x);
}

inline std::vector<std::size_t> read_size_vec(std::istream& in, const char* what) {
    std::vector<std::size_t> v(read_u64(in, what));
    for (auto& x : v) x = read_u64(in, what);
    return v;
}

inline void write_double_vec(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    binio::write_doubles(out, v);
}

inline std::vector<double> read_double_vec(std::istream& in, const char* what) {
    const std::size_t n = read_u64(in, what);
    std::vector<double> v;
    binio::read_doubles(in, v, n, what);
    return v;
}

inline void write_string_vec(std::ostream& out, const std::vector<std::string>& v) {
    write_u64(out, v.size());
    for (const auto& s : v) binio::write_string(out, s);
}

inline std::vector<std::string> read_string_vec(std::istream& in, const char* what) {
    std::vector<std::string> v(read_u64(in, what));
    for (auto& s : v) s = binio::read_string(in, what);
    return v;
}

inline void write_summary(std::ostream& out, const MetricSummary& s) {
    binio::write_pod<double>(out, s.mean);
    binio::write_pod<double>(out, s.stddev);
    write_u64(out, s.folds);
}

inline MetricSummary read_summary(std::istream& in) {
    MetricSummary s;
    s.mean = binio::read_pod<double>(in, "metric mean");
    s.stddev = binio::read_pod<double>(in, "metric stddev");
    s.folds = read_u64(in, "metric fold count");
    return s;
}

inline void write_km(std::ostream& out, const KmCurve& km) {
    write_u64(out, km.n);
    write_double_vec(out, km.times);
    write_double_vec(out, km.survival);
    write_size_vec(out, km.at_risk);
    write_size_vec(out, km.events);
}

inline KmCurve read_km(std::istream& in) {
    KmCurve km;
    km.n = read_u64(in, "km size");
    km.times = read_double_vec(in, "km times");
    km.survival = read_double_vec(in, "km survival");
    km.at_risk = read_size_vec(in, "km at-risk");
    km.events = read_size_vec(in, "km events");
    return km;
}

inline void write_logrank(std::ostream& out, const LogRankResult& r) {
    binio::write_pod<double>(out, r.chi_square);
    binio::write_pod<double>(out, r.p_value);
    write_u64(out, r.df);
    write_string_vec(out, r.group_names);
    write_double_vec(out, r.observed);
    write_double_vec(out, r.expected);
}

inline LogRankResult read_logrank(std::istream& in) {
    LogRankResult r;
    r.chi_square = binio::read_pod<double>(in, "log-rank statistic");
    r.p_value = binio::read_pod<double>(in, "log-rank p-value");
    r.df = read_u64(in, "log-rank df");
    r.group_names = read_string_vec(in, "log-rank group names");
    r.observed = read_double_vec(in, "log-rank observed");
    r.expected = read_double_vec(in, "log-rank expected");
    return r;
}

inline void write_cox(std::ostream& out, const CoxModel& model) {
    write_u64(out, model.beta.size());
    write_string_vec(out, model.feature_names);
    binio::write_doubles(out, model.beta);
    binio::write_pod<double>(out, model.ridge_lambda);
    binio::write_pod<double>(out, model.max_time);
    binio::write_pod<double>(out, model.log_likelihood);
    write_double_vec(out, model.baseline_cumhaz.times);
    write_double_vec(out, model.baseline_cumhaz.values);
}

inline CoxModel read_cox(std::istream& in) {
    CoxModel model;
    const std::size_t p = read_u64(in, "coefficient count");
    model.feature_names = read_string_vec(in, "feature names");
    binio::read_doubles(in, model.beta, p, "coefficients");
    model.ridge_lambda = binio::read_pod<double>(in, "lambda");
    model.max_time = binio::read_pod<double>(in, "max time");
    model.log_likelihood = binio::read_pod<double>(in, "log likelihood");
    model.baseline_cumhaz.times = read_double_vec(in, "baseline times");
    model.baseline_cumhaz.values = read_double_vec(in, "baseline values");
    model.baseline_cumhaz.initial = 0.0;
    return model;
}

inline void write_metric_row(std::ostream& out, const ConceptMetricRow& row) {
    binio::write_string(out, row.name);
    write_summary(out, row.acc);
    write_summary(out, row.f1);
    write_summary(out, row.auc);
    write_summary(out, row.ap);
}

inline ConceptMetricRow read_metric_row(std::istream& in) {
    ConceptMetricRow row;
    row.name = binio::read_string(in, "metric row name");
    row.acc = read_summary(in);
    row.f1 = read_summary(in);
    row.auc = read_summary(in);
    row.ap = read_summary(in);
    return row;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Setting results

inline void save_setting_result(const std::string& path, const SettingResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(kSettingResultMagic, 8);
    binio::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(result.setting));
    binio::write_pod<std::uint8_t>(out, result.ibs_applicable ? 1 : 0);
    detail::write_summary(out, result.cindex);
    detail::write_summary(out, result.cipcw);
    detail::write_summary(out, result.cauc);
    detail::write_summary(out, result.ibs);
    detail::write_u64(out, result.folds.size());
    for (const FoldOutcome& fo : result.folds) {
        detail::write_u64(out, fo.fold);
        detail::write_u64(out, fo.n_train);
        detail::write_u64(out, fo.n_test);
        detail::write_u64(out, fo.test_events);
        binio::write_pod<double>(out, fo.lambda);
        binio::write_pod<double>(out, fo.tau);
        binio::write_pod<double>(out, fo.cindex);
        binio::write_pod<double>(out, fo.cipcw);
        binio::write_pod<double>(out, fo.cauc);
        binio::write_pod<double>(out, fo.ibs);
        detail::write_double_vec(out, fo.beta);
        detail::write_string_vec(out, fo.feature_names);
        detail::write_size_vec(out, fo.test_indices);
        detail::write_double_vec(out, fo.test_risks);
        detail::write_double_vec(out, fo.auc_times);
        detail::write_double_vec(out, fo.auc_values);
    }
    detail::write_size_vec(out, result.dropped_folds);
    detail::write_string_vec(out, result.warnings);
    binio::write_pod<std::uint8_t>(out, result.has_full_model ? 1 : 0);
    if (result.has_full_model) detail::write_cox(out, result.full_model);
    out.close();
    if (!out) throw std::runtime_error("error writing '" + path + "'");
}

inline SettingResult load_setting_result(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    binio::check_magic(in, kSettingResultMagic, path);
    SettingResult result;
    const auto setting = binio::read_pod<std::uint8_t>(in, "setting id");
    if (setting > 3) throw ValidationError("'" + path + "': bad setting id");
    result.setting = static_cast<SurvivalSetting>(setting);
    result.ibs_applicable = binio::read_pod<std::uint8_t>(in, "ibs flag") != 0;
    result.cindex = detail::read_summary(in);
    result.cipcw = detail::read_summary(in);
    result.cauc = detail::read_summary(in);
    result.ibs = detail::read_summary(in);
    const std::size_t folds = detail::read_u64(in, "fold count");
    result.folds.resize(folds);
    for (FoldOutcome& fo : result.folds) {
        fo.fold = detail::read_u64(in, "fold index");
        fo.n_train = detail::read_u64(in, "train size");
        fo.n_test = detail::read_u64(in, "test size");
        fo.test_events = detail::read_u64(in, "test events");
        fo.lambda = binio::read_pod<double>(in, "fold lambda");
        fo.tau = binio::read_pod<double>(in, "fold tau");
        fo.cindex = binio::read_pod<double>(in, "fold c-index");
        fo.cipcw = binio::read_pod<double>(in, "fold c-ipcw");
        fo.cauc = binio::read_pod<double>(in, "fold c-auc");
        fo.ibs = binio::read_pod<double>(in, "fold ibs");
        fo.beta = detail::read_double_vec(in, "fold beta");
        fo.feature_names = detail::read_string_vec(in, "fold feature names");
        fo.test_indices = detail::read_size_vec(in, "fold test indices");
        fo.test_risks = detail::read_double_vec(in, "fold test risks");
        fo.auc_times = detail::read_double_vec(in, "fold auc times");
        fo.auc_values = detail::read_double_vec(in, "fold auc values");
    }
    result.dropped_folds = detail::read_size_vec(in, "dropped folds");
    result.warnings = detail::read_string_vec(in, "warnings");
    result.has_full_model = binio::read_pod<std::uint8_t>(in, "full model flag") != 0;
    if (result.has_full_model) result.full_model = detail::read_cox(in);
    return result;
}

// ---------------------------------------------------------------------------
// Concept benchmark

inline void save_benchmark(const std::string& path, const ConceptBenchmark& bench) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(kBenchmarkMagic, 8);
    detail::write_u64(out, bench.concepts.size());
    for (const auto& row : bench.concepts) detail::write_metric_row(out, row);
    detail::write_metric_row(out, bench.top10);
    detail::write_metric_row(out, bench.mean);
    detail::write_size_vec(out, bench.subtype_indices);
    detail::write_string_vec(out, bench.warnings);
    out.close();
    if (!out) throw std::runtime_error("error writing '" + path + "'");
}

inline ConceptBenchmark load_benchmark(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    binio::check_magic(in, kBenchmarkMagic, path);
    ConceptBenchmark bench;
    const std::size_t k = detail::read_u64(in, "concept count");
    bench.concepts.resize(k);
    for (auto& row : bench.concepts) row = detail::read_metric_row(in);
    bench.top10 = detail::read_metric_row(in);
    bench.mean = detail::read_metric_row(in);
    bench.subtype_indices = detail::read_size_vec(in, "subtype indices");
    bench.warnings = detail::read_string_vec(in, "warnings");
    return bench;
}

// ---------------------------------------------------------------------------
// Stratification + fairness stores

inline void save_stratify(const std::string& path, const StratifyStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(kStratifyMagic, 8);
    binio::write_string(out, store.setting);
    detail::write_size_vec(out, store.sample_indices);
    detail::write_string_vec(out, store.patient_ids);
    detail::write_double_vec(out, store.risks);
    binio::write_pod<double>(out, store.result.groups.threshold);
    detail::write_size_vec(out, store.result.groups.low);
    detail::write_size_vec(out, store.result.groups.high);
    detail::write_km(out, store.result.low_curve);
    detail::write_km(out, store.result.high_curve);
    binio::write_pod<std::uint8_t>(out, store.result.test_performed ? 1 : 0);
    detail::write_logrank(out, store.result.test);
    binio::write_string(out, store.result.note);
    out.close();
    if (!out) throw std::runtime_error("error writing '" + path + "'");
}

inline StratifyStore load_stratify(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    binio::check_magic(in, kStratifyMagic, path);
    StratifyStore store;
    store.setting = binio::read_string(in, "setting slug");
    store.sample_indices = detail::read_size_vec(in, "sample indices");
    store.patient_ids = detail::read_string_vec(in, "patient ids");
    store.risks = detail::read_double_vec(in, "risks");
    store.result.groups.threshold = binio::read_pod<double>(in, "threshold");
    store.result.groups.low = detail::read_size_vec(in, "low group");
    store.result.groups.high = detail::read_size_vec(in, "high group");
    store.result.low_curve = detail::read_km(in);
    store.result.high_curve = detail::read_km(in);
    store.result.test_performed = binio::read_pod<std::uint8_t>(in, "test flag") != 0;
    store.result.test = detail::read_logrank(in);
    store.result.note = binio::read_string(in, "note");
    return store;
}

inline void save_fairness(const std::string& path, const FairnessReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(kFairnessMagic, 8);
    binio::write_pod<std::uint8_t>(out, report.attribute == FairnessAttribute::Gender ? 0 : 1);
    detail::write_u64(out, report.min_group);
    detail::write_u64(out, report.strata.size());
    for (const FairnessStratum& s : report.strata) {
        binio::write_string(out, s.stratum);
        detail::write_u64(out, s.stratum_size);
        detail::write_u64(out, s.groups.size());
        for (const FairnessGroup& g : s.groups) {
            binio::write_string(out, g.name);
            detail::write_u64(out, g.size);
            detail::write_km(out, g.curve);
        }
        detail::write_u64(out, s.excluded.size());
        for (const ExcludedGroup& e : s.excluded) {
            binio::write_string(out, e.name);
            detail::write_u64(out, e.size);
            binio::write_string(out, e.reason);
        }
        binio::write_pod<std::uint8_t>(out, s.test_performed ? 1 : 0);
        detail::write_logrank(out, s.test);
        binio::write_string(out, s.note);
    }
    out.close();
    if (!out) throw std::runtime_error("error writing '" + path + "'");
}

inline FairnessReport load_fairness(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    binio::check_magic(in, kFairnessMagic, path);
    FairnessReport report;
    report.attribute = binio::read_pod<std::uint8_t>(in, "attribute") == 0
                           ? FairnessAttribute::Gender
                           : FairnessAttribute::Race;
    report.min_group = detail::read_u64(in, "min group");
    report.strata.resize(detail::read_u64(in, "stratum count"));
    for (FairnessStratum& s : report.strata) {
        s.stratum = binio::read_string(in, "stratum name");
        s.stratum_size = detail::read_u64(in, "stratum size");
        s.groups.resize(detail::read_u64(in, "group count"));
        for (FairnessGroup& g : s.groups) {
            g.name = binio::read_string(in, "group name");
            g.size = detail::read_u64(in, "group size");
            g.curve = detail::read_km(in);
        }
        s.excluded.resize(detail::read_u64(in, "excluded count"));
        for (ExcludedGroup& e : s.excluded) {
            e.name = binio::read_string(in, "excluded name");
            e.size = detail::read_u64(in, "excluded size");
            e.reason = binio::read_string(in, "excluded reason");
        }
        s.test_performed = binio::read_pod<std::uint8_t>(in, "test flag") != 0;
        s.test = detail::read_logrank(in);
        s.note = binio::read_string(in, "note");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Human-readable summaries

namespace detail {

inline std::string num_or_na(double v) { return std::isfinite(v) ? format_double(v) : "na"; }

inline std::string fixed_or_na(double v, int decimals) {
    return std::isfinite(v) ? format_fixed(v, decimals) : "N/A";
}

inline std::string summary_line(const std::string& label, const MetricSummary& s) {
    if (s.folds == 0) return label + ": N/A\n";
    return label + ": " + format_fixed(s.mean, 4) + " +/- " + format_fixed(s.stddev, 4) + " (" +
           std::to_string(s.folds) + " folds)\n";
}

}  // namespace detail

inline std::string render_setting_result(const SettingResult& result) {
    std::string text = "setting: " + to_string(result.setting) + "\n";
    text += "folds used: " + std::to_string(result.folds.size()) + " (dropped " +
            std::to_string(result.dropped_folds.size()) + ")\n";
    text += detail::summary_line("C-Index", result.cindex);
    text += detail::summary_line("C-IPCW ", result.cipcw);
    text += detail::summary_line("C-AUC  ", result.cauc);
    text += result.ibs_applicable ? detail::summary_line("IBS    ", result.ibs)
                                  : "IBS    : N/A (no survival function)\n";
    for (const FoldOutcome& fo : result.folds) {
        text += "  fold " + std::to_string(fo.fold) + ": n_test=" + std::to_string(fo.n_test) +
                " events=" + std::to_string(fo.test_events);
        if (std::isfinite(fo.lambda)) text += " lambda=" + format_double(fo.lambda);
        text += " tau=" + detail::num_or_na(fo.tau) +
                " C=" + detail::fixed_or_na(fo.cindex, 4) + "\n";
    }
    if (result.has_full_model) {
        text += "top risk factors (all-sample fit, lambda=" +
                format_double(result.full_model.ridge_lambda) + "):\n";
        for (const RiskFactor& rf : top_risk_factors(result.full_model)) {
            text += "  " + rf.name + ": " + format_fixed(rf.coefficient, 4) + "\n";
        }
    }
    for (const std::string& w : result.warnings) text += "warning: " + w + "\n";
    return text;
}

inline std::string render_benchmark(const ConceptBenchmark& bench) {
    std::string text = "concept benchmark (mean +/- std across folds)\n";
    auto line = [&](const ConceptMetricRow& row) {
        text += "  " + row.name + ": ACC " + detail::fixed_or_na(row.acc.mean, 4) + " F1 " +
                detail::fixed_or_na(row.f1.mean, 4) + " AUC " +
                detail::fixed_or_na(row.auc.mean, 4) + " +/- " +
                detail::fixed_or_na(row.auc.stddev, 4) + " AP " +
                detail::fixed_or_na(row.ap.mean, 4) + "\n";
    };
    for (const auto& row : bench.concepts) line(row);
    line(bench.top10);
    line(bench.mean);
    if (!bench.subtype_indices.empty()) {
        text += "subtype concepts:\n";
        for (std::size_t k : bench.subtype_indices) line(bench.concepts[k]);
    }
    for (const std::string& w : bench.warnings) text += "warning: " + w + "\n";
    return text;
}

inline std::string render_stratify(const StratifyStore& store) {
    std::string text = "risk stratification (setting: " + store.setting + ")\n";
    text += "threshold (mean risk): " + format_double(store.result.groups.threshold) + "\n";
    text += "low group: " + std::to_string(store.result.groups.low.size()) +
            ", high group: " + std::to_string(store.result.groups.high.size()) + "\n";
    if (store.result.test_performed) {
        text += "log-rank: chi2=" + format_fixed(store.result.test.chi_square, 4) +
                " df=" + std::to_string(store.result.test.df) +
                " p=" + format_double(store.result.test.p_value) + "\n";
    } else {
        text += "log-rank: not performed (" + store.result.note + ")\n";
    }
    return text;
}

inline std::string render_fairness(const FairnessReport& report) {
    std::string text = "fairness report by " + to_string(report.attribute) +
                       " (minimum group size " + std::to_string(report.min_group) + ")\n";
    for (const FairnessStratum& s : report.strata) {
        text += s.stratum + "-risk stratum (n=" + std::to_string(s.stratum_size) + "):\n";
        for (const FairnessGroup& g : s.groups)
            text += "  " + g.name + ": n=" + std::to_string(g.size) + "\n";
        for (const ExcludedGroup& e : s.excluded)
            text += "  excluded " + e.name + " (n=" + std::to_string(e.size) + "): " + e.reason +
                    "\n";
        if (s.test_performed)
            text += "  log-rank: chi2=" + format_fixed(s.test.chi_square, 4) +
                    " df=" + std::to_string(s.test.df) +
                    " p=" + format_double(s.test.p_value) + "\n";
        else if (!s.note.empty())
            text += "  log-rank: not performed (" + s.note + ")\n";
    }
    return text;
}

// ---------------------------------------------------------------------------
// Plot-data export

struct ExportInputs {
    const ConceptBenchmark* benchmark = nullptr;
    std::vector<const SettingResult*> settings;
    const StratifyStore* stratify = nullptr;
    std::vector<const FairnessReport*> fairness;
};

namespace detail {

inline void export_km_rows(TableWriter& out, const KmCurve& km, const std::string& group) {
    for (std::size_t i = 0; i < km.times.size(); ++i)
        out.row({format_double(km.times[i]), format_double(km.survival[i]),
                 std::to_string(km.at_risk[i]), std::to_string(km.events[i]), group});
}

inline void export_benchmark_rows(TableWriter& out, const ConceptMetricRow& row) {
    out.row({row.name, num_or_na(row.acc.mean), num_or_na(row.acc.stddev),
             num_or_na(row.f1.mean), num_or_na(row.f1.stddev), num_or_na(row.auc.mean),
             num_or_na(row.auc.stddev), num_or_na(row.ap.mean), num_or_na(row.ap.stddev),
             std::to_string(row.auc.folds)});
}

}  // namespace detail

// Writes delimited plot data for whatever results are present. Returns the
// file names written (relative to out_dir). Content is deterministic: the
// same results always produce the same bytes.
inline std::vector<std::string> export_plot_data(const ExportInputs& inputs,
                                                 const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    auto path_for = [&](const std::string& name) { return out_dir + "/" + name; };

    if (inputs.benchmark) {
        const ConceptBenchmark& bench = *inputs.benchmark;
        TableWriter out(path_for("concept_metrics.tsv"));
        out.comment("per-concept test metrics, mean and sample std across folds");
        out.comment("folds column counts folds where the AUC was defined");
        out.row({"concept", "acc", "acc_std", "f1", "f1_std", "auc", "auc_std", "ap", "ap_std",
                 "folds"});
        for (const auto& row : bench.concepts) detail::export_benchmark_rows(out, row);
        detail::export_benchmark_rows(out, bench.top10);
        detail::export_benchmark_rows(out, bench.mean);
        out.close();
        written.push_back("concept_metrics.tsv");

        TableWriter sub(path_for("concept_subtypes.tsv"));
        sub.comment("subtype concepts reported separately");
        sub.row({"concept", "acc", "acc_std", "f1", "f1_std", "auc", "auc_std", "ap", "ap_std",
                 "folds"});
        for (std::size_t k : bench.subtype_indices)
            detail::export_benchmark_rows(sub, bench.concepts[k]);
        sub.close();
        written.push_back("concept_subtypes.tsv");
    }

    for (const SettingResult* rp : inputs.settings) {
        if (!rp) continue;
        const SettingResult& result = *rp;
        const std::string slug = setting_slug(result.setting);

        {
            TableWriter out(path_for("survival_metrics_" + slug + ".tsv"));
            out.comment("setting: " + to_string(result.setting));
            out.comment("C-IPCW horizon tau = 90th percentile of each test fold's times;");
            out.comment("AUC/IBS grid = 32 points between the 10th and 90th percentiles");
            for (const FoldOutcome& fo : result.folds)
                out.comment("fold " + std::to_string(fo.fold) + ": tau=" +
                            detail::num_or_na(fo.tau) +
                            " lambda=" + detail::num_or_na(fo.lambda));
            out.row({"metric", "mean", "std", "folds"});
            auto metric_row = [&](const char* name, const MetricSummary& s, bool applicable) {
                if (!applicable) {
                    out.row({name, "na", "na", "0"});
                    return;
                }
                out.row({name, detail::num_or_na(s.mean), detail::num_or_na(s.stddev),
                         std::to_string(s.folds)});
            };
            metric_row("c_index", result.cindex, true);
            metric_row("c_ipcw", result.cipcw, true);
            metric_row("c_auc", result.cauc, true);
            metric_row("ibs", result.ibs, result.ibs_applicable);
            out.close();
            written.push_back("survival_metrics_" + slug + ".tsv");
        }
        {
            TableWriter out(path_for("auc_curve_" + slug + ".tsv"));
            out.comment("time-dependent cumulative/dynamic AUC; undefined grid points omitted");
            out.row({"fold", "time", "auc"});
            for (const FoldOutcome& fo : result.folds)
                for (std::size_t g = 0; g < fo.auc_times.size(); ++g)
                    out.row({std::to_string(fo.fold), format_double(fo.auc_times[g]),
                             format_double(fo.auc_values[g])});
            out.close();
            written.push_back("auc_curve_" + slug + ".tsv");
        }
        if (result.has_full_model) {
            TableWriter out(path_for("coefficients_" + slug + ".tsv"));
            out.comment("all-sample CoxPH coefficients ranked by magnitude;");
            out.comment("exactly-zero coefficients omitted");
            out.comment("lambda=" + format_double(result.full_model.ridge_lambda));
            out.row({"rank", "concept", "coefficient"});
            const auto factors =
                top_risk_factors(result.full_model, result.full_model.beta.size());
            for (std::size_t i = 0; i < factors.size(); ++i)
                out.row({std::to_string(i + 1), factors[i].name,
                         format_double(factors[i].coefficient)});
            out.close();
            written.push_back("coefficients_" + slug + ".tsv");
        }
    }

    if (inputs.stratify) {
        const StratifyStore& store = *inputs.stratify;
        {
            TableWriter out(path_for("km_risk_groups.tsv"));
            out.comment("Kaplan-Meier curves of mean-risk strata (setting: " + store.setting +
                        ")");
            out.row({"time", "survival", "at_risk", "events", "group"});
            detail::export_km_rows(out, store.result.low_curve, "low");
            detail::export_km_rows(out, store.result.high_curve, "high");
            out.close();
            written.push_back("km_risk_groups.tsv");
        }
        {
            TableWriter out(path_for("logrank_risk_groups.tsv"));
            out.comment("log-rank test between mean-risk strata");
            if (!store.result.test_performed && !store.result.note.empty())
                out.comment("not performed: " + store.result.note);
            out.row({"group", "n", "observed", "expected", "chi_square", "p_value", "df"});
            if (store.result.test_performed) {
                const LogRankResult& t = store.result.test;
                const std::size_t sizes[] = {store.result.groups.low.size(),
                                             store.result.groups.high.size()};
                for (std::size_t g = 0; g < t.group_names.size(); ++g)
                    out.row({t.group_names[g], std::to_string(sizes[g]),
                             format_double(t.observed[g]), format_double(t.expected[g]),
                             format_double(t.chi_square), format_double(t.p_value),
                             std::to_string(t.df)});
            }
            out.close();
            written.push_back("logrank_risk_groups.tsv");
        }
        {
            TableWriter out(path_for("risk_scores.tsv"));
            out.comment("out-of-fold risk scores; group split at the mean (" +
                        format_double(store.result.groups.threshold) + ")");
            out.row({"patient_id", "risk", "group"});
            std::vector<char> is_high(store.risks.size(), 0);
            for (std::size_t i : store.result.groups.high) is_high[i] = 1;
            for (std::size_t i = 0; i < store.risks.size(); ++i)
                out.row({store.patient_ids[i], format_double(store.risks[i]),
                         is_high[i] ? "high" : "low"});
            out.close();
            written.push_back("risk_scores.tsv");
        }
    }

    for (const FairnessReport* fp : inputs.fairness) {
        if (!fp) continue;
        const FairnessReport& report = *fp;
        const std::string attr = to_string(report.attribute);
        {
            TableWriter out(path_for("fairness_" + attr + ".tsv"));
            out.comment("per-stratum subgroup comparison by " + attr + "; minimum group size " +
                        std::to_string(report.min_group));
            out.row({"stratum", "group", "n", "included", "reason", "chi_square", "p_value",
                     "df"});
            for (const FairnessStratum& s : report.strata) {
                const std::string chi =
                    s.test_performed ? format_double(s.test.chi_square) : "na";
                const std::string p = s.test_performed ? format_double(s.test.p_value) : "na";
                const std::string df = s.test_performed ? std::to_string(s.test.df) : "na";
                for (const FairnessGroup& g : s.groups)
                    out.row({s.stratum, g.name, std::to_string(g.size), "yes", "", chi, p, df});
                for (const ExcludedGroup& e : s.excluded)
                    out.row({s.stratum, e.name, std::to_string(e.size), "no", e.reason, "na",
                             "na", "na"});
            }
            out.close();
            written.push_back("fairness_" + attr + ".tsv");
        }
        {
            TableWriter out(path_for("km_fairness_" + attr + ".tsv"));
            out.comment("Kaplan-Meier curves per risk stratum and " + attr + " subgroup");
            out.row({"time", "survival", "at_risk", "events", "group"});
            for (const FairnessStratum& s : report.strata)
                for (const FairnessGroup& g : s.groups)
                    detail::export_km_rows(out, g.curve, s.stratum + "/" + g.name);
            out.close();
            written.push_back("km_fairness_" + attr + ".tsv");
        }
    }
    return written;
}

}  // namespace pathcbm
