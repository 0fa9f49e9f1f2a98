#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pathcbm/error.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/survival.hpp"

namespace pathcbm {

struct BinaryPredictionSet {
    std::vector<double> scores;
    std::vector<int> labels;  // 0/1
};

struct SurvivalEvalSet {
    std::vector<double> risks;
    std::vector<SurvivalRecord> records;
};

namespace detail {

inline void require_binary_inputs(const std::vector<int>& labels, const char* where) {
    for (int y : labels)
        if (y != 0 && y != 1) throw ValidationError(std::string(where) + ": labels must be 0/1");
}

inline void require_both_classes(const std::vector<int>& labels, const char* where) {
    bool pos = false, neg = false;
    for (int y : labels) (y == 1 ? pos : neg) = true;
    if (!pos || !neg)
        throw ValidationError(std::string(where) + ": needs both classes in the labels");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Classification metrics

// (sensitivity + specificity) / 2
inline double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("balanced_accuracy: length mismatch");
    detail::require_binary_inputs(preds, "balanced_accuracy");
    detail::require_binary_inputs(labels, "balanced_accuracy");
    detail::require_both_classes(labels, "balanced_accuracy");
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            (preds[i] == 1 ? tp : fn) += 1.0;
        else
            (preds[i] == 0 ? tn : fp) += 1.0;
    }
    return 0.5 * (tp / (tp + fn) + tn / (tn + fp));
}

// 2TP / (2TP + FP + FN); 0 when there are neither predicted nor true positives.
inline double f1_score(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size()) throw std::invalid_argument("f1_score: length mismatch");
    detail::require_binary_inputs(preds, "f1_score");
    detail::require_binary_inputs(labels, "f1_score");
    double tp = 0, fn = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1 && preds[i] == 1) tp += 1.0;
        if (labels[i] == 1 && preds[i] == 0) fn += 1.0;
        if (labels[i] == 0 && preds[i] == 1) fp += 1.0;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

// Mann-Whitney AUC with mid-rank tie handling.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
    detail::require_binary_inputs(labels, "roc_auc");
    detail::require_both_classes(labels, "roc_auc");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError("roc_auc: non-finite score");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t pos = 0;
    while (pos < n) {
        std::size_t end = pos;
        while (end < n && scores[order[end]] == scores[order[pos]]) ++end;
        const double mid_rank = 0.5 * static_cast<double>(pos + 1 + end);  // 1-based average
        for (std::size_t q = pos; q < end; ++q) {
            if (labels[order[q]] == 1) {
                rank_sum_pos += mid_rank;
                ++n_pos;
            }
        }
        pos = end;
    }
    const std::size_t n_neg = n - n_pos;
    return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Step-interpolated average precision; tied scores form one threshold group.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("average_precision: length mismatch");
    detail::require_binary_inputs(labels, "average_precision");
    std::size_t total_pos = 0;
    for (int y : labels) total_pos += y == 1 ? 1 : 0;
    if (total_pos == 0) throw ValidationError("average_precision: no positive labels");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError("average_precision: non-finite score");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    double tp = 0.0, fp = 0.0, prev_recall = 0.0;
    std::size_t pos = 0;
    while (pos < n) {
        std::size_t end = pos;
        while (end < n && scores[order[end]] == scores[order[pos]]) ++end;
        for (std::size_t q = pos; q < end; ++q) (labels[order[q]] == 1 ? tp : fp) += 1.0;
        const double recall = tp / static_cast<double>(total_pos);
        const double precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        pos = end;
    }
    return ap;
}

// Mean of the 10 (or fewer) best per-concept values and the overall mean;
// NaN entries mark concepts where the metric was undefined and are excluded.
struct ConceptSummary {
    double top_mean = std::numeric_limits<double>::quiet_NaN();
    double mean = std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    std::size_t excluded = 0;
};

inline ConceptSummary concept_summary(const std::vector<double>& per_concept) {
    ConceptSummary s;
    std::vector<double> vals;
    for (double v : per_concept) {
        if (std::isnan(v))
            ++s.excluded;
        else
            vals.push_back(v);
    }
    s.used = vals.size();
    if (vals.empty()) return s;
    std::sort(vals.begin(), vals.end(), std::greater<>());
    const std::size_t top = std::min<std::size_t>(10, vals.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < top; ++i) acc += vals[i];
    s.top_mean = acc / static_cast<double>(top);
    acc = 0.0;
    for (double v : vals) acc += v;
    s.mean = acc / static_cast<double>(vals.size());
    return s;
}

// ---------------------------------------------------------------------------
// Survival metrics

// Fraction of comparable pairs (earlier time had the event) where the higher
// risk got the earlier time; ties in risk score 1/2.
inline double harrell_cindex(const std::vector<double>& risks,
                             const std::vector<SurvivalRecord>& records) {
    const auto pairs = detail::concordance_pairs(risks, records);
    if (pairs.comparable == 0.0) throw ValidationError("harrell_cindex: no comparable pairs");
    return pairs.concordant / pairs.comparable;
}

inline constexpr double kIpcwClipFloor = 1e-4;

struct IpcwCindex {
    double value = 0.0;
    std::size_t clipped = 0;  // subjects whose G(t_i) hit the clip floor
};

// Uno's IPCW concordance: comparable pairs restricted to event times <= tau,
// each weighted by G(t_i)^-2 with G the training censoring Kaplan-Meier.
inline IpcwCindex uno_cindex_ipcw(const std::vector<double>& risks,
                                  const std::vector<SurvivalRecord>& train_records,
                                  const std::vector<SurvivalRecord>& test_records, double tau) {
    if (risks.size() != test_records.size())
        throw std::invalid_argument("uno_cindex_ipcw: length mismatch");
    if (!std::isfinite(tau) || tau <= 0.0) throw ValidationError("uno_cindex_ipcw: bad tau");
    const StepFunction g = censoring_km(train_records).step();

    const std::size_t n = test_records.size();
    IpcwCindex out;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!test_records[i].event || test_records[i].time > tau) continue;
        double gi = g(test_records[i].time);
        if (gi < kIpcwClipFloor) {
            gi = kIpcwClipFloor;
            ++out.clipped;
        }
        const double w = 1.0 / (gi * gi);
        for (std::size_t j = 0; j < n; ++j) {
            if (test_records[i].time >= test_records[j].time) continue;
            den += w;
            if (risks[i] > risks[j])
                num += w;
            else if (risks[i] == risks[j])
                num += 0.5 * w;
        }
    }
    if (den == 0.0)
        throw ValidationError("uno_cindex_ipcw: no comparable pairs with event time <= tau");
    out.value = num / den;
    return out;
}

struct DynamicAucResult {
    std::vector<double> times;
    std::vector<double> auc;  // NaN at excluded points
    double integrated = std::numeric_limits<double>::quiet_NaN();
    std::size_t excluded = 0;
    std::size_t clipped = 0;
};

// Cumulative/dynamic AUC: at each grid time t, cases are observed events with
// time <= t (IPCW-weighted), controls are subjects still beyond t. The
// integrated value averages the defined points weighted by the Kaplan-Meier
// event-distribution mass between them.
inline DynamicAucResult cumulative_dynamic_auc(const std::vector<double>& risks,
                                               const std::vector<SurvivalRecord>& train_records,
                                               const std::vector<SurvivalRecord>& test_records,
                                               const std::vector<double>& time_grid) {
    if (risks.size() != test_records.size())
        throw std::invalid_argument("cumulative_dynamic_auc: length mismatch");
    if (time_grid.empty()) throw ValidationError("cumulative_dynamic_auc: empty time grid");
    for (std::size_t i = 1; i < time_grid.size(); ++i)
        if (!(time_grid[i] > time_grid[i - 1]))
            throw ValidationError("cumulative_dynamic_auc: grid must be strictly increasing");

    const StepFunction g = censoring_km(train_records).step();
    const std::size_t n = test_records.size();

    DynamicAucResult out;
    out.times = time_grid;
    out.auc.assign(time_grid.size(), std::numeric_limits<double>::quiet_NaN());

    for (std::size_t ti = 0; ti < time_grid.size(); ++ti) {
        const double t = time_grid[ti];
        double num = 0.0, case_w = 0.0;
        std::size_t n_controls = 0;
        for (std::size_t j = 0; j < n; ++j) n_controls += test_records[j].time > t ? 1 : 0;
        std::size_t n_cases = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!test_records[i].event || test_records[i].time > t) continue;
            ++n_cases;
            double gi = g(test_records[i].time);
            if (gi < kIpcwClipFloor) {
                gi = kIpcwClipFloor;
                ++out.clipped;
            }
            const double w = 1.0 / gi;
            case_w += w;
            for (std::size_t j = 0; j < n; ++j) {
                if (test_records[j].time <= t) continue;
                if (risks[i] > risks[j])
                    num += w;
                else if (risks[i] == risks[j])
                    num += 0.5 * w;
            }
        }
        if (n_cases == 0 || n_controls == 0) {
            ++out.excluded;
            continue;
        }
        out.auc[ti] = num / (case_w * static_cast<double>(n_controls));
    }

    // integrated summary over the defined points, weighted by event mass
    const StepFunction s_km = km_fit(test_records).step();
    double weight_sum = 0.0, weighted = 0.0, plain = 0.0;
    std::size_t defined = 0;
    double prev_s = 1.0;
    for (std::size_t ti = 0; ti < time_grid.size(); ++ti) {
        if (std::isnan(out.auc[ti])) continue;
        const double s_here = s_km(time_grid[ti]);
        const double w = std::max(0.0, prev_s - s_here);
        prev_s = s_here;
        weight_sum += w;
        weighted += w * out.auc[ti];
        plain += out.auc[ti];
        ++defined;
    }
    if (defined > 0)
        out.integrated = weight_sum > 0.0 ? weighted / weight_sum
                                          : plain / static_cast<double>(defined);
    return out;
}

struct BrierResult {
    std::vector<double> times;
    std::vector<double> brier;
    double ibs = 0.0;
    std::size_t clipped = 0;
};

// Graf's censoring-weighted Brier score on the grid; IBS is the trapezoidal
// integral divided by the grid span. survival row i holds S(t|x_i) over the
// grid columns.
inline BrierResult integrated_brier_score(const DenseMatrix& survival,
                                          const std::vector<SurvivalRecord>& train_records,
                                          const std::vector<SurvivalRecord>& test_records,
                                          const std::vector<double>& time_grid) {
    const std::size_t n = test_records.size();
    if (survival.rows != n)
        throw std::invalid_argument("integrated_brier_score: survival rows != test records");
    if (survival.cols != time_grid.size())
        throw std::invalid_argument("integrated_brier_score: survival cols != grid size");
    if (time_grid.size() < 2)
        throw ValidationError("integrated_brier_score: need at least two grid points");
    for (std::size_t i = 1; i < time_grid.size(); ++i)
        if (!(time_grid[i] > time_grid[i - 1]))
            throw ValidationError("integrated_brier_score: grid must be strictly increasing");
    double max_time = 0.0;
    for (const auto& r : test_records) max_time = std::max(max_time, r.time);
    if (time_grid.front() < 0.0 || time_grid.back() > max_time)
        throw ValidationError("integrated_brier_score: grid outside observed time range");
    if (!survival.all_finite())
        throw ValidationError("integrated_brier_score: non-finite survival prediction");

    const StepFunction g = censoring_km(train_records).step();
    auto g_clipped = [&](double t, std::size_t* clip_count) {
        double v = g(t);
        if (v < kIpcwClipFloor) {
            v = kIpcwClipFloor;
            ++*clip_count;
        }
        return v;
    };

    BrierResult out;
    out.times = time_grid;
    out.brier.assign(time_grid.size(), 0.0);
    for (std::size_t ti = 0; ti < time_grid.size(); ++ti) {
        const double t = time_grid[ti];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s_hat = survival.at(i, ti);
            if (test_records[i].event && test_records[i].time <= t) {
                acc += s_hat * s_hat / g_clipped(test_records[i].time, &out.clipped);
            } else if (test_records[i].time > t) {
                acc += (1.0 - s_hat) * (1.0 - s_hat) / g_clipped(t, &out.clipped);
            }
            // censored at or before t: weight zero
        }
        out.brier[ti] = acc / static_cast<double>(n);
    }

    double integral = 0.0;
    for (std::size_t ti = 1; ti < time_grid.size(); ++ti)
        integral += 0.5 * (out.brier[ti] + out.brier[ti - 1]) * (time_grid[ti] - time_grid[ti - 1]);
    out.ibs = integral / (time_grid.back() - time_grid.front());
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation-window helpers

// Linear-interpolation percentile of the observed times (q in [0,1]).
inline double time_percentile(const std::vector<SurvivalRecord>& records, double q) {
    if (records.empty()) throw ValidationError("time_percentile: no records");
    std::vector<double> times;
    times.reserve(records.size());
    for (const auto& r : records) times.push_back(r.time);
    std::sort(times.begin(), times.end());
    const double h = q * static_cast<double>(times.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, times.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return times[lo] * (1.0 - frac) + times[hi] * frac;
}

// Default horizon for the IPCW concordance: 90th percentile of observed times.
inline double default_tau(const std::vector<SurvivalRecord>& records) {
    return time_percentile(records, 0.9);
}

// Default evaluation grid: `points` equally spaced times across the
// 10th-90th percentile range of the observed times.
inline std::vector<double> default_time_grid(const std::vector<SurvivalRecord>& records,
                                             std::size_t points = 32) {
    if (points < 2) throw ValidationError("default_time_grid: need at least two points");
    const double lo = time_percentile(records, 0.1);
    const double hi = time_percentile(records, 0.9);
    if (!(hi > lo))
        throw ValidationError("default_time_grid: degenerate time range [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "]");
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

}  // namespace pathcbm
