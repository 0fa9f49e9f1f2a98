#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "pathcbm/binio.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/rng.hpp"
#include "pathcbm/special.hpp"

namespace pathcbm {

// Right-continuous step function: value is `initial` before the first knot
// and values[i] on [times[i], times[i+1]).
struct StepFunction {
    std::vector<double> times;   // strictly ascending
    std::vector<double> values;  // same length
    double initial = 0.0;

    double operator()(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return initial;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

namespace detail {

inline void require_survival_inputs(const std::vector<SurvivalRecord>& records, const char* where) {
    if (records.empty()) throw ValidationError(std::string(where) + ": no records");
    for (const auto& r : records) {
        if (!std::isfinite(r.time) || r.time < 0.0)
            throw ValidationError(std::string(where) + ": bad time for patient '" + r.patient_id +
                                  "'");
    }
}

// Indices sorted by ascending time (stable on ties by index).
inline std::vector<std::size_t> time_order(const std::vector<SurvivalRecord>& records) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].time != records[b].time) return records[a].time < records[b].time;
        return a < b;
    });
    return order;
}

// Concordance bookkeeping shared by Harrell's C and lambda selection. A pair
// (i, j) is comparable when t_i < t_j and subject i had the event; it scores
// 1 when risk_i > risk_j and 1/2 on a risk tie.
struct PairCount {
    double concordant = 0.0;
    double comparable = 0.0;
};

inline PairCount concordance_pairs(const std::vector<double>& risks,
                                   const std::vector<SurvivalRecord>& records) {
    if (risks.size() != records.size())
        throw std::invalid_argument("concordance_pairs: length mismatch");
    PairCount out;
    const std::size_t n = records.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!records[i].event) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (records[i].time >= records[j].time) continue;
            out.comparable += 1.0;
            if (risks[i] > risks[j])
                out.concordant += 1.0;
            else if (risks[i] == risks[j])
                out.concordant += 0.5;
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Kaplan-Meier

struct KmCurve {
    std::vector<double> times;         // distinct event times, ascending
    std::vector<double> survival;      // S(t) at each time (right-continuous)
    std::vector<std::size_t> at_risk;  // subjects with time >= t
    std::vector<std::size_t> events;   // events exactly at t
    std::size_t n = 0;

    StepFunction step() const {
        StepFunction f;
        f.times = times;
        f.values = survival;
        f.initial = 1.0;
        return f;
    }

    double at(double t) const { return step()(t); }
};

// Product-limit estimator. Censored subjects at an event time count as still
// at risk at that time.
inline KmCurve km_fit(const std::vector<SurvivalRecord>& records) {
    detail::require_survival_inputs(records, "km_fit");
    const auto order = detail::time_order(records);
    const std::size_t n = records.size();

    KmCurve curve;
    curve.n = n;
    double s = 1.0;
    std::size_t pos = 0;
    while (pos < n) {
        const double t = records[order[pos]].time;
        std::size_t end = pos;
        std::size_t d = 0;
        while (end < n && records[order[end]].time == t) {
            if (records[order[end]].event) ++d;
            ++end;
        }
        if (d > 0) {
            const std::size_t at_risk = n - pos;
            s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            curve.times.push_back(t);
            curve.survival.push_back(s);
            curve.at_risk.push_back(at_risk);
            curve.events.push_back(d);
        }
        pos = end;
    }
    return curve;
}

// Kaplan-Meier of the censoring distribution: censorings become the events.
// Evaluated right-continuously as G(t) when forming IPCW weights.
inline KmCurve censoring_km(const std::vector<SurvivalRecord>& records) {
    std::vector<SurvivalRecord> flipped = records;
    for (auto& r : flipped) r.event = r.event ? 0 : 1;
    return km_fit(flipped);
}

// ---------------------------------------------------------------------------
// Log-rank test

struct LogRankResult {
    double chi_square = 0.0;
    double p_value = 1.0;
    std::size_t df = 0;
    std::vector<std::string> group_names;
    std::vector<double> observed;  // per group, over times with a defined variance term
    std::vector<double> expected;
};

// Observed-minus-expected chi-square across >= 2 groups with the
// hypergeometric variance at each distinct event time. Times where only one
// subject remains at risk carry no information (variance denominator zero)
// and are skipped.
inline LogRankResult logrank_test(const std::vector<std::vector<SurvivalRecord>>& groups,
                                  std::vector<std::string> group_names = {}) {
    const std::size_t g = groups.size();
    if (g < 2) throw ValidationError("logrank_test: need at least two groups");
    if (group_names.empty())
        for (std::size_t k = 0; k < g; ++k) group_names.push_back("group" + std::to_string(k));
    if (group_names.size() != g)
        throw std::invalid_argument("logrank_test: group name count mismatch");

    struct Row {
        double time;
        std::uint8_t event;
        std::size_t group;
    };
    std::vector<Row> rows;
    std::size_t total_events = 0;
    for (std::size_t k = 0; k < g; ++k) {
        if (groups[k].empty())
            throw ValidationError("logrank_test: group '" + group_names[k] + "' is empty");
        detail::require_survival_inputs(groups[k], "logrank_test");
        for (const auto& r : groups[k]) {
            rows.push_back({r.time, r.event, k});
            total_events += r.event ? 1 : 0;
        }
    }
    if (total_events == 0) throw ValidationError("logrank_test: no events in any group");

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.group < b.group;
    });

    const std::size_t n_total = rows.size();
    std::vector<double> observed(g, 0.0), expected(g, 0.0);
    DenseMatrix var(g - 1, g - 1);

    std::size_t pos = 0;
    std::vector<std::size_t> at_risk(g, 0);
    // at-risk counts maintained by walking times ascending and removing
    // earlier subjects
    for (const Row& r : rows) ++at_risk[r.group];

    while (pos < n_total) {
        const double t = rows[pos].time;
        std::size_t end = pos;
        std::vector<std::size_t> d(g, 0);
        std::size_t d_total = 0;
        while (end < n_total && rows[end].time == t) {
            if (rows[end].event) {
                ++d[rows[end].group];
                ++d_total;
            }
            ++end;
        }
        std::size_t n_at = 0;
        for (std::size_t k = 0; k < g; ++k) n_at += at_risk[k];
        if (d_total > 0 && n_at >= 2) {
            const double dn = static_cast<double>(d_total);
            const double nn = static_cast<double>(n_at);
            const double hyper = dn * (nn - dn) / (nn * nn * (nn - 1.0));
            for (std::size_t k = 0; k < g; ++k) {
                const double nk = static_cast<double>(at_risk[k]);
                observed[k] += static_cast<double>(d[k]);
                expected[k] += dn * nk / nn;
            }
            for (std::size_t a = 0; a + 1 < g; ++a) {
                const double na = static_cast<double>(at_risk[a]);
                for (std::size_t b = 0; b + 1 < g; ++b) {
                    const double nb = static_cast<double>(at_risk[b]);
                    const double delta = a == b ? 1.0 : 0.0;
                    var.at(a, b) += hyper * na * (delta * nn - nb);
                }
            }
        }
        for (std::size_t p = pos; p < end; ++p) --at_risk[rows[p].group];
        pos = end;
    }

    std::vector<double> z(g - 1);
    double z_norm = 0.0;
    for (std::size_t k = 0; k + 1 < g; ++k) {
        z[k] = observed[k] - expected[k];
        z_norm += z[k] * z[k];
    }

    LogRankResult result;
    result.df = g - 1;
    result.group_names = std::move(group_names);
    result.observed = observed;
    result.expected = expected;
    if (z_norm == 0.0) {
        result.chi_square = 0.0;
        result.p_value = 1.0;
        return result;
    }
    std::vector<double> solved;
    if (!cholesky_solve(var, z, solved))
        throw std::runtime_error("logrank_test: singular variance matrix");
    result.chi_square = std::max(0.0, dot(z, solved));
    result.p_value = chi_square_sf(result.chi_square, static_cast<double>(result.df));
    return result;
}

// ---------------------------------------------------------------------------
// Cox proportional hazards

struct CoxModel {
    std::vector<double> beta;
    double ridge_lambda = 0.0;
    StepFunction baseline_cumhaz;  // Breslow H0(t), H0(0) = 0
    std::vector<std::string> feature_names;
    double max_time = 0.0;  // largest observed training time; survival is not extrapolated past it
    double log_likelihood = 0.0;  // penalized, at the fitted beta
    std::size_t iterations = 0;
};

namespace detail {

struct CoxEval {
    double loglik = 0.0;          // penalized log partial likelihood
    std::vector<double> score;    // penalized gradient
    DenseMatrix info;             // penalized negative Hessian (when requested)
    std::vector<double> base_times;
    std::vector<double> base_increments;  // d_k / S0_k at each distinct event time
};

// One sweep over risk sets in descending time order, accumulating S0, S1, S2
// with a max-shift on eta for overflow safety.
inline CoxEval cox_eval(const DenseMatrix& x, const std::vector<SurvivalRecord>& records,
                        const std::vector<std::size_t>& order_desc, const std::vector<double>& beta,
                        double lambda, bool want_info, bool want_baseline) {
    const std::size_t n = records.size();
    const std::size_t p = x.cols;

    std::vector<double> eta(n, 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double e = 0.0;
        for (std::size_t c = 0; c < p; ++c) e += xi[c] * beta[c];
        eta[i] = e;
        mx = std::max(mx, e);
    }

    CoxEval out;
    out.score.assign(p, 0.0);
    if (want_info) out.info = DenseMatrix(p, p);

    double s0 = 0.0;
    std::vector<double> s1(p, 0.0);
    DenseMatrix s2;
    if (want_info) s2 = DenseMatrix(p, p);

    std::size_t pos = 0;
    while (pos < n) {
        const double t = records[order_desc[pos]].time;
        std::size_t end = pos;
        while (end < n && records[order_desc[end]].time == t) ++end;
        // everyone with time == t joins the risk set before events at t are scored
        for (std::size_t q = pos; q < end; ++q) {
            const std::size_t i = order_desc[q];
            const double w = std::exp(eta[i] - mx);
            const double* xi = x.row(i);
            s0 += w;
            for (std::size_t c = 0; c < p; ++c) s1[c] += w * xi[c];
            if (want_info)
                for (std::size_t a = 0; a < p; ++a) {
                    const double wxa = w * xi[a];
                    double* row = s2.row(a);
                    for (std::size_t b = 0; b < p; ++b) row[b] += wxa * xi[b];
                }
        }
        std::size_t d = 0;
        for (std::size_t q = pos; q < end; ++q) {
            const std::size_t i = order_desc[q];
            if (!records[i].event) continue;
            ++d;
            out.loglik += eta[i];
            const double* xi = x.row(i);
            for (std::size_t c = 0; c < p; ++c) out.score[c] += xi[c];
        }
        if (d > 0) {
            const double dd = static_cast<double>(d);
            const double log_s0 = std::log(s0) + mx;
            out.loglik -= dd * log_s0;
            for (std::size_t c = 0; c < p; ++c) out.score[c] -= dd * s1[c] / s0;
            if (want_info)
                for (std::size_t a = 0; a < p; ++a) {
                    const double ma = s1[a] / s0;
                    double* row = out.info.row(a);
                    const double* s2a = s2.row(a);
                    for (std::size_t b = 0; b < p; ++b)
                        row[b] += dd * (s2a[b] / s0 - ma * s1[b] / s0);
                }
            if (want_baseline) {
                out.base_times.push_back(t);
                out.base_increments.push_back(dd * std::exp(-mx) / s0);
            }
        }
        pos = end;
    }

    for (std::size_t c = 0; c < p; ++c) {
        out.loglik -= 0.5 * lambda * beta[c] * beta[c];
        out.score[c] -= lambda * beta[c];
        if (want_info) out.info.at(c, c) += lambda;
    }
    if (want_baseline) {
        std::reverse(out.base_times.begin(), out.base_times.end());
        std::reverse(out.base_increments.begin(), out.base_increments.end());
    }
    return out;
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace detail

// Ridge-penalized Cox regression with Breslow tie handling, solved by
// Newton-Raphson with step-halving. Converges when every score component is
// below 1e-7 in magnitude; fails after 100 iterations.
inline CoxModel fit_coxph(const DenseMatrix& x, const std::vector<SurvivalRecord>& records,
                          double lambda, std::vector<std::string> feature_names = {}) {
    const std::size_t n = records.size();
    if (x.rows != n) throw std::invalid_argument("fit_coxph: X rows != record count");
    if (n < 2) throw ValidationError("fit_coxph: need at least two subjects");
    detail::require_survival_inputs(records, "fit_coxph");
    if (!x.all_finite()) throw ValidationError("fit_coxph: non-finite feature value");
    if (lambda < 0.0) throw ValidationError("fit_coxph: lambda must be >= 0");
    std::size_t n_events = 0;
    for (const auto& r : records) n_events += r.event ? 1 : 0;
    if (n_events == 0) throw ValidationError("fit_coxph: no observed events");

    const std::size_t p = x.cols;
    if (feature_names.empty())
        for (std::size_t c = 0; c < p; ++c) feature_names.push_back("x" + std::to_string(c));
    if (feature_names.size() != p)
        throw std::invalid_argument("fit_coxph: feature name count mismatch");

    auto order_desc = detail::time_order(records);
    std::reverse(order_desc.begin(), order_desc.end());

    std::vector<double> beta(p, 0.0);
    detail::CoxEval cur = detail::cox_eval(x, records, order_desc, beta, lambda, true, false);
    std::size_t iter = 0;
    constexpr double kTol = 1e-7;
    constexpr std::size_t kMaxIter = 100;
    constexpr int kMaxHalvings = 30;

    while (iter < kMaxIter && detail::max_abs(cur.score) >= kTol) {
        ++iter;
        std::vector<double> delta;
        if (!cholesky_solve(cur.info, cur.score, delta)) {
            if (lambda == 0.0)
                throw ConvergenceError(
                    "fit_coxph: singular information matrix at lambda=0; refit with lambda>0");
            throw ConvergenceError("fit_coxph: information matrix not positive definite");
        }
        double step = 1.0;
        bool accepted = false;
        std::vector<double> cand(p);
        for (int h = 0; h <= kMaxHalvings; ++h) {
            for (std::size_t c = 0; c < p; ++c) cand[c] = beta[c] + step * delta[c];
            detail::CoxEval probe =
                detail::cox_eval(x, records, order_desc, cand, lambda, false, false);
            if (std::isfinite(probe.loglik) && probe.loglik > cur.loglik) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // The likelihood has flattened to numeric resolution. Newton still
            // contracts the score quadratically near the optimum, so accept
            // the full step on that criterion; otherwise the fit has stalled
            // and convergence is judged on the score below.
            for (std::size_t c = 0; c < p; ++c) cand[c] = beta[c] + delta[c];
            detail::CoxEval probe =
                detail::cox_eval(x, records, order_desc, cand, lambda, true, false);
            if (std::isfinite(probe.loglik) &&
                detail::max_abs(probe.score) < detail::max_abs(cur.score)) {
                beta = cand;
                cur = std::move(probe);
                continue;
            }
            break;
        }
        beta = cand;
        cur = detail::cox_eval(x, records, order_desc, beta, lambda, true, false);
    }

    const double grad_inf = detail::max_abs(cur.score);
    if (grad_inf >= kTol) {
        double grad_l2 = 0.0;
        for (double s : cur.score) grad_l2 += s * s;
        throw ConvergenceError("fit_coxph: no convergence after " + std::to_string(iter) +
                               " iterations; |grad|_inf = " + std::to_string(grad_inf) +
                               ", |grad|_2 = " + std::to_string(std::sqrt(grad_l2)) +
                               (lambda == 0.0 ? "; consider lambda>0" : ""));
    }

    detail::CoxEval fin = detail::cox_eval(x, records, order_desc, beta, lambda, false, true);
    CoxModel model;
    model.beta = std::move(beta);
    model.ridge_lambda = lambda;
    model.feature_names = std::move(feature_names);
    model.log_likelihood = fin.loglik;
    model.iterations = iter;
    model.max_time = 0.0;
    for (const auto& r : records) model.max_time = std::max(model.max_time, r.time);
    StepFunction h0;
    h0.initial = 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < fin.base_times.size(); ++k) {
        acc += fin.base_increments[k];
        h0.times.push_back(fin.base_times[k]);
        h0.values.push_back(acc);
    }
    model.baseline_cumhaz = std::move(h0);
    return model;
}

inline std::vector<double> predict_risk(const CoxModel& model, const DenseMatrix& x) {
    if (x.cols != model.beta.size())
        throw std::invalid_argument("predict_risk: feature width " + std::to_string(x.cols) +
                                    " != " + std::to_string(model.beta.size()));
    std::vector<double> risks(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double s = 0.0;
        for (std::size_t c = 0; c < model.beta.size(); ++c) s += xi[c] * model.beta[c];
        risks[i] = s;
    }
    return risks;
}

// S(t|x) = exp(-H0(t) exp(x beta)) on the grid. The baseline is never
// extrapolated past the last observed training time.
inline std::vector<double> predict_survival(const CoxModel& model, const std::vector<double>& x,
                                            const std::vector<double>& time_grid) {
    if (x.size() != model.beta.size())
        throw std::invalid_argument("predict_survival: feature width mismatch");
    double eta = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) eta += x[c] * model.beta[c];
    const double hr = std::exp(eta);
    std::vector<double> s(time_grid.size(), 1.0);
    for (std::size_t i = 0; i < time_grid.size(); ++i) {
        const double t = time_grid[i];
        if (t < 0.0 || t > model.max_time)
            throw ValidationError("predict_survival: time " + std::to_string(t) +
                                  " outside observed range [0, " + std::to_string(model.max_time) +
                                  "]");
        s[i] = std::exp(-model.baseline_cumhaz(t) * hr);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Lambda selection

struct LambdaSelection {
    double best_lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> mean_cindex;  // NaN where no fold produced a score
    std::size_t folds_used = 0;
    std::vector<std::string> warnings;
};

// Inner k-fold cross-validation over the grid, maximizing mean held-out
// Harrell concordance. Folds whose training part has no events or whose test
// part has no comparable pair are skipped with a warning; ties between
// lambdas break toward the larger value.
inline LambdaSelection select_lambda(const DenseMatrix& x,
                                     const std::vector<SurvivalRecord>& records,
                                     const std::vector<double>& lambda_grid, std::size_t folds,
                                     std::uint64_t seed) {
    if (lambda_grid.empty()) throw ValidationError("select_lambda: empty lambda grid");
    if (x.rows != records.size())
        throw std::invalid_argument("select_lambda: X rows != record count");
    if (folds < 2) throw ValidationError("select_lambda: need at least two folds");

    const std::size_t n = records.size();
    const auto fold_sets = split_folds(n, folds, seed);

    LambdaSelection sel;
    sel.lambdas = lambda_grid;
    sel.mean_cindex.assign(lambda_grid.size(), 0.0);
    std::vector<std::size_t> counts(lambda_grid.size(), 0);

    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> test = fold_sets[f];
        std::vector<std::size_t> train;
        for (std::size_t o = 0; o < folds; ++o)
            if (o != f) train.insert(train.end(), fold_sets[o].begin(), fold_sets[o].end());
        if (test.empty() || train.empty()) {
            sel.warnings.push_back("fold " + std::to_string(f) + " skipped: empty split");
            continue;
        }

        std::vector<SurvivalRecord> train_rec, test_rec;
        for (auto i : train) train_rec.push_back(records[i]);
        for (auto i : test) test_rec.push_back(records[i]);
        std::size_t train_events = 0;
        for (const auto& r : train_rec) train_events += r.event ? 1 : 0;
        if (train_events == 0) {
            sel.warnings.push_back("fold " + std::to_string(f) + " skipped: no training events");
            continue;
        }
        {
            std::vector<double> zero(test_rec.size(), 0.0);
            if (detail::concordance_pairs(zero, test_rec).comparable == 0.0) {
                sel.warnings.push_back("fold " + std::to_string(f) +
                                       " skipped: no comparable held-out pairs");
                continue;
            }
        }

        const DenseMatrix x_train = take_rows(x, train);
        const DenseMatrix x_test = take_rows(x, test);
        bool fold_used = false;
        for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
            try {
                CoxModel model = fit_coxph(x_train, train_rec, lambda_grid[li]);
                const auto risks = predict_risk(model, x_test);
                const auto pairs = detail::concordance_pairs(risks, test_rec);
                sel.mean_cindex[li] += pairs.concordant / pairs.comparable;
                ++counts[li];
                fold_used = true;
            } catch (const ConvergenceError& e) {
                sel.warnings.push_back("fold " + std::to_string(f) + ", lambda " +
                                       std::to_string(lambda_grid[li]) + ": " + e.what());
            }
        }
        if (fold_used) ++sel.folds_used;
    }

    if (sel.folds_used == 0) throw ValidationError("select_lambda: every fold was skipped");

    double best_score = -std::numeric_limits<double>::infinity();
    double best_lambda = lambda_grid.front();
    for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
        if (counts[li] == 0) {
            sel.mean_cindex[li] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        sel.mean_cindex[li] /= static_cast<double>(counts[li]);
        const double score = sel.mean_cindex[li];
        if (score > best_score || (score == best_score && lambda_grid[li] > best_lambda)) {
            best_score = score;
            best_lambda = lambda_grid[li];
        }
    }
    if (!std::isfinite(best_score))
        throw ValidationError("select_lambda: no lambda produced a finite score");
    sel.best_lambda = best_lambda;
    return sel;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr char kCoxModelMagic[9] = "pcbmcox1";

inline void save_cox_model(const std::string& path, const CoxModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write model file '" + path + "'");
    out.write(kCoxModelMagic, 8);
    binio::write_pod<std::uint64_t>(out, model.beta.size());
    for (const auto& name : model.feature_names) binio::write_string(out, name);
    binio::write_doubles(out, model.beta);
    binio::write_pod<double>(out, model.ridge_lambda);
    binio::write_pod<double>(out, model.max_time);
    binio::write_pod<double>(out, model.log_likelihood);
    binio::write_pod<std::uint64_t>(out, model.baseline_cumhaz.times.size());
    binio::write_doubles(out, model.baseline_cumhaz.times);
    binio::write_doubles(out, model.baseline_cumhaz.values);
    out.close();
    if (!out) throw std::runtime_error("error writing model file '" + path + "'");
}

inline CoxModel load_cox_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    binio::check_magic(in, kCoxModelMagic, path);
    CoxModel model;
    const auto p = binio::read_pod<std::uint64_t>(in, "coefficient count");
    model.feature_names.resize(p);
    for (auto& name : model.feature_names) name = binio::read_string(in, "feature name");
    binio::read_doubles(in, model.beta, p, "coefficients");
    model.ridge_lambda = binio::read_pod<double>(in, "lambda");
    model.max_time = binio::read_pod<double>(in, "max time");
    model.log_likelihood = binio::read_pod<double>(in, "log likelihood");
    const auto steps = binio::read_pod<std::uint64_t>(in, "baseline step count");
    binio::read_doubles(in, model.baseline_cumhaz.times, steps, "baseline times");
    binio::read_doubles(in, model.baseline_cumhaz.values, steps, "baseline values");
    model.baseline_cumhaz.initial = 0.0;
    return model;
}

}  // namespace pathcbm
