// Acceptance checklist, run as a plain binary: one PASS/FAIL line per
// criterion, nonzero exit if any fails. argv[1] is the command-line tool
// (used by the determinism criterion); argv[2] optionally keeps the scratch
// directory at a fixed location instead of a temp dir.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "pathcbm/pathcbm.hpp"

using namespace pathcbm;
using testutil::recs;

namespace fs = std::filesystem;

namespace {

std::chrono::steady_clock::time_point tick() { return std::chrono::steady_clock::now(); }

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(tick() - start).count();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

// ---------------------------------------------------------------------------
// criterion 1: every differentiable op passes finite-difference checks

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (double& x : m.v) x = rng.normal();
    return m;
}

// Values bounded away from zero, for kinked activations.
DenseMatrix random_matrix_off_zero(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (double& x : m.v) {
        const double mag = rng.uniform(0.1, 2.0);
        x = rng.bernoulli(0.5) ? mag : -mag;
    }
    return m;
}

double weighted_sum(const DenseMatrix& out, const DenseMatrix& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * c.v[i];
    return s;
}

std::vector<std::vector<std::uint32_t>> line_adjacency(std::size_t n) {
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (std::uint32_t i = 0; i + 1 < n; ++i) {
        adj[i].push_back(i + 1);
        adj[i + 1].push_back(i);
    }
    return adj;
}

bool criterion_gradients(std::string& note) {
    const auto start = tick();
    struct Op {
        const char* name;
        double tol;
        double worst = 0.0;
        bool ok = true;
    };
    std::vector<Op> ops{{"linear", 1e-5}, {"relu", 1e-5}, {"gat", 1e-4},
                        {"pool", 1e-4},   {"bce", 1e-5},  {"cox", 1e-5}};
    auto record = [&](Op& op, const GradCheckResult& r) {
        op.worst = std::max(op.worst, r.max_rel_err);
        op.ok = op.ok && r.ok(op.tol);
    };

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        {
            Rng rng(seed);
            Linear lin(3, 2);
            lin.init(rng);
            ParamTensor xin(4, 3);
            xin.value = random_matrix(4, 3, rng);
            const DenseMatrix c = random_matrix(4, 2, rng);
            std::vector<NamedParam> params;
            lin.collect(params, "lin");
            params.push_back({"x", &xin});
            auto loss = [&] { return weighted_sum(lin.forward(xin.value), c); };
            auto backward = [&] { xin.grad += lin.backward(xin.value, c); };
            record(ops[0], grad_check(loss, backward, params));
        }
        {
            Rng rng(seed);
            ParamTensor xin(5, 4);
            xin.value = random_matrix_off_zero(5, 4, rng);
            const DenseMatrix c = random_matrix(5, 4, rng);
            std::vector<NamedParam> params{{"x", &xin}};
            auto loss = [&] { return weighted_sum(relu(xin.value), c); };
            auto backward = [&] { xin.grad += relu_backward(xin.value, c); };
            record(ops[1], grad_check(loss, backward, params));
        }
        {
            Rng rng(seed);
            GatLayer gat(3, 4);
            gat.init(rng);
            const auto adj = line_adjacency(5);
            ParamTensor hin(5, 3);
            hin.value = random_matrix(5, 3, rng);
            const DenseMatrix c = random_matrix(5, 4, rng);
            std::vector<NamedParam> params;
            gat.collect(params, "gat");
            params.push_back({"h", &hin});
            auto loss = [&] { return weighted_sum(gat.forward(adj, hin.value, nullptr), c); };
            auto backward = [&] {
                GatLayer::Cache cache;
                gat.forward(adj, hin.value, &cache);
                hin.grad += gat.backward(hin.value, cache, c);
            };
            record(ops[2], grad_check(loss, backward, params));
        }
        {
            Rng rng(seed);
            GatedAttentionPool pool(3, 2);
            pool.init(rng);
            ParamTensor hin(5, 3);
            hin.value = random_matrix(5, 3, rng);
            const DenseMatrix c = random_matrix(1, 3, rng);
            std::vector<NamedParam> params;
            pool.collect(params, "pool");
            params.push_back({"h", &hin});
            auto loss = [&] { return weighted_sum(pool.forward(hin.value, nullptr).pooled, c); };
            auto backward = [&] {
                GatedAttentionPool::Cache cache;
                pool.forward(hin.value, &cache);
                hin.grad += pool.backward(hin.value, cache, c);
            };
            record(ops[3], grad_check(loss, backward, params));
        }
        {
            Rng rng(seed);
            const std::vector<std::int8_t> labels{1, 0, kMissingLabel, 1, kMissingLabel, 0};
            ParamTensor zin(1, 6);
            zin.value = random_matrix(1, 6, rng);
            std::vector<NamedParam> params{{"z", &zin}};
            auto loss = [&] { return bce_with_logits(zin.value.v, labels); };
            auto backward = [&] {
                std::vector<double> g;
                bce_with_logits(zin.value.v, labels, &g);
                for (std::size_t k = 0; k < g.size(); ++k) zin.grad.v[k] += g[k];
            };
            record(ops[4], grad_check(loss, backward, params));
        }
        {
            Rng rng(seed);
            const std::vector<double> times{3, 1, 4, 1, 5, 2, 6};
            const std::vector<std::uint8_t> events{1, 0, 1, 1, 0, 1, 1};
            ParamTensor zin(1, 7);
            zin.value = random_matrix(1, 7, rng);
            std::vector<NamedParam> params{{"eta", &zin}};
            auto loss = [&] { return cox_breslow_nll(zin.value.v, times, events); };
            auto backward = [&] {
                std::vector<double> g;
                cox_breslow_nll(zin.value.v, times, events, &g);
                for (std::size_t k = 0; k < g.size(); ++k) zin.grad.v[k] += g[k];
            };
            record(ops[5], grad_check(loss, backward, params));
        }
    }

    const double secs = seconds_since(start);
    bool all_ok = secs < 60.0;
    std::ostringstream n;
    n << "10 seeds, worst rel err";
    for (const Op& op : ops) {
        all_ok = all_ok && op.ok;
        n << " " << op.name << "=" << fmt(op.worst, 2);
    }
    n << ", " << fmt(secs, 2) << "s";
    note = n.str();
    return all_ok;
}

// ---------------------------------------------------------------------------
// criterion 2: Newton CoxPH matches a derivative-free oracle

// Independent Breslow objective: direct double loop over risk sets with the
// same 0.5*lambda*|beta|^2 penalty the fitter maximizes against.
double naive_penalized_loglik(const DenseMatrix& x, const std::vector<SurvivalRecord>& records,
                              const std::vector<double>& beta, double lambda) {
    const std::size_t n = records.size();
    const std::size_t p = beta.size();
    auto eta = [&](std::size_t i) {
        double e = 0.0;
        for (std::size_t c = 0; c < p; ++c) e += x.at(i, c) * beta[c];
        return e;
    };
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!records[i].event) continue;
        double s0 = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (records[j].time >= records[i].time) s0 += std::exp(eta(j));
        ll += eta(i) - std::log(s0);
    }
    for (std::size_t c = 0; c < p; ++c) ll -= 0.5 * lambda * beta[c] * beta[c];
    return ll;
}

// Cyclic coordinate ascent with golden-section line searches: slow but
// derivative-free, so it shares nothing with the Newton fitter under test.
std::vector<double> golden_section_fit(const DenseMatrix& x,
                                       const std::vector<SurvivalRecord>& records, double lambda) {
    const std::size_t p = x.cols;
    std::vector<double> beta(p, 0.0);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int sweep = 0; sweep < 120; ++sweep) {
        double moved = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            double lo = beta[c] - 8.0, hi = beta[c] + 8.0;
            auto value = [&](double b) {
                std::vector<double> probe = beta;
                probe[c] = b;
                return naive_penalized_loglik(x, records, probe, lambda);
            };
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            double f1 = value(x1), f2 = value(x2);
            while (hi - lo > 1e-12) {
                if (f1 < f2) {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + gr * (hi - lo);
                    f2 = value(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - gr * (hi - lo);
                    f1 = value(x1);
                }
            }
            const double best = 0.5 * (lo + hi);
            moved = std::max(moved, std::fabs(best - beta[c]));
            beta[c] = best;
        }
        if (moved < 1e-11) break;
    }
    return beta;
}

DenseMatrix matrix_from_columns(const std::vector<std::vector<double>>& cols) {
    DenseMatrix m(cols.front().size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t i = 0; i < cols[c].size(); ++i) m.at(i, c) = cols[c][i];
    return m;
}

bool criterion_cox_oracle(std::string& note) {
    struct Fixture {
        DenseMatrix x;
        std::vector<SurvivalRecord> records;
        double lambda;
    };
    std::vector<Fixture> fixtures;
    fixtures.push_back({matrix_from_columns({{0.5, -0.2, 1.3, 0.7, -1.0, 0.4}}),
                        recs({{2, 1}, {4, 0}, {3, 1}, {5, 1}, {1, 1}, {6, 0}}), 0.1});
    fixtures.push_back(
        {matrix_from_columns({{0.2, -0.4, 1.1, 0.9, -0.8, 0.3, 1.5, -0.6},
                              {1.0, 0.5, -0.5, 0.25, 0.75, -1.25, 0.1, 0.8}}),
         recs({{1, 1}, {2, 1}, {2, 0}, {3, 1}, {4, 1}, {4, 1}, {5, 0}, {6, 1}}), 0.5});
    fixtures.push_back(
        {matrix_from_columns({{0.1, 0.9, -0.7, 0.3, 1.2, -0.2, 0.6, -1.1, 0.8, 0.0},
                              {-0.5, 0.4, 1.0, -0.9, 0.2, 0.7, -0.3, 0.5, -1.2, 1.1},
                              {0.3, -0.6, 0.2, 0.8, -1.0, 0.4, 1.3, -0.1, 0.6, -0.8}}),
         recs({{3, 1}, {1, 0}, {4, 1}, {7, 1}, {2, 1}, {9, 0}, {5, 1}, {8, 1}, {6, 0}, {10, 1}}),
         1.0});

    bool ok = true;
    double worst = 0.0;
    for (const Fixture& f : fixtures) {
        const CoxModel newton = fit_coxph(f.x, f.records, f.lambda);
        const std::vector<double> oracle = golden_section_fit(f.x, f.records, f.lambda);
        for (std::size_t c = 0; c < oracle.size(); ++c) {
            const double diff = std::fabs(newton.beta[c] - oracle[c]);
            worst = std::max(worst, diff);
            ok = ok && diff < 1e-4;
        }
    }

    // A constant column carries no partial-likelihood information, so any
    // positive ridge pins its coefficient at exactly zero.
    const DenseMatrix xconst = matrix_from_columns(
        {{1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, {0.4, -0.9, 1.2, 0.1, -0.5, 0.8}});
    const auto const_records = recs({{1, 1}, {2, 0}, {3, 1}, {4, 1}, {5, 0}, {6, 1}});
    const CoxModel pinned = fit_coxph(xconst, const_records, 0.5);
    const bool const_ok = pinned.beta[0] == 0.0;
    ok = ok && const_ok;

    // An overwhelming penalty collapses every coefficient toward zero.
    const CoxModel crushed = fit_coxph(fixtures[1].x, fixtures[1].records, 1e8);
    double crushed_max = 0.0;
    for (double b : crushed.beta) crushed_max = std::max(crushed_max, std::fabs(b));
    ok = ok && crushed_max < 1e-6;

    note = "3 fixtures, worst |newton - oracle| = " + fmt(worst, 2) +
           "; constant column beta = " + fmt(pinned.beta[0], 2) +
           "; lambda=1e8 max |beta| = " + fmt(crushed_max, 2);
    return ok;
}

// ---------------------------------------------------------------------------
// criterion 3: estimators match hand/enumeration oracles within 1e-10

bool criterion_hand_checks(std::string& note) {
    double worst = 0.0;
    bool ok = true;
    auto close = [&](double got, double want) {
        const double diff = std::fabs(got - want);
        worst = std::max(worst, diff);
        ok = ok && diff < 1e-10;
    };

    // Kaplan-Meier product limit.
    const KmCurve km = km_fit(recs({{1, 1}, {2, 1}, {3, 0}}));
    close(km.survival[0], 2.0 / 3.0);
    close(km.survival[1], 1.0 / 3.0);

    // Censoring-distribution Kaplan-Meier.
    const KmCurve g = censoring_km(recs({{1, 0}, {2, 1}}));
    close(g.at(0.5), 1.0);
    close(g.at(2.0), 0.5);

    // Breslow baseline under beta = 0: cumulative d_k / n_k at event times.
    const DenseMatrix zeros(4, 1);
    const CoxModel null_cox = fit_coxph(zeros, recs({{1, 1}, {2, 1}, {3, 0}, {4, 1}}), 1.0);
    close(null_cox.beta[0], 0.0);
    close(null_cox.baseline_cumhaz(1.0), 1.0 / 4.0);
    close(null_cox.baseline_cumhaz(2.0), 7.0 / 12.0);
    close(null_cox.baseline_cumhaz(4.0), 19.0 / 12.0);

    // Two-group log-rank, hand-enumerated hypergeometric moments.
    const LogRankResult lr = logrank_test(
        {recs({{1, 1}, {3, 1}, {5, 1}}), recs({{2, 1}, {4, 1}, {6, 0}})}, {"A", "B"});
    close(lr.chi_square, 529.0 / 1091.0);
    close(lr.expected[0], 67.0 / 30.0);
    close(lr.p_value, 0.48622183388523248);

    // A group against itself carries no signal at all.
    const auto self = recs({{1, 1}, {2, 0}, {3, 1}, {4, 1}});
    const LogRankResult null_lr = logrank_test({self, self});
    ok = ok && null_lr.chi_square == 0.0 && null_lr.p_value == 1.0;

    // Harrell concordance with one risk tie (counts 1/2).
    close(harrell_cindex({2.0, 2.5, 2.0, 1.0, 1.5},
                         recs({{1, 1}, {2, 0}, {3, 1}, {4, 1}, {5, 0}})),
          4.5 / 7.0);

    // Uno IPCW concordance, weights enumerated by hand.
    const auto uno_records = recs({{1, 1}, {2, 0}, {3, 1}, {4, 1}, {5, 0}, {6, 1}});
    close(uno_cindex_ipcw({3.0, 2.0, 2.5, 1.0, 1.5, 0.5}, uno_records, uno_records, 5.5).value,
          36.0 / 41.0);

    // Single-time cumulative/dynamic AUC; out-of-support grid points excluded.
    const std::vector<double> auc_risks{3.0, 2.0, 1.2, 1.0, 1.5, 0.5};
    const DynamicAucResult one = cumulative_dynamic_auc(auc_risks, uno_records, uno_records, {3.5});
    close(one.auc[0], 22.0 / 27.0);
    close(one.integrated, 22.0 / 27.0);
    const DynamicAucResult three =
        cumulative_dynamic_auc(auc_risks, uno_records, uno_records, {0.5, 3.5, 10.0});
    ok = ok && three.excluded == 2;
    close(three.auc[1], 22.0 / 27.0);

    // Censoring-weighted Brier score on a two-point grid.
    const auto bs_records = recs({{1, 1}, {2, 0}, {3, 1}, {4, 1}});
    DenseMatrix surv(4, 2);
    const double rows[4][2] = {{0.9, 0.85}, {0.8, 0.75}, {0.7, 0.65}, {0.6, 0.55}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) surv.at(i, j) = rows[i][j];
    const BrierResult brier = integrated_brier_score(surv, bs_records, bs_records, {2.5, 3.5});
    close(brier.brier[0], 0.29625);
    close(brier.brier[1], 0.415);
    close(brier.ibs, 0.355625);

    note = "KM, censoring-KM, baseline, log-rank, Harrell, Uno, AUC(t), Brier; worst |diff| = " +
           fmt(worst, 2);
    return ok;
}

// ---------------------------------------------------------------------------
// criterion 4: metric invariances

bool criterion_invariances(std::string& note) {
    bool transform_ok = true, complement_ok = true, ipcw_ok = true;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        Rng rng(seed);

        // Strictly increasing transforms leave rank metrics bitwise unchanged.
        std::vector<double> scores(12);
        std::vector<int> labels(12);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = rng.normal();
            labels[i] = i < 6 ? 1 : 0;
        }
        std::vector<double> warped(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i)
            warped[i] = 2.0 * std::atan(scores[i]) + 7.0;
        transform_ok = transform_ok && roc_auc(warped, labels) == roc_auc(scores, labels);

        std::vector<SurvivalRecord> records;
        std::vector<double> risks(10);
        for (std::size_t i = 0; i < risks.size(); ++i) {
            records.push_back(testutil::rec(static_cast<double>(i + 1), rng.bernoulli(0.7)));
            risks[i] = rng.normal();
        }
        if (!records[0].event) records[0].event = true;  // keep pairs comparable
        std::vector<double> warped_risks(risks.size());
        for (std::size_t i = 0; i < risks.size(); ++i)
            warped_risks[i] = std::exp(risks[i]) + risks[i];
        transform_ok =
            transform_ok && harrell_cindex(warped_risks, records) == harrell_cindex(risks, records);

        // Tie-free complement identity, balanced so both AUCs are exact /16.
        std::vector<double> s8(8), neg8(8);
        std::vector<int> l8(8);
        for (std::size_t i = 0; i < 8; ++i) {
            s8[i] = rng.normal();
            neg8[i] = -s8[i];
            l8[i] = i % 2 == 0 ? 1 : 0;
        }
        complement_ok = complement_ok && roc_auc(s8, l8) + roc_auc(neg8, l8) == 1.0;

        // With zero censoring, IPCW weights are all one and Uno's estimator
        // collapses to Harrell's exactly.
        std::vector<SurvivalRecord> uncensored;
        std::vector<double> urisks(9);
        for (std::size_t i = 0; i < urisks.size(); ++i) {
            uncensored.push_back(testutil::rec(static_cast<double>(i + 1), true));
            urisks[i] = rng.normal();
        }
        ipcw_ok = ipcw_ok && uno_cindex_ipcw(urisks, uncensored, uncensored, 50.0).value ==
                                 harrell_cindex(urisks, uncensored);
    }
    note = std::string("monotone transforms ") + (transform_ok ? "exact" : "BROKEN") +
           ", AUC complement " + (complement_ok ? "exact" : "BROKEN") +
           ", Uno==Harrell uncensored " + (ipcw_ok ? "exact" : "BROKEN");
    return transform_ok && complement_ok && ipcw_ok;
}

// ---------------------------------------------------------------------------
// criteria 5 and 6 share one synthetic pipeline run

struct SynthPipeline {
    StudyDataset dataset;
    SynthTruth truth;
    FoldPlan plan;
    ConceptBenchmark benchmark;
    SettingResult cbm;
    SettingResult binary;
    bool ready = false;
};

bool criterion_synthetic(SynthPipeline& ctx, std::string& note) {
    const auto start = tick();

    SynthConfig cfg;  // defaults: 400 patients, 8 concepts, 16 features, 30-60 patches
    cfg.seed = 42;
    SynthResult sr = synth_generate(cfg);
    ctx.dataset = std::move(sr.dataset);
    ctx.truth = std::move(sr.truth);
    for (auto& s : ctx.dataset.samples) {
        s.graph = build_knn_graph(s.patches, 8);
        s.graph_k = 8;
    }
    ctx.plan = make_folds(ctx.dataset.size(), 5, 1);

    CbmConfig model;
    model.hidden = 64;
    model.blocks = 2;
    model.attention_dim = 32;
    TrainConfig training;
    training.base_lr = 1e-3;

    ctx.benchmark = run_concept_benchmark(ctx.dataset, model, training, ctx.plan);

    SurvivalRunOptions opts;
    opts.model = model;
    opts.training = training;
    opts.seed = 9;
    ctx.cbm = run_survival_setting(ctx.dataset, SurvivalSetting::CbmLogitsCoxPH, ctx.plan, opts);
    ctx.binary =
        run_survival_setting(ctx.dataset, SurvivalSetting::BinaryConceptsCoxPH, ctx.plan, opts);
    ctx.ready = true;

    const std::vector<double> risks = assemble_crossfit_risks(ctx.cbm, ctx.dataset.size());
    std::vector<SurvivalRecord> records;
    for (const auto& s : ctx.dataset.samples) records.push_back(s.outcome);
    const StratifyResult strat = stratify_and_test(risks, records);

    std::size_t planted = 0;
    for (std::size_t k = 1; k < ctx.truth.hazards.size(); ++k)
        if (std::fabs(ctx.truth.hazards[k]) > std::fabs(ctx.truth.hazards[planted])) planted = k;
    const std::string& planted_name = ctx.dataset.vocabulary.names[planted];
    const auto top = top_risk_factors(ctx.cbm.full_model, 10);

    const double auc = ctx.benchmark.mean.auc.mean;
    const double c_cbm = ctx.cbm.cindex.mean;
    const double c_bin = ctx.binary.cindex.mean;
    const double secs = seconds_since(start);

    const bool auc_ok = auc > 0.9;
    const bool cox_ok = c_cbm > 0.7 && c_cbm >= c_bin - 0.02;
    const bool strat_ok = strat.test_performed && strat.test.p_value < 0.005;
    const bool rank_ok = ctx.cbm.has_full_model && !top.empty() && top.front().name == planted_name;
    const bool folds_ok = ctx.cbm.folds.size() == 5 && ctx.binary.folds.size() == 5;
    const bool time_ok = secs < 900.0;

    note = "concept AUC " + fmt(auc) + ", C " + fmt(c_cbm) + " (binary " + fmt(c_bin) +
           "), log-rank p " + fmt(strat.test_performed ? strat.test.p_value : 1.0, 3) + ", top '" +
           (top.empty() ? std::string("-") : top.front().name) + "' vs planted '" + planted_name +
           "', " + fmt(secs, 3) + "s";
    return auc_ok && cox_ok && strat_ok && rank_ok && folds_ok && time_ok;
}

bool criterion_ibs_ordering(SynthPipeline& ctx, std::string& note) {
    if (!ctx.ready) {
        note = "synthetic pipeline unavailable";
        return false;
    }

    // Kaplan-Meier baseline: one training-set survival curve applied to every
    // test subject, scored on the same clipped grid the pipeline used.
    auto km_ibs_for = [&](const SettingResult& result) {
        std::vector<std::pair<double, double>> per_fold;  // model, baseline
        for (const FoldOutcome& fo : result.folds) {
            if (!std::isfinite(fo.ibs)) continue;
            const std::vector<std::size_t> train = ctx.plan.train_indices(fo.fold);
            std::vector<SurvivalRecord> train_records, test_records;
            for (std::size_t i : train) train_records.push_back(ctx.dataset.samples[i].outcome);
            for (std::size_t i : fo.test_indices)
                test_records.push_back(ctx.dataset.samples[i].outcome);
            double horizon = 0.0;
            for (const auto& r : train_records) horizon = std::max(horizon, r.time);
            std::vector<double> grid;
            for (double t : default_time_grid(test_records, 32))
                if (t <= horizon) grid.push_back(t);
            if (grid.size() < 2) continue;
            const KmCurve km = km_fit(train_records);
            DenseMatrix surv(test_records.size(), grid.size());
            for (std::size_t i = 0; i < test_records.size(); ++i)
                for (std::size_t j = 0; j < grid.size(); ++j) surv.at(i, j) = km.at(grid[j]);
            per_fold.emplace_back(
                fo.ibs, integrated_brier_score(surv, train_records, test_records, grid).ibs);
        }
        return per_fold;
    };

    auto mean_pair = [](const std::vector<std::pair<double, double>>& v) {
        double m = 0.0, b = 0.0;
        for (const auto& [model, base] : v) {
            m += model;
            b += base;
        }
        const double n = static_cast<double>(v.size());
        return std::pair<double, double>{m / n, b / n};
    };

    const auto cbm_folds = km_ibs_for(ctx.cbm);
    const auto bin_folds = km_ibs_for(ctx.binary);
    const bool have_folds = !cbm_folds.empty() && !bin_folds.empty();
    const auto [cbm_ibs, cbm_km] = have_folds ? mean_pair(cbm_folds) : std::pair{1.0, 0.0};
    const auto [bin_ibs, bin_km] = have_folds ? mean_pair(bin_folds) : std::pair{1.0, 0.0};
    const bool beats_km = have_folds && cbm_ibs < cbm_km && bin_ibs < bin_km;

    // The end-to-end setting predicts risks without a survival function, so
    // its report must carry IBS as N/A rather than a number.
    SynthConfig small;
    small.patients = 50;
    small.min_patches = 6;
    small.max_patches = 10;
    small.feature_dim = 6;
    small.concepts = 4;
    small.seed = 3;
    StudyDataset tiny = synth_generate(small).dataset;
    for (auto& s : tiny.samples) {
        s.graph = build_knn_graph(s.patches, 3);
        s.graph_k = 3;
    }
    SurvivalRunOptions o2;
    o2.model.hidden = 16;
    o2.model.blocks = 1;
    o2.model.attention_dim = 8;
    o2.training.steps = 2;
    o2.training.batch_size = 16;
    o2.training.base_lr = 1e-3;
    o2.lambda_grid = {0.01, 0.1};
    o2.lambda_folds = 2;
    o2.auc_grid_points = 8;
    o2.seed = 21;
    const SettingResult e2e =
        run_survival_setting(tiny, SurvivalSetting::EndToEndCox, make_folds(tiny.size(), 2, 7), o2);
    const std::string text = render_setting_result(e2e);
    const bool na_ok = !e2e.ibs_applicable && e2e.ibs.folds == 0 &&
                       text.find("IBS    : N/A (no survival function)") != std::string::npos;

    note = "cbm IBS " + fmt(cbm_ibs) + " vs KM " + fmt(cbm_km) + ", binary IBS " + fmt(bin_ibs) +
           " vs KM " + fmt(bin_km) + ", e2e IBS " + (na_ok ? "N/A" : "NOT N/A");
    return beats_km && na_ok;
}

// ---------------------------------------------------------------------------
// criterion 7: identical seeds give byte-identical exported reports

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + cli + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

std::vector<std::string> relative_files(const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            files.push_back(fs::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

bool criterion_determinism(const std::string& cli, const fs::path& scratch, std::string& note) {
    const fs::path log = scratch / "cli_log.txt";
    testutil::write_text((scratch / "synth.cfg").string(),
                         "patients = 70\n"
                         "min_patches = 8\n"
                         "max_patches = 14\n"
                         "feature_dim = 6\n"
                         "concepts = 4\n");
    testutil::write_text((scratch / "tiny.cfg").string(),
                         "hidden = 16\n"
                         "blocks = 1\n"
                         "attention_dim = 8\n"
                         "steps = 3\n"
                         "batch_size = 16\n"
                         "base_lr = 0.001\n");

    for (const char* run : {"r1", "r2"}) {
        const std::string out = (scratch / run).string();
        const std::string base = "--seed 11 --out \"" + out + "\" ";
        const std::vector<std::string> steps{
            base + "synth --config \"" + (scratch / "synth.cfg").string() + "\"",
            base + "graph --k 4",
            base + "train-concepts --config \"" + (scratch / "tiny.cfg").string() + "\" --folds 2",
            base + "survival --setting binary --lambda-grid 0.01,0.1 --folds 3",
            base + "stratify --setting binary",
            base + "fairness --attribute gender --min-group 5",
            base + "export",
        };
        for (const std::string& args : steps) {
            if (run_cli(cli, args, log) != 0) {
                note = "command failed: " + args + " (log: " + log.string() + ")";
                return false;
            }
        }
    }

    const std::vector<std::string> left = relative_files(scratch / "r1");
    const std::vector<std::string> right = relative_files(scratch / "r2");
    if (left.empty() || left != right) {
        note = "run outputs disagree on file lists (" + std::to_string(left.size()) + " vs " +
               std::to_string(right.size()) + ")";
        return false;
    }
    std::size_t mismatches = 0;
    std::string first_bad;
    for (const std::string& rel : left) {
        if (!testutil::same_bytes((scratch / "r1" / rel).string(),
                                  (scratch / "r2" / rel).string())) {
            ++mismatches;
            if (first_bad.empty()) first_bad = rel;
        }
    }
    if (mismatches > 0) {
        note = std::to_string(mismatches) + " of " + std::to_string(left.size()) +
               " files differ, first: " + first_bad;
        return false;
    }
    note = std::to_string(left.size()) + " files byte-identical across two full runs";
    return true;
}

// ---------------------------------------------------------------------------
// criterion 8: destroyed signal lands both metrics at chance

bool criterion_null_control(std::string& note) {
    bool ok = true;
    std::ostringstream n;
    n << std::setprecision(3);
    for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
        SynthConfig cfg;
        cfg.patients = 120;
        cfg.min_patches = 6;
        cfg.max_patches = 10;
        cfg.feature_dim = 8;
        cfg.concepts = 4;
        cfg.hazard_coefficients = {0.0, 0.0, 0.0, 0.0};  // outcomes carry no concept signal
        cfg.seed = seed;
        StudyDataset ds = synth_generate(cfg).dataset;

        // Shuffling label rows across samples severs the feature-label link.
        Rng rng = Rng(seed).substream("shuffle");
        std::vector<std::size_t> perm(ds.samples.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        std::vector<std::vector<std::int8_t>> labels;
        for (const auto& s : ds.samples) labels.push_back(s.concepts.labels);
        for (std::size_t i = 0; i < perm.size(); ++i)
            ds.samples[i].concepts.labels = labels[perm[i]];

        for (auto& s : ds.samples) {
            s.graph = build_knn_graph(s.patches, 3);
            s.graph_k = 3;
        }
        const FoldPlan plan = make_folds(ds.size(), 3, seed);

        CbmConfig model;
        model.hidden = 16;
        model.blocks = 1;
        model.attention_dim = 8;
        TrainConfig training;
        training.steps = 4;
        training.batch_size = 16;
        training.base_lr = 1e-3;
        training.seed = seed;
        const ConceptBenchmark bench = run_concept_benchmark(ds, model, training, plan);

        SurvivalRunOptions opts;
        opts.lambda_grid = {0.01, 0.1};
        opts.lambda_folds = 3;
        opts.model = model;
        opts.training = training;
        opts.seed = seed;
        opts.fit_full_model = false;
        const SettingResult binary =
            run_survival_setting(ds, SurvivalSetting::BinaryConceptsCoxPH, plan, opts);

        const double auc = bench.mean.auc.mean;
        const double c = binary.cindex.mean;
        const bool in_band = auc >= 0.4 && auc <= 0.6 && c >= 0.4 && c <= 0.6;
        ok = ok && in_band;
        n << (seed == 101 ? "" : " ") << "seed " << seed << ": AUC " << auc << " C " << c
          << (in_band ? "" : " OUT");
    }
    note = n.str();
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <cli-binary> [scratch-dir]\n", argv[0]);
        return 2;
    }
    const std::string cli = argv[1];
    testutil::TempDir fallback;
    const fs::path scratch = argc >= 3 ? fs::path(argv[2]) : fs::path(fallback.str());
    fs::create_directories(scratch);

    SynthPipeline ctx;
    struct Criterion {
        const char* name;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria{
        {"gradient suite", criterion_gradients},
        {"CoxPH oracle", criterion_cox_oracle},
        {"estimator hand-checks", criterion_hand_checks},
        {"metric invariances", criterion_invariances},
        {"synthetic end-to-end", [&](std::string& s) { return criterion_synthetic(ctx, s); }},
        {"IBS ordering", [&](std::string& s) { return criterion_ibs_ordering(ctx, s); }},
        {"determinism",
         [&](std::string& s) { return criterion_determinism(cli, scratch, s); }},
        {"null control", criterion_null_control},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string detail;
        bool passed = false;
        try {
            passed = criteria[i].run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!passed) ++failures;
        std::printf("%s criterion %zu (%s): %s\n", passed ? "PASS" : "FAIL", i + 1,
                    criteria[i].name, detail.c_str());
        std::fflush(stdout);
    }
    if (failures > 0) std::printf("%d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
