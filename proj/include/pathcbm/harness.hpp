#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pathcbm/concepts.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/ingest.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/metrics.hpp"
#include "pathcbm/nn.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/rng.hpp"
#include "pathcbm/survival.hpp"

namespace pathcbm {

// ---------------------------------------------------------------------------
// Cross-validation folds

struct FoldPlan {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> test_folds;  // disjoint, cover 0..n-1

    std::size_t fold_count() const { return test_folds.size(); }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        if (fold >= test_folds.size())
            throw std::invalid_argument("FoldPlan: fold index out of range");
        std::vector<char> is_test(n, 0);
        for (std::size_t i : test_folds[fold]) is_test[i] = 1;
        std::vector<std::size_t> train;
        train.reserve(n - test_folds[fold].size());
        for (std::size_t i = 0; i < n; ++i)
            if (!is_test[i]) train.push_back(i);
        return train;
    }
};

inline FoldPlan make_folds(std::size_t n, std::size_t k = 5, std::uint64_t seed = 0) {
    if (k == 0) throw ValidationError("make_folds: need at least one fold");
    if (n < k)
        throw ValidationError("make_folds: cannot split " + std::to_string(n) +
                              " samples into " + std::to_string(k) + " folds");
    FoldPlan plan;
    plan.n = n;
    plan.seed = seed;
    plan.test_folds = split_folds(n, k, seed);
    for (auto& fold : plan.test_folds) std::sort(fold.begin(), fold.end());
    return plan;
}

// ---------------------------------------------------------------------------
// Survival settings

enum class SurvivalSetting {
    EndToEndCox,          // encoder + attention pool + scalar head, Cox loss
    AggFeaturesCoxPH,     // pooled hidden features of the end-to-end net -> CoxPH
    CbmLogitsCoxPH,       // concept soft logits -> CoxPH
    BinaryConceptsCoxPH,  // ground-truth binary labels -> CoxPH
};

inline SurvivalSetting parse_survival_setting(const std::string& name) {
    if (name == "e2e") return SurvivalSetting::EndToEndCox;
    if (name == "agg") return SurvivalSetting::AggFeaturesCoxPH;
    if (name == "cbm") return SurvivalSetting::CbmLogitsCoxPH;
    if (name == "binary") return SurvivalSetting::BinaryConceptsCoxPH;
    throw ValidationError("unknown survival setting '" + name +
                          "' (expected e2e, agg, cbm, or binary)");
}

inline std::string setting_slug(SurvivalSetting s) {
    switch (s) {
        case SurvivalSetting::EndToEndCox: return "e2e";
        case SurvivalSetting::AggFeaturesCoxPH: return "agg";
        case SurvivalSetting::CbmLogitsCoxPH: return "cbm";
        case SurvivalSetting::BinaryConceptsCoxPH: return "binary";
    }
    throw std::invalid_argument("setting_slug: bad enum value");
}

inline std::string to_string(SurvivalSetting s) {
    switch (s) {
        case SurvivalSetting::EndToEndCox: return "end-to-end Cox";
        case SurvivalSetting::AggFeaturesCoxPH: return "aggregated deep features + CoxPH";
        case SurvivalSetting::CbmLogitsCoxPH: return "concept logits + CoxPH";
        case SurvivalSetting::BinaryConceptsCoxPH: return "binary concepts + CoxPH";
    }
    throw std::invalid_argument("to_string: bad setting value");
}

// ---------------------------------------------------------------------------
// End-to-end survival network: shared encoder, one gated attention pool, and
// a scalar risk head trained with the Breslow negative log partial likelihood
// over each mini-batch's risk sets.

struct CoxNet {
    CbmConfig config;
    std::size_t input_dim = 0;
    std::vector<CbmModel::Block> encoder;
    GatedAttentionPool pool;
    Linear head;  // hidden -> 1

    CoxNet() = default;

    CoxNet(std::size_t in_dim, CbmConfig cfg, std::uint64_t seed)
        : config(cfg), input_dim(in_dim) {
        config.validate();
        if (input_dim == 0) throw ValidationError("CoxNet: input dimension must be >= 1");
        Rng rng = Rng(seed).substream("init");
        for (std::size_t b = 0; b < config.blocks; ++b) {
            CbmModel::Block block;
            block.linear = Linear(b == 0 ? input_dim : config.hidden, config.hidden);
            block.gat = GatLayer(config.hidden, config.hidden);
            Rng r1 = rng.substream("linear", b);
            Rng r2 = rng.substream("gat", b);
            block.linear.init(r1);
            block.gat.init(r2);
            encoder.push_back(std::move(block));
        }
        pool = GatedAttentionPool(config.hidden, config.attention_dim);
        Rng rp = rng.substream("pool", 0);
        pool.init(rp);
        head = Linear(config.hidden, 1);
        Rng rh = rng.substream("head");
        head.init(rh);
    }

    std::vector<NamedParam> parameters() {
        std::vector<NamedParam> params;
        for (std::size_t b = 0; b < encoder.size(); ++b) {
            encoder[b].linear.collect(params, "enc" + std::to_string(b) + ".linear");
            encoder[b].gat.collect(params, "enc" + std::to_string(b) + ".gat");
        }
        pool.collect(params, "pool");
        head.collect(params, "head");
        return params;
    }
};

namespace detail {

struct CoxNetCache {
    std::vector<std::vector<std::uint32_t>> adjacency;
    std::vector<DenseMatrix> lin_in;
    std::vector<DenseMatrix> lin_out;
    std::vector<DenseMatrix> gat_in;
    std::vector<GatLayer::Cache> gat;
    DenseMatrix encoded;
    GatedAttentionPool::Cache pool;
    DenseMatrix pooled;  // 1 x hidden
};

inline double coxnet_forward_cached(CoxNet& model, const WsiGraph& graph, CoxNetCache& cache) {
    if (graph.node_count() == 0)
        throw ValidationError("coxnet_forward: graph '" + graph.slide_id + "' has no nodes");
    if (graph.feature_dim() != model.input_dim)
        throw std::invalid_argument("coxnet_forward: graph feature dim " +
                                    std::to_string(graph.feature_dim()) +
                                    " != model input dim " + std::to_string(model.input_dim));
    cache.adjacency = graph.adjacency();
    const std::size_t blocks = model.encoder.size();
    cache.lin_in.resize(blocks);
    cache.lin_out.resize(blocks);
    cache.gat_in.resize(blocks);
    cache.gat.resize(blocks);

    DenseMatrix h = graph.node_features;
    for (std::size_t b = 0; b < blocks; ++b) {
        cache.lin_in[b] = h;
        cache.lin_out[b] = model.encoder[b].linear.forward(h);
        cache.gat_in[b] = relu(cache.lin_out[b]);
        h = model.encoder[b].gat.forward(cache.adjacency, cache.gat_in[b], &cache.gat[b]);
    }
    cache.encoded = std::move(h);
    auto pooled = model.pool.forward(cache.encoded, &cache.pool);
    cache.pooled = std::move(pooled.pooled);
    DenseMatrix eta = model.head.forward(cache.pooled);
    return eta.at(0, 0);
}

inline void coxnet_backward(CoxNet& model, const CoxNetCache& cache, double d_eta) {
    DenseMatrix d_out(1, 1);
    d_out.at(0, 0) = d_eta;
    DenseMatrix d_pooled = model.head.backward(cache.pooled, d_out);
    DenseMatrix d_h = model.pool.backward(cache.encoded, cache.pool, d_pooled);
    for (std::size_t b = model.encoder.size(); b-- > 0;) {
        DenseMatrix d_act = model.encoder[b].gat.backward(cache.gat_in[b], cache.gat[b], d_h);
        DenseMatrix d_lin = relu_backward(cache.lin_out[b], d_act);
        d_h = model.encoder[b].linear.backward(cache.lin_in[b], d_lin);
    }
}

}  // namespace detail

struct CoxNetOutput {
    double risk = 0.0;            // scalar log-hazard score
    std::vector<double> pooled;   // attention-pooled hidden features
};

inline CoxNetOutput coxnet_forward(CoxNet& model, const WsiGraph& graph) {
    detail::CoxNetCache cache;
    CoxNetOutput out;
    out.risk = detail::coxnet_forward_cached(model, graph, cache);
    out.pooled.assign(cache.pooled.row(0), cache.pooled.row(0) + cache.pooled.cols);
    return out;
}

// Mini-batch Cox training: each batch forms its own risk set. Batches without
// any event carry no likelihood information and are skipped. Returns one
// mean-batch-loss entry per epoch (or per step when steps_are_epochs=false).
inline std::vector<double> train_coxnet(CoxNet& model,
                                        const std::vector<const WsiGraph*>& graphs,
                                        const std::vector<SurvivalRecord>& records,
                                        const TrainConfig& config) {
    config.validate();
    if (graphs.empty()) throw ValidationError("train_coxnet: no training examples");
    if (graphs.size() != records.size())
        throw std::invalid_argument("train_coxnet: graph/record count mismatch");
    std::size_t n_events = 0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        if (!graphs[i])
            throw ValidationError("train_coxnet: example " + std::to_string(i) + " has no graph");
        n_events += records[i].event ? 1 : 0;
    }
    if (n_events == 0) throw ValidationError("train_coxnet: no events in training data");

    const std::size_t n = graphs.size();
    const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total_opt_steps =
        config.steps_are_epochs ? config.steps * batches_per_epoch : config.steps;
    const std::size_t epochs = config.steps_are_epochs
                                   ? config.steps
                                   : (config.steps + batches_per_epoch - 1) / batches_per_epoch;

    CosineSchedule schedule{config.base_lr, total_opt_steps, config.floor_lr};
    AdamState adam;
    adam.base_lr = config.base_lr;
    adam.weight_decay = config.weight_decay;
    auto params = model.parameters();

    Rng root = Rng(config.seed).substream("train-cox");
    std::vector<double> trace;
    std::vector<detail::CoxNetCache> caches(config.batch_size);

    std::size_t opt_step = 0;
    for (std::size_t epoch = 0; epoch < epochs && opt_step < total_opt_steps; ++epoch) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffler = root.substream("epoch", epoch);
        shuffler.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < n && opt_step < total_opt_steps;
             start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::size_t b = stop - start;
            std::vector<double> eta(b), times(b);
            std::vector<std::uint8_t> events(b);
            bool any_event = false;
            for (std::size_t q = 0; q < b; ++q) {
                const std::size_t idx = order[start + q];
                times[q] = records[idx].time;
                events[q] = records[idx].event ? 1 : 0;
                any_event = any_event || records[idx].event;
            }
            if (!any_event) continue;  // no risk-set information in this batch

            zero_grads(params);
            for (std::size_t q = 0; q < b; ++q)
                eta[q] = detail::coxnet_forward_cached(model, *graphs[order[start + q]],
                                                       caches[q]);
            std::vector<double> d_eta;
            const double loss = cox_breslow_nll(eta, times, events, &d_eta);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_coxnet: non-finite loss at optimizer step " +
                                         std::to_string(opt_step + 1));
            for (std::size_t q = 0; q < b; ++q)
                detail::coxnet_backward(model, caches[q], d_eta[q]);
            adam_step(params, adam, schedule.lr(opt_step));
            ++opt_step;
            epoch_loss += loss;
            ++epoch_batches;
            if (!config.steps_are_epochs) trace.push_back(loss);
        }
        if (config.steps_are_epochs)
            trace.push_back(epoch_batches > 0
                                ? epoch_loss / static_cast<double>(epoch_batches)
                                : std::numeric_limits<double>::quiet_NaN());
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Fold aggregation

struct MetricSummary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double stddev = std::numeric_limits<double>::quiet_NaN();
    std::size_t folds = 0;  // folds contributing a defined value
};

inline MetricSummary summarize_metric(const std::vector<double>& values) {
    MetricSummary s;
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    s.folds = finite.size();
    if (finite.empty()) return s;
    double sum = 0.0;
    for (double v : finite) sum += v;
    s.mean = sum / static_cast<double>(finite.size());
    if (finite.size() == 1) {
        s.stddev = 0.0;
        return s;
    }
    double ss = 0.0;
    for (double v : finite) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(finite.size() - 1));
    return s;
}

namespace detail {

inline void require_graphs(const StudyDataset& dataset, const char* where) {
    for (const StudySample& s : dataset.samples)
        if (!s.has_graph())
            throw ValidationError(std::string(where) + ": sample '" + s.patient_id +
                                  "' has no graph; run the graph step first");
}

// Runs fn(0..count-1), spreading folds over up to `workers` threads. Each
// call writes only to its own slot, so no synchronization beyond the work
// queue is needed. First captured exception is rethrown after the join.
template <typename Fn>
inline void parallel_folds(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) break;
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::vector<SurvivalRecord> gather_records(const StudyDataset& dataset,
                                                  const std::vector<std::size_t>& idx) {
    std::vector<SurvivalRecord> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(dataset.samples[i].outcome);
    return out;
}

// Missing labels enter CoxPH as 0.5, halfway between absent and present.
inline DenseMatrix binary_feature_matrix(const StudyDataset& dataset) {
    const std::size_t k = dataset.vocabulary.size();
    DenseMatrix x(dataset.samples.size(), k);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        for (std::size_t c = 0; c < k; ++c) {
            const std::int8_t y = dataset.samples[i].concepts.labels[c];
            x.at(i, c) = y == kMissingLabel ? 0.5 : static_cast<double>(y);
        }
    return x;
}

inline std::vector<std::string> pooled_feature_names(std::size_t hidden) {
    std::vector<std::string> names(hidden);
    for (std::size_t c = 0; c < hidden; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "pooled_%03zu", c);
        names[c] = buf;
    }
    return names;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Survival setting runner

struct SurvivalRunOptions {
    std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0};
    std::size_t lambda_folds = 5;
    CbmConfig model;       // encoder shape for cbm/agg/e2e
    TrainConfig training;  // optimizer settings for cbm/agg/e2e
    std::uint64_t seed = 0;
    std::size_t auc_grid_points = 32;
    std::size_t workers = 1;
    bool fit_full_model = true;  // also fit on all samples (cbm/binary only)
};

struct FoldOutcome {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t test_events = 0;
    double lambda = std::numeric_limits<double>::quiet_NaN();  // NaN for e2e
    double tau = std::numeric_limits<double>::quiet_NaN();
    double cindex = std::numeric_limits<double>::quiet_NaN();
    double cipcw = std::numeric_limits<double>::quiet_NaN();
    double cauc = std::numeric_limits<double>::quiet_NaN();
    double ibs = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> beta;  // fitted coefficients; empty for e2e
    std::vector<std::string> feature_names;
    std::vector<std::size_t> test_indices;  // into dataset.samples
    std::vector<double> test_risks;         // out-of-fold risk scores
    std::vector<double> auc_times;          // defined AUC grid points
    std::vector<double> auc_values;
};

struct SettingResult {
    SurvivalSetting setting{};
    bool ibs_applicable = true;
    MetricSummary cindex, cipcw, cauc, ibs;
    std::vector<FoldOutcome> folds;  // folds that produced risks
    std::vector<std::size_t> dropped_folds;
    std::vector<std::string> warnings;
    bool has_full_model = false;
    CoxModel full_model;  // fitted on all samples (cbm/binary only)
};

namespace detail {

struct FoldFeatures {
    DenseMatrix train;  // may be empty for e2e
    DenseMatrix test;
    std::vector<std::string> names;
    std::vector<double> direct_risks;  // e2e only: risks for test rows
    bool direct = false;
};

inline DenseMatrix cbm_feature_rows(CbmModel& model, const StudyDataset& dataset,
                                    const std::vector<std::size_t>& idx) {
    DenseMatrix x(idx.size(), model.concept_count());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        ConceptPrediction p = predict_concepts(model, dataset.samples[idx[i]].graph);
        for (std::size_t c = 0; c < p.soft.size(); ++c) x.at(i, c) = p.soft[c];
    }
    return x;
}

inline DenseMatrix pooled_feature_rows(CoxNet& model, const StudyDataset& dataset,
                                       const std::vector<std::size_t>& idx) {
    DenseMatrix x(idx.size(), model.config.hidden);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CoxNetOutput out = coxnet_forward(model, dataset.samples[idx[i]].graph);
        for (std::size_t c = 0; c < out.pooled.size(); ++c) x.at(i, c) = out.pooled[c];
    }
    return x;
}

inline std::vector<ConceptExample> concept_examples(const StudyDataset& dataset,
                                                    const std::vector<std::size_t>& idx) {
    std::vector<ConceptExample> examples;
    examples.reserve(idx.size());
    for (std::size_t i : idx)
        examples.push_back({&dataset.samples[i].graph, dataset.samples[i].concepts.labels});
    return examples;
}

inline std::vector<const WsiGraph*> graph_pointers(const StudyDataset& dataset,
                                                   const std::vector<std::size_t>& idx) {
    std::vector<const WsiGraph*> graphs;
    graphs.reserve(idx.size());
    for (std::size_t i : idx) graphs.push_back(&dataset.samples[i].graph);
    return graphs;
}

// Builds the design matrices (or direct risks for the end-to-end setting)
// for one train/test split. Any model fitting here sees only training rows.
inline FoldFeatures build_fold_features(const StudyDataset& dataset, SurvivalSetting setting,
                                        const std::vector<std::size_t>& train,
                                        const std::vector<std::size_t>& test,
                                        const SurvivalRunOptions& options,
                                        std::uint64_t model_seed) {
    FoldFeatures f;
    switch (setting) {
        case SurvivalSetting::BinaryConceptsCoxPH: {
            DenseMatrix all = binary_feature_matrix(dataset);
            f.train = take_rows(all, train);
            f.test = take_rows(all, test);
            f.names = dataset.vocabulary.names;
            break;
        }
        case SurvivalSetting::CbmLogitsCoxPH: {
            CbmModel model(dataset.samples[train[0]].graph.feature_dim(), options.model,
                           dataset.vocabulary, model_seed);
            TrainConfig cfg = options.training;
            cfg.seed = model_seed;
            train_cbm(model, concept_examples(dataset, train), cfg);
            f.train = cbm_feature_rows(model, dataset, train);
            f.test = cbm_feature_rows(model, dataset, test);
            f.names = dataset.vocabulary.names;
            break;
        }
        case SurvivalSetting::AggFeaturesCoxPH:
        case SurvivalSetting::EndToEndCox: {
            CoxNet net(dataset.samples[train[0]].graph.feature_dim(), options.model,
                       model_seed);
            TrainConfig cfg = options.training;
            cfg.seed = model_seed;
            train_coxnet(net, graph_pointers(dataset, train),
                         gather_records(dataset, train), cfg);
            if (setting == SurvivalSetting::AggFeaturesCoxPH) {
                f.train = pooled_feature_rows(net, dataset, train);
                f.test = pooled_feature_rows(net, dataset, test);
                f.names = pooled_feature_names(net.config.hidden);
            } else {
                f.direct = true;
                f.direct_risks.reserve(test.size());
                for (std::size_t i : test)
                    f.direct_risks.push_back(coxnet_forward(net, dataset.samples[i].graph).risk);
            }
            break;
        }
    }
    return f;
}

}  // namespace detail

inline SettingResult run_survival_setting(const StudyDataset& dataset, SurvivalSetting setting,
                                          const FoldPlan& plan,
                                          const SurvivalRunOptions& options = {}) {
    if (dataset.samples.empty()) throw ValidationError("run_survival_setting: empty dataset");
    if (plan.n != dataset.samples.size())
        throw ValidationError("run_survival_setting: fold plan covers " + std::to_string(plan.n) +
                              " samples but dataset has " +
                              std::to_string(dataset.samples.size()));
    if (setting != SurvivalSetting::BinaryConceptsCoxPH)
        detail::require_graphs(dataset, "run_survival_setting");
    options.model.validate();
    options.training.validate();

    SettingResult result;
    result.setting = setting;
    result.ibs_applicable = setting != SurvivalSetting::EndToEndCox;

    const std::size_t fold_count = plan.fold_count();
    std::vector<std::optional<FoldOutcome>> slots(fold_count);
    std::vector<std::vector<std::string>> fold_warnings(fold_count);

    detail::parallel_folds(fold_count, options.workers, [&](std::size_t f) {
        auto warn = [&](const std::string& msg) {
            fold_warnings[f].push_back("fold " + std::to_string(f) + ": " + msg);
        };
        const std::vector<std::size_t>& test = plan.test_folds[f];
        const std::vector<std::size_t> train = plan.train_indices(f);
        if (train.empty() || test.empty()) {
            warn("dropped: empty split");
            return;
        }
        std::vector<SurvivalRecord> train_records = detail::gather_records(dataset, train);
        std::vector<SurvivalRecord> test_records = detail::gather_records(dataset, test);
        std::size_t test_events = 0;
        for (const auto& r : test_records) test_events += r.event ? 1 : 0;
        if (test_events == 0) {
            warn("dropped: no events in test fold");
            return;
        }

        FoldOutcome fo;
        fo.fold = f;
        fo.n_train = train.size();
        fo.n_test = test.size();
        fo.test_events = test_events;
        fo.test_indices = test;

        const std::uint64_t model_seed = Rng(options.seed).substream("setting-fold", f).seed();
        CoxModel cox;
        bool have_cox = false;
        DenseMatrix test_features;
        try {
            detail::FoldFeatures feats =
                detail::build_fold_features(dataset, setting, train, test, options, model_seed);
            if (feats.direct) {
                fo.test_risks = std::move(feats.direct_risks);
            } else {
                LambdaSelection sel =
                    select_lambda(feats.train, train_records, options.lambda_grid,
                                  options.lambda_folds,
                                  Rng(options.seed).substream("lambda", f).seed());
                for (const std::string& w : sel.warnings) warn("lambda: " + w);
                fo.lambda = sel.best_lambda;
                cox = fit_coxph(feats.train, train_records, sel.best_lambda, feats.names);
                have_cox = true;
                fo.beta = cox.beta;
                fo.feature_names = feats.names;
                fo.test_risks = predict_risk(cox, feats.test);
                test_features = std::move(feats.test);
            }
        } catch (const ValidationError& e) {
            warn(std::string("dropped: ") + e.what());
            return;
        } catch (const ConvergenceError& e) {
            warn(std::string("dropped: ") + e.what());
            return;
        }

        try {
            fo.cindex = harrell_cindex(fo.test_risks, test_records);
        } catch (const std::exception& e) {
            warn(std::string("C-Index unavailable: ") + e.what());
        }
        fo.tau = default_tau(test_records);
        try {
            IpcwCindex u = uno_cindex_ipcw(fo.test_risks, train_records, test_records, fo.tau);
            fo.cipcw = u.value;
            if (u.clipped > 0)
                warn("C-IPCW clipped " + std::to_string(u.clipped) + " censoring weights");
        } catch (const std::exception& e) {
            warn(std::string("C-IPCW unavailable: ") + e.what());
        }
        try {
            std::vector<double> grid = default_time_grid(test_records, options.auc_grid_points);
            DynamicAucResult dyn =
                cumulative_dynamic_auc(fo.test_risks, train_records, test_records, grid);
            fo.cauc = dyn.integrated;
            if (dyn.excluded > 0)
                warn("time-dependent AUC: " + std::to_string(dyn.excluded) +
                     " undefined grid points excluded");
            for (std::size_t g = 0; g < dyn.times.size(); ++g)
                if (std::isfinite(dyn.auc[g])) {
                    fo.auc_times.push_back(dyn.times[g]);
                    fo.auc_values.push_back(dyn.auc[g]);
                }
            if (have_cox && result.ibs_applicable) {
                std::vector<double> ibs_grid;
                for (double t : grid)
                    if (t <= cox.max_time) ibs_grid.push_back(t);
                if (ibs_grid.size() < 2) {
                    warn("IBS unavailable: time grid collapses after clipping to the training "
                         "horizon");
                } else {
                    DenseMatrix surv(test.size(), ibs_grid.size());
                    for (std::size_t i = 0; i < test.size(); ++i) {
                        std::vector<double> xrow(test_features.row(i),
                                                 test_features.row(i) + test_features.cols);
                        std::vector<double> s = predict_survival(cox, xrow, ibs_grid);
                        for (std::size_t g = 0; g < s.size(); ++g) surv.at(i, g) = s[g];
                    }
                    BrierResult brier =
                        integrated_brier_score(surv, train_records, test_records, ibs_grid);
                    fo.ibs = brier.ibs;
                    if (brier.clipped > 0)
                        warn("IBS clipped " + std::to_string(brier.clipped) +
                             " censoring weights");
                }
            }
        } catch (const std::exception& e) {
            warn(std::string("time-grid metrics unavailable: ") + e.what());
        }

        slots[f] = std::move(fo);
    });

    std::vector<double> c, u, a, b;
    for (std::size_t f = 0; f < fold_count; ++f) {
        for (auto& w : fold_warnings[f]) result.warnings.push_back(std::move(w));
        if (!slots[f]) {
            result.dropped_folds.push_back(f);
            continue;
        }
        c.push_back(slots[f]->cindex);
        u.push_back(slots[f]->cipcw);
        a.push_back(slots[f]->cauc);
        b.push_back(slots[f]->ibs);
        result.folds.push_back(std::move(*slots[f]));
    }
    if (result.folds.empty())
        throw ValidationError("run_survival_setting: every fold was dropped");
    result.cindex = summarize_metric(c);
    result.cipcw = summarize_metric(u);
    result.cauc = summarize_metric(a);
    if (result.ibs_applicable) result.ibs = summarize_metric(b);

    if (options.fit_full_model && (setting == SurvivalSetting::CbmLogitsCoxPH ||
                                   setting == SurvivalSetting::BinaryConceptsCoxPH)) {
        std::vector<std::size_t> all(dataset.samples.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        std::vector<SurvivalRecord> records = detail::gather_records(dataset, all);
        try {
            const std::uint64_t full_seed = Rng(options.seed).substream("setting-full").seed();
            detail::FoldFeatures feats =
                detail::build_fold_features(dataset, setting, all, all, options, full_seed);
            LambdaSelection sel =
                select_lambda(feats.train, records, options.lambda_grid, options.lambda_folds,
                              Rng(options.seed).substream("lambda-full").seed());
            result.full_model = fit_coxph(feats.train, records, sel.best_lambda, feats.names);
            result.has_full_model = true;
        } catch (const std::exception& e) {
            result.warnings.push_back(std::string("full-data model unavailable: ") + e.what());
        }
    }
    return result;
}

// Out-of-fold risk per sample; NaN where the sample's fold was dropped.
inline std::vector<double> assemble_crossfit_risks(const SettingResult& result, std::size_t n) {
    std::vector<double> risks(n, std::numeric_limits<double>::quiet_NaN());
    for (const FoldOutcome& fo : result.folds)
        for (std::size_t i = 0; i < fo.test_indices.size(); ++i) {
            if (fo.test_indices[i] >= n)
                throw std::invalid_argument("assemble_crossfit_risks: index out of range");
            risks[fo.test_indices[i]] = fo.test_risks[i];
        }
    return risks;
}

// ---------------------------------------------------------------------------
// Concept benchmark

struct ConceptMetricRow {
    std::string name;
    MetricSummary acc, f1, auc, ap;
};

struct ConceptBenchmark {
    std::vector<ConceptMetricRow> concepts;  // K rows
    ConceptMetricRow top10;                  // per-fold best-10 mean (by each metric)
    ConceptMetricRow mean;                   // per-fold mean over defined concepts
    std::vector<std::size_t> subtype_indices;  // concepts named after subtypes
    std::vector<std::string> warnings;
};

namespace detail {

inline bool name_contains_nocase(const std::string& haystack, const std::string& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < needle.size(); ++j)
            if (std::tolower(static_cast<unsigned char>(haystack[i + j])) !=
                std::tolower(static_cast<unsigned char>(needle[j]))) {
                hit = false;
                break;
            }
        if (hit) return true;
    }
    return false;
}

}  // namespace detail

inline ConceptBenchmark run_concept_benchmark(const StudyDataset& dataset,
                                              const CbmConfig& model_config,
                                              const TrainConfig& train_config,
                                              const FoldPlan& plan, std::size_t workers = 1) {
    if (dataset.samples.empty()) throw ValidationError("run_concept_benchmark: empty dataset");
    if (plan.n != dataset.samples.size())
        throw ValidationError("run_concept_benchmark: fold plan covers " +
                              std::to_string(plan.n) + " samples but dataset has " +
                              std::to_string(dataset.samples.size()));
    detail::require_graphs(dataset, "run_concept_benchmark");
    model_config.validate();
    train_config.validate();

    const std::size_t k_count = dataset.vocabulary.size();
    const std::size_t fold_count = plan.fold_count();
    constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

    struct FoldEval {
        DenseMatrix acc, f1, auc, ap;          // K x 1 per-fold values (as columns later)
        double top_acc, top_f1, top_auc, top_ap;
        double mean_acc, mean_f1, mean_auc, mean_ap;
        std::vector<std::string> warnings;
    };
    std::vector<std::optional<FoldEval>> evals(fold_count);

    detail::parallel_folds(fold_count, workers, [&](std::size_t f) {
        FoldEval ev;
        ev.acc = DenseMatrix(k_count, 1);
        ev.f1 = DenseMatrix(k_count, 1);
        ev.auc = DenseMatrix(k_count, 1);
        ev.ap = DenseMatrix(k_count, 1);
        ev.acc.fill(kNan);
        ev.f1.fill(kNan);
        ev.auc.fill(kNan);
        ev.ap.fill(kNan);

        const std::vector<std::size_t> train = plan.train_indices(f);
        const std::vector<std::size_t>& test = plan.test_folds[f];
        const std::uint64_t fold_seed =
            Rng(train_config.seed).substream("benchmark-fold", f).seed();
        CbmModel model(dataset.samples[train[0]].graph.feature_dim(), model_config,
                       dataset.vocabulary, fold_seed);
        TrainConfig cfg = train_config;
        cfg.seed = fold_seed;
        train_cbm(model, detail::concept_examples(dataset, train), cfg);

        std::vector<std::vector<double>> scores(k_count);
        std::vector<std::vector<int>> preds(k_count), labels(k_count);
        for (std::size_t i : test) {
            ConceptPrediction p = predict_concepts(model, dataset.samples[i].graph);
            const auto& y = dataset.samples[i].concepts.labels;
            for (std::size_t k = 0; k < k_count; ++k) {
                if (y[k] == kMissingLabel) continue;
                scores[k].push_back(p.soft[k]);
                preds[k].push_back(p.hard[k]);
                labels[k].push_back(y[k]);
            }
        }
        for (std::size_t k = 0; k < k_count; ++k) {
            if (labels[k].empty()) {
                ev.warnings.push_back("fold " + std::to_string(f) + ": concept '" +
                                      dataset.vocabulary.names[k] +
                                      "' has no labelled test samples");
                continue;
            }
            try {
                ev.acc.at(k, 0) = balanced_accuracy(preds[k], labels[k]);
            } catch (const std::exception&) {
            }
            try {
                ev.f1.at(k, 0) = f1_score(preds[k], labels[k]);
            } catch (const std::exception&) {
            }
            try {
                ev.auc.at(k, 0) = roc_auc(scores[k], labels[k]);
            } catch (const std::exception&) {
            }
            try {
                ev.ap.at(k, 0) = average_precision(scores[k], labels[k]);
            } catch (const std::exception&) {
            }
        }
        auto fold_summary = [&](const DenseMatrix& col, double& top, double& mean) {
            std::vector<double> vals(k_count);
            for (std::size_t k = 0; k < k_count; ++k) vals[k] = col.at(k, 0);
            ConceptSummary s = concept_summary(vals);
            top = s.used > 0 ? s.top_mean : kNan;
            mean = s.used > 0 ? s.mean : kNan;
        };
        fold_summary(ev.acc, ev.top_acc, ev.mean_acc);
        fold_summary(ev.f1, ev.top_f1, ev.mean_f1);
        fold_summary(ev.auc, ev.top_auc, ev.mean_auc);
        fold_summary(ev.ap, ev.top_ap, ev.mean_ap);
        evals[f] = std::move(ev);
    });

    ConceptBenchmark bench;
    auto across = [&](auto pick) {
        std::vector<double> vals;
        for (const auto& ev : evals)
            if (ev) vals.push_back(pick(*ev));
        return summarize_metric(vals);
    };
    for (std::size_t k = 0; k < k_count; ++k) {
        ConceptMetricRow row;
        row.name = dataset.vocabulary.names[k];
        row.acc = across([&](const FoldEval& e) { return e.acc.at(k, 0); });
        row.f1 = across([&](const FoldEval& e) { return e.f1.at(k, 0); });
        row.auc = across([&](const FoldEval& e) { return e.auc.at(k, 0); });
        row.ap = across([&](const FoldEval& e) { return e.ap.at(k, 0); });
        bench.concepts.push_back(std::move(row));
    }
    bench.top10.name = "Top10";
    bench.top10.acc = across([](const FoldEval& e) { return e.top_acc; });
    bench.top10.f1 = across([](const FoldEval& e) { return e.top_f1; });
    bench.top10.auc = across([](const FoldEval& e) { return e.top_auc; });
    bench.top10.ap = across([](const FoldEval& e) { return e.top_ap; });
    bench.mean.name = "Mean";
    bench.mean.acc = across([](const FoldEval& e) { return e.mean_acc; });
    bench.mean.f1 = across([](const FoldEval& e) { return e.mean_f1; });
    bench.mean.auc = across([](const FoldEval& e) { return e.mean_auc; });
    bench.mean.ap = across([](const FoldEval& e) { return e.mean_ap; });

    for (std::size_t k = 0; k < k_count; ++k)
        for (const char* subtype : {"ccRCC", "pRCC", "chRCC"})
            if (detail::name_contains_nocase(dataset.vocabulary.names[k], subtype)) {
                bench.subtype_indices.push_back(k);
                break;
            }
    for (const auto& ev : evals)
        if (ev)
            for (const auto& w : ev->warnings) bench.warnings.push_back(w);
    return bench;
}

// ---------------------------------------------------------------------------
// Risk-factor ranking

struct RiskFactor {
    std::string name;
    double coefficient = 0.0;
};

// Concepts ranked by coefficient magnitude, sign preserved. Exactly-zero
// coefficients carry no risk information and are omitted.
inline std::vector<RiskFactor> top_risk_factors(const CoxModel& model, std::size_t k = 10) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < model.beta.size(); ++i)
        if (model.beta[i] != 0.0) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::fabs(model.beta[a]);
        const double mb = std::fabs(model.beta[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    if (order.size() > k) order.resize(k);
    std::vector<RiskFactor> out;
    out.reserve(order.size());
    for (std::size_t i : order) {
        RiskFactor rf;
        rf.name = i < model.feature_names.size() ? model.feature_names[i]
                                                 : "feature_" + std::to_string(i);
        rf.coefficient = model.beta[i];
        out.push_back(std::move(rf));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Risk stratification

struct RiskGroups {
    double threshold = 0.0;          // mean risk
    std::vector<std::size_t> low;    // risk < mean
    std::vector<std::size_t> high;   // risk >= mean
};

inline RiskGroups split_by_mean(const std::vector<double>& risks) {
    if (risks.empty()) throw ValidationError("split_by_mean: no risks");
    double sum = 0.0;
    for (double r : risks) {
        if (!std::isfinite(r)) throw ValidationError("split_by_mean: non-finite risk score");
        sum += r;
    }
    RiskGroups g;
    g.threshold = sum / static_cast<double>(risks.size());
    for (std::size_t i = 0; i < risks.size(); ++i)
        (risks[i] < g.threshold ? g.low : g.high).push_back(i);
    return g;
}

struct StratifyResult {
    RiskGroups groups;
    KmCurve low_curve;   // empty when the low group is empty
    KmCurve high_curve;  // empty when the high group is empty
    bool test_performed = false;
    LogRankResult test;
    std::string note;  // why the test was skipped, when it was
};

inline StratifyResult stratify_and_test(const std::vector<double>& risks,
                                        const std::vector<SurvivalRecord>& records) {
    if (risks.size() != records.size())
        throw std::invalid_argument("stratify_and_test: risks/records length mismatch");
    StratifyResult out;
    out.groups = split_by_mean(risks);

    std::vector<SurvivalRecord> low_records, high_records;
    for (std::size_t i : out.groups.low) low_records.push_back(records[i]);
    for (std::size_t i : out.groups.high) high_records.push_back(records[i]);
    if (!low_records.empty()) out.low_curve = km_fit(low_records);
    if (!high_records.empty()) out.high_curve = km_fit(high_records);

    if (low_records.empty() || high_records.empty()) {
        out.note = std::string(low_records.empty() ? "low" : "high") +
                   "-risk group is empty; log-rank test skipped";
        return out;
    }
    try {
        out.test = logrank_test({low_records, high_records}, {"low", "high"});
        out.test_performed = true;
    } catch (const std::exception& e) {
        out.note = std::string("log-rank test unavailable: ") + e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fairness report

enum class FairnessAttribute { Gender, Race };

inline FairnessAttribute parse_fairness_attribute(const std::string& name) {
    if (name == "gender") return FairnessAttribute::Gender;
    if (name == "race") return FairnessAttribute::Race;
    throw ValidationError("unknown fairness attribute '" + name +
                          "' (expected gender or race)");
}

inline std::string to_string(FairnessAttribute a) {
    return a == FairnessAttribute::Gender ? "gender" : "race";
}

struct FairnessGroup {
    std::string name;
    std::size_t size = 0;
    KmCurve curve;
};

struct ExcludedGroup {
    std::string name;
    std::size_t size = 0;
    std::string reason;
};

struct FairnessStratum {
    std::string stratum;  // "low" or "high"
    std::size_t stratum_size = 0;
    std::vector<FairnessGroup> groups;
    std::vector<ExcludedGroup> excluded;
    bool test_performed = false;
    LogRankResult test;
    std::string note;
};

struct FairnessReport {
    FairnessAttribute attribute{};
    std::size_t min_group = 20;
    std::vector<FairnessStratum> strata;
};

namespace detail {

inline std::optional<std::string> fairness_category(const DemographicRecord& demo,
                                                    FairnessAttribute attribute) {
    if (attribute == FairnessAttribute::Gender) {
        switch (demo.gender) {
            case Gender::Female: return "female";
            case Gender::Male: return "male";
            case Gender::Unknown: return std::nullopt;
        }
    } else {
        switch (demo.race) {
            case Race::White: return "white";
            case Race::Black: return "black";
            case Race::Asian: return "asian";
            case Race::NotAvailable: return "na";
            case Race::Unknown: return std::nullopt;
        }
    }
    return std::nullopt;
}

inline std::vector<std::string> fairness_categories(FairnessAttribute attribute) {
    if (attribute == FairnessAttribute::Gender) return {"female", "male"};
    return {"white", "black", "asian", "na"};
}

}  // namespace detail

// Within each risk stratum, compares survival across demographic subgroups.
// Subgroups below the minimum size (and members missing the attribute) are
// excluded and reported rather than silently dropped.
inline FairnessReport fairness_report(const RiskGroups& risk_groups,
                                      const std::vector<SurvivalRecord>& records,
                                      const std::vector<DemographicRecord>& demographics,
                                      FairnessAttribute attribute, std::size_t min_group = 20) {
    if (records.size() != demographics.size())
        throw std::invalid_argument("fairness_report: records/demographics length mismatch");
    for (std::size_t i : risk_groups.low)
        if (i >= records.size())
            throw std::invalid_argument("fairness_report: risk group index out of range");
    for (std::size_t i : risk_groups.high)
        if (i >= records.size())
            throw std::invalid_argument("fairness_report: risk group index out of range");

    FairnessReport report;
    report.attribute = attribute;
    report.min_group = min_group;
    const std::vector<std::string> categories = detail::fairness_categories(attribute);

    const std::pair<const char*, const std::vector<std::size_t>*> strata[] = {
        {"low", &risk_groups.low}, {"high", &risk_groups.high}};
    for (const auto& [name, members] : strata) {
        FairnessStratum stratum;
        stratum.stratum = name;
        stratum.stratum_size = members->size();
        if (members->empty()) {
            stratum.note = "stratum is empty";
            report.strata.push_back(std::move(stratum));
            continue;
        }
        std::vector<std::vector<SurvivalRecord>> bucket(categories.size());
        std::size_t missing = 0;
        for (std::size_t i : *members) {
            std::optional<std::string> cat = detail::fairness_category(demographics[i], attribute);
            if (!cat) {
                ++missing;
                continue;
            }
            for (std::size_t c = 0; c < categories.size(); ++c)
                if (categories[c] == *cat) {
                    bucket[c].push_back(records[i]);
                    break;
                }
        }
        if (missing > 0)
            stratum.excluded.push_back({"unknown", missing, "attribute not recorded"});

        std::vector<std::vector<SurvivalRecord>> kept;
        std::vector<std::string> kept_names;
        for (std::size_t c = 0; c < categories.size(); ++c) {
            if (bucket[c].empty()) continue;
            if (bucket[c].size() < min_group) {
                stratum.excluded.push_back({categories[c], bucket[c].size(),
                                            "below minimum group size " +
                                                std::to_string(min_group)});
                continue;
            }
            FairnessGroup group;
            group.name = categories[c];
            group.size = bucket[c].size();
            group.curve = km_fit(bucket[c]);
            stratum.groups.push_back(std::move(group));
            kept.push_back(bucket[c]);
            kept_names.push_back(categories[c]);
        }
        if (kept.size() >= 2) {
            try {
                stratum.test = logrank_test(kept, kept_names);
                stratum.test_performed = true;
            } catch (const std::exception& e) {
                stratum.note = std::string("log-rank test unavailable: ") + e.what();
            }
        } else {
            stratum.note = "fewer than two comparable subgroups";
        }
        report.strata.push_back(std::move(stratum));
    }
    return report;
}

}  // namespace pathcbm
