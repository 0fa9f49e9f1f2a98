#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pathcbm/binio.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/graph.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/nn.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/rng.hpp"

namespace pathcbm {

struct CbmConfig {
    std::size_t hidden = 128;
    std::size_t blocks = 2;         // encoder blocks of Linear -> ReLU -> GAT
    std::size_t attention_dim = 64;  // width of the gated-attention scoring space

    void validate() const {
        if (hidden == 0 || blocks == 0 || attention_dim == 0)
            throw ValidationError("CbmConfig: hidden, blocks, attention_dim must be >= 1");
    }
};

// Concept-bottleneck model: a shared graph encoder feeding K per-concept
// gated-attention pools, each with a scalar classifier. All concepts read the
// same encoder output; only the pools and classifiers are concept-specific.
struct CbmModel {
    CbmConfig config;
    ConceptVocabulary vocabulary;
    std::size_t input_dim = 0;

    struct Block {
        Linear linear;
        GatLayer gat;
    };
    std::vector<Block> encoder;
    std::vector<GatedAttentionPool> pools;  // K
    std::vector<Linear> classifiers;        // K, hidden -> 1

    CbmModel() = default;

    CbmModel(std::size_t in_dim, CbmConfig cfg, ConceptVocabulary vocab, std::uint64_t seed)
        : config(cfg), vocabulary(std::move(vocab)), input_dim(in_dim) {
        config.validate();
        if (input_dim == 0) throw ValidationError("CbmModel: input dimension must be >= 1");
        if (vocabulary.size() == 0) throw ValidationError("CbmModel: empty vocabulary");
        Rng rng = Rng(seed).substream("init");
        for (std::size_t b = 0; b < config.blocks; ++b) {
            Block block;
            block.linear = Linear(b == 0 ? input_dim : config.hidden, config.hidden);
            block.gat = GatLayer(config.hidden, config.hidden);
            Rng r1 = rng.substream("linear", b);
            Rng r2 = rng.substream("gat", b);
            block.linear.init(r1);
            block.gat.init(r2);
            encoder.push_back(std::move(block));
        }
        for (std::size_t k = 0; k < vocabulary.size(); ++k) {
            GatedAttentionPool pool(config.hidden, config.attention_dim);
            Rng rp = rng.substream("pool", k);
            pool.init(rp);
            pools.push_back(std::move(pool));
            Linear cls(config.hidden, 1);
            Rng rc = rng.substream("classifier", k);
            cls.init(rc);
            classifiers.push_back(std::move(cls));
        }
    }

    std::size_t concept_count() const { return vocabulary.size(); }

    std::vector<NamedParam> parameters() {
        std::vector<NamedParam> params;
        for (std::size_t b = 0; b < encoder.size(); ++b) {
            encoder[b].linear.collect(params, "enc" + std::to_string(b) + ".linear");
            encoder[b].gat.collect(params, "enc" + std::to_string(b) + ".gat");
        }
        for (std::size_t k = 0; k < pools.size(); ++k)
            pools[k].collect(params, "pool" + std::to_string(k));
        for (std::size_t k = 0; k < classifiers.size(); ++k)
            classifiers[k].collect(params, "cls" + std::to_string(k));
        return params;
    }
};

struct CbmForward {
    std::vector<double> logits;  // K
    DenseMatrix attention;       // K x n, rows sum to 1
};

namespace detail {

// Everything the backward pass needs from one graph's forward pass.
struct CbmCache {
    std::vector<std::vector<std::uint32_t>> adjacency;
    std::vector<DenseMatrix> lin_in;    // per block
    std::vector<DenseMatrix> lin_out;   // per block, pre-ReLU
    std::vector<DenseMatrix> gat_in;    // per block, post-ReLU
    std::vector<GatLayer::Cache> gat;   // per block
    DenseMatrix encoded;                // n x hidden
    std::vector<GatedAttentionPool::Cache> pools;  // K
    DenseMatrix pooled;                 // K x hidden
    std::vector<double> logits;         // K
};

inline void cbm_forward_cached(CbmModel& model, const WsiGraph& graph, CbmCache& cache) {
    if (graph.node_count() == 0)
        throw ValidationError("cbm_forward: graph '" + graph.slide_id + "' has no nodes");
    if (graph.feature_dim() != model.input_dim)
        throw std::invalid_argument("cbm_forward: graph feature dim " +
                                    std::to_string(graph.feature_dim()) + " != model input dim " +
                                    std::to_string(model.input_dim));

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

    const std::size_t k_count = model.concept_count();
    cache.pools.resize(k_count);
    cache.pooled = DenseMatrix(k_count, model.config.hidden);
    cache.logits.assign(k_count, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
        auto out = model.pools[k].forward(cache.encoded, &cache.pools[k]);
        std::copy(out.pooled.v.begin(), out.pooled.v.end(), cache.pooled.row(k));
        DenseMatrix pooled_row(1, model.config.hidden);
        std::copy(out.pooled.v.begin(), out.pooled.v.end(), pooled_row.v.begin());
        cache.logits[k] = model.classifiers[k].forward(pooled_row).at(0, 0);
    }
}

// Backward from per-concept logit gradients through the shared encoder.
inline void cbm_backward(CbmModel& model, const CbmCache& cache,
                         const std::vector<double>& dlogits) {
    const std::size_t k_count = model.concept_count();
    const std::size_t hidden = model.config.hidden;
    DenseMatrix dh(cache.encoded.rows, hidden);
    for (std::size_t k = 0; k < k_count; ++k) {
        if (dlogits[k] == 0.0) continue;
        DenseMatrix dlogit(1, 1);
        dlogit.at(0, 0) = dlogits[k];
        DenseMatrix pooled_row(1, hidden);
        std::copy(cache.pooled.row(k), cache.pooled.row(k) + hidden, pooled_row.v.begin());
        DenseMatrix d_pooled = model.classifiers[k].backward(pooled_row, dlogit);
        dh += model.pools[k].backward(cache.encoded, cache.pools[k], d_pooled);
    }
    for (std::size_t b = model.encoder.size(); b-- > 0;) {
        DenseMatrix d_gat_in = model.encoder[b].gat.backward(cache.gat_in[b], cache.gat[b], dh);
        DenseMatrix d_lin_out = relu_backward(cache.lin_out[b], d_gat_in);
        dh = model.encoder[b].linear.backward(cache.lin_in[b], d_lin_out);
    }
}

}  // namespace detail

inline CbmForward cbm_forward(CbmModel& model, const WsiGraph& graph) {
    detail::CbmCache cache;
    detail::cbm_forward_cached(model, graph, cache);
    CbmForward out;
    out.logits = cache.logits;
    const std::size_t n = graph.node_count();
    out.attention = DenseMatrix(model.concept_count(), n);
    for (std::size_t k = 0; k < model.concept_count(); ++k)
        std::copy(cache.pools[k].weights.begin(), cache.pools[k].weights.end(),
                  out.attention.row(k));
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t steps = 20;        // epochs by default; raw optimizer steps otherwise
    bool steps_are_epochs = true;  // "20 steps" with 620 samples is read as 20 epochs
    std::size_t batch_size = 32;
    double base_lr = 3e-4;
    double floor_lr = 0.0;
    double weight_decay = 1e-5;
    std::uint64_t seed = 0;

    void validate() const {
        if (steps == 0) throw ValidationError("TrainConfig: steps must be >= 1");
        if (batch_size == 0) throw ValidationError("TrainConfig: batch_size must be >= 1");
        if (!(base_lr > 0.0)) throw ValidationError("TrainConfig: base_lr must be > 0");
        if (floor_lr < 0.0 || floor_lr > base_lr)
            throw ValidationError("TrainConfig: floor_lr must be in [0, base_lr]");
        if (weight_decay < 0.0) throw ValidationError("TrainConfig: weight_decay must be >= 0");
    }
};

struct ConceptExample {
    const WsiGraph* graph = nullptr;
    std::vector<std::int8_t> labels;
};

// Trains by averaging per-graph BCE gradients across each mini-batch, with
// AdamW on a cosine learning-rate schedule. Returns one mean-loss entry per
// epoch (or per optimizer step when steps_are_epochs is false). Deterministic
// for a fixed seed.
inline std::vector<double> train_cbm(CbmModel& model, const std::vector<ConceptExample>& examples,
                                     const TrainConfig& config) {
    config.validate();
    if (examples.empty()) throw ValidationError("train_cbm: no training examples");
    const std::size_t k_count = model.concept_count();
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (!ex.graph) throw ValidationError("train_cbm: example " + std::to_string(i) +
                                             " has no graph");
        if (ex.labels.size() != k_count)
            throw ValidationError("train_cbm: example " + std::to_string(i) + " has " +
                                  std::to_string(ex.labels.size()) + " labels, expected " +
                                  std::to_string(k_count));
        bool any = false;
        for (std::int8_t y : ex.labels) any = any || y != kMissingLabel;
        if (any) usable.push_back(i);
    }
    if (usable.empty()) throw ValidationError("train_cbm: every example has only missing labels");

    const std::size_t n = usable.size();
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

    Rng root = Rng(config.seed).substream("train-cbm");
    std::vector<double> trace;
    std::vector<double> grad(k_count);
    detail::CbmCache cache;

    std::size_t opt_step = 0;
    for (std::size_t epoch = 0; epoch < epochs && opt_step < total_opt_steps; ++epoch) {
        std::vector<std::size_t> order = usable;
        Rng shuffler = root.substream("epoch", epoch);
        shuffler.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t start = 0; start < n && opt_step < total_opt_steps;
             start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            zero_grads(params);
            double batch_loss = 0.0;
            for (std::size_t q = start; q < stop; ++q) {
                const ConceptExample& ex = examples[order[q]];
                detail::cbm_forward_cached(model, *ex.graph, cache);
                std::vector<double> dlogits;
                const double loss = bce_with_logits(cache.logits, ex.labels, &dlogits);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_cbm: non-finite loss at optimizer step " +
                                             std::to_string(opt_step + 1));
                batch_loss += loss;
                for (double& g : dlogits) g *= inv_batch;
                detail::cbm_backward(model, cache, dlogits);
            }
            adam_step(params, adam, schedule.lr(opt_step));
            ++opt_step;
            epoch_loss += batch_loss;
            epoch_count += stop - start;
            if (!config.steps_are_epochs) trace.push_back(batch_loss * inv_batch);
        }
        if (config.steps_are_epochs)
            trace.push_back(epoch_loss / static_cast<double>(epoch_count));
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Inference

struct ConceptPrediction {
    std::vector<double> soft;  // sigmoid(logits), in (0,1)
    std::vector<int> hard;     // soft >= 0.5 (inclusive threshold)
};

inline ConceptPrediction predict_concepts(CbmModel& model, const WsiGraph& graph) {
    const CbmForward fwd = cbm_forward(model, graph);
    ConceptPrediction pred;
    pred.soft.reserve(fwd.logits.size());
    pred.hard.reserve(fwd.logits.size());
    for (double z : fwd.logits) {
        const double p = sigmoid(z);
        pred.soft.push_back(p);
        pred.hard.push_back(p >= 0.5 ? 1 : 0);
    }
    return pred;
}

struct AttentionPoint {
    double x = 0.0;
    double y = 0.0;
    double weight = 0.0;
};

// Per-patch attention weights of one concept head, paired with centroids.
inline std::vector<AttentionPoint> attention_map(CbmModel& model, const WsiGraph& graph,
                                                 std::size_t concept_index) {
    if (concept_index >= model.concept_count())
        throw ValidationError("attention_map: concept index " + std::to_string(concept_index) +
                              " out of range (K = " + std::to_string(model.concept_count()) + ")");
    const CbmForward fwd = cbm_forward(model, graph);
    std::vector<AttentionPoint> points(graph.node_count());
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i].x = graph.node_centroids.at(i, 0);
        points[i].y = graph.node_centroids.at(i, 1);
        points[i].weight = fwd.attention.at(concept_index, i);
    }
    return points;
}

// ---------------------------------------------------------------------------
// Persistence: model hyperparameters + vocabulary + named parameters in one
// file; load(save(m)) reproduces outputs bitwise.

inline constexpr char kCbmModelMagic[9] = "pcbmcbm1";

inline void save_cbm_model(const std::string& path, CbmModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write model file '" + path + "'");
    out.write(kCbmModelMagic, 8);
    binio::write_pod<std::uint64_t>(out, model.input_dim);
    binio::write_pod<std::uint64_t>(out, model.config.hidden);
    binio::write_pod<std::uint64_t>(out, model.config.blocks);
    binio::write_pod<std::uint64_t>(out, model.config.attention_dim);
    binio::write_pod<std::uint64_t>(out, model.vocabulary.size());
    for (const auto& name : model.vocabulary.names) binio::write_string(out, name);
    auto params = model.parameters();
    binio::write_pod<std::uint64_t>(out, params.size());
    for (const auto& p : params) {
        binio::write_string(out, p.name);
        binio::write_pod<std::uint64_t>(out, p.tensor->value.rows);
        binio::write_pod<std::uint64_t>(out, p.tensor->value.cols);
        binio::write_doubles(out, p.tensor->value.v);
    }
    out.close();
    if (!out) throw std::runtime_error("error writing model file '" + path + "'");
}

inline CbmModel load_cbm_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    binio::check_magic(in, kCbmModelMagic, path);
    const auto input_dim = binio::read_pod<std::uint64_t>(in, "input dim");
    CbmConfig cfg;
    cfg.hidden = binio::read_pod<std::uint64_t>(in, "hidden");
    cfg.blocks = binio::read_pod<std::uint64_t>(in, "blocks");
    cfg.attention_dim = binio::read_pod<std::uint64_t>(in, "attention dim");
    ConceptVocabulary vocab;
    const auto k_count = binio::read_pod<std::uint64_t>(in, "concept count");
    for (std::uint64_t k = 0; k < k_count; ++k)
        vocab.names.push_back(binio::read_string(in, "concept name"));

    CbmModel model(input_dim, cfg, std::move(vocab), 0);
    auto params = model.parameters();
    const auto count = binio::read_pod<std::uint64_t>(in, "parameter count");
    if (count != params.size())
        throw ValidationError(path + ": parameter count mismatch");
    for (auto& p : params) {
        const std::string name = binio::read_string(in, "parameter name");
        if (name != p.name)
            throw ValidationError(path + ": parameter '" + name + "' does not match expected '" +
                                  p.name + "'");
        const auto rows = binio::read_pod<std::uint64_t>(in, "rows");
        const auto cols = binio::read_pod<std::uint64_t>(in, "cols");
        if (rows != p.tensor->value.rows || cols != p.tensor->value.cols)
            throw ValidationError(path + ": shape mismatch for parameter '" + name + "'");
        binio::read_doubles(in, p.tensor->value.v, rows * cols, "parameter values");
    }
    return model;
}

}  // namespace pathcbm
