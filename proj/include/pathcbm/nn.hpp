#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pathcbm/binio.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/rng.hpp"

namespace pathcbm {

// Parameter with its gradient accumulator. Gradients are zeroed at the start
// of every optimizer step and accumulated additively by backward passes.
struct ParamTensor {
    DenseMatrix value;
    DenseMatrix grad;

    ParamTensor() = default;
    ParamTensor(std::size_t rows, std::size_t cols) : value(rows, cols), grad(rows, cols) {}

    void zero_grad() { grad.fill(0.0); }
};

struct NamedParam {
    std::string name;
    ParamTensor* tensor;
};

inline void zero_grads(const std::vector<NamedParam>& params) {
    for (const auto& p : params) p.tensor->zero_grad();
}

inline void xavier_uniform(DenseMatrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : w.v) x = rng.uniform(-limit, limit);
}

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// ---------------------------------------------------------------------------
// Layers

// y = x W + b
struct Linear {
    ParamTensor weight;  // in x out
    ParamTensor bias;    // 1 x out

    Linear() = default;
    Linear(std::size_t in, std::size_t out) : weight(in, out), bias(1, out) {}

    void init(Rng& rng) {
        xavier_uniform(weight.value, weight.value.rows, weight.value.cols, rng);
        bias.value.fill(0.0);
    }

    std::size_t in_dim() const { return weight.value.rows; }
    std::size_t out_dim() const { return weight.value.cols; }

    DenseMatrix forward(const DenseMatrix& x) const {
        if (x.cols != weight.value.rows)
            throw std::invalid_argument("Linear::forward: input width " + std::to_string(x.cols) +
                                        " != " + std::to_string(weight.value.rows));
        DenseMatrix y = matmul(x, weight.value);
        for (std::size_t i = 0; i < y.rows; ++i)
            for (std::size_t j = 0; j < y.cols; ++j) y.at(i, j) += bias.value.at(0, j);
        return y;
    }

    // Accumulates dW, db; returns dX. `x` must be the forward input.
    DenseMatrix backward(const DenseMatrix& x, const DenseMatrix& d_out) {
        weight.grad += matmul_tn(x, d_out);
        for (std::size_t i = 0; i < d_out.rows; ++i)
            for (std::size_t j = 0; j < d_out.cols; ++j) bias.grad.at(0, j) += d_out.at(i, j);
        return matmul_nt(d_out, weight.value);
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight});
        out.push_back({prefix + ".bias", &bias});
    }
};

inline DenseMatrix relu(const DenseMatrix& x) {
    DenseMatrix y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
}

// Subgradient 0 at 0.
inline DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& d_out) {
    x.require_same_shape(d_out, "relu_backward");
    DenseMatrix dx = d_out;
    for (std::size_t i = 0; i < x.v.size(); ++i)
        if (!(x.v[i] > 0.0)) dx.v[i] = 0.0;
    return dx;
}

inline constexpr double kLeakyReluSlope = 0.2;

// Single-head graph attention: for node i with neighborhood N(i) and a
// mandatory self-loop,
//   e_ij  = LeakyReLU(a^T [W h_i || W h_j]),
//   alpha = softmax_j(e_ij),  out_i = sum_j alpha_ij W h_j.
struct GatLayer {
    ParamTensor weight;  // p x q
    ParamTensor attn;    // 1 x 2q, [a_src || a_dst]

    GatLayer() = default;
    GatLayer(std::size_t in, std::size_t out) : weight(in, out), attn(1, 2 * out) {}

    void init(Rng& rng) {
        xavier_uniform(weight.value, weight.value.rows, weight.value.cols, rng);
        xavier_uniform(attn.value, 2 * weight.value.cols, 1, rng);
    }

    std::size_t in_dim() const { return weight.value.rows; }
    std::size_t out_dim() const { return weight.value.cols; }

    struct Cache {
        DenseMatrix z;                                  // n x q
        std::vector<std::vector<std::uint32_t>> nbrs;   // self first, then sorted neighbors
        std::vector<std::vector<double>> alpha;         // per node, per neighbor
        std::vector<std::vector<double>> pre;           // pre-LeakyReLU scores
    };

    DenseMatrix forward(const std::vector<std::vector<std::uint32_t>>& adj, const DenseMatrix& h,
                        Cache* cache) const {
        const std::size_t n = h.rows;
        const std::size_t q = out_dim();
        if (h.cols != in_dim())
            throw std::invalid_argument("GatLayer::forward: input width " + std::to_string(h.cols) +
                                        " != " + std::to_string(in_dim()));
        if (adj.size() != n)
            throw std::invalid_argument("GatLayer::forward: adjacency size != node count");

        DenseMatrix z = matmul(h, weight.value);
        const double* a_src = attn.value.row(0);
        const double* a_dst = attn.value.row(0) + q;
        std::vector<double> s_src(n, 0.0), s_dst(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* zi = z.row(i);
            double ss = 0.0, sd = 0.0;
            for (std::size_t c = 0; c < q; ++c) {
                ss += a_src[c] * zi[c];
                sd += a_dst[c] * zi[c];
            }
            s_src[i] = ss;
            s_dst[i] = sd;
        }

        DenseMatrix out(n, q);
        if (cache) {
            cache->z = z;
            cache->nbrs.assign(n, {});
            cache->alpha.assign(n, {});
            cache->pre.assign(n, {});
        }
        std::vector<double> pre, act;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t deg = adj[i].size() + 1;
            pre.resize(deg);
            act.resize(deg);
            pre[0] = s_src[i] + s_dst[i];  // self-loop
            for (std::size_t t = 0; t < adj[i].size(); ++t) pre[t + 1] = s_src[i] + s_dst[adj[i][t]];
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < deg; ++t) {
                act[t] = pre[t] > 0.0 ? pre[t] : kLeakyReluSlope * pre[t];
                mx = std::max(mx, act[t]);
            }
            double denom = 0.0;
            for (std::size_t t = 0; t < deg; ++t) {
                act[t] = std::exp(act[t] - mx);
                denom += act[t];
            }
            double* oi = out.row(i);
            for (std::size_t t = 0; t < deg; ++t) {
                const double alpha = act[t] / denom;
                const std::uint32_t j = t == 0 ? static_cast<std::uint32_t>(i) : adj[i][t - 1];
                const double* zj = z.row(j);
                for (std::size_t c = 0; c < q; ++c) oi[c] += alpha * zj[c];
                act[t] = alpha;
            }
            if (cache) {
                auto& nb = cache->nbrs[i];
                nb.resize(deg);
                nb[0] = static_cast<std::uint32_t>(i);
                std::copy(adj[i].begin(), adj[i].end(), nb.begin() + 1);
                cache->alpha[i].assign(act.begin(), act.begin() + deg);
                cache->pre[i] = pre;
            }
        }
        return out;
    }

    DenseMatrix backward(const DenseMatrix& h, const Cache& cache, const DenseMatrix& d_out) {
        const std::size_t n = h.rows;
        const std::size_t q = out_dim();
        DenseMatrix dz(n, q);
        std::vector<double> ds_src(n, 0.0), ds_dst(n, 0.0);

        for (std::size_t i = 0; i < n; ++i) {
            const auto& nb = cache.nbrs[i];
            const auto& alpha = cache.alpha[i];
            const auto& pre = cache.pre[i];
            const double* doi = d_out.row(i);
            const std::size_t deg = nb.size();

            // dalpha_j = d_out_i . z_j, and the value path dz_j += alpha_j d_out_i
            std::vector<double> dalpha(deg);
            double weighted = 0.0;
            for (std::size_t t = 0; t < deg; ++t) {
                const double* zj = cache.z.row(nb[t]);
                double s = 0.0;
                for (std::size_t c = 0; c < q; ++c) s += doi[c] * zj[c];
                dalpha[t] = s;
                weighted += alpha[t] * s;
                double* dzj = dz.row(nb[t]);
                for (std::size_t c = 0; c < q; ++c) dzj[c] += alpha[t] * doi[c];
            }
            for (std::size_t t = 0; t < deg; ++t) {
                const double de = alpha[t] * (dalpha[t] - weighted);
                const double dpre = de * (pre[t] > 0.0 ? 1.0 : kLeakyReluSlope);
                ds_src[i] += dpre;
                ds_dst[nb[t]] += dpre;
            }
        }

        const double* a_src = attn.value.row(0);
        const double* a_dst = attn.value.row(0) + q;
        double* da_src = attn.grad.row(0);
        double* da_dst = attn.grad.row(0) + q;
        for (std::size_t i = 0; i < n; ++i) {
            const double* zi = cache.z.row(i);
            double* dzi = dz.row(i);
            for (std::size_t c = 0; c < q; ++c) {
                dzi[c] += ds_src[i] * a_src[c] + ds_dst[i] * a_dst[c];
                da_src[c] += ds_src[i] * zi[c];
                da_dst[c] += ds_dst[i] * zi[c];
            }
        }

        weight.grad += matmul_tn(h, dz);
        return matmul_nt(dz, weight.value);
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight});
        out.push_back({prefix + ".attn", &attn});
    }
};

// Gated attention pooling over instance embeddings:
//   score_i = w^T (tanh(V h_i) * sigmoid(U h_i)),
//   weights = softmax(scores),  pooled = sum_i weights_i h_i.
struct GatedAttentionPool {
    ParamTensor v;  // q x r
    ParamTensor u;  // q x r
    ParamTensor w;  // r x 1

    GatedAttentionPool() = default;
    GatedAttentionPool(std::size_t q, std::size_t r) : v(q, r), u(q, r), w(r, 1) {}

    void init(Rng& rng) {
        xavier_uniform(v.value, v.value.rows, v.value.cols, rng);
        xavier_uniform(u.value, u.value.rows, u.value.cols, rng);
        xavier_uniform(w.value, w.value.rows, 1, rng);
    }

    std::size_t in_dim() const { return v.value.rows; }

    struct Cache {
        DenseMatrix t;  // tanh(H V), n x r
        DenseMatrix s;  // sigmoid(H U), n x r
        std::vector<double> weights;
    };

    struct Output {
        DenseMatrix pooled;           // 1 x q
        std::vector<double> weights;  // n, non-negative, sums to 1
    };

    Output forward(const DenseMatrix& h, Cache* cache) const {
        const std::size_t n = h.rows;
        if (n == 0) throw std::invalid_argument("GatedAttentionPool::forward: empty input");
        if (h.cols != in_dim())
            throw std::invalid_argument("GatedAttentionPool::forward: input width mismatch");
        const std::size_t r = v.value.cols;

        DenseMatrix t = matmul(h, v.value);
        DenseMatrix s = matmul(h, u.value);
        for (double& x : t.v) x = std::tanh(x);
        for (double& x : s.v) x = sigmoid(x);

        std::vector<double> scores(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* ti = t.row(i);
            const double* si = s.row(i);
            double sc = 0.0;
            for (std::size_t c = 0; c < r; ++c) sc += w.value.at(c, 0) * ti[c] * si[c];
            scores[i] = sc;
        }
        const double mx = *std::max_element(scores.begin(), scores.end());
        double denom = 0.0;
        std::vector<double> weights(n);
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] = std::exp(scores[i] - mx);
            denom += weights[i];
        }
        for (double& x : weights) x /= denom;

        Output out;
        out.pooled = DenseMatrix(1, h.cols);
        for (std::size_t i = 0; i < n; ++i) {
            const double* hi = h.row(i);
            for (std::size_t c = 0; c < h.cols; ++c) out.pooled.at(0, c) += weights[i] * hi[c];
        }
        out.weights = weights;
        if (cache) {
            cache->t = std::move(t);
            cache->s = std::move(s);
            cache->weights = out.weights;
        }
        return out;
    }

    DenseMatrix backward(const DenseMatrix& h, const Cache& cache, const DenseMatrix& d_pooled) {
        const std::size_t n = h.rows;
        const std::size_t q = h.cols;
        const std::size_t r = v.value.cols;
        const std::vector<double>& alpha = cache.weights;

        DenseMatrix dh(n, q);
        std::vector<double> dalpha(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* hi = h.row(i);
            double* dhi = dh.row(i);
            double s = 0.0;
            for (std::size_t c = 0; c < q; ++c) {
                s += hi[c] * d_pooled.at(0, c);
                dhi[c] += alpha[i] * d_pooled.at(0, c);
            }
            dalpha[i] = s;
        }
        double weighted = 0.0;
        for (std::size_t i = 0; i < n; ++i) weighted += alpha[i] * dalpha[i];

        DenseMatrix dzv(n, r), dzu(n, r);
        for (std::size_t i = 0; i < n; ++i) {
            const double dscore = alpha[i] * (dalpha[i] - weighted);
            const double* ti = cache.t.row(i);
            const double* si = cache.s.row(i);
            for (std::size_t c = 0; c < r; ++c) {
                const double da = dscore * w.value.at(c, 0);
                w.grad.at(c, 0) += dscore * ti[c] * si[c];
                dzv.at(i, c) = da * si[c] * (1.0 - ti[c] * ti[c]);
                dzu.at(i, c) = da * ti[c] * si[c] * (1.0 - si[c]);
            }
        }
        v.grad += matmul_tn(h, dzv);
        u.grad += matmul_tn(h, dzu);
        DenseMatrix dh_gate = matmul_nt(dzv, v.value);
        DenseMatrix dh_gate_u = matmul_nt(dzu, u.value);
        dh += dh_gate;
        dh += dh_gate_u;
        return dh;
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) {
        out.push_back({prefix + ".v", &v});
        out.push_back({prefix + ".u", &u});
        out.push_back({prefix + ".w", &w});
    }
};

// ---------------------------------------------------------------------------
// Losses

// Mean binary cross-entropy over the non-missing concepts, computed in the
// stable max(z,0) - z y + log(1 + exp(-|z|)) form. Labels use kMissingLabel
// for concepts excluded from the loss. If `grad` is non-null it receives
// dL/dz = (sigmoid(z) - y) / #non-missing, zero at missing positions.
inline double bce_with_logits(const std::vector<double>& logits,
                              const std::vector<std::int8_t>& labels,
                              std::vector<double>* grad = nullptr) {
    if (logits.size() != labels.size())
        throw std::invalid_argument("bce_with_logits: length mismatch");
    std::size_t present = 0;
    for (std::int8_t y : labels)
        if (y != kMissingLabel) ++present;
    if (present == 0) throw ValidationError("bce_with_logits: all labels missing");

    if (grad) grad->assign(logits.size(), 0.0);
    double loss = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (labels[k] == kMissingLabel) continue;
        const double z = logits[k];
        const double y = static_cast<double>(labels[k]);
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
        if (grad) (*grad)[k] = (sigmoid(z) - y) / static_cast<double>(present);
    }
    return loss / static_cast<double>(present);
}

// Negative Breslow log partial likelihood over one batch's risk sets,
// normalized by the number of events. Used by the end-to-end survival model.
// If `grad` is non-null it receives dL/deta.
inline double cox_breslow_nll(const std::vector<double>& eta, const std::vector<double>& times,
                              const std::vector<std::uint8_t>& events,
                              std::vector<double>* grad = nullptr) {
    const std::size_t n = eta.size();
    if (times.size() != n || events.size() != n)
        throw std::invalid_argument("cox_breslow_nll: length mismatch");
    std::size_t n_events = 0;
    for (auto e : events) n_events += e ? 1 : 0;
    if (n_events == 0) throw ValidationError("cox_breslow_nll: batch has no events");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (times[a] != times[b]) return times[a] > times[b];
        return a < b;
    });

    // Sweep times descending, growing the risk set; log-sum-exp kept stable
    // by tracking the running max.
    double mx = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    double loss = 0.0;
    std::vector<double> inv_s0(n, 0.0);  // d_k / S0_k recorded at each event subject
    std::size_t pos = 0;
    while (pos < n) {
        std::size_t end = pos;
        const double t = times[order[pos]];
        while (end < n && times[order[end]] == t) ++end;
        for (std::size_t p = pos; p < end; ++p) {
            const double e = eta[order[p]];
            if (e > mx) {
                if (std::isfinite(mx)) sum *= std::exp(mx - e);
                mx = e;
            }
            sum += std::exp(e - mx);
        }
        const double log_s0 = mx + std::log(sum);
        for (std::size_t p = pos; p < end; ++p) {
            const std::size_t i = order[p];
            if (events[i]) {
                loss -= eta[i] - log_s0;
                inv_s0[i] = std::exp(-log_s0);
            }
        }
        pos = end;
    }
    loss /= static_cast<double>(n_events);

    if (grad) {
        grad->assign(n, 0.0);
        // cum_k(t) = sum over event times t_k <= t of d_k / S0_k
        std::vector<std::size_t> asc(order.rbegin(), order.rend());
        double cum = 0.0;
        std::size_t p = 0;
        while (p < n) {
            std::size_t end = p;
            const double t = times[asc[p]];
            while (end < n && times[asc[end]] == t) ++end;
            for (std::size_t x = p; x < end; ++x) cum += inv_s0[asc[x]];
            for (std::size_t x = p; x < end; ++x) {
                const std::size_t i = asc[x];
                (*grad)[i] = (-(events[i] ? 1.0 : 0.0) + std::exp(eta[i]) * cum) /
                             static_cast<double>(n_events);
            }
            p = end;
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Optimization

// lr(t) = floor + 0.5 (base - floor) (1 + cos(pi t / T)), monotone
// non-increasing from base at t=0 to floor at t=T.
struct CosineSchedule {
    double base_lr = 3e-4;
    std::size_t total_steps = 20;
    double floor_lr = 0.0;

    double lr(std::size_t step) const {
        if (total_steps == 0 || step >= total_steps) return floor_lr;
        const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
        return floor_lr + 0.5 * (base_lr - floor_lr) * (1.0 + std::cos(frac * 3.14159265358979323846));
    }
};

// Adam with decoupled weight decay. Moments are kept per parameter in the
// order the parameter list was first seen.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double base_lr = 3e-4;
    double weight_decay = 0.0;
    long step = 0;
    std::vector<DenseMatrix> m;
    std::vector<DenseMatrix> v;
};

inline void adam_step(const std::vector<NamedParam>& params, AdamState& state, double lr) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor->value.rows, p.tensor->value.cols);
            state.v.emplace_back(p.tensor->value.rows, p.tensor->value.cols);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: parameter list changed size");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        ParamTensor& t = *params[pi].tensor;
        if (!t.grad.all_finite())
            throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                     params[pi].name + "'");
        DenseMatrix& m = state.m[pi];
        DenseMatrix& v = state.v[pi];
        for (std::size_t c = 0; c < t.value.v.size(); ++c) {
            const double g = t.grad.v[c];
            m.v[c] = state.beta1 * m.v[c] + (1.0 - state.beta1) * g;
            v.v[c] = state.beta2 * v.v[c] + (1.0 - state.beta2) * g * g;
            const double mhat = m.v[c] / bc1;
            const double vhat = v.v[c] / bc2;
            t.value.v[c] -= lr * (mhat / (std::sqrt(vhat) + state.eps) +
                                  state.weight_decay * t.value.v[c]);
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;
    std::size_t checked = 0;

    bool ok(double tolerance) const { return checked > 0 && max_rel_err < tolerance; }
};

// Central finite differences against the analytic gradients. `loss_fn` must
// recompute the forward loss from the current parameter values; `backward_fn`
// must populate the gradients for the same loss. Step size is 1e-5 relative
// to each coordinate's magnitude.
inline GradCheckResult grad_check(const std::function<double()>& loss_fn,
                                  const std::function<void()>& backward_fn,
                                  const std::vector<NamedParam>& params, double h_rel = 1e-5) {
    zero_grads(params);
    backward_fn();
    std::vector<DenseMatrix> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.tensor->grad);

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        DenseMatrix& value = params[pi].tensor->value;
        for (std::size_t c = 0; c < value.v.size(); ++c) {
            const double orig = value.v[c];
            const double h = h_rel * std::max(1.0, std::fabs(orig));
            value.v[c] = orig + h;
            const double f_plus = loss_fn();
            value.v[c] = orig - h;
            const double f_minus = loss_fn();
            value.v[c] = orig;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double exact = analytic[pi].v[c];
            const double rel = std::fabs(exact - numeric) /
                               std::max({1.0, std::fabs(exact), std::fabs(numeric)});
            ++result.checked;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst = params[pi].name + "[" + std::to_string(c) + "]";
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr char kCheckpointMagic[9] = "pcbmckp1";

// Versioned named-parameter container; load(save(m)) reproduces outputs
// bitwise because values are stored as raw 64-bit doubles.
inline void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint '" + path + "'");
    out.write(kCheckpointMagic, 8);
    binio::write_pod<std::uint64_t>(out, params.size());
    for (const auto& p : params) {
        binio::write_string(out, p.name);
        binio::write_pod<std::uint64_t>(out, p.tensor->value.rows);
        binio::write_pod<std::uint64_t>(out, p.tensor->value.cols);
        binio::write_doubles(out, p.tensor->value.v);
    }
    out.close();
    if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

inline void load_checkpoint(const std::string& path, const std::vector<NamedParam>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
    binio::check_magic(in, kCheckpointMagic, path);
    const auto count = binio::read_pod<std::uint64_t>(in, "parameter count");
    if (count != params.size())
        throw ValidationError(path + ": checkpoint has " + std::to_string(count) +
                              " parameters, model expects " + std::to_string(params.size()));
    for (const auto& p : params) {
        const std::string name = binio::read_string(in, "parameter name");
        if (name != p.name)
            throw ValidationError(path + ": parameter '" + name + "' does not match model '" +
                                  p.name + "'");
        const auto rows = binio::read_pod<std::uint64_t>(in, "rows");
        const auto cols = binio::read_pod<std::uint64_t>(in, "cols");
        if (rows != p.tensor->value.rows || cols != p.tensor->value.cols)
            throw ValidationError(path + ": shape mismatch for parameter '" + name + "'");
        binio::read_doubles(in, p.tensor->value.v, rows * cols, "parameter values");
    }
}

}  // namespace pathcbm
