#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pathcbm/binio.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/records.hpp"

namespace pathcbm {

// Undirected spatial graph over the patches of one slide. Edges are stored
// once as (i, j) with i < j, sorted lexicographically, and interpreted
// symmetrically.
struct WsiGraph {
    std::string slide_id;
    DenseMatrix node_features;   // n x d
    DenseMatrix node_centroids;  // n x 2
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

    std::size_t node_count() const { return node_centroids.rows; }
    std::size_t feature_dim() const { return node_features.cols; }

    // Sorted neighbor lists, self excluded.
    std::vector<std::vector<std::uint32_t>> adjacency() const {
        std::vector<std::vector<std::uint32_t>> adj(node_count());
        for (auto [i, j] : edges) {
            adj[i].push_back(j);
            adj[j].push_back(i);
        }
        for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
        return adj;
    }
};

namespace detail {

struct Candidate {
    double dist2;
    std::uint32_t index;

    bool operator<(const Candidate& other) const {
        if (dist2 != other.dist2) return dist2 < other.dist2;
        return index < other.index;
    }
};

inline double dist2(const double* a, const double* b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

// Exact k nearest neighbors by full pairwise scan. Ties broken by ascending
// node index.
inline std::vector<std::uint32_t> knn_exact(const DenseMatrix& centroids, std::uint32_t i,
                                            std::size_t k) {
    const auto n = static_cast<std::uint32_t>(centroids.rows);
    std::vector<Candidate> cands;
    cands.reserve(n - 1);
    for (std::uint32_t j = 0; j < n; ++j) {
        if (j == i) continue;
        cands.push_back({dist2(centroids.row(i), centroids.row(j)), j});
    }
    const std::size_t kk = std::min(k, cands.size());
    std::nth_element(cands.begin(), cands.begin() + (kk - 1), cands.end());
    cands.resize(kk);
    std::sort(cands.begin(), cands.end());
    std::vector<std::uint32_t> out(kk);
    for (std::size_t t = 0; t < kk; ++t) out[t] = cands[t].index;
    return out;
}

// Uniform grid over the centroid bounding box for sub-quadratic neighbor
// queries on large slides. Produces the same neighbor sets as knn_exact:
// identical distance expression and identical (dist2, index) ordering.
class CentroidGrid {
public:
    CentroidGrid(const DenseMatrix& centroids, std::size_t k) : centroids_(centroids) {
        const std::size_t n = centroids.rows;
        min_x_ = min_y_ = std::numeric_limits<double>::infinity();
        double max_x = -std::numeric_limits<double>::infinity();
        double max_y = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            min_x_ = std::min(min_x_, centroids.at(i, 0));
            min_y_ = std::min(min_y_, centroids.at(i, 1));
            max_x = std::max(max_x, centroids.at(i, 0));
            max_y = std::max(max_y, centroids.at(i, 1));
        }
        const double span_x = max_x - min_x_;
        const double span_y = max_y - min_y_;
        // Aim for roughly k+1 points per cell; the linear term keeps the
        // cell finite when the bounding box degenerates to a line.
        const double per_cell = static_cast<double>(k + 1) / static_cast<double>(n);
        cell_ = std::max(std::sqrt(span_x * span_y * per_cell),
                         std::max(span_x, span_y) * per_cell);
        if (!(cell_ > 0.0)) cell_ = 1.0;
        const double max_cells = 4.0 * static_cast<double>(n) + 16.0;
        while ((span_x / cell_ + 1.0) * (span_y / cell_ + 1.0) > max_cells) cell_ *= 2.0;
        width_ = static_cast<std::size_t>(span_x / cell_) + 1;
        height_ = static_cast<std::size_t>(span_y / cell_) + 1;
        cells_.resize(width_ * height_);
        for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n); ++i)
            cells_[cell_index(i)].push_back(i);
    }

    std::vector<std::uint32_t> query(std::uint32_t i, std::size_t k) const {
        const std::size_t kk = std::min(k, centroids_.rows - 1);
        const auto [cx, cy] = cell_coords(i);
        std::vector<Candidate> best;
        const std::size_t max_ring = std::max(width_, height_);
        for (std::size_t ring = 0; ring <= max_ring; ++ring) {
            // Cells at Chebyshev ring distance r hold points at least
            // (r-1)*cell away, so once the k-th best is strictly closer than
            // that bound neither this ring nor any farther one can change
            // the result. Strict comparison keeps index tie-breaks exact.
            if (best.size() >= kk) {
                const double bound = (static_cast<double>(ring) - 1.0) * cell_;
                if (bound > 0.0 && best[kk - 1].dist2 < bound * bound) break;
            }
            scan_ring(i, cx, cy, ring, kk, best);
        }
        std::vector<std::uint32_t> out(best.size());
        for (std::size_t t = 0; t < best.size(); ++t) out[t] = best[t].index;
        return out;
    }

private:
    std::pair<long, long> cell_coords(std::uint32_t i) const {
        long gx = static_cast<long>((centroids_.at(i, 0) - min_x_) / cell_);
        long gy = static_cast<long>((centroids_.at(i, 1) - min_y_) / cell_);
        gx = std::clamp<long>(gx, 0, static_cast<long>(width_) - 1);
        gy = std::clamp<long>(gy, 0, static_cast<long>(height_) - 1);
        return {gx, gy};
    }

    std::size_t cell_index(std::uint32_t i) const {
        auto [gx, gy] = cell_coords(i);
        return static_cast<std::size_t>(gy) * width_ + static_cast<std::size_t>(gx);
    }

    void scan_ring(std::uint32_t i, long cx, long cy, std::size_t ring, std::size_t kk,
                   std::vector<Candidate>& best) const {
        const long r = static_cast<long>(ring);
        for (long gy = cy - r; gy <= cy + r; ++gy) {
            if (gy < 0 || gy >= static_cast<long>(height_)) continue;
            const bool edge_row = (gy == cy - r || gy == cy + r);
            const long step = edge_row ? 1 : 2 * r;
            for (long gx = cx - r; gx <= cx + r; gx += step) {
                if (gx < 0 || gx >= static_cast<long>(width_)) continue;
                for (std::uint32_t j : cells_[static_cast<std::size_t>(gy) * width_ + gx]) {
                    if (j == i) continue;
                    Candidate c{dist2(centroids_.row(i), centroids_.row(j)), j};
                    auto pos = std::lower_bound(best.begin(), best.end(), c);
                    if (best.size() < kk) {
                        best.insert(pos, c);
                    } else if (pos != best.end()) {
                        best.insert(pos, c);
                        best.pop_back();
                    }
                }
            }
        }
    }

    const DenseMatrix& centroids_;
    double min_x_ = 0.0, min_y_ = 0.0, cell_ = 1.0;
    std::size_t width_ = 1, height_ = 1;
    std::vector<std::vector<std::uint32_t>> cells_;
};

}  // namespace detail

enum class KnnMethod { Auto, Exact, Grid };

// Number of nodes above which the Auto method switches to the grid bucket
// accelerator. Both methods produce identical edge sets.
inline constexpr std::size_t kKnnGridThreshold = 10000;

// Builds the symmetrized union of each node's k nearest neighbors under
// Euclidean centroid distance. Distance ties break by ascending node index;
// with n <= k the graph is complete.
inline WsiGraph build_knn_graph(const SlidePatches& slide, std::size_t k,
                                KnnMethod method = KnnMethod::Auto) {
    const std::size_t n = slide.patches.size();
    if (n == 0) throw ValidationError("build_knn_graph: slide '" + slide.slide_id + "' has no patches");
    if (k == 0) throw std::invalid_argument("build_knn_graph: k must be >= 1");

    WsiGraph g;
    g.slide_id = slide.slide_id;
    const std::size_t d = slide.feature_dim();
    g.node_features = DenseMatrix(n, d);
    g.node_centroids = DenseMatrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const PatchRecord& p = slide.patches[i];
        if (!std::isfinite(p.centroid_x) || !std::isfinite(p.centroid_y))
            throw ValidationError("build_knn_graph: non-finite centroid for patch '" + p.patch_id +
                                  "' of slide '" + slide.slide_id + "'");
        if (p.features.size() != d)
            throw ValidationError("build_knn_graph: inconsistent feature dimension in slide '" +
                                  slide.slide_id + "'");
        g.node_centroids.at(i, 0) = p.centroid_x;
        g.node_centroids.at(i, 1) = p.centroid_y;
        for (std::size_t f = 0; f < d; ++f) g.node_features.at(i, f) = p.features[f];
    }
    if (n == 1) return g;

    const bool use_grid =
        method == KnnMethod::Grid || (method == KnnMethod::Auto && n > kKnnGridThreshold);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> directed;
    directed.reserve(n * std::min(k, n - 1));
    const auto n32 = static_cast<std::uint32_t>(n);
    if (use_grid) {
        detail::CentroidGrid grid(g.node_centroids, k);
        for (std::uint32_t i = 0; i < n32; ++i)
            for (std::uint32_t j : grid.query(i, k))
                directed.emplace_back(std::min(i, j), std::max(i, j));
    } else {
        for (std::uint32_t i = 0; i < n32; ++i)
            for (std::uint32_t j : detail::knn_exact(g.node_centroids, i, k))
                directed.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
    g.edges = std::move(directed);
    return g;
}

struct GraphStats {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    double mean_degree = 0.0;
    std::size_t connected_components = 0;
};

inline GraphStats graph_stats(const WsiGraph& g) {
    GraphStats s;
    s.nodes = g.node_count();
    s.edges = g.edges.size();
    s.mean_degree = s.nodes == 0 ? 0.0 : 2.0 * static_cast<double>(s.edges) / static_cast<double>(s.nodes);
    // union-find over edges
    std::vector<std::uint32_t> parent(s.nodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::size_t components = s.nodes;
    for (auto [i, j] : g.edges) {
        auto ri = find(i), rj = find(j);
        if (ri != rj) {
            parent[ri] = rj;
            --components;
        }
    }
    s.connected_components = components;
    return s;
}

// Graph cache entry: the built graph plus the k it was built with.
struct CachedGraph {
    WsiGraph graph;
    std::uint32_t k = 0;
};

inline constexpr char kGraphCacheMagic[9] = "pcbmgrf1";

inline void save_graph_cache(const std::string& path, const std::vector<CachedGraph>& graphs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write graph cache '" + path + "'");
    out.write(kGraphCacheMagic, 8);
    binio::write_pod<std::uint64_t>(out, graphs.size());
    for (const auto& entry : graphs) {
        const WsiGraph& g = entry.graph;
        binio::write_string(out, g.slide_id);
        binio::write_pod<std::uint64_t>(out, g.node_count());
        binio::write_pod<std::uint64_t>(out, g.feature_dim());
        binio::write_pod<std::uint32_t>(out, entry.k);
        binio::write_doubles(out, g.node_features.v);
        binio::write_doubles(out, g.node_centroids.v);
        binio::write_pod<std::uint64_t>(out, g.edges.size());
        for (auto [i, j] : g.edges) {
            binio::write_pod<std::uint32_t>(out, i);
            binio::write_pod<std::uint32_t>(out, j);
        }
    }
    out.close();
    if (!out) throw std::runtime_error("error writing graph cache '" + path + "'");
}

inline std::vector<CachedGraph> load_graph_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open graph cache '" + path + "'");
    binio::check_magic(in, kGraphCacheMagic, path);
    const auto count = binio::read_pod<std::uint64_t>(in, "graph count");
    std::vector<CachedGraph> graphs;
    graphs.reserve(count);
    for (std::uint64_t gi = 0; gi < count; ++gi) {
        CachedGraph entry;
        WsiGraph& g = entry.graph;
        g.slide_id = binio::read_string(in, "slide id");
        const auto n = binio::read_pod<std::uint64_t>(in, "node count");
        const auto d = binio::read_pod<std::uint64_t>(in, "feature dim");
        entry.k = binio::read_pod<std::uint32_t>(in, "k");
        g.node_features = DenseMatrix(n, d);
        binio::read_doubles(in, g.node_features.v, n * d, "node features");
        g.node_centroids = DenseMatrix(n, 2);
        binio::read_doubles(in, g.node_centroids.v, n * 2, "node centroids");
        const auto m = binio::read_pod<std::uint64_t>(in, "edge count");
        g.edges.reserve(m);
        for (std::uint64_t e = 0; e < m; ++e) {
            auto i = binio::read_pod<std::uint32_t>(in, "edge");
            auto j = binio::read_pod<std::uint32_t>(in, "edge");
            if (i >= n || j >= n) throw ValidationError(path + ": edge endpoint out of range");
            g.edges.emplace_back(i, j);
        }
        graphs.push_back(std::move(entry));
    }
    return graphs;
}

}  // namespace pathcbm
