#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pathcbm/pathcbm.hpp"

namespace testutil {

// Scratch directory removed when the test section ends.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const unsigned id = counter++;
        path_ = std::filesystem::temp_directory_path() /
                ("pathcbm_test_" + std::to_string(id) + "_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path_);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    std::string str(const std::string& name = "") const {
        return name.empty() ? path_.string() : (path_ / name).string();
    }

private:
    std::filesystem::path path_;
};

inline pathcbm::SurvivalRecord rec(double time, bool event, std::string id = "") {
    pathcbm::SurvivalRecord r;
    r.patient_id = std::move(id);
    r.time = time;
    r.event = event;
    return r;
}

// Records from (time, event) pairs; patient ids are positional.
inline std::vector<pathcbm::SurvivalRecord> recs(
    std::initializer_list<std::pair<double, int>> pairs) {
    std::vector<pathcbm::SurvivalRecord> out;
    std::size_t i = 0;
    for (const auto& [t, e] : pairs) out.push_back(rec(t, e != 0, "P" + std::to_string(i++)));
    return out;
}

inline pathcbm::SlidePatches random_slide(const std::string& id, std::size_t n, std::size_t d,
                                          std::uint64_t seed) {
    pathcbm::Rng rng(seed);
    pathcbm::SlidePatches slide;
    slide.slide_id = id;
    slide.patches.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        slide.patches[p].patch_id = "P" + std::to_string(p);
        slide.patches[p].centroid_x = rng.uniform(0.0, 100.0);
        slide.patches[p].centroid_y = rng.uniform(0.0, 100.0);
        slide.patches[p].features.resize(d);
        for (std::size_t c = 0; c < d; ++c) slide.patches[p].features[c] = rng.normal();
    }
    return slide;
}

inline pathcbm::WsiGraph random_graph(const std::string& id, std::size_t n, std::size_t d,
                                      std::size_t k, std::uint64_t seed) {
    return pathcbm::build_knn_graph(random_slide(id, n, d, seed), k);
}

inline std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline bool same_bytes(const std::string& a, const std::string& b) {
    return file_bytes(a) == file_bytes(b);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace testutil
