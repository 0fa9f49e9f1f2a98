#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pathcbm {

// One tissue patch: level-0 pixel centroid plus a precomputed feature vector.
struct PatchRecord {
    std::string patch_id;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    std::vector<double> features;
};

// All patches of one slide; every patch shares the feature dimension.
struct SlidePatches {
    std::string slide_id;
    std::vector<PatchRecord> patches;

    std::size_t feature_dim() const { return patches.empty() ? 0 : patches.front().features.size(); }
};

// Ordered concept names; the order is the canonical index of every label and
// logit vector.
struct ConceptVocabulary {
    std::vector<std::string> names;

    std::size_t size() const { return names.size(); }
};

// Sentinel for a concept whose label could not be extracted for a slide.
inline constexpr std::int8_t kMissingLabel = -1;

// Per-slide binary concept labels; entries are 0, 1, or kMissingLabel.
struct ConceptLabels {
    std::string slide_id;
    std::vector<std::int8_t> labels;
};

// Right-censored outcome. event=true means death observed at `time`,
// event=false means follow-up ended at `time` without the event.
struct SurvivalRecord {
    std::string patient_id;
    double time = 0.0;
    bool event = false;
};

enum class Gender { Female, Male, Unknown };
enum class Race { White, Black, Asian, Unknown, NotAvailable };
enum class Subtype { ClearCell, Papillary, Chromophobe, Unknown };

struct DemographicRecord {
    std::string patient_id;
    std::optional<double> age;  // years; empty when unknown
    Gender gender = Gender::Unknown;
    Race race = Race::Unknown;
    Subtype subtype = Subtype::Unknown;
};

inline std::string to_string(Gender g) {
    switch (g) {
        case Gender::Female: return "female";
        case Gender::Male: return "male";
        default: return "unknown";
    }
}

inline std::string to_string(Race r) {
    switch (r) {
        case Race::White: return "white";
        case Race::Black: return "black";
        case Race::Asian: return "asian";
        case Race::NotAvailable: return "na";
        default: return "unknown";
    }
}

inline std::string to_string(Subtype s) {
    switch (s) {
        case Subtype::ClearCell: return "ccRCC";
        case Subtype::Papillary: return "pRCC";
        case Subtype::Chromophobe: return "chRCC";
        default: return "unknown";
    }
}

}  // namespace pathcbm
