#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "pathcbm/error.hpp"
#include "pathcbm/ingest.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/rng.hpp"

namespace pathcbm {

// Synthetic study generator: every active concept plants one spatial cluster
// of patches whose features shift along a concept-specific direction, labels
// record cluster presence, and survival times follow an exponential hazard
// driven by the planted concept pattern. Stands in for slide features and
// report-extracted labels during testing.
struct SynthConfig {
    std::size_t patients = 400;
    std::size_t min_patches = 30;
    std::size_t max_patches = 60;
    std::size_t feature_dim = 16;
    std::size_t concepts = 8;
    double concept_prevalence = 0.5;   // P(concept active per patient)
    double cluster_fraction = 0.25;    // fraction of a slide's patches in the planted cluster
    double signal_strength = 3.0;      // feature shift along the concept direction
    std::vector<double> hazard_coefficients;  // per concept; default pattern when empty
    double base_hazard = 1e-3;         // events per day at zero concept activity
    double censoring_rate = 0.3;       // expected censored fraction
    double missing_rate = 0.0;         // fraction of labels replaced by the missing sentinel
    std::uint64_t seed = 0;

    void validate() const {
        if (patients == 0) throw ValidationError("SynthConfig: patients must be >= 1");
        if (concepts == 0) throw ValidationError("SynthConfig: concepts must be >= 1");
        if (feature_dim == 0) throw ValidationError("SynthConfig: feature_dim must be >= 1");
        if (min_patches == 0 || max_patches < min_patches)
            throw ValidationError("SynthConfig: need 1 <= min_patches <= max_patches");
        if (!(censoring_rate >= 0.0 && censoring_rate < 1.0))
            throw ValidationError("SynthConfig: censoring_rate must be in [0, 1)");
        if (!(concept_prevalence > 0.0 && concept_prevalence < 1.0))
            throw ValidationError("SynthConfig: concept_prevalence must be in (0, 1)");
        if (!(cluster_fraction > 0.0 && cluster_fraction <= 1.0))
            throw ValidationError("SynthConfig: cluster_fraction must be in (0, 1]");
        if (!(base_hazard > 0.0)) throw ValidationError("SynthConfig: base_hazard must be > 0");
        if (!(missing_rate >= 0.0 && missing_rate < 1.0))
            throw ValidationError("SynthConfig: missing_rate must be in [0, 1)");
        if (!hazard_coefficients.empty() && hazard_coefficients.size() != concepts)
            throw ValidationError("SynthConfig: hazard_coefficients length != concepts");
    }

    // Default planted hazards: concept 0 carries the dominant positive
    // coefficient, the rest alternate in sign with shrinking magnitude. The
    // magnitudes are sized so the true-risk concordance ceiling sits well
    // above 0.75; much smaller values leave even an oracle below 0.7.
    std::vector<double> effective_hazards() const {
        if (!hazard_coefficients.empty()) return hazard_coefficients;
        std::vector<double> beta(concepts, 0.0);
        beta[0] = 2.0;
        for (std::size_t k = 1; k < concepts; ++k) {
            const double mag =
                1.4 * static_cast<double>(concepts - k) / static_cast<double>(concepts);
            beta[k] = (k % 2 == 1 ? -1.0 : 1.0) * mag;
        }
        return beta;
    }
};

struct SynthTruth {
    std::vector<double> hazards;                 // planted per-concept coefficients
    std::vector<std::vector<double>> directions;  // unit feature-shift direction per concept
    std::vector<std::vector<std::size_t>> cluster_nodes;  // per sample, planted patch indices
};

struct SynthResult {
    StudyDataset dataset;  // patches, labels, outcomes, demographics; graphs unbuilt
    SynthTruth truth;
};

namespace detail {

inline std::string synth_patient_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "SYNP%08zu", i);
    return buf;
}

}  // namespace detail

inline SynthResult synth_generate(const SynthConfig& config) {
    config.validate();
    const Rng root = Rng(config.seed).substream("synth");
    const std::size_t d = config.feature_dim;
    const std::size_t k_count = config.concepts;

    SynthResult result;
    result.truth.hazards = config.effective_hazards();

    ConceptVocabulary vocab;
    for (std::size_t k = 0; k < k_count; ++k) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "concept_%02zu", k);
        vocab.names.push_back(buf);
    }

    // Concept-specific unit directions in feature space.
    Rng dir_rng = root.substream("directions");
    result.truth.directions.assign(k_count, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < k_count; ++k) {
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            result.truth.directions[k][c] = dir_rng.normal();
            norm += result.truth.directions[k][c] * result.truth.directions[k][c];
        }
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < d; ++c) result.truth.directions[k][c] /= norm;
    }

    std::vector<SlidePatches> slides;
    std::vector<ConceptLabels> labels;
    std::vector<SurvivalRecord> outcomes;
    std::vector<DemographicRecord> demographics;
    result.truth.cluster_nodes.resize(config.patients);

    for (std::size_t i = 0; i < config.patients; ++i) {
        Rng rng = root.substream("patient", i);
        const std::string patient = detail::synth_patient_id(i);
        const std::string slide_id = patient + "-S01";

        const std::size_t n_patches =
            config.min_patches +
            static_cast<std::size_t>(rng.below(config.max_patches - config.min_patches + 1));
        SlidePatches slide;
        slide.slide_id = slide_id;
        slide.patches.resize(n_patches);
        for (std::size_t p = 0; p < n_patches; ++p) {
            PatchRecord& patch = slide.patches[p];
            char buf[32];
            std::snprintf(buf, sizeof(buf), "P%04zu", p);
            patch.patch_id = buf;
            patch.centroid_x = rng.uniform(0.0, 1000.0);
            patch.centroid_y = rng.uniform(0.0, 1000.0);
            patch.features.resize(d);
            for (std::size_t c = 0; c < d; ++c) patch.features[c] = rng.normal();
        }

        ConceptLabels label;
        label.slide_id = slide_id;
        label.labels.resize(k_count);
        std::vector<double> active(k_count, 0.0);
        std::vector<char> in_any_cluster(n_patches, 0);
        for (std::size_t k = 0; k < k_count; ++k) {
            const bool on = rng.bernoulli(config.concept_prevalence);
            label.labels[k] = on ? 1 : 0;
            active[k] = on ? 1.0 : 0.0;
            if (!on) continue;
            // plant: the cluster is the round(fraction*n) patches nearest a
            // random center, shifted along the concept direction
            const double cx = rng.uniform(0.0, 1000.0);
            const double cy = rng.uniform(0.0, 1000.0);
            std::size_t cluster_size = static_cast<std::size_t>(
                std::llround(config.cluster_fraction * static_cast<double>(n_patches)));
            cluster_size = std::max<std::size_t>(1, std::min(cluster_size, n_patches));
            std::vector<std::pair<double, std::size_t>> by_dist(n_patches);
            for (std::size_t p = 0; p < n_patches; ++p) {
                const double dx = slide.patches[p].centroid_x - cx;
                const double dy = slide.patches[p].centroid_y - cy;
                by_dist[p] = {dx * dx + dy * dy, p};
            }
            std::sort(by_dist.begin(), by_dist.end());
            for (std::size_t q = 0; q < cluster_size; ++q) {
                const std::size_t p = by_dist[q].second;
                for (std::size_t c = 0; c < d; ++c)
                    slide.patches[p].features[c] +=
                        config.signal_strength * result.truth.directions[k][c];
                if (!in_any_cluster[p]) {
                    in_any_cluster[p] = 1;
                    result.truth.cluster_nodes[i].push_back(p);
                }
            }
        }
        if (config.missing_rate > 0.0)
            for (std::size_t k = 0; k < k_count; ++k)
                if (rng.bernoulli(config.missing_rate)) label.labels[k] = kMissingLabel;

        double log_hr = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) log_hr += result.truth.hazards[k] * active[k];
        const double rate = config.base_hazard * std::exp(log_hr);
        const double event_time = rng.exponential(rate);
        SurvivalRecord outcome;
        outcome.patient_id = patient;
        if (config.censoring_rate > 0.0) {
            const double cens_rate =
                rate * config.censoring_rate / (1.0 - config.censoring_rate);
            const double cens_time = rng.exponential(cens_rate);
            outcome.event = event_time <= cens_time;
            outcome.time = std::min(event_time, cens_time);
        } else {
            outcome.event = true;
            outcome.time = event_time;
        }

        DemographicRecord demo;
        demo.patient_id = patient;
        demo.age = std::floor(rng.uniform(40.0, 86.0));
        demo.gender = rng.bernoulli(0.5) ? Gender::Female : Gender::Male;
        const double race_draw = rng.uniform();
        demo.race = race_draw < 0.60   ? Race::White
                    : race_draw < 0.85 ? Race::Black
                    : race_draw < 0.95 ? Race::Asian
                                       : Race::NotAvailable;
        const double subtype_draw = rng.uniform();
        demo.subtype = subtype_draw < 0.60   ? Subtype::ClearCell
                       : subtype_draw < 0.85 ? Subtype::Papillary
                                             : Subtype::Chromophobe;

        slides.push_back(std::move(slide));
        labels.push_back(std::move(label));
        outcomes.push_back(std::move(outcome));
        demographics.push_back(std::move(demo));
    }

    JoinOutcome joined =
        join_study(std::move(slides), labels, outcomes, demographics, std::move(vocab));
    result.dataset = std::move(joined.dataset);
    return result;
}

// Planted ground truth alongside the bundle, for inspection and tests.
inline void save_synth_truth(const std::string& path, const ConceptVocabulary& vocab,
                             const SynthTruth& truth) {
    TableWriter out(path);
    out.comment("planted per-concept hazard coefficients");
    out.row({"concept", "hazard_coefficient"});
    for (std::size_t k = 0; k < truth.hazards.size(); ++k)
        out.row({vocab.names[k], format_double(truth.hazards[k])});
    out.close();
}

}  // namespace pathcbm
