#pragma once

#include <string>

#include "pathcbm/concepts.hpp"
#include "pathcbm/synth.hpp"
#include "pathcbm/table.hpp"

namespace pathcbm {

// Appliers from the key=value Config onto the library's config structs: each
// consumes the keys that mirror one struct's fields and re-validates the
// result. Unknown keys stay unconsumed so the caller can reject typos with
// Config::require_consumed().

inline void apply_cbm_config(const Config& cfg, CbmConfig& model) {
    model.hidden = cfg.get_size("hidden", model.hidden);
    model.blocks = cfg.get_size("blocks", model.blocks);
    model.attention_dim = cfg.get_size("attention_dim", model.attention_dim);
    model.validate();
}

inline void apply_train_config(const Config& cfg, TrainConfig& train) {
    train.steps = cfg.get_size("steps", train.steps);
    train.steps_are_epochs = cfg.get_bool("steps_are_epochs", train.steps_are_epochs);
    train.batch_size = cfg.get_size("batch_size", train.batch_size);
    train.base_lr = cfg.get_double("base_lr", train.base_lr);
    train.floor_lr = cfg.get_double("floor_lr", train.floor_lr);
    train.weight_decay = cfg.get_double("weight_decay", train.weight_decay);
    train.seed = cfg.get_u64("seed", train.seed);
    train.validate();
}

inline void apply_synth_config(const Config& cfg, SynthConfig& synth) {
    synth.patients = cfg.get_size("patients", synth.patients);
    synth.min_patches = cfg.get_size("min_patches", synth.min_patches);
    synth.max_patches = cfg.get_size("max_patches", synth.max_patches);
    synth.feature_dim = cfg.get_size("feature_dim", synth.feature_dim);
    synth.concepts = cfg.get_size("concepts", synth.concepts);
    synth.concept_prevalence = cfg.get_double("concept_prevalence", synth.concept_prevalence);
    synth.cluster_fraction = cfg.get_double("cluster_fraction", synth.cluster_fraction);
    synth.signal_strength = cfg.get_double("signal_strength", synth.signal_strength);
    synth.hazard_coefficients =
        cfg.get_double_list("hazard_coefficients", synth.hazard_coefficients);
    synth.base_hazard = cfg.get_double("base_hazard", synth.base_hazard);
    synth.censoring_rate = cfg.get_double("censoring_rate", synth.censoring_rate);
    synth.missing_rate = cfg.get_double("missing_rate", synth.missing_rate);
    synth.seed = cfg.get_u64("seed", synth.seed);
    synth.validate();
}

}  // namespace pathcbm
