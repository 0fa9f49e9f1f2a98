// Command-line front end: ingest tables into a study bundle, build spatial
// graphs, train and benchmark the concept bottleneck, run the survival
// settings, stratify risk, test fairness, generate synthetic studies, and
// export plot-ready tables. Exit codes: 0 success, 1 validation failure,
// 2 runtime error.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <pathcbm/pathcbm.hpp>

namespace {

using namespace pathcbm;

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::size_t workers = 1;
    std::string out = "out";

    std::string bundle_dir() const { return out + "/bundle"; }
    std::string plots_dir() const { return out + "/plots"; }
    std::string benchmark_path() const { return out + "/benchmark.bin"; }
    std::string cbm_model_path() const { return out + "/cbm_model.bin"; }
    std::string survival_path(SurvivalSetting s) const {
        return out + "/survival_" + setting_slug(s) + ".bin";
    }
    std::string stratify_path() const { return out + "/stratify.bin"; }
    std::string fairness_path(FairnessAttribute a) const {
        return out + "/fairness_" + to_string(a) + ".bin";
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("error writing '" + path + "'");
}

void emit_report(const GlobalOpts& g, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(g.out);
    write_text(g.out + "/" + name, text);
    std::fputs(text.c_str(), stdout);
}

StudyDataset load_study(const GlobalOpts& g) { return load_bundle(g.bundle_dir()); }

void require_graphs(const StudyDataset& dataset) {
    for (const auto& s : dataset.samples)
        if (!s.has_graph())
            throw ValidationError("slide '" + s.slide_id +
                                  "' has no spatial graph; run the graph step first");
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return out;
}

// ---------------------------------------------------------------------------
// synth

int run_synth(const GlobalOpts& g, const std::string& config_path) {
    SynthConfig cfg;
    cfg.seed = g.seed;
    if (!config_path.empty()) {
        Config file = Config::from_file(config_path);
        apply_synth_config(file, cfg);
        file.require_consumed();
        if (g.seed_given) cfg.seed = g.seed;  // an explicit flag beats the config file
    }
    const SynthResult result = synth_generate(cfg);

    save_bundle(g.bundle_dir(), result.dataset);
    save_synth_truth(g.bundle_dir() + "/synth_truth.tsv", result.dataset.vocabulary, result.truth);

    std::size_t events = 0;
    for (const auto& s : result.dataset.samples)
        if (s.outcome.event) ++events;
    std::printf("synthetic study: %zu patients, %zu concepts, %zu events, %zu censored\n",
                result.dataset.size(), result.dataset.vocabulary.size(), events,
                result.dataset.size() - events);
    std::printf("bundle written to %s\n", g.bundle_dir().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestPaths {
    std::string patches;
    std::string concepts;
    std::string outcomes;
    std::string vocabulary;
    std::string demographics;
    std::string slide_map;
};

int run_ingest(const GlobalOpts& g, const IngestPaths& paths) {
    std::vector<SlidePatches> slides;
    if (paths.patches.size() >= 4 && paths.patches.substr(paths.patches.size() - 4) == ".bin")
        slides = load_patch_bin(paths.patches);
    else
        slides = load_patch_table(paths.patches);

    ConceptVocabulary vocabulary = load_vocabulary(paths.vocabulary);
    const auto concepts = load_concept_labels(paths.concepts, vocabulary);
    const auto outcomes = load_outcomes(paths.outcomes);
    std::vector<DemographicRecord> demographics;
    if (!paths.demographics.empty()) demographics = load_demographics(paths.demographics);
    SlidePatientMap mapping;
    if (!paths.slide_map.empty()) mapping = load_slide_patient_map(paths.slide_map);

    JoinOutcome joined = join_study(std::move(slides), concepts, outcomes, demographics,
                                    std::move(vocabulary), mapping);

    const ValidationReport valid = validate_dataset(joined.dataset);
    if (!valid.ok()) {
        for (const auto& v : valid.violations) std::fprintf(stderr, "invalid: %s\n", v.c_str());
        throw ValidationError("dataset failed validation with " +
                              std::to_string(valid.violations.size()) + " violation(s)");
    }

    save_bundle(g.bundle_dir(), joined.dataset, &joined.report);
    std::fputs(joined.report.to_text().c_str(), stdout);
    std::printf("bundle written to %s\n", g.bundle_dir().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// graph

int run_graph(const GlobalOpts& g, std::size_t k) {
    if (k == 0) throw ValidationError("graph: --k must be >= 1");
    StudyDataset dataset = load_study(g);

    std::size_t built = 0, kept = 0, edges = 0;
    for (auto& s : dataset.samples) {
        if (s.has_graph() && s.graph_k == k) {
            ++kept;
            edges += s.graph.edges.size();
            continue;
        }
        if (s.patches.patches.empty())
            throw ValidationError("slide '" + s.slide_id + "' has no patches to build a graph");
        s.graph = build_knn_graph(s.patches, k);
        s.graph_k = static_cast<std::uint32_t>(k);
        ++built;
        edges += s.graph.edges.size();
    }

    save_bundle(g.bundle_dir(), dataset);
    std::printf("graphs: built %zu, reused %zu (k = %zu, %.1f edges per slide)\n", built, kept, k,
                dataset.size() ? static_cast<double>(edges) / dataset.size() : 0.0);
    return 0;
}

// ---------------------------------------------------------------------------
// train-concepts

int run_train_concepts(const GlobalOpts& g, const std::string& config_path, std::size_t folds) {
    CbmConfig model_config;
    TrainConfig train_config;
    if (!config_path.empty()) {
        Config file = Config::from_file(config_path);
        apply_cbm_config(file, model_config);
        apply_train_config(file, train_config);
        file.require_consumed();
    }

    StudyDataset dataset = load_study(g);
    require_graphs(dataset);

    const FoldPlan plan = make_folds(dataset.size(), folds, g.seed);
    const ConceptBenchmark bench =
        run_concept_benchmark(dataset, model_config, train_config, plan, g.workers);

    std::filesystem::create_directories(g.out);
    save_benchmark(g.benchmark_path(), bench);
    emit_report(g, "concept_report.txt", render_benchmark(bench));

    // One model over the full study, for attention maps and deployment.
    std::vector<ConceptExample> examples;
    examples.reserve(dataset.size());
    for (const auto& s : dataset.samples)
        examples.push_back({&s.graph, s.concepts.labels});
    const std::size_t input_dim = dataset.samples.front().graph.feature_dim();
    CbmModel full(input_dim, model_config, dataset.vocabulary,
                  Rng(g.seed).substream("cbm-full").seed());
    TrainConfig full_train = train_config;
    full_train.seed = Rng(g.seed).substream("cbm-full-train").seed();
    const std::vector<double> trace = train_cbm(full, examples, full_train);
    save_cbm_model(g.cbm_model_path(), full);
    std::printf("full model: loss %.4f -> %.4f over %zu epochs, saved to %s\n",
                trace.empty() ? 0.0 : trace.front(), trace.empty() ? 0.0 : trace.back(),
                trace.size(), g.cbm_model_path().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// survival

int run_survival(const GlobalOpts& g, const std::string& setting_name,
                 const std::vector<double>& lambda_grid, std::size_t folds,
                 const std::string& config_path) {
    const SurvivalSetting setting = parse_survival_setting(setting_name);

    SurvivalRunOptions options;
    options.seed = g.seed;
    options.workers = g.workers;
    if (!config_path.empty()) {
        Config file = Config::from_file(config_path);
        apply_cbm_config(file, options.model);
        apply_train_config(file, options.training);
        options.lambda_folds = file.get_size("lambda_folds", options.lambda_folds);
        options.auc_grid_points = file.get_size("auc_grid_points", options.auc_grid_points);
        file.require_consumed();
    }
    if (!lambda_grid.empty()) options.lambda_grid = lambda_grid;

    StudyDataset dataset = load_study(g);
    if (setting != SurvivalSetting::BinaryConceptsCoxPH) require_graphs(dataset);

    const FoldPlan plan = make_folds(dataset.size(), folds, g.seed);
    const SettingResult result = run_survival_setting(dataset, setting, plan, options);

    std::filesystem::create_directories(g.out);
    save_setting_result(g.survival_path(setting), result);
    emit_report(g, "survival_" + setting_slug(setting) + ".txt", render_setting_result(result));
    return 0;
}

// ---------------------------------------------------------------------------
// stratify

int run_stratify(const GlobalOpts& g, const std::string& setting_name) {
    const SurvivalSetting setting = parse_survival_setting(setting_name);
    const std::string path = g.survival_path(setting);
    if (!std::filesystem::exists(path))
        throw ValidationError("no results for setting '" + setting_slug(setting) +
                              "'; run survival first (expected " + path + ")");

    const SettingResult result = load_setting_result(path);
    const StudyDataset dataset = load_study(g);
    const std::vector<double> all_risks = assemble_crossfit_risks(result, dataset.size());

    StratifyStore store;
    store.setting = setting_slug(setting);
    for (std::size_t i = 0; i < all_risks.size(); ++i) {
        if (!std::isfinite(all_risks[i])) continue;  // sample sat in a dropped fold
        store.sample_indices.push_back(i);
        store.patient_ids.push_back(dataset.samples[i].patient_id);
        store.risks.push_back(all_risks[i]);
    }
    if (store.risks.empty())
        throw ValidationError("stratify: no out-of-fold risk scores in " + path);

    std::vector<SurvivalRecord> records;
    records.reserve(store.sample_indices.size());
    for (std::size_t i : store.sample_indices) records.push_back(dataset.samples[i].outcome);

    store.result = stratify_and_test(store.risks, records);
    save_stratify(g.stratify_path(), store);
    emit_report(g, "stratify.txt", render_stratify(store));
    return 0;
}

// ---------------------------------------------------------------------------
// fairness

int run_fairness(const GlobalOpts& g, const std::string& attribute_name, std::size_t min_group) {
    const FairnessAttribute attribute = parse_fairness_attribute(attribute_name);
    if (!std::filesystem::exists(g.stratify_path()))
        throw ValidationError("fairness needs risk groups; run stratify first (expected " +
                              g.stratify_path() + ")");

    const StratifyStore store = load_stratify(g.stratify_path());
    const StudyDataset dataset = load_study(g);

    std::vector<SurvivalRecord> records;
    std::vector<DemographicRecord> demographics;
    records.reserve(store.sample_indices.size());
    for (std::size_t row = 0; row < store.sample_indices.size(); ++row) {
        const std::size_t i = store.sample_indices[row];
        if (i >= dataset.size() || dataset.samples[i].patient_id != store.patient_ids[row])
            throw ValidationError("stratify results do not match the bundle; rerun stratify");
        records.push_back(dataset.samples[i].outcome);
        demographics.push_back(dataset.samples[i].demographics);
    }

    const FairnessReport report =
        fairness_report(store.result.groups, records, demographics, attribute, min_group);
    save_fairness(g.fairness_path(attribute), report);
    emit_report(g, "fairness_" + to_string(attribute) + ".txt", render_fairness(report));
    return 0;
}

// ---------------------------------------------------------------------------
// export

int run_export(const GlobalOpts& g, const std::vector<std::string>& attention_slides) {
    ExportInputs inputs;

    ConceptBenchmark bench;
    if (std::filesystem::exists(g.benchmark_path())) {
        bench = load_benchmark(g.benchmark_path());
        inputs.benchmark = &bench;
    }

    std::vector<SettingResult> settings;
    settings.reserve(4);
    for (SurvivalSetting s :
         {SurvivalSetting::EndToEndCox, SurvivalSetting::AggFeaturesCoxPH,
          SurvivalSetting::CbmLogitsCoxPH, SurvivalSetting::BinaryConceptsCoxPH})
        if (std::filesystem::exists(g.survival_path(s)))
            settings.push_back(load_setting_result(g.survival_path(s)));
    for (const auto& s : settings) inputs.settings.push_back(&s);

    StratifyStore stratify;
    if (std::filesystem::exists(g.stratify_path())) {
        stratify = load_stratify(g.stratify_path());
        inputs.stratify = &stratify;
    }

    std::vector<FairnessReport> fairness;
    fairness.reserve(2);
    for (FairnessAttribute a : {FairnessAttribute::Gender, FairnessAttribute::Race})
        if (std::filesystem::exists(g.fairness_path(a)))
            fairness.push_back(load_fairness(g.fairness_path(a)));
    for (const auto& f : fairness) inputs.fairness.push_back(&f);

    const bool any_results = inputs.benchmark || !inputs.settings.empty() || inputs.stratify ||
                             !inputs.fairness.empty();
    if (!any_results && attention_slides.empty())
        throw ValidationError("nothing to export: no result files under '" + g.out + "'");

    std::vector<std::string> written;
    if (any_results) written = export_plot_data(inputs, g.plots_dir());

    if (!attention_slides.empty()) {
        if (!std::filesystem::exists(g.cbm_model_path()))
            throw ValidationError("attention maps need a trained model; run train-concepts first");
        CbmModel model = load_cbm_model(g.cbm_model_path());
        StudyDataset dataset = load_study(g);
        std::filesystem::create_directories(g.plots_dir());
        for (const auto& slide_id : attention_slides) {
            const StudySample* sample = nullptr;
            for (const auto& s : dataset.samples)
                if (s.slide_id == slide_id) { sample = &s; break; }
            if (!sample) throw ValidationError("slide '" + slide_id + "' not in the bundle");
            if (!sample->has_graph())
                throw ValidationError("slide '" + slide_id + "' has no graph; run graph first");
            for (std::size_t k = 0; k < model.concept_count(); ++k) {
                const std::string name = "attention_" + sanitize(slide_id) + "_" +
                                         sanitize(model.vocabulary.names[k]) + ".tsv";
                TableWriter out(g.plots_dir() + "/" + name);
                out.row({"x", "y", "weight"});
                for (const AttentionPoint& p : attention_map(model, sample->graph, k))
                    out.row({format_double(p.x), format_double(p.y), format_double(p.weight)});
                out.close();
                written.push_back(name);
            }
        }
    }

    for (const auto& name : written) std::printf("wrote %s/%s\n", g.plots_dir().c_str(), name.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pathology concept-bottleneck survival pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "random seed for folds, training, and synthesis");
    app.add_option("--workers", g.workers, "worker threads for folds")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory (holds the bundle and all results)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic study bundle");
    std::string synth_config;
    synth->add_option("--config", synth_config, "key=value synthesis settings")
        ->check(CLI::ExistingFile);

    auto* ingest = app.add_subcommand("ingest", "join tables into a validated study bundle");
    IngestPaths paths;
    ingest->add_option("--patches", paths.patches, "patch feature table (.tsv or .bin)")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--concepts", paths.concepts, "per-slide concept label table")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--outcomes", paths.outcomes, "patient_id, time, event table")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--vocabulary", paths.vocabulary, "concept names, one per line")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--demographics", paths.demographics, "optional demographics table")
        ->check(CLI::ExistingFile);
    ingest->add_option("--slide-map", paths.slide_map, "optional slide_id to patient_id table")
        ->check(CLI::ExistingFile);

    auto* graph = app.add_subcommand("graph", "build spatial kNN graphs into the bundle");
    std::size_t k = 8;
    graph->add_option("--k", k, "neighbors per patch");

    auto* train = app.add_subcommand("train-concepts", "cross-validated concept benchmark");
    std::string train_config;
    std::size_t train_folds = 5;
    train->add_option("--config", train_config, "key=value model and training settings")
        ->check(CLI::ExistingFile);
    train->add_option("--folds", train_folds, "cross-validation folds");

    auto* survival = app.add_subcommand("survival", "run one survival-analysis setting");
    std::string setting_name;
    std::vector<double> lambda_grid;
    std::size_t survival_folds = 5;
    std::string survival_config;
    survival->add_option("--setting", setting_name, "e2e, agg, cbm, or binary")->required();
    survival->add_option("--lambda-grid", lambda_grid, "ridge penalties to search")
        ->delimiter(',');
    survival->add_option("--folds", survival_folds, "cross-validation folds");
    survival->add_option("--config", survival_config, "key=value model and training settings")
        ->check(CLI::ExistingFile);

    auto* stratify = app.add_subcommand("stratify", "split patients by out-of-fold risk");
    std::string stratify_setting = "cbm";
    stratify->add_option("--setting", stratify_setting, "which setting's risks to use");

    auto* fairness = app.add_subcommand("fairness", "subgroup survival tests inside risk groups");
    std::string attribute;
    std::size_t min_group = 20;
    fairness->add_option("--attribute", attribute, "gender or race")->required();
    fairness->add_option("--min-group", min_group, "smallest subgroup to test");

    auto* exporter = app.add_subcommand("export", "write plot-ready tables from saved results");
    std::vector<std::string> attention_slides;
    exporter->add_option("--attention", attention_slides,
                         "slide ids to export per-concept attention maps for");

    for (auto* sub : {synth, ingest, graph, train, survival, stratify, fairness, exporter})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    g.seed_given = app.count("--seed") > 0;

    try {
        if (synth->parsed()) return run_synth(g, synth_config);
        if (ingest->parsed()) return run_ingest(g, paths);
        if (graph->parsed()) return run_graph(g, k);
        if (train->parsed()) return run_train_concepts(g, train_config, train_folds);
        if (survival->parsed())
            return run_survival(g, setting_name, lambda_grid, survival_folds, survival_config);
        if (stratify->parsed()) return run_stratify(g, stratify_setting);
        if (fairness->parsed()) return run_fairness(g, attribute, min_group);
        if (exporter->parsed()) return run_export(g, attention_slides);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
