// Cross-validation harness: folds, settings, stratification, fairness.
#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <cmath>
#include <set>

using namespace pathcbm;
using Catch::Matchers::ContainsSubstring;

namespace {

// Small synthetic study with spatial graphs attached.
StudyDataset graph_dataset(std::size_t patients, std::size_t concepts, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.patients = patients;
    cfg.min_patches = 6;
    cfg.max_patches = 10;
    cfg.feature_dim = 4;
    cfg.concepts = concepts;
    cfg.seed = seed;
    StudyDataset ds = synth_generate(cfg).dataset;
    for (auto& s : ds.samples) {
        s.graph = build_knn_graph(s.patches, 3);
        s.graph_k = 3;
    }
    return ds;
}

CbmConfig tiny_model() {
    CbmConfig cfg;
    cfg.hidden = 8;
    cfg.blocks = 1;
    cfg.attention_dim = 4;
    return cfg;
}

TrainConfig tiny_training() {
    TrainConfig cfg;
    cfg.steps = 2;
    cfg.batch_size = 8;
    cfg.base_lr = 1e-3;
    return cfg;
}

SurvivalRunOptions quick_options() {
    SurvivalRunOptions opt;
    opt.lambda_grid = {0.01, 0.1};
    opt.lambda_folds = 3;
    opt.model = tiny_model();
    opt.training = tiny_training();
    opt.seed = 5;
    opt.auc_grid_points = 8;
    return opt;
}

}  // namespace

TEST_CASE("make_folds partitions the index range into balanced folds", "[harness]") {
    const FoldPlan plan = make_folds(43, 5, 3);
    CHECK(plan.n == 43);
    CHECK(plan.fold_count() == 5);

    std::vector<std::size_t> all;
    for (const auto& fold : plan.test_folds) {
        CHECK(fold.size() >= 8);
        CHECK(fold.size() <= 9);
        CHECK(std::is_sorted(fold.begin(), fold.end()));
        all.insert(all.end(), fold.begin(), fold.end());
    }
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == 43);
    for (std::size_t i = 0; i < 43; ++i) CHECK(all[i] == i);

    // train_indices is exactly the complement of the test fold.
    for (std::size_t f = 0; f < 5; ++f) {
        const auto train = plan.train_indices(f);
        CHECK(train.size() == 43 - plan.test_folds[f].size());
        std::set<std::size_t> test_set(plan.test_folds[f].begin(), plan.test_folds[f].end());
        for (std::size_t i : train) CHECK_FALSE(test_set.count(i));
    }
    CHECK_THROWS_AS(plan.train_indices(5), std::invalid_argument);

    CHECK(make_folds(43, 5, 3).test_folds == plan.test_folds);
    CHECK(make_folds(43, 5, 4).test_folds != plan.test_folds);
    CHECK_THROWS_AS(make_folds(43, 0), ValidationError);
    CHECK_THROWS_AS(make_folds(3, 5), ValidationError);
}

TEST_CASE("setting names parse and round-trip", "[harness]") {
    for (const char* name : {"e2e", "agg", "cbm", "binary"})
        CHECK(setting_slug(parse_survival_setting(name)) == name);
    CHECK(parse_survival_setting("e2e") == SurvivalSetting::EndToEndCox);
    CHECK(parse_survival_setting("binary") == SurvivalSetting::BinaryConceptsCoxPH);
    CHECK_THROWS_AS(parse_survival_setting("deep"), ValidationError);
    CHECK_THAT(to_string(SurvivalSetting::CbmLogitsCoxPH), ContainsSubstring("CoxPH"));
}

TEST_CASE("summarize_metric ignores NaN folds", "[harness]") {
    const double nan = std::numeric_limits<double>::quiet_NaN();

    MetricSummary s = summarize_metric({1.0, 2.0, 3.0});
    CHECK(s.folds == 3);
    CHECK(s.mean == 2.0);
    CHECK_THAT(s.stddev, Catch::Matchers::WithinRel(1.0, 1e-15));

    s = summarize_metric({nan, 2.0, nan});
    CHECK(s.folds == 1);
    CHECK(s.mean == 2.0);
    CHECK(s.stddev == 0.0);

    s = summarize_metric({});
    CHECK(s.folds == 0);
    CHECK(std::isnan(s.mean));
    CHECK(std::isnan(s.stddev));
}

TEST_CASE("split_by_mean uses the mean as an inclusive high threshold", "[harness]") {
    const RiskGroups g = split_by_mean({0.0, 1.0, 2.0, 3.0});
    CHECK(g.threshold == 1.5);
    CHECK(g.low == std::vector<std::size_t>{0, 1});
    CHECK(g.high == std::vector<std::size_t>{2, 3});

    // Everyone at the mean lands in the high group.
    const RiskGroups flat = split_by_mean({2.0, 2.0, 2.0});
    CHECK(flat.low.empty());
    CHECK(flat.high.size() == 3);

    CHECK_THROWS_AS(split_by_mean({}), ValidationError);
    CHECK_THROWS_AS(split_by_mean({1.0, std::numeric_limits<double>::infinity()}),
                    ValidationError);
}

TEST_CASE("stratify_and_test separates clearly distinct risk groups", "[harness]") {
    std::vector<SurvivalRecord> records;
    std::vector<double> risks;
    for (int i = 0; i < 12; ++i) {  // early events, high risk score
        records.push_back(testutil::rec(1.0 + i, 1));
        risks.push_back(2.0);
    }
    for (int i = 0; i < 12; ++i) {  // late events, low risk score
        records.push_back(testutil::rec(100.0 + i, i % 3 != 0));
        risks.push_back(0.0);
    }

    const StratifyResult res = stratify_and_test(risks, records);
    CHECK(res.groups.low.size() + res.groups.high.size() == records.size());
    CHECK(res.groups.high == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    REQUIRE(res.test_performed);
    CHECK(res.test.p_value < 1e-6);
    CHECK(res.low_curve.n == 12);
    CHECK(res.high_curve.n == 12);
    // High-risk subjects die first, so their curve sits below at early times.
    CHECK(res.high_curve.at(12.0) < res.low_curve.at(12.0));

    // Negating the scores swaps the two groups exactly.
    std::vector<double> negated;
    for (double r : risks) negated.push_back(-r);
    const StratifyResult swapped = stratify_and_test(negated, records);
    CHECK(swapped.groups.low == res.groups.high);
    CHECK(swapped.groups.high == res.groups.low);
    CHECK(swapped.test.chi_square == res.test.chi_square);

    // Identical scores leave the low group empty; the test is skipped.
    const StratifyResult flat = stratify_and_test(std::vector<double>(24, 1.0), records);
    CHECK_FALSE(flat.test_performed);
    CHECK_THAT(flat.note, ContainsSubstring("low-risk group is empty"));

    CHECK_THROWS_AS(stratify_and_test({1.0}, records), std::invalid_argument);
}

TEST_CASE("top_risk_factors ranks by magnitude and drops zeros", "[harness]") {
    CoxModel model;
    model.beta = {0.5, -2.0, 0.0, 1.0};
    model.feature_names = {"a", "b", "c", "d"};

    const auto factors = top_risk_factors(model);
    REQUIRE(factors.size() == 3);
    CHECK(factors[0].name == "b");
    CHECK(factors[0].coefficient == -2.0);
    CHECK(factors[1].name == "d");
    CHECK(factors[2].name == "a");

    const auto top2 = top_risk_factors(model, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[1].name == "d");

    // Equal magnitudes break the tie by index; missing names get a fallback.
    CoxModel tie;
    tie.beta = {1.0, -1.0};
    const auto t = top_risk_factors(tie);
    REQUIRE(t.size() == 2);
    CHECK(t[0].name == "feature_0");
    CHECK(t[0].coefficient == 1.0);
    CHECK(t[1].name == "feature_1");
}

TEST_CASE("assemble_crossfit_risks leaves dropped samples as NaN", "[harness]") {
    SettingResult result;
    FoldOutcome fo;
    fo.test_indices = {0, 2};
    fo.test_risks = {1.5, -2.5};
    result.folds.push_back(fo);

    const auto risks = assemble_crossfit_risks(result, 4);
    REQUIRE(risks.size() == 4);
    CHECK(risks[0] == 1.5);
    CHECK(std::isnan(risks[1]));
    CHECK(risks[2] == -2.5);
    CHECK(std::isnan(risks[3]));

    CHECK_THROWS_AS(assemble_crossfit_risks(result, 2), std::invalid_argument);
}

TEST_CASE("binary setting cross-validates without leaking test folds", "[harness]") {
    StudyDataset dataset = graph_dataset(40, 3, 21);
    const FoldPlan plan = make_folds(40, 4, 2);
    const SurvivalRunOptions options = quick_options();

    const SettingResult base =
        run_survival_setting(dataset, SurvivalSetting::BinaryConceptsCoxPH, plan, options);
    REQUIRE(base.folds.size() >= 2);
    CHECK(base.ibs_applicable);
    for (const auto& fo : base.folds) {
        CHECK(fo.test_risks.size() == fo.test_indices.size());
        CHECK(fo.feature_names == dataset.vocabulary.names);
        CHECK(fo.beta.size() == 3);
        CHECK(std::isfinite(fo.lambda));
    }
    CHECK(base.cindex.folds == base.folds.size());

    // Corrupt fold 0's test samples. Their labels and outcomes feed every
    // other fold's training set but never fold 0's own fit, so fold 0's
    // coefficients must not move while some other fold's must.
    StudyDataset tampered = dataset;
    for (std::size_t i : plan.test_folds[0]) {
        auto& s = tampered.samples[i];
        for (auto& y : s.concepts.labels) y = static_cast<std::int8_t>(1 - y);
        s.outcome.time *= 3.0;
    }
    const SettingResult moved =
        run_survival_setting(tampered, SurvivalSetting::BinaryConceptsCoxPH, plan, options);

    auto find_fold = [](const SettingResult& r, std::size_t f) -> const FoldOutcome* {
        for (const auto& fo : r.folds)
            if (fo.fold == f) return &fo;
        return nullptr;
    };
    const FoldOutcome* f0a = find_fold(base, 0);
    const FoldOutcome* f0b = find_fold(moved, 0);
    REQUIRE(f0a);
    REQUIRE(f0b);
    CHECK(f0a->beta == f0b->beta);  // bitwise: nothing upstream of fold 0 changed
    CHECK(f0a->lambda == f0b->lambda);

    bool any_other_changed = false;
    for (std::size_t f = 1; f < plan.fold_count(); ++f) {
        const FoldOutcome* a = find_fold(base, f);
        const FoldOutcome* b = find_fold(moved, f);
        if (a && b && a->beta != b->beta) any_other_changed = true;
    }
    CHECK(any_other_changed);
}

TEST_CASE("worker count does not change survival results", "[harness]") {
    StudyDataset dataset = graph_dataset(40, 3, 33);
    const FoldPlan plan = make_folds(40, 4, 7);
    SurvivalRunOptions options = quick_options();

    options.workers = 1;
    const SettingResult serial =
        run_survival_setting(dataset, SurvivalSetting::BinaryConceptsCoxPH, plan, options);
    options.workers = 3;
    const SettingResult threaded =
        run_survival_setting(dataset, SurvivalSetting::BinaryConceptsCoxPH, plan, options);

    REQUIRE(serial.folds.size() == threaded.folds.size());
    for (std::size_t i = 0; i < serial.folds.size(); ++i) {
        const auto& a = serial.folds[i];
        const auto& b = threaded.folds[i];
        CHECK(a.fold == b.fold);
        CHECK(a.lambda == b.lambda);
        CHECK(a.beta == b.beta);
        CHECK(a.test_risks == b.test_risks);
        // NaN-safe metric comparison: bitwise equal or both NaN.
        CHECK((a.cindex == b.cindex || (std::isnan(a.cindex) && std::isnan(b.cindex))));
        CHECK((a.ibs == b.ibs || (std::isnan(a.ibs) && std::isnan(b.ibs))));
    }
    CHECK(serial.warnings == threaded.warnings);
}

TEST_CASE("cbm setting fits a full-data model over concept probabilities", "[harness]") {
    StudyDataset dataset = graph_dataset(24, 2, 44);
    const FoldPlan plan = make_folds(24, 3, 1);
    SurvivalRunOptions options = quick_options();
    options.lambda_folds = 2;

    const SettingResult res =
        run_survival_setting(dataset, SurvivalSetting::CbmLogitsCoxPH, plan, options);
    REQUIRE_FALSE(res.folds.empty());
    CHECK(res.ibs_applicable);
    for (const auto& fo : res.folds) {
        CHECK(fo.feature_names == dataset.vocabulary.names);
        CHECK(fo.beta.size() == 2);
    }
    REQUIRE(res.has_full_model);
    CHECK(res.full_model.feature_names == dataset.vocabulary.names);
    for (const auto& rf : top_risk_factors(res.full_model)) {
        const auto& names = dataset.vocabulary.names;
        CHECK(std::find(names.begin(), names.end(), rf.name) != names.end());
    }

    const auto risks = assemble_crossfit_risks(res, dataset.samples.size());
    std::size_t defined = 0;
    for (double r : risks) defined += std::isfinite(r) ? 1 : 0;
    std::size_t covered = 0;
    for (const auto& fo : res.folds) covered += fo.test_indices.size();
    CHECK(defined == covered);
}

TEST_CASE("end-to-end setting scores directly and skips IBS", "[harness]") {
    StudyDataset dataset = graph_dataset(24, 2, 55);
    const FoldPlan plan = make_folds(24, 3, 1);
    SurvivalRunOptions options = quick_options();

    const SettingResult res =
        run_survival_setting(dataset, SurvivalSetting::EndToEndCox, plan, options);
    CHECK_FALSE(res.ibs_applicable);
    CHECK(res.ibs.folds == 0);
    REQUIRE_FALSE(res.folds.empty());
    for (const auto& fo : res.folds) {
        CHECK(std::isnan(fo.lambda));  // no ridge stage in the direct setting
        CHECK(fo.beta.empty());
        CHECK(std::isnan(fo.ibs));
        CHECK(fo.test_risks.size() == fo.test_indices.size());
        for (double r : fo.test_risks) CHECK(std::isfinite(r));
    }
    CHECK_FALSE(res.has_full_model);
}

TEST_CASE("run_survival_setting validates its inputs", "[harness]") {
    StudyDataset dataset = graph_dataset(20, 2, 66);
    const FoldPlan plan = make_folds(20, 4, 1);

    CHECK_THROWS_AS(
        run_survival_setting(StudyDataset{}, SurvivalSetting::BinaryConceptsCoxPH, plan),
        ValidationError);
    CHECK_THROWS_AS(run_survival_setting(dataset, SurvivalSetting::BinaryConceptsCoxPH,
                                         make_folds(19, 4, 1)),
                    ValidationError);

    // Graph-based settings insist on graphs.
    StudyDataset no_graphs = dataset;
    for (auto& s : no_graphs.samples) s.graph = WsiGraph{};
    CHECK_THROWS_AS(
        run_survival_setting(no_graphs, SurvivalSetting::CbmLogitsCoxPH, plan, quick_options()),
        ValidationError);
    CHECK_NOTHROW(run_survival_setting(no_graphs, SurvivalSetting::BinaryConceptsCoxPH, plan,
                                       quick_options()));

    // With every subject censored every fold drops and the run fails loudly.
    StudyDataset censored = dataset;
    for (auto& s : censored.samples) s.outcome.event = false;
    CHECK_THROWS_MATCHES(run_survival_setting(censored, SurvivalSetting::BinaryConceptsCoxPH,
                                              plan, quick_options()),
                         ValidationError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("every fold was dropped")));
}

TEST_CASE("concept benchmark reports per-concept and pooled rows", "[harness]") {
    StudyDataset dataset = graph_dataset(24, 2, 77);
    dataset.vocabulary.names = {"ccRCC_pattern", "plain_concept"};
    const FoldPlan plan = make_folds(24, 2, 1);

    const ConceptBenchmark bench =
        run_concept_benchmark(dataset, tiny_model(), tiny_training(), plan);
    REQUIRE(bench.concepts.size() == 2);
    CHECK(bench.concepts[0].name == "ccRCC_pattern");
    CHECK(bench.concepts[1].name == "plain_concept");
    for (const auto& row : bench.concepts) {
        CHECK(row.auc.folds >= 1);
        CHECK(row.auc.mean >= 0.0);
        CHECK(row.auc.mean <= 1.0);
        CHECK(row.ap.folds >= 1);
        CHECK(row.acc.folds >= 1);
    }
    CHECK(bench.top10.name == "Top10");
    CHECK(bench.mean.name == "Mean");
    CHECK(bench.mean.auc.folds == 2);
    CHECK(bench.subtype_indices == std::vector<std::size_t>{0});

    CHECK_THROWS_AS(
        run_concept_benchmark(StudyDataset{}, tiny_model(), tiny_training(), plan),
        ValidationError);
    CHECK_THROWS_AS(run_concept_benchmark(dataset, tiny_model(), tiny_training(),
                                          make_folds(23, 2, 1)),
                    ValidationError);
}

TEST_CASE("fairness report buckets subgroups inside each risk stratum", "[harness]") {
    CHECK(parse_fairness_attribute("gender") == FairnessAttribute::Gender);
    CHECK(parse_fairness_attribute("race") == FairnessAttribute::Race);
    CHECK_THROWS_AS(parse_fairness_attribute("ancestry"), ValidationError);
    CHECK(to_string(FairnessAttribute::Gender) == "gender");
    CHECK(to_string(FairnessAttribute::Race) == "race");

    // 30 subjects: indices 0..14 low risk, 15..29 high risk.
    std::vector<SurvivalRecord> records;
    std::vector<DemographicRecord> demographics;
    std::vector<double> risks;
    for (std::size_t i = 0; i < 30; ++i) {
        records.push_back(testutil::rec(10.0 + static_cast<double>(i), i % 4 != 0));
        DemographicRecord d;
        d.patient_id = records.back().patient_id;
        if (i < 15) {  // low stratum: 7 female, 6 male, 2 unknown
            d.gender = i < 7 ? Gender::Female : (i < 13 ? Gender::Male : Gender::Unknown);
        } else {  // high stratum: 12 female, 3 male (below the minimum)
            d.gender = i < 27 ? Gender::Female : Gender::Male;
        }
        demographics.push_back(std::move(d));
        risks.push_back(i < 15 ? 0.0 : 2.0);
    }

    const RiskGroups groups = split_by_mean(risks);
    REQUIRE(groups.low.size() == 15);
    const FairnessReport report =
        fairness_report(groups, records, demographics, FairnessAttribute::Gender, 5);
    CHECK(report.attribute == FairnessAttribute::Gender);
    CHECK(report.min_group == 5);
    REQUIRE(report.strata.size() == 2);

    const FairnessStratum& low = report.strata[0];
    CHECK(low.stratum == "low");
    CHECK(low.stratum_size == 15);
    REQUIRE(low.groups.size() == 2);
    CHECK(low.groups[0].name == "female");
    CHECK(low.groups[0].size == 7);
    CHECK(low.groups[1].name == "male");
    CHECK(low.groups[1].size == 6);
    CHECK(low.groups[0].curve.n == 7);
    REQUIRE(low.excluded.size() == 1);
    CHECK(low.excluded[0].name == "unknown");
    CHECK(low.excluded[0].size == 2);
    CHECK_THAT(low.excluded[0].reason, ContainsSubstring("not recorded"));
    CHECK(low.test_performed);
    CHECK(low.test.group_names == std::vector<std::string>{"female", "male"});

    const FairnessStratum& high = report.strata[1];
    CHECK(high.stratum == "high");
    REQUIRE(high.groups.size() == 1);  // males fall below min_group
    CHECK(high.groups[0].name == "female");
    REQUIRE(high.excluded.size() == 1);
    CHECK(high.excluded[0].name == "male");
    CHECK(high.excluded[0].size == 3);
    CHECK_THAT(high.excluded[0].reason, ContainsSubstring("below minimum group size 5"));
    CHECK_FALSE(high.test_performed);
    CHECK_THAT(high.note, ContainsSubstring("fewer than two comparable subgroups"));

    CHECK_THROWS_AS(
        fairness_report(groups, records, {demographics[0]}, FairnessAttribute::Gender, 5),
        std::invalid_argument);
}

TEST_CASE("fairness race categories include the not-available bucket", "[harness]") {
    std::vector<SurvivalRecord> records;
    std::vector<DemographicRecord> demographics;
    std::vector<double> risks;
    const Race races[] = {Race::White, Race::White, Race::White, Race::White, Race::White,
                          Race::White, Race::Black, Race::Black, Race::Black, Race::Black,
                          Race::Black, Race::Asian, Race::Asian, Race::NotAvailable,
                          Race::Unknown};
    for (std::size_t i = 0; i < std::size(races); ++i) {
        records.push_back(testutil::rec(5.0 + static_cast<double>(i), i % 3 != 2));
        DemographicRecord d;
        d.patient_id = records.back().patient_id;
        d.race = races[i];
        demographics.push_back(std::move(d));
        risks.push_back(1.0);  // all equal: everyone lands in the high stratum
    }

    const FairnessReport report = fairness_report(split_by_mean(risks), records, demographics,
                                                  FairnessAttribute::Race, 5);
    REQUIRE(report.strata.size() == 2);
    CHECK(report.strata[0].stratum_size == 0);
    CHECK_THAT(report.strata[0].note, ContainsSubstring("stratum is empty"));

    const FairnessStratum& high = report.strata[1];
    CHECK(high.stratum_size == 15);
    REQUIRE(high.groups.size() == 2);
    CHECK(high.groups[0].name == "white");
    CHECK(high.groups[0].size == 6);
    CHECK(high.groups[1].name == "black");
    CHECK(high.groups[1].size == 5);
    REQUIRE(high.excluded.size() == 3);  // asian (2), na (1), unknown (1)
    std::set<std::string> excluded_names;
    for (const auto& e : high.excluded) excluded_names.insert(e.name);
    CHECK(excluded_names == std::set<std::string>{"asian", "na", "unknown"});
}
