#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pathcbm/binio.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/graph.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/table.hpp"

namespace pathcbm {

// ---------------------------------------------------------------------------
// Loaders for the documented tabular formats. All tables are tab-separated
// UTF-8 with a header row; '#' lines are comments.

// Patch feature table: slide_id, patch_id, x, y, f0..f{d-1}. Rows may
// interleave slides; groups are returned in first-appearance order.
inline std::vector<SlidePatches> load_patch_table(const std::string& path) {
    Table table = read_table(path);
    if (table.header.size() < 5)
        throw ValidationError(path + ": header needs slide_id, patch_id, x, y and >= 1 feature");
    if (table.header[0] != "slide_id" || table.header[1] != "patch_id" ||
        table.header[2] != "x" || table.header[3] != "y")
        throw ValidationError(path + ": header must start with slide_id, patch_id, x, y");
    if (table.rows.empty()) throw ValidationError(path + ": no patch rows");
    const std::size_t d = table.header.size() - 4;

    std::vector<SlidePatches> slides;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        PatchRecord patch;
        patch.patch_id = row[1];
        patch.centroid_x = parse_double(row[2], where);
        patch.centroid_y = parse_double(row[3], where);
        if (!std::isfinite(patch.centroid_x) || !std::isfinite(patch.centroid_y) ||
            patch.centroid_x < 0.0 || patch.centroid_y < 0.0)
            throw ValidationError(where + ": centroid must be a finite non-negative coordinate");
        patch.features.resize(d);
        for (std::size_t c = 0; c < d; ++c) {
            patch.features[c] = parse_double(row[4 + c], where);
            if (!std::isfinite(patch.features[c]))
                throw ValidationError(where + ": non-finite feature value");
        }
        auto [it, inserted] = index.try_emplace(row[0], slides.size());
        if (inserted) slides.push_back(SlidePatches{row[0], {}});
        SlidePatches& slide = slides[it->second];
        if (!slide.patches.empty() && slide.patches.front().features.size() != d)
            throw ValidationError(where + ": inconsistent feature dimension for slide '" + row[0] +
                                  "'");
        slide.patches.push_back(std::move(patch));
    }
    return slides;
}

inline void save_patch_table(const std::string& path, const std::vector<SlidePatches>& slides) {
    TableWriter out(path);
    std::size_t d = 0;
    for (const auto& s : slides) d = std::max(d, s.feature_dim());
    std::vector<std::string> header = {"slide_id", "patch_id", "x", "y"};
    for (std::size_t c = 0; c < d; ++c) header.push_back("f" + std::to_string(c));
    out.row(header);
    for (const auto& slide : slides) {
        for (const auto& p : slide.patches) {
            std::vector<std::string> row = {slide.slide_id, p.patch_id,
                                            format_double(p.centroid_x),
                                            format_double(p.centroid_y)};
            for (double f : p.features) row.push_back(format_double(f));
            out.row(row);
        }
    }
    out.close();
}

// Compact binary container for the same content; round-trips exactly.
inline constexpr char kPatchBinMagic[9] = "pcbmpat1";

inline void save_patch_bin(const std::string& path, const std::vector<SlidePatches>& slides) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(kPatchBinMagic, 8);
    binio::write_pod<std::uint64_t>(out, slides.size());
    for (const auto& slide : slides) {
        binio::write_string(out, slide.slide_id);
        binio::write_pod<std::uint64_t>(out, slide.patches.size());
        binio::write_pod<std::uint64_t>(out, slide.feature_dim());
        for (const auto& p : slide.patches) {
            binio::write_string(out, p.patch_id);
            binio::write_pod<double>(out, p.centroid_x);
            binio::write_pod<double>(out, p.centroid_y);
            binio::write_doubles(out, p.features);
        }
    }
    out.close();
    if (!out) throw std::runtime_error("error writing '" + path + "'");
}

inline std::vector<SlidePatches> load_patch_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    binio::check_magic(in, kPatchBinMagic, path);
    const auto n_slides = binio::read_pod<std::uint64_t>(in, "slide count");
    std::vector<SlidePatches> slides;
    slides.reserve(n_slides);
    for (std::uint64_t s = 0; s < n_slides; ++s) {
        SlidePatches slide;
        slide.slide_id = binio::read_string(in, "slide id");
        const auto n_patches = binio::read_pod<std::uint64_t>(in, "patch count");
        const auto d = binio::read_pod<std::uint64_t>(in, "feature dim");
        slide.patches.resize(n_patches);
        for (auto& p : slide.patches) {
            p.patch_id = binio::read_string(in, "patch id");
            p.centroid_x = binio::read_pod<double>(in, "centroid x");
            p.centroid_y = binio::read_pod<double>(in, "centroid y");
            binio::read_doubles(in, p.features, d, "features");
        }
        slides.push_back(std::move(slide));
    }
    return slides;
}

// Concept vocabulary: one name per line, '#' comments; order is canonical.
inline ConceptVocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocabulary '" + path + "'");
    ConceptVocabulary vocab;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen.insert(line).second)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": duplicate concept '" +
                                  line + "'");
        vocab.names.push_back(line);
    }
    if (vocab.names.empty()) throw ValidationError(path + ": no concepts");
    return vocab;
}

inline void save_vocabulary(const std::string& path, const ConceptVocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write vocabulary '" + path + "'");
    for (const auto& name : vocab.names) out << name << "\n";
    out.close();
    if (!out) throw std::runtime_error("error writing vocabulary '" + path + "'");
}

// Concept label table: slide_id column followed by one column per concept in
// vocabulary order; cells are 0, 1, or NA.
inline std::vector<ConceptLabels> load_concept_labels(const std::string& path,
                                                      const ConceptVocabulary& vocab) {
    Table table = read_table(path);
    if (table.header.empty() || table.header[0] != "slide_id")
        throw ValidationError(path + ": first column must be slide_id");
    if (table.header.size() != vocab.size() + 1)
        throw ValidationError(path + ": expected " + std::to_string(vocab.size()) +
                              " concept columns, got " + std::to_string(table.header.size() - 1));
    for (std::size_t k = 0; k < vocab.size(); ++k)
        if (table.header[k + 1] != vocab.names[k])
            throw ValidationError(path + ": column '" + table.header[k + 1] +
                                  "' does not match vocabulary concept '" + vocab.names[k] + "'");

    std::vector<ConceptLabels> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        if (!seen.insert(row[0]).second)
            throw ValidationError(where + ": duplicate slide '" + row[0] + "'");
        ConceptLabels labels;
        labels.slide_id = row[0];
        labels.labels.resize(vocab.size());
        for (std::size_t k = 0; k < vocab.size(); ++k) {
            const std::string& cell = row[k + 1];
            if (cell == "0")
                labels.labels[k] = 0;
            else if (cell == "1")
                labels.labels[k] = 1;
            else if (cell == "NA" || cell == "na")
                labels.labels[k] = kMissingLabel;
            else
                throw ValidationError(where + ": concept cell must be 0, 1, or NA, got '" + cell +
                                      "'");
        }
        out.push_back(std::move(labels));
    }
    return out;
}

inline void save_concept_labels(const std::string& path, const ConceptVocabulary& vocab,
                                const std::vector<ConceptLabels>& labels) {
    TableWriter out(path);
    std::vector<std::string> header = {"slide_id"};
    header.insert(header.end(), vocab.names.begin(), vocab.names.end());
    out.row(header);
    for (const auto& l : labels) {
        std::vector<std::string> row = {l.slide_id};
        for (std::int8_t y : l.labels)
            row.push_back(y == kMissingLabel ? "NA" : std::to_string(static_cast<int>(y)));
        out.row(row);
    }
    out.close();
}

// Outcome table: patient_id, time (days > 0), event (0/1).
inline std::vector<SurvivalRecord> load_outcomes(const std::string& path) {
    Table table = read_table(path);
    if (table.header != std::vector<std::string>{"patient_id", "time", "event"})
        throw ValidationError(path + ": header must be patient_id, time, event");
    std::vector<SurvivalRecord> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        if (!seen.insert(row[0]).second)
            throw ValidationError(where + ": duplicate patient '" + row[0] + "'");
        SurvivalRecord rec;
        rec.patient_id = row[0];
        rec.time = parse_double(row[1], where);
        if (!std::isfinite(rec.time) || rec.time <= 0.0)
            throw ValidationError(where + ": time must be a positive number of days");
        const long long ev = parse_int(row[2], where);
        if (ev != 0 && ev != 1) throw ValidationError(where + ": event must be 0 or 1");
        rec.event = ev == 1;
        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_outcomes(const std::string& path, const std::vector<SurvivalRecord>& records) {
    TableWriter out(path);
    out.row({"patient_id", "time", "event"});
    for (const auto& r : records)
        out.row({r.patient_id, format_double(r.time), r.event ? "1" : "0"});
    out.close();
}

// Demographics table: patient_id, age (years or NA), gender, race, subtype.
inline Gender parse_gender(const std::string& s, const std::string& where) {
    if (s == "female") return Gender::Female;
    if (s == "male") return Gender::Male;
    if (s == "unknown" || s == "NA" || s == "na") return Gender::Unknown;
    throw ValidationError(where + ": unknown gender '" + s + "'");
}

inline Race parse_race(const std::string& s, const std::string& where) {
    if (s == "white") return Race::White;
    if (s == "black") return Race::Black;
    if (s == "asian") return Race::Asian;
    if (s == "na" || s == "NA") return Race::NotAvailable;
    if (s == "unknown") return Race::Unknown;
    throw ValidationError(where + ": unknown race '" + s + "'");
}

inline Subtype parse_subtype(const std::string& s, const std::string& where) {
    if (s == "ccRCC") return Subtype::ClearCell;
    if (s == "pRCC") return Subtype::Papillary;
    if (s == "chRCC") return Subtype::Chromophobe;
    if (s == "unknown" || s == "NA" || s == "na") return Subtype::Unknown;
    throw ValidationError(where + ": unknown subtype '" + s + "'");
}

inline std::vector<DemographicRecord> load_demographics(const std::string& path) {
    Table table = read_table(path);
    if (table.header != std::vector<std::string>{"patient_id", "age", "gender", "race", "subtype"})
        throw ValidationError(path + ": header must be patient_id, age, gender, race, subtype");
    std::vector<DemographicRecord> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        if (!seen.insert(row[0]).second)
            throw ValidationError(where + ": duplicate patient '" + row[0] + "'");
        DemographicRecord rec;
        rec.patient_id = row[0];
        if (row[1] != "NA" && row[1] != "na") {
            const double age = parse_double(row[1], where);
            if (!(age >= 0.0 && age <= 130.0))
                throw ValidationError(where + ": age must be in [0, 130] or NA");
            rec.age = age;
        }
        rec.gender = parse_gender(row[2], where);
        rec.race = parse_race(row[3], where);
        rec.subtype = parse_subtype(row[4], where);
        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_demographics(const std::string& path,
                              const std::vector<DemographicRecord>& records) {
    TableWriter out(path);
    out.row({"patient_id", "age", "gender", "race", "subtype"});
    for (const auto& r : records)
        out.row({r.patient_id, r.age ? format_double(*r.age) : "NA", to_string(r.gender),
                 to_string(r.race), to_string(r.subtype)});
    out.close();
}

// ---------------------------------------------------------------------------
// Slide -> patient mapping

// Default TCGA-style rule: the patient id is the first 12 characters of the
// slide id (or the whole id when shorter). An explicit two-column table
// (slide_id, patient_id) overrides the rule.
struct SlidePatientMap {
    std::map<std::string, std::string> overrides;

    std::string patient_for(const std::string& slide_id) const {
        auto it = overrides.find(slide_id);
        if (it != overrides.end()) return it->second;
        return slide_id.size() <= 12 ? slide_id : slide_id.substr(0, 12);
    }
};

inline SlidePatientMap load_slide_patient_map(const std::string& path) {
    Table table = read_table(path);
    if (table.header != std::vector<std::string>{"slide_id", "patient_id"})
        throw ValidationError(path + ": header must be slide_id, patient_id");
    SlidePatientMap map;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (!map.overrides.emplace(row[0], row[1]).second)
            throw ValidationError(path + ":" + std::to_string(table.line_numbers[r]) +
                                  ": duplicate slide '" + row[0] + "'");
    }
    return map;
}

// ---------------------------------------------------------------------------
// Study assembly

struct StudySample {
    std::string patient_id;
    std::string slide_id;
    SlidePatches patches;       // raw patches; kept so graphs can be rebuilt with another k
    WsiGraph graph;             // spatial graph; empty until the graph step runs
    std::uint32_t graph_k = 0;  // k the graph was built with
    ConceptLabels concepts;
    SurvivalRecord outcome;
    DemographicRecord demographics;

    bool has_graph() const { return graph.node_count() > 0; }
};

struct StudyDataset {
    ConceptVocabulary vocabulary;
    std::vector<StudySample> samples;

    std::size_t size() const { return samples.size(); }
};

struct JoinReport {
    std::size_t slides_in = 0;
    std::size_t concepts_in = 0;
    std::size_t outcomes_in = 0;
    std::size_t demographics_in = 0;
    std::size_t matched = 0;
    std::size_t demographics_matched = 0;
    std::vector<std::string> dropped_slides;        // slide ids without concepts or outcome
    std::vector<std::string> dropped_concepts;      // slide ids without patches or outcome
    std::vector<std::string> dropped_outcomes;      // patient ids without a matched slide
    std::vector<std::string> unmatched_demographics;

    std::string to_text() const {
        std::string s;
        s += "slides_in\t" + std::to_string(slides_in) + "\n";
        s += "concepts_in\t" + std::to_string(concepts_in) + "\n";
        s += "outcomes_in\t" + std::to_string(outcomes_in) + "\n";
        s += "demographics_in\t" + std::to_string(demographics_in) + "\n";
        s += "matched\t" + std::to_string(matched) + "\n";
        s += "demographics_matched\t" + std::to_string(demographics_matched) + "\n";
        s += "dropped_slides\t" + std::to_string(dropped_slides.size());
        for (const auto& id : dropped_slides) s += "\t" + id;
        s += "\ndropped_concepts\t" + std::to_string(dropped_concepts.size());
        for (const auto& id : dropped_concepts) s += "\t" + id;
        s += "\ndropped_outcomes\t" + std::to_string(dropped_outcomes.size());
        for (const auto& id : dropped_outcomes) s += "\t" + id;
        s += "\nunmatched_demographics\t" + std::to_string(unmatched_demographics.size());
        for (const auto& id : unmatched_demographics) s += "\t" + id;
        s += "\n";
        return s;
    }
};

struct JoinOutcome {
    StudyDataset dataset;
    JoinReport report;
};

// Inner-joins slides, concept labels, and outcomes; demographics are
// attached when present and left unknown otherwise. Samples are sorted by
// patient id so downstream fold assignment is order-independent.
inline JoinOutcome join_study(std::vector<SlidePatches> slides,
                              const std::vector<ConceptLabels>& concepts,
                              const std::vector<SurvivalRecord>& outcomes,
                              const std::vector<DemographicRecord>& demographics,
                              ConceptVocabulary vocabulary,
                              const SlidePatientMap& mapping = {}) {
    JoinOutcome out;
    out.report.slides_in = slides.size();
    out.report.concepts_in = concepts.size();
    out.report.outcomes_in = outcomes.size();
    out.report.demographics_in = demographics.size();

    std::map<std::string, const ConceptLabels*> by_slide_concepts;
    for (const auto& c : concepts) {
        if (!by_slide_concepts.emplace(c.slide_id, &c).second)
            throw ValidationError("join_study: duplicate concept labels for slide '" + c.slide_id +
                                  "'");
        if (c.labels.size() != vocabulary.size())
            throw ValidationError("join_study: slide '" + c.slide_id + "' has " +
                                  std::to_string(c.labels.size()) + " labels, vocabulary has " +
                                  std::to_string(vocabulary.size()));
    }
    std::map<std::string, const SurvivalRecord*> by_patient_outcome;
    for (const auto& o : outcomes)
        if (!by_patient_outcome.emplace(o.patient_id, &o).second)
            throw ValidationError("join_study: duplicate outcome for patient '" + o.patient_id +
                                  "'");
    std::map<std::string, const DemographicRecord*> by_patient_demo;
    for (const auto& d : demographics)
        if (!by_patient_demo.emplace(d.patient_id, &d).second)
            throw ValidationError("join_study: duplicate demographics for patient '" +
                                  d.patient_id + "'");

    std::set<std::string> matched_slides, matched_patients;
    for (auto& slide : slides) {
        const std::string patient = mapping.patient_for(slide.slide_id);
        auto ci = by_slide_concepts.find(slide.slide_id);
        auto oi = by_patient_outcome.find(patient);
        if (ci == by_slide_concepts.end() || oi == by_patient_outcome.end()) {
            out.report.dropped_slides.push_back(slide.slide_id);
            continue;
        }
        if (!matched_patients.insert(patient).second)
            throw ValidationError("join_study: duplicate patient '" + patient +
                                  "' (two slides map to one patient)");
        matched_slides.insert(slide.slide_id);

        StudySample sample;
        sample.patient_id = patient;
        sample.slide_id = slide.slide_id;
        sample.patches = std::move(slide);
        sample.concepts = *ci->second;
        sample.outcome = *oi->second;
        auto di = by_patient_demo.find(patient);
        if (di != by_patient_demo.end()) {
            sample.demographics = *di->second;
            ++out.report.demographics_matched;
        } else {
            sample.demographics.patient_id = patient;
        }
        out.dataset.samples.push_back(std::move(sample));
    }
    if (out.dataset.samples.empty())
        throw ValidationError("join_study: no sample has patches, concept labels, and an outcome");

    for (const auto& c : concepts)
        if (!matched_slides.count(c.slide_id)) out.report.dropped_concepts.push_back(c.slide_id);
    for (const auto& o : outcomes)
        if (!matched_patients.count(o.patient_id))
            out.report.dropped_outcomes.push_back(o.patient_id);
    for (const auto& d : demographics)
        if (!matched_patients.count(d.patient_id))
            out.report.unmatched_demographics.push_back(d.patient_id);

    std::sort(out.dataset.samples.begin(), out.dataset.samples.end(),
              [](const StudySample& a, const StudySample& b) { return a.patient_id < b.patient_id; });
    out.dataset.vocabulary = std::move(vocabulary);
    out.report.matched = out.dataset.samples.size();
    return out;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_dataset(const StudyDataset& dataset) {
    ValidationReport report;
    std::set<std::string> seen;
    for (const auto& s : dataset.samples) {
        if (!seen.insert(s.patient_id).second)
            report.violations.push_back("patient '" + s.patient_id + "': duplicate sample");
        if (!(s.outcome.time > 0.0) || !std::isfinite(s.outcome.time))
            report.violations.push_back("patient '" + s.patient_id + "': non-positive time");
        if (s.concepts.labels.size() != dataset.vocabulary.size())
            report.violations.push_back("patient '" + s.patient_id + "': " +
                                        std::to_string(s.concepts.labels.size()) + " labels, expected " +
                                        std::to_string(dataset.vocabulary.size()));
        for (std::int8_t y : s.concepts.labels)
            if (y != 0 && y != 1 && y != kMissingLabel) {
                report.violations.push_back("patient '" + s.patient_id + "': label out of range");
                break;
            }
        if (!s.has_graph() && s.patches.patches.empty())
            report.violations.push_back("patient '" + s.patient_id + "': missing graph and patches");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Study bundle on disk: a directory with the joined tables plus binary
// patches/graphs. Written by `ingest`, upgraded in place by `graph`.

namespace bundle {

inline std::string vocabulary_path(const std::string& dir) { return dir + "/vocabulary.txt"; }
inline std::string patches_path(const std::string& dir) { return dir + "/patches.bin"; }
inline std::string graphs_path(const std::string& dir) { return dir + "/graphs.bin"; }
inline std::string concepts_path(const std::string& dir) { return dir + "/concepts.tsv"; }
inline std::string outcomes_path(const std::string& dir) { return dir + "/outcomes.tsv"; }
inline std::string demographics_path(const std::string& dir) { return dir + "/demographics.tsv"; }
inline std::string samples_path(const std::string& dir) { return dir + "/samples.tsv"; }
inline std::string join_report_path(const std::string& dir) { return dir + "/join_report.txt"; }

}  // namespace bundle

inline void save_bundle(const std::string& dir, const StudyDataset& dataset,
                        const JoinReport* report = nullptr) {
    std::filesystem::create_directories(dir);
    save_vocabulary(bundle::vocabulary_path(dir), dataset.vocabulary);

    TableWriter samples(bundle::samples_path(dir));
    samples.row({"patient_id", "slide_id"});
    for (const auto& s : dataset.samples) samples.row({s.patient_id, s.slide_id});
    samples.close();

    std::vector<ConceptLabels> concepts;
    std::vector<SurvivalRecord> outcomes;
    std::vector<DemographicRecord> demographics;
    for (const auto& s : dataset.samples) {
        concepts.push_back(s.concepts);
        outcomes.push_back(s.outcome);
        demographics.push_back(s.demographics);
    }
    save_concept_labels(bundle::concepts_path(dir), dataset.vocabulary, concepts);
    save_outcomes(bundle::outcomes_path(dir), outcomes);
    save_demographics(bundle::demographics_path(dir), demographics);

    bool any_patches = false, any_graphs = false;
    for (const auto& s : dataset.samples) {
        any_patches = any_patches || !s.patches.patches.empty();
        any_graphs = any_graphs || s.has_graph();
    }
    if (any_patches) {
        std::vector<SlidePatches> slides;
        for (const auto& s : dataset.samples) slides.push_back(s.patches);
        save_patch_bin(bundle::patches_path(dir), slides);
    }
    if (any_graphs) {
        std::vector<CachedGraph> graphs;
        for (const auto& s : dataset.samples) graphs.push_back({s.graph, s.graph_k});
        save_graph_cache(bundle::graphs_path(dir), graphs);
    }
    if (report) {
        std::ofstream out(bundle::join_report_path(dir), std::ios::binary);
        if (!out) throw ValidationError("cannot write join report in '" + dir + "'");
        out << report->to_text();
    }
}

inline StudyDataset load_bundle(const std::string& dir) {
    StudyDataset dataset;
    dataset.vocabulary = load_vocabulary(bundle::vocabulary_path(dir));

    Table samples = read_table(bundle::samples_path(dir));
    if (samples.header != std::vector<std::string>{"patient_id", "slide_id"})
        throw ValidationError(bundle::samples_path(dir) + ": header must be patient_id, slide_id");

    const auto concepts = load_concept_labels(bundle::concepts_path(dir), dataset.vocabulary);
    const auto outcomes = load_outcomes(bundle::outcomes_path(dir));
    const auto demographics = load_demographics(bundle::demographics_path(dir));
    if (concepts.size() != samples.rows.size() || outcomes.size() != samples.rows.size() ||
        demographics.size() != samples.rows.size())
        throw ValidationError(dir + ": bundle tables disagree on sample count");

    std::map<std::string, SlidePatches> patches;
    if (std::filesystem::exists(bundle::patches_path(dir)))
        for (auto& s : load_patch_bin(bundle::patches_path(dir)))
            patches[s.slide_id] = std::move(s);
    std::map<std::string, CachedGraph> graphs;
    if (std::filesystem::exists(bundle::graphs_path(dir)))
        for (auto& g : load_graph_cache(bundle::graphs_path(dir)))
            graphs[g.graph.slide_id] = std::move(g);

    for (std::size_t r = 0; r < samples.rows.size(); ++r) {
        StudySample sample;
        sample.patient_id = samples.rows[r][0];
        sample.slide_id = samples.rows[r][1];
        if (concepts[r].slide_id != sample.slide_id)
            throw ValidationError(dir + ": concepts.tsv row order does not match samples.tsv");
        if (outcomes[r].patient_id != sample.patient_id)
            throw ValidationError(dir + ": outcomes.tsv row order does not match samples.tsv");
        if (demographics[r].patient_id != sample.patient_id)
            throw ValidationError(dir + ": demographics.tsv row order does not match samples.tsv");
        sample.concepts = concepts[r];
        sample.outcome = outcomes[r];
        sample.demographics = demographics[r];
        auto pi = patches.find(sample.slide_id);
        if (pi != patches.end()) sample.patches = pi->second;
        auto gi = graphs.find(sample.slide_id);
        if (gi != graphs.end()) {
            sample.graph = gi->second.graph;
            sample.graph_k = gi->second.k;
        }
        dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

}  // namespace pathcbm
