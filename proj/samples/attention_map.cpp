// Trains a small concept model on synthetic slides, then prints where each
// concept head looks on one slide: patch centroid plus attention weight,
// TSV on stdout (pipe into a plotting tool of choice).

#include <cstdio>
#include <vector>

#include "pathcbm/pathcbm.hpp"

using namespace pathcbm;

int main() {
    SynthConfig cfg;
    cfg.patients = 60;
    cfg.min_patches = 12;
    cfg.max_patches = 20;
    cfg.feature_dim = 8;
    cfg.concepts = 3;
    cfg.seed = 19;
    const StudyDataset study = synth_generate(cfg).dataset;

    std::vector<WsiGraph> graphs;
    graphs.reserve(study.size());
    for (const auto& s : study.samples) graphs.push_back(build_knn_graph(s.patches, 4));

    CbmConfig shape;
    shape.hidden = 16;
    shape.blocks = 1;
    shape.attention_dim = 8;
    CbmModel model(cfg.feature_dim, shape, study.vocabulary, 3);

    std::vector<ConceptExample> examples(study.size());
    for (std::size_t i = 0; i < study.size(); ++i) {
        examples[i].graph = &graphs[i];
        examples[i].labels = study.samples[i].concepts.labels;
    }
    TrainConfig training;
    training.steps = 8;
    training.batch_size = 16;
    training.base_lr = 1e-3;
    const std::vector<double> losses = train_cbm(model, examples, training);
    std::fprintf(stderr, "trained %zu epochs, loss %.4f -> %.4f\n", losses.size(), losses.front(),
                 losses.back());

    const std::size_t slide = 0;
    std::fprintf(stderr, "attention over slide %s (%zu patches)\n",
                 study.samples[slide].slide_id.c_str(), graphs[slide].node_count());
    std::printf("concept\tx\ty\tweight\n");
    for (std::size_t k = 0; k < model.concept_count(); ++k)
        for (const AttentionPoint& p : attention_map(model, graphs[slide], k))
            std::printf("%s\t%s\t%s\t%s\n", study.vocabulary.names[k].c_str(),
                        format_double(p.x).c_str(), format_double(p.y).c_str(),
                        format_double(p.weight).c_str());
    return 0;
}
