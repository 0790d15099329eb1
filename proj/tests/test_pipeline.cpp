// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

namespace sglp {
namespace {

using testing::slurp;
using testing::TempDir;

/// A small, fast toy configuration.
PipelineConfig small_config() {
    PipelineConfig cfg;
    ToySourceConfig toy;
    toy.width = 4;
    toy.hidden_layers = 6;
    toy.classes = 3;
    toy.n_per_class = 60;
    toy.pretrain_epochs = 8;
    toy.cka_samples = 64;
    toy.score_batch_size = 32;
    toy.score_batches = 2;
    cfg.source = toy;
    cfg.k = 2;
    cfg.budget = Budget::total(4);
    cfg.jobs = 2;
    return cfg;
}

std::vector<Json> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<Json> out;
    for (std::string line; std::getline(in, line);) out.push_back(Json::parse(line));
    return out;
}

TEST(Config, JsonRoundTrip) {
    auto cfg = small_config();
    cfg.mode = InitScope::local;
    cfg.seeds = Seeds{9, 8, 7, 6};
    cfg.finetune = FinetuneConfig{3, 0.01, 16};
    const Json j = config_to_json(cfg);
    const auto back = config_from_json(Json::parse(j.dump()));
    EXPECT_EQ(config_to_json(back).dump(), j.dump());
    EXPECT_EQ(config_digest(back), config_digest(cfg));
}

TEST(Config, DigestIgnoresLocalSettings) {
    auto a = small_config(), b = small_config();
    b.output_dir = "/elsewhere";
    b.jobs = 7;
    EXPECT_EQ(config_digest(a), config_digest(b));
    b.seeds.score = 99;
    EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(Config, UnknownKeysRejected) {
    Json j = config_to_json(small_config());
    j["sead"] = 1;
    EXPECT_TRUE(testing::throws_error([&] { config_from_json(j); }, ErrorKind::usage, "sead"));
    Json k = config_to_json(small_config());
    k["source"]["toy"]["widht"] = 3;
    EXPECT_THROW(config_from_json(k), Error);
}

TEST(Config, FinetuneEpochsDefaultToQuarterOfPretraining) {
    auto cfg = small_config();
    EXPECT_EQ(finetune_epochs(cfg), 2u);
    cfg.finetune.epochs = 5;
    EXPECT_EQ(finetune_epochs(cfg), 5u);
}

TEST(Run, IdenticalConfigsGiveByteIdenticalPlans) {
    TempDir a("run-a"), b("run-b");
    auto cfg = small_config();
    cfg.output_dir = a.path().string();
    run(cfg);
    cfg.output_dir = b.path().string();
    cfg.jobs = 1;
    run(cfg);
    const auto pa = slurp(a / "plan.json");
    ASSERT_FALSE(pa.empty());
    EXPECT_EQ(pa, slurp(b / "plan.json"));
    EXPECT_EQ(slurp(a / "finetuned.bin"), slurp(b / "finetuned.bin"));
}

TEST(Run, ArtifactsAreConsistent) {
    TempDir dir("run-consistency");
    auto cfg = small_config();
    cfg.output_dir = dir.path().string();
    const auto out = run(cfg);

    EXPECT_EQ(out.plan.kept.size(), 4u);
    EXPECT_EQ(out.finetuned->spec.hidden_layers, 4u);
    auto spec = out.finetuned->spec;
    EXPECT_EQ(*out.record.params_after, parameter_count(spec));
    spec.hidden_layers = 6;
    EXPECT_EQ(*out.record.params_before, parameter_count(spec));

    const Json doc = read_json_file(dir / "plan.json");
    EXPECT_EQ(doc["provenance"]["config_digest"], config_digest(cfg));
    EXPECT_EQ(doc["provenance"]["seeds"]["score"], cfg.seeds.score);

    const auto lines = read_lines(dir / "report.jsonl");
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0]["kept_count"], 4);
    EXPECT_EQ(lines[0]["params_after"], *out.record.params_after);

    // Every persisted stage output parses.
    std::ifstream actv(dir / "activations.actv", std::ios::binary);
    EXPECT_EQ(read_activations(actv).layer_count(), 6u);
    std::ifstream sim(dir / "similarity.csv");
    EXPECT_EQ(read_similarity(sim).rows(), 6u);
    std::ifstream net(dir / "finetuned.bin", std::ios::binary);
    EXPECT_EQ(read_network(net), *out.finetuned);
}

TEST(Run, ReferenceParamCountAfterPruning) {
    auto cfg = reference_config();
    auto& toy = std::get<ToySourceConfig>(cfg.source);
    toy.pretrain_epochs = 4;  // shape, not accuracy, is under test
    const auto out = run(cfg);
    EXPECT_EQ(out.plan.kept.size(), 8u);
    EXPECT_EQ(*out.record.params_after, parameter_count(NetworkSpec{2, 8, 8, 4, true, 0}));
}

TEST(Run, PlanStageIsPureGivenPersistedInputs) {
    TempDir dir("run-purity");
    auto cfg = small_config();
    cfg.output_dir = dir.path().string();
    const auto out = run(cfg);

    std::ifstream net_in(dir / "pretrained.bin", std::ios::binary);
    const auto net = read_network(net_in);
    std::ifstream data_in(dir / "score_data.csv");
    const auto data = read_dataset(data_in);
    const auto named = segmentation_from_json(read_json_file(dir / "segmentation.json"));

    // Recompute the segmentation from the persisted similarity matrix too.
    std::ifstream sim_in(dir / "similarity.csv");
    const auto seg = fisher_segment(row_sums(read_similarity(sim_in)), cfg.k);
    EXPECT_EQ(seg.starts, named.segmentation.starts);

    PlanOptions opt;
    opt.budget = cfg.budget;
    opt.mode = cfg.mode;
    opt.seed = cfg.seeds.score;
    opt.layer_names = named.layer_names;
    const ToyScorer scorer(net, split_batches(data, 2), named.segmentation, cfg.mode, cfg.seeds.score);
    const auto replanned = plan(scorer, named.segmentation, opt);
    EXPECT_EQ(dump(plan_to_json(replanned)), dump(plan_to_json(out.plan)));
}

TEST(Run, RerunFromArtifactReproducesIt) {
    TempDir a("rerun-a"), b("rerun-b");
    auto cfg = small_config();
    cfg.output_dir = a.path().string();
    run(cfg);
    auto again = config_from_json(read_json_file(a / "plan.json")["provenance"]["config"]);
    again.output_dir = b.path().string();
    run(again);
    EXPECT_EQ(slurp(a / "plan.json"), slurp(b / "plan.json"));
}

TEST(Run, StageErrorsNameTheStage) {
    auto cfg = small_config();
    cfg.k = 7;  // more segments than layers
    EXPECT_TRUE(testing::throws_error([&] { run(cfg); }, ErrorKind::usage, "stage segment"));
}

class FileSource : public ::testing::Test {
protected:
    void SetUp() override {
        CounterRng rng(3, 0);
        ActivationSet set;
        for (int l = 0; l < 5; ++l) {
            Matrix m(16, 3);
            for (auto& v : m.values()) v = static_cast<float>(rng.normal());
            set.layers.push_back({"block" + std::to_string(l), m});
        }
        std::ofstream a(dir / "acts.actv", std::ios::binary);
        write_activations(set, a);
        acts_ = set;
    }

    void write_scores(const Segmentation& seg, std::size_t extra_bits = 0) {
        ScoreTable t;
        for (std::size_t s = 0; s < seg.k(); ++s)
            for (auto m : enumerate_masks(seg.segment_size(s) + (s == 0 ? extra_bits : 0)))
                t.records.push_back({static_cast<std::uint32_t>(s), m, static_cast<double>(std::popcount(m))});
        std::ofstream out(dir / "scores.tsv");
        write_score_table(t, out);
    }

    PipelineConfig config() const {
        PipelineConfig cfg;
        cfg.source = FileSourceConfig{(dir / "acts.actv").string(), (dir / "scores.tsv").string()};
        cfg.k = 2;
        return cfg;
    }

    Segmentation expected_segmentation() const {
        return fisher_segment(row_sums(similarity_matrix(acts_).values), 2);
    }

    TempDir dir{"files"};
    ActivationSet acts_;
};

TEST_F(FileSource, PlansFromTable) {
    write_scores(expected_segmentation());
    const auto out = run(config());
    EXPECT_EQ(out.plan.kept.size(), 5u);  // popcount scores keep everything
    EXPECT_EQ(out.plan.scorer, "table");
    EXPECT_EQ(out.plan.layer_names[0], "block0");
}

TEST_F(FileSource, LayerCountMismatchIsStageError) {
    write_scores(expected_segmentation(), 1);
    EXPECT_TRUE(testing::throws_error([&] { run(config()); }, ErrorKind::data, "stage load"));
}

TEST_F(FileSource, PartialTableRejected) {
    write_scores(expected_segmentation());
    {
        std::ofstream out(dir / "scores.tsv", std::ios::app);
        out << "# status: partial\n";
    }
    EXPECT_TRUE(testing::throws_error([&] { run(config()); }, ErrorKind::data, "partial"));
}

TEST(Sweeps, KSweepRowsShareTheBudget) {
    auto cfg = small_config();
    const auto report = k_sweep(cfg, {2, 3, 4}, 4);
    ASSERT_EQ(report.runs.size(), 3u);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(report.runs[i].kept.size(), 4u);
        EXPECT_EQ(report.runs[i].k, i + 2);
        lo = std::min(lo, *report.runs[i].post_finetune_accuracy);
        hi = std::max(hi, *report.runs[i].post_finetune_accuracy);
    }
    EXPECT_EQ(report.summary["spread"].get<double>(), hi - lo);
    EXPECT_THROW(k_sweep(cfg, {5}, 4), Error);
}

TEST(Sweeps, DepthSweepParametersIncreaseAndFullDepthIsLossless) {
    auto cfg = small_config();
    const auto report = depth_sweep(cfg, {6, 2, 4});
    ASSERT_EQ(report.runs.size(), 3u);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_GT(*report.runs[i].params_after, *report.runs[i - 1].params_after);
    const auto& full = report.runs.back();
    EXPECT_EQ(full.kept.size(), 6u);
    EXPECT_EQ(*full.post_prune_accuracy, *full.pre_prune_accuracy);
    EXPECT_THROW(depth_sweep(cfg, {1}), Error);
}

TEST(Sweeps, SaturationTotal) {
    EXPECT_EQ(saturation_total({4, 6, 8}, {0.5, 0.9, 0.95}, 0.96, 0.02), 8u);
    EXPECT_EQ(saturation_total({4, 6, 8}, {0.5, 0.95, 0.90}, 0.96, 0.02), 6u);
    EXPECT_EQ(saturation_total({4, 6, 8}, {0.5, 0.4, 0.95}, 0.96, 0.02), std::nullopt);
    EXPECT_EQ(saturation_total({4, 6}, {0.5, 0.6}, 0.96, 0.02), std::nullopt);
}

TEST(Sweeps, BaselineHasOneRowPerTrialPlusPlanned) {
    TempDir dir("baseline");
    auto cfg = small_config();
    cfg.output_dir = dir.path().string();
    const auto report = baseline_compare(cfg, 10);
    ASSERT_EQ(report.runs.size(), 11u);
    EXPECT_EQ(report.runs[0].label, "sglp");
    double sum = 0.0;
    for (std::size_t i = 0; i < 11; ++i) {
        EXPECT_EQ(report.runs[i].budget, "total:4");
        EXPECT_EQ(report.runs[i].kept.size(), 4u);
        if (i > 0) {
            EXPECT_EQ(report.runs[i].scorer, "random");
            sum += *report.runs[i].post_finetune_accuracy;
        }
    }
    EXPECT_NEAR(report.summary["random_mean"].get<double>(), sum / 10.0, 1e-12);
    EXPECT_EQ(read_lines(dir / "report.jsonl").size(), 12u);
}

}  // namespace
}  // namespace sglp
