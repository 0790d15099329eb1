// SPDX-License-Identifier: Apache-2.0
//
// End-to-end pruning runs: activations -> CKA -> segmentation -> plan ->
// prune -> fine-tune -> evaluate, plus the sweeps built on top of them.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sglp/activation_io.hpp"
#include "sglp/cka.hpp"
#include "sglp/error.hpp"
#include "sglp/fisher.hpp"
#include "sglp/json_io.hpp"
#include "sglp/planner.hpp"
#include "sglp/toynet.hpp"

namespace sglp {

struct ToySourceConfig {
    std::size_t input_dim = 2;
    std::size_t width = 8;
    std::size_t hidden_layers = 12;
    std::size_t classes = 4;
    bool residual = true;
    std::size_t n_per_class = 500;
    double spread = 1.0;
    double test_fraction = 0.2;
    std::size_t pretrain_epochs = 40;
    double pretrain_lr = 0.02;
    std::size_t pretrain_batch_size = 32;
    std::size_t cka_samples = 512;
    std::size_t score_batch_size = 256;
    std::size_t score_batches = 1;
};

struct FileSourceConfig {
    std::string activations;
    std::string scores;
};

struct Seeds {
    std::uint64_t build = 1;
    std::uint64_t data = 2;
    std::uint64_t score = 3;
    std::uint64_t finetune = 4;
};

struct FinetuneConfig {
    std::size_t epochs = 0;  // 0: a quarter of the pretraining epochs
    double lr = 0.02;
    std::size_t batch_size = 32;
};

struct PipelineConfig {
    std::variant<ToySourceConfig, FileSourceConfig> source = ToySourceConfig{};
    std::size_t k = 5;
    Budget budget;
    InitScope mode = InitScope::literal;
    Seeds seeds;
    FinetuneConfig finetune;
    std::string output_dir;  // empty: keep everything in memory
    std::size_t jobs = 0;    // scoring threads, 0 = hardware concurrency
};

/// The fixed desk-scale task: 2-D 4-class blobs, 2000 points, a 12-unit
/// residual network of width 8, k = 4, eight layers kept in total.
inline PipelineConfig reference_config() {
    PipelineConfig cfg;
    ToySourceConfig toy;
    toy.input_dim = 2;
    toy.width = 8;
    toy.hidden_layers = 12;
    toy.classes = 4;
    toy.residual = true;
    toy.n_per_class = 500;
    cfg.source = toy;
    cfg.k = 4;
    cfg.budget = Budget::total(8);
    return cfg;
}

inline std::size_t finetune_epochs(const PipelineConfig& cfg) {
    if (cfg.finetune.epochs > 0) return cfg.finetune.epochs;
    if (const auto* toy = std::get_if<ToySourceConfig>(&cfg.source))
        return std::max<std::size_t>(1, toy->pretrain_epochs / 4);
    return 1;
}

// ---------------------------------------------------------------------------
// Config documents
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> known,
                           std::string_view where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            fail_usage("unknown key '" + it.key() + "' in " + std::string(where));
    }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace detail

/// Full config as JSON. `include_local` adds output_dir and jobs, which do
/// not influence results and are left out of the digest.
inline Json config_to_json(const PipelineConfig& cfg, bool include_local = true) {
    Json j;
    if (const auto* toy = std::get_if<ToySourceConfig>(&cfg.source)) {
        j["source"] = {{"toy",
                        {{"input_dim", toy->input_dim},
                         {"width", toy->width},
                         {"hidden_layers", toy->hidden_layers},
                         {"classes", toy->classes},
                         {"residual", toy->residual},
                         {"n_per_class", toy->n_per_class},
                         {"spread", toy->spread},
                         {"test_fraction", toy->test_fraction},
                         {"pretrain_epochs", toy->pretrain_epochs},
                         {"pretrain_lr", toy->pretrain_lr},
                         {"pretrain_batch_size", toy->pretrain_batch_size},
                         {"cka_samples", toy->cka_samples},
                         {"score_batch_size", toy->score_batch_size},
                         {"score_batches", toy->score_batches}}}};
    } else {
        const auto& files = std::get<FileSourceConfig>(cfg.source);
        j["source"] = {{"files", {{"activations", files.activations}, {"scores", files.scores}}}};
    }
    j["k"] = cfg.k;
    j["budget"] = to_string(cfg.budget);
    j["mode"] = to_string(cfg.mode);
    j["seeds"] = {{"build", cfg.seeds.build},
                  {"data", cfg.seeds.data},
                  {"score", cfg.seeds.score},
                  {"finetune", cfg.seeds.finetune}};
    j["finetune"] = {{"epochs", cfg.finetune.epochs},
                     {"lr", cfg.finetune.lr},
                     {"batch_size", cfg.finetune.batch_size}};
    if (include_local) {
        j["output_dir"] = cfg.output_dir;
        j["jobs"] = cfg.jobs;
    }
    return j;
}

inline PipelineConfig config_from_json(const Json& j) {
    try {
        detail::reject_unknown(j, {"source", "k", "budget", "mode", "seeds", "finetune", "output_dir", "jobs"},
                               "config");
        PipelineConfig cfg;
        const auto& src = j.at("source");
        if (src.contains("toy") == src.contains("files"))
            fail_usage("config source needs exactly one of 'toy' or 'files'");
        if (src.contains("toy")) {
            const auto& t = src["toy"];
            detail::reject_unknown(t, {"input_dim", "width", "hidden_layers", "classes", "residual",
                                       "n_per_class", "spread", "test_fraction", "pretrain_epochs",
                                       "pretrain_lr", "pretrain_batch_size", "cka_samples",
                                       "score_batch_size", "score_batches"},
                                   "source.toy");
            ToySourceConfig toy;
            detail::read_opt(t, "input_dim", toy.input_dim);
            detail::read_opt(t, "width", toy.width);
            detail::read_opt(t, "hidden_layers", toy.hidden_layers);
            detail::read_opt(t, "classes", toy.classes);
            detail::read_opt(t, "residual", toy.residual);
            detail::read_opt(t, "n_per_class", toy.n_per_class);
            detail::read_opt(t, "spread", toy.spread);
            detail::read_opt(t, "test_fraction", toy.test_fraction);
            detail::read_opt(t, "pretrain_epochs", toy.pretrain_epochs);
            detail::read_opt(t, "pretrain_lr", toy.pretrain_lr);
            detail::read_opt(t, "pretrain_batch_size", toy.pretrain_batch_size);
            detail::read_opt(t, "cka_samples", toy.cka_samples);
            detail::read_opt(t, "score_batch_size", toy.score_batch_size);
            detail::read_opt(t, "score_batches", toy.score_batches);
            cfg.source = toy;
        } else {
            const auto& f = src["files"];
            detail::reject_unknown(f, {"activations", "scores"}, "source.files");
            cfg.source = FileSourceConfig{f.at("activations").get<std::string>(),
                                          f.at("scores").get<std::string>()};
        }
        detail::read_opt(j, "k", cfg.k);
        if (j.contains("budget")) cfg.budget = parse_budget(j["budget"].get<std::string>());
        if (j.contains("mode")) cfg.mode = parse_scope(j["mode"].get<std::string>());
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            detail::reject_unknown(s, {"build", "data", "score", "finetune"}, "seeds");
            detail::read_opt(s, "build", cfg.seeds.build);
            detail::read_opt(s, "data", cfg.seeds.data);
            detail::read_opt(s, "score", cfg.seeds.score);
            detail::read_opt(s, "finetune", cfg.seeds.finetune);
        }
        if (j.contains("finetune")) {
            const auto& f = j["finetune"];
            detail::reject_unknown(f, {"epochs", "lr", "batch_size"}, "finetune");
            detail::read_opt(f, "epochs", cfg.finetune.epochs);
            detail::read_opt(f, "lr", cfg.finetune.lr);
            detail::read_opt(f, "batch_size", cfg.finetune.batch_size);
        }
        detail::read_opt(j, "output_dir", cfg.output_dir);
        detail::read_opt(j, "jobs", cfg.jobs);
        return cfg;
    } catch (const Json::exception& e) {
        fail_usage(std::string("malformed config: ") + e.what());
    }
}

inline std::string config_digest(const PipelineConfig& cfg) {
    return fnv1a_hex(config_to_json(cfg, false).dump());
}

inline void validate(const PipelineConfig& cfg) {
    if (cfg.k < 1) fail_usage("k must be >= 1");
    if (const auto* toy = std::get_if<ToySourceConfig>(&cfg.source)) {
        if (toy->hidden_layers < 2) fail_usage("toy network needs at least 2 hidden units");
        if (toy->n_per_class < 1 || toy->classes < 2) fail_usage("toy dataset is empty");
        if (!(toy->test_fraction > 0.0 && toy->test_fraction < 1.0))
            fail_usage("test_fraction must lie in (0, 1)");
        if (toy->cka_samples < 2) fail_usage("cka_samples must be >= 2");
        if (toy->score_batch_size < 1 || toy->score_batches < 1)
            fail_usage("score batches must be non-empty");
    } else {
        const auto& f = std::get<FileSourceConfig>(cfg.source);
        if (f.activations.empty() || f.scores.empty())
            fail_usage("file source needs both an activations file and a score table");
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct RunRecord {
    std::string label;
    std::string config_digest;
    std::size_t k = 0;
    std::string budget;
    std::string scorer;
    std::vector<std::size_t> kept;  // 0-based
    std::optional<double> pre_prune_accuracy;
    std::optional<double> post_prune_accuracy;
    std::optional<double> post_finetune_accuracy;
    std::optional<std::size_t> params_before;
    std::optional<std::size_t> params_after;
    std::uint64_t candidate_count = 0;
    double wall_seconds = 0.0;
};

struct ExperimentReport {
    std::string kind;
    Json config;
    std::vector<RunRecord> runs;
    Json summary = Json::object();
};

inline Json record_to_json(const RunRecord& r, const Seeds& seeds) {
    auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
    Json kept = Json::array();
    for (auto i : r.kept) kept.push_back(i + 1);
    return Json{{"label", r.label},
                {"config_digest", r.config_digest},
                {"seeds", {{"build", seeds.build}, {"data", seeds.data}, {"score", seeds.score},
                           {"finetune", seeds.finetune}}},
                {"k", r.k},
                {"budget", r.budget},
                {"scorer", r.scorer},
                {"kept", kept},
                {"kept_count", r.kept.size()},
                {"pre_prune_accuracy", opt(r.pre_prune_accuracy)},
                {"post_prune_accuracy", opt(r.post_prune_accuracy)},
                {"post_finetune_accuracy", opt(r.post_finetune_accuracy)},
                {"params_before", opt(r.params_before)},
                {"params_after", opt(r.params_after)},
                {"candidate_count", r.candidate_count},
                {"wall_seconds", r.wall_seconds}};
}

/// Appends the report to `path` as JSON lines: one line per run, then a
/// summary line.
inline void append_report(const ExperimentReport& report, const Seeds& seeds,
                          const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ostringstream text;
    for (const auto& r : report.runs) {
        Json line = record_to_json(r, seeds);
        line["report"] = report.kind;
        text << line.dump() << '\n';
    }
    Json tail{{"report", report.kind}, {"summary", report.summary}, {"config", report.config}};
    text << tail.dump() << '\n';
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) fail_data("cannot open report " + path.string());
    out << text.str();
    if (!out) fail_data("failed writing report " + path.string());
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

namespace detail {

template <typename F>
auto in_stage(std::string_view name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), "stage " + std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorKind::internal, "stage " + std::string(name) + ": " + e.what());
    }
}

inline std::string to_bytes_network(const Network& net) {
    std::ostringstream out;
    write_network(net, out);
    return out.str();
}

inline std::string to_bytes_activations(const ActivationSet& set) {
    std::ostringstream out;
    write_activations(set, out);
    return out.str();
}

inline std::string to_bytes_similarity(const Matrix& m) {
    std::ostringstream out;
    write_similarity(m, out);
    return out.str();
}

inline std::string to_bytes_dataset(const Dataset& d) {
    std::ostringstream out;
    write_dataset(d, out);
    return out.str();
}

}  // namespace detail

/// Pretrained toy model and its data split; shared by every run of a sweep.
struct PreparedToy {
    Dataset train;
    Dataset test;
    Network pretrained;
    double pretrained_accuracy = 0.0;
    std::vector<EpochStats> pretrain_trace;
};

inline PreparedToy prepare_toy(const ToySourceConfig& toy, const Seeds& seeds) {
    return detail::in_stage("pretrain", [&] {
        PreparedToy p;
        const Dataset all = make_blobs(toy.n_per_class, toy.classes, toy.input_dim, toy.spread, seeds.data);
        const auto test_count = static_cast<std::size_t>(
            std::llround(static_cast<double>(all.size()) * toy.test_fraction));
        if (test_count == 0 || test_count >= all.size()) fail_usage("test split is empty or total");
        p.train = slice(all, 0, all.size() - test_count);
        p.test = slice(all, all.size() - test_count, test_count);

        NetworkSpec spec;
        spec.input_dim = toy.input_dim;
        spec.width = toy.width;
        spec.hidden_layers = toy.hidden_layers;
        spec.classes = toy.classes;
        spec.residual = toy.residual;
        spec.seed = seeds.build;
        TrainOptions opt;
        opt.epochs = toy.pretrain_epochs;
        opt.learning_rate = toy.pretrain_lr;
        opt.batch_size = toy.pretrain_batch_size;
        opt.seed = derive_seed(seeds.build, 1);
        auto trained = train(build_network(spec), p.train, opt);
        p.pretrained = std::move(trained.network);
        p.pretrain_trace = std::move(trained.trace);
        p.pretrained_accuracy = accuracy(p.pretrained, p.test);
        return p;
    });
}

/// Rows of the training split that feed GradNorm scoring.
inline Dataset scoring_data(const ToySourceConfig& toy, const PreparedToy& prepared) {
    const std::size_t want = toy.score_batch_size * toy.score_batches;
    return slice(prepared.train, 0, std::min(want, prepared.train.size()));
}

/// Splits `data` into `batches` consecutive, near-equal batches.
inline std::vector<Dataset> split_batches(const Dataset& data, std::size_t batches) {
    if (batches < 1 || batches > data.size()) fail_usage("cannot split scoring data into that many batches");
    std::vector<Dataset> out;
    const std::size_t base = data.size() / batches;
    std::size_t extra = data.size() % batches;
    std::size_t at = 0;
    for (std::size_t b = 0; b < batches; ++b) {
        const std::size_t n = base + (b < extra ? 1 : 0);
        out.push_back(slice(data, at, n));
        at += n;
    }
    return out;
}

struct Analysis {
    ActivationSet activations;
    SimilarityMatrix similarity;
    Segmentation segmentation;
};

inline Analysis analyze(ActivationSet activations, std::size_t k) {
    Analysis a;
    a.similarity = detail::in_stage("cka", [&] { return similarity_matrix(activations); });
    a.segmentation = detail::in_stage("segment", [&] { return fisher_segment(row_sums(a.similarity.values), k); });
    a.activations = std::move(activations);
    return a;
}

struct RunOutcome {
    PruningPlan plan;
    RunRecord record;
    Json plan_document;  // plan plus provenance, exactly as persisted
    std::optional<Network> finetuned;
};

namespace detail {

inline Json plan_document(const PruningPlan& plan, const PipelineConfig& cfg) {
    Json doc = plan_to_json(plan);
    doc["provenance"] = {{"config_digest", config_digest(cfg)},
                         {"seeds", config_to_json(cfg, false)["seeds"]},
                         {"config", config_to_json(cfg, false)}};
    return doc;
}

inline std::filesystem::path out_path(const PipelineConfig& cfg, const std::string& sub,
                                      const std::string& file) {
    std::filesystem::path p(cfg.output_dir);
    if (!sub.empty()) p /= sub;
    return p / file;
}

}  // namespace detail

/// Prunes the pretrained toy model with `plan`, fine-tunes and evaluates it.
inline RunOutcome finish_toy_run(const PipelineConfig& cfg, const PreparedToy& prepared, PruningPlan plan,
                                 std::uint64_t candidates, const std::string& label,
                                 std::chrono::steady_clock::time_point started) {
    RunOutcome out;
    out.record.label = label;
    out.record.config_digest = config_digest(cfg);
    out.record.k = plan.segmentation.k();
    out.record.budget = to_string(plan.budget);
    out.record.scorer = plan.scorer;
    out.record.kept = plan.kept;
    out.record.candidate_count = candidates;
    out.record.pre_prune_accuracy = prepared.pretrained_accuracy;
    out.record.params_before = prepared.pretrained.params.count();

    Network pruned = detail::in_stage("prune", [&] { return prune(prepared.pretrained, plan.kept); });
    if (pruned.params.count() != parameter_count(pruned.spec))
        fail_internal("pruned network parameter count disagrees with its spec");
    out.record.params_after = pruned.params.count();
    out.record.post_prune_accuracy = accuracy(pruned, prepared.test);

    TrainOptions ft;
    ft.epochs = finetune_epochs(cfg);
    ft.learning_rate = cfg.finetune.lr;
    ft.batch_size = cfg.finetune.batch_size;
    ft.seed = cfg.seeds.finetune;
    auto tuned = detail::in_stage("finetune", [&] { return train(pruned, prepared.train, ft); });
    out.record.post_finetune_accuracy = accuracy(tuned.network, prepared.test);
    out.finetuned = std::move(tuned.network);
    out.plan_document = detail::plan_document(plan, cfg);
    out.plan = std::move(plan);
    out.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

/// One full run on an already pretrained toy model. Artifacts go to
/// output_dir/<sub> when output_dir is set.
inline RunOutcome run_toy(const PipelineConfig& cfg, const PreparedToy& prepared, const std::string& label = "sglp",
                          const std::string& sub = "") {
    validate(cfg);
    const auto started = std::chrono::steady_clock::now();
    const auto& toy = std::get<ToySourceConfig>(cfg.source);

    const std::size_t cka_n = std::min(toy.cka_samples, prepared.train.size());
    const Dataset cka_batch = slice(prepared.train, 0, cka_n);
    auto captured = detail::in_stage("activations", [&] {
        return std::move(*forward(prepared.pretrained, cka_batch.features, true).activations);
    });
    Analysis analysis = analyze(std::move(captured), cfg.k);

    const Dataset score_data = scoring_data(toy, prepared);
    PlanOptions popt;
    popt.budget = cfg.budget;
    popt.mode = cfg.mode;
    popt.seed = cfg.seeds.score;
    popt.jobs = cfg.jobs;
    popt.layer_names = analysis.activations.names();
    PruningPlan plan = detail::in_stage("plan", [&] {
        ToyScorer scorer(prepared.pretrained, split_batches(score_data, toy.score_batches),
                         analysis.segmentation, cfg.mode, cfg.seeds.score);
        return sglp::plan(scorer, analysis.segmentation, popt);
    });
    const auto candidates = candidate_count(analysis.segmentation, cfg.budget);
    RunOutcome out = finish_toy_run(cfg, prepared, std::move(plan), candidates, label, started);

    if (!cfg.output_dir.empty()) {
        detail::in_stage("persist", [&] {
            write_file_atomic(detail::out_path(cfg, sub, "pretrained.bin"),
                              detail::to_bytes_network(prepared.pretrained));
            write_file_atomic(detail::out_path(cfg, sub, "activations.actv"),
                              detail::to_bytes_activations(analysis.activations));
            write_file_atomic(detail::out_path(cfg, sub, "similarity.csv"),
                              detail::to_bytes_similarity(analysis.similarity.values));
            write_file_atomic(detail::out_path(cfg, sub, "segmentation.json"),
                              dump(segmentation_to_json(analysis.segmentation, analysis.activations.names())));
            write_file_atomic(detail::out_path(cfg, sub, "score_data.csv"), detail::to_bytes_dataset(score_data));
            write_file_atomic(detail::out_path(cfg, sub, "plan.json"), dump(out.plan_document));
            write_file_atomic(detail::out_path(cfg, sub, "finetuned.bin"), detail::to_bytes_network(*out.finetuned));
            return 0;
        });
    }
    return out;
}

/// Plans from an activation dump and an external score table. No network is
/// available, so the record carries no accuracies.
inline RunOutcome run_files(const PipelineConfig& cfg) {
    validate(cfg);
    const auto started = std::chrono::steady_clock::now();
    const auto& files = std::get<FileSourceConfig>(cfg.source);
    ActivationSet acts = detail::in_stage("load", [&] {
        std::ifstream in(files.activations, std::ios::binary);
        if (!in) fail_data("cannot open " + files.activations);
        return read_activations(in);
    });
    ScoreTable table = detail::in_stage("load", [&] {
        std::ifstream in(files.scores);
        if (!in) fail_data("cannot open " + files.scores);
        return read_score_table(in);
    });
    detail::in_stage("load", [&] {
        const auto implied = implied_layer_count(table);
        if (implied != acts.layer_count())
            fail_data("activations have " + std::to_string(acts.layer_count()) +
                      " layers but the score table implies " + std::to_string(implied));
        return 0;
    });
    Analysis analysis = analyze(std::move(acts), cfg.k);
    PlanOptions popt;
    popt.budget = cfg.budget;
    popt.mode = cfg.mode;
    popt.seed = cfg.seeds.score;
    popt.jobs = cfg.jobs;
    popt.layer_names = analysis.activations.names();
    PruningPlan plan = detail::in_stage("plan", [&] {
        TableScorer scorer(std::move(table));
        return sglp::plan(scorer, analysis.segmentation, popt);
    });

    RunOutcome out;
    out.record.label = "sglp";
    out.record.config_digest = config_digest(cfg);
    out.record.k = cfg.k;
    out.record.budget = to_string(cfg.budget);
    out.record.scorer = plan.scorer;
    out.record.kept = plan.kept;
    out.record.candidate_count = candidate_count(analysis.segmentation, cfg.budget);
    out.plan_document = detail::plan_document(plan, cfg);
    out.plan = std::move(plan);
    out.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!cfg.output_dir.empty()) {
        detail::in_stage("persist", [&] {
            write_file_atomic(detail::out_path(cfg, "", "similarity.csv"),
                              detail::to_bytes_similarity(analysis.similarity.values));
            write_file_atomic(detail::out_path(cfg, "", "segmentation.json"),
                              dump(segmentation_to_json(analysis.segmentation, analysis.activations.names())));
            write_file_atomic(detail::out_path(cfg, "", "plan.json"), dump(out.plan_document));
            return 0;
        });
    }
    return out;
}

inline RunOutcome run(const PipelineConfig& cfg) {
    validate(cfg);
    RunOutcome out;
    if (const auto* toy = std::get_if<ToySourceConfig>(&cfg.source)) {
        const PreparedToy prepared = prepare_toy(*toy, cfg.seeds);
        out = run_toy(cfg, prepared);
    } else {
        out = run_files(cfg);
    }
    if (!cfg.output_dir.empty()) {
        ExperimentReport report{"run", config_to_json(cfg, false), {out.record}, {}};
        append_report(report, cfg.seeds, detail::out_path(cfg, "", "report.jsonl"));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace detail {

inline const ToySourceConfig& require_toy(const PipelineConfig& cfg, std::string_view what) {
    const auto* toy = std::get_if<ToySourceConfig>(&cfg.source);
    if (!toy) fail_usage(std::string(what) + " needs a toy source");
    return *toy;
}

inline double finetuned(const RunRecord& r) { return r.post_finetune_accuracy.value_or(0.0); }

}  // namespace detail

/// Same retained-layer total, different segment counts.
inline ExperimentReport k_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& k_values,
                                std::size_t total_kept) {
    validate(cfg);
    const auto& toy = detail::require_toy(cfg, "k sweep");
    if (k_values.empty()) fail_usage("k sweep needs at least one k");
    for (auto k : k_values)
        if (k < 1 || k > total_kept || total_kept > toy.hidden_layers)
            fail_usage("k=" + std::to_string(k) + " is infeasible for " + std::to_string(total_kept) +
                       " kept layers out of " + std::to_string(toy.hidden_layers));
    const PreparedToy prepared = prepare_toy(toy, cfg.seeds);
    ExperimentReport report{"k_sweep", config_to_json(cfg, false), {}, {}};
    double lo = 1.0, hi = 0.0;
    for (auto k : k_values) {
        PipelineConfig c = cfg;
        c.k = k;
        c.budget = Budget::total(total_kept);
        auto out = run_toy(c, prepared, "k=" + std::to_string(k), cfg.output_dir.empty() ? "" : "k" + std::to_string(k));
        lo = std::min(lo, detail::finetuned(out.record));
        hi = std::max(hi, detail::finetuned(out.record));
        report.runs.push_back(std::move(out.record));
    }
    report.summary = {{"total_kept", total_kept},
                      {"unpruned_accuracy", prepared.pretrained_accuracy},
                      {"min_accuracy", lo},
                      {"max_accuracy", hi},
                      {"spread", hi - lo}};
    if (!cfg.output_dir.empty())
        append_report(report, cfg.seeds, detail::out_path(cfg, "", "report.jsonl"));
    return report;
}

/// Smallest total t* such that accuracies are non-decreasing over totals up
/// to t* and accuracy(t*) is within `tolerance` of `unpruned`. Totals must be
/// ascending.
inline std::optional<std::size_t> saturation_total(const std::vector<std::size_t>& totals,
                                                   const std::vector<double>& accuracies, double unpruned,
                                                   double tolerance) {
    for (std::size_t i = 0; i < totals.size(); ++i) {
        if (i > 0 && accuracies[i] < accuracies[i - 1]) return std::nullopt;
        if (unpruned - accuracies[i] <= tolerance) return totals[i];
    }
    return std::nullopt;
}

/// One run per retained-layer total at the configured k.
inline ExperimentReport depth_sweep(const PipelineConfig& cfg, std::vector<std::size_t> totals) {
    validate(cfg);
    const auto& toy = detail::require_toy(cfg, "depth sweep");
    if (totals.empty()) fail_usage("depth sweep needs at least one total");
    std::sort(totals.begin(), totals.end());
    for (auto t : totals)
        if (t < cfg.k || t > toy.hidden_layers)
            fail_usage("kept total " + std::to_string(t) + " outside [k, L] = [" + std::to_string(cfg.k) +
                       ", " + std::to_string(toy.hidden_layers) + "]");
    const PreparedToy prepared = prepare_toy(toy, cfg.seeds);
    ExperimentReport report{"depth_sweep", config_to_json(cfg, false), {}, {}};
    std::vector<double> accs;
    for (auto t : totals) {
        PipelineConfig c = cfg;
        c.budget = Budget::total(t);
        auto out = run_toy(c, prepared, "total=" + std::to_string(t),
                           cfg.output_dir.empty() ? "" : "total" + std::to_string(t));
        accs.push_back(detail::finetuned(out.record));
        report.runs.push_back(std::move(out.record));
    }
    const auto knee = saturation_total(totals, accs, prepared.pretrained_accuracy, 0.02);
    report.summary = {{"unpruned_accuracy", prepared.pretrained_accuracy},
                      {"saturation_total", knee ? Json(*knee) : Json(nullptr)}};
    if (!cfg.output_dir.empty())
        append_report(report, cfg.seeds, detail::out_path(cfg, "", "report.jsonl"));
    return report;
}

/// The planned pruning against `trials` random plans with the same budget and
/// identical fine-tuning. The first row is the planned run.
inline ExperimentReport baseline_compare(const PipelineConfig& cfg, std::size_t trials) {
    validate(cfg);
    const auto& toy = detail::require_toy(cfg, "baseline comparison");
    if (trials < 1) fail_usage("baseline comparison needs at least one trial");
    const PreparedToy prepared = prepare_toy(toy, cfg.seeds);
    ExperimentReport report{"baseline", config_to_json(cfg, false), {}, {}};

    auto planned = run_toy(cfg, prepared, "sglp", cfg.output_dir.empty() ? "" : "sglp");
    const Segmentation seg = planned.plan.segmentation;
    const auto names = planned.plan.layer_names;
    const double planned_acc = detail::finetuned(planned.record);
    report.runs.push_back(std::move(planned.record));

    double sum = 0.0, lo = 1.0, hi = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto started = std::chrono::steady_clock::now();
        const std::uint64_t seed = derive_seed(cfg.seeds.score, 0x7261ULL + t);
        PruningPlan rp = detail::in_stage("plan", [&] { return random_plan(seg, cfg.budget, seed, names); });
        auto out = finish_toy_run(cfg, prepared, std::move(rp), 0, "random#" + std::to_string(t + 1), started);
        const double acc = detail::finetuned(out.record);
        sum += acc;
        lo = std::min(lo, acc);
        hi = std::max(hi, acc);
        report.runs.push_back(std::move(out.record));
    }
    report.summary = {{"unpruned_accuracy", prepared.pretrained_accuracy},
                      {"sglp_accuracy", planned_acc},
                      {"random_mean", sum / static_cast<double>(trials)},
                      {"random_min", lo},
                      {"random_max", hi}};
    if (!cfg.output_dir.empty())
        append_report(report, cfg.seeds, detail::out_path(cfg, "", "report.jsonl"));
    return report;
}

}  // namespace sglp
