// SPDX-License-Identifier: Apache-2.0
//
// sglp: command-line front end for the layer pruning planner.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sglp/sglp.hpp"

namespace {

using sglp::Json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::uint64_t draw_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

/// Resolves an optional seed, announcing a drawn one so the run stays
/// reproducible.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, const char* what) {
    if (seed) return *seed;
    const auto s = draw_seed();
    std::cout << "drawn " << what << " seed: " << s << "\n";
    return s;
}

void print_config(const std::string& command, const Json& j) {
    std::cout << "config " << command << ": " << j.dump() << "\n";
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) sglp::fail_data("cannot open " + path);
    return in;
}

sglp::ActivationSet load_activations(const std::string& path) {
    auto in = open_in(path, true);
    return sglp::read_activations(in);
}

sglp::Network load_network(const std::string& path) {
    auto in = open_in(path, true);
    return sglp::read_network(in);
}

sglp::Dataset load_dataset(const std::string& path) {
    auto in = open_in(path);
    return sglp::read_dataset(in);
}

template <typename Writer, typename Value>
std::string encode(Writer&& writer, const Value& v) {
    std::ostringstream out;
    writer(v, out);
    return out.str();
}

sglp::PipelineConfig load_config(const std::string& path, bool reference) {
    if (reference) return sglp::reference_config();
    Json j = sglp::read_json_file(path);
    // Artifacts embed the config that produced them; accept those directly.
    if (j.contains("provenance")) j = j["provenance"]["config"];
    else if (j.contains("config") && !j.contains("source")) j = j["config"];
    return sglp::config_from_json(j);
}

const CLI::Validator kPositive(
    [](std::string& text) -> std::string {
        std::size_t pos = 0;
        try {
            if (!text.empty() && text[0] != '-' && std::stoull(text, &pos) > 0 && pos == text.size()) return {};
        } catch (const std::exception&) {
        }
        return "must be a positive integer, got '" + text + "'";
    },
    "POSITIVE");

std::vector<std::size_t> parse_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(item, &pos);
            if (pos != item.size() || v < 0) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            sglp::fail_usage("invalid list entry '" + item + "'");
        }
    }
    if (out.empty()) sglp::fail_usage("empty list");
    return out;
}

void print_report(const sglp::ExperimentReport& report) {
    for (const auto& r : report.runs) {
        std::cout << r.label << ": kept " << r.kept.size() << " layers, params "
                  << (r.params_after ? std::to_string(*r.params_after) : "-") << ", accuracy "
                  << (r.post_finetune_accuracy ? sglp::detail::format_double(*r.post_finetune_accuracy) : "-")
                  << "\n";
    }
    std::cout << "summary: " << report.summary.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sglp - similarity-guided layer partition pruning planner"};
    app.require_subcommand(1);
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--jobs", jobs, "Scoring threads")->envname("SGLP_JOBS")->check(kPositive);

    // cka
    auto* cka = app.add_subcommand("cka", "Pairwise CKA similarity matrix from an ACTV1 dump");
    std::string cka_in, cka_out;
    std::size_t cka_channels = 0;
    cka->add_option("--activations", cka_in, "ACTV1 activation file")->required();
    cka->add_option("--out", cka_out, "Similarity CSV to write")->required();
    cka->add_option("--channels", cka_channels,
                    "Mean-pool channel-major features down to this many channels");

    // segment
    auto* segment = app.add_subcommand("segment", "Fisher optimal segmentation of a similarity matrix");
    std::string seg_matrix, seg_out, seg_names;
    std::size_t seg_k = 5;
    bool seg_oracle = false;
    segment->add_option("--matrix", seg_matrix, "Similarity CSV")->required();
    segment->add_option("--k", seg_k, "Segment count")->check(kPositive);
    segment->add_option("--out", seg_out, "Segmentation JSON to write")->required();
    segment->add_flag("--oracle", seg_oracle, "Cross-check against brute-force enumeration");
    segment->add_option("--names-from", seg_names, "ACTV1 file supplying layer names");

    // plan
    auto* plan = app.add_subcommand("plan", "Segment-wise subset selection");
    std::string plan_seg, plan_net, plan_data, plan_scores, plan_out, plan_budget = "free",
                                                                      plan_mode = "literal";
    std::optional<std::uint64_t> plan_seed;
    std::size_t plan_batches = 1;
    plan->add_option("--seg", plan_seg, "Segmentation JSON")->required();
    auto* net_opt = plan->add_option("--net", plan_net, "SGLPNET1 pretrained network");
    auto* data_opt = plan->add_option("--data", plan_data, "Scoring data CSV (with --net)");
    auto* scores_opt = plan->add_option("--scores", plan_scores, "External score table");
    net_opt->needs(data_opt);
    data_opt->needs(net_opt);
    scores_opt->excludes(net_opt)->excludes(data_opt);
    plan->add_option("--budget", plan_budget, "free | each:N | total:N | list:a,b,...");
    plan->add_option("--mode", plan_mode, "Hybrid-init scope")->check(CLI::IsMember({"literal", "local"}));
    plan->add_option("--seed", plan_seed, "Scoring seed (drawn when omitted)");
    plan->add_option("--score-batches", plan_batches, "Split scoring data into this many batches")
        ->check(kPositive);
    plan->add_option("--out", plan_out, "Plan JSON to write")->required();

    // toy
    auto* toy = app.add_subcommand("toy", "Built-in toy network utilities");
    toy->require_subcommand(1);

    auto* toy_data = toy->add_subcommand("data", "Generate a Gaussian blob dataset");
    std::string data_out;
    std::size_t data_npc = 500, data_classes = 4, data_dim = 2;
    double data_spread = 1.0;
    std::optional<std::uint64_t> data_seed;
    toy_data->add_option("--out", data_out, "Dataset CSV to write")->required();
    toy_data->add_option("--n-per-class", data_npc)->check(kPositive);
    toy_data->add_option("--classes", data_classes)->check(CLI::Range(2, 1 << 16));
    toy_data->add_option("--dim", data_dim)->check(kPositive);
    toy_data->add_option("--spread", data_spread)->check(CLI::NonNegativeNumber);
    toy_data->add_option("--seed", data_seed);

    auto* toy_pretrain = toy->add_subcommand("pretrain", "Build and train a toy network");
    std::string pre_data, pre_out;
    std::size_t pre_width = 8, pre_layers = 12, pre_epochs = 40, pre_batch = 32;
    double pre_lr = 0.02;
    bool pre_plain = false;
    std::optional<std::uint64_t> pre_seed;
    toy_pretrain->add_option("--data", pre_data, "Training data CSV")->required();
    toy_pretrain->add_option("--out", pre_out, "SGLPNET1 file to write")->required();
    toy_pretrain->add_option("--width", pre_width)->check(kPositive);
    toy_pretrain->add_option("--layers", pre_layers)->check(CLI::Range(2, 4096));
    toy_pretrain->add_option("--epochs", pre_epochs);
    toy_pretrain->add_option("--lr", pre_lr)->check(CLI::NonNegativeNumber);
    toy_pretrain->add_option("--batch-size", pre_batch)->check(kPositive);
    toy_pretrain->add_flag("--plain", pre_plain, "Hidden units without skip connections");
    toy_pretrain->add_option("--seed", pre_seed);

    auto* toy_train = toy->add_subcommand("train", "Continue training (fine-tune) a network");
    std::string tr_net, tr_data, tr_out;
    std::size_t tr_epochs = 10, tr_batch = 32;
    double tr_lr = 0.02;
    std::optional<std::uint64_t> tr_seed;
    toy_train->add_option("--net", tr_net)->required();
    toy_train->add_option("--data", tr_data)->required();
    toy_train->add_option("--out", tr_out)->required();
    toy_train->add_option("--epochs", tr_epochs);
    toy_train->add_option("--lr", tr_lr)->check(CLI::NonNegativeNumber);
    toy_train->add_option("--batch-size", tr_batch)->check(kPositive);
    toy_train->add_option("--seed", tr_seed);

    auto* toy_prune = toy->add_subcommand("prune", "Remove the layers a plan drops");
    std::string pr_net, pr_plan, pr_out;
    toy_prune->add_option("--net", pr_net)->required();
    toy_prune->add_option("--plan", pr_plan)->required();
    toy_prune->add_option("--out", pr_out)->required();

    auto* toy_eval = toy->add_subcommand("eval", "Accuracy and loss of a network on a dataset");
    std::string ev_net, ev_data;
    toy_eval->add_option("--net", ev_net)->required();
    toy_eval->add_option("--data", ev_data)->required();

    auto* toy_capture = toy->add_subcommand("capture", "Dump hidden-unit activations as ACTV1");
    std::string cap_net, cap_data, cap_out;
    std::size_t cap_samples = 512;
    toy_capture->add_option("--net", cap_net)->required();
    toy_capture->add_option("--data", cap_data)->required();
    toy_capture->add_option("--out", cap_out)->required();
    toy_capture->add_option("--samples", cap_samples, "Use the first N rows")->check(CLI::Range(2, 1 << 30));

    // run
    auto* run = app.add_subcommand("run", "End-to-end pipeline from a config file");
    std::string run_config, run_out;
    bool run_reference = false;
    auto* run_cfg_opt = run->add_option("--config", run_config, "Config JSON (or an artifact embedding one)");
    auto* run_ref_opt = run->add_flag("--reference", run_reference, "Use the built-in reference task");
    run_cfg_opt->excludes(run_ref_opt);
    run->add_option("--out", run_out, "Output directory (overrides the config)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Repeated runs on one pretrained model");
    sweep->require_subcommand(1);
    std::string sw_config, sw_out, sw_values = "2,3,4,5", sw_totals = "4,6,8,10,12";
    bool sw_reference = false;
    std::size_t sw_total = 8, sw_trials = 10;
    auto add_common = [&](CLI::App* sub) {
        auto* c = sub->add_option("--config", sw_config, "Config JSON");
        auto* r = sub->add_flag("--reference", sw_reference, "Use the built-in reference task");
        c->excludes(r);
        sub->add_option("--out", sw_out, "Output directory (overrides the config)");
    };
    auto* sweep_k = sweep->add_subcommand("k", "Vary k at a fixed kept total");
    add_common(sweep_k);
    sweep_k->add_option("--values", sw_values, "Comma-separated k values");
    sweep_k->add_option("--total", sw_total, "Layers kept in every run")->check(kPositive);
    auto* sweep_depth = sweep->add_subcommand("depth", "Vary the kept total at fixed k");
    add_common(sweep_depth);
    sweep_depth->add_option("--totals", sw_totals, "Comma-separated kept totals");
    auto* sweep_base = sweep->add_subcommand("baseline", "Compare against random plans");
    add_common(sweep_base);
    sweep_base->add_option("--trials", sw_trials, "Random plans")->check(kPositive);

    auto* selfcheck = app.add_subcommand("selfcheck", "Run the embedded oracle suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cka->parsed()) {
            print_config("cka", {{"activations", cka_in}, {"out", cka_out}, {"channels", cka_channels}});
            auto set = load_activations(cka_in);
            if (cka_channels > 0)
                for (auto& layer : set.layers) layer.matrix = sglp::channel_mean_pool(layer.matrix, cka_channels);
            const auto sim = sglp::similarity_matrix(set);
            for (auto d : sim.degenerate_layers)
                std::cerr << "warning: layer '" << sim.layer_names[d]
                          << "' has constant activations; its similarities are pinned to 0\n";
            sglp::write_file_atomic(cka_out, encode(sglp::write_similarity, sim.values));
            std::cout << "wrote " << sim.size() << "x" << sim.size() << " similarity matrix to " << cka_out << "\n";
        } else if (segment->parsed()) {
            print_config("segment", {{"matrix", seg_matrix}, {"k", seg_k}, {"out", seg_out}, {"oracle", seg_oracle}});
            auto in = open_in(seg_matrix);
            const auto m = sglp::read_similarity(in);
            std::vector<std::string> names;
            if (!seg_names.empty()) {
                names = load_activations(seg_names).names();
                if (names.size() != m.rows())
                    sglp::fail_data("--names-from has " + std::to_string(names.size()) + " layers, matrix has " +
                                    std::to_string(m.rows()));
            } else {
                for (std::size_t i = 0; i < m.rows(); ++i) names.push_back("layer" + std::to_string(i + 1));
            }
            const auto sums = sglp::row_sums(m);
            if (seg_k > m.rows())
                sglp::fail_data("k=" + std::to_string(seg_k) + " exceeds the " + std::to_string(m.rows()) + " layers");
            const auto seg = sglp::fisher_segment(sums, seg_k);
            if (seg_oracle) {
                const auto bf = sglp::brute_force_segment(sums, seg_k);
                if (bf.best.loss != seg.loss || bf.best.starts != seg.starts)
                    sglp::fail_internal("dynamic program disagrees with brute-force enumeration");
                std::cout << "oracle: brute force agrees over " << bf.enumerated << " segmentations\n";
            }
            sglp::write_file_atomic(seg_out, sglp::dump(sglp::segmentation_to_json(seg, names)));
            std::cout << "wrote segmentation (k=" << seg.k() << ", loss " << sglp::detail::format_double(seg.loss)
                      << ") to " << seg_out << "\n";
        } else if (plan->parsed()) {
            if (plan_net.empty() && plan_scores.empty())
                throw CLI::RequiredError("--net/--data or --scores");
            const auto seed = resolve_seed(plan_seed, "scoring");
            print_config("plan", {{"seg", plan_seg}, {"net", plan_net}, {"data", plan_data},
                                  {"scores", plan_scores}, {"budget", plan_budget}, {"mode", plan_mode},
                                  {"seed", seed}, {"score_batches", plan_batches}, {"jobs", jobs},
                                  {"out", plan_out}});
            const auto named = sglp::segmentation_from_json(sglp::read_json_file(plan_seg));
            sglp::PlanOptions opt;
            opt.budget = sglp::parse_budget(plan_budget);
            opt.mode = sglp::parse_scope(plan_mode);
            opt.seed = seed;
            opt.jobs = jobs;
            opt.layer_names = named.layer_names;
            sglp::PruningPlan result;
            if (!plan_scores.empty()) {
                auto in = open_in(plan_scores);
                sglp::TableScorer scorer(sglp::read_score_table(in));
                result = sglp::plan(scorer, named.segmentation, opt);
            } else {
                const auto net = load_network(plan_net);
                const auto data = load_dataset(plan_data);
                sglp::ToyScorer scorer(net, sglp::split_batches(data, plan_batches), named.segmentation,
                                       opt.mode, seed);
                result = sglp::plan(scorer, named.segmentation, opt);
            }
            Json doc = sglp::plan_to_json(result);
            doc["provenance"] = {{"command", "plan"}, {"seed", seed}};
            sglp::write_file_atomic(plan_out, sglp::dump(doc));
            std::cout << "kept " << result.kept.size() << " of " << result.segmentation.layer_count
                      << " layers; plan written to " << plan_out << "\n";
        } else if (toy_data->parsed()) {
            const auto seed = resolve_seed(data_seed, "data");
            print_config("toy data", {{"n_per_class", data_npc}, {"classes", data_classes}, {"dim", data_dim},
                                      {"spread", data_spread}, {"seed", seed}, {"out", data_out}});
            const auto d = sglp::make_blobs(data_npc, data_classes, data_dim, data_spread, seed);
            sglp::write_file_atomic(data_out, encode(sglp::write_dataset, d));
            std::cout << "wrote " << d.size() << " rows to " << data_out << "\n";
        } else if (toy_pretrain->parsed()) {
            const auto seed = resolve_seed(pre_seed, "build");
            print_config("toy pretrain", {{"data", pre_data}, {"width", pre_width}, {"layers", pre_layers},
                                          {"residual", !pre_plain}, {"epochs", pre_epochs}, {"lr", pre_lr},
                                          {"batch_size", pre_batch}, {"seed", seed}, {"out", pre_out}});
            const auto data = load_dataset(pre_data);
            sglp::NetworkSpec spec{data.features.cols(), pre_width, pre_layers, data.classes, !pre_plain, seed};
            sglp::TrainOptions opt{pre_epochs, pre_lr, pre_batch, sglp::derive_seed(seed, 1)};
            const auto trained = sglp::train(sglp::build_network(spec), data, opt);
            sglp::write_file_atomic(pre_out, encode(sglp::write_network, trained.network));
            for (std::size_t e = 0; e < trained.trace.size(); ++e)
                std::cout << "epoch " << e + 1 << " loss " << sglp::detail::format_double(trained.trace[e].loss)
                          << " accuracy " << trained.trace[e].accuracy << "\n";
        } else if (toy_train->parsed()) {
            const auto seed = resolve_seed(tr_seed, "training");
            print_config("toy train", {{"net", tr_net}, {"data", tr_data}, {"epochs", tr_epochs}, {"lr", tr_lr},
                                       {"batch_size", tr_batch}, {"seed", seed}, {"out", tr_out}});
            const auto trained = sglp::train(load_network(tr_net), load_dataset(tr_data),
                                             sglp::TrainOptions{tr_epochs, tr_lr, tr_batch, seed});
            sglp::write_file_atomic(tr_out, encode(sglp::write_network, trained.network));
            if (!trained.trace.empty())
                std::cout << "final loss " << sglp::detail::format_double(trained.trace.back().loss)
                          << " accuracy " << trained.trace.back().accuracy << "\n";
        } else if (toy_prune->parsed()) {
            print_config("toy prune", {{"net", pr_net}, {"plan", pr_plan}, {"out", pr_out}});
            const auto net = load_network(pr_net);
            const auto p = sglp::plan_from_json(sglp::read_json_file(pr_plan));
            if (p.segmentation.layer_count != net.spec.hidden_layers)
                sglp::fail_data("plan covers " + std::to_string(p.segmentation.layer_count) +
                                " layers but the network has " + std::to_string(net.spec.hidden_layers));
            const auto pruned = sglp::prune(net, p.kept);
            sglp::write_file_atomic(pr_out, encode(sglp::write_network, pruned));
            std::cout << "pruned " << net.spec.hidden_layers << " -> " << pruned.spec.hidden_layers
                      << " hidden units, parameters " << net.params.count() << " -> " << pruned.params.count()
                      << "\n";
        } else if (toy_eval->parsed()) {
            print_config("toy eval", {{"net", ev_net}, {"data", ev_data}});
            const auto net = load_network(ev_net);
            const auto data = load_dataset(ev_data);
            const double acc = sglp::accuracy(net, data);
            const double l = sglp::loss(sglp::forward(net, data.features).logits, data.labels);
            std::cout << "accuracy " << acc << "\nloss "
                      << sglp::detail::format_double(l) << "\nparameters " << net.params.count() << "\n";
        } else if (toy_capture->parsed()) {
            print_config("toy capture", {{"net", cap_net}, {"data", cap_data}, {"samples", cap_samples},
                                         {"out", cap_out}});
            const auto net = load_network(cap_net);
            const auto data = load_dataset(cap_data);
            const auto rows = sglp::slice(data, 0, std::min(cap_samples, data.size()));
            const auto acts = sglp::forward(net, rows.features, true).activations;
            sglp::write_file_atomic(cap_out, encode(sglp::write_activations, *acts));
            std::cout << "captured " << acts->layer_count() << " layers x " << rows.size() << " samples\n";
        } else if (run->parsed()) {
            if (run_config.empty() && !run_reference) throw CLI::RequiredError("--config or --reference");
            auto cfg = load_config(run_config, run_reference);
            if (!run_out.empty()) cfg.output_dir = run_out;
            if (cfg.output_dir.empty()) sglp::fail_usage("no output directory (set output_dir or --out)");
            cfg.jobs = jobs;
            print_config("run", sglp::config_to_json(cfg));
            const auto out = sglp::run(cfg);
            std::cout << "kept " << out.plan.kept.size() << " of " << out.plan.segmentation.layer_count
                      << " layers\n";
            if (out.record.post_finetune_accuracy)
                std::cout << "accuracy: pretrained " << *out.record.pre_prune_accuracy << ", pruned "
                          << *out.record.post_prune_accuracy << ", fine-tuned " << *out.record.post_finetune_accuracy
                          << "\n";
            std::cout << "artifacts in " << cfg.output_dir << "\n";
        } else if (sweep->parsed()) {
            if (sw_config.empty() && !sw_reference) throw CLI::RequiredError("--config or --reference");
            auto cfg = load_config(sw_config, sw_reference);
            if (!sw_out.empty()) cfg.output_dir = sw_out;
            cfg.jobs = jobs;
            sglp::ExperimentReport report;
            if (sweep_k->parsed()) {
                print_config("sweep k", {{"config", sglp::config_to_json(cfg)}, {"values", sw_values}, {"total", sw_total}});
                report = sglp::k_sweep(cfg, parse_list(sw_values), sw_total);
            } else if (sweep_depth->parsed()) {
                print_config("sweep depth", {{"config", sglp::config_to_json(cfg)}, {"totals", sw_totals}});
                report = sglp::depth_sweep(cfg, parse_list(sw_totals));
            } else {
                print_config("sweep baseline", {{"config", sglp::config_to_json(cfg)}, {"trials", sw_trials}});
                report = sglp::baseline_compare(cfg, sw_trials);
            }
            print_report(report);
        } else if (selfcheck->parsed()) {
            print_config("selfcheck", Json::object());
            bool ok = true;
            for (const auto& r : sglp::run_selfcheck()) {
                std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
                ok = ok && r.passed;
            }
            return ok ? kExitOk : kExitInternal;
        }
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sglp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case sglp::ErrorKind::usage: return kExitUsage;
            case sglp::ErrorKind::data: return kExitData;
            case sglp::ErrorKind::internal: return kExitInternal;
        }
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}
