// SPDX-License-Identifier: Apache-2.0
//
// Segment-wise subset selection. Within each segment every admissible keep
// mask is scored and the highest-scoring one is kept; segments are decided
// independently.
#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sglp/activation_io.hpp"
#include "sglp/error.hpp"
#include "sglp/fisher.hpp"
#include "sglp/rng.hpp"
#include "sglp/toynet.hpp"

namespace sglp {

inline constexpr std::size_t kMaxSegmentSize = 20;

/// How many layers each segment keeps.
///   free      any non-empty subset
///   each:N    exactly N per segment
///   total:N   N overall, apportioned to segments by size (largest remainder)
///   list:a,b  explicit per-segment counts
struct Budget {
    enum class Kind { free, each, total, list };
    Kind kind = Kind::free;
    std::size_t count = 0;
    std::vector<std::size_t> counts;

    static Budget free_choice() { return {}; }
    static Budget each(std::size_t n) { return {Kind::each, n, {}}; }
    static Budget total(std::size_t n) { return {Kind::total, n, {}}; }
    static Budget list(std::vector<std::size_t> c) { return {Kind::list, 0, std::move(c)}; }

    friend bool operator==(const Budget&, const Budget&) = default;
};

inline std::string to_string(const Budget& b) {
    switch (b.kind) {
        case Budget::Kind::free: return "free";
        case Budget::Kind::each: return "each:" + std::to_string(b.count);
        case Budget::Kind::total: return "total:" + std::to_string(b.count);
        case Budget::Kind::list: {
            std::string s = "list:";
            for (std::size_t i = 0; i < b.counts.size(); ++i) {
                if (i > 0) s += ',';
                s += std::to_string(b.counts[i]);
            }
            return s;
        }
    }
    return "free";
}

inline Budget parse_budget(std::string_view text) {
    auto parse_count = [&](std::string_view s) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size() || v == 0)
            fail_usage("invalid budget '" + std::string(text) + "'");
        return v;
    };
    if (text == "free") return Budget::free_choice();
    if (text.rfind("each:", 0) == 0) return Budget::each(parse_count(text.substr(5)));
    if (text.rfind("total:", 0) == 0) return Budget::total(parse_count(text.substr(6)));
    if (text.rfind("list:", 0) == 0) {
        std::vector<std::size_t> counts;
        for (auto part : detail::split(text.substr(5), ',')) counts.push_back(parse_count(part));
        return Budget::list(std::move(counts));
    }
    fail_usage("invalid budget '" + std::string(text) +
               "' (expected free, each:N, total:N or list:a,b,...)");
}

/// Splits `total` kept layers across segments proportionally to their sizes
/// by largest remainder, keeping each count within [1, size]. Ties go to the
/// earlier segment.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& sizes) {
    std::size_t layers = 0;
    for (auto s : sizes) layers += s;
    if (total < sizes.size() || total > layers)
        fail_usage("cannot keep " + std::to_string(total) + " layers across " +
                   std::to_string(sizes.size()) + " segments of " + std::to_string(layers) +
                   " layers (need k <= total <= L)");
    std::vector<std::size_t> counts(sizes.size());
    std::vector<double> remainder(sizes.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double quota = static_cast<double>(total) * static_cast<double>(sizes[i]) /
                             static_cast<double>(layers);
        counts[i] = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(quota)), 1, sizes[i]);
        remainder[i] = quota - std::floor(quota);
        assigned += counts[i];
    }
    while (assigned < total) {
        std::size_t pick = sizes.size();
        for (std::size_t i = 0; i < sizes.size(); ++i)
            if (counts[i] < sizes[i] && (pick == sizes.size() || remainder[i] > remainder[pick]))
                pick = i;
        ++counts[pick];
        remainder[pick] -= 1.0;
        ++assigned;
    }
    while (assigned > total) {
        std::size_t pick = sizes.size();
        for (std::size_t i = 0; i < sizes.size(); ++i)
            if (counts[i] > 1 && (pick == sizes.size() || remainder[i] < remainder[pick])) pick = i;
        --counts[pick];
        remainder[pick] += 1.0;
        --assigned;
    }
    return counts;
}

/// Per-segment keep counts; nullopt means any non-empty subset.
inline std::vector<std::optional<std::size_t>> resolve_budget(const Budget& budget,
                                                              const Segmentation& seg) {
    const auto sizes = seg.sizes();
    std::vector<std::optional<std::size_t>> out(sizes.size());
    switch (budget.kind) {
        case Budget::Kind::free: break;
        case Budget::Kind::each:
            for (std::size_t i = 0; i < sizes.size(); ++i) out[i] = budget.count;
            break;
        case Budget::Kind::total: {
            const auto counts = apportion(budget.count, sizes);
            for (std::size_t i = 0; i < sizes.size(); ++i) out[i] = counts[i];
            break;
        }
        case Budget::Kind::list:
            if (budget.counts.size() != sizes.size())
                fail_usage("budget lists " + std::to_string(budget.counts.size()) +
                           " counts for " + std::to_string(sizes.size()) + " segments");
            for (std::size_t i = 0; i < sizes.size(); ++i) out[i] = budget.counts[i];
            break;
    }
    for (std::size_t i = 0; i < sizes.size(); ++i)
        if (out[i] && (*out[i] < 1 || *out[i] > sizes[i]))
            fail_usage("segment " + std::to_string(i) + " has " + std::to_string(sizes[i]) +
                       " layers; cannot keep " + std::to_string(*out[i]));
    return out;
}

/// All non-empty masks over `segment_size` positions in ascending order, or
/// only those with exactly `keep_count` bits set.
inline std::vector<std::uint64_t> enumerate_masks(std::size_t segment_size,
                                                  std::optional<std::size_t> keep_count = {}) {
    if (segment_size < 1) fail_usage("segment size must be >= 1");
    if (segment_size > kMaxSegmentSize)
        fail_usage("segment of " + std::to_string(segment_size) + " layers exceeds the " +
                   std::to_string(kMaxSegmentSize) +
                   "-layer enumeration limit; use a larger k for more, smaller segments");
    if (keep_count && (*keep_count < 1 || *keep_count > segment_size))
        fail_usage("keep count " + std::to_string(*keep_count) + " outside [1, " +
                   std::to_string(segment_size) + "]");
    std::vector<std::uint64_t> masks;
    const std::uint64_t end = std::uint64_t{1} << segment_size;
    for (std::uint64_t m = 1; m < end; ++m)
        if (!keep_count || static_cast<std::size_t>(std::popcount(m)) == *keep_count)
            masks.push_back(m);
    return masks;
}

inline std::uint64_t mask_count(std::size_t segment_size, std::optional<std::size_t> keep_count) {
    if (!keep_count) return (std::uint64_t{1} << segment_size) - 1;
    return count_segmentations(segment_size + 1, *keep_count + 1);  // C(size, keep)
}

inline std::uint64_t candidate_count(const Segmentation& seg, const Budget& budget) {
    validate(seg);
    const auto counts = resolve_budget(budget, seg);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < seg.k(); ++i) {
        if (seg.segment_size(i) > kMaxSegmentSize)
            fail_usage("segment " + std::to_string(i) + " exceeds the enumeration limit");
        total += mask_count(seg.segment_size(i), counts[i]);
    }
    return total;
}

// ---------------------------------------------------------------------------

/// Scores one candidate keep mask of one segment. Implementations must be
/// deterministic and safe to call concurrently.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score(std::size_t segment_index, std::uint64_t keep_mask) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Looks scores up in an externally produced table.
class TableScorer final : public Scorer {
public:
    explicit TableScorer(ScoreTable table) : table_(std::move(table)) {
        if (table_.partial) fail_data("score table is marked partial; refusing to plan from it");
    }

    double score(std::size_t segment_index, std::uint64_t keep_mask) const override {
        const auto* rec = table_.find(static_cast<std::uint32_t>(segment_index), keep_mask);
        if (!rec) {
            std::array<char, 32> hex{};
            auto [end, ec] = std::to_chars(hex.data(), hex.data() + hex.size(), keep_mask, 16);
            fail_data("score table has no entry for segment " + std::to_string(segment_index) +
                      " mask " + std::string(hex.data(), end));
        }
        return rec->score;
    }

    [[nodiscard]] std::string name() const override { return "table"; }

private:
    ScoreTable table_;
};

/// Global gradient norm of a hybrid-initialized copy of a pretrained network:
/// the masked layers keep pretrained weights, the others are re-drawn
/// according to the scope, then the gradient norm over all parameters on the
/// scoring batches is averaged.
class ToyScorer final : public Scorer {
public:
    ToyScorer(Network pretrained, std::vector<Dataset> batches, Segmentation seg, InitScope scope,
              std::uint64_t seed)
        : net_(std::move(pretrained)), batches_(std::move(batches)), seg_(std::move(seg)),
          scope_(scope), seed_(seed) {
        validate(seg_);
        if (seg_.layer_count != net_.params.units.size())
            fail_data("segmentation covers " + std::to_string(seg_.layer_count) +
                      " layers but the network has " + std::to_string(net_.params.units.size()));
        if (batches_.empty()) fail_usage("toy scorer needs at least one batch");
    }

    /// Network a candidate is scored on.
    [[nodiscard]] Network candidate_network(std::size_t segment_index, std::uint64_t keep_mask) const {
        const std::size_t begin = seg_.segment_begin(segment_index);
        const std::size_t size = seg_.segment_size(segment_index);
        if (keep_mask == 0 || (size < 64 && (keep_mask >> size) != 0))
            fail_usage("keep mask does not fit segment " + std::to_string(segment_index));
        std::set<std::size_t> kept;
        for (std::size_t j = 0; j < size; ++j)
            if (keep_mask & (std::uint64_t{1} << j)) kept.insert(begin + j);
        return hybrid_init(net_, kept, scope_, UnitRange{begin, begin + size}, seed_);
    }

    double score(std::size_t segment_index, std::uint64_t keep_mask) const override {
        const Network candidate = candidate_network(segment_index, keep_mask);
        double sum = 0.0;
        for (const auto& b : batches_) sum += grad_norm(backward(candidate, b.features, b.labels));
        return sum / static_cast<double>(batches_.size());
    }

    [[nodiscard]] std::string name() const override { return "gradnorm"; }

private:
    Network net_;
    std::vector<Dataset> batches_;
    Segmentation seg_;
    InitScope scope_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------

struct CandidateScore {
    std::uint64_t mask = 0;
    double score = 0.0;

    friend bool operator==(const CandidateScore&, const CandidateScore&) = default;
};

struct SegmentChoice {
    std::size_t segment_index = 0;
    std::uint64_t keep_mask = 0;
    std::optional<double> best_score;  // absent for random plans
    std::uint64_t candidates_evaluated = 0;
    std::vector<CandidateScore> candidates;

    friend bool operator==(const SegmentChoice&, const SegmentChoice&) = default;
};

struct PruningPlan {
    Segmentation segmentation;
    std::vector<std::string> layer_names;
    std::vector<std::size_t> kept;     // 0-based, ascending
    std::vector<std::size_t> removed;  // 0-based, ascending
    std::vector<SegmentChoice> per_segment;
    InitScope mode = InitScope::literal;
    Budget budget;
    std::uint64_t seed = 0;
    std::string scorer;

    friend bool operator==(const PruningPlan&, const PruningPlan&) = default;
};

/// Checks partition validity, per-segment coverage and budget adherence.
inline void validate(const PruningPlan& plan) {
    validate(plan.segmentation);
    const std::size_t L = plan.segmentation.layer_count;
    std::vector<int> seen(L, 0);
    for (auto i : plan.kept) {
        if (i >= L) fail_data("plan keeps a layer out of range");
        ++seen[i];
    }
    for (auto i : plan.removed) {
        if (i >= L) fail_data("plan removes a layer out of range");
        ++seen[i];
    }
    for (std::size_t i = 0; i < L; ++i)
        if (seen[i] != 1) fail_data("plan kept/removed sets do not partition the layers");
    if (plan.per_segment.size() != plan.segmentation.k())
        fail_data("plan has a choice count different from its segment count");
    const auto counts = resolve_budget(plan.budget, plan.segmentation);
    for (std::size_t s = 0; s < plan.per_segment.size(); ++s) {
        const auto& c = plan.per_segment[s];
        const std::size_t size = plan.segmentation.segment_size(s);
        if (c.keep_mask == 0) fail_data("segment " + std::to_string(s) + " keeps no layer");
        if (size < 64 && (c.keep_mask >> size) != 0)
            fail_data("segment " + std::to_string(s) + " mask exceeds the segment");
        if (counts[s] && static_cast<std::size_t>(std::popcount(c.keep_mask)) != *counts[s])
            fail_data("segment " + std::to_string(s) + " violates its budget");
        const std::size_t begin = plan.segmentation.segment_begin(s);
        for (std::size_t j = 0; j < size; ++j) {
            const bool keep = (c.keep_mask >> j) & 1u;
            const bool listed = std::binary_search(plan.kept.begin(), plan.kept.end(), begin + j);
            if (keep != listed) fail_data("plan kept set disagrees with segment masks");
        }
    }
}

namespace detail {

inline void assemble_sets(PruningPlan& plan) {
    plan.kept.clear();
    plan.removed.clear();
    for (std::size_t s = 0; s < plan.per_segment.size(); ++s) {
        const std::size_t begin = plan.segmentation.segment_begin(s);
        for (std::size_t j = 0; j < plan.segmentation.segment_size(s); ++j) {
            if ((plan.per_segment[s].keep_mask >> j) & 1u)
                plan.kept.push_back(begin + j);
            else
                plan.removed.push_back(begin + j);
        }
    }
}

inline std::size_t resolve_jobs(std::size_t jobs) {
    if (jobs > 0) return jobs;
    const auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace detail

struct PlanOptions {
    Budget budget;
    InitScope mode = InitScope::literal;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;  // 0 = hardware concurrency
    std::vector<std::string> layer_names;
};

/// Scores every admissible mask of every segment and keeps the argmax per
/// segment, smallest mask on ties. Scoring runs on `jobs` threads; results
/// land by index and the argmax scans masks in ascending order, so the plan
/// does not depend on the thread count.
inline PruningPlan plan(const Scorer& scorer, const Segmentation& seg, const PlanOptions& opt) {
    validate(seg);
    const auto counts = resolve_budget(opt.budget, seg);

    struct Task {
        std::size_t segment;
        std::uint64_t mask;
    };
    std::vector<Task> tasks;
    std::vector<std::size_t> first_task;
    for (std::size_t s = 0; s < seg.k(); ++s) {
        first_task.push_back(tasks.size());
        for (auto m : enumerate_masks(seg.segment_size(s), counts[s])) tasks.push_back({s, m});
    }
    first_task.push_back(tasks.size());

    std::vector<double> scores(tasks.size(), 0.0);
    const std::size_t workers = std::min(detail::resolve_jobs(opt.jobs), std::max<std::size_t>(tasks.size(), 1));
    if (workers <= 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t)
            scores[t] = scorer.score(tasks[t].segment, tasks[t].mask);
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < tasks.size() && !failed; t = next++) {
                    try {
                        scores[t] = scorer.score(tasks[t].segment, tasks[t].mask);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
        pool.clear();
        if (error) std::rethrow_exception(error);
    }

    PruningPlan out;
    out.segmentation = seg;
    out.layer_names = opt.layer_names;
    out.mode = opt.mode;
    out.budget = opt.budget;
    out.seed = opt.seed;
    out.scorer = scorer.name();
    for (std::size_t s = 0; s < seg.k(); ++s) {
        SegmentChoice choice;
        choice.segment_index = s;
        for (std::size_t t = first_task[s]; t < first_task[s + 1]; ++t) {
            if (!std::isfinite(scores[t]))
                fail_data("non-finite score for segment " + std::to_string(s));
            choice.candidates.push_back({tasks[t].mask, scores[t]});
            if (!choice.best_score || scores[t] > *choice.best_score) {
                choice.best_score = scores[t];
                choice.keep_mask = tasks[t].mask;
            }
        }
        choice.candidates_evaluated = choice.candidates.size();
        out.per_segment.push_back(std::move(choice));
    }
    detail::assemble_sets(out);
    validate(out);
    return out;
}

/// A uniformly random admissible mask per segment, drawn from stream
/// (seed, segment).
inline PruningPlan random_plan(const Segmentation& seg, const Budget& budget, std::uint64_t seed,
                               std::vector<std::string> layer_names = {}) {
    validate(seg);
    const auto counts = resolve_budget(budget, seg);
    PruningPlan out;
    out.segmentation = seg;
    out.layer_names = std::move(layer_names);
    out.budget = budget;
    out.seed = seed;
    out.scorer = "random";
    for (std::size_t s = 0; s < seg.k(); ++s) {
        CounterRng rng(seed, s);
        const auto masks = enumerate_masks(seg.segment_size(s), counts[s]);
        SegmentChoice choice;
        choice.segment_index = s;
        choice.keep_mask = masks[rng.below(masks.size())];
        out.per_segment.push_back(std::move(choice));
    }
    detail::assemble_sets(out);
    validate(out);
    return out;
}

}  // namespace sglp
