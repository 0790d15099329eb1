// SPDX-License-Identifier: Apache-2.0
//
// JSON documents for segmentations and pruning plans. Layer positions in
// these documents are 1-based; the in-memory types are 0-based.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sglp/error.hpp"
#include "sglp/fisher.hpp"
#include "sglp/planner.hpp"

namespace sglp {

using Json = nlohmann::ordered_json;

inline Json segmentation_to_json(const Segmentation& seg, const std::vector<std::string>& names) {
    Json j;
    j["k"] = seg.k();
    j["layer_count"] = seg.layer_count;
    Json starts = Json::array();
    for (auto s : seg.starts) starts.push_back(s + 1);
    j["split_starts"] = starts;
    j["loss"] = seg.loss;
    j["layer_names"] = names;
    return j;
}

struct NamedSegmentation {
    Segmentation segmentation;
    std::vector<std::string> layer_names;
};

inline NamedSegmentation segmentation_from_json(const Json& j) {
    try {
        NamedSegmentation out;
        auto& seg = out.segmentation;
        seg.layer_count = j.at("layer_count").get<std::size_t>();
        for (auto s : j.at("split_starts")) {
            const auto v = s.get<std::size_t>();
            if (v < 1) fail_data("segmentation split starts are 1-based");
            seg.starts.push_back(v - 1);
        }
        seg.loss = j.at("loss").get<double>();
        if (j.contains("layer_names")) out.layer_names = j["layer_names"].get<std::vector<std::string>>();
        if (j.contains("k") && j["k"].get<std::size_t>() != seg.k())
            fail_data("segmentation k disagrees with its split starts");
        validate(seg);
        if (!out.layer_names.empty() && out.layer_names.size() != seg.layer_count)
            fail_data("segmentation layer names disagree with its layer count");
        return out;
    } catch (const Json::exception& e) {
        fail_data(std::string("malformed segmentation document: ") + e.what());
    }
}

inline Json plan_to_json(const PruningPlan& plan) {
    Json j;
    j["format"] = "sglp-plan/1";
    j["scorer"] = plan.scorer;
    j["mode"] = to_string(plan.mode);
    j["budget"] = to_string(plan.budget);
    j["seed"] = plan.seed;
    j["segmentation"] = segmentation_to_json(plan.segmentation, plan.layer_names);
    Json kept = Json::array(), removed = Json::array();
    for (auto i : plan.kept) kept.push_back(i + 1);
    for (auto i : plan.removed) removed.push_back(i + 1);
    j["kept"] = kept;
    j["removed"] = removed;
    Json segs = Json::array();
    for (const auto& c : plan.per_segment) {
        Json s;
        s["segment_index"] = c.segment_index;
        s["keep_mask"] = c.keep_mask;
        s["best_score"] = c.best_score ? Json(*c.best_score) : Json(nullptr);
        s["candidates_evaluated"] = c.candidates_evaluated;
        Json cands = Json::array();
        for (const auto& cand : c.candidates) cands.push_back({{"mask", cand.mask}, {"score", cand.score}});
        s["candidates"] = cands;
        segs.push_back(s);
    }
    j["segments"] = segs;
    return j;
}

inline PruningPlan plan_from_json(const Json& j) {
    try {
        if (j.at("format").get<std::string>() != "sglp-plan/1")
            fail_data("unrecognized plan format");
        PruningPlan plan;
        plan.scorer = j.at("scorer").get<std::string>();
        plan.mode = parse_scope(j.at("mode").get<std::string>());
        plan.budget = parse_budget(j.at("budget").get<std::string>());
        plan.seed = j.at("seed").get<std::uint64_t>();
        auto named = segmentation_from_json(j.at("segmentation"));
        plan.segmentation = std::move(named.segmentation);
        plan.layer_names = std::move(named.layer_names);
        for (auto v : j.at("kept")) plan.kept.push_back(v.get<std::size_t>() - 1);
        for (auto v : j.at("removed")) plan.removed.push_back(v.get<std::size_t>() - 1);
        for (const auto& s : j.at("segments")) {
            SegmentChoice c;
            c.segment_index = s.at("segment_index").get<std::size_t>();
            c.keep_mask = s.at("keep_mask").get<std::uint64_t>();
            if (!s.at("best_score").is_null()) c.best_score = s["best_score"].get<double>();
            c.candidates_evaluated = s.at("candidates_evaluated").get<std::uint64_t>();
            for (const auto& cand : s.at("candidates"))
                c.candidates.push_back({cand.at("mask").get<std::uint64_t>(), cand.at("score").get<double>()});
            plan.per_segment.push_back(std::move(c));
        }
        validate(plan);
        return plan;
    } catch (const Json::exception& e) {
        fail_data(std::string("malformed plan document: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::usage) fail_data(std::string("invalid plan document: ") + e.what());
        throw;
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        fail_data("cannot parse " + path.string() + ": " + e.what());
    }
}

/// 64-bit FNV-1a, hex encoded; used as a config digest.
inline std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename, so a
/// failed write never leaves a partial artifact behind.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail_data("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            fail_data("failed writing " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail_data("cannot move artifact into place at " + path.string());
    }
}

}  // namespace sglp
