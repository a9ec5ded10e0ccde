#include <doctest.h>

#include <set>

#include "dbc/batching.hpp"
#include "dbc/builtin_backends.hpp"
#include "dbc/tokenizer.hpp"
#include "fixtures.hpp"

using namespace dbc;

namespace {

AugmentedSample sample_with(int n_positives, int n_negatives, const std::string& id = "g") {
    AugmentedSample s;
    s.id = id;
    s.source = "Alice Morgan spent $30 in Lisbon on supplies.";
    s.summary = "Alice Morgan spent $30 in Lisbon.";
    s = annotate_entities(s, HeuristicNer{});
    s.positives.push_back({s.summary, "original", nlohmann::json::object()});
    for (int i = 0; i < n_positives; ++i) {
        s.positives.push_back({"Alice Morgan paid $30 in Lisbon variant " + std::to_string(i),
                               "backtranslation", nlohmann::json::object()});
    }
    for (int i = 0; i < n_negatives; ++i) {
        s.negatives.push_back({"Bob Keller spent $45 in Oslo variant " + std::to_string(i),
                               "entity_swap", false, 0.0});
    }
    return s;
}

bool equal_batches(const std::vector<Batch>& a, const std::vector<Batch>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].sequences != b[i].sequences || a[i].roles != b[i].roles ||
            a[i].group_ids != b[i].group_ids || a[i].entity_mask != b[i].entity_mask ||
            a[i].ce_mask != b[i].ce_mask || a[i].toxic_flags != b[i].toxic_flags ||
            a[i].positive_pairs != b[i].positive_pairs) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("build_batches: anchor plus two positives enumerate three pairs") {
    const ByteTokenizer tok;
    BatchConstraints constraints;
    constraints.max_length = 512;
    const auto result = build_batches({sample_with(2, 0)}, constraints, tok, 1);
    REQUIRE(result.batches.size() == 1);
    const Batch& b = result.batches[0];
    CHECK(b.size() == 3);
    CHECK(b.positive_pairs.size() == 3);
    std::set<std::pair<int, int>> pairs(b.positive_pairs.begin(), b.positive_pairs.end());
    CHECK(pairs == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("build_batches: max_positives=1 leaves exactly one pair per group") {
    const ByteTokenizer tok;
    BatchConstraints constraints;
    constraints.max_length = 512;
    constraints.max_positives = 1;
    const auto result = build_batches({sample_with(3, 0)}, constraints, tok, 1);
    REQUIRE(result.batches.size() == 1);
    CHECK(result.batches[0].positive_pairs.size() == 1);
}

TEST_CASE("build_batches: group with only negatives emits a batch with empty P") {
    const ByteTokenizer tok;
    BatchConstraints constraints;
    constraints.max_length = 512;
    const auto result = build_batches({sample_with(0, 2)}, constraints, tok, 1);
    REQUIRE(result.batches.size() == 1);
    CHECK(result.batches[0].positive_pairs.empty());
    CHECK(result.batches[0].size() == 3);  // anchor + 2 negatives
}

TEST_CASE("build_batches: overlong anchor skips the sample with a record") {
    const ByteTokenizer tok;
    BatchConstraints constraints;
    constraints.max_length = 16;
    const auto result = build_batches({sample_with(1, 1)}, constraints, tok, 1);
    CHECK(result.batches.empty());
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].reason == "anchor_too_long");
    CHECK(result.skipped[0].sample_id == "g");
}

TEST_CASE("build_batches: overlong variants are dropped whole, not truncated") {
    const ByteTokenizer tok;
    AugmentedSample s = sample_with(0, 0, "t");
    const std::string long_tail(400, 'x');
    s.positives.push_back({"short positive fits here", "backtranslation",
                           nlohmann::json::object()});
    s.negatives.push_back({"long negative " + long_tail, "entity_swap", false, 0.0});
    BatchConstraints constraints;
    constraints.max_length = 128;
    const auto result = build_batches({s}, constraints, tok, 1);
    REQUIRE(result.batches.size() == 1);
    const Batch& b = result.batches[0];
    CHECK(b.size() == 2);  // anchor + surviving positive
    for (const auto& seq : b.sequences) {
        CHECK(seq.size() <= 128);
    }
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].reason == "variant_too_long");
}

TEST_CASE("build_batches: deterministic for fixed seed, pure in its inputs") {
    const ByteTokenizer tok;
    const auto samples = fixtures::synthetic_corpus(20, 5);
    BatchConstraints constraints;
    constraints.max_length = 400;
    constraints.max_positives = 1;
    constraints.max_negatives = 1;
    constraints.batch_groups = 3;
    const auto a = build_batches(samples, constraints, tok, 42);
    const auto b = build_batches(samples, constraints, tok, 42);
    CHECK(equal_batches(a.batches, b.batches));
}

TEST_CASE("build_batches: pair validity and mask alignment invariants") {
    const ByteTokenizer tok;
    const auto samples = fixtures::synthetic_corpus(30, 8);
    BatchConstraints constraints;
    constraints.max_length = 400;
    constraints.batch_groups = 4;
    const auto result = build_batches(samples, constraints, tok, 17);
    REQUIRE(!result.batches.empty());
    for (const Batch& batch : result.batches) {
        for (const auto& [i, j] : batch.positive_pairs) {
            CHECK(batch.group_ids[static_cast<std::size_t>(i)] ==
                  batch.group_ids[static_cast<std::size_t>(j)]);
            CHECK(batch.roles[static_cast<std::size_t>(i)] != Role::negative);
            CHECK(batch.roles[static_cast<std::size_t>(j)] != Role::negative);
        }
        for (std::size_t s = 0; s < batch.size(); ++s) {
            std::size_t ce_total = 0;
            for (std::size_t t = 0; t < batch.ce_mask[s].size(); ++t) {
                ce_total += batch.ce_mask[s][t];
                if (batch.entity_mask[s][t]) CHECK(batch.ce_mask[s][t] == 1);
            }
            CHECK(ce_total > 0);
            CHECK(batch.ce_mask[s].size() == batch.sequences[s].size());
            CHECK(batch.entity_mask[s].size() == batch.sequences[s].size());
        }
    }
}

TEST_CASE("build_batches: entity mask marks entity bytes in the anchor summary") {
    const ByteTokenizer tok;
    AugmentedSample s = sample_with(0, 0, "m");
    BatchConstraints constraints;
    constraints.max_length = 512;
    const auto result = build_batches({s}, constraints, tok, 1);
    REQUIRE(result.batches.size() == 1);
    const Batch& b = result.batches[0];
    const std::size_t summary_begin = s.source.size() + 1;  // after SEP
    // Reconstruct which summary bytes should be entity-marked.
    std::vector<uint8_t> expected(s.summary.size(), 0);
    for (const EntitySpan& e : s.entities) {
        for (std::size_t c = e.start; c < e.end; ++c) expected[c] = 1;
    }
    for (std::size_t c = 0; c < s.summary.size(); ++c) {
        CHECK(b.entity_mask[0][summary_begin + c] == expected[c]);
    }
    CHECK(b.entity_mask[0][summary_begin + s.summary.size()] == 0);  // EOS never entity
}

TEST_CASE("BatchConstraints validation") {
    BatchConstraints c;
    c.max_length = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.max_length = 8;
    c.max_positives = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}
