#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dbc/builtin_backends.hpp"
#include "dbc/corpus.hpp"
#include "fixtures.hpp"

using namespace dbc;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

AugmentedSample basic_sample(const std::string& id = "a1") {
    AugmentedSample s;
    s.id = id;
    s.source = "Alice Morgan went to the market in Lisbon and spent $30 on supplies.";
    s.summary = "Alice Morgan spent $30 in Lisbon.";
    s.positives.push_back({"Alice Morgan paid $30 in Lisbon.", "backtranslation",
                           nlohmann::json{{"pivot", "de"}}});
    s.negatives.push_back({"Bob Keller spent $45 in Lisbon.", "entity_swap", false, 0.0});
    return s;
}

}  // namespace

TEST_CASE("load_dataset: empty file yields empty list") {
    TempFile f("dbc_empty.jsonl");
    std::ofstream(f.path).close();
    CHECK(load_dataset(f.path).empty());
}

TEST_CASE("save/load: single record round-trips field-for-field") {
    TempFile f("dbc_one.jsonl");
    AugmentedSample s = annotate_entities(basic_sample(), HeuristicNer{});
    save_dataset({s}, f.path);
    const auto loaded = load_dataset(f.path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0] == s);
}

TEST_CASE("load_dataset: span past end of summary names the sample") {
    TempFile f("dbc_bad_span.jsonl");
    {
        std::ofstream out(f.path);
        out << R"({"id":"bad7","source":"x","summary":"short","entities":)"
            << R"([{"start":0,"end":99,"label":"PERSON","text":"short"}],)"
            << R"("positives":[],"negatives":[]})"
            << "\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(f.path), doctest::Contains("bad7"), ValidationError);
}

TEST_CASE("load_dataset: malformed line reports the line number") {
    TempFile f("dbc_malformed.jsonl");
    {
        std::ofstream out(f.path);
        out << R"({"id":"ok","source":"s","summary":"t"})" << "\n";
        out << "{not json\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(f.path), doctest::Contains(":2:"), ValidationError);
}

TEST_CASE("save_dataset: empty list writes zero lines, three samples keep order") {
    TempFile f("dbc_order.jsonl");
    save_dataset({}, f.path);
    CHECK(load_dataset(f.path).empty());

    std::vector<AugmentedSample> samples = {basic_sample("x1"), basic_sample("x2"),
                                            basic_sample("x3")};
    save_dataset(samples, f.path);
    const auto loaded = load_dataset(f.path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].id == "x1");
    CHECK(loaded[1].id == "x2");
    CHECK(loaded[2].id == "x3");
}

TEST_CASE("save/load: newlines inside texts are escaped and round-trip") {
    TempFile f("dbc_newline.jsonl");
    AugmentedSample s = basic_sample();
    s.source = "line one\nline two\nline three";
    save_dataset({s}, f.path);
    const auto loaded = load_dataset(f.path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].source == s.source);
}

TEST_CASE("save/load: unknown top-level fields survive the round trip") {
    TempFile f("dbc_extra.jsonl");
    AugmentedSample s = basic_sample();
    s.extra["subreddit"] = "r/wrestling";
    s.extra["score"] = 42;
    save_dataset({s}, f.path);
    const auto loaded = load_dataset(f.path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].extra.at("subreddit") == "r/wrestling");
    CHECK(loaded[0].extra.at("score") == 42);
}

TEST_CASE("round-trip property over randomized datasets") {
    TempFile f("dbc_random.jsonl");
    Rng rng(99);
    const std::vector<std::string> snippets = {
        "quotes \" and \\ backslash", "tabs\tand\nnewlines", "unicode \xc3\xa9\xc3\xa0",
        "plain words only here", "numbers 12 34 $56"};
    std::vector<AugmentedSample> samples;
    for (int i = 0; i < 25; ++i) {
        AugmentedSample s;
        s.id = "r" + std::to_string(i);
        s.source = snippets[rng.bounded(snippets.size())] + " " + std::to_string(rng.next_u64());
        s.summary = snippets[rng.bounded(snippets.size())];
        for (int p = 0; p < static_cast<int>(rng.bounded(3)); ++p) {
            s.positives.push_back({"positive variant " + std::to_string(rng.bounded(1000)),
                                   rng.bounded(2) ? "backtranslation" : "original",
                                   nlohmann::json{{"k", static_cast<int>(rng.bounded(5))}}});
        }
        for (int q = 0; q < static_cast<int>(rng.bounded(3)); ++q) {
            const double score = static_cast<double>(rng.bounded(1000)) / 1000.0;
            s.negatives.push_back({"negative variant " + std::to_string(rng.bounded(1000)),
                                   rng.bounded(2) ? "entity_swap" : "mask_entity",
                                   score >= 0.4, score});
        }
        samples.push_back(std::move(s));
    }
    save_dataset(samples, f.path);
    CHECK(load_dataset(f.path) == samples);
}

TEST_CASE("annotate_entities: no capitalized tokens means no spans") {
    AugmentedSample s;
    s.id = "plain";
    s.source = "irrelevant";
    s.summary = "the weather is nice today";
    const auto out = annotate_entities(s, HeuristicNer{});
    CHECK(out.entities.empty());
}

TEST_CASE("annotate_entities: tags the wrestler example") {
    AugmentedSample s;
    s.id = "helms";
    s.source = "irrelevant";
    s.summary = "Pro Wrestler Gregory Helms stole $30 from 8 year old me";
    const auto out = annotate_entities(s, HeuristicNer{});
    REQUIRE(out.entities.size() == 3);
    CHECK(out.entities[0].text == "Pro Wrestler Gregory Helms");
    CHECK(out.entities[0].label == "PERSON");
    CHECK(out.entities[1].text == "$30");
    CHECK(out.entities[1].label == "MONEY");
    CHECK(out.entities[2].text == "8");
    CHECK(out.entities[2].label == "CARDINAL");
    for (const auto& e : out.entities) {
        CHECK(s.summary.substr(e.start, e.end - e.start) == e.text);
    }
}

TEST_CASE("annotate_entities: overlapping backend spans keep the longer one") {
    struct OverlapNer final : NerBackend {
        std::vector<EntitySpan> tag(const std::string&) const override {
            return {{0, 5, "PERSON", ""}, {3, 8, "PERSON", ""}};
        }
        std::string name() const override { return "overlap"; }
    };
    AugmentedSample s;
    s.id = "ov";
    s.source = "x";
    s.summary = "abcdefghij";
    const auto out = annotate_entities(s, OverlapNer{});
    REQUIRE(out.entities.size() == 1);
    CHECK(out.entities[0].start == 0);
    CHECK(out.entities[0].end == 5);
}

TEST_CASE("compute_stats: 1 of 4 samples with entities gives 25.00") {
    std::vector<AugmentedSample> samples;
    for (int i = 0; i < 4; ++i) {
        AugmentedSample s;
        s.id = "s" + std::to_string(i);
        s.source = "src";
        s.summary = "plain words";
        samples.push_back(s);
    }
    samples[2].summary = "Alice Morgan pays";
    samples[2].entities = {{0, 12, "PERSON", "Alice Morgan"}};
    const DatasetStats stats = compute_stats(samples);
    CHECK(stats.n_samples == 4);
    CHECK(stats.pct_with_entities == doctest::Approx(25.00).epsilon(1e-12));
    CHECK(stats.no_negatives);
    CHECK(stats.pct_toxic_negatives == 0.0);
}

TEST_CASE("compute_stats: synthetic corpus matches an independent recount") {
    const auto samples = fixtures::synthetic_corpus(100, 2024);

    // Independent scripted recount, straight off the raw fields.
    std::size_t with_entities = 0, negatives = 0, toxic = 0, positives = 0;
    for (const auto& s : samples) {
        if (!s.entities.empty()) ++with_entities;
        negatives += s.negatives.size();
        positives += s.positives.size();
        for (const auto& n : s.negatives) {
            if (n.toxic) ++toxic;
        }
    }
    auto pct = [](std::size_t a, std::size_t b) {
        return static_cast<double>((20000ull * a + b) / (2ull * b)) / 100.0;
    };
    const DatasetStats stats = compute_stats(samples);
    CHECK(stats.n_samples == 100);
    CHECK(stats.pct_with_entities == doctest::Approx(pct(with_entities, 100)).epsilon(1e-12));
    CHECK(stats.pct_toxic_negatives == doctest::Approx(pct(toxic, negatives)).epsilon(1e-12));
    CHECK(stats.positives_per_sample ==
          doctest::Approx(static_cast<double>(positives) / 100.0).epsilon(1e-12));
    CHECK_FALSE(stats.no_negatives);
    // the generator always annotates; every summary carries entities
    CHECK(stats.pct_with_entities == 100.0);
}

TEST_CASE("compute_stats: flag to count entity coverage over sources") {
    std::vector<AugmentedSample> samples(2);
    samples[0].id = "a";
    samples[0].source = "Alice Morgan pays rent";
    samples[0].summary = "rent was paid";  // no summary entities
    samples[1].id = "b";
    samples[1].source = "nothing here";
    samples[1].summary = "nothing there";
    HeuristicNer ner;
    StatsOptions options;
    options.source_ner = &ner;
    CHECK(compute_stats(samples).pct_with_entities == 0.0);
    CHECK(compute_stats(samples, options).pct_with_entities == doctest::Approx(50.0));
}
