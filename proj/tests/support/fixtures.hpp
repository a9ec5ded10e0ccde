#pragma once

// Deterministic synthetic fixtures shared by unit, CLI and acceptance tests.

#include <array>
#include <string>
#include <vector>

#include "dbc/batching.hpp"
#include "dbc/builtin_backends.hpp"
#include "dbc/common.hpp"
#include "dbc/corpus.hpp"
#include "dbc/model.hpp"
#include "dbc/train.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) {
    return std::string(DBC_DATA_DIR) + "/" + name;
}

// Entity-rich source/summary pairs with pre-built augmentation variants in
// the shape the pipeline emits: positives preserve the summary's entities,
// negatives corrupt them (swap/mask style) or toxify the text.
inline std::vector<dbc::AugmentedSample> synthetic_corpus(std::size_t n, uint64_t seed,
                                                          const std::string& id_prefix = "s") {
    static const std::array<const char*, 10> first = {"Alice", "Bob",   "Clara", "Daniel",
                                                      "Elena", "Frank", "Grace", "Henry",
                                                      "Irene", "Jack"};
    static const std::array<const char*, 10> last = {"Morgan", "Keller", "Hughes", "Frost",
                                                     "Vargas", "Nolan",  "Patel",  "Rivera",
                                                     "Sloan",  "Webb"};
    static const std::array<const char*, 8> place = {"Denver", "Lisbon",  "Oslo",  "Madrid",
                                                     "Austin", "Dublin",  "Prague", "Quito"};
    static const std::array<const char*, 6> money = {"$30", "$45", "$120", "$75", "$16", "$250"};
    static const std::array<const char*, 5> card = {"8", "13", "21", "34", "55"};

    const dbc::HeuristicNer ner;
    const dbc::LexiconToxicity lexicon =
        dbc::LexiconToxicity::from_file(data_path("toxicity_lexicon.tsv"));

    std::vector<dbc::AugmentedSample> samples;
    samples.reserve(n);
    dbc::Rng rng(dbc::Rng::mix(seed, 0x66697874ull));
    for (std::size_t i = 0; i < n; ++i) {
        const std::string name =
            std::string(first[rng.bounded(first.size())]) + " " + last[rng.bounded(last.size())];
        const std::string city = place[rng.bounded(place.size())];
        const std::string amount = money[rng.bounded(money.size())];
        const std::string days = card[rng.bounded(card.size())];
        const std::string other_name =
            std::string(first[rng.bounded(first.size())]) + " " + last[rng.bounded(last.size())];
        const std::string other_amount = money[rng.bounded(money.size())];
        const std::string other_city = place[rng.bounded(place.size())];

        dbc::AugmentedSample s;
        s.id = id_prefix + std::to_string(i);
        s.source = name + " went to the market in " + city + " and spent " + amount +
                   " on supplies after " + days + " days.";
        s.summary = name + " spent " + amount + " in " + city + " after " + days + " days.";

        s.positives.push_back({s.summary, "original", nlohmann::json::object()});
        s.positives.push_back({name + " paid " + amount + " in " + city + " after " + days +
                                   " days.",
                               "backtranslation", nlohmann::json{{"pivot", "de"}}});
        if (rng.bounded(2) == 0) {
            s.positives.push_back({"In " + city + ", " + name + " spent " + amount + " after " +
                                       days + " days.",
                                   "backtranslation", nlohmann::json{{"pivot", "fr"}}});
        }

        auto add_negative = [&](std::string text, const std::string& strategy) {
            const double score = lexicon.score(text);
            s.negatives.push_back({std::move(text), strategy, score >= 0.4, score});
        };
        add_negative(other_name + " spent " + other_amount + " in " + city + " after " + days +
                         " days.",
                     "entity_swap");
        add_negative(name + " spent " + other_amount + " in " + other_city + " recently.",
                     "mask_entity");
        if (rng.bounded(4) == 0) {
            add_negative("Typical useless " + name + " wasted " + amount +
                             " like a complete idiot in " + city + ".",
                         "toxic");
        }
        if (rng.bounded(2) == 0) {
            add_negative(name + " is a great person. It is a good thing.", "low_confidence");
        }

        dbc::AugmentedSample annotated = dbc::annotate_entities(s, ner);
        samples.push_back(std::move(annotated));
    }
    return samples;
}

// Micro model + hand-built batch for gradient checks: tiny dims, short
// sequences, one positive pair, one toxic negative.
inline dbc::ModelConfig micro_model_config() {
    dbc::ModelConfig cfg;
    cfg.vocab_size = 64;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.max_length = 16;
    cfg.proj_hidden = 12;
    cfg.proj_out = 8;
    cfg.precision = dbc::Precision::full;
    cfg.seed = 7;
    return cfg;
}

inline dbc::Batch micro_batch() {
    dbc::Batch batch;
    auto add = [&](std::vector<int> tokens, std::vector<uint8_t> ce, std::vector<uint8_t> ent,
                   dbc::Role role, bool toxic) {
        batch.sequences.push_back(std::move(tokens));
        batch.ce_mask.push_back(std::move(ce));
        batch.entity_mask.push_back(std::move(ent));
        batch.roles.push_back(role);
        batch.group_ids.push_back("g0");
        batch.toxic_flags.push_back(toxic ? 1 : 0);
    };
    add({5, 9, 2, 17, 33, 40, 8, 3}, {0, 0, 0, 1, 1, 1, 1, 1}, {0, 0, 0, 1, 0, 1, 0, 0},
        dbc::Role::anchor, false);
    add({5, 9, 2, 18, 33, 41, 3}, {0, 0, 0, 1, 1, 1, 1}, {0, 0, 0, 1, 1, 0, 0},
        dbc::Role::positive, false);
    add({5, 9, 2, 25, 26, 27, 3}, {0, 0, 0, 1, 1, 1, 1}, {0, 0, 0, 0, 1, 1, 0},
        dbc::Role::negative, true);
    batch.positive_pairs = {{0, 1}};
    return batch;
}

inline dbc::TrainConfig micro_train_config() {
    dbc::TrainConfig cfg;
    cfg.model = micro_model_config();
    cfg.alpha = 4.0;
    cfg.tau = 1.0;
    cfg.label_smoothing = 0.1;
    cfg.batch_constraints.max_length = 16;
    cfg.seed = 11;
    return cfg;
}

}  // namespace fixtures
