#pragma once

#include <string>

#include <json.hpp>

#include "dbc/augment.hpp"
#include "dbc/backends.hpp"
#include "dbc/train.hpp"

namespace dbc {

// Union of all run settings, loadable from one JSON config file. Every field
// has a default matching the reference hyperparameters where one exists;
// partial config files override only the keys they mention.
struct RunConfig {
    AugmentConfig augment;
    TrainConfig train;
    BackendSelection backends;
    GenParams eval_gen;
    std::string toxic_template_path = "data/toxic_prompt_template.txt";
    std::string pattern_rules_path = "data/pattern_rules.txt";
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

// Applies one seed to every seeded component (augment, train, generation).
void override_seeds(RunConfig& config, uint64_t seed);

// Writes the fully resolved config into the output directory.
void echo_config(const RunConfig& config, const std::string& out_dir);

}  // namespace dbc
