#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbc/augment.hpp"
#include "dbc/batching.hpp"
#include "dbc/builtin_backends.hpp"
#include "dbc/config.hpp"
#include "dbc/corpus.hpp"
#include "dbc/eval.hpp"
#include "dbc/model.hpp"
#include "dbc/train.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<uint64_t> seed_flag;
};

dbc::RunConfig resolve_config(const CommonArgs& args) {
    dbc::RunConfig config;
    if (!args.config_path.empty()) config = dbc::load_run_config(args.config_path);
    if (args.seed_flag) dbc::override_seeds(config, *args.seed_flag);
    if (const char* env = std::getenv("DEBIAS_CONTRAST_SEED")) {
        try {
            dbc::override_seeds(config, std::stoull(env));
        } catch (const std::exception&) {
            throw dbc::ValidationError("DEBIAS_CONTRAST_SEED is not an integer: " +
                                       std::string(env));
        }
    }
    return config;
}

int cmd_augment(const CommonArgs& common, const std::string& in_path,
                const std::string& out_path) {
    dbc::RunConfig config = resolve_config(common);
    const auto samples = dbc::load_dataset(in_path);
    config.backends.mask_marker = config.augment.mask_marker;
    const dbc::BackendSuite suite = dbc::make_suite(config.backends);
    const auto prompt = dbc::ToxicPromptTemplate::load(config.toxic_template_path);
    const dbc::AugmentResult result =
        dbc::augment_dataset(samples, config.augment, prompt, suite);
    dbc::save_dataset(result.samples, out_path);
    if (!result.audit.empty()) {
        std::ofstream audit(out_path + ".audit.jsonl");
        for (const auto& rec : result.audit) {
            audit << nlohmann::json{{"id", rec.sample_id}, {"strategy", rec.strategy},
                                    {"raw", rec.raw}}
                         .dump()
                  << '\n';
        }
    }

    const fs::path out_dir = fs::path(out_path).parent_path();
    dbc::echo_config(config, out_dir.empty() ? "." : out_dir.string());

    std::cout << "augmented " << result.samples.size() << " samples ("
              << result.rejections.size() << " rejections) -> " << out_path << "\n";
    std::size_t positives = 0, negatives = 0;
    for (const auto& s : result.samples) {
        positives += s.positives.size();
        negatives += s.negatives.size();
    }
    std::cout << "positives=" << positives << " negatives=" << negatives << "\n";
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data_path,
              const std::string& out_dir) {
    dbc::RunConfig config = resolve_config(common);
    config.train.checkpoint_dir = out_dir;
    const auto dataset = dbc::load_dataset(data_path);
    dbc::echo_config(config, out_dir);
    const dbc::TrainResult result = dbc::train(config.train, dataset);
    if (config.train.epochs == 0) {
        dbc::save_checkpoint((fs::path(out_dir) / "final.ckpt").string(), result.params, 0);
    }
    std::cout << "trained " << result.history.steps.size() << " steps over "
              << result.history.epochs.size() << " epochs -> " << out_dir << "\n";
    for (const dbc::EpochSnapshot& e : result.history.epochs) {
        std::cout << "epoch " << e.epoch + 1 << ": mean total " << e.mean_total << " (ce "
                  << e.mean_ce << ", cl " << e.mean_cl << ") in " << e.wall_seconds << "s\n";
    }
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint_path,
             const std::string& data_path, const std::string& report_dir) {
    dbc::RunConfig config = resolve_config(common);
    const auto [params, step] = dbc::load_checkpoint(checkpoint_path);
    const auto dataset = dbc::load_dataset(data_path);
    const dbc::BackendSuite suite = dbc::make_suite(config.backends);

    std::vector<std::string> sources, ids;
    for (const auto& s : dataset) {
        sources.push_back(s.source);
        ids.push_back(s.id);
    }
    const dbc::ByteTokenizer tokenizer;
    const auto outputs = dbc::generate_summaries(params, tokenizer, sources, config.eval_gen);
    const dbc::EvalReport report =
        dbc::evaluate(sources, outputs, *suite.toxicity, *suite.faithfulness, ids);

    dbc::echo_config(config, report_dir);
    {
        std::ofstream csv(fs::path(report_dir) / "report.csv");
        if (!csv) throw dbc::Error("cannot write report.csv in " + report_dir);
        csv << report.to_csv();
    }
    {
        std::ofstream md(fs::path(report_dir) / "report.md");
        md << report.to_markdown();
    }
    std::cout << "evaluated " << report.items.size() << " items (checkpoint step " << step
              << ")\n";
    std::cout << "toxicity " << report.mean_toxicity << " +/- " << report.std_toxicity
              << ", faithfulness " << report.mean_faithfulness << " +/- "
              << report.std_faithfulness << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& values_csv,
               const std::string& data_path, const std::string& eval_path,
               const std::string& out_dir) {
    dbc::RunConfig config = resolve_config(common);
    std::vector<double> values;
    {
        std::stringstream ss(values_csv);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(dbc::trim(cell)));
            } catch (const std::exception&) {
                throw dbc::ValidationError("bad alpha value '" + cell + "'");
            }
        }
    }
    const auto dataset = dbc::load_dataset(data_path);
    const auto eval_set = eval_path.empty() ? dataset : dbc::load_dataset(eval_path);
    const dbc::BackendSuite suite = dbc::make_suite(config.backends);

    config.train.checkpoint_dir.clear();  // sweep runs keep no checkpoints
    dbc::echo_config(config, out_dir);
    const dbc::AblationTable table =
        dbc::ablate_alpha(config.train, dataset, eval_set, values, suite, config.eval_gen);
    const fs::path csv_path = fs::path(out_dir) / "ablation.csv";
    std::ofstream out(csv_path);
    if (!out) throw dbc::Error("cannot write " + csv_path.string());
    out << table.to_csv();
    std::cout << table.to_csv();
    return 0;
}

int cmd_analyze_patterns(const std::string& pairs_path, const std::string& rules_path,
                         const std::string& out_csv) {
    const dbc::PatternRules rules =
        rules_path.empty() ? dbc::PatternRules{} : dbc::PatternRules::load(rules_path);

    std::ifstream in(pairs_path);
    if (!in) throw dbc::ValidationError("cannot open pairs file: " + pairs_path);
    std::vector<dbc::PromptResponse> pairs;
    std::vector<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (dbc::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw dbc::ValidationError(pairs_path + ":" + std::to_string(line_no) +
                                       ": malformed JSON: " + e.what());
        }
        pairs.push_back({j.value("prompt", std::string()), j.value("response", std::string())});
        ids.push_back(j.value("id", std::to_string(line_no)));
    }

    std::ofstream csv(out_csv);
    if (!csv) throw dbc::Error("cannot write " + out_csv);
    csv << "id,empty,abstention,repetitive,non_sequitur,punctuation\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const dbc::PatternFlags f = dbc::detect_patterns(pairs[i].prompt, pairs[i].response, rules);
        csv << ids[i] << ',' << f.empty << ',' << f.abstention << ',' << f.repetitive << ','
            << f.non_sequitur << ',' << f.punctuation << '\n';
    }
    const dbc::PatternReport report = dbc::pattern_report(pairs, rules);
    std::cout << report.to_markdown();
    return 0;
}

int cmd_stats(const std::string& data_path, bool over_sources) {
    const auto samples = dbc::load_dataset(data_path);
    dbc::StatsOptions options;
    dbc::HeuristicNer ner;
    if (over_sources) options.source_ner = &ner;
    const dbc::DatasetStats stats = dbc::compute_stats(samples, options);
    std::cout.setf(std::ios::fixed);
    std::cout.precision(2);
    std::cout << "n_samples=" << stats.n_samples << "\n";
    std::cout << "pct_with_entities=" << stats.pct_with_entities << "\n";
    std::cout << "pct_toxic_negatives=" << stats.pct_toxic_negatives
              << (stats.no_negatives ? " (no negatives)" : "") << "\n";
    std::cout << "positives_per_sample=" << stats.positives_per_sample << "\n";
    return 0;
}

int cmd_correlate(const std::string& table_path, const std::string& transform) {
    const dbc::DegradationTable table = dbc::DegradationTable::from_csv(table_path);
    const dbc::SizeTransform t = transform == "linear" ? dbc::SizeTransform::linear
                                                       : dbc::SizeTransform::log;
    const dbc::CorrelationReport report = dbc::degradation_correlation(table, t);
    std::cout.setf(std::ios::fixed);
    std::cout.precision(6);
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
        std::cout << "column " << report.columns[c] << " r=" << report.per_column[c] << "\n";
    }
    std::cout << "overall " << report.overall << " (mean of per-column correlations)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contrastive debiasing pipeline: augmentation, training, evaluation"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string in_path, out_path, data_path, eval_path, checkpoint_path, report_dir;
    std::string pairs_path, rules_path, table_path, values_csv = "1,2,4,8,16";
    std::string transform = "log";
    bool over_sources = false;
    uint64_t seed_value = 0;

    CLI::App* augment = app.add_subcommand("augment", "run the augmentation pipeline");
    augment->add_option("--in", in_path, "input dataset (JSONL)")->required();
    augment->add_option("--out", out_path, "output dataset (JSONL)")->required();
    augment->add_option("--config", common.config_path, "config file (JSON)");
    augment->add_option("--seed", seed_value, "seed override");

    CLI::App* train = app.add_subcommand("train", "train on an augmented dataset");
    train->add_option("--data", data_path, "augmented dataset (JSONL)")->required();
    train->add_option("--config", common.config_path, "config file (JSON)");
    train->add_option("--out", out_path, "run output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "generate and score summaries");
    eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    eval->add_option("--data", data_path, "dataset (JSONL)")->required();
    eval->add_option("--report", report_dir, "report output directory")->required();
    eval->add_option("--config", common.config_path, "config file (JSON)");

    CLI::App* ablate = app.add_subcommand("ablate-alpha", "alpha sweep: train + eval per value");
    ablate->add_option("--values", values_csv, "comma-separated alpha values");
    ablate->add_option("--data", data_path, "training dataset (JSONL)")->required();
    ablate->add_option("--eval-data", eval_path, "held-out eval dataset (JSONL)");
    ablate->add_option("--out", out_path, "output directory")->required();
    ablate->add_option("--config", common.config_path, "config file (JSON)");

    CLI::App* patterns = app.add_subcommand("analyze-patterns", "flag degenerate generations");
    patterns->add_option("--pairs", pairs_path, "prompt/response pairs (JSONL)")->required();
    patterns->add_option("--rules", rules_path, "pattern rules file");
    patterns->add_option("--out", out_path, "per-item flags CSV")->required();

    CLI::App* stats = app.add_subcommand("stats", "dataset statistics");
    stats->add_option("--data", data_path, "dataset (JSONL)")->required();
    stats->add_flag("--entities-over-sources", over_sources,
                    "count entity coverage over sources instead of summaries");

    CLI::App* correlate = app.add_subcommand("correlate", "degradation-vs-size correlations");
    correlate->add_option("--table", table_path, "degradation table CSV")->required();
    correlate->add_option("--transform", transform, "log|linear")
        ->check(CLI::IsMember({"log", "linear"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::endl;
        return 1;
    }

    try {
        if (augment->parsed() && augment->count("--seed") > 0) common.seed_flag = seed_value;
        if (augment->parsed()) return cmd_augment(common, in_path, out_path);
        if (train->parsed()) return cmd_train(common, data_path, out_path);
        if (eval->parsed()) return cmd_eval(common, checkpoint_path, data_path, report_dir);
        if (ablate->parsed()) return cmd_ablate(common, values_csv, data_path, eval_path, out_path);
        if (patterns->parsed()) return cmd_analyze_patterns(pairs_path, rules_path, out_path);
        if (stats->parsed()) return cmd_stats(data_path, over_sources);
        if (correlate->parsed()) return cmd_correlate(table_path, transform);
    } catch (const dbc::ValidationError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}
