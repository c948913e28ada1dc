#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "pinv/io.hpp"
#include "pinv/pipeline.hpp"
#include "pinv/png_io.hpp"

namespace {

using namespace pinv;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

void add_config_options(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file; flags override file values");
    cmd->add_option("--backend", cfg.backend, "synthetic | remote");
    cmd->add_option("--generator-url", cfg.generator_url);
    cmd->add_option("--embedder-url", cfg.embedder_url);
    cmd->add_option("--mutator-url", cfg.mutator_url);
    cmd->add_option("--scorer-url", cfg.scorer_url);
    cmd->add_option("--bearer-token", cfg.bearer_token);
    cmd->add_option("--target-subject", cfg.target_subject);
    cmd->add_option("--target-description", cfg.target_description);
    cmd->add_option("--target-style", cfg.target_style);
    cmd->add_option("--target-image", cfg.target_image_path, "PNG target instead of a prompt");
    cmd->add_option("--reference-prompt", cfg.reference_prompt);
    cmd->add_option("--initial-subject", cfg.initial_subject,
                    "fuzz-phase seed subject when the RL phase is skipped");
    cmd->add_option("--rl-budget", cfg.rl_budget);
    cmd->add_option("--fuzz-budget", cfg.fuzz_budget);
    cmd->add_option("--max-len", cfg.max_len);
    cmd->add_flag("--phase1-only", [&cfg](int64_t) { cfg.run_phase2 = false; },
                  "skip the fuzz phase");
    cmd->add_flag("--phase2-only", [&cfg](int64_t) { cfg.run_phase1 = false; },
                  "skip the RL phase");
    cmd->add_option("--seeds", cfg.seeds, "run seeds");
    cmd->add_option("--output-dir", cfg.output_dir);
    cmd->add_option("--world-seed", cfg.synthetic.seed, "synthetic world seed");
    cmd->add_option("--embed-dim", cfg.synthetic.embed_dim);
    cmd->add_option("--hidden-dim", cfg.synthetic.hidden_dim);
    cmd->add_option("--vocab-size", cfg.synthetic.vocab_size);
    cmd->add_option("--il-epochs", cfg.il.epochs);
    cmd->add_option("--il-lr", cfg.il.learning_rate);
    cmd->add_option("--il-batch", cfg.il.batch_size);
    cmd->add_option("--il-trajectories", cfg.il.n_trajectories);
    cmd->add_option("--gamma", cfg.ppo.gamma);
    cmd->add_option("--clip-eps", cfg.ppo.clip_eps);
    cmd->add_option("--gae-lambda", cfg.ppo.gae_lambda);
    cmd->add_option("--actor-lr", cfg.ppo.actor_lr);
    cmd->add_option("--critic-lr", cfg.ppo.critic_lr);
    cmd->add_option("--update-every", cfg.ppo.update_every);
    cmd->add_option("--ppo-epochs", cfg.ppo.epochs_per_update);
    cmd->add_option("--max-epochs", cfg.ppo.max_epochs);
    cmd->add_option("--use-shaping", cfg.ppo.use_shaping);
    cmd->add_option("--beta", cfg.potential.beta, "potential scaling coefficient");
    cmd->add_option("--pool-capacity", cfg.fuzz.pool_capacity);
    cmd->add_option("--subject-only-queries", cfg.fuzz.subject_only_queries);
    cmd->add_option("--exploration-c", cfg.fuzz.exploration_c);
    cmd->add_option("--noise-sigma", cfg.defense.noise_sigma);
    cmd->add_option("--grid", cfg.defense.grid);
    cmd->add_option("--shift-limit", cfg.defense.shift_limit);
    cmd->add_option("--wm-text", cfg.defense.wm_text);
    cmd->add_option("--wm-font-px", cfg.defense.wm_font_px);
    cmd->add_option("--wm-row-gap", cfg.defense.wm_row_gap);
    cmd->add_option("--wm-col-gap", cfg.defense.wm_col_gap);
    cmd->add_option("--wm-alpha", cfg.defense.wm_alpha);
}

// File values load first, then CLI11 re-applies flag overrides on top.
RunConfig resolve_config(CLI::App* cmd, const RunConfig& flag_values,
                         const std::string& config_path) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = run_config_from_json(read_text_file(config_path));
    RunConfig merged = cfg;
    // Re-apply every flag the user actually passed.
    const RunConfig defaults;
    auto passed = [&](const std::string& name) { return cmd->count(name) > 0; };
    if (passed("--backend")) merged.backend = flag_values.backend;
    if (passed("--generator-url")) merged.generator_url = flag_values.generator_url;
    if (passed("--embedder-url")) merged.embedder_url = flag_values.embedder_url;
    if (passed("--mutator-url")) merged.mutator_url = flag_values.mutator_url;
    if (passed("--scorer-url")) merged.scorer_url = flag_values.scorer_url;
    if (passed("--bearer-token")) merged.bearer_token = flag_values.bearer_token;
    if (passed("--target-subject")) merged.target_subject = flag_values.target_subject;
    if (passed("--target-description")) merged.target_description = flag_values.target_description;
    if (passed("--target-style")) merged.target_style = flag_values.target_style;
    if (passed("--target-image")) merged.target_image_path = flag_values.target_image_path;
    if (passed("--reference-prompt")) merged.reference_prompt = flag_values.reference_prompt;
    if (passed("--initial-subject")) merged.initial_subject = flag_values.initial_subject;
    if (passed("--rl-budget")) merged.rl_budget = flag_values.rl_budget;
    if (passed("--fuzz-budget")) merged.fuzz_budget = flag_values.fuzz_budget;
    if (passed("--max-len")) merged.max_len = flag_values.max_len;
    if (passed("--phase1-only")) merged.run_phase2 = false;
    if (passed("--phase2-only")) merged.run_phase1 = false;
    if (passed("--seeds")) merged.seeds = flag_values.seeds;
    if (passed("--output-dir")) merged.output_dir = flag_values.output_dir;
    if (passed("--world-seed")) merged.synthetic.seed = flag_values.synthetic.seed;
    if (passed("--embed-dim")) merged.synthetic.embed_dim = flag_values.synthetic.embed_dim;
    if (passed("--hidden-dim")) merged.synthetic.hidden_dim = flag_values.synthetic.hidden_dim;
    if (passed("--vocab-size")) merged.synthetic.vocab_size = flag_values.synthetic.vocab_size;
    if (passed("--il-epochs")) merged.il.epochs = flag_values.il.epochs;
    if (passed("--il-lr")) merged.il.learning_rate = flag_values.il.learning_rate;
    if (passed("--il-batch")) merged.il.batch_size = flag_values.il.batch_size;
    if (passed("--il-trajectories")) merged.il.n_trajectories = flag_values.il.n_trajectories;
    if (passed("--gamma")) merged.ppo.gamma = flag_values.ppo.gamma;
    if (passed("--clip-eps")) merged.ppo.clip_eps = flag_values.ppo.clip_eps;
    if (passed("--gae-lambda")) merged.ppo.gae_lambda = flag_values.ppo.gae_lambda;
    if (passed("--actor-lr")) merged.ppo.actor_lr = flag_values.ppo.actor_lr;
    if (passed("--critic-lr")) merged.ppo.critic_lr = flag_values.ppo.critic_lr;
    if (passed("--update-every")) merged.ppo.update_every = flag_values.ppo.update_every;
    if (passed("--ppo-epochs")) merged.ppo.epochs_per_update = flag_values.ppo.epochs_per_update;
    if (passed("--max-epochs")) merged.ppo.max_epochs = flag_values.ppo.max_epochs;
    if (passed("--use-shaping")) merged.ppo.use_shaping = flag_values.ppo.use_shaping;
    if (passed("--beta")) merged.potential.beta = flag_values.potential.beta;
    if (passed("--pool-capacity")) merged.fuzz.pool_capacity = flag_values.fuzz.pool_capacity;
    if (passed("--subject-only-queries")) {
        merged.fuzz.subject_only_queries = flag_values.fuzz.subject_only_queries;
    }
    if (passed("--exploration-c")) merged.fuzz.exploration_c = flag_values.fuzz.exploration_c;
    if (passed("--noise-sigma")) merged.defense.noise_sigma = flag_values.defense.noise_sigma;
    if (passed("--grid")) merged.defense.grid = flag_values.defense.grid;
    if (passed("--shift-limit")) merged.defense.shift_limit = flag_values.defense.shift_limit;
    if (passed("--wm-text")) merged.defense.wm_text = flag_values.defense.wm_text;
    if (passed("--wm-font-px")) merged.defense.wm_font_px = flag_values.defense.wm_font_px;
    if (passed("--wm-row-gap")) merged.defense.wm_row_gap = flag_values.defense.wm_row_gap;
    if (passed("--wm-col-gap")) merged.defense.wm_col_gap = flag_values.defense.wm_col_gap;
    if (passed("--wm-alpha")) merged.defense.wm_alpha = flag_values.defense.wm_alpha;

    // Environment fills endpoints left empty by file and flags.
    if (merged.generator_url.empty()) merged.generator_url = env_or("PINV_GENERATOR_URL", "");
    if (merged.embedder_url.empty()) merged.embedder_url = env_or("PINV_EMBEDDER_URL", "");
    if (merged.mutator_url.empty()) merged.mutator_url = env_or("PINV_MUTATOR_URL", "");
    if (merged.scorer_url.empty()) merged.scorer_url = env_or("PINV_SCORER_URL", "");
    if (merged.bearer_token.empty()) merged.bearer_token = env_or("PINV_TOKEN", "");
    return merged;
}

void print_report(const RunReport& r) {
    std::cout << "best prompt:      " << r.best_prompt << "\n"
              << "image similarity: " << format_double(r.image_similarity) << "\n";
    if (r.textual) {
        std::cout << "bertscore P/R/F1: " << format_double(r.textual->precision) << " / "
                  << format_double(r.textual->recall) << " / " << format_double(r.textual->f1)
                  << "\n"
                  << "sentence score:   " << format_double(r.textual->sentence) << "\n";
    }
    std::cout << "queries used:     rl=" << r.rl_queries_used << " fuzz=" << r.fuzz_queries_used
              << "\n"
              << "wall time:        " << format_double(r.wall_time_s) << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"black-box prompt inversion toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    auto* run_cmd = app.add_subcommand("run", "full pipeline: IL warm-start, PPO, fuzz");
    add_config_options(run_cmd, cfg, config_path);

    auto* defend_cmd =
        app.add_subcommand("defend-eval", "run the attack against a defended target image");
    std::string defense_name = "noise";
    add_config_options(defend_cmd, cfg, config_path);
    defend_cmd->add_option("--defense", defense_name, "none | noise | puzzle | watermark")
        ->required();

    auto* report_cmd = app.add_subcommand("report", "compare runs and merge curves");
    std::vector<std::string> run_dirs;
    std::string report_out = "report_out";
    report_cmd->add_option("dirs", run_dirs, "run directories")->required();
    report_cmd->add_option("--output-dir", report_out);

    auto* defense_cmd = app.add_subcommand("defense-apply", "apply a defense to a PNG");
    std::string def_in, def_out, def_kind = "noise";
    uint64_t def_seed = 0;
    DefenseConfig def_cfg;
    defense_cmd->add_option("--in", def_in, "input PNG")->required();
    defense_cmd->add_option("--out", def_out, "output PNG")->required();
    defense_cmd->add_option("--defense", def_kind, "noise | puzzle | watermark")->required();
    defense_cmd->add_option("--seed", def_seed);
    defense_cmd->add_option("--noise-sigma", def_cfg.noise_sigma);
    defense_cmd->add_option("--grid", def_cfg.grid);
    defense_cmd->add_option("--shift-limit", def_cfg.shift_limit);
    defense_cmd->add_option("--wm-text", def_cfg.wm_text);
    defense_cmd->add_option("--wm-font-px", def_cfg.wm_font_px);
    defense_cmd->add_option("--wm-row-gap", def_cfg.wm_row_gap);
    defense_cmd->add_option("--wm-col-gap", def_cfg.wm_col_gap);
    defense_cmd->add_option("--wm-alpha", def_cfg.wm_alpha);

    auto* oracle_cmd = app.add_subcommand(
        "brute-force-oracle", "synthetic-only exhaustive search over short subjects");
    std::string oracle_target_subject, oracle_target_image;
    int oracle_max_words = 3;
    int oracle_lexicon = 8;
    uint64_t oracle_world_seed = 0;
    int oracle_embed_dim = 64;
    oracle_cmd->add_option("--target-subject", oracle_target_subject);
    oracle_cmd->add_option("--target-image", oracle_target_image, "PNG target");
    oracle_cmd->add_option("--max-words", oracle_max_words);
    oracle_cmd->add_option("--lexicon-size", oracle_lexicon);
    oracle_cmd->add_option("--world-seed", oracle_world_seed);
    oracle_cmd->add_option("--embed-dim", oracle_embed_dim);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const RunConfig resolved = resolve_config(run_cmd, cfg, config_path);
            print_report(run_pipeline(resolved));
        } else if (defend_cmd->parsed()) {
            RunConfig resolved = resolve_config(defend_cmd, cfg, config_path);
            resolved.defense_kind = defense_name;
            print_report(evaluate_robustness(resolved, defense_kind_from_name(defense_name)));
        } else if (report_cmd->parsed()) {
            std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
            const ComparisonResult res = report_runs(dirs);
            std::filesystem::create_directories(report_out);
            write_text_file(std::filesystem::path(report_out) / "comparison.txt", res.table_text);
            write_text_file(std::filesystem::path(report_out) / "comparison.csv", res.table_csv);
            write_text_file(std::filesystem::path(report_out) / "merged_ppo_curve.csv",
                            merge_curves_csv(dirs, "ppo_curve.csv", "episode"));
            write_text_file(std::filesystem::path(report_out) / "merged_fuzz_curve.csv",
                            merge_curves_csv(dirs, "curve.csv", "iteration"));
            std::cout << res.table_text;
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        } else if (defense_cmd->parsed()) {
            def_cfg.validate();
            const ImageBuffer img = read_png_file(def_in);
            Rng rng(def_seed ^ hash_string("defense"));
            write_png_file(def_out,
                           apply_defense(img, defense_kind_from_name(def_kind), def_cfg, rng));
            std::cout << "wrote " << def_out << "\n";
        } else if (oracle_cmd->parsed()) {
            SyntheticConfig synth;
            synth.seed = oracle_world_seed;
            synth.embed_dim = oracle_embed_dim;
            SyntheticEmbedder embedder(synth);
            EmbeddingVector target = [&] {
                if (!oracle_target_image.empty()) {
                    return embedder.embed_image(read_png_file(oracle_target_image));
                }
                if (oracle_target_subject.empty()) {
                    throw std::invalid_argument("need --target-subject or --target-image");
                }
                return embedder.embed_text(oracle_target_subject);
            }();
            const auto& words = core_word_list();
            if (oracle_lexicon < 1 || oracle_lexicon > int(words.size())) {
                throw std::invalid_argument("lexicon-size out of range");
            }
            std::vector<std::string> lexicon(words.begin(), words.begin() + oracle_lexicon);
            const BruteForceResult res =
                brute_force_best_subject(embedder, lexicon, oracle_max_words, target);
            std::cout << "candidates: " << res.candidates << "\n"
                      << "best score: " << format_double(res.best_score) << "\n"
                      << "best text:  " << res.best_text << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
