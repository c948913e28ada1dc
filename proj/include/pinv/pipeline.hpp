#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pinv/backends.hpp"
#include "pinv/defenses.hpp"
#include "pinv/fuzz.hpp"
#include "pinv/imitation.hpp"
#include "pinv/ppo.hpp"
#include "pinv/similarity.hpp"

namespace pinv {

// Everything a run needs, fully defaulted; the resolved form is persisted to
// output_dir/config.resolved and reproduces the run byte-for-byte.
struct RunConfig {
    std::string backend = "synthetic";  // synthetic | remote

    // remote endpoints (base URLs); env vars PINV_*_URL / PINV_TOKEN fill
    // these when flags and file leave them empty
    std::string generator_url;
    std::string embedder_url;
    std::string mutator_url;
    std::string scorer_url;
    std::string bearer_token;
    double remote_timeout_s = 60.0;
    int remote_retries = 2;

    // synthetic world; the world seed is independent of run seeds so every
    // seed attacks the same instance
    SyntheticConfig synthetic;

    // target: hidden prompt for synthetic runs, or an external image
    std::string target_subject = "charlie delta echo";
    std::string target_description;
    std::string target_style;
    std::string target_image_path;
    std::string reference_prompt;  // ground truth for textual metrics, optional
    // caption-style seed for the fuzz phase when the RL phase is skipped or
    // unavailable (remote backends)
    std::string initial_subject;

    bool run_phase1 = true;
    bool run_phase2 = true;
    uint64_t rl_budget = 100;
    uint64_t fuzz_budget = 100;
    size_t max_len = 20;

    IlConfig il;
    PpoConfig ppo;
    PotentialConfig potential;
    FuzzConfig fuzz;
    DefenseConfig defense;
    std::string defense_kind = "none";

    std::vector<uint64_t> seeds = {0};
    std::string output_dir = "runs/out";

    void validate() const;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

struct TextualAlignment {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double sentence = 0.0;
};

struct RunReport {
    std::string best_prompt;
    double image_similarity = -1.0;
    std::optional<TextualAlignment> textual;
    uint64_t rl_queries_used = 0;
    uint64_t fuzz_queries_used = 0;
    double wall_time_s = 0.0;
};

std::string run_report_to_json(const RunReport& report);
RunReport run_report_from_json(const std::string& text);

// IL warm-start, PPO, then fuzz seeded with the best RL prompt; artifacts per
// seed under output_dir/seed_<n>/. Returns the report of the first seed.
RunReport run_pipeline(const RunConfig& cfg);

// Same pipeline with the chosen defense applied to the target image before
// the attack sees it.
RunReport evaluate_robustness(const RunConfig& cfg, DefenseKind defense);

struct ComparisonRow {
    std::string run_dir;
    RunReport report;
};

struct ComparisonResult {
    std::vector<ComparisonRow> rows;
    std::vector<std::string> warnings;  // unreadable run dirs, non-fatal
    std::string table_text;
    std::string table_csv;
};

ComparisonResult report_runs(const std::vector<std::filesystem::path>& run_dirs);

// Merged per-run series aligned by index: header run names, one row per
// episode/iteration. Missing points are empty cells.
std::string merge_curves_csv(const std::vector<std::filesystem::path>& run_dirs,
                             const std::string& curve_file, const std::string& index_column);

}  // namespace pinv
