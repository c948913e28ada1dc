#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pinv/fuzz.hpp"
#include "pinv/imitation.hpp"
#include "pinv/ppo.hpp"
#include "pinv/rl_env.hpp"

namespace pinv {

// Shortest-round-trip decimal form, stable across runs.
std::string format_double(double v);

std::string episode_to_json_line(const Episode& ep);
void write_episodes_jsonl(const std::filesystem::path& path, const std::vector<Episode>& episodes);

std::string fuzz_record_to_json_line(const FuzzIterationRecord& rec);
void write_pool_history(const std::filesystem::path& path,
                        const std::vector<FuzzIterationRecord>& history);

// Two-column loss curve: epoch, mean_loss.
void write_il_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss_curve);

// Three-column reward curve: episode, terminal_similarity, shaped_return.
void write_ppo_curve_csv(const std::filesystem::path& path,
                         const std::vector<EpisodePoint>& curve);

// Two-column pool curve: iteration, pool_best.
void write_fuzz_curve_csv(const std::filesystem::path& path,
                          const std::vector<FuzzIterationRecord>& history);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pinv
