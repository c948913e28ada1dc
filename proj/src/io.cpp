#include "pinv/io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace pinv {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string episode_to_json_line(const Episode& ep) {
    json j;
    json states = json::array();
    for (const auto& s : ep.states) states.push_back(s.prefix.tokens());
    j["states"] = std::move(states);
    j["actions"] = ep.actions;
    j["sparse_rewards"] = ep.sparse_rewards;
    j["shaped_rewards"] = ep.shaped_rewards;
    j["final_prompt"] = ep.final_prompt;
    j["final_score"] = ep.final_score;
    j["wall_time_s"] = ep.wall_time_s;
    return j.dump();
}

void write_episodes_jsonl(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_episodes_jsonl: cannot open " + path.string());
    for (const auto& ep : episodes) os << episode_to_json_line(ep) << '\n';
}

std::string fuzz_record_to_json_line(const FuzzIterationRecord& rec) {
    json j;
    j["iteration"] = rec.iteration;
    j["operator"] = rec.operator_name;
    j["seed_rendered"] = rec.seed_rendered;
    j["child_rendered"] = rec.child_rendered;
    j["child_score"] = rec.child_score;
    j["pool_best"] = rec.pool_best;
    j["ledger_used"] = rec.ledger_used;
    j["skipped"] = rec.skipped;
    return j.dump();
}

void write_pool_history(const std::filesystem::path& path,
                        const std::vector<FuzzIterationRecord>& history) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_pool_history: cannot open " + path.string());
    for (const auto& rec : history) os << fuzz_record_to_json_line(rec) << '\n';
}

void write_il_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss_curve) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_il_loss_csv: cannot open " + path.string());
    os << "epoch,mean_loss\n";
    for (size_t i = 0; i < loss_curve.size(); ++i) {
        os << i << ',' << format_double(loss_curve[i]) << '\n';
    }
}

void write_ppo_curve_csv(const std::filesystem::path& path,
                         const std::vector<EpisodePoint>& curve) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_ppo_curve_csv: cannot open " + path.string());
    os << "episode,terminal_similarity,shaped_return\n";
    for (const auto& p : curve) {
        os << p.episode << ',' << format_double(p.terminal_similarity) << ','
           << format_double(p.shaped_return) << '\n';
    }
}

void write_fuzz_curve_csv(const std::filesystem::path& path,
                          const std::vector<FuzzIterationRecord>& history) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_fuzz_curve_csv: cannot open " + path.string());
    os << "iteration,pool_best\n";
    for (const auto& rec : history) {
        os << rec.iteration << ',' << format_double(rec.pool_best) << '\n';
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_text_file: cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_text_file: cannot open " + path.string());
    os << content;
}

}  // namespace pinv
