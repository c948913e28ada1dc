#pragma once

#include <string>
#include <vector>

#include "pinv/policy.hpp"
#include "pinv/rl_env.hpp"

namespace pinv {

struct PpoConfig {
    double gamma = 0.98;
    double clip_eps = 0.2;
    double gae_lambda = 0.95;
    double actor_lr = 1e-4;
    double critic_lr = 5e-4;
    int update_every = 150;      // environment steps per collection phase
    int epochs_per_update = 4;   // optimization epochs per collected batch
    int max_epochs = 100;        // collection+update cycles cap
    bool use_shaping = true;
    // Runs the critic as V_hat - Phi with consistently shifted value targets;
    // updates are then mathematically identical to the unshaped run.
    bool critic_shift_phi = false;
    bool normalize_advantages = true;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    int early_stop_patience = 20;
    uint64_t seed = 0;

    void validate() const;
};

struct AdvantageBatch {
    std::vector<double> deltas;
    std::vector<double> advantages;
    std::vector<double> returns;  // value-regression targets
};

// Backward-recursive GAE over one segment. values carries the bootstrap
// entry, so |values| == |rewards| + 1; terminal successors contribute 0.
AdvantageBatch compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                           const std::vector<bool>& terminal_flags, const PpoConfig& cfg);

// Clipped-surrogate loss: -mean(min(rho*A, clip(rho)*A)).
double ppo_loss(const std::vector<double>& old_log_probs, const std::vector<double>& new_log_probs,
                const std::vector<double>& advantages, const PpoConfig& cfg);

// Scale-only batch normalization: divides by the batch std without centering,
// so every advantage keeps its sign.
std::vector<double> scale_normalize_advantages(std::vector<double> advantages);

struct EpisodePoint {
    int episode = 0;
    double terminal_similarity = 0.0;
    double shaped_return = 0.0;
};

struct PpoTrainResult {
    std::vector<EpisodePoint> curve;
    std::vector<Episode> episodes;
    std::string best_prompt;
    double best_score = -2.0;
    int cycles_run = 0;
    bool stopped_by_budget = false;
};

// Alternates whole-episode collection (>= update_every steps) with
// epochs_per_update optimization passes; stops cleanly on budget exhaustion,
// the cycle cap, or early-stop patience.
PpoTrainResult train_ppo(PolicyNet& policy, PromptEnv& env, Captioner& captioner,
                         const EmbeddingVector& target, const PpoConfig& cfg, QueryLedger& ledger);

}  // namespace pinv
