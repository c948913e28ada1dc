#pragma once

#include <vector>

#include "pinv/policy.hpp"
#include "pinv/rl_env.hpp"

namespace pinv {

struct ExpertTrajectory {
    struct Pair {
        std::vector<double> hidden;
        TokenId next_token;
    };
    std::vector<Pair> pairs;
};

struct IlConfig {
    int n_trajectories = 10;
    int epochs = 2000;
    double learning_rate = 3e-4;
    int batch_size = 8;
    bool sample_decode = false;  // greedy by default; sampling behind this flag
    uint64_t seed = 0;
    size_t max_len = 20;
};

// Decodes the frozen captioner on the target and replays the sequence to
// record (hidden, next-token) pairs.
std::vector<ExpertTrajectory> collect_expert(Captioner& captioner, const EmbeddingVector& target,
                                             const IlConfig& cfg);

struct IlResult {
    std::vector<double> loss_curve;  // index 0 = loss before any update
};

// Cross-entropy against next-token targets through the frozen head. Only the
// adapter is updated.
IlResult train_il(PolicyNet& policy, const std::vector<ExpertTrajectory>& trajectories,
                  const IlConfig& cfg);

// Direct scalar recomputation of the dataset loss, used as the oracle the
// curve is checked against.
double il_dataset_loss(const PolicyNet& policy, const std::vector<ExpertTrajectory>& trajectories);

}  // namespace pinv
