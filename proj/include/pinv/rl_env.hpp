#pragma once

#include <functional>
#include <vector>

#include "pinv/backends.hpp"
#include "pinv/core.hpp"
#include "pinv/similarity.hpp"

namespace pinv {

// gamma * Phi(s') - Phi(s). Terminal transitions pass phi_next = 0; the
// finite-MDP test harness below reuses the same term.
inline double potential_shaping_term(double gamma, double phi_s, double phi_next) {
    return gamma * phi_next - phi_s;
}

struct EnvState {
    TokenSequence prefix;
    EmbeddingVector target_embedding;
    int step = 0;
    bool done = false;
};

struct StepResult {
    EnvState next_state;
    double sparse_reward = 0.0;
    double shaped_reward = 0.0;
    bool terminal = false;
};

struct Episode {
    std::vector<EnvState> states;  // s_0 .. s_T+1 (|actions| + 1 entries)
    std::vector<TokenId> actions;
    std::vector<double> sparse_rewards;
    std::vector<double> shaped_rewards;
    std::vector<double> potentials;  // Phi(s_t) per state
    std::vector<double> log_probs;   // filled by policy-driven rollouts
    std::vector<double> values;
    std::string final_prompt;
    double final_score = 0.0;
    double gamma = 0.0;  // discount the rewards were shaped with
    double wall_time_s = 0.0;

    // Length consistency, and when potentials are recorded the telescoped
    // shaped return must equal the sparse return minus Phi(s_0) to 1e-9.
    void validate() const;
    double discounted_return(double gamma, bool shaped, size_t from = 0) const;
};

// Token-level MDP over a synthetic vocabulary: actions append tokens, the
// generator is invoked exactly once per episode at termination.
class PromptEnv {
public:
    PromptEnv(const SyntheticVocab& vocab, Generator& generator, Embedder& embedder,
              QueryLedger& ledger, PotentialConfig potential_cfg, size_t max_len = 20);

    EnvState reset(const EmbeddingVector& target) const;
    StepResult step(const EnvState& state, TokenId action);

    // Phi of a state: beta-scaled text/image cosine of the detokenized
    // prefix; 0 when the prefix renders to empty text.
    double state_potential(const EnvState& state) const;

    std::string detokenize(const TokenSequence& prefix) const;
    size_t vocab_size() const { return vocab_.size(); }
    size_t max_len() const { return max_len_; }
    const PotentialConfig& potential_config() const { return potential_cfg_; }

    struct ActionChoice {
        TokenId action = 0;
        double log_prob = 0.0;
        double value = 0.0;
    };
    using Policy = std::function<ActionChoice(const EnvState&)>;

    Episode rollout(const Policy& policy, const EmbeddingVector& target);

private:
    const SyntheticVocab& vocab_;
    Generator& generator_;
    Embedder& embedder_;
    QueryLedger& ledger_;
    PotentialConfig potential_cfg_;
    size_t max_len_;
};

// ---------------------------------------------------------------------------
// Finite tabular MDP, used by the shaping-invariance test suite.
// ---------------------------------------------------------------------------

struct TableMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> transition;  // [s][a][s'] row-normalized
    std::vector<double> reward;      // r(s, a, s')
    double gamma = 0.9;

    double p(int s, int a, int s2) const {
        return transition[(size_t(s) * num_actions + a) * num_states + s2];
    }
    double r(int s, int a, int s2) const {
        return reward[(size_t(s) * num_actions + a) * num_states + s2];
    }
};

// Same dynamics, rewards augmented with the potential shaping term.
TableMdp shaped_mdp(const TableMdp& mdp, const std::vector<double>& phi);

TableMdp random_mdp(Rng& rng, int max_states, int max_actions);

struct ValueIterationResult {
    std::vector<double> values;    // V*(s)
    std::vector<double> q_values;  // Q*(s, a), row-major
    int iterations = 0;

    double q(int s, int a, int num_actions) const { return q_values[size_t(s) * num_actions + a]; }
};

ValueIterationResult value_iteration(const TableMdp& mdp, int max_iterations = 100000,
                                     double tolerance = 1e-15);

// Greedy action when the argmax is unique by more than `gap`; -1 on ties.
int unique_greedy_action(const ValueIterationResult& vi, int state, int num_actions,
                         double gap = 1e-8);

}  // namespace pinv
