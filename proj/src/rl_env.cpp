#include "pinv/rl_env.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace pinv {

void Episode::validate() const {
    const size_t n = actions.size();
    if (states.size() != n + 1 || sparse_rewards.size() != n || shaped_rewards.size() != n) {
        throw std::logic_error("Episode: inconsistent lengths");
    }
    if (!potentials.empty() && gamma > 0.0) {
        if (potentials.size() != states.size()) {
            throw std::logic_error("Episode: potentials length mismatch");
        }
        const double gap = std::abs(discounted_return(gamma, true) -
                                    (discounted_return(gamma, false) - potentials.front()));
        if (gap > 1e-9) throw std::logic_error("Episode: telescoping identity violated");
    }
}

double Episode::discounted_return(double gamma, bool shaped, size_t from) const {
    const auto& rewards = shaped ? shaped_rewards : sparse_rewards;
    double acc = 0.0;
    double g = 1.0;
    for (size_t t = from; t < rewards.size(); ++t) {
        acc += g * rewards[t];
        g *= gamma;
    }
    return acc;
}

PromptEnv::PromptEnv(const SyntheticVocab& vocab, Generator& generator, Embedder& embedder,
                     QueryLedger& ledger, PotentialConfig potential_cfg, size_t max_len)
    : vocab_(vocab),
      generator_(generator),
      embedder_(embedder),
      ledger_(ledger),
      potential_cfg_(potential_cfg),
      max_len_(max_len) {
    potential_cfg_.validate();
    if (max_len_ == 0) throw std::invalid_argument("PromptEnv: max_len must be positive");
}

EnvState PromptEnv::reset(const EmbeddingVector& target) const {
    EnvState s{TokenSequence(vocab_.eos_id(), max_len_), target, 0, false};
    return s;
}

std::string PromptEnv::detokenize(const TokenSequence& prefix) const {
    return vocab_.detokenize(prefix.tokens());
}

double PromptEnv::state_potential(const EnvState& state) const {
    const std::string text = detokenize(state.prefix);
    if (text.empty()) return 0.0;  // Phi of the empty prefix is defined as 0
    return potential(embedder_.embed_text(text), state.target_embedding, potential_cfg_);
}

StepResult PromptEnv::step(const EnvState& state, TokenId action) {
    if (state.done) throw std::logic_error("PromptEnv::step on a done state");
    if (action < 0 || action >= static_cast<TokenId>(vocab_.size())) {
        throw std::invalid_argument("PromptEnv::step: action outside vocabulary");
    }

    TokenSequence next_prefix = state.prefix.appended(action);
    const bool terminal = next_prefix.ends_with_eos() || next_prefix.size() == max_len_;
    EnvState next{std::move(next_prefix), state.target_embedding, state.step + 1, terminal};

    const double phi_s = state_potential(state);
    double sparse = 0.0;
    double shaped = 0.0;
    if (terminal) {
        const std::string prompt_text = detokenize(next.prefix);
        const ImageBuffer image = generator_.generate(prompt_text, ledger_);
        sparse = cosine(embedder_.embed_image(image), state.target_embedding);
        shaped = sparse + potential_shaping_term(potential_cfg_.gamma, phi_s, 0.0);
    } else {
        shaped = potential_shaping_term(potential_cfg_.gamma, phi_s, state_potential(next));
    }
    return StepResult{std::move(next), sparse, shaped, terminal};
}

Episode PromptEnv::rollout(const Policy& policy, const EmbeddingVector& target) {
    const auto t0 = std::chrono::steady_clock::now();
    Episode ep;
    ep.gamma = potential_cfg_.gamma;
    EnvState state = reset(target);
    ep.states.push_back(state);
    ep.potentials.push_back(state_potential(state));
    while (!state.done) {
        const ActionChoice choice = policy(state);
        StepResult sr = step(state, choice.action);
        ep.actions.push_back(choice.action);
        ep.log_probs.push_back(choice.log_prob);
        ep.values.push_back(choice.value);
        ep.sparse_rewards.push_back(sr.sparse_reward);
        ep.shaped_rewards.push_back(sr.shaped_reward);
        state = sr.next_state;
        ep.states.push_back(state);
        ep.potentials.push_back(state_potential(state));
        if (sr.terminal) {
            ep.final_prompt = detokenize(state.prefix);
            ep.final_score = sr.sparse_reward;
        }
    }
    ep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ep.validate();
    return ep;
}

TableMdp shaped_mdp(const TableMdp& mdp, const std::vector<double>& phi) {
    if (phi.size() != size_t(mdp.num_states)) {
        throw std::invalid_argument("shaped_mdp: phi size mismatch");
    }
    TableMdp out = mdp;
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                const size_t i = (size_t(s) * mdp.num_actions + a) * mdp.num_states + s2;
                out.reward[i] = mdp.reward[i] + potential_shaping_term(mdp.gamma, phi[s], phi[s2]);
            }
        }
    }
    return out;
}

TableMdp random_mdp(Rng& rng, int max_states, int max_actions) {
    TableMdp mdp;
    mdp.num_states = rng.uniform_int(2, max_states);
    mdp.num_actions = rng.uniform_int(2, max_actions);
    mdp.gamma = rng.uniform(0.5, 0.95);
    const size_t n = size_t(mdp.num_states) * mdp.num_actions * mdp.num_states;
    mdp.transition.resize(n);
    mdp.reward.resize(n);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            double total = 0.0;
            const size_t base = (size_t(s) * mdp.num_actions + a) * mdp.num_states;
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                const double w = rng.next_double() + 1e-3;
                mdp.transition[base + s2] = w;
                total += w;
                mdp.reward[base + s2] = rng.uniform(-1.0, 1.0);
            }
            for (int s2 = 0; s2 < mdp.num_states; ++s2) mdp.transition[base + s2] /= total;
        }
    }
    return mdp;
}

ValueIterationResult value_iteration(const TableMdp& mdp, int max_iterations, double tolerance) {
    ValueIterationResult out;
    out.values.assign(mdp.num_states, 0.0);
    out.q_values.assign(size_t(mdp.num_states) * mdp.num_actions, 0.0);
    std::vector<double> next(mdp.num_states, 0.0);
    for (int it = 0; it < max_iterations; ++it) {
        double delta = 0.0;
        for (int s = 0; s < mdp.num_states; ++s) {
            double best = -1e300;
            for (int a = 0; a < mdp.num_actions; ++a) {
                double q = 0.0;
                for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                    q += mdp.p(s, a, s2) * (mdp.r(s, a, s2) + mdp.gamma * out.values[s2]);
                }
                out.q_values[size_t(s) * mdp.num_actions + a] = q;
                best = std::max(best, q);
            }
            next[s] = best;
            delta = std::max(delta, std::abs(next[s] - out.values[s]));
        }
        out.values = next;
        out.iterations = it + 1;
        if (delta < tolerance) break;
    }
    // One final Q sweep so q_values are consistent with the converged V.
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            double q = 0.0;
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                q += mdp.p(s, a, s2) * (mdp.r(s, a, s2) + mdp.gamma * out.values[s2]);
            }
            out.q_values[size_t(s) * mdp.num_actions + a] = q;
        }
    }
    return out;
}

int unique_greedy_action(const ValueIterationResult& vi, int state, int num_actions, double gap) {
    int best = 0;
    for (int a = 1; a < num_actions; ++a) {
        if (vi.q(state, a, num_actions) > vi.q(state, best, num_actions)) best = a;
    }
    for (int a = 0; a < num_actions; ++a) {
        if (a == best) continue;
        if (vi.q(state, best, num_actions) - vi.q(state, a, num_actions) < gap) return -1;
    }
    return best;
}

}  // namespace pinv
