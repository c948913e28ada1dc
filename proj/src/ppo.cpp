#include "pinv/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pinv {

void PpoConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("PpoConfig: gamma in [0,1)");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("PpoConfig: eps in (0,1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
        throw std::invalid_argument("PpoConfig: lambda in [0,1]");
    }
    if (update_every < 1 || epochs_per_update < 1 || max_epochs < 1) {
        throw std::invalid_argument("PpoConfig: counts must be positive");
    }
}

AdvantageBatch compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                           const std::vector<bool>& terminal_flags, const PpoConfig& cfg) {
    cfg.validate();
    const size_t n = rewards.size();
    if (values.size() != n + 1 || terminal_flags.size() != n) {
        throw std::invalid_argument("compute_gae: length mismatch");
    }
    AdvantageBatch out;
    out.deltas.resize(n);
    out.advantages.resize(n);
    out.returns.resize(n);
    double next_adv = 0.0;
    for (size_t i = n; i-- > 0;) {
        const double next_value = terminal_flags[i] ? 0.0 : values[i + 1];
        out.deltas[i] = rewards[i] + cfg.gamma * next_value - values[i];
        next_adv = out.deltas[i] + cfg.gamma * cfg.gae_lambda * (terminal_flags[i] ? 0.0 : next_adv);
        out.advantages[i] = next_adv;
        out.returns[i] = out.advantages[i] + values[i];
    }
    return out;
}

double ppo_loss(const std::vector<double>& old_log_probs, const std::vector<double>& new_log_probs,
                const std::vector<double>& advantages, const PpoConfig& cfg) {
    cfg.validate();
    const size_t n = old_log_probs.size();
    if (new_log_probs.size() != n || advantages.size() != n || n == 0) {
        throw std::invalid_argument("ppo_loss: length mismatch");
    }
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(advantages[i])) throw std::invalid_argument("ppo_loss: non-finite advantage");
        const double ratio = std::exp(new_log_probs[i] - old_log_probs[i]);
        if (!std::isfinite(ratio)) throw std::runtime_error("ppo_loss: non-finite ratio");
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        acc += std::min(ratio * advantages[i], clipped * advantages[i]);
    }
    return -acc / double(n);
}

std::vector<double> scale_normalize_advantages(std::vector<double> advantages) {
    if (advantages.size() < 2) return advantages;
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= double(advantages.size());
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= double(advantages.size());
    const double sd = std::sqrt(var) + 1e-8;
    for (double& a : advantages) a /= sd;
    return advantages;
}

namespace {

struct Batch {
    std::vector<std::vector<double>> hiddens;
    std::vector<TokenId> actions;
    std::vector<double> old_log_probs;
    std::vector<double> advantages;
    std::vector<double> returns;
    std::vector<double> potentials;  // Phi(s_t), for the critic-shift mode

    size_t size() const { return actions.size(); }
};

}  // namespace

PpoTrainResult train_ppo(PolicyNet& policy, PromptEnv& env, Captioner& captioner,
                         const EmbeddingVector& target, const PpoConfig& cfg, QueryLedger& ledger) {
    cfg.validate();
    Rng action_rng(cfg.seed ^ hash_string("ppo_actions"));
    AdamOptimizer actor_opt(policy.adapter().tensors(), cfg.actor_lr);
    AdamOptimizer critic_opt(policy.value_head().tensors(), cfg.critic_lr);

    PpoTrainResult result;
    int episode_index = 0;
    int cycles_since_best = 0;

    for (int cycle = 0; cycle < cfg.max_epochs; ++cycle) {
        // ---- collection ----
        Batch batch;
        int steps = 0;
        while (steps < cfg.update_every) {
            if (ledger.exhausted()) {
                result.stopped_by_budget = true;
                break;
            }
            std::vector<std::vector<double>> ep_hiddens;
            auto policy_fn = [&](const EnvState& s) {
                CaptionerStep cs = captioner.step(s.prefix, s.target_embedding);
                PolicyOutput out = policy.forward(cs);
                auto [action, lp] = sample_action(out, action_rng);
                ep_hiddens.push_back(std::move(cs.hidden));
                return PromptEnv::ActionChoice{action, lp, out.value};
            };
            Episode ep = env.rollout(policy_fn, target);
            steps += static_cast<int>(ep.actions.size());

            const double shaped_return = ep.discounted_return(cfg.gamma, /*shaped=*/true);
            result.curve.push_back({episode_index, ep.final_score, shaped_return});
            if (ep.final_score > result.best_score) {
                result.best_score = ep.final_score;
                result.best_prompt = ep.final_prompt;
                cycles_since_best = 0;
            }
            ++episode_index;

            for (size_t t = 0; t < ep.actions.size(); ++t) {
                batch.hiddens.push_back(std::move(ep_hiddens[t]));
                batch.actions.push_back(ep.actions[t]);
                batch.old_log_probs.push_back(ep.log_probs[t]);
                batch.potentials.push_back(ep.potentials[t]);
            }

            // Per-episode GAE on the configured reward stream.
            const size_t n = ep.actions.size();
            std::vector<double> rewards(n);
            std::vector<double> values(n + 1, 0.0);
            std::vector<bool> terminals(n, false);
            terminals[n - 1] = true;
            for (size_t t = 0; t < n; ++t) {
                rewards[t] = cfg.use_shaping ? ep.shaped_rewards[t] : ep.sparse_rewards[t];
                values[t] = ep.values[t];
                if (cfg.critic_shift_phi) values[t] -= ep.potentials[t];
            }
            AdvantageBatch adv = compute_gae(rewards, values, terminals, cfg);
            batch.advantages.insert(batch.advantages.end(), adv.advantages.begin(),
                                    adv.advantages.end());
            batch.returns.insert(batch.returns.end(), adv.returns.begin(), adv.returns.end());

            result.episodes.push_back(std::move(ep));
        }
        if (batch.size() == 0) break;

        // ---- advantage normalization (scale-only, sign-preserving) ----
        std::vector<double> norm_adv = cfg.normalize_advantages
                                           ? scale_normalize_advantages(batch.advantages)
                                           : batch.advantages;

        // ---- optimization epochs ----
        const double inv_n = 1.0 / double(batch.size());
        for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
            actor_opt.zero_grad();
            critic_opt.zero_grad();
            for (size_t i = 0; i < batch.size(); ++i) {
                Tape tape;
                auto nodes = policy.build_graph(tape, batch.hiddens[i]);
                const Tape::Id new_lp = tape.pick(nodes.log_probs, size_t(batch.actions[i]));
                const Tape::Id ratio = tape.exp_s(tape.add_const(new_lp, -batch.old_log_probs[i]));
                const Tape::Id surr1 = tape.mul_const(ratio, norm_adv[i]);
                const Tape::Id surr2 = tape.mul_const(
                    tape.clamp_s(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), norm_adv[i]);
                Tape::Id loss = tape.mul_const(tape.min_s(surr1, surr2), -1.0);

                Tape::Id value_used = nodes.value;
                if (cfg.critic_shift_phi) {
                    value_used = tape.add_const(value_used, -batch.potentials[i]);
                }
                const Tape::Id residual = tape.add_const(tape.mul_const(value_used, -1.0),
                                                         batch.returns[i]);
                loss = tape.add_s(loss, tape.mul_const(tape.square_s(residual), cfg.value_coef));
                if (cfg.entropy_coef != 0.0) {
                    loss = tape.add_s(loss, tape.mul_const(tape.entropy_of_log_probs(nodes.log_probs),
                                                           -cfg.entropy_coef));
                }
                if (!std::isfinite(tape.scalar(loss))) {
                    throw std::runtime_error("train_ppo: non-finite loss");
                }
                tape.backward(loss, inv_n);
            }
            actor_opt.step();
            critic_opt.step();
        }

        result.cycles_run = cycle + 1;
        ++cycles_since_best;
        if (result.stopped_by_budget) break;
        if (cfg.early_stop_patience > 0 && cycles_since_best > cfg.early_stop_patience) break;
    }
    return result;
}

}  // namespace pinv
