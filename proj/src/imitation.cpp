#include "pinv/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pinv {

std::vector<ExpertTrajectory> collect_expert(Captioner& captioner, const EmbeddingVector& target,
                                             const IlConfig& cfg) {
    if (cfg.n_trajectories < 1) throw std::invalid_argument("collect_expert: n_trajectories >= 1");
    Rng rng(cfg.seed ^ hash_string("expert_decode"));
    const TokenId eos = 0;
    std::vector<ExpertTrajectory> out;
    out.reserve(cfg.n_trajectories);
    for (int n = 0; n < cfg.n_trajectories; ++n) {
        ExpertTrajectory traj;
        TokenSequence prefix(eos, cfg.max_len);
        while (true) {
            CaptionerStep step = captioner.step(prefix, target);
            TokenId next;
            if (cfg.sample_decode) {
                const auto lp = log_softmax(step.logits);
                double u = rng.next_double(), acc = 0.0;
                next = static_cast<TokenId>(lp.size() - 1);
                for (size_t i = 0; i < lp.size(); ++i) {
                    acc += std::exp(lp[i]);
                    if (u < acc) {
                        next = static_cast<TokenId>(i);
                        break;
                    }
                }
            } else {
                next = static_cast<TokenId>(std::distance(
                    step.logits.begin(), std::max_element(step.logits.begin(), step.logits.end())));
            }
            traj.pairs.push_back({std::move(step.hidden), next});
            prefix = prefix.appended(next);
            if (next == eos || prefix.size() == cfg.max_len) break;
        }
        out.push_back(std::move(traj));
    }
    return out;
}

namespace {

std::vector<const ExpertTrajectory::Pair*> flatten(const std::vector<ExpertTrajectory>& trajs) {
    std::vector<const ExpertTrajectory::Pair*> pairs;
    for (const auto& t : trajs) {
        for (const auto& p : t.pairs) pairs.push_back(&p);
    }
    if (pairs.empty()) throw std::invalid_argument("train_il: no expert pairs");
    return pairs;
}

}  // namespace

double il_dataset_loss(const PolicyNet& policy, const std::vector<ExpertTrajectory>& trajectories) {
    const auto pairs = flatten(trajectories);
    double total = 0.0;
    for (const auto* p : pairs) {
        CaptionerStep step;
        step.hidden = p->hidden;
        const PolicyOutput out = policy.forward(step);
        total += -out.action_log_probs[size_t(p->next_token)];
    }
    return total / double(pairs.size());
}

IlResult train_il(PolicyNet& policy, const std::vector<ExpertTrajectory>& trajectories,
                  const IlConfig& cfg) {
    const auto pairs = flatten(trajectories);
    if (cfg.epochs < 0 || cfg.batch_size < 1) throw std::invalid_argument("train_il: bad config");

    AdamOptimizer optimizer(policy.adapter().tensors(), cfg.learning_rate);
    Rng shuffle_rng(cfg.seed ^ hash_string("il_shuffle"));

    IlResult result;
    result.loss_curve.push_back(il_dataset_loss(policy, trajectories));

    std::vector<size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) {  // Fisher-Yates, seeded
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
            const double inv_n = 1.0 / double(end - start);
            optimizer.zero_grad();
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const auto* p = pairs[order[k]];
                Tape tape;
                auto nodes = policy.build_graph(tape, p->hidden);
                const Tape::Id nll =
                    tape.mul_const(tape.pick(nodes.log_probs, size_t(p->next_token)), -1.0);
                const double loss = tape.scalar(nll);
                if (!std::isfinite(loss)) throw std::runtime_error("train_il: non-finite loss");
                batch_loss += loss;
                tape.backward(nll, inv_n);
            }
            optimizer.step();
            epoch_loss += batch_loss;
        }
        result.loss_curve.push_back(epoch_loss / double(pairs.size()));
    }
    return result;
}

}  // namespace pinv
