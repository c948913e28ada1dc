#include <doctest.h>

#include <cmath>

#include "pinv/ppo.hpp"

using namespace pinv;

namespace {

SyntheticConfig toy_config(uint64_t seed) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.vocab_size = 8;
    cfg.embed_dim = 32;
    cfg.hidden_dim = 32;
    return cfg;
}

struct ToyTrainer {
    SyntheticBackends backends;
    QueryLedger ledger;
    PotentialConfig pot;
    PromptEnv env;
    PolicyNet policy;
    EmbeddingVector target;

    ToyTrainer(uint64_t world_seed, uint64_t policy_seed, uint64_t budget, size_t max_len = 4)
        : backends(toy_config(world_seed)),
          ledger(budget),
          pot{10.0, 0.98},
          env(backends.vocab, *backends.generator, *backends.embedder, ledger, pot, max_len),
          policy(backends.captioner->hidden_dim(), 2 * backends.captioner->hidden_dim(),
                 backends.captioner->head(), policy_seed),
          target(backends.embedder->embed_text("alfa bravo charlie")) {}
};

}  // namespace

TEST_CASE("ppo config defaults follow the stated hyperparameters") {
    PpoConfig cfg;
    CHECK(cfg.gamma == 0.98);
    CHECK(cfg.clip_eps == 0.2);
    CHECK(cfg.gae_lambda == 0.95);
    CHECK(cfg.actor_lr == 1e-4);
    CHECK(cfg.critic_lr == 5e-4);
    CHECK(cfg.update_every == 150);
    CHECK(cfg.epochs_per_update == 4);
    CHECK(cfg.max_epochs == 100);
    CHECK_NOTHROW(cfg.validate());
    PpoConfig bad;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("gae with lambda 0 reduces to the one-step TD residual") {
    PpoConfig cfg;
    cfg.gamma = 0.9;
    cfg.gae_lambda = 0.0;
    const std::vector<double> rewards = {1.0, -0.5, 2.0};
    const std::vector<double> values = {0.3, 0.7, -0.2, 0.4};
    const std::vector<bool> terminals = {false, false, true};
    const auto out = compute_gae(rewards, values, terminals, cfg);
    for (size_t t = 0; t < rewards.size(); ++t) {
        CHECK(out.advantages[t] == out.deltas[t]);
    }
    CHECK(out.deltas[0] == doctest::Approx(1.0 + 0.9 * 0.7 - 0.3).epsilon(1e-12));
    CHECK(out.deltas[2] == doctest::Approx(2.0 + 0.0 - (-0.2)).epsilon(1e-12));  // terminal
}

TEST_CASE("gae with lambda 1 equals discounted return minus value") {
    PpoConfig cfg;
    cfg.gamma = 0.95;
    cfg.gae_lambda = 1.0;
    Rng rng(3);
    std::vector<double> rewards(6), values(7);
    for (auto& r : rewards) r = rng.normal();
    for (auto& v : values) v = rng.normal();
    std::vector<bool> terminals(6, false);
    terminals.back() = true;
    const auto out = compute_gae(rewards, values, terminals, cfg);
    for (size_t t = 0; t < rewards.size(); ++t) {
        double ret = 0.0, g = 1.0;
        for (size_t k = t; k < rewards.size(); ++k) {
            ret += g * rewards[k];
            g *= cfg.gamma;
        }
        CHECK(std::abs(out.advantages[t] - (ret - values[t])) <= 1e-10);
    }
}

TEST_CASE("gae recursion equals direct (gamma*lambda)^l summation") {
    PpoConfig cfg;
    cfg.gamma = 0.98;
    cfg.gae_lambda = 0.95;
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = size_t(rng.uniform_int(1, 12));
        std::vector<double> rewards(n), values(n + 1);
        for (auto& r : rewards) r = rng.normal();
        for (auto& v : values) v = rng.normal();
        std::vector<bool> terminals(n, false);
        terminals.back() = true;
        const auto out = compute_gae(rewards, values, terminals, cfg);
        for (size_t t = 0; t < n; ++t) {
            double direct = 0.0, w = 1.0;
            for (size_t l = t; l < n; ++l) {
                direct += w * out.deltas[l];
                w *= cfg.gamma * cfg.gae_lambda;
            }
            CHECK(std::abs(out.advantages[t] - direct) <= 1e-10);
        }
    }
}

TEST_CASE("gae validates lengths") {
    PpoConfig cfg;
    CHECK_THROWS_AS(compute_gae({1.0}, {0.0}, {true}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(compute_gae({1.0}, {0.0, 0.0}, {}, cfg), std::invalid_argument);
}

TEST_CASE("shifted critic makes shaped deltas equal sparse deltas element-wise") {
    // delta'_t from (r', V - Phi) must equal delta_t from (r, V) within 1e-12
    ToyTrainer t(50, 51, 500);
    Rng rng(9);
    PpoConfig cfg;
    for (int ep_i = 0; ep_i < 40; ++ep_i) {
        auto policy_fn = [&](const EnvState&) {
            return PromptEnv::ActionChoice{TokenId(rng.below(8)), 0.0, 0.0};
        };
        const Episode ep = t.env.rollout(policy_fn, t.target);
        const size_t n = ep.actions.size();

        // a made-up critic; any values work for the identity
        std::vector<double> values(n + 1);
        for (auto& v : values) v = rng.normal() * 3.0;
        std::vector<double> shifted(n + 1);
        for (size_t i = 0; i < n; ++i) shifted[i] = values[i] - ep.potentials[i];
        shifted[n] = values[n];  // terminal bootstrap slot is unused
        std::vector<bool> terminals(n, false);
        terminals.back() = true;

        const auto sparse = compute_gae(ep.sparse_rewards, values, terminals, cfg);
        const auto shaped = compute_gae(ep.shaped_rewards, shifted, terminals, cfg);
        for (size_t i = 0; i < n; ++i) {
            CHECK(std::abs(shaped.deltas[i] - sparse.deltas[i]) <= 1e-12);
            CHECK(std::abs(shaped.advantages[i] - sparse.advantages[i]) <= 1e-12);
        }
    }
}

TEST_CASE("ppo loss: identity ratio case") {
    PpoConfig cfg;
    const std::vector<double> lp = {-1.0, -0.5, -2.0};
    const std::vector<double> adv = {0.5, -1.0, 2.0};
    // new == old -> rho = 1, loss = -mean(adv)
    CHECK(ppo_loss(lp, lp, adv, cfg) ==
          doctest::Approx(-(0.5 - 1.0 + 2.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("ppo loss: clip arithmetic selects the clipped term") {
    PpoConfig cfg;
    cfg.clip_eps = 0.2;
    // rho = 1.5 via new - old = ln(1.5); advantage 1 -> min(1.5, 1.2) = 1.2
    const std::vector<double> old_lp = {-1.0};
    const std::vector<double> new_lp = {-1.0 + std::log(1.5)};
    const std::vector<double> adv = {1.0};
    CHECK(ppo_loss(old_lp, new_lp, adv, cfg) == doctest::Approx(-1.2).epsilon(1e-12));
}

TEST_CASE("ppo loss: per-sample surrogate lies between the two candidate terms") {
    PpoConfig cfg;
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const double old_lp = -rng.uniform(0.2, 3.0);
        const double new_lp = -rng.uniform(0.2, 3.0);
        const double adv = rng.normal();
        const double rho = std::exp(new_lp - old_lp);
        const double clipped = std::clamp(rho, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double lo = std::min(rho * adv, clipped * adv);
        const double hi = std::max(rho * adv, clipped * adv);
        const double loss = ppo_loss({old_lp}, {new_lp}, {adv}, cfg);
        CHECK(-loss >= lo - 1e-15);
        CHECK(-loss <= hi + 1e-15);
    }
}

TEST_CASE("ppo loss rejects non-finite advantages") {
    PpoConfig cfg;
    CHECK_THROWS(ppo_loss({-1.0}, {-1.0}, {std::nan("")}, cfg));
    CHECK_THROWS(ppo_loss({-1.0}, {-1.0, -2.0}, {1.0}, cfg));
}

TEST_CASE("training consumes exactly one query per completed episode") {
    ToyTrainer t(60, 61, 40);
    PpoConfig cfg;
    cfg.update_every = 16;
    cfg.max_epochs = 50;
    cfg.seed = 5;
    const auto result = train_ppo(t.policy, t.env, *t.backends.captioner, t.target, cfg, t.ledger);
    CHECK(result.stopped_by_budget);
    CHECK(t.ledger.used() == 40);
    CHECK(result.curve.size() == 40);
    CHECK(result.episodes.size() == 40);
    CHECK_FALSE(result.best_prompt.empty());
    CHECK(result.best_score >= -1.0);
}

TEST_CASE("shaped run with shifted critic matches sparse run parameter-for-parameter") {
    // Cor A.4: first-update parameter deltas agree within 1e-9.
    ToyTrainer sparse_t(70, 71, 200);
    ToyTrainer shaped_t(70, 71, 200);

    PpoConfig sparse_cfg;
    sparse_cfg.use_shaping = false;
    sparse_cfg.critic_shift_phi = false;
    sparse_cfg.update_every = 24;
    sparse_cfg.max_epochs = 1;
    sparse_cfg.seed = 9;
    sparse_cfg.normalize_advantages = false;

    PpoConfig shaped_cfg = sparse_cfg;
    shaped_cfg.use_shaping = true;
    shaped_cfg.critic_shift_phi = true;

    train_ppo(sparse_t.policy, sparse_t.env, *sparse_t.backends.captioner, sparse_t.target,
              sparse_cfg, sparse_t.ledger);
    train_ppo(shaped_t.policy, shaped_t.env, *shaped_t.backends.captioner, shaped_t.target,
              shaped_cfg, shaped_t.ledger);

    const auto pa = const_cast<const PolicyNet&>(sparse_t.policy).all_tensors();
    const auto pb = const_cast<const PolicyNet&>(shaped_t.policy).all_tensors();
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->size() == pb[i]->size());
        for (size_t k = 0; k < pa[i]->size(); ++k) {
            CHECK(std::abs(pa[i]->value[k] - pb[i]->value[k]) <= 1e-9);
        }
    }
}

TEST_CASE("advantage normalization preserves every sign") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> adv(size_t(rng.uniform_int(2, 40)));
        for (auto& a : adv) a = rng.normal() * rng.uniform(0.01, 50.0);
        const auto norm = scale_normalize_advantages(adv);
        REQUIRE(norm.size() == adv.size());
        double mean = 0.0, var = 0.0;
        for (double a : adv) mean += a;
        mean /= double(adv.size());
        for (double a : adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / double(adv.size()));
        for (size_t i = 0; i < adv.size(); ++i) {
            if (std::abs(adv[i]) > 1e-6 * sd) {
                CHECK(std::signbit(norm[i]) == std::signbit(adv[i]));
                CHECK(norm[i] != 0.0);
            }
        }
    }
}

TEST_CASE("adam refuses non-finite gradients") {
    Tensor t("t", 2, 2);
    AdamOptimizer opt({&t}, 1e-3);
    t.grad[1] = std::nan("");
    CHECK_THROWS_AS(opt.step(), std::runtime_error);
}

TEST_CASE("training leaves the frozen head bitwise unchanged") {
    ToyTrainer t(90, 91, 30);
    const auto head_weight_before = t.backends.captioner->head().weight;
    const auto head_bias_before = t.backends.captioner->head().bias;
    const auto probe = t.backends.captioner->step(TokenSequence(0, 4), t.target);

    PpoConfig cfg;
    cfg.update_every = 12;
    cfg.max_epochs = 10;
    cfg.seed = 4;
    train_ppo(t.policy, t.env, *t.backends.captioner, t.target, cfg, t.ledger);

    CHECK(t.backends.captioner->head().weight == head_weight_before);
    CHECK(t.backends.captioner->head().bias == head_bias_before);
    const auto probe_after = t.backends.captioner->step(TokenSequence(0, 4), t.target);
    CHECK(probe.hidden == probe_after.hidden);
    CHECK(probe.logits == probe_after.logits);
}

TEST_CASE("early stop halts when the best score stops improving") {
    ToyTrainer t(80, 81, 5000);
    PpoConfig cfg;
    cfg.update_every = 8;
    cfg.max_epochs = 100;
    cfg.early_stop_patience = 3;
    cfg.seed = 2;
    const auto result = train_ppo(t.policy, t.env, *t.backends.captioner, t.target, cfg, t.ledger);
    CHECK(result.cycles_run < 100);
    CHECK_FALSE(result.stopped_by_budget);
}
