#include "pinv/fuzz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pinv/similarity.hpp"

namespace pinv {

void FuzzConfig::validate() const {
    if (budget < 1) throw std::invalid_argument("FuzzConfig: budget must be positive");
    if (pool_capacity < 1) throw std::invalid_argument("FuzzConfig: pool capacity must be positive");
    if (subject_only_queries > budget) {
        throw std::invalid_argument("FuzzConfig: subject_only_queries exceeds budget");
    }
    if (mutator_retries < 1) throw std::invalid_argument("FuzzConfig: retries must be positive");
    for (const auto& [op, w] : mutator_weights) {
        if (w < 0.0) throw std::invalid_argument("FuzzConfig: negative mutator weight");
    }
}

SeedPool::SeedPool(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("SeedPool: capacity must be positive");
}

void SeedPool::insert(ScoredPrompt item) {
    Entry e{std::move(item), 0, 0.0, 0, next_order_++};
    e.mean_child_score = e.item.score;  // unexplored seeds compete on raw quality
    entries_.push_back(std::move(e));
    sort_and_truncate();
}

void SeedPool::sort_and_truncate() {
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.item.score > b.item.score;
    });
    while (entries_.size() > size_t(capacity_)) {
        // Evict the lowest score; among equals the oldest goes first.
        size_t victim = entries_.size() - 1;
        for (size_t i = entries_.size() - 1; i-- > 0;) {
            if (entries_[i].item.score != entries_.back().item.score) break;
            if (entries_[i].insertion_order < entries_[victim].insertion_order) victim = i;
        }
        entries_.erase(entries_.begin() + victim);
    }
}

const ScoredPrompt& SeedPool::best() const {
    if (entries_.empty()) throw std::logic_error("SeedPool: empty");
    return entries_.front().item;
}

double SeedPool::best_score() const { return best().score; }

size_t SeedPool::select(double exploration_c) {
    if (entries_.empty()) throw std::logic_error("SeedPool: select on empty pool");
    uint64_t total_pulls = 0;
    for (const auto& e : entries_) total_pulls += e.pulls;
    size_t best_i = 0;
    double best_uct = -1e300;
    for (size_t i = 0; i < entries_.size(); ++i) {
        const Entry& e = entries_[i];
        const double normalized_mean = (e.mean_child_score + 1.0) / 2.0;  // [-1,1] -> [0,1]
        const double bonus =
            exploration_c * std::sqrt(std::log(double(total_pulls) + 1.0) / (double(e.pulls) + 1.0));
        const double uct = normalized_mean + bonus;
        bool better = uct > best_uct;
        if (uct == best_uct) {
            if (e.item.score > entries_[best_i].item.score) {
                better = true;
            } else if (e.item.score == entries_[best_i].item.score &&
                       e.insertion_order < entries_[best_i].insertion_order) {
                better = true;
            }
        }
        if (better) {
            best_uct = uct;
            best_i = i;
        }
    }
    entries_[best_i].pulls += 1;
    return best_i;
}

void SeedPool::record_child_score(size_t index, double score) {
    Entry& e = entries_.at(index);
    e.mean_child_score =
        (e.mean_child_score * double(e.children + 1) + score) / double(e.children + 2);
    e.children += 1;
}

SeedPool init_pool(const Prompt& rl_prompt, FuzzBackends backends, const EmbeddingVector& target,
                   QueryLedger& ledger, const FuzzConfig& cfg) {
    cfg.validate();
    SeedPool pool(cfg.pool_capacity);
    const ImageBuffer img = backends.generator.generate(rl_prompt.render(), ledger);
    const double score = cosine(backends.embedder.embed_image(img), target);
    pool.insert(ScoredPrompt(rl_prompt, score, "rl_init", ledger.used()));
    return pool;
}

namespace {

MutatorOp sample_operator(const FuzzConfig& cfg, bool subject_phase, Rng& rng) {
    std::vector<MutatorOp> eligible;
    std::vector<double> weights;
    for (MutatorOp op : all_mutator_ops) {
        const MutatorPhase phase = mutator_op_phase(op);
        if (subject_phase && phase == MutatorPhase::modifier) continue;
        double w = 1.0;
        if (!cfg.mutator_weights.empty()) {
            auto it = cfg.mutator_weights.find(op);
            w = it == cfg.mutator_weights.end() ? 0.0 : it->second;
        }
        if (w <= 0.0) continue;
        eligible.push_back(op);
        weights.push_back(w);
    }
    if (eligible.empty()) throw std::logic_error("sample_operator: no eligible operator");
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.next_double() * total;
    for (size_t i = 0; i < eligible.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return eligible[i];
    }
    return eligible.back();
}

}  // namespace

std::optional<FuzzIterationRecord> fuzz_step(SeedPool& pool, const ImageBuffer& target_image,
                                             const EmbeddingVector& target_embedding,
                                             const FuzzConfig& cfg, FuzzBackends backends,
                                             QueryLedger& ledger, Rng& rng, uint64_t iteration) {
    ledger.require_available();
    const bool subject_phase = ledger.used() < cfg.subject_only_queries;
    const size_t seed_index = pool.select(cfg.exploration_c);
    const ScoredPrompt seed = pool.entry(seed_index).item;
    const MutatorOp op = sample_operator(cfg, subject_phase, rng);

    FuzzIterationRecord rec;
    rec.iteration = iteration;
    rec.operator_name = mutator_op_name(op);
    rec.seed_rendered = seed.prompt.render();

    Prompt child = seed.prompt;
    try {
        child = mutate_validated(backends.mutator, op, seed.prompt, target_image,
                                 cfg.mutator_retries);
    } catch (const SchemaViolationError&) {
        rec.skipped = true;
        rec.pool_best = pool.best_score();
        rec.ledger_used = ledger.used();
        return rec;
    }

    const ImageBuffer img = backends.generator.generate(child.render(), ledger);
    const double score = cosine(backends.embedder.embed_image(img), target_embedding);

    pool.record_child_score(seed_index, score);
    pool.insert(ScoredPrompt(child, score, "mutator:" + mutator_op_name(op), ledger.used()));

    rec.child_rendered = child.render();
    rec.child_score = score;
    rec.pool_best = pool.best_score();
    rec.ledger_used = ledger.used();
    return rec;
}

FuzzResult run_fuzz(const Prompt& rl_prompt, const ImageBuffer& target_image,
                    const FuzzConfig& cfg, FuzzBackends backends) {
    cfg.validate();
    QueryLedger ledger(cfg.budget);
    Rng rng(cfg.seed ^ hash_string("fuzz"));
    const EmbeddingVector target_embedding = backends.embedder.embed_image(target_image);

    SeedPool pool = init_pool(rl_prompt, backends, target_embedding, ledger, cfg);
    std::vector<FuzzIterationRecord> history;
    {
        FuzzIterationRecord init;
        init.iteration = 0;
        init.operator_name = "rl_init";
        init.seed_rendered = rl_prompt.render();
        init.child_rendered = rl_prompt.render();
        init.child_score = pool.best_score();
        init.pool_best = pool.best_score();
        init.ledger_used = ledger.used();
        history.push_back(std::move(init));
    }

    uint64_t iteration = 0;
    // Skip cap: a mutator stuck on schema violations would otherwise spin
    // forever since skips cost no budget.
    const uint64_t max_skips = 50 * cfg.budget;
    uint64_t skips = 0;
    bool completed = true;
    while (!ledger.exhausted()) {
        ++iteration;
        auto rec = fuzz_step(pool, target_image, target_embedding, cfg, backends, ledger, rng,
                             iteration);
        if (!rec) continue;
        const bool skipped = rec->skipped;
        history.push_back(std::move(*rec));
        if (skipped && ++skips > max_skips) {
            completed = false;
            break;
        }
    }
    return FuzzResult{pool.best(), std::move(history), completed};
}

}  // namespace pinv
