#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pinv/backends.hpp"
#include "pinv/core.hpp"
#include "pinv/mutators.hpp"
#include "pinv/rng.hpp"

namespace pinv {

struct FuzzConfig {
    uint64_t budget = 100;              // total image generations, init included
    int pool_capacity = 5;              // top-K retained
    uint64_t subject_only_queries = 30; // only subject-phase operators before this
    double exploration_c = 1.4142135623730951;
    std::map<MutatorOp, double> mutator_weights;  // empty = uniform over eligible
    int mutator_retries = 3;
    uint64_t seed = 0;

    void validate() const;
};

// Capacity-constrained elitist pool with per-entry bandit statistics.
class SeedPool {
public:
    explicit SeedPool(int capacity);

    struct Entry {
        ScoredPrompt item;
        uint64_t pulls = 0;
        double mean_child_score = 0.0;  // starts at the entry's own score
        uint64_t children = 0;
        uint64_t insertion_order = 0;
    };

    void insert(ScoredPrompt item);
    size_t size() const { return entries_.size(); }
    int capacity() const { return capacity_; }
    const Entry& entry(size_t i) const { return entries_[i]; }
    const ScoredPrompt& best() const;
    double best_score() const;

    // UCT over entries: (mean+1)/2 + c*sqrt(ln(total_pulls+1)/(pulls+1)).
    // Ties break toward higher raw score, then earlier insertion. Increments
    // the winner's pull count.
    size_t select(double exploration_c);
    void record_child_score(size_t index, double score);

private:
    void sort_and_truncate();

    int capacity_;
    uint64_t next_order_ = 0;
    std::vector<Entry> entries_;  // sorted by score descending
};

struct FuzzIterationRecord {
    uint64_t iteration = 0;
    std::string operator_name;
    std::string seed_rendered;
    std::string child_rendered;
    double child_score = 0.0;
    double pool_best = 0.0;
    uint64_t ledger_used = 0;
    bool skipped = false;  // schema failure after retries; no budget consumed
};

struct FuzzResult {
    ScoredPrompt best;
    std::vector<FuzzIterationRecord> history;
    // False when the loop aborted early (mutator stuck on schema violations);
    // history up to that point is preserved.
    bool completed = true;
};

struct FuzzBackends {
    Generator& generator;
    Embedder& embedder;
    Mutator& mutator;
};

// Alg.: pool := {(p_rl, score)} at the cost of one query.
SeedPool init_pool(const Prompt& rl_prompt, FuzzBackends backends,
                   const EmbeddingVector& target, QueryLedger& ledger, const FuzzConfig& cfg);

// One iteration: select seed, sample phase-eligible operator, mutate,
// generate, score, insert, truncate to top-K.
std::optional<FuzzIterationRecord> fuzz_step(SeedPool& pool, const ImageBuffer& target_image,
                                             const EmbeddingVector& target_embedding,
                                             const FuzzConfig& cfg, FuzzBackends backends,
                                             QueryLedger& ledger, Rng& rng, uint64_t iteration);

// Full budgeted loop; successful generator calls land exactly on cfg.budget.
FuzzResult run_fuzz(const Prompt& rl_prompt, const ImageBuffer& target_image,
                    const FuzzConfig& cfg, FuzzBackends backends);

}  // namespace pinv
