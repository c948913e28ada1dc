#pragma once

#include <filesystem>
#include <memory>

#include "pinv/autodiff.hpp"
#include "pinv/backends.hpp"
#include "pinv/rng.hpp"

namespace pinv {

// Two-layer rectifier MLP with a residual connection, zero-initialized on the
// output side so a fresh adapter is an exact pass-through and the warm-started
// policy matches the frozen captioner.
struct AdapterParams {
    size_t d;
    size_t expansion;
    Tensor w1, b1, w2, b2;

    AdapterParams(size_t d_in, size_t expansion_dim, uint64_t seed);

    std::vector<Tensor*> tensors() { return {&w1, &b1, &w2, &b2}; }
    std::vector<const Tensor*> tensors() const { return {&w1, &b1, &w2, &b2}; }
};

struct ValueHeadParams {
    Tensor w, b;  // d -> 1

    explicit ValueHeadParams(size_t d);

    std::vector<Tensor*> tensors() { return {&w, &b}; }
    std::vector<const Tensor*> tensors() const { return {&w, &b}; }
};

struct PolicyOutput {
    std::vector<double> action_logits;
    std::vector<double> action_log_probs;
    double value = 0.0;
};

// Adapter + frozen LM head + value head. The head weights are copied into
// untracked tensors: gradients flow through them, never into them.
class PolicyNet {
public:
    PolicyNet(size_t d, size_t expansion, const FrozenLmHead& head, uint64_t seed);

    PolicyOutput forward(const CaptionerStep& step) const;

    // Training graph for one sample. value/log_probs are tape nodes.
    struct GraphNodes {
        Tape::Id adapted;
        Tape::Id logits;
        Tape::Id log_probs;
        Tape::Id value;
    };
    GraphNodes build_graph(Tape& tape, const std::vector<double>& hidden) const;

    AdapterParams& adapter() { return adapter_; }
    const AdapterParams& adapter() const { return adapter_; }
    ValueHeadParams& value_head() { return value_head_; }
    const ValueHeadParams& value_head() const { return value_head_; }

    std::vector<Tensor*> trainable_tensors();
    std::vector<const Tensor*> all_tensors() const;
    std::vector<Tensor*> all_tensors();

    size_t hidden_dim() const { return adapter_.d; }
    size_t vocab_size() const { return lm_w_.rows; }

private:
    mutable AdapterParams adapter_;      // mutable: forward() builds a local tape
    mutable ValueHeadParams value_head_;
    mutable Tensor lm_w_, lm_b_;         // frozen copies of the captioner head
};

std::pair<TokenId, double> sample_action(const PolicyOutput& out, Rng& rng);

std::vector<double> log_softmax(const std::vector<double>& logits);

// Versioned binary tensor dump; round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const std::vector<const Tensor*>& tensors);
void load_checkpoint(const std::filesystem::path& path, const std::vector<Tensor*>& tensors);

}  // namespace pinv
