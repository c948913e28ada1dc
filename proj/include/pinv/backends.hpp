#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinv/core.hpp"
#include "pinv/mutators.hpp"
#include "pinv/rng.hpp"

namespace pinv {

struct BudgetExhaustedError : std::runtime_error {
    BudgetExhaustedError() : std::runtime_error("query budget exhausted") {}
};

struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

struct SchemaViolationError : std::runtime_error {
    explicit SchemaViolationError(const std::string& what) : std::runtime_error(what) {}
};

// Counts successful image generations against a fixed budget. The single
// mutation point shared by concurrent rollouts, hence the lock.
class QueryLedger {
public:
    explicit QueryLedger(uint64_t budget);

    uint64_t budget() const;
    uint64_t used() const;
    uint64_t remaining() const;
    bool exhausted() const;

    // Throws BudgetExhaustedError when nothing remains.
    void require_available() const;
    // Registers one successful generation.
    void consume_one();

private:
    mutable std::mutex mutex_;
    uint64_t budget_;
    uint64_t used_ = 0;
};

struct GeneratorHandle {
    enum class Kind { remote, synthetic };
    Kind kind = Kind::synthetic;
    std::optional<std::string> endpoint;
    std::optional<uint64_t> seed;

    void validate() const;
};

struct CaptionerStep {
    std::vector<double> hidden;  // dim d
    std::vector<double> logits;  // vocab size
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual ImageBuffer generate(const std::string& prompt_text, QueryLedger& ledger) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed_image(const ImageBuffer& image) = 0;
    virtual EmbeddingVector embed_text(const std::string& text) = 0;
    virtual size_t dim() const = 0;
};

// Frozen affine map hidden -> logits. Parameters are fixed for the process
// lifetime; the policy reads them to differentiate through the head without
// ever updating it.
struct FrozenLmHead {
    std::vector<double> weight;  // vocab x d, row-major
    std::vector<double> bias;    // vocab
    size_t vocab = 0;
    size_t d = 0;

    std::vector<double> apply(const std::vector<double>& hidden) const;
};

class Captioner {
public:
    virtual ~Captioner() = default;
    virtual CaptionerStep step(const TokenSequence& prefix, const EmbeddingVector& target) = 0;
    virtual const FrozenLmHead& head() const = 0;
    virtual size_t hidden_dim() const = 0;
    virtual size_t vocab_size() const = 0;
};

class Mutator {
public:
    virtual ~Mutator() = default;
    // Raw single attempt; callers apply validate_mutation and retry policy.
    virtual Prompt mutate(MutatorOp op, const Prompt& seed, const ImageBuffer& image) = 0;
};

// Retries on schema violations; after `retries` failures throws
// SchemaViolationError. Never touches the generation budget.
Prompt mutate_validated(Mutator& mutator, MutatorOp op, const Prompt& seed,
                        const ImageBuffer& image, int retries = 3);

class ExternalScorer {
public:
    virtual ~ExternalScorer() = default;
    virtual double score(const ImageBuffer& a, const ImageBuffer& b) = 0;
};

// ---------------------------------------------------------------------------
// Synthetic oracle backends
//
// Words embed to stable hash-seeded unit vectors; a text embeds to the
// normalized sum of its words' vectors taken in sorted order, so texts with
// equal bags of words embed to bitwise-identical vectors. The synthetic
// generator writes the word-id sequence of a prompt into image rows with
// enough redundancy that embed_image(generate(p)) == embed_text(p) exactly,
// which makes the end-to-end objective brute-forceable.
// ---------------------------------------------------------------------------

// 64 core words + 48 description tags + 24 style tags. Word ids used by the
// synthetic image codec index into this list.
const std::vector<std::string>& core_word_list();
const std::vector<std::string>& description_tag_pool();
const std::vector<std::string>& style_tag_pool();
const std::vector<std::string>& global_lexicon();

// Lowercased alphanumeric words of a text; punctuation separates words.
std::vector<std::string> bag_words(const std::string& text);

// Token-id vocabulary for the RL phase: id 0 is <eos>, ids 1..n-1 map to
// core words.
class SyntheticVocab {
public:
    explicit SyntheticVocab(int vocab_size);

    int size() const { return static_cast<int>(lexemes_.size()); }
    TokenId eos_id() const { return 0; }
    const std::string& lexeme(TokenId t) const;
    // Joins lexemes with single spaces, skipping eos.
    std::string detokenize(const std::vector<TokenId>& tokens) const;

private:
    std::vector<std::string> lexemes_;
};

struct SyntheticConfig {
    uint64_t seed = 0;
    int embed_dim = 64;
    int hidden_dim = 64;
    int vocab_size = 32;
    int image_width = 128;
    int image_height = 128;
    // Scales the frozen head's logits; larger values concentrate the
    // captioner's initial action distribution.
    double captioner_sharpness = 1.0;
};

class SyntheticEmbedder : public Embedder {
public:
    explicit SyntheticEmbedder(const SyntheticConfig& cfg);

    EmbeddingVector embed_image(const ImageBuffer& image) override;
    EmbeddingVector embed_text(const std::string& text) override;
    size_t dim() const override { return dim_; }

    EmbeddingVector word_vector(const std::string& word) const;
    EmbeddingVector embed_bag(std::vector<std::string> words) const;

private:
    size_t dim_;
    uint64_t seed_;
};

class SyntheticGenerator : public Generator {
public:
    explicit SyntheticGenerator(const SyntheticConfig& cfg);

    ImageBuffer generate(const std::string& prompt_text, QueryLedger& ledger) override;

    // Encoding without budget accounting, for producing target images.
    ImageBuffer render_image(const std::string& prompt_text) const;

    // Word sequence recovered from an encoded image; empty when the image
    // carries no recognizable payload.
    static std::vector<std::string> decode_words(const ImageBuffer& image);

private:
    int width_;
    int height_;
};

class SyntheticCaptioner : public Captioner {
public:
    explicit SyntheticCaptioner(const SyntheticConfig& cfg);

    CaptionerStep step(const TokenSequence& prefix, const EmbeddingVector& target) override;
    const FrozenLmHead& head() const override { return head_; }
    size_t hidden_dim() const override { return d_; }
    size_t vocab_size() const override { return vocab_; }

private:
    size_t d_;
    size_t vocab_;
    size_t embed_dim_;
    uint64_t seed_;
    std::vector<double> bos_;          // begin-of-sequence component
    std::vector<double> target_proj_;  // d x embed_dim, row-major
    FrozenLmHead head_;
};

// Seeded random edits whose proposal distribution is grounded in the target
// image, mirroring the real operators: inserted or substituted words prefer
// content visible in the image over blind lexicon draws.
class SyntheticMutator : public Mutator {
public:
    SyntheticMutator(uint64_t seed, std::vector<std::string> subject_lexicon);

    Prompt mutate(MutatorOp op, const Prompt& seed, const ImageBuffer& image) override;

private:
    std::string random_subject_word(const std::vector<std::string>& current_bag,
                                    const std::vector<std::string>& grounded);
    std::string sample_tags(const std::vector<std::string>& pool,
                            const std::vector<std::string>& grounded, int min_words,
                            int max_words);

    Rng rng_;
    std::vector<std::string> subject_lexicon_;
};

struct SyntheticBackends {
    SyntheticConfig config;
    SyntheticVocab vocab;
    std::unique_ptr<SyntheticGenerator> generator;
    std::unique_ptr<SyntheticEmbedder> embedder;
    std::unique_ptr<SyntheticCaptioner> captioner;
    std::unique_ptr<SyntheticMutator> mutator;

    explicit SyntheticBackends(const SyntheticConfig& cfg,
                               std::vector<std::string> subject_lexicon = {});
};

// Exhaustive search over all word sequences of length 1..max_words drawn from
// `lexicon` (with repetition), scored by cosine(embed_text(candidate), target).
// Independent of the generate -> embed_image attack path.
struct BruteForceResult {
    std::string best_text;
    double best_score = -1.0;
    uint64_t candidates = 0;
};
BruteForceResult brute_force_best_subject(SyntheticEmbedder& embedder,
                                          const std::vector<std::string>& lexicon, int max_words,
                                          const EmbeddingVector& target);

}  // namespace pinv
