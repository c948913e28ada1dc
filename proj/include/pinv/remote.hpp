#pragma once

#include <optional>
#include <string>

#include "pinv/backends.hpp"
#include "pinv/core.hpp"

namespace pinv {

std::string base64_encode(const std::vector<uint8_t>& data);
std::vector<uint8_t> base64_decode(const std::string& text);

struct RemoteConfig {
    std::string base_url;       // e.g. http://127.0.0.1:8080
    std::string bearer_token;   // optional Authorization: Bearer <token>
    double timeout_s = 60.0;
    int retries = 2;            // transport retries; budget is untouched on failure
};

struct GenerateResponse {
    std::optional<ImageBuffer> image;
    std::optional<EmbeddingVector> embedding;
};

// POST /generate {prompt, seed?}. Raw RGB bytes with X-Image-Width/Height
// headers, image/png bodies, and {"embedding": [...]} JSON responses are all
// accepted.
class RemoteGenerator : public Generator {
public:
    RemoteGenerator(RemoteConfig cfg, std::optional<uint64_t> seed = std::nullopt);

    ImageBuffer generate(const std::string& prompt_text, QueryLedger& ledger) override;
    GenerateResponse generate_full(const std::string& prompt_text, QueryLedger& ledger);

private:
    RemoteConfig cfg_;
    std::optional<uint64_t> seed_;
};

// POST /embed {text} or {image_b64 (PNG)} -> {embedding, dim}.
class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(RemoteConfig cfg, size_t expected_dim = 0);

    EmbeddingVector embed_image(const ImageBuffer& image) override;
    EmbeddingVector embed_text(const std::string& text) override;
    size_t dim() const override { return dim_; }

private:
    EmbeddingVector parse_embedding(const std::string& body);

    RemoteConfig cfg_;
    size_t dim_;
};

// POST /chat {system, user, image_b64} -> {content}; content must be exactly
// one single-line JSON object matching the operator's schema.
class RemoteMutator : public Mutator {
public:
    explicit RemoteMutator(RemoteConfig cfg);

    Prompt mutate(MutatorOp op, const Prompt& seed, const ImageBuffer& image) override;

private:
    RemoteConfig cfg_;
};

// POST /score {image_a_b64, image_b_b64} -> {score}.
class RemoteScorer : public ExternalScorer {
public:
    explicit RemoteScorer(RemoteConfig cfg);

    double score(const ImageBuffer& a, const ImageBuffer& b) override;

private:
    RemoteConfig cfg_;
};

// Applies a mutator chat response to the seed prompt, enforcing the
// single-line single-object contract and per-operator keys. Exposed for
// wire-format tests.
Prompt apply_mutator_response(MutatorOp op, const Prompt& seed, const std::string& content);

}  // namespace pinv
