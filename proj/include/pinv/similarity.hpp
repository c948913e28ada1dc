#pragma once

#include <vector>

#include "pinv/core.hpp"

namespace pinv {

struct PotentialConfig {
    double beta = 10.0;   // scaling coefficient
    double gamma = 0.98;  // discount, carried here for the shaping term

    void validate() const;
};

// a.b / (|a||b|). Throws on dimension mismatch or zero-norm input.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// beta * cosine(text prefix embedding, target image embedding).
double potential(const EmbeddingVector& prefix_text_embedding,
                 const EmbeddingVector& target_image_embedding, const PotentialConfig& cfg);

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Greedy max-cosine token matching. P over candidates, R over references,
// F1 = 2PR/(P+R), defined as 0 when P+R == 0.
BertScore bertscore(const std::vector<EmbeddingVector>& candidate_tokens,
                    const std::vector<EmbeddingVector>& reference_tokens);

// Same contract as cosine; separate name for sentence-level reporting.
double sentence_alignment(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace pinv
