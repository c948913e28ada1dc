#include "pinv/similarity.hpp"

#include <cmath>
#include <stdexcept>

namespace pinv {

void PotentialConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("PotentialConfig: beta must be > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("PotentialConfig: gamma must be in [0, 1)");
    }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    const auto& va = a.values();
    const auto& vb = b.values();
    for (size_t i = 0; i < va.size(); ++i) {
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double potential(const EmbeddingVector& prefix_text_embedding,
                 const EmbeddingVector& target_image_embedding, const PotentialConfig& cfg) {
    cfg.validate();
    return cfg.beta * cosine(prefix_text_embedding, target_image_embedding);
}

BertScore bertscore(const std::vector<EmbeddingVector>& candidate_tokens,
                    const std::vector<EmbeddingVector>& reference_tokens) {
    if (candidate_tokens.empty() || reference_tokens.empty()) {
        throw std::invalid_argument("bertscore: empty token list");
    }
    const size_t dim = candidate_tokens.front().dim();
    for (const auto& v : candidate_tokens) {
        if (v.dim() != dim) throw std::invalid_argument("bertscore: dimension mismatch");
    }
    for (const auto& v : reference_tokens) {
        if (v.dim() != dim) throw std::invalid_argument("bertscore: dimension mismatch");
    }

    auto mean_max_cosine = [](const std::vector<EmbeddingVector>& rows,
                              const std::vector<EmbeddingVector>& cols) {
        double sum = 0.0;
        for (const auto& r : rows) {
            double best = -1.0;
            for (const auto& c : cols) best = std::max(best, cosine(r, c));
            sum += best;
        }
        return sum / double(rows.size());
    };

    BertScore s;
    s.precision = mean_max_cosine(candidate_tokens, reference_tokens);
    s.recall = mean_max_cosine(reference_tokens, candidate_tokens);
    const double denom = s.precision + s.recall;
    s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
    return s;
}

double sentence_alignment(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine(a, b);
}

}  // namespace pinv
