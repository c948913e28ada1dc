#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinv {

// Structured prompt: subject plus optional modifier fields. Text is
// canonicalized at construction (lowercased, whitespace collapsed), so all
// invariants are checked once and instances are immutable afterwards.
class Prompt {
public:
    explicit Prompt(std::string subject,
                    std::optional<std::string> description = std::nullopt,
                    std::optional<std::string> style = std::nullopt);

    const std::string& subject() const { return subject_; }
    const std::optional<std::string>& description() const { return description_; }
    const std::optional<std::string>& style() const { return style_; }

    // Joins present parts with ", " in subject, description, style order.
    std::string render() const;

    Prompt with_subject(std::string subject) const;
    Prompt with_description(std::string description) const;
    Prompt with_style(std::string style) const;
    Prompt with_description_and_style(std::string description, std::string style) const;

    bool operator==(const Prompt& other) const = default;

private:
    std::string subject_;
    std::optional<std::string> description_;
    std::optional<std::string> style_;
};

std::string render(const Prompt& p);

// Lowercase, collapse all whitespace runs (incl. line breaks) to single
// spaces, trim. Shared by Prompt and the mutator validators.
std::string canonicalize_text(std::string_view text);

// Number of whitespace-separated words after canonicalization.
int word_count(std::string_view text);
std::vector<std::string> split_words(std::string_view text);

using TokenId = int32_t;

// Token-id sequence with an optional terminating eos.
class TokenSequence {
public:
    TokenSequence(TokenId eos_id, size_t max_len);
    TokenSequence(std::vector<TokenId> tokens, TokenId eos_id, size_t max_len);

    const std::vector<TokenId>& tokens() const { return tokens_; }
    TokenId eos_id() const { return eos_id_; }
    size_t max_len() const { return max_len_; }
    size_t size() const { return tokens_.size(); }
    bool empty() const { return tokens_.empty(); }
    bool ends_with_eos() const { return !tokens_.empty() && tokens_.back() == eos_id_; }

    TokenSequence appended(TokenId token) const;

    bool operator==(const TokenSequence& other) const = default;

private:
    void validate() const;

    std::vector<TokenId> tokens_;
    TokenId eos_id_;
    size_t max_len_;
};

// Fixed-length real vector in the shared image/text space.
class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    size_t dim() const { return values_.size(); }
    double operator[](size_t i) const { return values_[i]; }

    double norm() const;
    EmbeddingVector normalized() const;

    bool operator==(const EmbeddingVector& other) const = default;

private:
    std::vector<double> values_;
};

// Prompt paired with its image-similarity score and provenance.
struct ScoredPrompt {
    Prompt prompt;
    double score = 0.0;        // cosine of generated image vs target, in [-1, 1]
    std::string origin;        // "rl_init" or "mutator:<operator-name>"
    uint64_t query_index = 0;  // ledger.used after the generating call

    ScoredPrompt(Prompt p, double s, std::string orig, uint64_t qindex);
};

// Row-major 8-bit RGB image.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // width * height * 3

    ImageBuffer(int w, int h, std::vector<uint8_t> px);
    ImageBuffer(int w, int h, uint8_t fill = 0);

    size_t sample_count() const { return pixels.size(); }
    uint8_t at(int x, int y, int c) const { return pixels[(size_t(y) * width + x) * 3 + c]; }
    uint8_t& at(int x, int y, int c) { return pixels[(size_t(y) * width + x) * 3 + c]; }

    bool operator==(const ImageBuffer& other) const = default;
};

}  // namespace pinv
