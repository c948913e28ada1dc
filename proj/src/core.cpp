#include "pinv/core.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace pinv {

std::string canonicalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // swallows leading whitespace
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

int word_count(std::string_view text) { return static_cast<int>(split_words(text).size()); }

namespace {

std::optional<std::string> canonicalize_optional(std::optional<std::string> part) {
    if (!part) return std::nullopt;
    std::string canon = canonicalize_text(*part);
    if (canon.empty()) return std::nullopt;  // empty-after-trim modifiers are absent
    return canon;
}

}  // namespace

Prompt::Prompt(std::string subject, std::optional<std::string> description,
               std::optional<std::string> style)
    : subject_(canonicalize_text(subject)),
      description_(canonicalize_optional(std::move(description))),
      style_(canonicalize_optional(std::move(style))) {
    if (subject_.empty()) {
        throw std::invalid_argument("Prompt: subject is empty after whitespace trimming");
    }
}

std::string Prompt::render() const {
    std::string out = subject_;
    if (description_) {
        out += ", ";
        out += *description_;
    }
    if (style_) {
        out += ", ";
        out += *style_;
    }
    return out;
}

Prompt Prompt::with_subject(std::string subject) const {
    return Prompt(std::move(subject), description_, style_);
}

Prompt Prompt::with_description(std::string description) const {
    return Prompt(subject_, std::move(description), style_);
}

Prompt Prompt::with_style(std::string style) const {
    return Prompt(subject_, description_, std::move(style));
}

Prompt Prompt::with_description_and_style(std::string description, std::string style) const {
    return Prompt(subject_, std::move(description), std::move(style));
}

std::string render(const Prompt& p) { return p.render(); }

TokenSequence::TokenSequence(TokenId eos_id, size_t max_len)
    : tokens_(), eos_id_(eos_id), max_len_(max_len) {
    validate();
}

TokenSequence::TokenSequence(std::vector<TokenId> tokens, TokenId eos_id, size_t max_len)
    : tokens_(std::move(tokens)), eos_id_(eos_id), max_len_(max_len) {
    validate();
}

void TokenSequence::validate() const {
    if (max_len_ == 0) throw std::invalid_argument("TokenSequence: max_len must be positive");
    if (tokens_.size() > max_len_) {
        throw std::invalid_argument("TokenSequence: length exceeds max_len");
    }
    for (size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] < 0) throw std::invalid_argument("TokenSequence: negative token id");
        if (tokens_[i] == eos_id_ && i + 1 != tokens_.size()) {
            throw std::invalid_argument("TokenSequence: eos before final position");
        }
    }
}

TokenSequence TokenSequence::appended(TokenId token) const {
    if (ends_with_eos()) throw std::logic_error("TokenSequence: append after eos");
    std::vector<TokenId> next = tokens_;
    next.push_back(token);
    return TokenSequence(std::move(next), eos_id_, max_len_);
}

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("EmbeddingVector: empty");
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("EmbeddingVector: non-finite entry");
    }
}

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
}

EmbeddingVector EmbeddingVector::normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::domain_error("EmbeddingVector: zero norm");
    std::vector<double> out(values_.size());
    for (size_t i = 0; i < values_.size(); ++i) out[i] = values_[i] / n;
    return EmbeddingVector(std::move(out));
}

ScoredPrompt::ScoredPrompt(Prompt p, double s, std::string orig, uint64_t qindex)
    : prompt(std::move(p)), score(s), origin(std::move(orig)), query_index(qindex) {
    // Cosine arithmetic may overshoot |1| by an ulp; clamp that, reject real violations.
    if (score > 1.0 && score < 1.0 + 1e-9) score = 1.0;
    if (score < -1.0 && score > -1.0 - 1e-9) score = -1.0;
    if (!(score >= -1.0 && score <= 1.0)) {
        throw std::invalid_argument("ScoredPrompt: score outside [-1, 1]");
    }
}

ImageBuffer::ImageBuffer(int w, int h, std::vector<uint8_t> px)
    : width(w), height(h), pixels(std::move(px)) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("ImageBuffer: non-positive dimensions");
    if (pixels.size() != size_t(w) * size_t(h) * 3) {
        throw std::invalid_argument("ImageBuffer: pixel array length != width*height*3");
    }
}

ImageBuffer::ImageBuffer(int w, int h, uint8_t fill)
    : ImageBuffer(w, h, std::vector<uint8_t>(size_t(w > 0 ? w : 0) * size_t(h > 0 ? h : 0) * 3, fill)) {}

}  // namespace pinv
