#include "pinv/backends.hpp"

#include <algorithm>
#include <cmath>

#include "pinv/similarity.hpp"

namespace pinv {

QueryLedger::QueryLedger(uint64_t budget) : budget_(budget) {
    if (budget == 0) throw std::invalid_argument("QueryLedger: budget must be positive");
}

uint64_t QueryLedger::budget() const {
    std::lock_guard lock(mutex_);
    return budget_;
}

uint64_t QueryLedger::used() const {
    std::lock_guard lock(mutex_);
    return used_;
}

uint64_t QueryLedger::remaining() const {
    std::lock_guard lock(mutex_);
    return budget_ - used_;
}

bool QueryLedger::exhausted() const {
    std::lock_guard lock(mutex_);
    return used_ >= budget_;
}

void QueryLedger::require_available() const {
    std::lock_guard lock(mutex_);
    if (used_ >= budget_) throw BudgetExhaustedError();
}

void QueryLedger::consume_one() {
    std::lock_guard lock(mutex_);
    if (used_ >= budget_) throw BudgetExhaustedError();
    ++used_;
}

void GeneratorHandle::validate() const {
    if (kind == Kind::remote && !endpoint) {
        throw std::invalid_argument("GeneratorHandle: remote requires endpoint");
    }
    if (kind == Kind::synthetic && !seed) {
        throw std::invalid_argument("GeneratorHandle: synthetic requires seed");
    }
}

std::vector<double> FrozenLmHead::apply(const std::vector<double>& hidden) const {
    if (hidden.size() != d) throw std::invalid_argument("lm_head: dimension mismatch");
    std::vector<double> logits(vocab);
    for (size_t v = 0; v < vocab; ++v) {
        double acc = bias[v];
        const double* row = weight.data() + v * d;
        for (size_t j = 0; j < d; ++j) acc += row[j] * hidden[j];
        logits[v] = acc;
    }
    return logits;
}

Prompt mutate_validated(Mutator& mutator, MutatorOp op, const Prompt& seed,
                        const ImageBuffer& image, int retries) {
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < retries; ++attempt) {
        Prompt out = mutator.mutate(op, seed, image);
        auto err = validate_mutation(op, seed, out);
        if (!err) return out;
        last_error = *err;
    }
    throw SchemaViolationError(mutator_op_name(op) + ": " + last_error);
}

// ---------------------------------------------------------------------------
// Lexicons
// ---------------------------------------------------------------------------

const std::vector<std::string>& core_word_list() {
    static const std::vector<std::string> words = {
        "alfa",     "bravo",   "charlie", "delta",   "echo",    "foxtrot", "golf",    "hotel",
        "india",    "juliett", "kilo",    "lima",    "mike",    "november", "oscar",  "papa",
        "quebec",   "romeo",   "sierra",  "tango",   "uniform", "victor",  "whiskey", "xray",
        "yankee",   "zulu",    "amber",   "azure",   "coral",   "crimson", "indigo",  "ivory",
        "jade",     "magenta", "maroon",  "ochre",   "olive",   "pearl",   "russet",  "sable",
        "scarlet",  "teal",    "badger",  "bison",   "crane",   "falcon",  "gecko",   "heron",
        "ibis",     "jackal",  "koala",   "lemur",   "lynx",    "marten",  "newt",    "otter",
        "panda",    "quail",   "raven",   "seal",    "tapir",   "viper",   "walrus",  "wombat",
    };
    return words;
}

const std::vector<std::string>& description_tag_pool() {
    static const std::vector<std::string> tags = {
        "meadow",     "forest",    "river",      "mountain", "valley",    "harbor",
        "desert",     "glacier",   "island",     "canyon",   "village",   "tower",
        "sunrise",    "sunset",    "moonlight",  "overcast", "fog",       "mist",
        "rain",       "snow",      "wide",       "closeup",  "aerial",    "profile",
        "portrait",   "landscape", "soft",       "golden",   "dramatic",  "dim",
        "bright",     "backlit",   "vivid",      "muted",    "warm",      "cool",
        "pastel",     "monochrome", "detailed",  "sharp",    "textured",  "glossy",
        "rough",      "smooth",    "foreground", "background", "horizon", "reflection",
    };
    return tags;
}

const std::vector<std::string>& style_tag_pool() {
    static const std::vector<std::string> tags = {
        "watercolor", "ink",        "charcoal",   "gouache",   "fresco",     "woodcut",
        "linocut",    "etching",    "collage",    "mosaic",    "origami",    "stencil",
        "neon",       "chrome",     "celluloid",  "polaroid",  "risograph",  "blueprint",
        "holographic", "lowpoly",   "voxel",      "cinematic", "isometric",  "macro",
    };
    return tags;
}

const std::vector<std::string>& global_lexicon() {
    static const std::vector<std::string> lex = [] {
        std::vector<std::string> all = core_word_list();
        const auto& d = description_tag_pool();
        const auto& s = style_tag_pool();
        all.insert(all.end(), d.begin(), d.end());
        all.insert(all.end(), s.begin(), s.end());
        return all;
    }();
    return lex;
}

std::vector<std::string> bag_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

SyntheticVocab::SyntheticVocab(int vocab_size) {
    const auto& words = core_word_list();
    if (vocab_size < 2 || vocab_size > static_cast<int>(words.size()) + 1) {
        throw std::invalid_argument("SyntheticVocab: vocab_size out of range");
    }
    lexemes_.reserve(vocab_size);
    lexemes_.push_back("<eos>");
    for (int i = 0; i + 1 < vocab_size; ++i) lexemes_.push_back(words[i]);
}

const std::string& SyntheticVocab::lexeme(TokenId t) const {
    if (t < 0 || t >= size()) throw std::out_of_range("SyntheticVocab: token out of range");
    return lexemes_[t];
}

std::string SyntheticVocab::detokenize(const std::vector<TokenId>& tokens) const {
    std::string out;
    for (TokenId t : tokens) {
        if (t == eos_id()) continue;
        if (!out.empty()) out.push_back(' ');
        out += lexeme(t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

SyntheticEmbedder::SyntheticEmbedder(const SyntheticConfig& cfg)
    : dim_(cfg.embed_dim), seed_(cfg.seed) {
    if (cfg.embed_dim < 2) throw std::invalid_argument("SyntheticEmbedder: embed_dim too small");
}

EmbeddingVector SyntheticEmbedder::word_vector(const std::string& word) const {
    Rng rng(seed_ ^ hash_string("wordvec") ^ hash_string(word));
    std::vector<double> v(dim_);
    for (auto& x : v) x = rng.normal();
    return EmbeddingVector(std::move(v)).normalized();
}

EmbeddingVector SyntheticEmbedder::embed_bag(std::vector<std::string> words) const {
    if (words.empty()) throw std::invalid_argument("embed: no words in input");
    // Sorted accumulation makes equal bags embed bitwise-identically
    // regardless of word order.
    std::sort(words.begin(), words.end());
    std::vector<double> acc(dim_, 0.0);
    for (const auto& w : words) {
        const auto wv = word_vector(w);
        for (size_t i = 0; i < dim_; ++i) acc[i] += wv[i];
    }
    // An epsilon-weight sqrt(count) component along a reserved unit direction
    // separates proportional bags ({w} vs {w,w}), which a plain normalized
    // sum cannot distinguish. The weight is small so cross-bag cosine stays
    // dominated by word overlap.
    const auto count_dir = word_vector("\x01" "bag-count");
    const double scale = 0.05 * std::sqrt(double(words.size()));
    for (size_t i = 0; i < dim_; ++i) acc[i] += scale * count_dir[i];
    return EmbeddingVector(std::move(acc)).normalized();
}

EmbeddingVector SyntheticEmbedder::embed_text(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("embed_text: empty input");
    return embed_bag(bag_words(text));
}

EmbeddingVector SyntheticEmbedder::embed_image(const ImageBuffer& image) {
    auto words = SyntheticGenerator::decode_words(image);
    if (!words.empty()) return embed_bag(std::move(words));
    // No payload: derive a stable nonzero vector from the raw pixels.
    uint64_t h = 1469598103934665603ULL;
    for (uint8_t b : image.pixels) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    Rng rng(seed_ ^ hash_string("rawimage") ^ h);
    std::vector<double> v(dim_);
    for (auto& x : v) x = rng.normal();
    return EmbeddingVector(std::move(v)).normalized();
}

// ---------------------------------------------------------------------------
// Generator: word ids written as per-row intensity levels
//
// Row layout: rows 0-1 hold the word count (high/low base-16 digit), rows
// 2+2i / 3+2i hold word i's lexicon id. A digit k fills its row with
// intensity 16*k, giving a +-8 decoding margin, far above the row-mean
// shift produced by sigma-25 noise.
// ---------------------------------------------------------------------------

namespace {

// Digits live at mid-range intensities so clamped noise cannot bias a row
// mean across a decoding threshold: intensity 0 under N(0,25) noise gains
// about +10 from one-sided clamping, intensity 40 only +0.6.
constexpr int kDigitBase = 40;
constexpr int kDigitStep = 12;

int decode_row_digit(const ImageBuffer& img, int row) {
    double sum = 0.0;
    const size_t base = size_t(row) * img.width * 3;
    const size_t n = size_t(img.width) * 3;
    for (size_t i = 0; i < n; ++i) sum += img.pixels[base + i];
    const int digit = static_cast<int>(std::lround((sum / double(n) - kDigitBase) / kDigitStep));
    return std::clamp(digit, 0, 15);
}

void fill_row(ImageBuffer& img, int row, int digit) {
    const size_t base = size_t(row) * img.width * 3;
    const size_t n = size_t(img.width) * 3;
    std::fill_n(img.pixels.begin() + base, n,
                static_cast<uint8_t>(kDigitBase + digit * kDigitStep));
}

int lexicon_id(const std::string& word) {
    const auto& lex = global_lexicon();
    for (size_t i = 0; i < lex.size(); ++i) {
        if (lex[i] == word) return static_cast<int>(i);
    }
    return static_cast<int>(lex.size());  // sentinel for out-of-lexicon words
}

}  // namespace

SyntheticGenerator::SyntheticGenerator(const SyntheticConfig& cfg)
    : width_(cfg.image_width), height_(cfg.image_height) {
    if (width_ < 8 || height_ < 8) throw std::invalid_argument("SyntheticGenerator: image too small");
}

ImageBuffer SyntheticGenerator::render_image(const std::string& prompt_text) const {
    ImageBuffer img(width_, height_, uint8_t(0));
    auto words = bag_words(prompt_text);
    const size_t capacity = size_t(height_ - 2) / 2;
    if (words.size() > capacity) words.resize(capacity);
    fill_row(img, 0, static_cast<int>(words.size()) / 16);
    fill_row(img, 1, static_cast<int>(words.size()) % 16);
    for (size_t i = 0; i < words.size(); ++i) {
        const int id = lexicon_id(words[i]);
        fill_row(img, 2 + 2 * static_cast<int>(i), id / 16);
        fill_row(img, 3 + 2 * static_cast<int>(i), id % 16);
    }
    return img;
}

ImageBuffer SyntheticGenerator::generate(const std::string& prompt_text, QueryLedger& ledger) {
    ledger.require_available();
    ImageBuffer img = render_image(prompt_text);
    ledger.consume_one();
    return img;
}

std::vector<std::string> SyntheticGenerator::decode_words(const ImageBuffer& image) {
    if (image.height < 4) return {};
    const auto& lex = global_lexicon();
    const int count = decode_row_digit(image, 0) * 16 + decode_row_digit(image, 1);
    const int capacity = (image.height - 2) / 2;
    std::vector<std::string> words;
    for (int i = 0; i < count && i < capacity; ++i) {
        const int id = decode_row_digit(image, 2 + 2 * i) * 16 + decode_row_digit(image, 3 + 2 * i);
        if (id < static_cast<int>(lex.size())) {
            words.push_back(lex[id]);
        } else {
            words.push_back("unknown");
        }
    }
    return words;
}

// ---------------------------------------------------------------------------
// Captioner
// ---------------------------------------------------------------------------

SyntheticCaptioner::SyntheticCaptioner(const SyntheticConfig& cfg)
    : d_(cfg.hidden_dim), vocab_(cfg.vocab_size), embed_dim_(cfg.embed_dim), seed_(cfg.seed) {
    if (d_ < 2) throw std::invalid_argument("SyntheticCaptioner: hidden_dim too small");
    if (vocab_ < 2) throw std::invalid_argument("SyntheticCaptioner: vocab too small");

    Rng rng(seed_ ^ hash_string("captioner"));
    bos_.resize(d_);
    for (auto& x : bos_) x = rng.normal();

    target_proj_.resize(d_ * embed_dim_);
    const double tp_scale = 1.0 / std::sqrt(double(embed_dim_));
    for (auto& x : target_proj_) x = rng.normal() * tp_scale;

    head_.vocab = vocab_;
    head_.d = d_;
    head_.weight.resize(vocab_ * d_);
    const double h_scale = cfg.captioner_sharpness / std::sqrt(double(d_));
    for (auto& x : head_.weight) x = rng.normal() * h_scale;
    head_.bias.resize(vocab_);
    for (auto& x : head_.bias) x = rng.normal() * 0.1 * cfg.captioner_sharpness;
}

CaptionerStep SyntheticCaptioner::step(const TokenSequence& prefix, const EmbeddingVector& target) {
    if (target.dim() != embed_dim_) {
        throw std::invalid_argument("captioner_step: target embedding dimension mismatch");
    }
    std::vector<double> u = bos_;
    for (size_t j = 0; j < d_; ++j) {
        double acc = 0.0;
        const double* row = target_proj_.data() + j * embed_dim_;
        for (size_t k = 0; k < embed_dim_; ++k) acc += row[k] * target[k];
        u[j] += acc;
    }
    const auto& toks = prefix.tokens();
    for (size_t i = 0; i < toks.size(); ++i) {
        uint64_t mix = seed_ ^ hash_string("tokpos");
        mix ^= uint64_t(toks[i]) * 0x9e3779b97f4a7c15ULL;
        mix ^= (uint64_t(i) + 1) * 0xc2b2ae3d27d4eb4fULL;
        Rng trng(mix);
        for (size_t j = 0; j < d_; ++j) u[j] += trng.normal();
    }
    CaptionerStep out;
    out.hidden.resize(d_);
    for (size_t j = 0; j < d_; ++j) out.hidden[j] = std::tanh(u[j]);
    out.logits = head_.apply(out.hidden);
    return out;
}

// ---------------------------------------------------------------------------
// Mutator
// ---------------------------------------------------------------------------

SyntheticMutator::SyntheticMutator(uint64_t seed, std::vector<std::string> subject_lexicon)
    : rng_(seed ^ hash_string("mutator")), subject_lexicon_(std::move(subject_lexicon)) {
    if (subject_lexicon_.empty()) {
        throw std::invalid_argument("SyntheticMutator: subject lexicon is empty");
    }
}

std::string SyntheticMutator::random_subject_word(const std::vector<std::string>& current_bag,
                                                  const std::vector<std::string>& grounded) {
    const double u = rng_.next_double();
    if (u < 0.5 && !grounded.empty()) {
        // image-grounded proposal, like the real operators
        return grounded[rng_.below(grounded.size())];
    }
    if (u < 0.85) {
        std::vector<std::string> novel;
        for (const auto& w : subject_lexicon_) {
            if (std::find(current_bag.begin(), current_bag.end(), w) == current_bag.end()) {
                novel.push_back(w);
            }
        }
        if (!novel.empty()) return novel[rng_.below(novel.size())];
    }
    return subject_lexicon_[rng_.below(subject_lexicon_.size())];
}

std::string SyntheticMutator::sample_tags(const std::vector<std::string>& pool,
                                          const std::vector<std::string>& grounded, int min_words,
                                          int max_words) {
    const int n = rng_.uniform_int(min_words, std::min<int>(max_words, int(pool.size())));
    // Visible tags first, blind pool draws after.
    std::vector<std::string> visible;
    for (const auto& w : grounded) {
        if (std::find(pool.begin(), pool.end(), w) != pool.end() &&
            std::find(visible.begin(), visible.end(), w) == visible.end()) {
            visible.push_back(w);
        }
    }
    std::vector<std::string> chosen;
    for (const auto& w : visible) {
        if (int(chosen.size()) >= n) break;
        if (rng_.bernoulli(0.7)) chosen.push_back(w);
    }
    std::vector<std::string> rest = pool;
    for (size_t i = 0; i + 1 < rest.size(); ++i) {  // Fisher-Yates
        const size_t j = i + rng_.below(rest.size() - i);
        std::swap(rest[i], rest[j]);
    }
    for (const auto& w : rest) {
        if (int(chosen.size()) >= n) break;
        if (std::find(chosen.begin(), chosen.end(), w) == chosen.end()) chosen.push_back(w);
    }
    std::string out;
    for (const auto& w : chosen) {
        if (!out.empty()) out += ", ";
        out += w;
    }
    return out;
}

Prompt SyntheticMutator::mutate(MutatorOp op, const Prompt& seed, const ImageBuffer& image) {
    const auto grounded = SyntheticGenerator::decode_words(image);
    auto words = split_words(seed.subject());
    switch (op) {
        case MutatorOp::subject_paraphrase: {
            // Edit mix leans toward replace/delete: paraphrases keep subjects
            // short, so shrinking moves must be at least as common as growth.
            const int edits = rng_.bernoulli(0.8) ? 1 : 2;
            for (int e = 0; e < edits; ++e) {
                enum { kReplace, kDelete, kInsert, kSwap };
                const double u = rng_.next_double();
                int kind = u < 0.40 ? kReplace : u < 0.70 ? kDelete : u < 0.85 ? kInsert : kSwap;
                if (words.size() <= 1 && (kind == kDelete || kind == kSwap)) kind = kReplace;
                if (words.size() >= 15 && kind == kInsert) kind = kReplace;
                switch (kind) {
                    case kReplace:
                        words[rng_.below(words.size())] = random_subject_word(words, grounded);
                        break;
                    case kInsert:
                        words.insert(words.begin() + rng_.below(words.size() + 1),
                                     random_subject_word(words, grounded));
                        break;
                    case kDelete:
                        words.erase(words.begin() + rng_.below(words.size()));
                        break;
                    case kSwap: {
                        const size_t i = rng_.below(words.size() - 1);
                        std::swap(words[i], words[i + 1]);
                        break;
                    }
                }
            }
            std::string subject;
            for (const auto& w : words) {
                if (!subject.empty()) subject.push_back(' ');
                subject += w;
            }
            return seed.with_subject(subject);
        }
        case MutatorOp::subject_enrich: {
            const int k = rng_.uniform_int(2, 6);
            for (int i = 0; i < k; ++i) {
                words.insert(words.begin() + rng_.below(words.size() + 1),
                             random_subject_word(words, grounded));
            }
            std::string subject;
            for (const auto& w : words) {
                if (!subject.empty()) subject.push_back(' ');
                subject += w;
            }
            return seed.with_subject(subject);
        }
        case MutatorOp::subject_fix_grammar: {
            // Cleanup only: drop repeated words anywhere, at most two so the
            // length stays within the template's +-2 window.
            std::vector<std::string> cleaned;
            int removed = 0;
            for (const auto& w : words) {
                const bool dup = std::find(cleaned.begin(), cleaned.end(), w) != cleaned.end();
                if (dup && removed < 2) {
                    ++removed;
                    continue;
                }
                cleaned.push_back(w);
            }
            std::string subject;
            for (const auto& w : cleaned) {
                if (!subject.empty()) subject.push_back(' ');
                subject += w;
            }
            return seed.with_subject(subject);
        }
        case MutatorOp::modifier_generate:
            return seed.with_description_and_style(
                sample_tags(description_tag_pool(), grounded, 15, 35),
                sample_tags(style_tag_pool(), grounded, 2, 6));
        case MutatorOp::modifier_description:
            return seed.with_description(sample_tags(description_tag_pool(), grounded, 15, 35));
        case MutatorOp::modifier_style:
            return seed.with_style(sample_tags(style_tag_pool(), grounded, 2, 6));
    }
    throw std::logic_error("unknown mutator op");
}

SyntheticBackends::SyntheticBackends(const SyntheticConfig& cfg,
                                     std::vector<std::string> subject_lexicon)
    : config(cfg), vocab(cfg.vocab_size) {
    if (subject_lexicon.empty()) {
        const auto& words = core_word_list();
        subject_lexicon.assign(words.begin(), words.begin() + (cfg.vocab_size - 1));
    }
    generator = std::make_unique<SyntheticGenerator>(cfg);
    embedder = std::make_unique<SyntheticEmbedder>(cfg);
    captioner = std::make_unique<SyntheticCaptioner>(cfg);
    mutator = std::make_unique<SyntheticMutator>(cfg.seed, std::move(subject_lexicon));
}

BruteForceResult brute_force_best_subject(SyntheticEmbedder& embedder,
                                          const std::vector<std::string>& lexicon, int max_words,
                                          const EmbeddingVector& target) {
    if (lexicon.empty() || max_words < 1) {
        throw std::invalid_argument("brute_force_best_subject: empty search space");
    }
    BruteForceResult result;
    std::vector<size_t> idx;
    for (int len = 1; len <= max_words; ++len) {
        idx.assign(len, 0);
        while (true) {
            std::string text;
            for (int i = 0; i < len; ++i) {
                if (!text.empty()) text.push_back(' ');
                text += lexicon[idx[i]];
            }
            const double score = cosine(embedder.embed_text(text), target);
            ++result.candidates;
            if (score > result.best_score) {
                result.best_score = score;
                result.best_text = text;
            }
            int pos = len - 1;
            while (pos >= 0 && ++idx[pos] == lexicon.size()) {
                idx[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }
    return result;
}

}  // namespace pinv
