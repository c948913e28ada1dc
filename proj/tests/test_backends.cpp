#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "pinv/backends.hpp"
#include "pinv/similarity.hpp"

using namespace pinv;

namespace {

SyntheticConfig desk_config(uint64_t seed = 42) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("query ledger counts successful generations exactly") {
    QueryLedger ledger(3);
    CHECK(ledger.remaining() == 3);
    ledger.consume_one();
    ledger.consume_one();
    ledger.consume_one();
    CHECK(ledger.exhausted());
    CHECK_THROWS_AS(ledger.consume_one(), BudgetExhaustedError);
    CHECK_THROWS_AS(ledger.require_available(), BudgetExhaustedError);
    CHECK(ledger.used() == 3);
    CHECK_THROWS_AS(QueryLedger(0), std::invalid_argument);
}

TEST_CASE("generator handle invariants") {
    GeneratorHandle remote{GeneratorHandle::Kind::remote, std::nullopt, std::nullopt};
    CHECK_THROWS_AS(remote.validate(), std::invalid_argument);
    remote.endpoint = "http://localhost:1";
    CHECK_NOTHROW(remote.validate());

    GeneratorHandle synth{GeneratorHandle::Kind::synthetic, std::nullopt, std::nullopt};
    CHECK_THROWS_AS(synth.validate(), std::invalid_argument);
    synth.seed = 7;
    CHECK_NOTHROW(synth.validate());
}

TEST_CASE("synthetic generate is deterministic and budget-exact") {
    SyntheticGenerator gen(desk_config());
    QueryLedger ledger(2);
    const ImageBuffer a = gen.generate("alfa bravo", ledger);
    const ImageBuffer b = gen.generate("alfa bravo", ledger);
    CHECK(a == b);
    CHECK(ledger.used() == 2);
    CHECK_THROWS_AS(gen.generate("alfa", ledger), BudgetExhaustedError);
    CHECK(ledger.used() == 2);  // failed call does not consume
}

TEST_CASE("synthetic text embedding is a deterministic bag of words") {
    SyntheticEmbedder emb(desk_config());
    CHECK(emb.embed_text("alfa") == emb.embed_text("alfa"));
    CHECK(emb.embed_text("alfa bravo") == emb.embed_text("bravo alfa"));  // order invariance
    CHECK(emb.embed_text("alfa bravo") == emb.embed_text("Alfa, BRAVO!"));
    CHECK(cosine(emb.embed_text("alfa alfa"), emb.embed_text("alfa")) < 1.0 - 1e-6);
    CHECK_THROWS_AS(emb.embed_text(""), std::invalid_argument);
    CHECK(emb.embed_text("alfa").dim() == 64);
}

TEST_CASE("round trip: embed_image(generate(p)) equals embed_text(p) bitwise") {
    auto cfg = desk_config();
    SyntheticGenerator gen(cfg);
    SyntheticEmbedder emb(cfg);
    QueryLedger ledger(10);
    for (const std::string prompt :
         {"alfa", "alfa bravo charlie", "delta delta echo", "meadow forest, watercolor, alfa"}) {
        const ImageBuffer img = gen.generate(prompt, ledger);
        CHECK(emb.embed_image(img) == emb.embed_text(prompt));
    }
}

TEST_CASE("oracle soundness: image cosine hits 1 iff bags of words match") {
    auto cfg = desk_config();
    SyntheticGenerator gen(cfg);
    SyntheticEmbedder emb(cfg);
    QueryLedger ledger(100);
    auto score = [&](const std::string& a, const std::string& b) {
        return cosine(emb.embed_image(gen.generate(a, ledger)),
                      emb.embed_image(gen.generate(b, ledger)));
    };
    // Equal bags give identical vectors; cosine is 1 up to one rounding ulp.
    CHECK(score("alfa bravo charlie", "charlie alfa bravo") >= 1.0 - 1e-12);
    CHECK(score("alfa alfa bravo", "bravo alfa alfa") >= 1.0 - 1e-12);
    CHECK(score("alfa bravo", "alfa bravo bravo") < 1.0 - 1e-6);
    CHECK(score("alfa", "alfa alfa") < 1.0 - 1e-6);  // proportional bags differ
    CHECK(score("alfa", "bravo") < 1.0 - 1e-6);
}

TEST_CASE("all-zero and arbitrary images embed to finite nonzero vectors") {
    SyntheticEmbedder emb(desk_config());
    const ImageBuffer zeros(32, 32, uint8_t(0));
    const auto v = emb.embed_image(zeros);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(emb.embed_image(zeros) == v);  // deterministic
    const ImageBuffer noisy(16, 16, uint8_t(201));
    CHECK(emb.embed_image(noisy).norm() > 0.0);
}

TEST_CASE("captioner step is frozen and deterministic") {
    auto cfg = desk_config();
    SyntheticCaptioner cap(cfg);
    SyntheticEmbedder emb(cfg);
    const auto target = emb.embed_text("alfa bravo");
    TokenSequence prefix(0, 20);
    const CaptionerStep a = cap.step(prefix, target);
    const CaptionerStep b = cap.step(prefix, target);
    CHECK(a.hidden == b.hidden);
    CHECK(a.logits == b.logits);
    CHECK(a.hidden.size() == 64);
    CHECK(a.logits.size() == 32);

    // empty prefix is a valid begin-of-sequence state; different prefixes
    // produce different hiddens
    const CaptionerStep c = cap.step(prefix.appended(3), target);
    CHECK(c.hidden != a.hidden);
}

TEST_CASE("captioner supports the full 768 hidden dimension") {
    auto cfg = desk_config();
    cfg.hidden_dim = 768;
    SyntheticCaptioner cap(cfg);
    SyntheticEmbedder emb(cfg);
    const auto step = cap.step(TokenSequence(0, 8), emb.embed_text("alfa"));
    CHECK(step.hidden.size() == 768);
}

TEST_CASE("lm head is a fixed affine map") {
    SyntheticCaptioner cap(desk_config());
    const FrozenLmHead& head = cap.head();
    CHECK(head.vocab == 32);
    CHECK(head.d == 64);

    const std::vector<double> zeros(64, 0.0);
    CHECK(head.apply(zeros) == head.bias);  // zero input -> bias

    // affine identity: f(u+v) == f(u) + f(v) - bias
    std::vector<double> u(64), v(64), uv(64);
    Rng rng(3);
    for (size_t i = 0; i < 64; ++i) {
        u[i] = rng.normal();
        v[i] = rng.normal();
        uv[i] = u[i] + v[i];
    }
    const auto fu = head.apply(u);
    const auto fv = head.apply(v);
    const auto fuv = head.apply(uv);
    for (size_t i = 0; i < fuv.size(); ++i) {
        CHECK(fuv[i] == doctest::Approx(fu[i] + fv[i] - head.bias[i]).epsilon(1e-9));
    }
    CHECK_THROWS_AS(head.apply(std::vector<double>(63, 0.0)), std::invalid_argument);
}

TEST_CASE("synthetic vocab detokenizes with single spaces, skipping eos") {
    SyntheticVocab vocab(8);
    CHECK(vocab.size() == 8);
    CHECK(vocab.lexeme(0) == "<eos>");
    CHECK(vocab.detokenize({1, 2, 0}) == "alfa bravo");
    CHECK(vocab.detokenize({0}) == "");
    CHECK_THROWS_AS(vocab.lexeme(9), std::out_of_range);
    CHECK_THROWS_AS(SyntheticVocab(1), std::invalid_argument);
}

TEST_CASE("synthetic mutators honor their operator schemas") {
    auto cfg = desk_config();
    SyntheticBackends backends(cfg);
    const ImageBuffer img(8, 8, uint8_t(0));
    Prompt seed("alfa bravo charlie");

    for (int trial = 0; trial < 200; ++trial) {
        for (MutatorOp op : all_mutator_ops) {
            const Prompt out = backends.mutator->mutate(op, seed, img);
            const auto err = validate_mutation(op, seed, out);
            CAPTURE(mutator_op_name(op));
            CAPTURE(out.render());
            CHECK_FALSE(err.has_value());
        }
    }
}

TEST_CASE("enrich preserves original tokens as an ordered subsequence") {
    auto cfg = desk_config();
    SyntheticBackends backends(cfg);
    const ImageBuffer img(8, 8, uint8_t(0));
    Prompt seed("alfa bravo");
    for (int trial = 0; trial < 100; ++trial) {
        const Prompt out = backends.mutator->mutate(MutatorOp::subject_enrich, seed, img);
        CHECK(is_ordered_subsequence(split_words(seed.subject()), split_words(out.subject())));
        const int inserted = word_count(out.subject()) - word_count(seed.subject());
        CHECK(inserted >= 2);
        CHECK(inserted <= 6);
    }
}

TEST_CASE("fix grammar removes duplicate runs within the +-2 window") {
    SyntheticBackends backends(desk_config());
    const ImageBuffer img(8, 8, uint8_t(0));
    const Prompt out = backends.mutator->mutate(MutatorOp::subject_fix_grammar,
                                                Prompt("alfa alfa bravo bravo charlie"), img);
    CHECK(out.subject() == "alfa bravo charlie");
}

TEST_CASE("modifier operators fill only their fields") {
    SyntheticBackends backends(desk_config());
    const ImageBuffer img(8, 8, uint8_t(0));
    Prompt seed("alfa", "old description words here that should stay around for the style op "
                        "plus filler to reach fifteen",
                "old style");

    const Prompt d = backends.mutator->mutate(MutatorOp::modifier_description, seed, img);
    CHECK(d.style() == seed.style());
    CHECK(d.description() != seed.description());

    const Prompt s = backends.mutator->mutate(MutatorOp::modifier_style, seed, img);
    CHECK(s.description() == seed.description());
    CHECK(s.style() != seed.style());

    const Prompt g = backends.mutator->mutate(MutatorOp::modifier_generate, seed, img);
    CHECK(g.description().has_value());
    CHECK(g.style().has_value());
    CHECK(g.subject() == seed.subject());
}

TEST_CASE("mutate_validated retries then reports schema failure") {
    struct BadMutator : Mutator {
        int calls = 0;
        Prompt mutate(MutatorOp, const Prompt& seed, const ImageBuffer&) override {
            ++calls;
            return seed.with_subject("one two three four five six seven eight nine ten eleven "
                                     "twelve thirteen fourteen fifteen sixteen");
        }
    } bad;
    const ImageBuffer img(4, 4, uint8_t(0));
    CHECK_THROWS_AS(
        mutate_validated(bad, MutatorOp::subject_paraphrase, Prompt("alfa"), img, 3),
        SchemaViolationError);
    CHECK(bad.calls == 3);
}

TEST_CASE("query ledger is exact under concurrent consumption") {
    QueryLedger ledger(500);
    std::vector<std::thread> threads;
    std::atomic<int> successes{0};
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 200; ++i) {
                try {
                    ledger.consume_one();
                    successes.fetch_add(1);
                } catch (const BudgetExhaustedError&) {
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(successes.load() == 500);
    CHECK(ledger.used() == 500);
    CHECK(ledger.exhausted());
}

TEST_CASE("brute force oracle enumerates the full sequence space") {
    auto cfg = desk_config();
    SyntheticEmbedder emb(cfg);
    std::vector<std::string> lexicon(core_word_list().begin(), core_word_list().begin() + 8);

    const auto target = emb.embed_text("bravo delta");
    const auto res = brute_force_best_subject(emb, lexicon, 3, target);
    CHECK(res.candidates == 8 + 8 * 8 + 8 * 8 * 8);
    CHECK(res.best_score == doctest::Approx(1.0).epsilon(1e-12));
    // Any word order with the right bag is optimal; check the bag.
    auto bag = bag_words(res.best_text);
    std::sort(bag.begin(), bag.end());
    CHECK(bag == std::vector<std::string>{"bravo", "delta"});
}
