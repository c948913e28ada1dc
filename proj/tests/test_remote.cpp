#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pinv/mutator_templates.hpp"
#include "pinv/png_io.hpp"
#include "pinv/remote.hpp"

using namespace pinv;
using nlohmann::json;

namespace {

// In-process mock service covering the four endpoints.
class MockServer {
public:
    MockServer() {
        server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
            last_generate_body = req.body;
            ++generate_calls;
            if (fail_next_with_500 > 0) {
                --fail_next_with_500;
                res.status = 500;
                return;
            }
            if (respond_with_embedding) {
                res.set_content(json{{"embedding", {1.0, 0.0, 0.0}}}.dump(), "application/json");
                return;
            }
            ImageBuffer img(2, 2, uint8_t(9));
            if (respond_with_png) {
                const auto bytes = encode_png(img);
                res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
            } else {
                res.set_header("X-Image-Width", "2");
                res.set_header("X-Image-Height", "2");
                res.set_content(std::string(img.pixels.begin(), img.pixels.end()),
                                "application/octet-stream");
            }
        });
        server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
            last_embed_body = req.body;
            res.set_content(json{{"embedding", {0.5, 0.5}}, {"dim", 2}}.dump(),
                            "application/json");
        });
        server_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
            last_chat_body = req.body;
            res.set_content(json{{"content", chat_content}}.dump(), "application/json");
        });
        server_.Post("/score", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"score", 0.73}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    RemoteConfig config() const {
        RemoteConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port_);
        cfg.timeout_s = 5.0;
        cfg.retries = 2;
        return cfg;
    }

    std::string last_generate_body, last_embed_body, last_chat_body;
    std::string chat_content = R"({"base_prompt":"a red fox"})";
    std::atomic<int> generate_calls{0};
    int fail_next_with_500 = 0;
    bool respond_with_embedding = false;
    bool respond_with_png = false;

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace

TEST_CASE("base64 round trip and reference vector") {
    CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
    CHECK(base64_encode({'M', 'a'}) == "TWE=");
    CHECK(base64_encode({'M'}) == "TQ==");
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<uint8_t> data(size_t(rng.uniform_int(0, 100)));
        for (auto& b : data) b = uint8_t(rng.below(256));
        CHECK(base64_decode(base64_encode(data)) == data);
    }
    CHECK_THROWS(base64_decode("not*base64"));
}

TEST_CASE("remote generate: raw bytes, png, and embedding response forms") {
    MockServer server;
    RemoteGenerator gen(server.config(), 7);
    QueryLedger ledger(10);

    const ImageBuffer img = gen.generate("a cat", ledger);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(ledger.used() == 1);
    const json body = json::parse(server.last_generate_body);
    CHECK(body["prompt"] == "a cat");
    CHECK(body["seed"] == 7);

    server.respond_with_png = true;
    CHECK(gen.generate("a dog", ledger).width == 2);
    CHECK(ledger.used() == 2);

    server.respond_with_png = false;
    server.respond_with_embedding = true;
    const GenerateResponse full = gen.generate_full("a bird", ledger);
    CHECK_FALSE(full.image.has_value());
    REQUIRE(full.embedding.has_value());
    CHECK(full.embedding->dim() == 3);
    CHECK(ledger.used() == 3);
    // the Generator interface needs pixels; embedding-only is an error there
    CHECK_THROWS_AS(gen.generate("a bird", ledger), TransportError);
}

TEST_CASE("remote 5xx retries then fails without consuming budget") {
    MockServer server;
    RemoteGenerator gen(server.config(), std::nullopt);
    QueryLedger ledger(10);
    server.fail_next_with_500 = 10;  // more failures than retries
    CHECK_THROWS_AS(gen.generate("x", ledger), TransportError);
    CHECK(ledger.used() == 0);
    CHECK(server.generate_calls == 3);  // initial try + 2 retries

    // budget-exhausted check happens before any wire traffic
    QueryLedger empty(1);
    empty.consume_one();
    server.generate_calls = 0;
    CHECK_THROWS_AS(gen.generate("x", empty), BudgetExhaustedError);
    CHECK(server.generate_calls == 0);
}

TEST_CASE("remote transient failure then success consumes exactly one query") {
    MockServer server;
    RemoteGenerator gen(server.config(), std::nullopt);
    QueryLedger ledger(10);
    server.fail_next_with_500 = 1;  // first attempt 500, retry succeeds
    const ImageBuffer img = gen.generate("y", ledger);
    CHECK(img.width == 2);
    CHECK(ledger.used() == 1);
}

TEST_CASE("remote embedder sends text and png-image payloads") {
    MockServer server;
    RemoteEmbedder emb(server.config());
    const auto vt = emb.embed_text("hello");
    CHECK(vt.dim() == 2);
    CHECK(json::parse(server.last_embed_body)["text"] == "hello");
    CHECK_THROWS_AS(emb.embed_text(""), std::invalid_argument);

    ImageBuffer img(3, 3, uint8_t(4));
    emb.embed_image(img);
    const json body = json::parse(server.last_embed_body);
    REQUIRE(body.contains("image_b64"));
    const auto png_bytes = base64_decode(body["image_b64"].get<std::string>());
    CHECK(decode_png(png_bytes) == img);
    CHECK(emb.dim() == 2);
}

TEST_CASE("remote mutator round trip carries templates and parses content") {
    MockServer server;
    RemoteMutator mut(server.config());
    const ImageBuffer img(2, 2, uint8_t(1));
    Prompt seed("a red fox runs");

    const Prompt out = mut.mutate(MutatorOp::subject_paraphrase, seed, img);
    CHECK(out.subject() == "a red fox");

    const json body = json::parse(server.last_chat_body);
    CHECK(body["system"] == mutator_system_prompt());
    const std::string user = body["user"].get<std::string>();
    CHECK(user.find("task: PARAPHRASE") == 0);
    CHECK(user.find("base prompt: 'a red fox runs'") != std::string::npos);
    CHECK(user.find("{base_prompt}'") == std::string::npos);  // placeholder substituted
    REQUIRE(body.contains("image_b64"));
}

TEST_CASE("remote scorer parses the score field") {
    MockServer server;
    RemoteScorer scorer(server.config());
    const ImageBuffer a(2, 2, uint8_t(0)), b(2, 2, uint8_t(1));
    CHECK(scorer.score(a, b) == doctest::Approx(0.73));
}

TEST_CASE("mutator responses must be exactly one single-line json object") {
    Prompt seed("a cat sits");
    CHECK_THROWS_AS(
        apply_mutator_response(MutatorOp::subject_paraphrase, seed, "{\"base_prompt\":\"x\"}\n{}"),
        SchemaViolationError);
    CHECK_THROWS_AS(apply_mutator_response(MutatorOp::subject_paraphrase, seed, "not json"),
                    SchemaViolationError);
    CHECK_THROWS_AS(apply_mutator_response(MutatorOp::subject_paraphrase, seed, "[1,2]"),
                    SchemaViolationError);
    CHECK_THROWS_AS(apply_mutator_response(MutatorOp::subject_paraphrase, seed,
                                           R"({"base_prompt":"x","extra":"y"})"),
                    SchemaViolationError);
    CHECK_THROWS_AS(apply_mutator_response(MutatorOp::subject_paraphrase, seed,
                                           R"({"description":"x"})"),
                    SchemaViolationError);
    CHECK_THROWS_AS(apply_mutator_response(MutatorOp::modifier_generate, seed,
                                           R"({"description":"x"})"),
                    SchemaViolationError);
    CHECK_THROWS_AS(apply_mutator_response(MutatorOp::modifier_style, seed,
                                           R"({"style": 3})"),
                    SchemaViolationError);

    const Prompt both = apply_mutator_response(
        MutatorOp::modifier_generate, seed, R"({"description":"red dunes, wide shot","style":"ink"})");
    CHECK(both.description() == "red dunes, wide shot");
    CHECK(both.style() == "ink");
    CHECK(both.subject() == seed.subject());

    const Prompt styled =
        apply_mutator_response(MutatorOp::modifier_style, seed, R"({"style":"photorealistic"})");
    CHECK(styled.style() == "photorealistic");
}

TEST_CASE("stored templates carry the operator contracts verbatim") {
    const std::string& sys = mutator_system_prompt();
    CHECK(sys.find("you are a prompt mutator for text-to-image diffusion models.\n") == 0);
    CHECK(sys.find("return EXACTLY ONE SINGLE-LINE JSON object") != std::string::npos);
    CHECK(sys.find("description: 15-35 words") != std::string::npos);
    CHECK(sys.find("style: <= 12 words") != std::string::npos);
    CHECK(sys.find("base_prompt: <= 15 words") != std::string::npos);

    const std::string& para = mutator_user_template(MutatorOp::subject_paraphrase);
    CHECK(para.find("- <= 15 words total.\n") != std::string::npos);
    CHECK(para.find("WHO/WHAT + is doing + WHERE.") != std::string::npos);
    // the double line break before the closing instruction is preserved
    CHECK(para.find("no extra commentary.\n\nreturn ONLY the json line.\n") != std::string::npos);

    const std::string& enrich = mutator_user_template(MutatorOp::subject_enrich);
    CHECK(enrich.find("INSERT 2–6 words total") != std::string::npos);  // en dash
    CHECK(enrich.find("ordered subsequence") != std::string::npos);

    const std::string& fix = mutator_user_template(MutatorOp::subject_fix_grammar);
    CHECK(fix.find("within ±2 words of the original") != std::string::npos);  // plus-minus

    const std::string& gen = mutator_user_template(MutatorOp::modifier_generate);
    CHECK(gen.find("description: 15–35 words") != std::string::npos);
    CHECK(gen.find("style: <= 12 words; medium/movement/lens/quality only") != std::string::npos);

    const std::string& desc = mutator_user_template(MutatorOp::modifier_description);
    CHECK(desc.find("(15–35 words)") != std::string::npos);
    CHECK(desc.find("{description-from-parent}") != std::string::npos);

    const std::string& style = mutator_user_template(MutatorOp::modifier_style);
    CHECK(style.find("(<=12 words)") != std::string::npos);
    CHECK(style.find("{style-from-parent}") != std::string::npos);
}

TEST_CASE("template instantiation substitutes parent fields") {
    Prompt seed("two boats drift", "calm lake, morning mist", "watercolor");
    const std::string user = instantiate_user_template(MutatorOp::modifier_style, seed);
    CHECK(user.find("current style: watercolor\n") != std::string::npos);
    CHECK(user.find("current description: calm lake, morning mist\n") != std::string::npos);
    CHECK(user.find("base prompt: 'two boats drift'") != std::string::npos);

    Prompt bare("two boats drift");
    const std::string user2 = instantiate_user_template(MutatorOp::modifier_style, bare);
    CHECK(user2.find("current style: none\n") != std::string::npos);
}
