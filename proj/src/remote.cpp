#include "pinv/remote.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "pinv/mutator_templates.hpp"
#include "pinv/png_io.hpp"

namespace pinv {

using nlohmann::json;

std::string base64_encode(const std::vector<uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (size_t i = 0; i < data.size(); i += 3) {
        uint32_t chunk = uint32_t(data[i]) << 16;
        if (i + 1 < data.size()) chunk |= uint32_t(data[i + 1]) << 8;
        if (i + 2 < data.size()) chunk |= uint32_t(data[i + 2]);
        out.push_back(alphabet[(chunk >> 18) & 0x3f]);
        out.push_back(alphabet[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < data.size() ? alphabet[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < data.size() ? alphabet[chunk & 0x3f] : '=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<uint8_t> out;
    uint32_t chunk = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = value_of(c);
        if (v < 0) throw std::invalid_argument("base64: invalid character");
        chunk = (chunk << 6) | uint32_t(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(uint8_t((chunk >> bits) & 0xff));
        }
    }
    return out;
}

namespace {

httplib::Client make_client(const RemoteConfig& cfg) {
    httplib::Client cli(cfg.base_url);
    const auto secs = std::chrono::milliseconds(int64_t(cfg.timeout_s * 1000));
    cli.set_connection_timeout(secs);
    cli.set_read_timeout(secs);
    cli.set_write_timeout(secs);
    if (!cfg.bearer_token.empty()) {
        cli.set_default_headers({{"Authorization", "Bearer " + cfg.bearer_token}});
    }
    return cli;
}

// POSTs with transport retries; 2xx responses are returned, everything else
// becomes a TransportError after the retry budget.
httplib::Result post_with_retries(const RemoteConfig& cfg, const std::string& path,
                                  const std::string& body) {
    std::string last_error = "no attempt";
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        auto cli = make_client(cfg);
        auto res = cli.Post(path, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) return res;
        last_error = res ? "status " + std::to_string(res->status)
                         : "connection error " + httplib::to_string(res.error());
    }
    throw TransportError(path + ": " + last_error);
}

std::string image_to_b64_png(const ImageBuffer& img) { return base64_encode(encode_png(img)); }

}  // namespace

RemoteGenerator::RemoteGenerator(RemoteConfig cfg, std::optional<uint64_t> seed)
    : cfg_(std::move(cfg)), seed_(seed) {}

GenerateResponse RemoteGenerator::generate_full(const std::string& prompt_text,
                                                QueryLedger& ledger) {
    ledger.require_available();
    json body{{"prompt", prompt_text}};
    if (seed_) body["seed"] = *seed_;
    auto res = post_with_retries(cfg_, "/generate", body.dump());

    GenerateResponse out;
    const std::string content_type = res->get_header_value("Content-Type");
    if (content_type.find("application/json") != std::string::npos) {
        const json j = json::parse(res->body);
        if (!j.contains("embedding")) throw TransportError("/generate: embedding missing");
        out.embedding = EmbeddingVector(j["embedding"].get<std::vector<double>>());
    } else if (content_type.find("image/png") != std::string::npos) {
        out.image = decode_png(std::vector<uint8_t>(res->body.begin(), res->body.end()));
    } else {
        const int w = std::stoi(res->get_header_value("X-Image-Width"));
        const int h = std::stoi(res->get_header_value("X-Image-Height"));
        out.image = ImageBuffer(w, h, std::vector<uint8_t>(res->body.begin(), res->body.end()));
    }
    ledger.consume_one();
    return out;
}

ImageBuffer RemoteGenerator::generate(const std::string& prompt_text, QueryLedger& ledger) {
    GenerateResponse res = generate_full(prompt_text, ledger);
    if (!res.image) throw TransportError("/generate: service returned no image payload");
    return std::move(*res.image);
}

RemoteEmbedder::RemoteEmbedder(RemoteConfig cfg, size_t expected_dim)
    : cfg_(std::move(cfg)), dim_(expected_dim) {}

EmbeddingVector RemoteEmbedder::parse_embedding(const std::string& body) {
    const json j = json::parse(body);
    if (!j.contains("embedding")) throw TransportError("/embed: embedding missing");
    EmbeddingVector v(j["embedding"].get<std::vector<double>>());
    if (j.contains("dim") && j["dim"].get<size_t>() != v.dim()) {
        throw TransportError("/embed: dim field disagrees with payload");
    }
    if (dim_ == 0) dim_ = v.dim();
    if (v.dim() != dim_) throw TransportError("/embed: unexpected embedding dimension");
    return v;
}

EmbeddingVector RemoteEmbedder::embed_image(const ImageBuffer& image) {
    json body{{"image_b64", image_to_b64_png(image)}};
    return parse_embedding(post_with_retries(cfg_, "/embed", body.dump())->body);
}

EmbeddingVector RemoteEmbedder::embed_text(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("embed_text: empty input");
    json body{{"text", text}};
    return parse_embedding(post_with_retries(cfg_, "/embed", body.dump())->body);
}

Prompt apply_mutator_response(MutatorOp op, const Prompt& seed, const std::string& content) {
    if (content.find('\n') != std::string::npos || content.find('\r') != std::string::npos) {
        throw SchemaViolationError("mutator response is not single-line");
    }
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error&) {
        throw SchemaViolationError("mutator response is not valid JSON");
    }
    if (!j.is_object()) throw SchemaViolationError("mutator response is not a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "base_prompt" && key != "description" && key != "style") {
            throw SchemaViolationError("mutator response has unknown key: " + key);
        }
        if (!value.is_string()) throw SchemaViolationError("mutator field is not a string");
    }

    const bool has_base = j.contains("base_prompt");
    const bool has_desc = j.contains("description");
    const bool has_style = j.contains("style");
    switch (op) {
        case MutatorOp::subject_paraphrase:
        case MutatorOp::subject_enrich:
        case MutatorOp::subject_fix_grammar:
            if (!has_base || has_desc || has_style) {
                throw SchemaViolationError("subject operator expects {\"base_prompt\": ...}");
            }
            return seed.with_subject(j["base_prompt"].get<std::string>());
        case MutatorOp::modifier_generate:
            if (!has_desc || !has_style || has_base) {
                throw SchemaViolationError(
                    "modifier_generate expects {\"description\": ..., \"style\": ...}");
            }
            return seed.with_description_and_style(j["description"].get<std::string>(),
                                                   j["style"].get<std::string>());
        case MutatorOp::modifier_description:
            if (!has_desc || has_style || has_base) {
                throw SchemaViolationError("modifier_description expects {\"description\": ...}");
            }
            return seed.with_description(j["description"].get<std::string>());
        case MutatorOp::modifier_style:
            if (!has_style || has_desc || has_base) {
                throw SchemaViolationError("modifier_style expects {\"style\": ...}");
            }
            return seed.with_style(j["style"].get<std::string>());
    }
    throw std::logic_error("unknown mutator op");
}

RemoteMutator::RemoteMutator(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

Prompt RemoteMutator::mutate(MutatorOp op, const Prompt& seed, const ImageBuffer& image) {
    json body{{"system", mutator_system_prompt()},
              {"user", instantiate_user_template(op, seed)},
              {"image_b64", image_to_b64_png(image)}};
    auto res = post_with_retries(cfg_, "/chat", body.dump());
    const json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("content")) {
        throw TransportError("/chat: malformed response envelope");
    }
    return apply_mutator_response(op, seed, j["content"].get<std::string>());
}

RemoteScorer::RemoteScorer(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

double RemoteScorer::score(const ImageBuffer& a, const ImageBuffer& b) {
    json body{{"image_a_b64", image_to_b64_png(a)}, {"image_b_b64", image_to_b64_png(b)}};
    auto res = post_with_retries(cfg_, "/score", body.dump());
    const json j = json::parse(res->body);
    if (!j.contains("score")) throw TransportError("/score: score missing");
    const double s = j["score"].get<double>();
    if (!std::isfinite(s)) throw TransportError("/score: non-finite score");
    return s;
}

}  // namespace pinv
