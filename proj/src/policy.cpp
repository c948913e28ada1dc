#include "pinv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pinv {

AdapterParams::AdapterParams(size_t d_in, size_t expansion_dim, uint64_t seed)
    : d(d_in),
      expansion(expansion_dim),
      w1("adapter.w1", expansion_dim, d_in),
      b1("adapter.b1", expansion_dim, 1),
      w2("adapter.w2", d_in, expansion_dim),
      b2("adapter.b2", d_in, 1) {
    Rng rng(seed ^ hash_string("adapter"));
    const double scale = 1.0 / std::sqrt(double(d_in));
    for (auto& v : w1.value) v = rng.normal() * scale;
    // w2, b2, b1 stay zero: residual output starts as identity.
}

ValueHeadParams::ValueHeadParams(size_t d) : w("value.w", 1, d), b("value.b", 1, 1) {}

PolicyNet::PolicyNet(size_t d, size_t expansion, const FrozenLmHead& head, uint64_t seed)
    : adapter_(d, expansion, seed),
      value_head_(d),
      lm_w_("lm_head.w", head.vocab, head.d),
      lm_b_("lm_head.b", head.vocab, 1) {
    if (head.d != d) throw std::invalid_argument("PolicyNet: head dimension mismatch");
    lm_w_.value = head.weight;
    lm_b_.value = head.bias;
}

PolicyNet::GraphNodes PolicyNet::build_graph(Tape& tape, const std::vector<double>& hidden) const {
    if (hidden.size() != adapter_.d) throw std::invalid_argument("PolicyNet: hidden dim mismatch");
    for (double v : hidden) {
        if (!std::isfinite(v)) throw std::invalid_argument("PolicyNet: non-finite hidden state");
    }
    const Tape::Id h = tape.input(hidden);
    const Tape::Id mid = tape.relu(tape.affine(adapter_.w1, adapter_.b1, h));
    const Tape::Id proj = tape.affine(adapter_.w2, adapter_.b2, mid);
    const Tape::Id adapted = tape.add(h, proj);
    const Tape::Id logits = tape.affine(lm_w_, lm_b_, adapted, /*track_params=*/false);
    const Tape::Id log_probs = tape.log_softmax(logits);
    const Tape::Id value = tape.pick(tape.affine(value_head_.w, value_head_.b, adapted), 0);
    return GraphNodes{adapted, logits, log_probs, value};
}

PolicyOutput PolicyNet::forward(const CaptionerStep& step) const {
    Tape tape;
    GraphNodes nodes = build_graph(tape, step.hidden);
    PolicyOutput out;
    out.action_logits = tape.value(nodes.logits);
    out.action_log_probs = tape.value(nodes.log_probs);
    out.value = tape.scalar(nodes.value);
    return out;
}

std::vector<Tensor*> PolicyNet::trainable_tensors() {
    std::vector<Tensor*> out = adapter_.tensors();
    for (Tensor* t : value_head_.tensors()) out.push_back(t);
    return out;
}

std::vector<const Tensor*> PolicyNet::all_tensors() const {
    std::vector<const Tensor*> out;
    for (const Tensor* t : adapter_.tensors()) out.push_back(t);
    for (const Tensor* t : value_head_.tensors()) out.push_back(t);
    out.push_back(&lm_w_);
    out.push_back(&lm_b_);
    return out;
}

std::vector<Tensor*> PolicyNet::all_tensors() {
    std::vector<Tensor*> out;
    for (Tensor* t : adapter_.tensors()) out.push_back(t);
    for (Tensor* t : value_head_.tensors()) out.push_back(t);
    out.push_back(&lm_w_);
    out.push_back(&lm_b_);
    return out;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

std::pair<TokenId, double> sample_action(const PolicyOutput& out, Rng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    const auto& lp = out.action_log_probs;
    for (size_t i = 0; i < lp.size(); ++i) {
        acc += std::exp(lp[i]);
        if (u < acc) return {static_cast<TokenId>(i), lp[i]};
    }
    const TokenId last = static_cast<TokenId>(lp.size() - 1);
    return {last, lp[last]};
}

namespace {
constexpr uint32_t kCheckpointMagic = 0x50494e56;  // "PINV"
constexpr uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Tensor*>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    write_u32(os, kCheckpointMagic);
    write_u32(os, kCheckpointVersion);
    write_u64(os, tensors.size());
    for (const Tensor* t : tensors) {
        write_u64(os, t->name.size());
        os.write(t->name.data(), std::streamsize(t->name.size()));
        write_u64(os, t->rows);
        write_u64(os, t->cols);
        os.write(reinterpret_cast<const char*>(t->value.data()),
                 std::streamsize(t->value.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed");
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<Tensor*>& tensors) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    if (read_u32(is) != kCheckpointMagic) throw std::runtime_error("load_checkpoint: bad magic");
    if (read_u32(is) != kCheckpointVersion) throw std::runtime_error("load_checkpoint: bad version");
    const uint64_t count = read_u64(is);
    if (count != tensors.size()) throw std::runtime_error("load_checkpoint: tensor count mismatch");
    for (Tensor* t : tensors) {
        const uint64_t name_len = read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), std::streamsize(name_len));
        const uint64_t rows = read_u64(is);
        const uint64_t cols = read_u64(is);
        if (name != t->name || rows != t->rows || cols != t->cols) {
            throw std::runtime_error("load_checkpoint: shape/name mismatch for " + t->name);
        }
        is.read(reinterpret_cast<char*>(t->value.data()),
                std::streamsize(t->value.size() * sizeof(double)));
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file");
}

}  // namespace pinv
