#include "pinv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pinv {

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(std::vector<double> v) {
    Node n;
    n.op = Op::input;
    n.val = std::move(v);
    return push(std::move(n));
}

Tape::Id Tape::affine(Tensor& weight, Tensor& bias, Id x, bool track_params) {
    const auto& xv = nodes_[x].val;
    if (weight.cols != xv.size() || bias.size() != weight.rows) {
        throw std::invalid_argument("affine: dimension mismatch");
    }
    Node n;
    n.op = Op::affine;
    n.a = x;
    n.weight = &weight;
    n.bias = &bias;
    n.track = track_params;
    n.val.resize(weight.rows);
    for (size_t i = 0; i < weight.rows; ++i) {
        double acc = bias.value[i];
        const double* row = weight.value.data() + i * weight.cols;
        for (size_t j = 0; j < weight.cols; ++j) acc += row[j] * xv[j];
        n.val[i] = acc;
    }
    return push(std::move(n));
}

Tape::Id Tape::relu(Id x) {
    Node n;
    n.op = Op::relu;
    n.a = x;
    n.val = nodes_[x].val;
    for (auto& v : n.val) v = std::max(v, 0.0);
    return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
    if (nodes_[a].val.size() != nodes_[b].val.size()) {
        throw std::invalid_argument("add: size mismatch");
    }
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.val = nodes_[a].val;
    const auto& bv = nodes_[b].val;
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] += bv[i];
    return push(std::move(n));
}

Tape::Id Tape::log_softmax(Id x) {
    Node n;
    n.op = Op::log_softmax;
    n.a = x;
    const auto& xv = nodes_[x].val;
    const double mx = *std::max_element(xv.begin(), xv.end());
    double sum = 0.0;
    for (double v : xv) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    n.val.resize(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) n.val[i] = xv[i] - lse;
    return push(std::move(n));
}

Tape::Id Tape::pick(Id x, size_t index) {
    if (index >= nodes_[x].val.size()) throw std::out_of_range("pick: index out of range");
    Node n;
    n.op = Op::pick;
    n.a = x;
    n.index = index;
    n.val = {nodes_[x].val[index]};
    return push(std::move(n));
}

namespace {
void expect_scalar(const std::vector<double>& v, const char* what) {
    if (v.size() != 1) throw std::invalid_argument(std::string(what) + ": scalar expected");
}
}  // namespace

Tape::Id Tape::add_s(Id a, Id b) {
    expect_scalar(nodes_[a].val, "add_s");
    expect_scalar(nodes_[b].val, "add_s");
    Node n;
    n.op = Op::add_s;
    n.a = a;
    n.b = b;
    n.val = {nodes_[a].val[0] + nodes_[b].val[0]};
    return push(std::move(n));
}

Tape::Id Tape::sub_s(Id a, Id b) {
    expect_scalar(nodes_[a].val, "sub_s");
    expect_scalar(nodes_[b].val, "sub_s");
    Node n;
    n.op = Op::sub_s;
    n.a = a;
    n.b = b;
    n.val = {nodes_[a].val[0] - nodes_[b].val[0]};
    return push(std::move(n));
}

Tape::Id Tape::mul_s(Id a, Id b) {
    expect_scalar(nodes_[a].val, "mul_s");
    expect_scalar(nodes_[b].val, "mul_s");
    Node n;
    n.op = Op::mul_s;
    n.a = a;
    n.b = b;
    n.val = {nodes_[a].val[0] * nodes_[b].val[0]};
    return push(std::move(n));
}

Tape::Id Tape::mul_const(Id a, double c) {
    expect_scalar(nodes_[a].val, "mul_const");
    Node n;
    n.op = Op::mul_const;
    n.a = a;
    n.c0 = c;
    n.val = {nodes_[a].val[0] * c};
    return push(std::move(n));
}

Tape::Id Tape::add_const(Id a, double c) {
    expect_scalar(nodes_[a].val, "add_const");
    Node n;
    n.op = Op::add_const;
    n.a = a;
    n.c0 = c;
    n.val = {nodes_[a].val[0] + c};
    return push(std::move(n));
}

Tape::Id Tape::exp_s(Id a) {
    expect_scalar(nodes_[a].val, "exp_s");
    Node n;
    n.op = Op::exp_s;
    n.a = a;
    n.val = {std::exp(nodes_[a].val[0])};
    return push(std::move(n));
}

Tape::Id Tape::square_s(Id a) {
    expect_scalar(nodes_[a].val, "square_s");
    Node n;
    n.op = Op::square_s;
    n.a = a;
    n.val = {nodes_[a].val[0] * nodes_[a].val[0]};
    return push(std::move(n));
}

Tape::Id Tape::min_s(Id a, Id b) {
    expect_scalar(nodes_[a].val, "min_s");
    expect_scalar(nodes_[b].val, "min_s");
    Node n;
    n.op = Op::min_s;
    n.a = a;
    n.b = b;
    n.val = {std::min(nodes_[a].val[0], nodes_[b].val[0])};
    return push(std::move(n));
}

Tape::Id Tape::clamp_s(Id a, double lo, double hi) {
    expect_scalar(nodes_[a].val, "clamp_s");
    Node n;
    n.op = Op::clamp_s;
    n.a = a;
    n.c0 = lo;
    n.c1 = hi;
    n.val = {std::clamp(nodes_[a].val[0], lo, hi)};
    return push(std::move(n));
}

Tape::Id Tape::entropy_of_log_probs(Id log_probs) {
    Node n;
    n.op = Op::entropy;
    n.a = log_probs;
    double h = 0.0;
    for (double lp : nodes_[log_probs].val) h -= std::exp(lp) * lp;
    n.val = {h};
    return push(std::move(n));
}

double Tape::scalar(Id id) const {
    expect_scalar(nodes_[id].val, "scalar");
    return nodes_[id].val[0];
}

const std::vector<double>& Tape::value(Id id) const { return nodes_[id].val; }

void Tape::backward(Id loss, double seed) {
    expect_scalar(nodes_[loss].val, "backward");
    for (auto& n : nodes_) n.adj.assign(n.val.size(), 0.0);
    nodes_[loss].adj[0] = seed;

    for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        bool any = false;
        for (double g : n.adj) {
            if (g != 0.0) {
                any = true;
                break;
            }
        }
        if (!any) continue;
        switch (n.op) {
            case Op::input:
                break;
            case Op::affine: {
                Node& x = nodes_[n.a];
                const size_t rows = n.weight->rows, cols = n.weight->cols;
                for (size_t r = 0; r < rows; ++r) {
                    const double g = n.adj[r];
                    if (g == 0.0) continue;
                    const double* wrow = n.weight->value.data() + r * cols;
                    if (n.track) {
                        double* grow = n.weight->grad.data() + r * cols;
                        for (size_t c = 0; c < cols; ++c) grow[c] += g * x.val[c];
                        n.bias->grad[r] += g;
                    }
                    for (size_t c = 0; c < cols; ++c) x.adj[c] += g * wrow[c];
                }
                break;
            }
            case Op::relu: {
                Node& x = nodes_[n.a];
                for (size_t k = 0; k < n.val.size(); ++k) {
                    if (x.val[k] > 0.0) x.adj[k] += n.adj[k];
                }
                break;
            }
            case Op::add: {
                Node& x = nodes_[n.a];
                Node& y = nodes_[n.b];
                for (size_t k = 0; k < n.val.size(); ++k) {
                    x.adj[k] += n.adj[k];
                    y.adj[k] += n.adj[k];
                }
                break;
            }
            case Op::log_softmax: {
                Node& x = nodes_[n.a];
                double gsum = 0.0;
                for (double g : n.adj) gsum += g;
                for (size_t k = 0; k < n.val.size(); ++k) {
                    x.adj[k] += n.adj[k] - std::exp(n.val[k]) * gsum;
                }
                break;
            }
            case Op::pick:
                nodes_[n.a].adj[n.index] += n.adj[0];
                break;
            case Op::add_s:
                nodes_[n.a].adj[0] += n.adj[0];
                nodes_[n.b].adj[0] += n.adj[0];
                break;
            case Op::sub_s:
                nodes_[n.a].adj[0] += n.adj[0];
                nodes_[n.b].adj[0] -= n.adj[0];
                break;
            case Op::mul_s:
                nodes_[n.a].adj[0] += n.adj[0] * nodes_[n.b].val[0];
                nodes_[n.b].adj[0] += n.adj[0] * nodes_[n.a].val[0];
                break;
            case Op::mul_const:
                nodes_[n.a].adj[0] += n.adj[0] * n.c0;
                break;
            case Op::add_const:
                nodes_[n.a].adj[0] += n.adj[0];
                break;
            case Op::exp_s:
                nodes_[n.a].adj[0] += n.adj[0] * n.val[0];
                break;
            case Op::square_s:
                nodes_[n.a].adj[0] += n.adj[0] * 2.0 * nodes_[n.a].val[0];
                break;
            case Op::min_s:
                if (nodes_[n.a].val[0] <= nodes_[n.b].val[0]) {
                    nodes_[n.a].adj[0] += n.adj[0];
                } else {
                    nodes_[n.b].adj[0] += n.adj[0];
                }
                break;
            case Op::clamp_s: {
                const double v = nodes_[n.a].val[0];
                if (v >= n.c0 && v <= n.c1) nodes_[n.a].adj[0] += n.adj[0];
                break;
            }
            case Op::entropy: {
                Node& x = nodes_[n.a];
                for (size_t k = 0; k < x.val.size(); ++k) {
                    x.adj[k] += n.adj[0] * (-std::exp(x.val[k]) * (x.val[k] + 1.0));
                }
                break;
            }
        }
    }
}

void Tape::clear() { nodes_.clear(); }

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        for (size_t k = 0; k < p.size(); ++k) {
            const double g = p.grad[k];
            if (!std::isfinite(g)) {
                throw std::runtime_error("AdamOptimizer: non-finite gradient in " + p.name);
            }
            m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
            v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][k] / bc1;
            const double vhat = v_[i][k] / bc2;
            p.value[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

}  // namespace pinv
