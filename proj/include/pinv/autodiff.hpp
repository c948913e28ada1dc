#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pinv {

// Parameter tensor with accumulated gradient. rows x cols, row-major;
// cols == 1 for vectors, rows == 1 && cols == 1 for scalars.
struct Tensor {
    std::string name;
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;

    Tensor(std::string n, size_t r, size_t c)
        : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Reverse-mode tape over double vectors. Covers exactly the compositions the
// adapter/value-head losses need: affine maps, rectifier, log-softmax,
// elementwise/scalar arithmetic, clip and min for the clipped surrogate.
class Tape {
public:
    using Id = int32_t;

    Id input(std::vector<double> v);
    Id scalar_input(double v) { return input({v}); }

    // y = W x + b. Parameter gradients are skipped when track_params is
    // false (frozen layers); the input gradient always flows.
    Id affine(Tensor& weight, Tensor& bias, Id x, bool track_params = true);
    Id relu(Id x);
    Id add(Id a, Id b);  // elementwise, equal sizes
    Id log_softmax(Id x);
    Id pick(Id x, size_t index);  // scalar: x[index]

    Id add_s(Id a, Id b);
    Id sub_s(Id a, Id b);
    Id mul_s(Id a, Id b);
    Id mul_const(Id a, double c);
    Id add_const(Id a, double c);
    Id exp_s(Id a);
    Id square_s(Id a);
    Id min_s(Id a, Id b);
    Id clamp_s(Id a, double lo, double hi);
    Id entropy_of_log_probs(Id log_probs);  // scalar: -sum exp(lp)*lp

    double scalar(Id id) const;
    const std::vector<double>& value(Id id) const;

    // Accumulates parameter gradients into Tensor::grad.
    void backward(Id loss, double seed = 1.0);

    void clear();
    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : uint8_t {
        input, affine, relu, add, log_softmax, pick,
        add_s, sub_s, mul_s, mul_const, add_const, exp_s, square_s, min_s, clamp_s, entropy,
    };

    struct Node {
        Op op;
        Id a = -1;
        Id b = -1;
        Tensor* weight = nullptr;
        Tensor* bias = nullptr;
        bool track = false;
        size_t index = 0;
        double c0 = 0.0;
        double c1 = 0.0;
        std::vector<double> val;
        std::vector<double> adj;
    };

    Id push(Node n);
    const Node& node(Id id) const { return nodes_[size_t(id)]; }

    std::vector<Node> nodes_;
};

// Adam with bias correction; one optimizer owns one parameter group.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step();
    void zero_grad();
    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace pinv
