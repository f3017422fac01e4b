#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wmsr {

/// Raised when an operation's shape or argument contract is violated.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for misuse of the gradient tape (non-scalar loss, replayed tape...).
class AutogradError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Shape {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    constexpr std::size_t numel() const { return n * c * h * w; }
    constexpr std::size_t plane() const { return h * w; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

template <typename T>
class Tape;

template <typename T>
struct TensorStorage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    const Tape<T>* tape = nullptr;
    std::optional<std::size_t> tape_node;

    void accumulate_grad(std::span<const T> g) {
        if (!requires_grad) return;
        if (grad.empty()) {
            grad.assign(g.begin(), g.end());
            return;
        }
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
    std::span<T> grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

/// Dense NCHW tensor with shared storage. Copies alias the same buffer.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() : s_(std::make_shared<TensorStorage<T>>()) {}
    explicit Tensor(Shape shape, T fill = T(0)) : s_(std::make_shared<TensorStorage<T>>()) {
        s_->shape = shape;
        s_->data.assign(shape.numel(), fill);
    }
    Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<TensorStorage<T>>()) {
        if (values.size() != shape.numel())
            throw ContractError("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + shape.str());
        s_->shape = shape;
        s_->data = std::move(values);
    }

    static Tensor zeros(Shape shape) { return Tensor(shape); }
    static Tensor full(Shape shape, T v) { return Tensor(shape, v); }
    static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

    const Shape& shape() const { return s_->shape; }
    std::size_t numel() const { return s_->data.size(); }

    std::span<T> data() { return s_->data; }
    std::span<const T> data() const { return s_->data; }

    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return s_->data[index(n, c, h, w)]; }
    T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const { return s_->data[index(n, c, h, w)]; }
    T item() const {
        if (numel() != 1) throw ContractError("item() on tensor of shape " + shape().str());
        return s_->data[0];
    }

    bool requires_grad() const { return s_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        s_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return !s_->grad.empty(); }
    std::span<const T> grad() const { return s_->grad; }
    std::span<T> mutable_grad() { return s_->grad_buffer(); }
    void zero_grad() { std::fill(s_->grad.begin(), s_->grad.end(), T(0)); }

    /// Fresh leaf with a copy of the values and no gradient linkage.
    Tensor detach() const { return Tensor(shape(), s_->data); }

    std::optional<std::size_t> tape_node() const { return s_->tape_node; }

    const std::shared_ptr<TensorStorage<T>>& storage() const { return s_; }
    bool same_storage(const Tensor& o) const { return s_ == o.s_; }

private:
    std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        const Shape& s = s_->shape;
        return ((n * s.c + c) * s.h + h) * s.w + w;
    }

    std::shared_ptr<TensorStorage<T>> s_;
};

/// Records differentiable operations while active on the current thread.
///
/// Nodes are appended in execution order, which is a topological order of
/// the computation. backward() walks them once in reverse; afterwards the
/// tape is consumed and releases its saved activations.
template <typename T>
class Tape {
public:
    using Storage = std::shared_ptr<TensorStorage<T>>;

    struct Node {
        std::string_view op;
        std::vector<Storage> inputs;
        Storage output;
        std::function<void()> backward;
    };

    class Scope {
    public:
        explicit Scope(Tape* t) : prev_(current()) { current() = t; }
        ~Scope() { current() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    Tape() = default;
    ~Tape() { detach_nodes(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] Scope activate() { return Scope(this); }
    static Tape* active() { return current(); }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }
    const std::vector<Node>& nodes() const { return nodes_; }

    /// Appends a node; input storages must already belong to this tape or be leaves.
    void record(std::string_view op, std::vector<Storage> inputs, const Storage& output,
                std::function<void()> backward) {
        if (consumed_) throw AutogradError("cannot record onto a consumed tape");
        output->requires_grad = true;
        output->tape = this;
        output->tape_node = nodes_.size();
        nodes_.push_back(Node{op, std::move(inputs), output, std::move(backward)});
    }

    void backward(const Tensor<T>& loss) {
        if (loss.shape() != Shape{1, 1, 1, 1})
            throw AutogradError("backward() requires a scalar loss, got shape " + loss.shape().str());
        if (consumed_) throw AutogradError("backward() called twice on the same tape");
        const auto& s = loss.storage();
        if (s->tape != this || !s->tape_node)
            throw AutogradError("loss was not produced on this tape");
        consumed_ = true;
        s->grad_buffer()[0] += T(1);
        for (std::size_t i = *s->tape_node + 1; i-- > 0;) {
            Node& node = nodes_[i];
            if (!node.output->grad.empty()) node.backward();
        }
        detach_nodes();
    }

private:
    void detach_nodes() {
        for (auto& node : nodes_) {
            node.output->tape = nullptr;
            node.output->tape_node.reset();
        }
        nodes_.clear();
        nodes_.shrink_to_fit();
    }

    static Tape*& current() {
        thread_local Tape* t = nullptr;
        return t;
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

/// Backward through the tape that produced `loss`.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.shape() != Shape{1, 1, 1, 1})
        throw AutogradError("backward() requires a scalar loss, got shape " + loss.shape().str());
    const Tape<T>* owner = loss.storage()->tape;
    if (!owner) throw AutogradError("loss is not attached to a live tape (already consumed?)");
    const_cast<Tape<T>*>(owner)->backward(loss);
}

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> xs) {
    for (auto* x : xs)
        if (x->requires_grad()) return true;
    return false;
}

/// Records a node when a tape is active and some input requires grad.
template <typename T, typename Fn>
void maybe_record(std::string_view op, std::initializer_list<const Tensor<T>*> inputs, Tensor<T>& out,
                  Fn&& backward_fn) {
    Tape<T>* tape = Tape<T>::active();
    if (!tape || !any_requires_grad<T>(inputs)) return;
    std::vector<typename Tape<T>::Storage> ins;
    for (auto* x : inputs) ins.push_back(x->storage());
    tape->record(op, std::move(ins), out.storage(), std::forward<Fn>(backward_fn));
}

}  // namespace detail

}  // namespace wmsr
