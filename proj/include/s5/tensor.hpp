#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "s5/error.hpp"

namespace s5 {

class Tape;

// Dense row-major tensor of doubles. Immutable once built; copies share the
// underlying buffer. `node` links the value to the tape that recorded it
// (-1 when the value is not being differentiated).
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> dims);
    static Tensor full(std::vector<int> dims, double value);
    static Tensor scalar(double value);
    static Tensor eye(int n);
    // Validating constructor: rejects NaN/Inf and dims/data size mismatch.
    static Tensor from_data(std::vector<int> dims, std::vector<double> values);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& dims() const { return dims_; }
    int ndim() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_.at(static_cast<size_t>(i)); }
    int64_t size() const;

    const std::vector<double>& values() const;
    double operator[](int64_t flat) const { return values()[static_cast<size_t>(flat)]; }
    double at2(int i, int j) const; // 2-D accessor
    double item() const;            // scalar only

    int node() const { return node_; }
    bool on_tape() const { return node_ >= 0; }
    const Tape* tape() const { return tape_; }
    // True when this value was recorded on exactly this live tape (guards
    // against a stale pointer aliasing a newly allocated tape).
    bool on(const Tape* tape) const;

    // Same buffer, detached from any tape.
    Tensor detached() const;
    // Same buffer and node, new dims (size must match).
    Tensor reshaped(std::vector<int> dims) const;

  private:
    friend class Tape;
    friend Tensor make_tensor(std::vector<int> dims, std::vector<double>&& values);
    friend Tensor with_node(const Tensor& t, Tape* tape, int node);

    std::vector<int> dims_;
    std::shared_ptr<const std::vector<double>> data_;
    Tape* tape_ = nullptr;
    uint64_t tape_gen_ = 0;
    int node_ = -1;
};

// Internal: build a tensor without the finiteness scan (debug builds still
// scan; see tensor.cpp).
Tensor make_tensor(std::vector<int> dims, std::vector<double>&& values);
Tensor with_node(const Tensor& t, Tape* tape, int node);

int64_t checked_size(const std::vector<int>& dims);

// Reverse-mode tape. Single-use: record a forward pass, call backward() once,
// read gradients, discard. Confined to one thread.
class Tape {
  public:
    using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a leaf; the returned tensor shares the buffer and carries a
    // node id so downstream ops record their backward rules.
    Tensor watch(const Tensor& t);

    // Reverse accumulation from a scalar loss recorded on this tape.
    void backward(const Tensor& loss);

    bool backward_done() const { return used_; }
    size_t node_count() const { return nodes_.size(); }

    // Gradient of the last backward() w.r.t. a watched/recorded tensor.
    // Zeros if the tensor never influenced the loss.
    Tensor grad(const Tensor& t) const;
    bool has_nonzero_grad(const Tensor& t) const;

    // Recording interface used by the ops.
    int record(int64_t out_size, std::vector<int> inputs, BackwardFn fn);
    void accumulate(int node, const std::vector<double>& g);
    void accumulate_at(int node, int64_t offset, const double* g, int64_t count);

    uint64_t generation() const { return generation_; }

    static Tape* active();

  private:
    friend class TapeScope;
    struct Node {
        std::vector<int> inputs;
        BackwardFn fn;
        int64_t out_size;
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    uint64_t generation_;
    bool used_ = false;
};

// RAII activation of a tape on the current thread. Ops record onto the active
// tape whenever at least one input is on it.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

// Temporarily deactivates any tape (value-only evaluation).
class NoTapeScope {
  public:
    NoTapeScope();
    ~NoTapeScope();
    NoTapeScope(const NoTapeScope&) = delete;
    NoTapeScope& operator=(const NoTapeScope&) = delete;

  private:
    Tape* previous_;
};

} // namespace s5
