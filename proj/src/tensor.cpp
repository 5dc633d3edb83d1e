#include "s5/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>

#include "s5/mem.hpp"

namespace s5 {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::shared_ptr<const std::vector<double>> alloc_buffer(std::vector<double>&& v) {
    const int64_t bytes = static_cast<int64_t>(v.size() * sizeof(double));
    mem::add(bytes);
    return std::shared_ptr<const std::vector<double>>(
        new std::vector<double>(std::move(v)),
        [bytes](const std::vector<double>* p) {
            mem::sub(bytes);
            delete p;
        });
}

void check_finite(const std::vector<double>& v, const char* where) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericalError(std::string("non-finite value in ") + where);
        }
    }
}

} // namespace

int64_t checked_size(const std::vector<int>& dims) {
    int64_t n = 1;
    for (int d : dims) {
        if (d <= 0) {
            throw ShapeError("tensor extents must be positive");
        }
        n *= d;
    }
    return n;
}

Tensor make_tensor(std::vector<int> dims, std::vector<double>&& values) {
    Tensor t;
    if (checked_size(dims) != static_cast<int64_t>(values.size())) {
        throw ShapeError("tensor data length does not match dims");
    }
#ifndef NDEBUG
    check_finite(values, "op result");
#endif
    t.dims_ = std::move(dims);
    t.data_ = alloc_buffer(std::move(values));
    return t;
}

Tensor with_node(const Tensor& t, Tape* tape, int node) {
    Tensor out = t;
    out.tape_ = tape;
    out.tape_gen_ = tape ? tape->generation() : 0;
    out.node_ = node;
    return out;
}

bool Tensor::on(const Tape* tape) const {
    return node_ >= 0 && tape != nullptr && tape_ == tape &&
           tape_gen_ == tape->generation();
}

Tensor Tensor::zeros(std::vector<int> dims) {
    int64_t n = checked_size(dims);
    return make_tensor(std::move(dims), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> dims, double value) {
    int64_t n = checked_size(dims);
    return make_tensor(std::move(dims), std::vector<double>(static_cast<size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::eye(int n) {
    if (n <= 0) {
        throw ArgError("eye: n must be positive");
    }
    std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        v[static_cast<size_t>(i) * n + i] = 1.0;
    }
    return make_tensor({n, n}, std::move(v));
}

Tensor Tensor::from_data(std::vector<int> dims, std::vector<double> values) {
    check_finite(values, "tensor construction");
    return make_tensor(std::move(dims), std::move(values));
}

int64_t Tensor::size() const {
    return data_ ? static_cast<int64_t>(data_->size()) : 0;
}

const std::vector<double>& Tensor::values() const {
    if (!data_) {
        throw UsageError("reading an undefined tensor");
    }
    return *data_;
}

double Tensor::at2(int i, int j) const {
    if (ndim() != 2) {
        throw ShapeError("at2 requires a 2-D tensor");
    }
    return values()[static_cast<size_t>(i) * dims_[1] + static_cast<size_t>(j)];
}

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("item() requires a scalar tensor");
    }
    return values()[0];
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
}

Tensor Tensor::reshaped(std::vector<int> dims) const {
    if (checked_size(dims) != size()) {
        throw ShapeError("reshape size mismatch");
    }
    Tensor t = *this;
    t.dims_ = std::move(dims);
    return t;
}

// ---------------------------------------------------------------------------
// Tape

namespace {
std::atomic<uint64_t> g_tape_generation{1};
} // namespace

Tape::Tape() : generation_(g_tape_generation.fetch_add(1, std::memory_order_relaxed)) {}

Tape::~Tape() {
    for (const std::vector<double>& g : grads_) {
        if (!g.empty()) {
            mem::sub(static_cast<int64_t>(g.size() * sizeof(double)));
        }
    }
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

NoTapeScope::NoTapeScope() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoTapeScope::~NoTapeScope() { g_active_tape = previous_; }

Tensor Tape::watch(const Tensor& t) {
    if (!t.defined()) {
        throw UsageError("cannot watch an undefined tensor");
    }
    if (t.on(this)) {
        return t;
    }
    int id = record(t.size(), {}, nullptr);
    return with_node(t, this, id);
}

int Tape::record(int64_t out_size, std::vector<int> inputs, BackwardFn fn) {
    int id = static_cast<int>(nodes_.size());
    for (int in : inputs) {
        if (in < 0 || in >= id) {
            throw UsageError("tape inputs must precede the node recording them");
        }
    }
    nodes_.push_back(Node{std::move(inputs), std::move(fn), out_size});
    grads_.emplace_back();
    return id;
}

void Tape::accumulate(int node, const std::vector<double>& g) {
    accumulate_at(node, 0, g.data(), static_cast<int64_t>(g.size()));
}

void Tape::accumulate_at(int node, int64_t offset, const double* g, int64_t count) {
    std::vector<double>& buf = grads_[static_cast<size_t>(node)];
    if (buf.empty()) {
        const int64_t bytes =
            static_cast<int64_t>(nodes_[static_cast<size_t>(node)].out_size) * 8;
        mem::add(bytes);
        buf.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].out_size), 0.0);
    }
    if (offset + count > static_cast<int64_t>(buf.size())) {
        throw ShapeError("gradient accumulation out of range");
    }
    double* dst = buf.data() + offset;
    for (int64_t i = 0; i < count; ++i) {
        dst[i] += g[i];
    }
}

void Tape::backward(const Tensor& loss) {
    if (used_) {
        throw UsageError("backward() already called on this tape");
    }
    if (loss.size() != 1) {
        throw ShapeError("backward() requires a scalar loss");
    }
    if (!loss.on(this)) {
        throw UsageError("loss was not recorded on this tape");
    }
    used_ = true;
    accumulate(loss.node(), {1.0});
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        const Node& node = nodes_[static_cast<size_t>(id)];
        if (!node.fn || grads_[static_cast<size_t>(id)].empty()) {
            continue;
        }
        node.fn(*this, grads_[static_cast<size_t>(id)]);
    }
}

Tensor Tape::grad(const Tensor& t) const {
    if (!t.on(this)) {
        throw UsageError("tensor is not on this tape");
    }
    const std::vector<double>& buf = grads_[static_cast<size_t>(t.node())];
    if (buf.empty()) {
        return Tensor::zeros(t.dims());
    }
    return make_tensor(t.dims(), std::vector<double>(buf));
}

bool Tape::has_nonzero_grad(const Tensor& t) const {
    if (!t.on(this)) {
        return false;
    }
    for (double g : grads_[static_cast<size_t>(t.node())]) {
        if (g != 0.0) {
            return true;
        }
    }
    return false;
}

} // namespace s5
