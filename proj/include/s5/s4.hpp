#pragma once

#include <functional>
#include <string>
#include <utility>

#include "s5/ops.hpp"
#include "s5/tensor.hpp"

namespace s5 {

using ParamVisitor = std::function<void(const std::string&, Tensor&, bool /*trainable*/)>;

// State-space layer parameters: one trainable state matrix shared across
// channels, per-channel input/output maps and log step sizes.
struct SsmLayerParams {
    Tensor a;         // [NxN], HiPPO at init
    Tensor b_in;      // [DxN]
    Tensor c_out;     // [DxN]
    Tensor log_delta; // [D]; delta = exp(log_delta) > 0 by construction

    int state_dim() const { return a.defined() ? a.dim(0) : 0; }
    int channels() const { return b_in.defined() ? b_in.dim(0) : 0; }

    void visit(const std::string& prefix, const ParamVisitor& v);
};

// Materialized convolution kernel: row d holds {CB, CAB, ..., CA^(L-1)B} for
// channel d after discretization.
struct S4Kernel {
    Tensor kbar; // [DxL]
    int length() const { return kbar.defined() ? kbar.dim(1) : 0; }
    int channels() const { return kbar.defined() ? kbar.dim(0) : 0; }
};

// Latent state of the recurrence, one N-vector per channel.
struct SsmState {
    Tensor x; // [DxN]
};

// The state matrix of the long-memory initialization: strictly lower part
// -sqrt(2n+1)sqrt(2k+1), diagonal -(n+1), zero above the diagonal.
Tensor hippo_init(int n);

// Bilinear transform: solves (I - delta*A/2) abar = (I + delta*A/2) and
// (I - delta*A/2) bbar = delta*B via LU, never an explicit inverse.
// `delta` is a positive scalar tensor so gradients reach the step size.
std::pair<Tensor, Tensor> discretize(const Tensor& a, const Tensor& b,
                                     const Tensor& delta);

// Unrolls the discrete recurrence on the tape so a, b_in, c_out and log_delta
// all receive gradients through the L-step recursion.
S4Kernel materialize_kernel(const SsmLayerParams& params, int len);

// Per-channel causal convolution of u[LxD] with the kernel, via FFT.
Tensor fft_conv(const Tensor& u, const S4Kernel& kernel);

// materialize_kernel + fft_conv. Output length equals input length.
Tensor s4_forward(const SsmLayerParams& params, const Tensor& u);

// Reuses a pre-materialized kernel (one materialization per optimizer step
// serves every sample in the batch).
Tensor s4_forward_with_kernel(const S4Kernel& kernel, const Tensor& u);

// Sequential-state oracle for the convolution path; forward only.
Tensor recurrent_scan(const SsmLayerParams& params, const Tensor& u);

// HiPPO state matrix, random B/C, log-uniform step sizes over
// [delta_min, delta_max].
SsmLayerParams init_ssm_params(int state_dim, int channels, Rng& rng,
                               double delta_min = 1e-3, double delta_max = 1e-1);

} // namespace s5
