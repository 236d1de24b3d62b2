#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nleq/ldpc/bp.hpp"
#include "nleq/ldpc/code.hpp"
#include "nleq/rng.hpp"

namespace nleq::nnbp {

/// An LLR frame is a flat vector of n_symbols * M values, symbol-major (value n*M + m is bit m
/// of symbol n), which is also codeword order. `stride` is the distance between neighbouring
/// symbols of one physical stream inside the frame (2 when I and Q symbols alternate).
struct StageDims {
    int L = 4;
    int M = 3;
    int nq = 40;
    int nr = 40;
    int stride = 1;

    int window() const { return 2 * L + 1; }
    int input_size() const { return window() * M; }
    /// Parameters of one per-bit network.
    std::size_t net_size() const;
    /// Parameters of a stage: networks for bits 1..M-1 (bit 0 is passed through).
    std::size_t stage_size() const { return net_size() * static_cast<std::size_t>(M - 1); }
    void validate() const;
    bool operator==(const StageDims&) const = default;
};

/// Offsets of the blocks of one network inside the flat parameter vector. Matrices are
/// column-major: wR, wB are nq x input_size, w2 is nr x nq.
struct NetLayout {
    std::size_t wR, wB, b1, w2, b2, w3, b3, size;
    explicit NetLayout(const StageDims& d);
};

struct EqualizerStage {
    StageDims dims;
    std::vector<double> params;  // net for bit m occupies [(m-1)*net_size, m*net_size)

    double* net(int m) { return params.data() + static_cast<std::size_t>(m - 1) * dims.net_size(); }
    const double* net(int m) const { return params.data() + static_cast<std::size_t>(m - 1) * dims.net_size(); }
};

/// Fan-in scaled uniform initialisation; b3 = 0; wB = 0 when `first_stage`.
EqualizerStage init_stage(const StageDims& dims, Rng& rng, bool first_stage);

/// All weights zero except b3 = value on every network.
EqualizerStage constant_stage(const StageDims& dims, double b3);

/// Activations kept for the adjoint pass.
struct StageActivations {
    Eigen::MatrixXd U, V;               // tanh(l/2) windows of lR and lB, input_size x n_symbols
    std::vector<Eigen::MatrixXd> Q, R;  // per network, post-ReLU
};

/// lN from lR and lB (same length, a multiple of M). Bit 0 is copied from lR.
std::vector<double> stage_forward(const EqualizerStage& stage, std::span<const double> lR, std::span<const double> lB,
                                  StageActivations* act = nullptr);

/// Adjoint of stage_forward. `d_lN` is the adjoint of the output; the weight adjoint is
/// accumulated into `d_params` (stage_size values) and, when non-empty, the adjoint w.r.t. lB
/// into `d_lB`.
void stage_backward(const EqualizerStage& stage, const StageActivations& act, std::span<const double> lB,
                    std::span<const double> d_lN, std::span<double> d_params, std::span<double> d_lB);

/// What stage k > 1 sees from the preceding BP run: its output LLRs, or those LLRs minus the
/// stage input that produced them (the decoder's extrinsic part).
enum class Feedback { posterior, extrinsic };

struct Schedule {
    int n_stages = 3;
    int n_bn = 5;   // BP iterations after every stage but the last
    int n_res = 40; // BP iterations after the last stage
    double lambda1 = 1.0, lambda2 = 1.0;
    Feedback feedback = Feedback::posterior;

    int iterations_after(int stage) const { return stage + 1 == n_stages ? n_res : n_bn; }
    int total_iterations() const { return n_bn * (n_stages - 1) + n_res; }
    void validate() const;
    /// Loss weight of bit m (0 for the MSB).
    double lambda(int m) const;
};

struct StageRecord {
    std::vector<double> lB_in;  // lB fed to the network (zeros for the first stage)
    StageActivations act;
    std::vector<ldpc::BpStepRecord> bp;
};

struct ForwardResult {
    std::vector<double> lB;
    std::vector<std::vector<double>> stage_lB;  // BP output after every stage
    std::vector<StageRecord> records;           // filled when recording
    int iterations = 0;
};

struct ForwardOptions {
    bool record = false;
    bool early_exit = false;  // stop BP of the last stage on a zero syndrome
};

/// Stage k feeds stage_forward(s_k, lR, lB_{k-1}) into BP started from a zero state.
ForwardResult full_forward(std::span<const EqualizerStage> stages, const Schedule& sched, std::span<const double> lR,
                           const ldpc::Code& code, const ForwardOptions& opt = {});

/// lambda1 L1 + lambda2 L2, L_m = mean over symbols of binary cross-entropy of bit m.
double loss(std::span<const double> lB, std::span<const std::uint8_t> bits, const Schedule& sched, int M);

/// Adjoint of loss w.r.t. lB.
std::vector<double> loss_gradient(std::span<const double> lB, std::span<const std::uint8_t> bits,
                                  const Schedule& sched, int M);

/// Gradients of the loss at the final BP output w.r.t. every stage's parameters, from a recorded
/// forward pass.
std::vector<std::vector<double>> backward(std::span<const EqualizerStage> stages, const Schedule& sched,
                                          const ForwardResult& fwd, std::span<const std::uint8_t> bits,
                                          const ldpc::Code& code);

struct TrainingFrame {
    std::vector<double> lR;
    std::vector<std::uint8_t> bits;
};

/// Frame `index` of the training set.
using FrameProvider = std::function<TrainingFrame(std::uint64_t index)>;

struct TrainOptions {
    std::size_t frames = 256;  // training set size
    std::size_t batch = 8;
    int epochs = 6;
    double learning_rate = 1e-3;
    double learning_rate_final = 0.0;  // > 0: cosine decay to this value within each stage
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t seed = 1;
    bool full_horizon_last = false;  // last stage trained through n_res iterations instead of n_bn, at n_bn / n_res of the rate
    bool warm_start = false;         // stage k > 1 starts from a copy of stage k - 1
    bool resample = false;           // fresh frames every epoch; the loss trace stays on frames [0, frames)
};

struct TrainResult {
    std::vector<EqualizerStage> stages;
    /// Per stage: training-set loss before training, then after every epoch.
    std::vector<std::vector<double>> loss_trace;
};

/// Greedy stage-wise training with Adam. Stage k is trained with earlier stages frozen, on the
/// loss at the BP output that follows it (n_bn iterations; n_res for the last stage with full_horizon_last). Throws
/// numerical_error when the loss stays above 10x its initial value for 3 consecutive epochs.
TrainResult train(const StageDims& dims, const Schedule& sched, const ldpc::Code& code, const FrameProvider& frames,
                  const TrainOptions& opt, const std::function<void(const std::string&)>& log = {});

/// Mean loss over the given frames (OpenMP over frames).
double mean_loss(std::span<const EqualizerStage> stages, const Schedule& sched, const ldpc::Code& code,
                 const std::vector<TrainingFrame>& frames);

/// Text format: header "nnbp L M nq nr stride n_stages n_bn n_res lambda1 lambda2 feedback", then one
/// line per network (stage-major, bit m = 1.. within a stage) in NetLayout order.
void write_weights(std::span<const EqualizerStage> stages, const Schedule& sched, const std::string& path);

struct Weights {
    std::vector<EqualizerStage> stages;
    Schedule schedule;
};

Weights read_weights(const std::string& path);

}  // namespace nleq::nnbp
