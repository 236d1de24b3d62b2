#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nleq/chansim/channel.hpp"
#include "nleq/chansim/link.hpp"
#include "nleq/nnbp/nnbp.hpp"
#include "nleq/volterra/volterra.hpp"

namespace nleq::harness {

enum class EqualizerKind { none, volterra, nn_bp };

/// Experiment configuration. Text form: INI sections with `key = value` lines; '#' or ';'
/// start comments. Unknown sections or keys are rejected. Relative paths are resolved against
/// the directory of the config file. SNR grids are either comma-separated lists or
/// `start:step:stop` ranges (inclusive). Values "inf" are accepted for amplitudes and SNRs.
///
/// [channel]   nl_amplitude, rolloff, rrc_span_symbols, sps, fir_len, pilot_symbols, seed
/// [code]      path
/// [equalizer] kind (none | volterra | nn_bp), variant (a | c), volterra_model, nn_weights
/// [volterra]  memory, train_snr_db, train_blocks, block_symbols
/// [nn]        L, nq, nr, n_stages, n_bn, n_res, lambda1, lambda2, train_snr_db (number or
///             "auto" = required SNR of the optimal Volterra system - 0.5 dB), frames, batch,
///             epochs, learning_rate, learning_rate_final (cosine decay per stage), warm_start,
///             resample_frames, feedback (posterior | extrinsic), last_stage_horizon (n_bn | n_res)
/// [waterfall] snr_grid, frames_per_point, min_errors, batch, target_ber, bp_iterations
/// [sweep]     train_snr_grid, nf_eval_snr_db, nf_blocks, moment_blocks
/// [calibrate] target_ratio, band_low, band_high, a_low, a_high, train_snr_db, tolerance
/// [run]       seed, output_dir
struct ExperimentConfig {
    chansim::ChannelConfig channel;
    std::string code_path;

    EqualizerKind equalizer = EqualizerKind::none;
    chansim::Variant variant = chansim::Variant::a;
    std::string volterra_model;  // weight file; empty = train at volterra.train_snr_db
    std::string nn_weights;

    volterra::TrainOptions volterra_train;  // memory, n_blocks, block_symbols
    double volterra_train_snr_db = 19.0;

    nnbp::StageDims nn_dims;
    nnbp::Schedule nn_schedule;
    nnbp::TrainOptions nn_train;
    double nn_train_snr_db = kInf;  // kInf with nn_train_snr_auto
    bool nn_train_snr_auto = true;

    std::vector<double> snr_grid;
    std::uint64_t frames_per_point = 2000;
    std::uint64_t min_errors = 100;
    std::uint64_t batch = 16;
    double target_ber = 1e-4;
    int bp_iterations = 50;

    std::vector<double> train_snr_grid;
    double nf_eval_snr_db = 18.0;
    std::size_t nf_blocks = 50;
    std::size_t moment_blocks = 50;

    double calib_target = 0.067;
    double calib_low = 0.05;
    double calib_high = 0.085;
    double calib_a_low = 0.8;
    double calib_a_high = 8.0;
    double calib_train_snr_db = 19.0;
    double calib_tolerance = 0.002;

    std::uint64_t seed = 1;
    std::string output_dir = "out";

    /// Throws config_error on violated invariants.
    void validate() const;
};

/// Parses config text; `base_dir` resolves relative paths. Throws config_error.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// "a,b,c" or "start:step:stop".
std::vector<double> parse_grid(const std::string& text);

}  // namespace nleq::harness
