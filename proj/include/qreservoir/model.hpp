// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qreservoir/matrix.hpp"

namespace qrc::model {

enum class ModelKind { QuReBot, QrcOnly, SkipOnly };

std::string_view kind_name(ModelKind k);
ModelKind parse_kind(std::string_view name);

struct Shapes {
    size_t input_dim = 0;    // T * d
    size_t feature_dim = 0;  // D
    size_t output_dim = 0;   // K * 2
    bool operator==(const Shapes &) const = default;
};

/// Trainable arrays of the gated predictor. The baselines use subsets:
/// skip_only ignores the gate, qrc_only uses only the readout.
struct HybridParams {
    Matrix w_proj;               // D x Td
    std::vector<double> b_proj;  // D
    std::vector<double> w_sw;    // Td
    double b_sw = 0.0;
    Matrix w_out;                // 2K x D
    std::vector<double> b_out;   // 2K

    static HybridParams zeros(const Shapes &s);
    Shapes shapes() const;

    /// Flat view in declaration order; used by the optimizer and the
    /// finite-difference checks.
    size_t count() const;
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);

    void check_finite() const;
    bool operator==(const HybridParams &) const = default;
};

struct Forward {
    std::vector<double> prediction;
    double alpha = 0.0;
    std::vector<double> r_star;
};

/// r' = relu(W_proj x + b_proj); alpha = sigmoid(w_sw . x + b_sw);
/// r* = (1 - alpha) r + alpha r'; prediction = W_out r* + b_out.
Forward forward_qurebot(const HybridParams &p, std::span<const double> window_flat, std::span<const double> r);
std::vector<double> forward_skip_only(std::span<const double> window_flat, const HybridParams &p);
std::vector<double> forward_qrc_only(std::span<const double> r, const Matrix &w_out, std::span<const double> b_out);
std::vector<double> forward(const HybridParams &p, ModelKind kind, std::span<const double> window_flat,
                            std::span<const double> r);

/// Mean over items and components of the squared error. Rows are items.
double loss_mse(const Matrix &predictions, const Matrix &targets);

/// Samples as rows: inputs (B x Td), QRC features (B x D), targets (B x 2K).
struct Batch {
    Matrix inputs;
    Matrix features;
    Matrix targets;
    size_t size() const { return inputs.rows; }
};

Batch gather(const Batch &all, std::span<const size_t> rows);
Matrix predict_batch(const HybridParams &p, ModelKind kind, const Batch &batch);

/// d loss_mse / d params over the batch; arrays the kind does not use get
/// zero gradient.
HybridParams backward(const HybridParams &p, const Batch &batch, ModelKind kind);

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    double learning_rate = 1e-4;
    size_t batch_size = 32;
    size_t max_epochs = 500;
    size_t patience = 10;
    uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;
    bool zero_init = false;
    /// qrc_only only: ridge least squares instead of gradient training.
    bool closed_form = false;
    double ridge_lambda = 1e-8;

    void validate() const;
};

struct EpochLoss {
    double train = 0.0;  // full training-set loss after the epoch
    double val = 0.0;
};

struct TrainResult {
    HybridParams params;  // parameters of the best validation epoch
    std::vector<EpochLoss> history;
    size_t best_epoch = 0;  // 1-based
    bool early_stopped = false;
};

/// Fan-in uniform weights, zero biases, seeded.
HybridParams init_params(const Shapes &s, ModelKind kind, uint64_t seed);

TrainResult train(const Batch &train_set, const Batch &val_set, ModelKind kind, const TrainConfig &config);

/// Forward output reshaped to K rows of (pos_x, pos_y).
Matrix predict(const HybridParams &p, ModelKind kind, std::span<const double> window_flat, std::span<const double> r);

}  // namespace qrc::model
