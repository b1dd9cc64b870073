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

#include "qreservoir/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qreservoir/errors.hpp"
#include "qreservoir/rng.hpp"

namespace qrc::model {

std::string_view kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::QuReBot: return "qurebot";
        case ModelKind::QrcOnly: return "qrc_only";
        case ModelKind::SkipOnly: return "skip_only";
    }
    throw ArgumentError("unknown model kind");
}

ModelKind parse_kind(std::string_view name) {
    for (auto k : {ModelKind::QuReBot, ModelKind::QrcOnly, ModelKind::SkipOnly}) {
        if (kind_name(k) == name) return k;
    }
    throw ArgumentError("unknown model kind '" + std::string(name) + "'");
}

HybridParams HybridParams::zeros(const Shapes &s) {
    HybridParams p;
    p.w_proj = Matrix(s.feature_dim, s.input_dim);
    p.b_proj.assign(s.feature_dim, 0.0);
    p.w_sw.assign(s.input_dim, 0.0);
    p.b_sw = 0.0;
    p.w_out = Matrix(s.output_dim, s.feature_dim);
    p.b_out.assign(s.output_dim, 0.0);
    return p;
}

Shapes HybridParams::shapes() const { return {w_proj.cols, w_proj.rows, w_out.rows}; }

size_t HybridParams::count() const {
    return w_proj.size() + b_proj.size() + w_sw.size() + 1 + w_out.size() + b_out.size();
}

std::vector<double> HybridParams::flatten() const {
    std::vector<double> out;
    out.reserve(count());
    out.insert(out.end(), w_proj.data.begin(), w_proj.data.end());
    out.insert(out.end(), b_proj.begin(), b_proj.end());
    out.insert(out.end(), w_sw.begin(), w_sw.end());
    out.push_back(b_sw);
    out.insert(out.end(), w_out.data.begin(), w_out.data.end());
    out.insert(out.end(), b_out.begin(), b_out.end());
    return out;
}

void HybridParams::assign(std::span<const double> flat) {
    if (flat.size() != count()) throw ShapeError("flat parameter vector has wrong length");
    auto it = flat.begin();
    auto take = [&it](auto &dst) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(w_proj.data);
    take(b_proj);
    take(w_sw);
    b_sw = *it++;
    take(w_out.data);
    take(b_out);
}

void HybridParams::check_finite() const {
    for (double v : flatten()) {
        if (!std::isfinite(v)) throw NumericError("non-finite model parameter");
    }
}

namespace {

void check_shapes(const HybridParams &p, size_t input_len, size_t feature_len, bool needs_input, bool needs_features) {
    const Shapes s = p.shapes();
    if (p.b_proj.size() != s.feature_dim || p.w_sw.size() != s.input_dim || p.w_out.cols != s.feature_dim ||
        p.b_out.size() != s.output_dim) {
        throw ShapeError("inconsistent parameter shapes");
    }
    if (needs_input && input_len != s.input_dim) {
        throw ShapeError("window has " + std::to_string(input_len) + " values, model expects " +
                         std::to_string(s.input_dim));
    }
    if (needs_features && feature_len != s.feature_dim) {
        throw ShapeError("feature vector has " + std::to_string(feature_len) + " values, model expects " +
                         std::to_string(s.feature_dim));
    }
}

void check_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError("non-finite model input");
    }
}

double sigmoid(double a) {
    // stable on both tails
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

// out = W x + b
void affine(const Matrix &w, std::span<const double> x, std::span<const double> b, std::span<double> out) {
    for (size_t r = 0; r < w.rows; ++r) {
        const double *row = &w.data[r * w.cols];
        double acc = b[r];
        for (size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

// Hidden projection before the ReLU.
std::vector<double> projection(const HybridParams &p, std::span<const double> x) {
    std::vector<double> z(p.w_proj.rows);
    affine(p.w_proj, x, p.b_proj, z);
    return z;
}

}  // namespace

Forward forward_qurebot(const HybridParams &p, std::span<const double> window_flat, std::span<const double> r) {
    check_shapes(p, window_flat.size(), r.size(), true, true);
    check_finite(window_flat);
    check_finite(r);
    const std::vector<double> z = projection(p, window_flat);
    double a = p.b_sw;
    for (size_t i = 0; i < window_flat.size(); ++i) a += p.w_sw[i] * window_flat[i];
    Forward f;
    f.alpha = sigmoid(a);
    f.r_star.resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) f.r_star[i] = (1.0 - f.alpha) * r[i] + f.alpha * std::max(z[i], 0.0);
    f.prediction.resize(p.w_out.rows);
    affine(p.w_out, f.r_star, p.b_out, f.prediction);
    return f;
}

std::vector<double> forward_skip_only(std::span<const double> window_flat, const HybridParams &p) {
    check_shapes(p, window_flat.size(), 0, true, false);
    check_finite(window_flat);
    std::vector<double> h = projection(p, window_flat);
    for (double &v : h) v = std::max(v, 0.0);
    std::vector<double> out(p.w_out.rows);
    affine(p.w_out, h, p.b_out, out);
    return out;
}

std::vector<double> forward_qrc_only(std::span<const double> r, const Matrix &w_out, std::span<const double> b_out) {
    if (r.size() != w_out.cols || b_out.size() != w_out.rows) throw ShapeError("readout shape mismatch");
    check_finite(r);
    std::vector<double> out(w_out.rows);
    affine(w_out, r, b_out, out);
    return out;
}

std::vector<double> forward(const HybridParams &p, ModelKind kind, std::span<const double> window_flat,
                            std::span<const double> r) {
    switch (kind) {
        case ModelKind::QuReBot: return forward_qurebot(p, window_flat, r).prediction;
        case ModelKind::SkipOnly: return forward_skip_only(window_flat, p);
        case ModelKind::QrcOnly: return forward_qrc_only(r, p.w_out, p.b_out);
    }
    throw ArgumentError("unknown model kind");
}

double loss_mse(const Matrix &predictions, const Matrix &targets) {
    if (predictions.rows == 0) throw ArgumentError("empty batch");
    if (predictions.rows != targets.rows || predictions.cols != targets.cols) throw ShapeError("batch shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions.data[i] - targets.data[i];
        acc += e * e;
    }
    return acc / static_cast<double>(predictions.size());
}

Batch gather(const Batch &all, std::span<const size_t> rows) {
    auto pick = [&rows](const Matrix &src) {
        Matrix out(rows.size(), src.cols);
        for (size_t i = 0; i < rows.size(); ++i) std::copy_n(src.row(rows[i]).begin(), src.cols, out.row(i).begin());
        return out;
    };
    return {pick(all.inputs), pick(all.features), pick(all.targets)};
}

Matrix predict_batch(const HybridParams &p, ModelKind kind, const Batch &batch) {
    Matrix out(batch.size(), p.w_out.rows);
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto pred = forward(p, kind, batch.inputs.row(i), batch.features.row(i));
        std::copy(pred.begin(), pred.end(), out.row(i).begin());
    }
    return out;
}

HybridParams backward(const HybridParams &p, const Batch &batch, ModelKind kind) {
    if (batch.size() == 0) throw ArgumentError("empty batch");
    const Shapes s = p.shapes();
    if (batch.targets.cols != s.output_dim) throw ShapeError("target width does not match model output");
    HybridParams g = HybridParams::zeros(s);
    const double scale = 2.0 / static_cast<double>(batch.size() * s.output_dim);

    std::vector<double> g_pred(s.output_dim), g_rstar(s.feature_dim), hidden(s.feature_dim), readout_in;
    for (size_t n = 0; n < batch.size(); ++n) {
        const auto x = batch.inputs.row(n);
        const auto r = batch.features.row(n);
        const auto y = batch.targets.row(n);

        std::vector<double> z, prediction;
        double alpha = 0.0;
        switch (kind) {
            case ModelKind::QuReBot: {
                Forward f = forward_qurebot(p, x, r);
                z = projection(p, x);
                alpha = f.alpha;
                readout_in = std::move(f.r_star);
                prediction = std::move(f.prediction);
                break;
            }
            case ModelKind::SkipOnly:
                check_shapes(p, x.size(), 0, true, false);
                z = projection(p, x);
                readout_in.resize(z.size());
                for (size_t i = 0; i < z.size(); ++i) readout_in[i] = std::max(z[i], 0.0);
                prediction.resize(s.output_dim);
                affine(p.w_out, readout_in, p.b_out, prediction);
                break;
            case ModelKind::QrcOnly:
                readout_in.assign(r.begin(), r.end());
                prediction = forward_qrc_only(r, p.w_out, p.b_out);
                break;
        }

        for (size_t o = 0; o < s.output_dim; ++o) g_pred[o] = scale * (prediction[o] - y[o]);
        for (size_t o = 0; o < s.output_dim; ++o) {
            g.b_out[o] += g_pred[o];
            double *grow = &g.w_out.data[o * s.feature_dim];
            for (size_t j = 0; j < s.feature_dim; ++j) grow[j] += g_pred[o] * readout_in[j];
        }
        if (kind == ModelKind::QrcOnly) continue;

        std::fill(g_rstar.begin(), g_rstar.end(), 0.0);
        for (size_t o = 0; o < s.output_dim; ++o) {
            const double *wrow = &p.w_out.data[o * s.feature_dim];
            for (size_t j = 0; j < s.feature_dim; ++j) g_rstar[j] += wrow[j] * g_pred[o];
        }

        double g_alpha = 0.0;
        const double branch = kind == ModelKind::QuReBot ? alpha : 1.0;
        for (size_t j = 0; j < s.feature_dim; ++j) {
            const double relu = std::max(z[j], 0.0);
            if (kind == ModelKind::QuReBot) g_alpha += g_rstar[j] * (relu - r[j]);
            // ReLU subgradient is 0 at exactly 0
            hidden[j] = z[j] > 0.0 ? branch * g_rstar[j] : 0.0;
        }
        for (size_t j = 0; j < s.feature_dim; ++j) {
            if (hidden[j] == 0.0) continue;
            g.b_proj[j] += hidden[j];
            double *grow = &g.w_proj.data[j * s.input_dim];
            for (size_t i = 0; i < s.input_dim; ++i) grow[i] += hidden[j] * x[i];
        }
        if (kind == ModelKind::QuReBot) {
            const double g_a = g_alpha * alpha * (1.0 - alpha);
            g.b_sw += g_a;
            for (size_t i = 0; i < s.input_dim; ++i) g.w_sw[i] += g_a * x[i];
        }
    }
    return g;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be > 0");
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (patience < 1) throw ArgumentError("patience must be >= 1");
    if (max_epochs < 1) throw ArgumentError("max_epochs must be >= 1");
    if (!(ridge_lambda >= 0.0)) throw ArgumentError("ridge_lambda must be >= 0");
}

HybridParams init_params(const Shapes &s, ModelKind kind, uint64_t seed) {
    HybridParams p = HybridParams::zeros(s);
    Rng rng(seed);
    auto fill = [&rng](std::vector<double> &v, size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double &x : v) x = rng.uniform(-bound, bound);
    };
    if (kind != ModelKind::QrcOnly) fill(p.w_proj.data, s.input_dim);
    if (kind == ModelKind::QuReBot) fill(p.w_sw, s.input_dim);
    fill(p.w_out.data, s.feature_dim);
    return p;
}

namespace {

void shuffle(std::vector<size_t> &v, Rng &rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

TrainResult ridge_fit(const Batch &train_set, const Batch &val_set, const TrainConfig &config) {
    const size_t n = train_set.size(), d = train_set.features.cols, o = train_set.targets.cols;
    Eigen::MatrixXd x(n, d + 1);
    Eigen::MatrixXd y(n, o);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < d; ++j) x(i, j) = train_set.features(i, j);
        x(i, d) = 1.0;
        for (size_t k = 0; k < o; ++k) y(i, k) = train_set.targets(i, k);
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += config.ridge_lambda;
    const Eigen::MatrixXd beta = gram.ldlt().solve(x.transpose() * y);

    TrainResult res;
    res.params = HybridParams::zeros({train_set.inputs.cols, d, o});
    for (size_t k = 0; k < o; ++k) {
        for (size_t j = 0; j < d; ++j) res.params.w_out(k, j) = beta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        res.params.b_out[k] = beta(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    }
    res.params.check_finite();
    const double tr = loss_mse(predict_batch(res.params, ModelKind::QrcOnly, train_set), train_set.targets);
    const double va = loss_mse(predict_batch(res.params, ModelKind::QrcOnly, val_set), val_set.targets);
    res.history.push_back({tr, va});
    res.best_epoch = 1;
    return res;
}

}  // namespace

TrainResult train(const Batch &train_set, const Batch &val_set, ModelKind kind, const TrainConfig &config) {
    config.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw ArgumentError("training and validation sets must be non-empty");
    const Shapes shapes{train_set.inputs.cols, train_set.features.cols, train_set.targets.cols};
    if (val_set.inputs.cols != shapes.input_dim || val_set.features.cols != shapes.feature_dim ||
        val_set.targets.cols != shapes.output_dim) {
        throw ShapeError("validation set shape differs from training set");
    }
    if (config.closed_form) {
        if (kind != ModelKind::QrcOnly) throw ArgumentError("closed-form fitting is only available for qrc_only");
        return ridge_fit(train_set, val_set, config);
    }

    HybridParams params = config.zero_init ? HybridParams::zeros(shapes) : init_params(shapes, kind, config.seed);
    std::vector<double> theta = params.flatten();
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    uint64_t step = 0;

    Rng rng = Rng::substream(config.seed, 0x5348554646ULL);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainResult res;
    res.params = params;
    double best = std::numeric_limits<double>::infinity();
    size_t stale = 0;
    for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle(order, rng);
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t end = std::min(order.size(), start + config.batch_size);
            const Batch mb = gather(train_set, std::span<const size_t>(order).subspan(start, end - start));
            const std::vector<double> grad = backward(params, mb, kind).flatten();
            ++step;
            if (config.optimizer == Optimizer::Adam) {
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (size_t i = 0; i < theta.size(); ++i) {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    theta[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
                }
            } else {
                for (size_t i = 0; i < theta.size(); ++i) theta[i] -= config.learning_rate * grad[i];
            }
            params.assign(theta);
        }
        params.check_finite();
        const double tr = loss_mse(predict_batch(params, kind, train_set), train_set.targets);
        const double va = loss_mse(predict_batch(params, kind, val_set), val_set.targets);
        res.history.push_back({tr, va});
        if (va < best) {
            best = va;
            res.params = params;
            res.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= config.patience) {
            res.early_stopped = true;
            break;
        }
    }
    return res;
}

Matrix predict(const HybridParams &p, ModelKind kind, std::span<const double> window_flat, std::span<const double> r) {
    const std::vector<double> out = forward(p, kind, window_flat, r);
    if (out.size() % 2 != 0) throw ShapeError("model output is not a list of (x, y) pairs");
    Matrix m(out.size() / 2, 2);
    std::copy(out.begin(), out.end(), m.data.begin());
    return m;
}

}  // namespace qrc::model
