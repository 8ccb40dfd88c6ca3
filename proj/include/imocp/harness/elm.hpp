#pragma once

// Extreme learning machine: a fixed random sigmoid hidden layer with a ridge
// least-squares readout to (longitude, latitude).

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>

#include "imocp/core.hpp"
#include "imocp/feedback.hpp"
#include "imocp/harness/localization.hpp"

namespace imocp::harness {

enum class Coordinate { longitude = 0, latitude = 1 };

struct ElmModel {
    Eigen::MatrixXd input_weights;   // inputs x hidden, uniform[-1,1]
    Eigen::VectorXd hidden_bias;     // uniform[-1,1]
    Eigen::MatrixXd output_weights;  // hidden x 2

    std::size_t hidden_size() const { return static_cast<std::size_t>(hidden_bias.size()); }

    Eigen::MatrixXd hidden(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd pre = x * input_weights;
        pre.rowwise() += hidden_bias.transpose();
        return pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    }

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const { return hidden(x) * output_weights; }

    Eigen::Vector2d predict(const LocalizationSample& s) const {
        Eigen::RowVectorXd x = Eigen::Map<const Eigen::RowVectorXd>(s.rssi.data(), static_cast<Eigen::Index>(s.rssi.size()));
        return predict(Eigen::MatrixXd(x)).row(0).transpose();
    }
};

inline Eigen::MatrixXd feature_matrix(std::span<const LocalizationSample> samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto m = samples.empty() ? 0 : static_cast<Eigen::Index>(samples.front().rssi.size());
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = samples[static_cast<std::size_t>(i)].rssi;
        if (static_cast<Eigen::Index>(r.size()) != m) throw ValidationError("inconsistent RSSI vector length");
        x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), m);
    }
    return x;
}

// Inputs are expected to be scaled already (FeatureScaler). Output weights
// solve (H'H + ridge I) W = H'Y.
inline ElmModel train_elm(std::span<const LocalizationSample> train, std::size_t hidden = 256,
                          double ridge = 1e-3, std::uint64_t seed = 0) {
    if (train.empty()) throw ValidationError("ELM training set is empty");
    if (!(ridge > 0.0)) throw ValidationError("ELM ridge must be positive");
    if (hidden == 0) throw ValidationError("ELM needs at least one hidden unit");

    const Eigen::MatrixXd x = feature_matrix(train);
    const auto m = x.cols();
    const auto h = static_cast<Eigen::Index>(hidden);

    ElmModel model;
    rng::CounterEngine eng(seed, rng::kSplitStream + 200);
    std::uniform_real_distribution<double> weight(-1.0, 1.0);
    model.input_weights.resize(m, h);
    for (Eigen::Index j = 0; j < h; ++j)
        for (Eigen::Index i = 0; i < m; ++i) model.input_weights(i, j) = weight(eng);
    model.hidden_bias.resize(h);
    for (Eigen::Index j = 0; j < h; ++j) model.hidden_bias(j) = weight(eng);

    Eigen::MatrixXd y(x.rows(), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        y(i, 0) = train[static_cast<std::size_t>(i)].longitude;
        y(i, 1) = train[static_cast<std::size_t>(i)].latitude;
    }
    const Eigen::MatrixXd hid = model.hidden(x);
    Eigen::MatrixXd gram = hid.transpose() * hid;
    gram.diagonal().array() += ridge;
    model.output_weights = gram.ldlt().solve(hid.transpose() * y);
    return model;
}

inline double coordinate_of(const LocalizationSample& s, Coordinate c) {
    return c == Coordinate::longitude ? s.longitude : s.latitude;
}

// |Y - f(X)| / B for the chosen coordinate. Residuals beyond B are rejected
// rather than clamped.
inline double residual_score(const ElmModel& model, const LocalizationSample& sample, double bound,
                             Coordinate c = Coordinate::longitude) {
    if (!(bound > 0.0)) throw ValidationError("residual bound must be positive");
    const Eigen::Vector2d pred = model.predict(sample);
    const double score = std::abs(coordinate_of(sample, c) - pred(static_cast<int>(c))) / bound;
    validate_score(score, 1.0);
    return score;
}

}  // namespace imocp::harness
