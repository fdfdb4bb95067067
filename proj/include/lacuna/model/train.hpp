#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "lacuna/core/rng.hpp"
#include "lacuna/model/fusion.hpp"

namespace lacuna {

/// A batch of inputs (images or precomputed features) with class labels.
struct LabeledSet {
    FeatureMap inputs;
    std::vector<int> labels;

    [[nodiscard]] int size() const { return static_cast<int>(labels.size()); }
};

/// Selects samples along the batch axis.
inline FeatureMap gather(const FeatureMap& x, std::span<const int> indices) {
    if (indices.empty()) throw ShapeError("gather: empty index list");
    const Shape s = x.shape();
    FeatureMap out({static_cast<int>(indices.size()), s.c, s.h, s.w});
    const std::size_t stride = static_cast<std::size_t>(s.c) * s.plane_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int src = indices[i];
        if (src < 0 || src >= s.n) throw ShapeError("gather: index out of range");
        const auto from = x.data().subspan(static_cast<std::size_t>(src) * stride, stride);
        std::copy(from.begin(), from.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return out;
}

inline LabeledSet subset(const LabeledSet& set, std::span<const int> indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (int i : indices) labels.push_back(set.labels.at(static_cast<std::size_t>(i)));
    return {gather(set.inputs, indices), std::move(labels)};
}

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> validation;
    std::vector<int> test;
};

/// Stratified 70/10/20 split: each class is shuffled and cut separately so
/// every split keeps the class balance.
inline SplitIndices split_70_10_20(std::span<const int> labels, std::uint64_t seed) {
    int classes = 0;
    for (int y : labels) classes = std::max(classes, y + 1);
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    }
    Rng rng(derive_seed(seed, 0x5B117));
    SplitIndices out;
    for (auto& members : by_class) {
        rng.shuffle(std::span<int>(members));
        const auto n = members.size();
        const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
        const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
        for (std::size_t i = 0; i < n; ++i) {
            auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.validation : out.test);
            dst.push_back(members[i]);
        }
    }
    for (auto* part : {&out.train, &out.validation, &out.test}) std::sort(part->begin(), part->end());
    return out;
}

struct TrainConfig {
    int batch_size = 16;
    double learning_rate = 1e-3;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const {
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
            throw ConfigError("TrainConfig: learning_rate must be finite and >= 0");
        }
        if (max_epochs < 1) throw ConfigError("TrainConfig: max_epochs must be >= 1");
        if (patience < 1 || patience >= max_epochs) throw ConfigError("TrainConfig: need 1 <= patience < max_epochs");
        if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && adam_epsilon > 0.0)) {
            throw ConfigError("TrainConfig: Adam rates must lie in (0, 1)");
        }
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    bool early_stopped = false;
};

/// Adam over one flat parameter vector.
class Adam {
public:
    Adam(std::size_t size, const TrainConfig& cfg)
        : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
            params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.adam_epsilon);
        }
    }

private:
    TrainConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    int t_ = 0;
};

namespace detail {

inline std::vector<double> pack_trainable(const FusionModel& m) {
    std::vector<double> p(m.classifier.weights);
    p.insert(p.end(), m.classifier.bias.begin(), m.classifier.bias.end());
    if (m.mix) {
        p.insert(p.end(), m.mix->weights.begin(), m.mix->weights.end());
        p.insert(p.end(), m.mix->bias.begin(), m.mix->bias.end());
    }
    return p;
}

inline void unpack_trainable(FusionModel& m, std::span<const double> p) {
    auto it = p.begin();
    auto take = [&](std::vector<double>& dst) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(m.classifier.weights);
    take(m.classifier.bias);
    if (m.mix) {
        take(m.mix->weights);
        take(m.mix->bias);
    }
}

inline std::vector<double> pack_gradients(const HeadGradients& g) {
    std::vector<double> out(g.classifier_weights);
    out.insert(out.end(), g.classifier_bias.begin(), g.classifier_bias.end());
    out.insert(out.end(), g.mix_weights.begin(), g.mix_weights.end());
    out.insert(out.end(), g.mix_bias.begin(), g.mix_bias.end());
    return out;
}

inline BranchInputs gather_branch(const BranchInputs& b, std::span<const int> idx) {
    return {gather(b.gap, idx), gather(b.pooled, idx), b.mixed};
}

inline double accuracy_of(const FeatureMap& logits, std::span<const int> labels) {
    const auto pred = argmax_rows(logits);
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline void require_finite_loss(double loss) {
    if (!std::isfinite(loss)) throw DivergenceError("train: loss became non-finite");
}

}  // namespace detail

/// Trains the mixing layer (if any) and classifier with Adam on softmax
/// cross-entropy. Early-stops after `patience` epochs without a strict
/// improvement of validation loss and restores the best weights seen.
inline TrainHistory train(FusionModel& model, const LabeledSet& train_set, const LabeledSet& val_set,
                          const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw ConfigError("train: empty train or validation split");

    TrainHistory history;
    try {
        const BranchInputs train_in = branch_inputs(model, model.backbone.extract(train_set.inputs));
        const BranchInputs val_in = branch_inputs(model, model.backbone.extract(val_set.inputs));

        std::vector<double> params = detail::pack_trainable(model);
        std::vector<double> best = params;
        double best_loss = std::numeric_limits<double>::infinity();
        int since_best = 0;
        Adam adam(params.size(), cfg);
        Rng rng(derive_seed(cfg.seed, 0x7EA1));
        std::vector<int> order(static_cast<std::size_t>(train_set.size()));
        std::iota(order.begin(), order.end(), 0);

        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            rng.shuffle(std::span<int>(order));
            double loss_sum = 0.0;
            int hits = 0;
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
                const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
                const std::span<const int> idx(order.data() + start, end - start);
                std::vector<int> labels;
                for (int i : idx) labels.push_back(train_set.labels[static_cast<std::size_t>(i)]);

                const BranchInputs batch = detail::gather_branch(train_in, idx);
                const HeadTrace trace = head_forward(model, batch);
                const double loss = softmax_cross_entropy(trace.logits, labels);
                detail::require_finite_loss(loss);
                loss_sum += loss * static_cast<double>(idx.size());
                hits += static_cast<int>(std::lround(detail::accuracy_of(trace.logits, labels) *
                                                     static_cast<double>(idx.size())));

                const Gradient d_logits = softmax_cross_entropy_backward(trace.logits, labels);
                const auto grads = detail::pack_gradients(head_backward(model, batch, trace, d_logits));
                adam.step(params, grads);
                detail::unpack_trainable(model, params);
            }

            const HeadTrace val = head_forward(model, val_in);
            EpochRecord rec;
            rec.epoch = epoch;
            rec.train_loss = loss_sum / train_set.size();
            rec.train_accuracy = static_cast<double>(hits) / train_set.size();
            rec.val_loss = softmax_cross_entropy(val.logits, val_set.labels);
            detail::require_finite_loss(rec.val_loss);
            rec.val_accuracy = detail::accuracy_of(val.logits, val_set.labels);
            history.epochs.push_back(rec);

            if (rec.val_loss < best_loss) {
                best_loss = rec.val_loss;
                best = params;
                history.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                history.early_stopped = true;
                break;
            }
        }
        detail::unpack_trainable(model, best);
    } catch (const NonFiniteError& e) {
        throw DivergenceError(std::string("train: ") + e.what());
    }
    return history;
}

struct Evaluation {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion;  // [true][predicted]
    std::vector<int> predictions;
};

inline Evaluation evaluate_predictions(std::span<const int> truth, std::span<const int> predicted, int classes) {
    if (truth.empty()) throw ConfigError("evaluate: empty test set");
    if (truth.size() != predicted.size()) throw ShapeError("evaluate: prediction count mismatch");
    Evaluation e;
    e.confusion.assign(static_cast<std::size_t>(classes), std::vector<int>(static_cast<std::size_t>(classes), 0));
    int trace = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes) throw ShapeError("evaluate: class index out of range");
        ++e.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        if (t == p) ++trace;
    }
    e.accuracy = static_cast<double>(trace) / static_cast<double>(truth.size());
    e.predictions.assign(predicted.begin(), predicted.end());
    return e;
}

inline Evaluation evaluate(const FusionModel& model, const LabeledSet& test_set) {
    if (test_set.size() == 0) throw ConfigError("evaluate: empty test set");
    const auto pred = argmax_rows(forward(model, test_set.inputs));
    return evaluate_predictions(test_set.labels, pred, model.classes());
}

}  // namespace lacuna
