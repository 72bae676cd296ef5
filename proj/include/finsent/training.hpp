#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "finsent/adam.hpp"
#include "finsent/dataset.hpp"
#include "finsent/model.hpp"

namespace finsent {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double learning_rate = 1e-5;
    double adam_epsilon = 1e-6;
    bool shuffle = true;
    bool eval_each_epoch = false;

    void validate() const;
};

struct LabeledInput {
    ModelInput input;
    double gold = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;  // example-weighted mean training MSE
    std::optional<double> cosine;
};

struct TrainingReport {
    std::vector<EpochRecord> epochs;

    // `epoch<TAB>loss[<TAB>cosine]` per line.
    void write(std::ostream& out) const;
};

std::string format_epoch(const EpochRecord& record);

// Mean squared error between a [B×1] prediction tensor and gold scores.
Tensor mse_loss(const Tensor& predicted, std::span<const double> gold);
double mse(std::span<const double> predicted, std::span<const double> gold);

// Index batches over n examples. With shuffling the order is drawn from
// `rng`. A trailing batch of one is merged into its predecessor, since
// batch normalization needs at least two examples.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                   std::mt19937_64& rng);

// Clears gradients, evaluates `loss_fn`, backpropagates and applies one Adam
// update. Returns the loss; a non-finite loss throws NumericError before any
// parameter changes.
double optimizer_step(std::span<Tensor> params, AdamState& state, const std::function<Tensor()>& loss_fn);

std::vector<LabeledInput> featurize(std::span<const Example> examples, const Featurizer& featurizer);

// Inference-mode scores, one per input.
std::vector<double> predict_all(std::span<const LabeledInput> inputs, const ModelParams& params,
                                const ModelConfig& config);

// MSE regression with Adam. Deterministic for a given seed. `eval` (or the
// training data when empty) is scored after every epoch when
// config.eval_each_epoch is set. `on_epoch` sees each record as soon as the
// epoch finishes.
using EpochCallback = std::function<void(const EpochRecord&)>;

TrainingReport train(const ModelConfig& model_config, ModelParams& params, std::span<const LabeledInput> data,
                     const TrainConfig& config, std::span<const LabeledInput> eval = {},
                     const EpochCallback& on_epoch = {});

TrainingReport train(const ModelConfig& model_config, ModelParams& params, std::span<const Example> data,
                     const Featurizer& featurizer, const TrainConfig& config, std::span<const Example> eval = {},
                     const EpochCallback& on_epoch = {});

}  // namespace finsent
