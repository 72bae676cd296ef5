#include "finsent/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "finsent/errors.hpp"
#include "finsent/metrics.hpp"

namespace finsent {

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batch normalization)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
}

std::string format_epoch(const EpochRecord& record) {
    char buf[96];
    if (record.cosine) {
        std::snprintf(buf, sizeof buf, "%zu\t%.10g\t%.6f", record.epoch, record.loss, *record.cosine);
    } else {
        std::snprintf(buf, sizeof buf, "%zu\t%.10g", record.epoch, record.loss);
    }
    return buf;
}

void TrainingReport::write(std::ostream& out) const {
    for (const auto& record : epochs) out << format_epoch(record) << '\n';
}

Tensor mse_loss(const Tensor& predicted, std::span<const double> gold) {
    if (gold.empty()) throw DataError("mse_loss: no examples");
    if (predicted.size() != gold.size()) {
        throw ShapeError("mse_loss: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold scores");
    }
    for (double g : gold) {
        if (!(g >= -1.0 && g <= 1.0)) throw DataError("mse_loss: gold score outside [-1, 1]");
    }
    const Tensor target = Tensor::from(predicted.shape(), std::vector<double>(gold.begin(), gold.end()));
    const Tensor diff = sub(predicted, target);
    return mean(mul(diff, diff));
}

double mse(std::span<const double> predicted, std::span<const double> gold) {
    NoGradGuard no_grad;
    return mse_loss(Tensor::from({predicted.size()}, std::vector<double>(predicted.begin(), predicted.end())), gold)
        .item();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                   std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
    }
    return batches;
}

double optimizer_step(std::span<Tensor> params, AdamState& state, const std::function<Tensor()>& loss_fn) {
    for (Tensor& p : params) p.zero_grad();
    const Tensor loss = loss_fn();
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("loss is not finite");
    backward(loss);
    adam_step(params, state);
    return value;
}

std::vector<LabeledInput> featurize(std::span<const Example> examples, const Featurizer& featurizer) {
    std::vector<LabeledInput> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back({featurizer(ex.text), ex.score});
    return out;
}

std::vector<double> predict_all(std::span<const LabeledInput> inputs, const ModelParams& params,
                                const ModelConfig& config) {
    std::vector<double> scores;
    scores.reserve(inputs.size());
    for (const auto& item : inputs) scores.push_back(predict_score(item.input, params, config));
    return scores;
}

TrainingReport train(const ModelConfig& model_config, ModelParams& params, std::span<const LabeledInput> data,
                     const TrainConfig& config, std::span<const LabeledInput> eval, const EpochCallback& on_epoch) {
    config.validate();
    if (data.empty()) throw DataError("training set is empty");
    TrainingReport report;
    if (config.epochs == 0) return report;
    if (data.size() < 2) throw DataError("training needs at least 2 examples (batch normalization)");

    std::vector<Tensor> tensors = params.parameters();
    AdamState state(tensors, {config.learning_rate, config.adam_epsilon});
    std::mt19937_64 rng(config.seed);
    const auto eval_set = eval.empty() ? data : eval;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto batches = make_batches(data.size(), config.batch_size, config.shuffle, rng);
        double weighted_loss = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            std::vector<ModelInput> inputs;
            std::vector<double> gold;
            for (std::size_t i : batches[b]) {
                inputs.push_back(data[i].input);
                gold.push_back(data[i].gold);
            }
            BatchOutput output;
            double loss = 0.0;
            try {
                loss = optimizer_step(tensors, state, [&] {
                    ForwardContext ctx{Mode::kTraining, &rng, nullptr};
                    output = forward_batch(inputs, params, model_config, ctx);
                    return mse_loss(output.scores, gold);
                });
            } catch (const NumericError&) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b + 1) + " of " + std::to_string(batches.size()));
            }
            update_running_stats(params, output);
            weighted_loss += loss * static_cast<double>(inputs.size());
        }

        EpochRecord record{epoch, weighted_loss / static_cast<double>(data.size()), std::nullopt};
        if (config.eval_each_epoch) {
            std::vector<double> gold;
            for (const auto& item : eval_set) gold.push_back(item.gold);
            try {
                record.cosine = cosine_similarity(gold, predict_all(eval_set, params, model_config));
            } catch (const UndefinedSimilarityError&) {
            }
        }
        report.epochs.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    return report;
}

TrainingReport train(const ModelConfig& model_config, ModelParams& params, std::span<const Example> data,
                     const Featurizer& featurizer, const TrainConfig& config, std::span<const Example> eval,
                     const EpochCallback& on_epoch) {
    const auto train_inputs = featurize(data, featurizer);
    const auto eval_inputs = featurize(eval, featurizer);
    return train(model_config, params, train_inputs, config, eval_inputs, on_epoch);
}

}  // namespace finsent
