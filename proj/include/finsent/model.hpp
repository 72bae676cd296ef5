#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "finsent/lexicon.hpp"
#include "finsent/tensor.hpp"
#include "finsent/tokenizer.hpp"

namespace finsent {

struct ModelConfig {
    std::size_t d_model = 32;
    std::size_t n_stack_layers = 5;
    std::size_t n_base_layers = 2;
    std::size_t n_heads_base = 4;
    std::size_t n_heads_stack = 4;
    std::size_t ffn_multiplier = 4;
    std::size_t head_hidden = 64;
    std::size_t max_len = 64;
    double dropout = 0.1;
    std::size_t vocab_size = 0;
    // [CLS]-only head on the base encoder; no lexicons, no sentiment stack.
    bool baseline = false;
    bool lowercase = false;

    // Token width after the four lexicon features are appended.
    std::size_t fused_width() const { return d_model + kSentimentFeatureWidth; }
    // Base [CLS] plus stack [CLS], or the base [CLS] alone in baseline mode.
    std::size_t head_input_width() const { return baseline ? d_model : d_model + fused_width(); }

    // Throws ConfigError describing the first violated constraint.
    void validate() const;

    std::map<std::string, std::string> to_map() const;
    // Unknown keys are rejected; missing keys keep their defaults.
    static ModelConfig from_map(const std::map<std::string, std::string>& values);
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct LinearParams {
    Tensor weight;  // [in × out]
    Tensor bias;    // [out]
};

struct NormParams {
    Tensor gain;
    Tensor bias;
};

struct EncoderLayerParams {
    NormParams attn_norm;
    LinearParams query, key, value, output;
    NormParams ffn_norm;
    LinearParams ffn_inner, ffn_outer;
};

struct EncoderParams {
    std::vector<EncoderLayerParams> layers;
    NormParams final_norm;
};

struct BatchNormParams {
    Tensor gain;
    Tensor bias;
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

struct ModelParams {
    Tensor token_embeddings;  // [vocab × d_model]
    EncoderParams base;
    EncoderParams stack;  // empty in baseline mode
    BatchNormParams head_norm;
    LinearParams head_hidden;
    LinearParams head_output;

    // Normal(0, 0.02) projections and embeddings, zero biases, unit gains.
    static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

    // Learnable tensors in a fixed order; handles share storage with *this.
    std::vector<NamedTensor> named_parameters() const;
    std::vector<Tensor> parameters() const;
    // Learnable tensors plus the batch-norm running statistics, for
    // checkpoints.
    std::vector<NamedTensor> named_state() const;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;
// Added to attention logits of padded key positions.
inline constexpr double kMaskedLogit = -1e9;

enum class Mode { kTraining, kInference };

// Optional observer filled during a forward pass.
struct ForwardTrace {
    std::vector<Tensor> attention;  // one [L×L] matrix per layer and head
    std::vector<std::pair<std::string, Shape>> stages;
};

struct ForwardContext {
    Mode mode = Mode::kInference;
    std::mt19937_64* rng = nullptr;  // required for dropout in training mode
    ForwardTrace* trace = nullptr;
};

struct ModelInput {
    TokenSeq seq;
    SentimentFeatures features;
    std::size_t pad_id = 0;  // vocabulary id of [PAD], used when batching
};

Tensor sinusoidal_positions(std::size_t length, std::size_t width);

// key_mask: length-L vector of 0 (real token) or kMaskedLogit (padding);
// pass an undefined tensor when nothing is padded.
Tensor encode_base(std::span<const std::size_t> ids, const Tensor& key_mask, const ModelParams& params,
                   const ModelConfig& config, ForwardContext& ctx);

// Row-wise concatenation, base representation first.
Tensor fuse(const Tensor& base, const Tensor& features);
Tensor fuse(const Tensor& base, const SentimentFeatures& features);

Tensor sentiment_stack(const Tensor& fused, const Tensor& key_mask, const ModelParams& params,
                       const ModelConfig& config, ForwardContext& ctx);

struct BatchOutput {
    Tensor scores;  // [B × 1], each strictly inside (-1, 1)
    // Head-input batch statistics, set in training mode only.
    std::vector<double> batch_mean;
    std::vector<double> batch_var;
};

// Pads the batch to its longest sequence with [PAD] (masked out of
// attention) and runs the full network. Training mode normalizes the head
// input with batch statistics and needs at least two examples.
BatchOutput forward_batch(std::span<const ModelInput> batch, const ModelParams& params, const ModelConfig& config,
                          ForwardContext& ctx);

// Folds the statistics of a training-mode batch into the running averages.
void update_running_stats(ModelParams& params, const BatchOutput& output);

// Deterministic inference-mode score for one example.
double predict_score(const ModelInput& input, const ModelParams& params, const ModelConfig& config);

// Text -> token ids plus lexicon features, ready for the model.
class Featurizer {
public:
    Featurizer(const Vocab& vocab, const SentiLexicon& senti, const MarketLexicon& market,
               TokenizerOptions options)
        : vocab_(&vocab), senti_(&senti), market_(&market), options_(options) {}

    ModelInput operator()(std::string_view text) const;
    const Vocab& vocab() const { return *vocab_; }
    const TokenizerOptions& options() const { return options_; }

private:
    const Vocab* vocab_;
    const SentiLexicon* senti_;
    const MarketLexicon* market_;
    TokenizerOptions options_;
};

}  // namespace finsent
