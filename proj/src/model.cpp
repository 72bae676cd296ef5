#include "finsent/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "finsent/errors.hpp"

namespace finsent {

static_assert(kBatchNormEps == kLayerNormEps, "batch norm reuses the layer-norm kernel");

// --- Config ----------------------------------------------------------------

void ModelConfig::validate() const {
    const auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
    if (d_model == 0 || d_model % 2 != 0) fail("d_model must be a positive even number");
    if (n_base_layers == 0) fail("n_base_layers must be positive");
    if (n_heads_base == 0 || d_model % n_heads_base != 0) {
        fail("n_heads_base (" + std::to_string(n_heads_base) + ") must divide d_model (" + std::to_string(d_model) +
             ")");
    }
    if (!baseline) {
        if (n_stack_layers < 1 || n_stack_layers > 6) fail("n_stack_layers must lie in [1, 6]");
        if (n_heads_stack == 0 || fused_width() % n_heads_stack != 0) {
            fail("n_heads_stack (" + std::to_string(n_heads_stack) + ") must divide d_model+4 (" +
                 std::to_string(fused_width()) + ")");
        }
    }
    if (ffn_multiplier == 0) fail("ffn_multiplier must be positive");
    if (head_hidden == 0) fail("head_hidden must be positive");
    if (max_len < 3) fail("max_len must be at least 3");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
    if (vocab_size < 4) fail("vocab_size must cover at least the four special tokens");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    char buf[32];
    *std::to_chars(buf, buf + sizeof buf - 1, dropout).ptr = '\0';
    return {
        {"d_model", std::to_string(d_model)},
        {"n_stack_layers", std::to_string(n_stack_layers)},
        {"n_base_layers", std::to_string(n_base_layers)},
        {"n_heads_base", std::to_string(n_heads_base)},
        {"n_heads_stack", std::to_string(n_heads_stack)},
        {"ffn_multiplier", std::to_string(ffn_multiplier)},
        {"head_hidden", std::to_string(head_hidden)},
        {"max_len", std::to_string(max_len)},
        {"dropout", buf},
        {"vocab_size", std::to_string(vocab_size)},
        {"baseline", baseline ? "true" : "false"},
        {"lowercase", lowercase ? "true" : "false"},
    };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values) {
    ModelConfig config;
    const auto size_field = [](const std::string& key, const std::string& text) {
        std::size_t v = 0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || end != text.data() + text.size()) {
            throw ConfigError("model config key '" + key + "': not a non-negative integer: '" + text + "'");
        }
        return v;
    };
    const auto bool_field = [](const std::string& key, const std::string& text) {
        if (text == "true") return true;
        if (text == "false") return false;
        throw ConfigError("model config key '" + key + "': expected true/false, got '" + text + "'");
    };
    for (const auto& [key, text] : values) {
        if (key == "d_model") config.d_model = size_field(key, text);
        else if (key == "n_stack_layers") config.n_stack_layers = size_field(key, text);
        else if (key == "n_base_layers") config.n_base_layers = size_field(key, text);
        else if (key == "n_heads_base") config.n_heads_base = size_field(key, text);
        else if (key == "n_heads_stack") config.n_heads_stack = size_field(key, text);
        else if (key == "ffn_multiplier") config.ffn_multiplier = size_field(key, text);
        else if (key == "head_hidden") config.head_hidden = size_field(key, text);
        else if (key == "max_len") config.max_len = size_field(key, text);
        else if (key == "vocab_size") config.vocab_size = size_field(key, text);
        else if (key == "baseline") config.baseline = bool_field(key, text);
        else if (key == "lowercase") config.lowercase = bool_field(key, text);
        else if (key == "dropout") {
            double v = 0.0;
            const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || end != text.data() + text.size()) {
                throw ConfigError("model config key 'dropout': not a number: '" + text + "'");
            }
            config.dropout = v;
        } else {
            throw ConfigError("unknown model config key '" + key + "'");
        }
    }
    return config;
}

// --- Parameters ------------------------------------------------------------

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Tensor normal(Shape shape) {
        std::vector<double> values(shape_size(shape));
        for (double& v : values) v = dist_(rng_);
        return Tensor::from(std::move(shape), std::move(values), true);
    }
    static Tensor zeros(std::size_t n) { return Tensor::zeros({n}, true); }
    static Tensor ones(std::size_t n) { return Tensor::filled({n}, 1.0, true); }

    LinearParams linear(std::size_t in, std::size_t out) { return {normal({in, out}), zeros(out)}; }
    static NormParams norm(std::size_t width) { return {ones(width), zeros(width)}; }

    EncoderParams encoder(std::size_t n_layers, std::size_t width, std::size_t ffn_width) {
        EncoderParams enc;
        for (std::size_t i = 0; i < n_layers; ++i) {
            EncoderLayerParams layer;
            layer.attn_norm = norm(width);
            layer.query = linear(width, width);
            layer.key = linear(width, width);
            layer.value = linear(width, width);
            layer.output = linear(width, width);
            layer.ffn_norm = norm(width);
            layer.ffn_inner = linear(width, ffn_width);
            layer.ffn_outer = linear(ffn_width, width);
            enc.layers.push_back(std::move(layer));
        }
        enc.final_norm = norm(width);
        return enc;
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> dist_{0.0, 0.02};
};

void append_linear(std::vector<NamedTensor>& out, const std::string& prefix, const LinearParams& p) {
    out.push_back({prefix + ".weight", p.weight});
    out.push_back({prefix + ".bias", p.bias});
}

void append_norm(std::vector<NamedTensor>& out, const std::string& prefix, const NormParams& p) {
    out.push_back({prefix + ".gain", p.gain});
    out.push_back({prefix + ".bias", p.bias});
}

void append_encoder(std::vector<NamedTensor>& out, const std::string& prefix, const EncoderParams& enc) {
    for (std::size_t i = 0; i < enc.layers.size(); ++i) {
        const auto& layer = enc.layers[i];
        const std::string p = prefix + ".layer" + std::to_string(i);
        append_norm(out, p + ".attn_norm", layer.attn_norm);
        append_linear(out, p + ".attn.query", layer.query);
        append_linear(out, p + ".attn.key", layer.key);
        append_linear(out, p + ".attn.value", layer.value);
        append_linear(out, p + ".attn.output", layer.output);
        append_norm(out, p + ".ffn_norm", layer.ffn_norm);
        append_linear(out, p + ".ffn.inner", layer.ffn_inner);
        append_linear(out, p + ".ffn.outer", layer.ffn_outer);
    }
    append_norm(out, prefix + ".final_norm", enc.final_norm);
}

}  // namespace

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Initializer init(seed);
    ModelParams params;
    const std::size_t d = config.d_model;
    params.token_embeddings = init.normal({config.vocab_size, d});
    params.base = init.encoder(config.n_base_layers, d, config.ffn_multiplier * d);
    if (!config.baseline) {
        const std::size_t w = config.fused_width();
        params.stack = init.encoder(config.n_stack_layers, w, config.ffn_multiplier * w);
    }
    const std::size_t f = config.head_input_width();
    params.head_norm.gain = Initializer::ones(f);
    params.head_norm.bias = Initializer::zeros(f);
    params.head_norm.running_mean.assign(f, 0.0);
    params.head_norm.running_var.assign(f, 1.0);
    params.head_hidden = init.linear(f, config.head_hidden);
    params.head_output = init.linear(config.head_hidden, 1);
    return params;
}

std::vector<NamedTensor> ModelParams::named_parameters() const {
    std::vector<NamedTensor> out;
    out.push_back({"embeddings.token", token_embeddings});
    append_encoder(out, "base", base);
    if (!stack.layers.empty()) append_encoder(out, "stack", stack);
    out.push_back({"head.norm.gain", head_norm.gain});
    out.push_back({"head.norm.bias", head_norm.bias});
    append_linear(out, "head.hidden", head_hidden);
    append_linear(out, "head.output", head_output);
    return out;
}

std::vector<Tensor> ModelParams::parameters() const {
    std::vector<Tensor> out;
    for (auto& named : named_parameters()) out.push_back(named.tensor);
    return out;
}

std::vector<NamedTensor> ModelParams::named_state() const {
    auto out = named_parameters();
    const std::size_t f = head_norm.running_mean.size();
    out.push_back({"head.norm.running_mean", Tensor::from({f}, head_norm.running_mean)});
    out.push_back({"head.norm.running_var", Tensor::from({f}, head_norm.running_var)});
    return out;
}

// --- Forward pass ----------------------------------------------------------

namespace {

void record(ForwardContext& ctx, const std::string& stage, const Tensor& t) {
    if (ctx.trace) ctx.trace->stages.emplace_back(stage, t.shape());
}

void expect_shape(const Tensor& t, const Shape& expected, const std::string& stage) {
    if (t.shape() != expected) {
        throw ShapeError(stage + ": expected " + shape_string(expected) + ", got " + shape_string(t.shape()));
    }
}

Tensor maybe_dropout(const Tensor& x, double p, ForwardContext& ctx) {
    if (ctx.mode != Mode::kTraining || p == 0.0) return x;
    if (!ctx.rng) throw ConfigError("training-mode forward with dropout needs a random generator");
    return dropout(x, p, *ctx.rng);
}

Tensor linear(const Tensor& x, const LinearParams& p) { return add_rowwise(matmul(x, p.weight), p.bias); }

Tensor self_attention(const Tensor& h, const Tensor& key_mask, const EncoderLayerParams& layer,
                      std::size_t n_heads, ForwardContext& ctx) {
    const std::size_t width = h.cols();
    const std::size_t head_width = width / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));
    const Tensor q = linear(h, layer.query);
    const Tensor k = linear(h, layer.key);
    const Tensor v = linear(h, layer.value);
    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (std::size_t i = 0; i < n_heads; ++i) {
        const std::size_t begin = i * head_width;
        Tensor logits = scale(matmul(slice_cols(q, begin, head_width), transpose(slice_cols(k, begin, head_width))),
                              inv_sqrt);
        if (key_mask.defined()) logits = add_rowwise(logits, key_mask);
        Tensor weights = softmax_rows(logits);
        if (ctx.trace) ctx.trace->attention.push_back(weights);
        heads.push_back(matmul(weights, slice_cols(v, begin, head_width)));
    }
    return linear(concat_cols(heads), layer.output);
}

// Pre-norm residual layer: x + Attn(LN(x)), then x + FFN(LN(x)). The
// original Transformer normalizes after the residual; normalizing first
// trains without warmup at this scale.
Tensor encoder_layer(const Tensor& x, const Tensor& key_mask, const EncoderLayerParams& layer,
                     std::size_t n_heads, double p_drop, ForwardContext& ctx) {
    const Tensor attn =
        self_attention(layer_norm(x, layer.attn_norm.gain, layer.attn_norm.bias), key_mask, layer, n_heads, ctx);
    const Tensor mid = add(x, maybe_dropout(attn, p_drop, ctx));
    const Tensor h = layer_norm(mid, layer.ffn_norm.gain, layer.ffn_norm.bias);
    const Tensor ffn = linear(gelu(linear(h, layer.ffn_inner)), layer.ffn_outer);
    return add(mid, maybe_dropout(ffn, p_drop, ctx));
}

Tensor run_encoder(Tensor x, const Tensor& key_mask, const EncoderParams& enc, std::size_t n_heads, double p_drop,
                   ForwardContext& ctx) {
    for (const auto& layer : enc.layers) x = encoder_layer(x, key_mask, layer, n_heads, p_drop, ctx);
    return layer_norm(x, enc.final_norm.gain, enc.final_norm.bias);
}

void check_mask(const Tensor& key_mask, std::size_t length) {
    if (key_mask.defined() && key_mask.size() != length) {
        throw ShapeError("key mask has " + std::to_string(key_mask.size()) + " entries for a sequence of length " +
                         std::to_string(length));
    }
}

}  // namespace

Tensor sinusoidal_positions(std::size_t length, std::size_t width) {
    if (width == 0 || width % 2 != 0) {
        throw ConfigError("sinusoidal positions need an even width, got " + std::to_string(width));
    }
    if (length == 0) throw ShapeError("sinusoidal positions need a positive length");
    std::vector<double> values(length * width);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < width / 2; ++i) {
            const double angle = static_cast<double>(pos) /
                                 std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
            values[pos * width + 2 * i] = std::sin(angle);
            values[pos * width + 2 * i + 1] = std::cos(angle);
        }
    }
    return Tensor::from({length, width}, std::move(values));
}

Tensor encode_base(std::span<const std::size_t> ids, const Tensor& key_mask, const ModelParams& params,
                   const ModelConfig& config, ForwardContext& ctx) {
    const std::size_t length = ids.size();
    if (length == 0) throw ShapeError("encode_base: empty token sequence");
    if (length > config.max_len) {
        throw ShapeError("encode_base: sequence length " + std::to_string(length) + " exceeds max_len " +
                         std::to_string(config.max_len));
    }
    for (std::size_t id : ids) {
        if (id >= config.vocab_size) {
            throw DataError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                            std::to_string(config.vocab_size));
        }
    }
    check_mask(key_mask, length);
    Tensor x = add(gather_rows(params.token_embeddings, ids), sinusoidal_positions(length, config.d_model));
    x = maybe_dropout(x, config.dropout, ctx);
    Tensor out = run_encoder(std::move(x), key_mask, params.base, config.n_heads_base, config.dropout, ctx);
    expect_shape(out, {length, config.d_model}, "base encoder");
    record(ctx, "base", out);
    return out;
}

Tensor fuse(const Tensor& base, const Tensor& features) {
    if (features.rank() != 2 || features.cols() != kSentimentFeatureWidth) {
        throw ShapeError("fuse: sentiment features must be [L x 4], got " + shape_string(features.shape()));
    }
    if (base.rows() != features.rows()) {
        throw ShapeError("fuse: " + std::to_string(base.rows()) + " token rows but " +
                         std::to_string(features.rows()) + " feature rows");
    }
    const Tensor parts[] = {base, features};
    return concat_cols(parts);
}

Tensor fuse(const Tensor& base, const SentimentFeatures& features) {
    if (base.rows() != features.size()) {
        throw ShapeError("fuse: " + std::to_string(base.rows()) + " token rows but " +
                         std::to_string(features.size()) + " feature rows");
    }
    return fuse(base, features.to_tensor());
}

Tensor sentiment_stack(const Tensor& fused, const Tensor& key_mask, const ModelParams& params,
                       const ModelConfig& config, ForwardContext& ctx) {
    const std::size_t width = config.fused_width();
    if (fused.rank() != 2 || fused.cols() != width) {
        throw ShapeError("sentiment_stack: expected width " + std::to_string(width) + ", got " +
                         shape_string(fused.shape()));
    }
    if (params.stack.layers.empty()) throw ShapeError("sentiment_stack: model has no stack layers (baseline mode)");
    check_mask(key_mask, fused.rows());
    Tensor x = add(fused, sinusoidal_positions(fused.rows(), width));
    x = maybe_dropout(x, config.dropout, ctx);
    Tensor out = run_encoder(std::move(x), key_mask, params.stack, config.n_heads_stack, config.dropout, ctx);
    expect_shape(out, fused.shape(), "sentiment stack");
    record(ctx, "stack", out);
    return out;
}

BatchOutput forward_batch(std::span<const ModelInput> batch, const ModelParams& params, const ModelConfig& config,
                          ForwardContext& ctx) {
    if (batch.empty()) throw ShapeError("forward_batch: empty batch");
    const bool training = ctx.mode == Mode::kTraining;
    if (training && batch.size() < 2) {
        throw ShapeError("forward_batch: batch normalization in training mode needs at least 2 examples");
    }

    std::size_t max_len = 0;
    for (const auto& input : batch) {
        if (input.seq.ids.size() != input.features.size()) {
            throw ShapeError("forward_batch: " + std::to_string(input.seq.ids.size()) + " token ids but " +
                             std::to_string(input.features.size()) + " feature rows");
        }
        max_len = std::max(max_len, input.seq.ids.size());
    }

    std::vector<Tensor> head_rows;
    head_rows.reserve(batch.size());
    for (const auto& input : batch) {
        const std::size_t length = input.seq.ids.size();
        std::vector<std::size_t> ids = input.seq.ids;
        Tensor key_mask;
        if (length < max_len) {
            ids.resize(max_len, input.pad_id);
            std::vector<double> mask(max_len, 0.0);
            std::fill(mask.begin() + static_cast<std::ptrdiff_t>(length), mask.end(), kMaskedLogit);
            key_mask = Tensor::from({max_len}, std::move(mask));
        }
        if (ctx.trace) ctx.trace->stages.emplace_back("ids", Shape{max_len});
        const Tensor base = encode_base(ids, key_mask, params, config, ctx);
        const Tensor base_cls = row(base, 0);
        if (config.baseline) {
            head_rows.push_back(base_cls);
            continue;
        }
        const Tensor fused = fuse(base, input.features.to_tensor(max_len));
        expect_shape(fused, {max_len, config.fused_width()}, "fusion");
        record(ctx, "fused", fused);
        const Tensor stack = sentiment_stack(fused, key_mask, params, config, ctx);
        const Tensor parts[] = {base_cls, row(stack, 0)};
        head_rows.push_back(concat_cols(parts));
    }

    const Tensor head_in = concat_rows(head_rows);
    expect_shape(head_in, {batch.size(), config.head_input_width()}, "head input");
    record(ctx, "head_input", head_in);

    BatchOutput output;
    const auto& bn = params.head_norm;
    const std::size_t n = batch.size(), f = config.head_input_width();
    Tensor normalized;
    if (training) {
        // Per-feature normalization over the batch is layer norm on the
        // transposed matrix.
        const Tensor unit = Tensor::filled({n}, 1.0);
        const Tensor zero = Tensor::zeros({n});
        normalized = transpose(layer_norm(transpose(head_in), unit, zero));
        output.batch_mean.assign(f, 0.0);
        output.batch_var.assign(f, 0.0);
        for (std::size_t j = 0; j < f; ++j) {
            for (std::size_t i = 0; i < n; ++i) output.batch_mean[j] += head_in.at(i, j);
            output.batch_mean[j] /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double dev = head_in.at(i, j) - output.batch_mean[j];
                output.batch_var[j] += dev * dev;
            }
            output.batch_var[j] /= static_cast<double>(n);
        }
    } else {
        std::vector<double> shift(f), inv_std(f);
        for (std::size_t j = 0; j < f; ++j) {
            shift[j] = -bn.running_mean[j];
            inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + kBatchNormEps);
        }
        normalized = mul_rowwise(add_rowwise(head_in, Tensor::from({f}, std::move(shift))),
                                 Tensor::from({f}, std::move(inv_std)));
    }
    const Tensor affine = add_rowwise(mul_rowwise(normalized, bn.gain), bn.bias);
    Tensor hidden = gelu(linear(affine, params.head_hidden));
    hidden = maybe_dropout(hidden, config.dropout, ctx);
    output.scores = tanh(linear(hidden, params.head_output));
    expect_shape(output.scores, {n, 1}, "scores");
    record(ctx, "scores", output.scores);
    return output;
}

void update_running_stats(ModelParams& params, const BatchOutput& output) {
    auto& bn = params.head_norm;
    if (output.batch_mean.size() != bn.running_mean.size()) {
        throw ShapeError("update_running_stats: batch statistics missing or of the wrong width");
    }
    for (std::size_t j = 0; j < bn.running_mean.size(); ++j) {
        bn.running_mean[j] = kBatchNormMomentum * bn.running_mean[j] + (1.0 - kBatchNormMomentum) * output.batch_mean[j];
        bn.running_var[j] = kBatchNormMomentum * bn.running_var[j] + (1.0 - kBatchNormMomentum) * output.batch_var[j];
    }
}

double predict_score(const ModelInput& input, const ModelParams& params, const ModelConfig& config) {
    NoGradGuard no_grad;
    ForwardContext ctx;
    return forward_batch(std::span(&input, 1), params, config, ctx).scores.item();
}

ModelInput Featurizer::operator()(std::string_view text) const {
    ModelInput input;
    input.seq = encode(text, *vocab_, options_);
    input.features = sentiment_features(input.seq, *senti_, *market_);
    input.pad_id = vocab_->pad_id();
    return input;
}

}  // namespace finsent
