#include "lgn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lgn/ops.hpp"

namespace lgn {

void ModelConfig::validate() const {
  if (N == 0 || d_v == 0 || d_w == 0 || d_h == 0 || d_s == 0) {
    throw ConfigError("model widths and N must be >= 1");
  }
  if (n_late > n_conv) {
    throw ConfigError("n_late (" + std::to_string(n_late) +
                      ") must not exceed n_conv (" + std::to_string(n_conv) +
                      ")");
  }
  if (kernel_size % 2 == 0 || kernel_size == 0) {
    throw ConfigError("kernel_size must be odd");
  }
  double p = drop_probability();
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout drop probability must lie in [0, 1), got " +
                      std::to_string(p));
  }
}

ModelConfig ModelConfig::paper_dims() {
  ModelConfig cfg;
  cfg.d_v = 4096;
  cfg.d_s = 512;
  cfg.d_h = 512;
  cfg.d_w = 300;
  return cfg;
}

Tensor per_cell_linear(const Tensor& x, const Tensor& weight,
                       const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 2 ||
      weight.shape()[1] != x.shape()[0]) {
    throw DimensionError("per_cell_linear: weight " +
                         shape_str(weight.shape()) + " does not fit map " +
                         shape_str(x.shape()));
  }
  const std::size_t h = x.shape()[1], w = x.shape()[2];
  const std::size_t c_out = weight.shape()[0];
  Tensor flat = reshape(x, {x.shape()[0], h * w});
  Tensor y = add_vec_axis(matmul(weight, flat), bias, 0);
  return reshape(y, {c_out, h, w});
}

Tensor apply_cell_mask(const Tensor& x) {
  if (x.rank() != 3 || x.shape()[1] != x.shape()[2]) {
    throw DimensionError("apply_cell_mask expects a [C, N, N] map, got " +
                         shape_str(x.shape()));
  }
  const std::size_t c = x.shape()[0], n = x.shape()[1];
  auto valid = build_validity_mask(n);
  std::vector<double> mask(c * n * n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < n * n; ++i)
      mask[ch * n * n + i] = static_cast<double>(valid[i]);
  return hadamard(x, Tensor({c, n, n}, std::move(mask)));
}

Tensor early_modulate(const Tensor& f_v, const Tensor& f_s,
                      const Tensor& language_weight,
                      const Tensor& language_bias) {
  Tensor m = add(matvec(language_weight, f_s), language_bias);
  return mul_vec_axis(f_v, m, 0);
}

Tensor visual_head(const TemporalMap& map, const Tensor& f_s,
                   const EarlyModulationParams& params,
                   const ModelConfig& config, const RunContext& ctx) {
  if (params.fc_weights.size() != config.n_early) {
    throw ConfigError("visual_head: expected " +
                      std::to_string(config.n_early) + " FC layers, have " +
                      std::to_string(params.fc_weights.size()));
  }
  const double p = config.drop_probability();
  const bool dropping = ctx.training && p > 0.0;
  if (dropping && ctx.rng == nullptr) {
    throw ConfigError("training forward with dropout requires an rng");
  }
  Tensor x = map.cell_features;
  for (std::size_t i = 0; i < config.n_early; ++i) {
    x = per_cell_linear(x, params.fc_weights[i], params.fc_biases[i]);
    x = apply_cell_mask(x);
    if (config.use_early) {
      x = early_modulate(x, f_s, params.language_weight, params.language_bias);
    }
    if (dropping) {
      x = dropout(x, p, true, *ctx.rng);
    }
    x = apply_cell_mask(x);
  }
  return x;
}

Tensor fuse(const Tensor& v, const Tensor& f_s, const FusionParams& params) {
  Tensor pv = per_cell_linear(v, params.visual_weight, params.visual_bias);
  pv = apply_cell_mask(pv);
  Tensor ps = add(matvec(params.sentence_weight, f_s), params.sentence_bias);
  Tensor fused = mul_vec_axis(pv, ps, 0);
  fused = l2_normalize(fused, 0);
  return apply_cell_mask(fused);
}

Tensor late_guide(const Tensor& c, const Tensor& f_s,
                  const LateGuidanceParams& params, bool per_channel_norm) {
  Tensor alpha = add(matvec(params.language_weight, f_s),
                     params.language_bias);
  Tensor scaled = mul_vec_axis(c, alpha, 0);
  if (per_channel_norm) {
    // Literal reading: each channel plane normalized on its own, which
    // cancels |alpha_i| and keeps only its sign.
    const std::size_t axes[2] = {1, 2};
    return l2_normalize(scaled, std::span<const std::size_t>(axes));
  }
  return l2_normalize(scaled, 0);
}

Tensor localize(const Tensor& fused, const Tensor& f_s,
                const LocalizerParams& localizer,
                const LateGuidanceParams& guidance,
                const ModelConfig& config) {
  if (localizer.conv_kernels.size() != config.n_conv) {
    throw ConfigError("localize: expected " + std::to_string(config.n_conv) +
                      " conv layers, have " +
                      std::to_string(localizer.conv_kernels.size()));
  }
  const std::size_t n = fused.shape()[1];
  Tensor c = fused;
  for (std::size_t l = 0; l < config.n_conv; ++l) {
    c = conv2d(c, localizer.conv_kernels[l], localizer.conv_biases[l]);
    c = relu(c);
    c = apply_cell_mask(c);
    if (config.use_late && l < config.n_late) {
      c = late_guide(c, f_s, guidance, config.late_norm_per_channel);
      c = apply_cell_mask(c);
    }
  }
  Tensor logits = conv2d(c, localizer.head_kernel, localizer.head_bias);
  logits = clamp(logits, -30.0, 30.0);
  Tensor p = sigmoid(logits);
  p = reshape(p, {n, n});
  return hadamard(p, validity_tensor(n));
}

MomentSpan retrieve(const Tensor& scores,
                    const std::vector<std::uint8_t>& valid, std::size_t N,
                    double duration_s) {
  bool found = false;
  double best = 0.0;
  std::size_t best_a = 0, best_b = 0;
  auto sv = scores.values();
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = a; b < N; ++b) {
      if (!valid[a * N + b]) continue;
      double s = sv[a * N + b];
      // strict comparison with ascending scan order implements the
      // smaller-start-then-smaller-end tie rule
      if (!found || s > best) {
        found = true;
        best = s;
        best_a = a;
        best_b = b;
      }
    }
  }
  if (!found) {
    throw NoProposalError("retrieve: no valid cell in the proposal map");
  }
  return cell_to_span(best_a, best_b, N, duration_s);
}

std::vector<RankedProposal> rank_proposals(
    const Tensor& scores, const std::vector<std::uint8_t>& valid,
    std::size_t n, std::optional<double> nms_iou, std::size_t N,
    double duration_s) {
  if (n == 0) {
    throw ConfigError("rank_proposals requires n >= 1");
  }
  std::vector<RankedProposal> candidates;
  candidates.reserve(N * (N + 1) / 2);
  auto sv = scores.values();
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = a; b < N; ++b) {
      if (!valid[a * N + b]) continue;
      candidates.push_back(RankedProposal{
          a, b, sv[a * N + b], cell_to_span(a, b, N, duration_s)});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const RankedProposal& x, const RankedProposal& y) {
              if (x.score != y.score) return x.score > y.score;
              if (x.a != y.a) return x.a < y.a;
              return x.b < y.b;
            });
  std::vector<RankedProposal> kept;
  for (const RankedProposal& cand : candidates) {
    if (kept.size() == n) break;
    if (nms_iou.has_value()) {
      bool suppressed = false;
      for (const RankedProposal& k : kept) {
        if (temporal_iou(cand.span, k.span) >= *nms_iou) {
          suppressed = true;
          break;
        }
      }
      if (suppressed) continue;
    }
    kept.push_back(cand);
  }
  return kept;
}

namespace {

Tensor init_uniform(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), /*requires_grad=*/true);
}

Tensor init_const(Shape shape, double value) {
  return Tensor::full(std::move(shape), value, /*requires_grad=*/true);
}

}  // namespace

LgnModel::LgnModel(ModelConfig config, Vocabulary vocab, Rng& init_rng,
                   const Tensor* pretrained_embeddings)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  const std::size_t d_w = config_.d_w, d_h = config_.d_h, d_s = config_.d_s;
  const std::size_t d_v = config_.d_v, k = config_.kernel_size;
  const std::size_t v_size = vocab_.size();

  if (pretrained_embeddings != nullptr) {
    if (pretrained_embeddings->shape() != Shape{v_size, d_w}) {
      throw DimensionError("pretrained embedding table " +
                           shape_str(pretrained_embeddings->shape()) +
                           " does not match vocabulary of size " +
                           std::to_string(v_size) + " at width " +
                           std::to_string(d_w));
    }
    embedding_ = Tensor(Shape{v_size, d_w},
                        std::vector<double>(
                            pretrained_embeddings->values().begin(),
                            pretrained_embeddings->values().end()),
                        true);
  } else {
    embedding_ = init_uniform({v_size, d_w}, 0.1, init_rng);
    auto vals = embedding_.values_mut();
    for (std::size_t i = 0; i < d_w; ++i) vals[i] = 0.0;  // pad row
  }
  Parameter& emb = params_.add("encoder.embedding", embedding_);
  emb.frozen_rows = {static_cast<std::size_t>(Vocabulary::kPadId)};
  emb.trainable = pretrained_embeddings == nullptr;

  const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(d_w + d_h));
  lstm_.w_input = params_.add("encoder.lstm.w_input",
                              init_uniform({d_h, d_w + d_h}, lstm_bound,
                                           init_rng)).tensor;
  lstm_.w_forget = params_.add("encoder.lstm.w_forget",
                               init_uniform({d_h, d_w + d_h}, lstm_bound,
                                            init_rng)).tensor;
  lstm_.w_output = params_.add("encoder.lstm.w_output",
                               init_uniform({d_h, d_w + d_h}, lstm_bound,
                                            init_rng)).tensor;
  lstm_.w_candidate = params_.add("encoder.lstm.w_candidate",
                                  init_uniform({d_h, d_w + d_h}, lstm_bound,
                                               init_rng)).tensor;
  lstm_.b_input = params_.add("encoder.lstm.b_input",
                              init_const({d_h}, 0.0)).tensor;
  // forget gate starts open
  lstm_.b_forget = params_.add("encoder.lstm.b_forget",
                               init_const({d_h}, 1.0)).tensor;
  lstm_.b_output = params_.add("encoder.lstm.b_output",
                               init_const({d_h}, 0.0)).tensor;
  lstm_.b_candidate = params_.add("encoder.lstm.b_candidate",
                                  init_const({d_h}, 0.0)).tensor;

  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(d_h));
  projection_.weight = params_.add("encoder.proj.weight",
                                   init_uniform({d_s, d_h}, proj_bound,
                                                init_rng)).tensor;
  projection_.bias = params_.add("encoder.proj.bias",
                                 init_const({d_s}, 0.0)).tensor;

  for (std::size_t i = 0; i < config_.n_early; ++i) {
    const std::size_t in = i == 0 ? d_v : d_h;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::string base = "visual_head.fc" + std::to_string(i);
    early_.fc_weights.push_back(
        params_.add(base + ".weight", init_uniform({d_h, in}, bound,
                                                   init_rng)).tensor);
    early_.fc_biases.push_back(
        params_.add(base + ".bias", init_const({d_h}, 0.0)).tensor);
  }
  // One W^M shared by every early unit. Bias 1 starts the modulation near
  // the identity so early training does not annihilate the visual signal.
  const double lang_bound = 1.0 / std::sqrt(static_cast<double>(d_s));
  early_.language_weight = params_.add("early.language.weight",
                                       init_uniform({d_h, d_s}, lang_bound,
                                                    init_rng)).tensor;
  early_.language_bias = params_.add("early.language.bias",
                                     init_const({d_h}, 1.0)).tensor;

  const double fusion_bound = 1.0 / std::sqrt(static_cast<double>(d_h));
  fusion_.visual_weight = params_.add("fusion.visual.weight",
                                      init_uniform({d_h, d_h}, fusion_bound,
                                                   init_rng)).tensor;
  fusion_.visual_bias = params_.add("fusion.visual.bias",
                                    init_const({d_h}, 0.0)).tensor;
  fusion_.sentence_weight = params_.add("fusion.sentence.weight",
                                        init_uniform({d_h, d_s}, lang_bound,
                                                     init_rng)).tensor;
  fusion_.sentence_bias = params_.add("fusion.sentence.bias",
                                      init_const({d_h}, 1.0)).tensor;

  // One W^M' shared by every late guidance module.
  late_.language_weight = params_.add("late.language.weight",
                                      init_uniform({d_h, d_s}, lang_bound,
                                                   init_rng)).tensor;
  late_.language_bias = params_.add("late.language.bias",
                                    init_const({d_h}, 1.0)).tensor;

  const double conv_bound =
      1.0 / std::sqrt(static_cast<double>(d_h * k * k));
  for (std::size_t l = 0; l < config_.n_conv; ++l) {
    std::string base = "localizer.conv" + std::to_string(l);
    localizer_.conv_kernels.push_back(
        params_.add(base + ".kernel", init_uniform({d_h, d_h, k, k},
                                                   conv_bound,
                                                   init_rng)).tensor);
    localizer_.conv_biases.push_back(
        params_.add(base + ".bias", init_const({d_h}, 0.0)).tensor);
  }
  localizer_.head_kernel = params_.add(
      "localizer.head.kernel",
      init_uniform({1, d_h, 1, 1}, proj_bound, init_rng)).tensor;
  localizer_.head_bias = params_.add("localizer.head.bias",
                                     init_const({1}, 0.0)).tensor;
}

std::vector<int> LgnModel::encode(
    const std::vector<std::string>& tokens) const {
  return encode_tokens(tokens, vocab_, kMaxQueryLen);
}

Tensor LgnModel::sentence_embedding(std::span<const int> ids) const {
  return sentence_embed(lstm_forward(ids, embedding_, lstm_), projection_);
}

ForwardResult LgnModel::forward(const ClipFeatureSequence& video,
                                const std::vector<std::string>& tokens,
                                const RunContext& ctx) const {
  ClipFeatureSequence resampled = resample_clips(video, config_.N);
  TemporalMap map = pool_moment_features(resampled, config_.pooling);
  std::vector<int> ids = encode(tokens);
  return forward_from_map(map, ids, ctx);
}

ForwardResult LgnModel::forward_from_map(const TemporalMap& map,
                                         std::span<const int> ids,
                                         const RunContext& ctx) const {
  if (map.N != config_.N) {
    throw DimensionError("temporal map of side " + std::to_string(map.N) +
                         " does not match configured N = " +
                         std::to_string(config_.N));
  }
  Tensor f_s = sentence_embedding(ids);
  Tensor v = visual_head(map, f_s, early_, config_, ctx);
  Tensor fused = fuse(v, f_s, fusion_);
  Tensor scores = localize(fused, f_s, localizer_, late_, config_);
  return ForwardResult{std::move(scores), std::move(f_s)};
}

std::string model_fingerprint(const LgnModel& model) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto feed = [&hash](const void* data, std::size_t len) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ULL;
    }
  };
  const ModelConfig& c = model.config();
  std::string header =
      std::to_string(c.N) + "/" + std::to_string(c.d_v) + "/" +
      std::to_string(c.d_h) + "/" + std::to_string(c.d_s) + "/" +
      std::to_string(c.n_early) + "/" + std::to_string(c.n_conv) + "/" +
      std::to_string(c.n_late) + "/" + std::to_string(c.use_early) +
      std::to_string(c.use_late);
  feed(header.data(), header.size());
  for (const Parameter& p : model.params().items()) {
    feed(p.name.data(), p.name.size());
    feed(p.tensor.values().data(), p.tensor.size() * sizeof(double));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace lgn
