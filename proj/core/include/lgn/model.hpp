#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgn/moment_map.hpp"
#include "lgn/params.hpp"
#include "lgn/rng.hpp"
#include "lgn/text_encoder.hpp"

namespace lgn {

struct ModelConfig {
  std::size_t N = 16;
  std::size_t d_v = 32;
  std::size_t d_w = 16;
  std::size_t d_h = 32;  // shared by the visual head and the map channels
  std::size_t d_s = 32;
  std::size_t n_early = 2;
  std::size_t n_conv = 6;
  std::size_t n_late = 6;
  std::size_t kernel_size = 3;
  PoolingMode pooling = PoolingMode::Max;
  // "ratio" of the dropout layers. Read as drop probability by default;
  // flip dropout_is_keep for the keep-probability reading.
  double dropout = 0.75;
  bool dropout_is_keep = false;
  bool use_early = true;
  bool use_late = true;
  // Eq-literal per-channel normalization of the late guidance output,
  // instead of the default joint normalization across channels per cell.
  bool late_norm_per_channel = false;
  std::uint64_t seed = 0;

  double drop_probability() const {
    return dropout_is_keep ? 1.0 - dropout : dropout;
  }
  void validate() const;
  // Width preset matching the published setting (4096/512/512/300).
  static ModelConfig paper_dims();
};

// Execution mode for a forward pass. Training with a positive drop
// probability requires an rng.
struct RunContext {
  bool training = false;
  Rng* rng = nullptr;
};

// All units share one language projection (the W^M of the early stage).
struct EarlyModulationParams {
  std::vector<Tensor> fc_weights;  // unit i: [d_h x in_i], in_0 = d_v
  std::vector<Tensor> fc_biases;   // [d_h]
  Tensor language_weight;          // shared [d_h x d_s]
  Tensor language_bias;            // [d_h]
};

struct FusionParams {
  Tensor visual_weight;    // [d_h x d_h]
  Tensor visual_bias;      // [d_h]
  Tensor sentence_weight;  // [d_h x d_s]
  Tensor sentence_bias;    // [d_h]
};

// One shared language projection (the W^M' of the localization stage).
struct LateGuidanceParams {
  Tensor language_weight;  // [d_h x d_s]
  Tensor language_bias;    // [d_h]
};

struct LocalizerParams {
  std::vector<Tensor> conv_kernels;  // [d_h x d_h x k x k]
  std::vector<Tensor> conv_biases;   // [d_h]
  Tensor head_kernel;                // [1 x d_h x 1 x 1]
  Tensor head_bias;                  // [1]
};

// Per-cell linear transform of a [C_in, N, N] map: y = W x + b at each cell.
Tensor per_cell_linear(const Tensor& x, const Tensor& weight,
                       const Tensor& bias);

// Zeroes invalid cells (start > end) of a [C, N, N] activation.
Tensor apply_cell_mask(const Tensor& x);

// F = (W f_s + b) o f_v, the modulation vector broadcast over all positions.
Tensor early_modulate(const Tensor& f_v, const Tensor& f_s,
                      const Tensor& language_weight,
                      const Tensor& language_bias);

// n_early rounds of per-cell FC -> modulation -> dropout over the pooled
// map. With use_early off the modulation step is skipped (ablation
// baseline); FC and dropout remain. Invalid cells stay exactly zero.
Tensor visual_head(const TemporalMap& map, const Tensor& f_s,
                   const EarlyModulationParams& params,
                   const ModelConfig& config, const RunContext& ctx);

// Projects both modalities into d_h, multiplies the sentence vector into
// every cell, and L2-normalizes each cell's channel vector.
Tensor fuse(const Tensor& v, const Tensor& f_s, const FusionParams& params);

// Channel attention alpha = W' f_s + b', followed by L2 normalization.
// Joint normalization (per cell, across channels) by default; the
// per-channel reading normalizes each channel plane instead.
Tensor late_guide(const Tensor& c, const Tensor& f_s,
                  const LateGuidanceParams& params, bool per_channel_norm);

// Masked conv stack with guidance after each of the first n_late layers,
// then a 1x1 head with clamped logits and sigmoid. Returns [N, N] scores in
// (0, 1) on valid cells and exactly 0 on invalid cells.
Tensor localize(const Tensor& fused, const Tensor& f_s,
                const LocalizerParams& localizer,
                const LateGuidanceParams& guidance,
                const ModelConfig& config);

MomentSpan retrieve(const Tensor& scores,
                    const std::vector<std::uint8_t>& valid, std::size_t N,
                    double duration_s);

struct RankedProposal {
  std::size_t a = 0;
  std::size_t b = 0;
  double score = 0.0;
  MomentSpan span;
};

std::vector<RankedProposal> rank_proposals(
    const Tensor& scores, const std::vector<std::uint8_t>& valid,
    std::size_t n, std::optional<double> nms_iou, std::size_t N,
    double duration_s);

struct ForwardResult {
  Tensor scores;    // [N, N]
  Tensor sentence;  // f_s
};

class LgnModel {
 public:
  // Random initialization; pass a pretrained table (row count matching the
  // vocabulary) to load fixed embeddings instead.
  LgnModel(ModelConfig config, Vocabulary vocab, Rng& init_rng,
           const Tensor* pretrained_embeddings = nullptr);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterCollection& params() { return params_; }
  const ParameterCollection& params() const { return params_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  Tensor sentence_embedding(std::span<const int> ids) const;

  ForwardResult forward(const ClipFeatureSequence& video,
                        const std::vector<std::string>& tokens,
                        const RunContext& ctx) const;
  // Training fast path over a precomputed pooled map.
  ForwardResult forward_from_map(const TemporalMap& map,
                                 std::span<const int> ids,
                                 const RunContext& ctx) const;

  const EarlyModulationParams& early_params() const { return early_; }
  const FusionParams& fusion_params() const { return fusion_; }
  const LateGuidanceParams& late_params() const { return late_; }
  const LocalizerParams& localizer_params() const { return localizer_; }
  const LstmParams& lstm_params() const { return lstm_; }

  static constexpr std::size_t kMaxQueryLen = 32;

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParameterCollection params_;
  Tensor embedding_;
  LstmParams lstm_;
  SentenceProjection projection_;
  EarlyModulationParams early_;
  FusionParams fusion_;
  LateGuidanceParams late_;
  LocalizerParams localizer_;
};

// FNV-1a over the serialized config and every parameter payload.
std::string model_fingerprint(const LgnModel& model);

}  // namespace lgn
