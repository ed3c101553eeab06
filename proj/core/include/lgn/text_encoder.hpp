#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgn/params.hpp"
#include "lgn/tensor.hpp"

namespace lgn {

// Token/id bijection with reserved ids: pad = 0, unknown = 1.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnknownId = 1;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int add(const std::string& token);  // returns existing id when present
  int id_of(const std::string& token) const;  // unknown id when absent
  const std::string& token_of(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Lowercase, split on whitespace and punctuation.
std::vector<std::string> tokenize(const std::string& text);

std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                               const Vocabulary& vocab, std::size_t max_len);

// Gate weights are [d_h x (d_w + d_h)] over the concatenated (input, hidden)
// vector; biases are [d_h].
struct LstmParams {
  Tensor w_input, w_forget, w_output, w_candidate;
  Tensor b_input, b_forget, b_output, b_candidate;

  std::size_t hidden_width() const { return w_input.shape()[0]; }
  std::size_t input_width() const {
    return w_input.shape()[1] - w_input.shape()[0];
  }
};

struct SentenceProjection {
  Tensor weight;  // [d_s x d_h]
  Tensor bias;    // [d_s]
};

// Embedding rows for the id sequence fed through the LSTM recurrence from a
// zero initial state; returns the last hidden state h_T.
Tensor lstm_forward(std::span<const int> ids, const Tensor& embedding_table,
                    const LstmParams& params);

// f_s = W h_T + b.
Tensor sentence_embed(const Tensor& last_hidden,
                      const SentenceProjection& projection);

// Pretrained-embedding text file: one entry per line, token then d_w reals.
// Lines with wrong arity are rejected with their line number. Returns the
// vocabulary (pad/unknown prepended) and the [|V| x d_w] table values with
// zero pad and unknown rows.
std::pair<Vocabulary, Tensor> load_pretrained_embeddings(
    const std::filesystem::path& file, std::size_t d_w);

}  // namespace lgn
