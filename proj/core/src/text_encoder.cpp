#include "lgn/text_encoder.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "lgn/ops.hpp"

namespace lgn {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const std::string& t : tokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnknownId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw ValidationError("token id " + std::to_string(id) +
                          " out of range for vocabulary of size " +
                          std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                               const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) {
    throw ConfigError("encode_tokens requires max_len >= 1");
  }
  if (tokens.empty()) {
    throw EmptyQueryError("query tokenized to an empty sequence");
  }
  std::vector<int> ids;
  ids.reserve(std::min(tokens.size(), max_len));
  for (const std::string& t : tokens) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id_of(t));
  }
  return ids;
}

Tensor lstm_forward(std::span<const int> ids, const Tensor& embedding_table,
                    const LstmParams& params) {
  if (ids.empty()) {
    throw EmptyQueryError("lstm_forward requires at least one token");
  }
  const std::size_t d_h = params.hidden_width();
  Tensor h = Tensor::zeros({d_h});
  Tensor c = Tensor::zeros({d_h});
  for (int id : ids) {
    Tensor x = lookup_row(embedding_table, static_cast<std::size_t>(id));
    Tensor z = concat_vec(x, h);
    Tensor gate_i = sigmoid(add(matvec(params.w_input, z), params.b_input));
    Tensor gate_f = sigmoid(add(matvec(params.w_forget, z), params.b_forget));
    Tensor gate_o = sigmoid(add(matvec(params.w_output, z), params.b_output));
    Tensor cand = tanh(add(matvec(params.w_candidate, z), params.b_candidate));
    c = add(hadamard(gate_f, c), hadamard(gate_i, cand));
    h = hadamard(gate_o, tanh(c));
  }
  return h;
}

Tensor sentence_embed(const Tensor& last_hidden,
                      const SentenceProjection& projection) {
  if (projection.weight.rank() != 2 ||
      projection.weight.shape()[1] != last_hidden.shape()[0] ||
      projection.bias.shape()[0] != projection.weight.shape()[0]) {
    throw DimensionError("sentence_embed: projection " +
                         shape_str(projection.weight.shape()) + " with bias " +
                         shape_str(projection.bias.shape()) +
                         " does not fit hidden state " +
                         shape_str(last_hidden.shape()));
  }
  return add(matvec(projection.weight, last_hidden), projection.bias);
}

std::pair<Vocabulary, Tensor> load_pretrained_embeddings(
    const std::filesystem::path& file, std::size_t d_w) {
  std::ifstream in(file);
  if (!in) {
    throw FormatError("cannot open embedding file: " + file.string());
  }
  Vocabulary vocab;
  std::vector<double> rows(2 * d_w, 0.0);  // zero pad and unknown rows
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> vec;
    vec.reserve(d_w);
    double v;
    while (ss >> v) vec.push_back(v);
    if (vec.size() != d_w) {
      throw FormatError("embedding file " + file.string() + " line " +
                        std::to_string(line_no) + ": expected " +
                        std::to_string(d_w) + " values, got " +
                        std::to_string(vec.size()));
    }
    int id = vocab.add(token);
    if (static_cast<std::size_t>(id) * d_w == rows.size()) {
      rows.insert(rows.end(), vec.begin(), vec.end());
    }  // duplicate tokens keep the first entry
  }
  Tensor table({vocab.size(), d_w}, std::move(rows));
  return {std::move(vocab), std::move(table)};
}

}  // namespace lgn
