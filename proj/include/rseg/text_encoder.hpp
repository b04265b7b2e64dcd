#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rseg/params.hpp"
#include "rseg/tensor.hpp"

namespace rseg {

inline constexpr std::string_view kUnknownToken = "<unk>";

/// Lowercase, split on whitespace, strip leading/trailing non-alphanumerics,
/// drop empty pieces. An expression with no pieces becomes {"<unk>"}.
std::vector<std::string> tokenize(std::string_view expression);

/// Token indices for one expression; never empty.
struct TokenSequence {
  std::vector<std::size_t> ids;
  std::size_t size() const { return ids.size(); }
};

/// Dense token -> index map. Index 0 is always "<unk>".
class Vocabulary {
 public:
  Vocabulary();
  /// tokens[0] must be "<unk>" and all tokens must be distinct.
  explicit Vocabulary(std::vector<std::string> tokens);

  /// "<unk>" followed by every distinct token of the corpus in sorted order.
  static Vocabulary build(const std::vector<std::vector<std::string>>& tokenized);
  /// One token per line, line number = index.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// Unknown tokens map to index 0.
  std::size_t index_of(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// FNV-1a over the newline-joined token list.
  std::uint64_t hash() const;

  TokenSequence encode(const std::vector<std::string>& tokens) const;
  TokenSequence encode(std::string_view expression) const { return encode(tokenize(expression)); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EncoderConfig {
  std::size_t d_embed = 32;
  std::size_t d_text = 64;
  double init_range = 0.08;
  double forget_bias = 1.0;
  double normalize_eps = 1e-8;
};

/// Handles onto the encoder's parameters. The LSTM weight is
/// [(d_embed + d_text) x 4*d_text] with gate blocks in order (i, f, o, g).
struct EncoderParams {
  Tensor embedding;  // [V x d_embed]
  Tensor weight;
  Tensor bias;  // [4*d_text]

  std::size_t d_embed() const { return embedding.dim(1); }
  std::size_t d_text() const { return bias.dim(0) / 4; }
  std::size_t vocab_size() const { return embedding.dim(0); }

  static EncoderParams from(const ParamStore& store);
};

/// Registers text.embedding, text.lstm.weight and text.lstm.bias.
void init_encoder(ParamStore& store, std::size_t vocab_size, const EncoderConfig& config, Rng& rng);

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_step(Tape& tape, const Tensor& x, const LstmState& prev, const EncoderParams& params);

/// Runs the LSTM over the embedded tokens from a zero state and returns the
/// L2-normalized final hidden state.
Tensor encode_expression(Tape& tape, const TokenSequence& tokens, const EncoderParams& params,
                         double normalize_eps = 1e-8);

}  // namespace rseg
