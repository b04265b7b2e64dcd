#include "rseg/text_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "rseg/ops.hpp"

namespace rseg {

namespace {

bool is_alnum(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view expression) {
  std::vector<std::string> out;
  std::string piece;
  auto flush = [&] {
    auto first = std::find_if(piece.begin(), piece.end(), is_alnum);
    auto last = std::find_if(piece.rbegin(), piece.rend(), is_alnum).base();
    if (first < last) out.emplace_back(first, last);
    piece.clear();
  };
  for (char ch : expression) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      piece.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  if (out.empty()) out.emplace_back(kUnknownToken);
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kUnknownToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_.front() != kUnknownToken) {
    throw ContractError("vocabulary must start with " + std::string(kUnknownToken));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw ContractError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& tokenized) {
  std::set<std::string> distinct;
  for (const auto& seq : tokenized)
    for (const auto& tok : seq)
      if (tok != kUnknownToken) distinct.insert(tok);
  std::vector<std::string> tokens{std::string(kUnknownToken)};
  tokens.insert(tokens.end(), distinct.begin(), distinct.end());
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (const auto& tok : tokens_) out << tok << '\n';
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& tok : tokens_) {
    for (unsigned char ch : tok) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 0x100000001b3ULL;
  }
  return h;
}

TokenSequence Vocabulary::encode(const std::vector<std::string>& tokens) const {
  TokenSequence seq;
  for (const auto& tok : tokens) seq.ids.push_back(index_of(tok));
  if (seq.ids.empty()) seq.ids.push_back(0);
  return seq;
}

EncoderParams EncoderParams::from(const ParamStore& store) {
  return {store.get("text.embedding"), store.get("text.lstm.weight"), store.get("text.lstm.bias")};
}

void init_encoder(ParamStore& store, std::size_t vocab_size, const EncoderConfig& config, Rng& rng) {
  const auto d = config.d_text;
  auto embedding = Tensor::zeros({vocab_size, config.d_embed});
  auto weight = Tensor::zeros({config.d_embed + d, 4 * d});
  auto bias = Tensor::zeros({4 * d});
  fill_uniform(embedding, config.init_range, rng);
  fill_uniform(weight, config.init_range, rng);
  fill_uniform(bias, config.init_range, rng);
  auto b = bias.mutable_data();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(d), b.begin() + static_cast<std::ptrdiff_t>(2 * d),
            config.forget_bias);
  store.add("text.embedding", std::move(embedding));
  store.add("text.lstm.weight", std::move(weight));
  store.add("text.lstm.bias", std::move(bias));
}

LstmState lstm_step(Tape& tape, const Tensor& x, const LstmState& prev, const EncoderParams& params) {
  const auto d = params.d_text();
  if (x.shape() != Shape{params.d_embed()} || prev.h.shape() != Shape{d} || prev.c.shape() != Shape{d}) {
    throw DimensionError("lstm_step: expected x " + shape_str({params.d_embed()}) + " and state " + shape_str({d}) +
                         ", got " + shape_str(x.shape()) + ", " + shape_str(prev.h.shape()) + ", " +
                         shape_str(prev.c.shape()));
  }
  if (params.weight.shape() != Shape{params.d_embed() + d, 4 * d}) {
    throw DimensionError("lstm_step: weight " + shape_str(params.weight.shape()) + " inconsistent with widths");
  }
  auto xh = reshape(tape, concat(tape, x, prev.h), {1, params.d_embed() + d});
  auto gates = add(tape, reshape(tape, matmul(tape, xh, params.weight), {4 * d}), params.bias);
  auto i = sigmoid(tape, slice(tape, gates, 0, d));
  auto f = sigmoid(tape, slice(tape, gates, d, 2 * d));
  auto o = sigmoid(tape, slice(tape, gates, 2 * d, 3 * d));
  auto g = tanh(tape, slice(tape, gates, 3 * d, 4 * d));
  auto c = add(tape, mul(tape, f, prev.c), mul(tape, i, g));
  auto h = mul(tape, o, tanh(tape, c));
  return {h, c};
}

Tensor encode_expression(Tape& tape, const TokenSequence& tokens, const EncoderParams& params,
                         double normalize_eps) {
  if (tokens.ids.empty()) throw ContractError("encode_expression: empty token sequence");
  const auto d = params.d_text();
  LstmState state{Tensor::zeros({d}), Tensor::zeros({d})};
  for (auto id : tokens.ids) {
    if (id >= params.vocab_size()) {
      throw ContractError("encode_expression: token index " + std::to_string(id) + " >= vocabulary size " +
                          std::to_string(params.vocab_size()));
    }
    state = lstm_step(tape, gather_row(tape, params.embedding, id), state, params);
  }
  return l2_normalize(tape, state.h, normalize_eps);
}

}  // namespace rseg
