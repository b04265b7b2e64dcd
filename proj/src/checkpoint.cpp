#include "rseg/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace rseg {

namespace {

using json = nlohmann::json;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t at) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[at + i]) << (8 * i);
  return value;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& ckpt) {
  json manifest;
  manifest["format"] = "rseg-checkpoint";
  manifest["kind"] = ckpt.kind;
  manifest["stage"] = ckpt.stage;
  manifest["iteration"] = ckpt.iteration;
  manifest["config"] = ckpt.config;
  manifest["vocabulary"] = {{"hash", hex64(ckpt.vocab.hash())}, {"tokens", ckpt.vocab.tokens()}};
  manifest["word_list"] = ckpt.word_list;
  json params = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.params) {
    params.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}, {"count", tensor.numel()}});
    offset += 8 * tensor.numel();
  }
  manifest["parameters"] = params;
  manifest["blob_bytes"] = offset;
  const auto text = manifest.dump(1);

  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& [name, tensor] : ckpt.params)
    for (double v : tensor.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 8 + 4 + 8;
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointError("checkpoint magic: expected RSEGCKPT");
  }
  if (bytes.size() < kHeader) throw CheckpointError("checkpoint truncated in header");
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version: expected " + std::to_string(kCheckpointVersion) + ", found " +
                          std::to_string(version));
  }
  const auto manifest_len = get_le<std::uint64_t>(bytes, 12);
  if (manifest_len > bytes.size() - kHeader) throw CheckpointError("checkpoint manifest: truncated");
  const std::string text(reinterpret_cast<const char*>(bytes.data() + kHeader), manifest_len);
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest: malformed JSON: ") + e.what());
  }

  Checkpoint ckpt;
  const auto blobs = bytes.subspan(kHeader + manifest_len);
  try {
    ckpt.kind = manifest.at("kind").get<std::string>();
    ckpt.stage = manifest.at("stage").get<std::string>();
    ckpt.iteration = manifest.at("iteration").get<std::uint64_t>();
    ckpt.config = manifest.at("config").get<std::map<std::string, std::string>>();
    ckpt.word_list = manifest.at("word_list").get<std::vector<std::string>>();
    const auto& vocab = manifest.at("vocabulary");
    ckpt.vocab = Vocabulary(vocab.at("tokens").get<std::vector<std::string>>());
    if (vocab.at("hash").get<std::string>() != hex64(ckpt.vocab.hash())) {
      throw CheckpointError("checkpoint vocabulary: hash does not match tokens");
    }
    const auto blob_bytes = manifest.at("blob_bytes").get<std::uint64_t>();
    if (blobs.size() < blob_bytes) {
      throw CheckpointError("checkpoint blobs: truncated (" + std::to_string(blobs.size()) + " of " +
                            std::to_string(blob_bytes) + " bytes)");
    }
    for (const auto& entry : manifest.at("parameters")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (shape.empty() || shape_numel(shape) != count) {
        throw CheckpointError("checkpoint parameter '" + name + "': shape " + shape_str(shape) +
                              " disagrees with count " + std::to_string(count));
      }
      if (offset > blobs.size() || count > (blobs.size() - offset) / 8) {
        throw CheckpointError("checkpoint parameter '" + name + "': blob truncated");
      }
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<double>(get_le<std::uint64_t>(blobs, offset + 8 * i));
      ckpt.params.add(name, Tensor(shape, std::move(data)));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = save_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return load_checkpoint(bytes);
}

Checkpoint make_checkpoint(const SegmentationModel& model, const RunConfig& config, std::string stage,
                           std::uint64_t iteration) {
  RunConfig snapshot = config;
  snapshot.model = model.config();
  Checkpoint ckpt;
  ckpt.kind = "segmentation";
  ckpt.stage = std::move(stage);
  ckpt.iteration = iteration;
  ckpt.config = snapshot.to_map();
  ckpt.vocab = model.vocabulary();
  ckpt.params = model.params().clone();
  return ckpt;
}

RunConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  try {
    return RunConfig::from_map(checkpoint.config);
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
}

SegmentationModel model_from_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.kind != "segmentation") {
    throw CheckpointError("checkpoint kind: expected segmentation, found " + checkpoint.kind);
  }
  try {
    return SegmentationModel(config_from_checkpoint(checkpoint).model, checkpoint.vocab, checkpoint.params.clone());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint parameters: ") + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("checkpoint parameters: ") + e.what());
  }
}

}  // namespace rseg
