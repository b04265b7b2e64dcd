#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rseg/config.hpp"
#include "rseg/model.hpp"
#include "rseg/params.hpp"
#include "rseg/text_encoder.hpp"

namespace rseg {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};

/// On disk: 8-byte magic "RSEGCKPT", u32 LE version, u64 LE manifest length,
/// UTF-8 JSON manifest (kind, stage, iteration, config snapshot, vocabulary
/// tokens + hash, word list, and per-parameter name/shape/offset/count), then
/// little-endian float64 parameter blobs in manifest order.
struct Checkpoint {
  std::string kind = "segmentation";  // or "perword"
  std::string stage = "low";          // low | high | perword
  std::uint64_t iteration = 0;
  std::map<std::string, std::string> config;
  Vocabulary vocab;
  std::vector<std::string> word_list;
  ParamStore params;
};

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const SegmentationModel& model, const RunConfig& config, std::string stage,
                           std::uint64_t iteration);
/// Rebuilds the model the checkpoint describes; a deconvolution filter is
/// present exactly when the checkpoint holds one.
SegmentationModel model_from_checkpoint(const Checkpoint& checkpoint);
RunConfig config_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace rseg
