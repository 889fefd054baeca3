#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctxtag/config.hpp"
#include "ctxtag/text.hpp"

namespace ctxtag {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On disk: "CTXTAGCK", u32 version, u64 header length, JSON header, then one
/// little-endian float64 block per tensor in the header's (sorted) order.
struct Checkpoint {
  RunConfig config;
  Vocab vocab;
  std::vector<std::string> classes;
  // Trainable parameters plus the frozen table under "embedding.pretrained".
  std::map<std::string, Tensor> tensors;
  double best_val_loss = 0.0;
  std::size_t epoch = 0;
};

inline constexpr const char* kPretrainedTensor = "embedding.pretrained";

Checkpoint make_checkpoint(const RunConfig& cfg, const Vocab& vocab, const std::vector<std::string>& classes,
                           const MultiTaskModel& model, double best_val_loss, std::size_t epoch);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Raises DataError on a bad magic, a version mismatch or a truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Model with the stored variant, dimensions and weights.
MultiTaskModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace ctxtag
