// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "clstm/errors.hpp"
#include "clstm/network.hpp"

namespace clstm {

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'S', 'T', 'M', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};
/// Truncated payload, malformed config block, or a tensor table that does
/// not describe the model named in the config.
class CorruptCheckpointError : public FormatError {
 public:
  using FormatError::FormatError;
};

using ConfigMap = std::map<std::string, std::string>;

struct Checkpoint {
  Model<float> model;
  ConfigMap config;  // architecture keys plus whatever the trainer recorded
};

/// Layout: 8-byte magic, u32 LE version, u32 LE length + key=value text,
/// then for each tensor: u16 LE name length, name, u8 rank, rank x u32 LE
/// dims, float32 LE values. Gate kernels are stored one tensor per gate.
template <typename T>
std::string encode_checkpoint(const Model<T>& model, const ConfigMap& extra = {});
Checkpoint decode_checkpoint(const std::string& bytes);

template <typename T>
void checkpoint_save(const Model<T>& model, const std::filesystem::path& path, const ConfigMap& extra = {});
Checkpoint checkpoint_load(const std::filesystem::path& path);

ConfigMap arch_to_config(const Architecture& arch);
Architecture arch_from_config(const ConfigMap& config);

}  // namespace clstm
