// SPDX-License-Identifier: Apache-2.0
#include "clstm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "clstm/pgm.hpp"

namespace clstm {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr const char* kGateSuffix[kNumGates] = {"i", "f", "c", "o"};

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    U value;
    std::memcpy(&value, take(sizeof(U), what), sizeof(U));
    return value;
  }
  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CorruptCheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// Per-gate views in storage order.
template <typename T>
std::vector<NamedTensor> flatten(const Model<T>& model) {
  std::vector<NamedTensor> out;
  auto add = [&](std::string name, Shape shape, std::span<const T> values) {
    out.push_back({std::move(name), std::move(shape), std::vector<float>(values.begin(), values.end())});
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& p = model.layers[l];
    const std::size_t ch = p.hidden_channels(), k = p.kernel_size();
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t g = 0; g < kNumGates; ++g) {
      const Gate gate = static_cast<Gate>(g);
      add(prefix + "W_x" + kGateSuffix[g], {ch, p.in_channels(), k, k}, p.input_weights(gate));
      add(prefix + "W_h" + kGateSuffix[g], {ch, ch, k, k}, p.hidden_weights(gate));
      add(prefix + "b_" + kGateSuffix[g], {ch}, p.bias(gate));
    }
  }
  add("head.W", model.head.weights.shape(), model.head.weights.values());
  add("head.b", model.head.bias.shape(), model.head.bias.values());
  return out;
}

std::string config_text(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("config entry cannot be stored: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap config;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw CorruptCheckpointError("malformed config line: " + line);
    config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return config;
}

}  // namespace

ConfigMap arch_to_config(const Architecture& arch) {
  std::string hidden;
  for (std::size_t i = 0; i < arch.hidden_channels.size(); ++i) {
    hidden += (i ? "," : "") + std::to_string(arch.hidden_channels[i]);
  }
  return {{"hidden", hidden},
          {"kernel", std::to_string(arch.kernel_size)},
          {"height", std::to_string(arch.height)},
          {"width", std::to_string(arch.width)},
          {"window", std::to_string(arch.window)},
          {"offset", std::to_string(arch.offset)}};
}

Architecture arch_from_config(const ConfigMap& config) {
  auto number = [&](const char* key) -> std::size_t {
    auto it = config.find(key);
    if (it == config.end()) throw CorruptCheckpointError(std::string("checkpoint config lacks ") + key);
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::logic_error&) {
      throw CorruptCheckpointError(std::string("bad value for ") + key + ": " + it->second);
    }
  };
  Architecture arch;
  arch.hidden_channels.clear();
  auto it = config.find("hidden");
  if (it == config.end()) throw CorruptCheckpointError("checkpoint config lacks hidden");
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      arch.hidden_channels.push_back(std::stoul(item));
    } catch (const std::logic_error&) {
      throw CorruptCheckpointError("bad hidden channel list: " + it->second);
    }
  }
  arch.kernel_size = number("kernel");
  arch.height = number("height");
  arch.width = number("width");
  arch.window = number("window");
  arch.offset = number("offset");
  try {
    arch.validate();
  } catch (const std::exception& e) {
    throw CorruptCheckpointError(std::string("invalid architecture in checkpoint: ") + e.what());
  }
  return arch;
}

template <typename T>
std::string encode_checkpoint(const Model<T>& model, const ConfigMap& extra) {
  ConfigMap config = extra;
  for (auto& [k, v] : arch_to_config(model.arch)) config[k] = v;
  const std::string text = config_text(config);

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& t : flatten(model)) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : t.values) put<float>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw BadMagicError("not a checkpoint file (bad magic)");
  }
  in.take(sizeof kCheckpointMagic, "magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint version " + std::to_string(version) + ", expected " +
                               std::to_string(kCheckpointVersion));
  }
  const auto text_len = in.get<std::uint32_t>("config length");
  const std::string text(in.take(text_len, "config block"), text_len);

  Checkpoint ckpt;
  ckpt.config = parse_config_text(text);
  ckpt.model = Model<float>(arch_from_config(ckpt.config));

  std::map<std::string, NamedTensor> expected;
  for (auto& t : flatten(ckpt.model)) expected.emplace(t.name, std::move(t));

  std::map<std::string, NamedTensor> found;
  while (!in.done()) {
    NamedTensor t;
    const auto name_len = in.get<std::uint16_t>("tensor name length");
    t.name.assign(in.take(name_len, "tensor name"), name_len);
    const auto rank = in.get<std::uint8_t>("tensor rank");
    for (std::uint8_t r = 0; r < rank; ++r) t.shape.push_back(in.get<std::uint32_t>("tensor dims"));
    auto it = expected.find(t.name);
    if (it == expected.end()) throw CorruptCheckpointError("unexpected tensor " + t.name);
    if (it->second.shape != t.shape) {
      throw CorruptCheckpointError("tensor " + t.name + " has shape " + shape_to_string(t.shape) +
                                   ", expected " + shape_to_string(it->second.shape));
    }
    const std::size_t n = shape_size(t.shape);
    t.values.resize(n);
    std::memcpy(t.values.data(), in.take(n * sizeof(float), "tensor values"), n * sizeof(float));
    if (!found.emplace(t.name, std::move(t)).second) {
      throw CorruptCheckpointError("duplicate tensor " + it->first);
    }
  }
  if (found.size() != expected.size()) {
    for (const auto& [name, _] : expected) {
      if (!found.count(name)) throw CorruptCheckpointError("checkpoint is missing tensor " + name);
    }
  }

  auto copy_into = [&](const std::string& name, std::span<float> dst) {
    const auto& src = found.at(name).values;
    std::copy(src.begin(), src.end(), dst.begin());
  };
  for (std::size_t l = 0; l < ckpt.model.layers.size(); ++l) {
    auto& p = ckpt.model.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t g = 0; g < kNumGates; ++g) {
      const Gate gate = static_cast<Gate>(g);
      copy_into(prefix + "W_x" + kGateSuffix[g], p.input_weights(gate));
      copy_into(prefix + "W_h" + kGateSuffix[g], p.hidden_weights(gate));
      copy_into(prefix + "b_" + kGateSuffix[g], p.bias(gate));
    }
  }
  copy_into("head.W", ckpt.model.head.weights.values());
  copy_into("head.b", ckpt.model.head.bias.values());
  return ckpt;
}

template <typename T>
void checkpoint_save(const Model<T>& model, const std::filesystem::path& path, const ConfigMap& extra) {
  write_file_atomic(path, encode_checkpoint(model, extra));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading checkpoint " + path.string());
  return decode_checkpoint(ss.str());
}

template std::string encode_checkpoint(const Model<float>&, const ConfigMap&);
template std::string encode_checkpoint(const Model<double>&, const ConfigMap&);
template void checkpoint_save(const Model<float>&, const std::filesystem::path&, const ConfigMap&);
template void checkpoint_save(const Model<double>&, const std::filesystem::path&, const ConfigMap&);

}  // namespace clstm
