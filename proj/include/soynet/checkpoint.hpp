#pragma once

// Checkpoint container:
//   bytes 0..7   magic "SOYNETCK"
//   bytes 8..15  header length L, uint64 little-endian
//   L bytes      UTF-8 JSON header {format_version, dtype, meta, tensors:[{name, shape, offset}]}
//   payload      raw little-endian tensor values, in header order; offsets relative to payload start

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "soynet/errors.hpp"
#include "soynet/tensor.hpp"

namespace soynet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'S', 'O', 'Y', 'N', 'E', 'T', 'C', 'K'};
inline constexpr int kCheckpointVersion = 1;

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "float32";
  else return "float64";
}

template <typename T>
struct CheckpointData {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<T>>> tensors;

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

template <typename T>
void save_checkpoint(const std::string& path, const CheckpointData<T>& ck) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ck.tensors) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(T);
  }
  const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                 {"dtype", dtype_name<T>()},
                                 {"meta", ck.meta},
                                 {"tensors", entries}};
  const std::string text = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ck.tensors)
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

template <typename T>
CheckpointData<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw IoError("'" + path + "' is not a checkpoint");
  if (len > (std::uint64_t{1} << 32)) throw IoError("checkpoint header too large in '" + path + "'");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint header in '" + path + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in '" + path + "': " + e.what());
  }
  CheckpointData<T> ck;
  try {
    if (header.at("format_version").get<int>() != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version in '" + path + "'");
    }
    if (header.at("dtype").get<std::string>() != dtype_name<T>()) {
      throw IoError("checkpoint '" + path + "' holds " + header.at("dtype").get<std::string>() + ", expected " +
                    dtype_name<T>());
    }
    ck.meta = header.at("meta");
    const auto payload_start = static_cast<std::uint64_t>(in.tellg());
    for (const auto& e : header.at("tensors")) {
      Shape shape = e.at("shape").get<Shape>();
      Tensor<T> t(shape);
      in.seekg(static_cast<std::streamoff>(payload_start + e.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
      if (!in) throw IoError("truncated checkpoint payload in '" + path + "'");
      ck.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint header in '" + path + "': " + e.what());
  } catch (const ShapeError& e) {
    throw IoError("malformed tensor shape in '" + path + "': " + e.what());
  }
  return ck;
}

}  // namespace soynet
