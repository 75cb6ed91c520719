#include "abmkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace abmkit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kMagic[4] = {'A', 'B', 'M', 'T'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::string sanitize_name(const std::string& name) {
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok) throw CheckpointError("tensor name not file-safe: " + name);
  }
  if (name.empty()) throw CheckpointError("empty tensor name");
  return name + ".abmt";
}

}  // namespace

std::string dtype_name(Dtype dtype) { return dtype == Dtype::f64 ? "f64" : "f32"; }

Dtype dtype_from_name(const std::string& name) {
  if (name == "f64") return Dtype::f64;
  if (name == "f32") return Dtype::f32;
  throw CheckpointError("unknown dtype: " + name);
}

void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, Tensor>>& tensors, Dtype dtype) {
  fs::create_directories(dir);
  json manifest = json::object();
  for (const auto& [name, tensor] : tensors) {
    const std::string file_name = sanitize_name(name);

    std::string blob;
    blob.append(kMagic, 4);
    put_u16(blob, kVersion);
    put_u16(blob, static_cast<std::uint16_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u64(blob, d);
    for (double v : tensor.data()) {
      if (dtype == Dtype::f64) {
        put_u64(blob, std::bit_cast<std::uint64_t>(v));
      } else {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
      }
    }

    const fs::path path = fs::path(dir) / file_name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError("short write to " + path.string());

    manifest[name] = {{"file", file_name},
                      {"shape", tensor.shape()},
                      {"dtype", dtype_name(dtype)}};
  }

  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

std::map<std::string, Tensor> load_checkpoint(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw CheckpointError("cannot open manifest " + manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw CheckpointError("bad manifest " + manifest_path + ": " + e.what());
  }
  if (!manifest.is_object()) throw CheckpointError("manifest is not an object: " + manifest_path);

  const fs::path base = fs::path(manifest_path).parent_path();
  std::map<std::string, Tensor> tensors;
  for (const auto& [name, entry] : manifest.items()) {
    if (!entry.contains("file") || !entry.contains("shape") || !entry.contains("dtype")) {
      throw CheckpointError("manifest entry missing file/shape/dtype: " + name);
    }
    const Dtype dtype = dtype_from_name(entry["dtype"].get<std::string>());
    const Shape declared = entry["shape"].get<Shape>();
    const fs::path path = base / entry["file"].get<std::string>();

    std::ifstream file(path, std::ios::binary);
    if (!file) throw CheckpointError("cannot open tensor file " + path.string());
    std::string blob((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());

    if (blob.size() < 8 || std::memcmp(p, kMagic, 4) != 0) {
      throw CheckpointError("bad magic in " + path.string());
    }
    if (get_u16(p + 4) != kVersion) {
      throw CheckpointError("unsupported version in " + path.string());
    }
    const std::size_t rank = get_u16(p + 6);
    if (blob.size() < 8 + 8 * rank) throw CheckpointError("truncated header in " + path.string());
    Shape shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<std::size_t>(get_u64(p + 8 + 8 * i));
    }
    if (shape != declared) {
      throw CheckpointError("manifest shape disagrees with file header for " + name);
    }

    const std::size_t numel = shape_numel(shape);
    const std::size_t scalar_bytes = dtype == Dtype::f64 ? 8 : 4;
    const std::size_t payload_at = 8 + 8 * rank;
    if (blob.size() != payload_at + numel * scalar_bytes) {
      throw CheckpointError("payload size mismatch in " + path.string());
    }

    std::vector<double> values(numel);
    const unsigned char* q = p + payload_at;
    for (std::size_t i = 0; i < numel; ++i) {
      if (dtype == Dtype::f64) {
        values[i] = std::bit_cast<double>(get_u64(q + 8 * i));
      } else {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) bits = (bits << 8) | q[4 * i + b];
        values[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
    tensors.emplace(name, Tensor::from_vector(std::move(shape), std::move(values)));
  }
  return tensors;
}

}  // namespace abmkit
