#include "ftbert/core/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ftbert/core/error.hpp"

namespace ftbert {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

void Checkpoint::add(std::string name, Tensor<float> tensor) {
  tensors.push_back({std::move(name), std::move(tensor)});
}

const Tensor<float>* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

std::string Checkpoint::serialize() const {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    index.push_back({{"name", t.name},
                     {"shape", t.tensor.shape()},
                     {"offset", offset},
                     {"count", t.tensor.size()}});
    offset += 4 * t.tensor.size();
  }
  const nlohmann::json header = {{"metadata", metadata}, {"tensors", index}};
  const std::string text = header.dump();

  std::string out;
  out.reserve(16 + text.size() + offset);
  out.append(kMagic);
  put_u64(out, text.size());
  out.append(text);
  for (const auto& t : tensors) {
    for (float v : t.tensor.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  }
  return out;
}

Checkpoint Checkpoint::parse(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kMagic) {
    throw Error("checkpoint: bad magic");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (16 + header_len > bytes.size()) throw Error("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: invalid header: ") + e.what());
  }
  const std::string_view data = bytes.substr(16 + header_len);

  Checkpoint ckpt;
  ckpt.metadata = header.at("metadata");
  std::uint64_t expected_end = 0;
  for (const auto& entry : header.at("tensors")) {
    const auto shape = entry.at("shape").get<Shape>();
    const auto count = entry.at("count").get<std::uint64_t>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    if (shape_size(shape) != count || offset + 4 * count > data.size()) {
      throw Error("checkpoint: tensor '" + entry.at("name").get<std::string>() +
                  "' is inconsistent with the data section");
    }
    std::vector<float> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + 4 * i + b]))
                << (8 * b);
      }
      values[i] = std::bit_cast<float>(bits);
    }
    ckpt.add(entry.at("name").get<std::string>(), Tensor<float>(shape, std::move(values)));
    expected_end = std::max(expected_end, offset + 4 * count);
  }
  if (expected_end != data.size()) throw Error("checkpoint: trailing bytes after data section");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace ftbert
