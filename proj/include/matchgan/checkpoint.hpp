#ifndef MATCHGAN_CHECKPOINT_HPP_
#define MATCHGAN_CHECKPOINT_HPP_

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "matchgan/graph.hpp"
#include "matchgan/rng.hpp"

// Checkpoint archive: a JSON manifest (builder arguments, iteration, RNG
// streams, optimizer step counts) followed by named raw tensors,
// little-endian. Loading reconstructs identical shapes from the manifest and
// restores every array bit-exactly.

namespace matchgan {

struct TensorEntry {
  std::string name;
  uint8_t dtype = 0;  // 0 = f32, 1 = f64
  Shape shape;
  std::vector<uint8_t> bytes;
};

class CheckpointWriter {
 public:
  nlohmann::json manifest;

  template <class T>
  void add(const std::string& name, const Tensor<T>& t) {
    TensorEntry e;
    e.name = name;
    e.dtype = sizeof(T) == 4 ? 0 : 1;
    e.shape = t.shape;
    e.bytes.resize(t.v.size() * sizeof(T));
    std::memcpy(e.bytes.data(), t.v.data(), e.bytes.size());
    entries_.push_back(std::move(e));
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::IoError,
            "cannot write checkpoint: " + path);
    const std::string magic = "MGCKPT01";
    out.write(magic.data(), 8);
    const std::string mj = manifest.dump();
    write_u64(out, mj.size());
    out.write(mj.data(), static_cast<std::streamsize>(mj.size()));
    write_u64(out, entries_.size());
    for (const auto& e : entries_) {
      write_u64(out, e.name.size());
      out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      out.put(static_cast<char>(e.dtype));
      write_u64(out, e.shape.size());
      for (auto d : e.shape) write_u64(out, static_cast<uint64_t>(d));
      write_u64(out, e.bytes.size());
      out.write(reinterpret_cast<const char*>(e.bytes.data()),
                static_cast<std::streamsize>(e.bytes.size()));
    }
    require(out.good(), ErrorKind::IoError, "short write: " + path);
  }

 private:
  static void write_u64(std::ofstream& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
    out.write(b, 8);
  }
  std::vector<TensorEntry> entries_;
};

class CheckpointReader {
 public:
  nlohmann::json manifest;

  explicit CheckpointReader(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::MissingFile, "checkpoint not found: " + path);
    char magic[8];
    in.read(magic, 8);
    require(std::memcmp(magic, "MGCKPT01", 8) == 0, ErrorKind::IoError,
            "bad checkpoint magic: " + path);
    std::string mj(read_u64(in), '\0');
    in.read(mj.data(), static_cast<std::streamsize>(mj.size()));
    manifest = nlohmann::json::parse(mj);
    const uint64_t n = read_u64(in);
    for (uint64_t i = 0; i < n; ++i) {
      TensorEntry e;
      e.name.resize(read_u64(in));
      in.read(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      e.dtype = static_cast<uint8_t>(in.get());
      const uint64_t nd = read_u64(in);
      for (uint64_t d = 0; d < nd; ++d)
        e.shape.push_back(static_cast<int64_t>(read_u64(in)));
      e.bytes.resize(read_u64(in));
      in.read(reinterpret_cast<char*>(e.bytes.data()),
              static_cast<std::streamsize>(e.bytes.size()));
      index_[e.name] = entries_.size();
      entries_.push_back(std::move(e));
    }
    require(in.good(), ErrorKind::IoError, "truncated checkpoint: " + path);
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  template <class T>
  Tensor<T> get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::IoError,
            "checkpoint missing tensor: " + name);
    const TensorEntry& e = entries_[it->second];
    require(e.dtype == (sizeof(T) == 4 ? 0 : 1), ErrorKind::IoError,
            "checkpoint dtype mismatch for " + name);
    Tensor<T> t(e.shape);
    require(e.bytes.size() == t.v.size() * sizeof(T), ErrorKind::IoError,
            "checkpoint size mismatch for " + name);
    std::memcpy(t.v.data(), e.bytes.data(), e.bytes.size());
    return t;
  }

 private:
  static uint64_t read_u64(std::ifstream& in) {
    char b[8];
    in.read(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    return v;
  }
  std::vector<TensorEntry> entries_;
  std::map<std::string, size_t> index_;
};

inline nlohmann::json rng_state_json(const Rng& rng) {
  auto s = rng.state();
  return nlohmann::json::array({s[0], s[1], s[2], s[3]});
}

inline Rng rng_from_json(const nlohmann::json& j) {
  Rng r;
  std::array<uint64_t, 4> s{j.at(0).get<uint64_t>(), j.at(1).get<uint64_t>(),
                            j.at(2).get<uint64_t>(), j.at(3).get<uint64_t>()};
  r.set_state(s);
  return r;
}

}  // namespace matchgan

#endif  // MATCHGAN_CHECKPOINT_HPP_
