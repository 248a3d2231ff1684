#include "upd/nn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace upd::nn {

namespace {

constexpr char kMagic[8] = {'U', 'P', 'D', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>(u & 0xFF));
      u = static_cast<U>(u >> 8);
    }
  }
  void put_bytes(const char* p, std::size_t n) { out_.append(p, n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, std::size_t end) : s_(s), end_(end) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u = static_cast<U>(u | static_cast<U>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CheckpointError("checkpoint truncated");
  }
  const std::string& s_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checkpoint_to_bytes(const Checkpoint& ckpt) {
  const ParamLayout& l = *ckpt.params.layout;
  const ArchConfig& a = l.arch();
  Writer w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  for (int v : {a.embed_layers, a.hidden, a.actor_layers, a.critic_layers, a.gru_hidden,
                static_cast<int>(a.activation), static_cast<int>(a.layernorm), a.moa_layers,
                a.moa_hidden, a.history_len, a.action_embed})
    w.put<std::int32_t>(v);
  w.put<std::int32_t>(l.obs_len());
  w.put<std::int32_t>(l.n_actions());
  w.put<std::uint64_t>(ckpt.step);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(l.segments().size()));
  for (const Segment& s : l.segments()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(s.name.size()));
    w.put_bytes(s.name.data(), s.name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.cols));
    for (std::size_t i = 0; i < s.size(); ++i)
      w.put<std::uint32_t>(std::bit_cast<std::uint32_t>(ckpt.params.values[s.offset + i]));
  }
  const std::string& body = w.str();
  w.put<std::uint64_t>(fnv1a64({reinterpret_cast<const unsigned char*>(body.data()), body.size()}));
  return std::move(w.str());
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint file");
  const std::size_t body = bytes.size() - 8;
  {
    Reader r(bytes, bytes.size());
    r.get_bytes(body);
    const auto stored = r.get<std::uint64_t>();
    if (stored != fnv1a64({reinterpret_cast<const unsigned char*>(bytes.data()), body}))
      throw CheckpointError("checkpoint checksum mismatch");
  }
  Reader r(bytes, body);
  r.get_bytes(sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  ArchConfig a;
  a.embed_layers = r.get<std::int32_t>();
  a.hidden = r.get<std::int32_t>();
  a.actor_layers = r.get<std::int32_t>();
  a.critic_layers = r.get<std::int32_t>();
  a.gru_hidden = r.get<std::int32_t>();
  const int act = r.get<std::int32_t>();
  if (act != 0 && act != 1) throw CheckpointError("bad activation code");
  a.activation = static_cast<Activation>(act);
  a.layernorm = r.get<std::int32_t>() != 0;
  a.moa_layers = r.get<std::int32_t>();
  a.moa_hidden = r.get<std::int32_t>();
  a.history_len = r.get<std::int32_t>();
  a.action_embed = r.get<std::int32_t>();
  const int obs_len = r.get<std::int32_t>();
  const int n_actions = r.get<std::int32_t>();

  Checkpoint ck;
  try {
    ck.params = PolicyParams(std::make_shared<const ParamLayout>(a, obs_len, n_actions));
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("bad architecture: ") + e.what());
  }
  ck.step = r.get<std::uint64_t>();
  const auto n = r.get<std::uint32_t>();
  const auto& segs = ck.params.layout->segments();
  if (n != segs.size()) throw CheckpointError("segment count mismatch");
  for (const Segment& s : segs) {
    const std::string name = r.get_bytes(r.get<std::uint16_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != s.name || rows != static_cast<std::uint32_t>(s.rows) ||
        cols != static_cast<std::uint32_t>(s.cols))
      throw CheckpointError("segment " + name + " does not match layout");
    for (std::size_t i = 0; i < s.size(); ++i)
      ck.params.values[s.offset + i] = std::bit_cast<float>(r.get<std::uint32_t>());
  }
  if (r.pos() != body) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = checkpoint_to_bytes(ckpt);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

std::string checkpoint_hash(const Checkpoint& ckpt) {
  const std::string bytes = checkpoint_to_bytes(ckpt);
  const std::uint64_t h =
      fnv1a64({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace upd::nn
