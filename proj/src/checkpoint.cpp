#include "aec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace aec {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'A', 'E', 'C', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  template <typename Derived>
  void matrix(const Eigen::PlainObjectBase<Derived>& m) {
    pod<std::uint64_t>(m.rows());
    pod<std::uint64_t>(m.cols());
    // Column-major element order regardless of the storage order.
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) pod<double>(m(r, c));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T pod() {
    T v;
    need(sizeof v);
    std::memcpy(&v, in_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    const auto r = pod<std::uint64_t>();
    const auto c = pod<std::uint64_t>();
    if (static_cast<Eigen::Index>(r) != rows || static_cast<Eigen::Index>(c) != cols)
      throw FormatError("checkpoint matrix has unexpected shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = pod<double>();
    return m;
  }
  Eigen::VectorXd vector(Eigen::Index rows) { return matrix(rows, 1); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > in_.size() - pos_) throw FormatError("checkpoint payload is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // crc32 takes a uInt length; feed large payloads in pieces.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string encode_payload(const Checkpoint& ck) {
  const AgentModel& m = ck.model;
  if (m.kind != ck.config.model) throw std::invalid_argument("checkpoint model kind disagrees with its config");
  Writer w;
  w.str(to_ini(ck.config));
  w.pod<std::int64_t>(ck.fixations_done);
  w.pod<std::int64_t>(m.steps);
  for (const SubspaceDictionary& d : m.dictionaries) {
    w.pod<std::int32_t>(index_of(d.scale));
    w.pod<std::int64_t>(d.step_count);
    w.pod<double>(d.sigma);
    w.pod<double>(d.eta);
    w.matrix(d.bases);
  }
  for (int slot = 0; slot < m.num_networks(); ++slot) {
    const PolicyNetwork& net = m.network(slot);
    const CriticState& c = m.critics[slot];
    w.pod<double>(net.temperature);
    w.matrix(net.weights);
    w.matrix(c.value);
    w.matrix(c.advantage);
    w.matrix(c.value_trace);
    w.pod<std::int64_t>(m.update_counts[slot]);
  }
  for (const RewardNormalizer& n : m.normalizers) {
    w.pod<double>(n.mean);
    w.pod<double>(n.variance);
    w.pod<std::int64_t>(n.count);
  }
  return w.take();
}

Checkpoint decode_payload(std::string_view payload) {
  Reader r(payload);
  Checkpoint ck;
  try {
    ck.config = parse_config(r.str());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
  ck.fixations_done = r.pod<std::int64_t>();
  // The skeleton fixes every shape; the stored values then overwrite it.
  AgentModel& m = ck.model;
  m = make_agent(ck.config.model, 0, ck.config.agent);
  m.steps = r.pod<std::int64_t>();
  for (SubspaceDictionary& d : m.dictionaries) {
    if (r.pod<std::int32_t>() != index_of(d.scale)) throw FormatError("checkpoint dictionaries are out of order");
    d.step_count = r.pod<std::int64_t>();
    d.sigma = r.pod<double>();
    d.eta = r.pod<double>();
    d.bases = r.matrix(kPatchDim, kNumSubspaces * kSubspaceDim);
  }
  for (int slot = 0; slot < m.num_networks(); ++slot) {
    PolicyNetwork& net = m.network(slot);
    CriticState& c = m.critics[slot];
    net.temperature = r.pod<double>();
    const int rows = net.outputs();
    const int cols = net.inputs();
    net.weights = r.matrix(rows, cols);
    c.value = r.vector(cols);
    c.advantage = r.matrix(rows, cols);
    c.value_trace = r.vector(cols);
    m.update_counts[slot] = r.pod<std::int64_t>();
  }
  for (RewardNormalizer& n : m.normalizers) {
    n.mean = r.pod<double>();
    n.variance = r.pod<double>();
    n.count = r.pod<std::int64_t>();
  }
  if (!r.done()) throw FormatError("checkpoint payload has trailing bytes");
  if (ck.fixations_done < 0 || m.steps < 0) throw FormatError("checkpoint counters are negative");
  return ck;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const std::string payload = encode_payload(checkpoint);
  Writer w;
  for (char c : kMagic) w.pod<char>(c);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(payload.size());
  std::string out = w.take();
  out += payload;
  const std::uint32_t crc = checksum(payload);
  out.append(reinterpret_cast<const char*>(&crc), sizeof crc);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  constexpr std::size_t header = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < header || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("not a checkpoint file");
  Reader r(bytes.substr(sizeof kMagic));
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw VersionError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  const auto size = r.pod<std::uint64_t>();
  if (bytes.size() - header < sizeof(std::uint32_t) || size != bytes.size() - header - sizeof(std::uint32_t))
    throw FormatError("checkpoint is truncated or has trailing bytes");
  const std::string_view payload = bytes.substr(header, size);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + header + size, sizeof stored);
  if (stored != checksum(payload)) throw FormatError("checkpoint checksum mismatch");
  return decode_payload(payload);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace aec
