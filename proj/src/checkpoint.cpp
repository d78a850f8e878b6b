#include "dhns/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dhns {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'H', 'N', 'S', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

}  // namespace

const NamedTensor& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor named '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void Checkpoint::add(const std::vector<TensorRef>& refs) {
  for (const auto& r : refs)
    tensors.push_back({r.name, r.shape, std::vector<double>(r.values.begin(), r.values.end())});
}

void Checkpoint::restore(const std::vector<TensorRef>& refs) const {
  for (const auto& r : refs) {
    const NamedTensor& t = at(r.name);
    if (t.shape != r.shape)
      throw CheckpointError("tensor '" + r.name + "' has a different shape in the checkpoint");
    std::copy(t.values.begin(), t.values.end(), r.values.begin());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = "dhns-checkpoint";
  header["version"] = 1;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();

  std::string data;
  for (const auto& t : ckpt.tensors) {
    if (element_count(t.shape) != static_cast<std::int64_t>(t.values.size()))
      throw CheckpointError("tensor '" + t.name + "' shape does not match its element count");
    header["tensors"].push_back({{"name", t.name},
                                 {"shape", t.shape},
                                 {"offset", data.size()},
                                 {"nbytes", t.values.size() * 8}});
    for (double v : t.values) put_u64(data, std::bit_cast<std::uint64_t>(v));
  }

  const std::string header_text = header.dump();
  std::string prefix(kMagic.begin(), kMagic.end());
  put_u64(prefix, header_text.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out << prefix << header_text << data;
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw CheckpointError("'" + path.string() + "' is not a dhns checkpoint");
  const std::uint64_t header_len = get_u64(raw + 8);
  if (16 + header_len > bytes.size()) throw CheckpointError("truncated checkpoint header");

  const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  const std::size_t data_start = 16 + header_len;

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto nbytes = entry.at("nbytes").get<std::size_t>();
    if (nbytes != static_cast<std::size_t>(element_count(t.shape)) * 8 ||
        data_start + offset + nbytes > bytes.size())
      throw CheckpointError("tensor '" + t.name + "' has an invalid extent");
    t.values.resize(nbytes / 8);
    for (std::size_t i = 0; i < t.values.size(); ++i)
      t.values[i] = std::bit_cast<double>(get_u64(raw + data_start + offset + 8 * i));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace dhns
