#include "stylemix/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "stylemix/errors.hpp"

namespace stylemix {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'I', 'X', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPreambleBytes = 8 + 4 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[at + i]) << (8 * i);
  return v;
}

void put_float(std::vector<std::uint8_t>& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1U << 30));
    crc = crc32(crc, data.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Generator& gen, const ParameterSet& aux) {
  for (const auto& [name, p] : aux)
    if (!name.starts_with("aux.")) throw DomainError("auxiliary array names must start with 'aux.'");

  std::vector<std::uint8_t> data;
  nlohmann::json arrays = nlohmann::json::array();
  auto append = [&](const std::string& name, const Parameter& p) {
    arrays.push_back({{"name", name}, {"shape", p.shape}, {"offset", data.size()}, {"count", p.values.size()}});
    for (float f : p.values) put_float(data, f);
  };
  for (const auto& [name, p] : gen.parameters()) append(name, p);
  for (const auto& [name, p] : aux) append(name, p);

  nlohmann::json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["config"] = nlohmann::json::parse(config_to_json(gen.config()));
  header["arrays"] = std::move(arrays);
  header["data_bytes"] = data.size();
  header["data_crc32"] = crc_of(data);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kPreambleBytes + text.size() + data.size());
  put_le<std::uint32_t>(out, kCheckpointFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

CheckpointContents decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleBytes) throw IntegrityError("checkpoint truncated before header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw IntegrityError("not a stylemix checkpoint");
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointFormatVersion)
    throw IntegrityError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kCheckpointFormatVersion) + ")");
  const auto header_len = get_le<std::uint64_t>(bytes, 12);
  if (header_len > bytes.size() - kPreambleBytes) throw IntegrityError("checkpoint truncated inside header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreambleBytes, bytes.begin() + kPreambleBytes + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("corrupt checkpoint header: ") + e.what());
  }

  const std::size_t data_begin = kPreambleBytes + header_len;
  const auto data = bytes.subspan(data_begin);
  try {
    if (header.at("format_version").get<std::uint32_t>() != version)
      throw IntegrityError("header and preamble disagree on format version");
    const auto data_bytes = header.at("data_bytes").get<std::uint64_t>();
    if (data.size() < data_bytes) throw IntegrityError("checkpoint truncated inside data block");
    if (data.size() > data_bytes) throw IntegrityError("trailing bytes after data block");
    if (crc_of(data) != header.at("data_crc32").get<std::uint32_t>()) throw IntegrityError("data CRC mismatch");

    const GeneratorConfig cfg = config_from_json(header.at("config").dump());
    ParameterSet params;
    ParameterSet aux;
    for (const auto& entry : header.at("arrays")) {
      const auto name = entry.at("name").get<std::string>();
      Parameter p;
      p.shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (count != p.count()) throw IntegrityError("array '" + name + "' count does not match its shape");
      if (offset + count * 4 > data.size()) throw IntegrityError("array '" + name + "' extends past the data block");
      p.values.resize(count);
      for (std::uint64_t i = 0; i < count; ++i) p.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(data, offset + 4 * i));
      auto& target = name.starts_with("aux.") ? aux : params;
      if (!target.emplace(name, std::move(p)).second) throw IntegrityError("duplicate array '" + name + "'");
    }
    return CheckpointContents{Generator(cfg, std::move(params)), std::move(aux)};
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void save_checkpoint(const Generator& gen, const std::filesystem::path& path, const ParameterSet& aux) {
  write_file_bytes(path, encode_checkpoint(gen, aux));
}

Generator load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_with_aux(path).generator; }

CheckpointContents load_checkpoint_with_aux(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

}  // namespace stylemix
