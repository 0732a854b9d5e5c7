#include "flowfuse/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "flowfuse/flow_types.hpp"

namespace flowfuse {

void write_checkpoint_file(const std::filesystem::path& path,
                           const nlohmann::ordered_json& header,
                           const std::vector<float>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint: " + path.string());
  const std::string hs = header.dump();
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  std::uint8_t lenb[4] = {static_cast<std::uint8_t>(len & 0xff),
                          static_cast<std::uint8_t>((len >> 8) & 0xff),
                          static_cast<std::uint8_t>((len >> 16) & 0xff),
                          static_cast<std::uint8_t>((len >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(lenb), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  static_assert(sizeof(float) == 4);
  // float32-LE on all supported platforms (little-endian assumed)
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * 4));
  if (!out) throw FormatError("checkpoint write failed: " + path.string());
}

std::pair<nlohmann::ordered_json, std::vector<float>> read_checkpoint_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  std::uint8_t lenb[4];
  in.read(reinterpret_cast<char*>(lenb), 4);
  if (!in) throw FormatError("checkpoint truncated: " + path.string());
  const std::uint32_t len = static_cast<std::uint32_t>(lenb[0]) |
                            (static_cast<std::uint32_t>(lenb[1]) << 8) |
                            (static_cast<std::uint32_t>(lenb[2]) << 16) |
                            (static_cast<std::uint32_t>(lenb[3]) << 24);
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("checkpoint header truncated: " + path.string());
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header parse error: " + std::string(e.what()));
  }
  const std::size_t count = header.at("param_count").get<std::size_t>();
  std::vector<float> params(count);
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * 4));
  if (!in) throw FormatError("checkpoint parameter data truncated: " + path.string());
  return {std::move(header), std::move(params)};
}

}  // namespace flowfuse
