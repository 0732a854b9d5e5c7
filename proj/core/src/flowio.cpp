#include "flowfuse/flowio.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace flowfuse {

namespace {

constexpr float kFloMagic = 202021.25f;
constexpr float kInvalidSentinel = 1e10f;
constexpr float kInvalidThreshold = 1e9f;

float read_f32le(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                       (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::int32_t read_i32le(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                       (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  std::int32_t v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void append_f32le(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  out.push_back(static_cast<std::uint8_t>(bits & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
}

void append_i32le(std::vector<std::uint8_t>& out, std::int32_t v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<std::uint8_t>(bits & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void spew(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open file for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace

FlowField read_flo(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw FormatError(".flo payload shorter than header");
  const float magic = read_f32le(bytes.data());
  if (magic != kFloMagic) throw FormatError(".flo bad magic tag");
  const std::int32_t w = read_i32le(bytes.data() + 4);
  const std::int32_t h = read_i32le(bytes.data() + 8);
  if (w < 0 || h < 0 || w > 1 << 20 || h > 1 << 20)
    throw FormatError(".flo implausible dimensions");
  const std::size_t expected = 12 + static_cast<std::size_t>(w) * h * 8;
  if (bytes.size() != expected) throw FormatError(".flo truncated or oversized payload");

  FlowField f(w, h);
  const std::uint8_t* p = bytes.data() + 12;
  for (std::size_t i = 0; i < f.size(); ++i, p += 8) {
    const float u = read_f32le(p);
    const float v = read_f32le(p + 4);
    f.u[i] = u;
    f.v[i] = v;
    if (!std::isfinite(u) || !std::isfinite(v) ||
        std::fabs(u) > kInvalidThreshold || std::fabs(v) > kInvalidThreshold) {
      f.valid[i] = 0;
    }
  }
  return f;
}

std::vector<std::uint8_t> write_flo(const FlowField& field) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + field.size() * 8);
  append_f32le(out, kFloMagic);
  append_i32le(out, field.width);
  append_i32le(out, field.height);
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field.valid[i]) {
      append_f32le(out, field.u[i]);
      append_f32le(out, field.v[i]);
    } else {
      append_f32le(out, kInvalidSentinel);
      append_f32le(out, kInvalidSentinel);
    }
  }
  return out;
}

FlowField read_flo_file(const std::filesystem::path& path) {
  return read_flo(slurp(path));
}

void write_flo_file(const std::filesystem::path& path, const FlowField& field) {
  spew(path, write_flo(field));
}

FlowField read_kitti_flow(const Raster16& raster) {
  if (raster.data.size() != static_cast<std::size_t>(raster.width) * raster.height * 3)
    throw FormatError("KITTI raster: data size does not match 3-channel layout");
  FlowField f(raster.width, raster.height);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::uint16_t ur = raster.data[i * 3 + 0];
    const std::uint16_t vr = raster.data[i * 3 + 1];
    const std::uint16_t valid = raster.data[i * 3 + 2];
    f.u[i] = (static_cast<float>(ur) - 32768.0f) / 64.0f;
    f.v[i] = (static_cast<float>(vr) - 32768.0f) / 64.0f;
    f.valid[i] = valid > 0 ? 1 : 0;
  }
  return f;
}

Raster16 write_kitti_flow(const FlowField& field) {
  Raster16 r;
  r.width = field.width;
  r.height = field.height;
  r.data.assign(field.size() * 3, 0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!field.valid[i]) continue;
    const float u = field.u[i];
    const float v = field.v[i];
    if (std::fabs(u) > 511.98f || std::fabs(v) > 511.98f) {
      std::ostringstream msg;
      msg << "KITTI encoding: displacement out of range at pixel ("
          << (i % field.width) << "," << (i / field.width) << "): (" << u << "," << v << ")";
      throw RangeError(msg.str());
    }
    // quantize in double: float loses ~2 bits next to the 2^15 offset, which
    // would push the worst-case error past half a step (1/128 px)
    const long uq = std::lround(static_cast<double>(u) * 64.0 + 32768.0);
    const long vq = std::lround(static_cast<double>(v) * 64.0 + 32768.0);
    r.data[i * 3 + 0] = static_cast<std::uint16_t>(uq);
    r.data[i * 3 + 1] = static_cast<std::uint16_t>(vq);
    r.data[i * 3 + 2] = 1;
  }
  return r;
}

// --- PNM helpers -----------------------------------------------------------

namespace {

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& bytes) {
  PnmHeader h;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_token = [&]() -> std::string {
    skip_ws();
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
    if (tok.empty()) throw FormatError("PNM: truncated header");
    return tok;
  };
  h.magic = read_token();
  if (h.magic != "P5" && h.magic != "P6")
    throw FormatError("PNM: unsupported magic '" + h.magic + "' (need P5 or P6)");
  auto to_int = [](const std::string& s) {
    for (char c : s)
      if (!std::isdigit(static_cast<unsigned char>(c))) throw FormatError("PNM: non-numeric header field");
    return std::stoi(s);
  };
  h.width = to_int(read_token());
  h.height = to_int(read_token());
  h.maxval = to_int(read_token());
  if (h.maxval <= 0 || h.maxval > 65535) throw FormatError("PNM: maxval out of range");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("PNM: missing whitespace after maxval");
  ++pos;  // single whitespace separates header from raster
  h.data_offset = pos;
  return h;
}

}  // namespace

ImageBuffer read_image(const std::vector<std::uint8_t>& bytes) {
  const PnmHeader h = parse_pnm_header(bytes);
  const int channels = h.magic == "P6" ? 3 : 1;
  const bool wide = h.maxval > 255;
  const std::size_t samples = static_cast<std::size_t>(h.width) * h.height * channels;
  const std::size_t need = h.data_offset + samples * (wide ? 2 : 1);
  if (bytes.size() < need) throw FormatError("PNM: truncated raster data");

  ImageBuffer img(h.width, h.height, channels);
  const float scale = 1.0f / static_cast<float>(h.maxval);
  const std::uint8_t* p = bytes.data() + h.data_offset;
  if (wide) {
    for (std::size_t i = 0; i < samples; ++i, p += 2) {
      const std::uint16_t s = static_cast<std::uint16_t>((p[0] << 8) | p[1]);  // big-endian
      img.data[i] = static_cast<float>(s) * scale;
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i, ++p) img.data[i] = static_cast<float>(*p) * scale;
  }
  return img;
}

std::vector<std::uint8_t> write_image(const ImageBuffer& img, int maxval) {
  if (img.channels != 1 && img.channels != 3)
    throw FormatError("PNM: only 1- or 3-channel images are writable");
  if (maxval <= 0 || maxval > 65535) throw FormatError("PNM: maxval out of range");
  std::ostringstream header;
  header << (img.channels == 3 ? "P6" : "P5") << "\n"
         << img.width << " " << img.height << "\n" << maxval << "\n";
  const std::string hs = header.str();
  std::vector<std::uint8_t> out(hs.begin(), hs.end());
  const bool wide = maxval > 255;
  out.reserve(out.size() + img.data.size() * (wide ? 2 : 1));
  for (float f : img.data) {
    float clamped = f < 0.f ? 0.f : (f > 1.f ? 1.f : f);
    const long q = std::lround(clamped * static_cast<float>(maxval));
    if (wide) {
      out.push_back(static_cast<std::uint8_t>((q >> 8) & 0xff));
      out.push_back(static_cast<std::uint8_t>(q & 0xff));
    } else {
      out.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
  }
  return out;
}

ImageBuffer read_image_file(const std::filesystem::path& path) {
  return read_image(slurp(path));
}

void write_image_file(const std::filesystem::path& path, const ImageBuffer& img, int maxval) {
  spew(path, write_image(img, maxval));
}

FlowField read_kitti_flow_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = slurp(path);
  const PnmHeader h = parse_pnm_header(bytes);
  if (h.magic != "P6" || h.maxval != 65535)
    throw FormatError("KITTI flow raster must be a 16-bit P6 PPM");
  Raster16 r;
  r.width = h.width;
  r.height = h.height;
  const std::size_t samples = static_cast<std::size_t>(r.width) * r.height * 3;
  if (bytes.size() < h.data_offset + samples * 2) throw FormatError("KITTI raster truncated");
  r.data.resize(samples);
  const std::uint8_t* p = bytes.data() + h.data_offset;
  for (std::size_t i = 0; i < samples; ++i, p += 2)
    r.data[i] = static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  return read_kitti_flow(r);
}

void write_kitti_flow_file(const std::filesystem::path& path, const FlowField& field) {
  const Raster16 r = write_kitti_flow(field);
  std::ostringstream header;
  header << "P6\n" << r.width << " " << r.height << "\n65535\n";
  const std::string hs = header.str();
  std::vector<std::uint8_t> out(hs.begin(), hs.end());
  out.reserve(out.size() + r.data.size() * 2);
  for (std::uint16_t s : r.data) {
    out.push_back(static_cast<std::uint8_t>((s >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  spew(path, out);
}

// --- Manifest --------------------------------------------------------------

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest: " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest parse error: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  m.seed = j.value("seed", std::int64_t{0});
  m.notes = j.value("notes", std::string{});
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.image0 = je.at("image0").get<std::string>();
    e.image1 = je.at("image1").get<std::string>();
    if (je.contains("gt") && !je.at("gt").is_null())
      e.gt = je.at("gt").get<std::string>();
    if (je.contains("methods")) {
      for (const auto& [name, p] : je.at("methods").items())
        e.methods.emplace_back(name, p.get<std::string>());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["notes"] = m.notes;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json je;
    je["image0"] = e.image0;
    je["image1"] = e.image1;
    if (e.gt) je["gt"] = *e.gt;
    nlohmann::ordered_json methods = nlohmann::ordered_json::object();
    for (const auto& [name, p] : e.methods) methods[name] = p;
    je["methods"] = std::move(methods);
    j["entries"].push_back(std::move(je));
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

LoadedBundle load_bundle(const DatasetManifest& manifest, std::size_t entry_index) {
  const ManifestEntry& e = manifest.entries.at(entry_index);
  const auto resolve = [&](const std::string& rel) {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : manifest.base_dir / p;
  };
  LoadedBundle b;
  b.image0 = read_image_file(resolve(e.image0));
  b.image1 = read_image_file(resolve(e.image1));
  const int w = b.image0.width, h = b.image0.height;
  auto check_dims = [&](int fw, int fh, const std::string& file) {
    if (fw != w || fh != h)
      throw ConsistencyError("dimension mismatch in bundle: " + file + " is " +
                             std::to_string(fw) + "x" + std::to_string(fh) +
                             ", expected " + std::to_string(w) + "x" + std::to_string(h));
  };
  check_dims(b.image1.width, b.image1.height, e.image1);
  if (e.gt) {
    b.gt = read_flo_file(resolve(*e.gt));
    check_dims(b.gt->width, b.gt->height, *e.gt);
  }
  for (const auto& [name, p] : e.methods) {
    FlowField f = read_flo_file(resolve(p));
    check_dims(f.width, f.height, p);
    b.methods.emplace_back(name, std::move(f));
  }
  return b;
}

}  // namespace flowfuse
