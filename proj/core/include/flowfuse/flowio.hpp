#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowfuse/flow_types.hpp"

namespace flowfuse {

// --- Middlebury .flo -------------------------------------------------------
// Layout: float32-LE tag 202021.25 ("PIEH"), int32-LE width, int32-LE height,
// then height*width interleaved (u,v) float32-LE. Components with magnitude
// above 1e9 mark the pixel invalid; we write exactly 1e10 for invalid pixels.

FlowField read_flo(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_flo(const FlowField& field);

FlowField read_flo_file(const std::filesystem::path& path);
void write_flo_file(const std::filesystem::path& path, const FlowField& field);

// --- KITTI 16-bit flow raster ---------------------------------------------
// Channel semantics: (u_raw, v_raw, valid_raw) unsigned 16-bit;
// u = (u_raw - 2^15)/64, v likewise, valid = valid_raw > 0.
// Container here is binary PPM (P6) with maxval 65535, a lossless 16-bit
// 3-channel format; samples big-endian per the PNM spec.

struct Raster16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;  // interleaved 3 channels, row-major
};

FlowField read_kitti_flow(const Raster16& raster);
Raster16 write_kitti_flow(const FlowField& field);

FlowField read_kitti_flow_file(const std::filesystem::path& path);
void write_kitti_flow_file(const std::filesystem::path& path, const FlowField& field);

// --- PPM / PGM -------------------------------------------------------------
// Binary PPM (P6) and PGM (P5), 8-bit and 16-bit (big-endian samples).

ImageBuffer read_image(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_image(const ImageBuffer& img, int maxval = 255);

ImageBuffer read_image_file(const std::filesystem::path& path);
void write_image_file(const std::filesystem::path& path, const ImageBuffer& img,
                      int maxval = 255);

// --- Dataset manifest ------------------------------------------------------
// UTF-8 JSON: {"seed": int, "entries": [...], "notes": str}. Each entry has
// image0, image1, optional gt, and a "methods" object whose key order is the
// method order contract.

struct ManifestEntry {
  std::string image0;
  std::string image1;
  std::optional<std::string> gt;
  std::vector<std::pair<std::string, std::string>> methods;  // (name, path)
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::int64_t seed = 0;
  std::string notes;
  std::filesystem::path base_dir;  // directory the entry paths resolve against
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

struct LoadedBundle {
  ImageBuffer image0;
  ImageBuffer image1;
  std::optional<FlowField> gt;
  std::vector<std::pair<std::string, FlowField>> methods;
};

LoadedBundle load_bundle(const DatasetManifest& manifest, std::size_t entry_index);

}  // namespace flowfuse
