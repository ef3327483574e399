#pragma once

#include <string>
#include <vector>

#include "rdm/image.hpp"

namespace rdm {

// Uncompressed strip TIFF, first IFD only. Integer samples (8 or 16 bit)
// are scaled by the type maximum into [0, 1]; 32-bit float samples load
// unchanged. Each sample of a multi-channel file becomes its own Image.
struct TiffData {
  std::vector<Image> channels;
  int bits_per_sample = 0;
  bool is_float = false;
  std::string description;  // ImageDescription tag, empty if absent
};

TiffData read_tiff(const std::string& path);
// Single-channel convenience; throws kFormat for multi-channel files.
Image load_image(const std::string& path);
std::vector<Image> load_channels(const std::string& path);

// Writes 32-bit float samples, channels interleaved (chunky). The
// description lands in the ImageDescription tag.
void write_tiff(const std::string& path, const std::vector<Image>& channels,
                const std::string& description = {});
void save_image(const Image& img, const std::string& path,
                const std::string& description = {});
// 8-bit grayscale; values are clamped to [0, 1] first.
void write_tiff_u8(const std::string& path, const Image& img);

}  // namespace rdm
