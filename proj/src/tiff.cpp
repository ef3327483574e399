#include "rdm/tiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>

#include "rdm/error.hpp"

namespace rdm {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kImageDescription = 270,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kExtraSamples = 338,
  kSampleFormat = 339,
  kTileWidth = 322,
};

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {
    require(bytes_.size() >= 8, ErrorKind::kFormat, path_ + ": file too short for TIFF");
    if (bytes_[0] == 'I' && bytes_[1] == 'I') {
      big_ = false;
    } else if (bytes_[0] == 'M' && bytes_[1] == 'M') {
      big_ = true;
    } else {
      fail(ErrorKind::kFormat, path_ + ": bad byte-order mark");
    }
    require(u16(2) == 42, ErrorKind::kFormat,
            path_ + ": not a classic TIFF (magic != 42; BigTIFF unsupported)");
  }

  std::uint64_t u(std::size_t off, int width) const {
    require(off + width <= bytes_.size(), ErrorKind::kFormat,
            path_ + ": offset beyond end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      const std::uint64_t b = bytes_[off + i];
      v |= big_ ? b << (8 * (width - 1 - i)) : b << (8 * i);
    }
    return v;
  }
  std::uint16_t u16(std::size_t off) const { return static_cast<std::uint16_t>(u(off, 2)); }
  std::uint32_t u32(std::size_t off) const { return static_cast<std::uint32_t>(u(off, 4)); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }
  const std::string& path() const { return path_; }

 private:
  std::vector<unsigned char> bytes_;
  std::string path_;
  bool big_ = false;
};

struct Entry {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::size_t value_offset = 0;  // where the values live
};

int type_size(std::uint16_t type) {
  switch (type) {
    case 1: case 2: case 6: case 7: return 1;  // BYTE ASCII SBYTE UNDEFINED
    case 3: case 8: return 2;                  // SHORT SSHORT
    case 4: case 9: case 11: return 4;         // LONG SLONG FLOAT
    case 5: case 10: case 12: return 8;        // RATIONAL SRATIONAL DOUBLE
    default: return 0;
  }
}

std::vector<std::uint64_t> values(const Reader& r, const Entry& e) {
  const int sz = type_size(e.type);
  require(e.type == 1 || e.type == 3 || e.type == 4, ErrorKind::kFormat,
          r.path() + ": unexpected integer field type " + std::to_string(e.type));
  std::vector<std::uint64_t> out(e.count);
  for (std::uint32_t i = 0; i < e.count; ++i) out[i] = r.u(e.value_offset + i * sz, sz);
  return out;
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TiffData read_tiff(const std::string& path) {
  const Reader r(read_file(path), path);
  const std::size_t ifd = r.u32(4);
  const int n = r.u16(ifd);
  std::map<std::uint16_t, Entry> tags;
  for (int k = 0; k < n; ++k) {
    const std::size_t at = ifd + 2 + 12 * static_cast<std::size_t>(k);
    Entry e;
    const std::uint16_t tag = r.u16(at);
    e.type = r.u16(at + 2);
    e.count = r.u32(at + 4);
    const std::size_t bytes = static_cast<std::size_t>(type_size(e.type)) * e.count;
    e.value_offset = bytes <= 4 ? at + 8 : r.u32(at + 8);
    tags[tag] = e;
  }
  auto scalar = [&](std::uint16_t tag, std::uint64_t fallback, const char* name) {
    auto it = tags.find(tag);
    if (it == tags.end()) return fallback;
    const auto v = values(r, it->second);
    require(!v.empty(), ErrorKind::kFormat, path + ": empty " + name + " field");
    for (auto x : v) {
      require(x == v[0], ErrorKind::kFormat,
              path + ": mixed " + std::string(name) + " values are unsupported");
    }
    return v[0];
  };
  require(tags.count(kImageWidth) && tags.count(kImageLength) && tags.count(kStripOffsets),
          ErrorKind::kFormat, path + ": missing ImageWidth, ImageLength or StripOffsets");
  require(!tags.count(kTileWidth), ErrorKind::kFormat,
          path + ": tiled TIFF (TileWidth) is unsupported");

  const auto width = scalar(kImageWidth, 0, "ImageWidth");
  const auto height = scalar(kImageLength, 0, "ImageLength");
  const auto bits = scalar(kBitsPerSample, 1, "BitsPerSample");
  const auto compression = scalar(kCompression, 1, "Compression");
  const auto spp = scalar(kSamplesPerPixel, 1, "SamplesPerPixel");
  const auto planar = scalar(kPlanarConfig, 1, "PlanarConfiguration");
  const auto format = scalar(kSampleFormat, 1, "SampleFormat");
  require(compression == 1, ErrorKind::kFormat,
          path + ": Compression " + std::to_string(compression) +
              " is unsupported (only 1 = none)");
  require(width > 0 && height > 0 && width < (1u << 20) && height < (1u << 20),
          ErrorKind::kFormat, path + ": bad ImageWidth/ImageLength");
  require(spp >= 1 && spp <= 16, ErrorKind::kFormat,
          path + ": unsupported SamplesPerPixel " + std::to_string(spp));
  require(planar == 1 || planar == 2, ErrorKind::kFormat,
          path + ": unsupported PlanarConfiguration " + std::to_string(planar));
  const bool is_float = format == 3;
  require(format == 1 || format == 3, ErrorKind::kFormat,
          path + ": unsupported SampleFormat " + std::to_string(format));
  require((!is_float && (bits == 8 || bits == 16)) || (is_float && bits == 32),
          ErrorKind::kFormat,
          path + ": unsupported BitsPerSample " + std::to_string(bits) +
              (is_float ? " for float samples (need 32)" : " for integer samples (need 8 or 16)"));

  const auto offsets = values(r, tags.at(kStripOffsets));
  std::vector<std::uint64_t> counts;
  if (tags.count(kStripByteCounts)) counts = values(r, tags.at(kStripByteCounts));
  require(counts.empty() || counts.size() == offsets.size(), ErrorKind::kFormat,
          path + ": StripByteCounts does not match StripOffsets");

  // Concatenate the strips; for planar files they run plane after plane.
  const std::size_t bps = bits / 8;
  const std::size_t total = static_cast<std::size_t>(width) * height * spp * bps;
  std::vector<unsigned char> raw;
  raw.reserve(total);
  const auto& bytes = r.bytes();
  for (std::size_t s = 0; s < offsets.size() && raw.size() < total; ++s) {
    const std::size_t want = counts.empty() ? total - raw.size()
                                            : std::min<std::size_t>(counts[s], total - raw.size());
    require(offsets[s] + want <= bytes.size(), ErrorKind::kFormat,
            path + ": strip " + std::to_string(s) + " runs past end of file");
    raw.insert(raw.end(), bytes.begin() + offsets[s], bytes.begin() + offsets[s] + want);
  }
  require(raw.size() == total, ErrorKind::kFormat, path + ": pixel data is truncated");

  TiffData out;
  out.bits_per_sample = static_cast<int>(bits);
  out.is_float = is_float;
  if (tags.count(kImageDescription)) {
    const Entry& e = tags.at(kImageDescription);
    require(e.value_offset + e.count <= bytes.size(), ErrorKind::kFormat,
            path + ": ImageDescription runs past end of file");
    out.description.assign(bytes.begin() + e.value_offset,
                           bytes.begin() + e.value_offset + e.count);
    while (!out.description.empty() && out.description.back() == '\0') out.description.pop_back();
  }
  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  const int channels = static_cast<int>(spp);
  out.channels.assign(channels, Image(h, w));
  const bool big = bytes[0] == 'M';
  auto sample = [&](std::size_t index) -> double {
    const unsigned char* p = raw.data() + index * bps;
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < bps; ++i) {
      const std::uint32_t b = p[i];
      v |= big ? b << (8 * (bps - 1 - i)) : b << (8 * i);
    }
    if (is_float) return static_cast<double>(std::bit_cast<float>(v));
    return bits == 8 ? v / 255.0 : v / 65535.0;
  };
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * w + x;
        const std::size_t index = planar == 1 ? pix * channels + c
                                              : static_cast<std::size_t>(c) * w * h + pix;
        out.channels[c](y, x) = sample(index);
      }
    }
  }
  for (const Image& ch : out.channels) {
    require(ch.all_finite(), ErrorKind::kFormat, path + ": non-finite float samples");
  }
  return out;
}

std::vector<Image> load_channels(const std::string& path) { return read_tiff(path).channels; }

Image load_image(const std::string& path) {
  TiffData d = read_tiff(path);
  require(d.channels.size() == 1, ErrorKind::kFormat,
          path + ": expected one channel, found SamplesPerPixel " +
              std::to_string(d.channels.size()));
  return std::move(d.channels.front());
}

namespace {

class Writer {
 public:
  void u16(std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::vector<unsigned char> out;
};

struct OutEntry {
  std::uint16_t tag, type;
  std::uint32_t count;
  std::vector<std::uint32_t> short_or_long;  // inline or external values
  std::string ascii;
};

void write_file(const std::string& path, int width, int height, int spp, int bits,
                int sample_format, const std::vector<unsigned char>& pixels,
                const std::string& description) {
  std::vector<OutEntry> entries;
  entries.push_back({kImageWidth, 4, 1, {static_cast<std::uint32_t>(width)}, {}});
  entries.push_back({kImageLength, 4, 1, {static_cast<std::uint32_t>(height)}, {}});
  entries.push_back({kBitsPerSample, 3, static_cast<std::uint32_t>(spp),
                     std::vector<std::uint32_t>(spp, bits), {}});
  entries.push_back({kCompression, 3, 1, {1}, {}});
  entries.push_back({kPhotometric, 3, 1, {spp == 3 ? 2u : 1u}, {}});
  if (!description.empty()) {
    entries.push_back({kImageDescription, 2, static_cast<std::uint32_t>(description.size() + 1),
                       {}, description});
  }
  entries.push_back({kStripOffsets, 4, 1, {0}, {}});  // patched below
  entries.push_back({kSamplesPerPixel, 3, 1, {static_cast<std::uint32_t>(spp)}, {}});
  entries.push_back({kRowsPerStrip, 4, 1, {static_cast<std::uint32_t>(height)}, {}});
  entries.push_back({kStripByteCounts, 4, 1, {static_cast<std::uint32_t>(pixels.size())}, {}});
  entries.push_back({kPlanarConfig, 3, 1, {1}, {}});
  const int extra = spp == 3 ? 0 : spp - 1;
  if (extra > 0) {
    entries.push_back({kExtraSamples, 3, static_cast<std::uint32_t>(extra),
                       std::vector<std::uint32_t>(extra, 0), {}});
  }
  entries.push_back({kSampleFormat, 3, static_cast<std::uint32_t>(spp),
                     std::vector<std::uint32_t>(spp, sample_format), {}});

  // Layout: header, IFD, external values, pixels.
  const std::size_t ifd_at = 8;
  const std::size_t ifd_size = 2 + 12 * entries.size() + 4;
  std::size_t ext = ifd_at + ifd_size;
  std::vector<std::size_t> ext_offset(entries.size(), 0);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    const std::size_t bytes = static_cast<std::size_t>(type_size(e.type)) * e.count;
    if (bytes > 4) {
      ext_offset[k] = ext;
      ext += bytes + (bytes & 1);
    }
  }
  const std::size_t pixel_at = ext;
  for (auto& e : entries) {
    if (e.tag == kStripOffsets) e.short_or_long = {static_cast<std::uint32_t>(pixel_at)};
  }

  Writer w;
  w.out.push_back('I');
  w.out.push_back('I');
  w.u16(42);
  w.u32(static_cast<std::uint32_t>(ifd_at));
  w.u16(static_cast<std::uint16_t>(entries.size()));
  auto put_values = [&](const OutEntry& e) {
    if (e.type == 2) {
      for (char ch : e.ascii) w.out.push_back(static_cast<unsigned char>(ch));
      w.out.push_back(0);
    } else {
      for (auto v : e.short_or_long) e.type == 3 ? w.u16(static_cast<std::uint16_t>(v)) : w.u32(v);
    }
  };
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    w.u16(e.tag);
    w.u16(e.type);
    w.u32(e.count);
    const std::size_t bytes = static_cast<std::size_t>(type_size(e.type)) * e.count;
    if (bytes > 4) {
      w.u32(static_cast<std::uint32_t>(ext_offset[k]));
    } else {
      const std::size_t start = w.out.size();
      put_values(e);
      while (w.out.size() < start + 4) w.out.push_back(0);
    }
  }
  w.u32(0);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    const std::size_t bytes = static_cast<std::size_t>(type_size(e.type)) * e.count;
    if (bytes <= 4) continue;
    put_values(e);
    if (bytes & 1) w.out.push_back(0);
  }
  w.out.insert(w.out.end(), pixels.begin(), pixels.end());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorKind::kIo, "cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(w.out.data()), static_cast<std::streamsize>(w.out.size()));
  require(static_cast<bool>(f), ErrorKind::kIo, "write failed for '" + path + "'");
}

}  // namespace

void write_tiff(const std::string& path, const std::vector<Image>& channels,
                const std::string& description) {
  require(!channels.empty(), ErrorKind::kInvalidArgument, "no channels to write");
  const int h = channels.front().rows();
  const int w = channels.front().cols();
  for (const Image& c : channels) {
    require(c.rows() == h && c.cols() == w && !c.empty(), ErrorKind::kInvalidArgument,
            "channels must share a non-empty shape");
  }
  const int spp = static_cast<int>(channels.size());
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * h * spp * 4);
  std::size_t at = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < spp; ++c) {
        const auto v = std::bit_cast<std::uint32_t>(static_cast<float>(channels[c](y, x)));
        for (int i = 0; i < 4; ++i) pixels[at++] = static_cast<unsigned char>(v >> (8 * i));
      }
    }
  }
  write_file(path, w, h, spp, 32, 3, pixels, description);
}

void save_image(const Image& img, const std::string& path, const std::string& description) {
  write_tiff(path, {img}, description);
}

void write_tiff_u8(const std::string& path, const Image& img) {
  std::vector<unsigned char> pixels(img.size());
  for (std::size_t q = 0; q < img.size(); ++q) {
    pixels[q] = static_cast<unsigned char>(
        std::lround(255.0 * std::clamp(img.values()[q], 0.0, 1.0)));
  }
  write_file(path, img.cols(), img.rows(), 1, 8, 1, pixels, {});
}

}  // namespace rdm
