/* otk/tiff.hpp
 *
 * Minimal baseline TIFF: little-endian classic TIFF with one strip per
 * page, grayscale, uncompressed. Writes float32 and uint32 sample data
 * (volumes are page stacks, Z fastest); reads uint8/16/32 and float32,
 * widening to float or exact uint32. Compressed or tiled inputs are
 * rejected with the codec named. An ImageDescription tag on the first
 * page carries the stack's axis metadata for validation on load.
 */

#ifndef OTK_TIFF_HPP
#define OTK_TIFF_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace otk {

namespace tiffdet {

inline constexpr std::uint16_t kTagImageWidth = 256;
inline constexpr std::uint16_t kTagImageLength = 257;
inline constexpr std::uint16_t kTagBitsPerSample = 258;
inline constexpr std::uint16_t kTagCompression = 259;
inline constexpr std::uint16_t kTagPhotometric = 262;
inline constexpr std::uint16_t kTagImageDescription = 270;
inline constexpr std::uint16_t kTagStripOffsets = 273;
inline constexpr std::uint16_t kTagSamplesPerPixel = 277;
inline constexpr std::uint16_t kTagRowsPerStrip = 278;
inline constexpr std::uint16_t kTagStripByteCounts = 279;
inline constexpr std::uint16_t kTagTileWidth = 322;
inline constexpr std::uint16_t kTagSampleFormat = 339;

inline constexpr std::uint16_t kTypeShort = 3;
inline constexpr std::uint16_t kTypeLong = 4;
inline constexpr std::uint16_t kTypeAscii = 2;

inline std::string codec_name(std::uint32_t compression) {
  switch (compression) {
    case 2: case 3: case 4: return "CCITT";
    case 5: return "LZW";
    case 6: return "JPEG (old-style)";
    case 7: return "JPEG";
    case 8: case 32946: return "Deflate";
    case 32773: return "PackBits";
    default: return "compression code " + std::to_string(compression);
  }
}

struct Entry {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::uint32_t value_or_offset = 0;  // raw field (little-endian resolved)
};

}  // namespace tiffdet

struct TiffPage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> as_float;        // always populated
  std::vector<std::uint32_t> as_u32;  // populated for 32-bit unsigned pages
  bool is_u32 = false;
};

struct TiffStack {
  std::vector<TiffPage> pages;
  std::string description;  // first page's ImageDescription, if any
};

namespace tiffdet {

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open TIFF: " + path);
    data_.assign(std::istreambuf_iterator<char>(is),
                 std::istreambuf_iterator<char>());
    if (data_.size() < 8) throw std::runtime_error("not a TIFF: " + path);
    if (data_[0] == 'I' && data_[1] == 'I') big_endian_ = false;
    else if (data_[0] == 'M' && data_[1] == 'M') big_endian_ = true;
    else throw std::runtime_error("not a TIFF (bad byte order mark): " + path);
    if (u16(2) != 42) throw std::runtime_error("not a TIFF (bad magic): " + path);
  }

  TiffStack read() {
    TiffStack stack;
    std::uint32_t ifd = u32(4);
    while (ifd != 0) {
      stack.pages.push_back(read_page(ifd, stack));
      const std::uint16_t n = u16(ifd);
      ifd = u32(ifd + 2 + 12u * n);
    }
    if (stack.pages.empty())
      throw std::runtime_error("TIFF has no pages: " + path_);
    return stack;
  }

 private:
  std::uint16_t u16(std::size_t off) const {
    check(off, 2);
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data()) + off;
    return big_endian_ ? static_cast<std::uint16_t>((p[0] << 8) | p[1])
                       : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32(std::size_t off) const {
    check(off, 4);
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data()) + off;
    return big_endian_
               ? (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                     (std::uint32_t(p[2]) << 8) | p[3]
               : std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                     (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }
  void check(std::size_t off, std::size_t n) const {
    if (off + n > data_.size())
      throw std::runtime_error("truncated TIFF: " + path_);
  }

  // first value of an entry (SHORT or LONG)
  std::uint32_t scalar(const tiffdet::Entry& e, std::size_t entry_off) const {
    if (e.type == kTypeShort)
      return e.count >= 1 ? u16(value_offset(e, entry_off)) : 0;
    return e.count >= 1 ? u32(value_offset(e, entry_off)) : 0;
  }

  std::size_t value_offset(const tiffdet::Entry& e, std::size_t entry_off) const {
    const std::size_t size = (e.type == kTypeShort ? 2 : e.type == kTypeAscii ? 1 : 4);
    return size * e.count <= 4 ? entry_off + 8 : u32(entry_off + 8);
  }

  std::vector<std::uint32_t> values(const tiffdet::Entry& e,
                                    std::size_t entry_off) const {
    std::vector<std::uint32_t> out;
    const std::size_t base = value_offset(e, entry_off);
    for (std::uint32_t i = 0; i < e.count; ++i)
      out.push_back(e.type == kTypeShort ? u16(base + 2u * i) : u32(base + 4u * i));
    return out;
  }

  TiffPage read_page(std::uint32_t ifd, TiffStack& stack) {
    const std::uint16_t n = u16(ifd);
    std::map<std::uint16_t, std::pair<tiffdet::Entry, std::size_t>> entries;
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::size_t off = ifd + 2 + 12u * i;
      tiffdet::Entry e;
      const std::uint16_t tag = u16(off);
      e.type = u16(off + 2);
      e.count = u32(off + 4);
      entries[tag] = {e, off};
    }
    auto get = [&](std::uint16_t tag, std::uint32_t fallback,
                   bool required = false) -> std::uint32_t {
      auto it = entries.find(tag);
      if (it == entries.end()) {
        if (required)
          throw std::runtime_error("TIFF missing tag " + std::to_string(tag) +
                                   ": " + path_);
        return fallback;
      }
      return scalar(it->second.first, it->second.second);
    };

    if (entries.count(kTagTileWidth))
      throw std::runtime_error("tiled TIFF not supported: " + path_);
    const std::uint32_t compression = get(kTagCompression, 1);
    if (compression != 1)
      throw std::runtime_error("unsupported TIFF compression (" +
                               codec_name(compression) + "): " + path_);
    const std::uint32_t spp = get(kTagSamplesPerPixel, 1);
    if (spp != 1)
      throw std::runtime_error("multi-sample TIFF not supported (" +
                               std::to_string(spp) + " samples/pixel): " + path_);

    TiffPage page;
    page.width = get(kTagImageWidth, 0, true);
    page.height = get(kTagImageLength, 0, true);
    const std::uint32_t bits = get(kTagBitsPerSample, 8);
    const std::uint32_t fmt = get(kTagSampleFormat, 1);
    if (!((fmt == 1 && (bits == 8 || bits == 16 || bits == 32)) ||
          (fmt == 3 && bits == 32)))
      throw std::runtime_error("unsupported TIFF sample layout (bits=" +
                               std::to_string(bits) + ", format=" +
                               std::to_string(fmt) + "): " + path_);

    if (stack.pages.empty() && entries.count(kTagImageDescription)) {
      const auto& [e, off] = entries.at(kTagImageDescription);
      const std::size_t base = value_offset(e, off);
      check(base, e.count);
      stack.description.assign(data_.data() + base,
                               e.count > 0 ? e.count - 1 : 0);  // drop NUL
    }

    auto offs_it = entries.find(kTagStripOffsets);
    auto counts_it = entries.find(kTagStripByteCounts);
    if (offs_it == entries.end())
      throw std::runtime_error("TIFF missing strip offsets: " + path_);
    const auto strip_offsets = values(offs_it->second.first, offs_it->second.second);
    std::vector<std::uint32_t> strip_counts;
    if (counts_it != entries.end())
      strip_counts = values(counts_it->second.first, counts_it->second.second);
    else
      strip_counts.assign(strip_offsets.size(),
                          page.width * page.height * (bits / 8));

    // assemble raw sample bytes
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(page.width) * page.height * (bits / 8));
    for (std::size_t s = 0; s < strip_offsets.size(); ++s) {
      check(strip_offsets[s], strip_counts[s]);
      const auto* p =
          reinterpret_cast<const unsigned char*>(data_.data()) + strip_offsets[s];
      raw.insert(raw.end(), p, p + strip_counts[s]);
    }
    const std::size_t n_px = static_cast<std::size_t>(page.width) * page.height;
    if (raw.size() < n_px * (bits / 8))
      throw std::runtime_error("TIFF pixel data truncated: " + path_);

    page.as_float.resize(n_px);
    if (fmt == 3) {
      for (std::size_t i = 0; i < n_px; ++i) {
        std::uint32_t u = sample_u32(raw.data() + 4 * i);
        float f;
        std::memcpy(&f, &u, 4);
        page.as_float[i] = f;
      }
    } else if (bits == 8) {
      for (std::size_t i = 0; i < n_px; ++i)
        page.as_float[i] = static_cast<float>(raw[i]);
    } else if (bits == 16) {
      for (std::size_t i = 0; i < n_px; ++i) {
        const unsigned char* p = raw.data() + 2 * i;
        const std::uint16_t v = big_endian_
                                    ? static_cast<std::uint16_t>((p[0] << 8) | p[1])
                                    : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        page.as_float[i] = static_cast<float>(v);
      }
    } else {  // 32-bit unsigned: keep exact values too
      page.is_u32 = true;
      page.as_u32.resize(n_px);
      for (std::size_t i = 0; i < n_px; ++i) {
        const std::uint32_t v = sample_u32(raw.data() + 4 * i);
        page.as_u32[i] = v;
        page.as_float[i] = static_cast<float>(v);
      }
    }
    return page;
  }

  std::uint32_t sample_u32(const unsigned char* p) const {
    return big_endian_ ? (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                             (std::uint32_t(p[2]) << 8) | p[3]
                       : std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                             (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }

  std::string path_;
  std::string data_;
  bool big_endian_ = false;
};

class Writer {
 public:
  Writer(const std::string& path, std::string description)
      : path_(path), description_(std::move(description)) {}

  void add_page_f32(const float* data, std::uint32_t width, std::uint32_t height) {
    pages_.push_back({reinterpret_cast<const void*>(data), width, height, 3});
  }
  void add_page_u32(const std::uint32_t* data, std::uint32_t width,
                    std::uint32_t height) {
    pages_.push_back({reinterpret_cast<const void*>(data), width, height, 1});
  }

  void finish() {
    std::ofstream os(path_, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path_);
    put16(os, 0x4949);  // "II"
    put16(os, 42);

    // layout: header(8) | page data blocks | description | IFD chain
    std::size_t offset = 8;
    std::vector<std::size_t> data_offsets;
    for (const Page& p : pages_) {
      data_offsets.push_back(offset);
      offset += std::size_t(p.width) * p.height * 4;
    }
    std::size_t desc_offset = 0;
    std::size_t desc_len = description_.size() + 1;
    if (!description_.empty()) {
      desc_offset = offset;
      offset += desc_len;
      if (offset % 2) ++offset;  // word-align the IFDs
    }
    const std::size_t first_ifd = offset;
    put32(os, static_cast<std::uint32_t>(first_ifd));

    for (std::size_t i = 0; i < pages_.size(); ++i) {
      const Page& p = pages_[i];
      os.write(reinterpret_cast<const char*>(p.data),
               std::streamsize(std::size_t(p.width) * p.height * 4));
    }
    if (!description_.empty()) {
      os.write(description_.c_str(), std::streamsize(desc_len));
      if ((desc_offset + desc_len) % 2) os.put('\0');
    }

    std::size_t ifd_offset = first_ifd;
    for (std::size_t i = 0; i < pages_.size(); ++i) {
      const Page& p = pages_[i];
      const bool with_desc = i == 0 && !description_.empty();
      const std::uint16_t n_entries = with_desc ? 11 : 10;
      put16(os, n_entries);
      const std::uint32_t n_bytes = p.width * p.height * 4;
      write_entry(os, tiffdet::kTagImageWidth, tiffdet::kTypeLong, 1, p.width);
      write_entry(os, tiffdet::kTagImageLength, tiffdet::kTypeLong, 1, p.height);
      write_entry(os, tiffdet::kTagBitsPerSample, tiffdet::kTypeShort, 1, 32);
      write_entry(os, tiffdet::kTagCompression, tiffdet::kTypeShort, 1, 1);
      write_entry(os, tiffdet::kTagPhotometric, tiffdet::kTypeShort, 1, 1);
      if (with_desc)
        write_entry(os, tiffdet::kTagImageDescription, tiffdet::kTypeAscii,
                    static_cast<std::uint32_t>(desc_len),
                    static_cast<std::uint32_t>(desc_offset));
      write_entry(os, tiffdet::kTagStripOffsets, tiffdet::kTypeLong, 1,
                  static_cast<std::uint32_t>(data_offsets[i]));
      write_entry(os, tiffdet::kTagSamplesPerPixel, tiffdet::kTypeShort, 1, 1);
      write_entry(os, tiffdet::kTagRowsPerStrip, tiffdet::kTypeLong, 1, p.height);
      write_entry(os, tiffdet::kTagStripByteCounts, tiffdet::kTypeLong, 1, n_bytes);
      write_entry(os, tiffdet::kTagSampleFormat, tiffdet::kTypeShort, 1, p.format);
      ifd_offset += 2 + 12u * n_entries + 4;
      const bool last = i + 1 == pages_.size();
      put32(os, last ? 0 : static_cast<std::uint32_t>(ifd_offset));
    }
    if (!os) throw std::runtime_error("write failed: " + path_);
  }

 private:
  struct Page {
    const void* data;
    std::uint32_t width, height;
    std::uint16_t format;  // 1 unsigned, 3 float
  };

  static void put16(std::ofstream& os, std::uint16_t v) {
    os.put(char(v & 0xff));
    os.put(char(v >> 8));
  }
  static void put32(std::ofstream& os, std::uint32_t v) {
    os.put(char(v & 0xff));
    os.put(char((v >> 8) & 0xff));
    os.put(char((v >> 16) & 0xff));
    os.put(char((v >> 24) & 0xff));
  }
  static void write_entry(std::ofstream& os, std::uint16_t tag,
                          std::uint16_t type, std::uint32_t count,
                          std::uint32_t value) {
    put16(os, tag);
    put16(os, type);
    put32(os, count);
    if (type == tiffdet::kTypeShort && count == 1) {
      put16(os, static_cast<std::uint16_t>(value));
      put16(os, 0);
    } else {
      put32(os, value);
    }
  }

  std::string path_;
  std::string description_;
  std::vector<Page> pages_;
};

}  // namespace tiffdet

inline TiffStack read_tiff(const std::string& path) {
  return tiffdet::Reader(path).read();
}

// Volume writers: pages are Z slices in ascending order.
template <typename PageProvider>
void write_tiff_f32(const std::string& path, std::uint32_t width,
                    std::uint32_t height, std::size_t n_pages,
                    PageProvider&& page, const std::string& description = {}) {
  tiffdet::Writer w(path, description);
  for (std::size_t i = 0; i < n_pages; ++i)
    w.add_page_f32(page(i), width, height);
  w.finish();
}

template <typename PageProvider>
void write_tiff_u32(const std::string& path, std::uint32_t width,
                    std::uint32_t height, std::size_t n_pages,
                    PageProvider&& page, const std::string& description = {}) {
  tiffdet::Writer w(path, description);
  for (std::size_t i = 0; i < n_pages; ++i)
    w.add_page_u32(page(i), width, height);
  w.finish();
}

}  // namespace otk

#endif  // OTK_TIFF_HPP
