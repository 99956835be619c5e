#include "deepcontrast/tiff.hpp"


#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

// Self-contained classic (non-Big) TIFF codec. Scope: grayscale,
// single-sample, uncompressed, strip-organized pages — exactly what this
// toolkit emits. Reading accepts both byte orders; writing is always
// little-endian with one strip per page, so float32 volumes round-trip
// bit-exactly.

namespace deepcontrast {

namespace {

inline uint16_t bswap16(uint16_t v) { return __builtin_bswap16(v); }
inline uint32_t bswap32(uint32_t v) { return __builtin_bswap32(v); }

constexpr uint16_t kTagImageWidth = 256;
constexpr uint16_t kTagImageLength = 257;
constexpr uint16_t kTagBitsPerSample = 258;
constexpr uint16_t kTagCompression = 259;
constexpr uint16_t kTagPhotometric = 262;
constexpr uint16_t kTagStripOffsets = 273;
constexpr uint16_t kTagSamplesPerPixel = 277;
constexpr uint16_t kTagRowsPerStrip = 278;
constexpr uint16_t kTagStripByteCounts = 279;
constexpr uint16_t kTagSampleFormat = 339;

constexpr uint16_t kTypeShort = 3;
constexpr uint16_t kTypeLong = 4;

struct RawEntry {
    uint16_t type = 0;
    uint32_t count = 0;
    uint32_t value_or_offset = 0;  // raw 4 bytes, already byte-swapped
};

class Reader {
public:
    explicit Reader(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open TIFF file: " + path);
        bytes_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
        if (bytes_.size() < 8) throw std::runtime_error("not a TIFF file (too short): " + path);
        if (bytes_[0] == 'I' && bytes_[1] == 'I') swap_ = false;
        else if (bytes_[0] == 'M' && bytes_[1] == 'M') swap_ = true;
        else throw std::runtime_error("not a TIFF file (bad byte-order mark): " + path);
        if (u16(2) != 42) throw std::runtime_error("not a TIFF file (bad magic): " + path);
    }

    uint16_t u16(size_t off) const {
        check(off, 2);
        uint16_t v;
        std::memcpy(&v, bytes_.data() + off, 2);
        return swap_ ? bswap16(v) : v;
    }
    uint32_t u32(size_t off) const {
        check(off, 4);
        uint32_t v;
        std::memcpy(&v, bytes_.data() + off, 4);
        return swap_ ? bswap32(v) : v;
    }
    const uint8_t* at(size_t off, size_t n) const {
        check(off, n);
        return bytes_.data() + off;
    }
    bool swapped() const { return swap_; }

private:
    void check(size_t off, size_t n) const {
        if (off + n > bytes_.size()) throw std::runtime_error("truncated TIFF file");
    }
    std::vector<uint8_t> bytes_;
    bool swap_ = false;
};

uint32_t entry_scalar(const Reader& r, const RawEntry& e) {
    if (e.count != 1) throw std::runtime_error("TIFF tag has unexpected count");
    if (e.type == kTypeShort) return r.u16(e.value_or_offset);
    if (e.type == kTypeLong) return r.u32(e.value_or_offset);
    throw std::runtime_error("TIFF tag has unexpected type");
}

std::vector<uint32_t> entry_array(const Reader& r, const RawEntry& e) {
    std::vector<uint32_t> out(e.count);
    const size_t elem = (e.type == kTypeShort) ? 2 : 4;
    if (e.type != kTypeShort && e.type != kTypeLong)
        throw std::runtime_error("TIFF tag has unexpected type");
    size_t base = e.value_or_offset;
    if (e.count * elem > 4) base = r.u32(e.value_or_offset);  // out-of-line values
    for (uint32_t i = 0; i < e.count; ++i)
        out[i] = (elem == 2) ? r.u16(base + i * 2) : r.u32(base + i * 4);
    return out;
}

Plane decode_page(const Reader& r, size_t ifd_off, int page_index) {
    const uint16_t n_entries = r.u16(ifd_off);
    std::map<uint16_t, RawEntry> entries;
    for (uint16_t i = 0; i < n_entries; ++i) {
        const size_t e_off = ifd_off + 2 + i * 12;
        const uint16_t tag = r.u16(e_off);
        RawEntry e;
        e.type = r.u16(e_off + 2);
        e.count = r.u32(e_off + 4);
        // Position of the 4-byte value field; entry_scalar/entry_array read
        // the value inline or follow it as an offset depending on size.
        e.value_or_offset = static_cast<uint32_t>(e_off + 8);
        entries[tag] = e;
    }
    auto resolve = [&](uint16_t tag) -> RawEntry {
        auto it = entries.find(tag);
        if (it == entries.end())
            throw std::runtime_error("TIFF page missing required tag " + std::to_string(tag));
        return it->second;
    };
    auto scalar = [&](uint16_t tag, uint32_t fallback, bool has_fallback = false) -> uint32_t {
        auto it = entries.find(tag);
        if (it == entries.end()) {
            if (has_fallback) return fallback;
            throw std::runtime_error("TIFF page missing required tag " + std::to_string(tag));
        }
        return entry_scalar(r, it->second);
    };

    const uint32_t width = scalar(kTagImageWidth, 0);
    const uint32_t height = scalar(kTagImageLength, 0);
    const uint32_t bits = scalar(kTagBitsPerSample, 1);
    const uint32_t compression = scalar(kTagCompression, 1, true);
    const uint32_t samples = scalar(kTagSamplesPerPixel, 1, true);
    const uint32_t sample_format = scalar(kTagSampleFormat, 1, true);
    const uint32_t rows_per_strip = scalar(kTagRowsPerStrip, height, true);

    if (samples != 1)
        throw std::runtime_error("unsupported channel count: " + std::to_string(samples) +
                                 " samples per pixel (grayscale required)");
    if (compression != 1)
        throw std::runtime_error("unsupported TIFF compression scheme " + std::to_string(compression));
    const bool is_float = (sample_format == 3);
    if (!((bits == 8 && !is_float) || (bits == 16 && !is_float) || (bits == 32 && is_float)))
        throw std::runtime_error("unsupported bit depth / sample format: " + std::to_string(bits) +
                                 " bits, format " + std::to_string(sample_format));

    const std::vector<uint32_t> strip_offsets = entry_array(r, resolve(kTagStripOffsets));
    const std::vector<uint32_t> strip_counts = entry_array(r, resolve(kTagStripByteCounts));
    if (strip_offsets.size() != strip_counts.size())
        throw std::runtime_error("TIFF strip offset/count mismatch");

    Plane p(static_cast<int>(height), static_cast<int>(width), 0.0f, page_index);
    const size_t bytes_per_pixel = bits / 8;
    const size_t row_bytes = static_cast<size_t>(width) * bytes_per_pixel;
    size_t row = 0;
    for (size_t s = 0; s < strip_offsets.size(); ++s) {
        const size_t rows_here =
            std::min<size_t>(rows_per_strip, height - row);
        if (strip_counts[s] != rows_here * row_bytes)
            throw std::runtime_error("TIFF strip byte count does not match geometry");
        const uint8_t* src = r.at(strip_offsets[s], strip_counts[s]);
        for (size_t rr = 0; rr < rows_here; ++rr, ++row) {
            float* dst = p.pixels.data() + row * width;
            const uint8_t* line = src + rr * row_bytes;
            for (uint32_t x = 0; x < width; ++x) {
                if (bits == 8) {
                    dst[x] = static_cast<float>(line[x]);
                } else if (bits == 16) {
                    uint16_t v;
                    std::memcpy(&v, line + x * 2, 2);
                    if (r.swapped()) v = bswap16(v);
                    dst[x] = static_cast<float>(v);
                } else {
                    uint32_t v;
                    std::memcpy(&v, line + x * 4, 4);
                    if (r.swapped()) v = bswap32(v);
                    float f;
                    std::memcpy(&f, &v, 4);
                    dst[x] = f;
                }
            }
        }
    }
    if (row != height) throw std::runtime_error("TIFF strips do not cover the image");
    for (float v : p.pixels)
        if (!std::isfinite(v)) throw std::runtime_error("TIFF contains NaN or Inf pixels");
    return p;
}

struct LEWriter {
    std::vector<uint8_t> bytes;
    void u16(uint16_t v) {
        bytes.push_back(v & 0xff);
        bytes.push_back((v >> 8) & 0xff);
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
    }
    void raw(const void* data, size_t n) {
        const auto* b = static_cast<const uint8_t*>(data);
        bytes.insert(bytes.end(), b, b + n);
    }
    void patch_u32(size_t off, uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes[off + i] = (v >> (8 * i)) & 0xff;
    }
};

void write_entry(LEWriter& w, uint16_t tag, uint16_t type, uint32_t count, uint32_t value) {
    w.u16(tag);
    w.u16(type);
    w.u32(count);
    if (type == kTypeShort && count == 1) {
        w.u16(static_cast<uint16_t>(value));
        w.u16(0);
    } else {
        w.u32(value);
    }
}

void write_pages(const std::vector<std::vector<uint8_t>>& page_data, int height, int width,
                 uint16_t bits, uint16_t sample_format, const std::string& path) {
    LEWriter w;
    w.raw("II", 2);
    w.u16(42);
    const size_t first_ifd_ptr = w.bytes.size();
    w.u32(0);  // patched below

    size_t prev_next_ptr = first_ifd_ptr;
    for (const auto& data : page_data) {
        const size_t data_off = w.bytes.size();
        w.raw(data.data(), data.size());
        if (w.bytes.size() % 2) w.bytes.push_back(0);  // word-align IFD

        const size_t ifd_off = w.bytes.size();
        w.patch_u32(prev_next_ptr, static_cast<uint32_t>(ifd_off));
        const uint16_t n_entries = 10;
        w.u16(n_entries);
        write_entry(w, kTagImageWidth, kTypeLong, 1, static_cast<uint32_t>(width));
        write_entry(w, kTagImageLength, kTypeLong, 1, static_cast<uint32_t>(height));
        write_entry(w, kTagBitsPerSample, kTypeShort, 1, bits);
        write_entry(w, kTagCompression, kTypeShort, 1, 1);
        write_entry(w, kTagPhotometric, kTypeShort, 1, 1);  // BlackIsZero
        write_entry(w, kTagStripOffsets, kTypeLong, 1, static_cast<uint32_t>(data_off));
        write_entry(w, kTagSamplesPerPixel, kTypeShort, 1, 1);
        write_entry(w, kTagRowsPerStrip, kTypeLong, 1, static_cast<uint32_t>(height));
        write_entry(w, kTagStripByteCounts, kTypeLong, 1, static_cast<uint32_t>(data.size()));
        write_entry(w, kTagSampleFormat, kTypeShort, 1, sample_format);
        prev_next_ptr = w.bytes.size();
        w.u32(0);  // next-IFD pointer, patched by the following page
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open path for writing: " + path);
    f.write(reinterpret_cast<const char*>(w.bytes.data()),
            static_cast<std::streamsize>(w.bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

Volume read_volume(const std::string& path) {
    Reader r(path);
    Volume v;
    size_t ifd_off = r.u32(4);
    int page = 0;
    while (ifd_off != 0) {
        v.planes.push_back(decode_page(r, ifd_off, page++));
        const uint16_t n_entries = r.u16(ifd_off);
        ifd_off = r.u32(ifd_off + 2 + static_cast<size_t>(n_entries) * 12);
    }
    if (v.planes.empty()) throw std::runtime_error("TIFF has no pages: " + path);
    validate_volume(v);
    return v;
}

void write_volume(const Volume& v, const std::string& path, TiffDType dtype) {
    validate_volume(v);
    std::vector<std::vector<uint8_t>> pages;
    pages.reserve(v.planes.size());
    for (const Plane& p : v.planes) {
        std::vector<uint8_t> data;
        if (dtype == TiffDType::Float32) {
            data.resize(p.pixels.size() * 4);
            std::memcpy(data.data(), p.pixels.data(), data.size());
        } else if (dtype == TiffDType::Uint16) {
            data.resize(p.pixels.size() * 2);
            for (size_t i = 0; i < p.pixels.size(); ++i) {
                const float clipped = std::clamp(p.pixels[i], 0.0f, 65535.0f);
                const uint16_t q = static_cast<uint16_t>(std::lround(clipped));
                std::memcpy(data.data() + i * 2, &q, 2);
            }
        } else {
            data.resize(p.pixels.size());
            for (size_t i = 0; i < p.pixels.size(); ++i)
                data[i] = static_cast<uint8_t>(std::lround(std::clamp(p.pixels[i], 0.0f, 255.0f)));
        }
        pages.push_back(std::move(data));
    }
    const uint16_t bits = dtype == TiffDType::Float32 ? 32 : dtype == TiffDType::Uint16 ? 16 : 8;
    const uint16_t fmt = dtype == TiffDType::Float32 ? 3 : 1;
    write_pages(pages, v.height(), v.width(), bits, fmt, path);
}

void write_mask_stack(const std::vector<std::vector<uint8_t>>& masks, int height, int width,
                      const std::string& path) {
    std::vector<std::vector<uint8_t>> pages;
    pages.reserve(masks.size());
    for (const auto& m : masks) {
        if (m.size() != static_cast<size_t>(height) * static_cast<size_t>(width))
            throw std::invalid_argument("mask size does not match dimensions");
        std::vector<uint8_t> data(m.size());
        for (size_t i = 0; i < m.size(); ++i) data[i] = m[i] ? 255 : 0;
        pages.push_back(std::move(data));
    }
    write_pages(pages, height, width, 8, 1, path);
}

}  // namespace deepcontrast
