#include "pinv/png_io.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace pinv {

namespace {

// ---------------------------------------------------------------------------
// checksums
// ---------------------------------------------------------------------------

uint32_t crc32(const uint8_t* data, size_t size, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) {
            uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    crc ^= 0xffffffffu;
    for (size_t i = 0; i < size; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

uint32_t adler32(const uint8_t* data, size_t size) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < size; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

uint32_t get_u32_be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

// ---------------------------------------------------------------------------
// inflate
// ---------------------------------------------------------------------------

struct BitReader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;
    uint32_t bitbuf = 0;
    int bitcount = 0;

    uint32_t bits(int n) {
        while (bitcount < n) {
            if (pos >= size) throw std::runtime_error("inflate: truncated stream");
            bitbuf |= uint32_t(data[pos++]) << bitcount;
            bitcount += 8;
        }
        const uint32_t v = bitbuf & ((1u << n) - 1);
        bitbuf >>= n;
        bitcount -= n;
        return v;
    }

    void align_byte() {
        bitbuf = 0;
        bitcount = 0;
    }
};

// Canonical Huffman decoder from code lengths.
struct Huffman {
    std::vector<int> counts;   // per length
    std::vector<int> symbols;  // sorted by (length, symbol)

    explicit Huffman(const std::vector<int>& lengths) {
        counts.assign(16, 0);
        for (int l : lengths) {
            if (l < 0 || l > 15) throw std::runtime_error("inflate: bad code length");
            ++counts[l];
        }
        counts[0] = 0;
        std::vector<int> offsets(16, 0);
        for (int l = 1; l < 16; ++l) offsets[l] = offsets[l - 1] + counts[l - 1];
        symbols.assign(offsets[15] + counts[15], 0);
        for (size_t s = 0; s < lengths.size(); ++s) {
            if (lengths[s] != 0) symbols[offsets[lengths[s]]++] = int(s);
        }
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len <= 15; ++len) {
            code |= int(br.bits(1));
            const int count = counts[len];
            if (code - first < count) return symbols[index + (code - first)];
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        throw std::runtime_error("inflate: invalid code");
    }
};

constexpr int kLenBase[] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
                            31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr int kLenExtra[] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                             2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr int kDistBase[] = {1,    2,    3,    4,    5,    7,     9,     13,    17,   25,
                             33,   49,   65,   97,   129,  193,   257,   385,   513,  769,
                             1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
constexpr int kDistExtra[] = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6,
                              6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<uint8_t>& out) {
    while (true) {
        const int sym = lit.decode(br);
        if (sym < 256) {
            out.push_back(uint8_t(sym));
        } else if (sym == 256) {
            return;
        } else {
            const int li = sym - 257;
            if (li >= 29) throw std::runtime_error("inflate: bad length symbol");
            const int length = kLenBase[li] + int(br.bits(kLenExtra[li]));
            const int ds = dist.decode(br);
            if (ds >= 30) throw std::runtime_error("inflate: bad distance symbol");
            const int distance = kDistBase[ds] + int(br.bits(kDistExtra[ds]));
            if (size_t(distance) > out.size()) throw std::runtime_error("inflate: distance too far");
            for (int i = 0; i < length; ++i) out.push_back(out[out.size() - distance]);
        }
    }
}

std::vector<uint8_t> inflate_raw(BitReader& br) {
    std::vector<uint8_t> out;
    bool final_block = false;
    while (!final_block) {
        final_block = br.bits(1) != 0;
        const uint32_t btype = br.bits(2);
        if (btype == 0) {
            br.align_byte();
            if (br.pos + 4 > br.size) throw std::runtime_error("inflate: truncated stored block");
            const uint32_t len = br.data[br.pos] | (uint32_t(br.data[br.pos + 1]) << 8);
            const uint32_t nlen = br.data[br.pos + 2] | (uint32_t(br.data[br.pos + 3]) << 8);
            if ((len ^ nlen) != 0xffffu) throw std::runtime_error("inflate: stored LEN mismatch");
            br.pos += 4;
            if (br.pos + len > br.size) throw std::runtime_error("inflate: truncated stored data");
            out.insert(out.end(), br.data + br.pos, br.data + br.pos + len);
            br.pos += len;
        } else if (btype == 1) {
            std::vector<int> lit_lengths(288);
            for (int i = 0; i < 144; ++i) lit_lengths[i] = 8;
            for (int i = 144; i < 256; ++i) lit_lengths[i] = 9;
            for (int i = 256; i < 280; ++i) lit_lengths[i] = 7;
            for (int i = 280; i < 288; ++i) lit_lengths[i] = 8;
            const Huffman lit(lit_lengths);
            const Huffman dist(std::vector<int>(30, 5));
            inflate_block(br, lit, dist, out);
        } else if (btype == 2) {
            const int hlit = int(br.bits(5)) + 257;
            const int hdist = int(br.bits(5)) + 1;
            const int hclen = int(br.bits(4)) + 4;
            static constexpr int order[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                              11, 4,  12, 3, 13, 2, 14, 1, 15};
            std::vector<int> cl_lengths(19, 0);
            for (int i = 0; i < hclen; ++i) cl_lengths[order[i]] = int(br.bits(3));
            const Huffman cl(cl_lengths);
            std::vector<int> lengths;
            lengths.reserve(hlit + hdist);
            while (int(lengths.size()) < hlit + hdist) {
                const int sym = cl.decode(br);
                if (sym < 16) {
                    lengths.push_back(sym);
                } else if (sym == 16) {
                    if (lengths.empty()) throw std::runtime_error("inflate: repeat with no prior");
                    const int n = 3 + int(br.bits(2));
                    lengths.insert(lengths.end(), n, lengths.back());
                } else if (sym == 17) {
                    const int n = 3 + int(br.bits(3));
                    lengths.insert(lengths.end(), n, 0);
                } else {
                    const int n = 11 + int(br.bits(7));
                    lengths.insert(lengths.end(), n, 0);
                }
            }
            if (int(lengths.size()) != hlit + hdist) {
                throw std::runtime_error("inflate: code length overflow");
            }
            const Huffman lit(std::vector<int>(lengths.begin(), lengths.begin() + hlit));
            const Huffman dist(std::vector<int>(lengths.begin() + hlit, lengths.end()));
            inflate_block(br, lit, dist, out);
        } else {
            throw std::runtime_error("inflate: reserved block type");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PNG scanline filters
// ---------------------------------------------------------------------------

uint8_t paeth(uint8_t a, uint8_t b, uint8_t c) {
    const int p = int(a) + int(b) - int(c);
    const int pa = std::abs(p - int(a));
    const int pb = std::abs(p - int(b));
    const int pc = std::abs(p - int(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void unfilter(std::vector<uint8_t>& raw, int width, int height, int channels) {
    const size_t stride = size_t(width) * channels;
    std::vector<uint8_t> prev(stride, 0);
    std::vector<uint8_t> line(stride);
    for (int y = 0; y < height; ++y) {
        const size_t row_start = size_t(y) * (stride + 1);
        const uint8_t filter = raw[row_start];
        const uint8_t* src = raw.data() + row_start + 1;
        for (size_t i = 0; i < stride; ++i) {
            const uint8_t left = i >= size_t(channels) ? line[i - channels] : 0;
            const uint8_t up = prev[i];
            const uint8_t ul = i >= size_t(channels) ? prev[i - channels] : 0;
            uint8_t v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v = uint8_t(v + left); break;
                case 2: v = uint8_t(v + up); break;
                case 3: v = uint8_t(v + ((int(left) + int(up)) >> 1)); break;
                case 4: v = uint8_t(v + paeth(left, up, ul)); break;
                default: throw std::runtime_error("png: unknown filter type");
            }
            line[i] = v;
        }
        std::memcpy(raw.data() + row_start + 1, line.data(), stride);
        prev = line;
    }
}

}  // namespace

std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t size) {
    if (size < 6) throw std::runtime_error("zlib: stream too short");
    const uint8_t cmf = data[0], flg = data[1];
    if ((cmf & 0x0f) != 8) throw std::runtime_error("zlib: not deflate");
    if (((uint32_t(cmf) << 8) | flg) % 31 != 0) throw std::runtime_error("zlib: bad header check");
    if (flg & 0x20) throw std::runtime_error("zlib: preset dictionary unsupported");
    BitReader br{data + 2, size - 2};
    std::vector<uint8_t> out = inflate_raw(br);
    // Trailing adler32 is big-endian at the end of the stream.
    const uint32_t expect = get_u32_be(data + size - 4);
    if (adler32(out.data(), out.size()) != expect) {
        throw std::runtime_error("zlib: adler32 mismatch");
    }
    return out;
}

std::vector<uint8_t> zlib_deflate_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> out;
    out.push_back(0x78);
    out.push_back(0x01);
    size_t pos = 0;
    do {
        const size_t chunk = std::min<size_t>(raw.size() - pos, 65535);
        const bool final_block = pos + chunk == raw.size();
        out.push_back(final_block ? 1 : 0);
        out.push_back(uint8_t(chunk & 0xff));
        out.push_back(uint8_t(chunk >> 8));
        out.push_back(uint8_t(~chunk & 0xff));
        out.push_back(uint8_t((~chunk >> 8) & 0xff));
        out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + chunk);
        pos += chunk;
    } while (pos < raw.size());
    put_u32_be(out, adler32(raw.data(), raw.size()));
    return out;
}

namespace {

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
    put_u32_be(out, uint32_t(payload.size()));
    const size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32_be(out, crc32(out.data() + type_pos, 4 + payload.size()));
}

}  // namespace

std::vector<uint8_t> encode_png(const ImageBuffer& img) {
    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, uint32_t(img.width));
    put_u32_be(ihdr, uint32_t(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(size_t(img.height) * (size_t(img.width) * 3 + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = img.pixels.data() + size_t(y) * img.width * 3;
        raw.insert(raw.end(), row, row + size_t(img.width) * 3);
    }
    append_chunk(out, "IDAT", zlib_deflate_stored(raw));
    append_chunk(out, "IEND", {});
    return out;
}

ImageBuffer decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) {
        throw std::runtime_error("png: bad signature");
    }
    int width = 0, height = 0, color_type = -1;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = get_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("png: truncated chunk");
        const std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        const uint8_t* payload = bytes.data() + pos + 8;
        const uint32_t expect_crc = get_u32_be(bytes.data() + pos + 8 + len);
        if (crc32(bytes.data() + pos + 4, 4 + len) != expect_crc) {
            throw std::runtime_error("png: chunk crc mismatch");
        }
        if (type == "IHDR") {
            width = int(get_u32_be(payload));
            height = int(get_u32_be(payload + 4));
            const int bit_depth = payload[8];
            color_type = payload[9];
            if (bit_depth != 8) throw std::runtime_error("png: only 8-bit depth supported");
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6) {
                throw std::runtime_error("png: unsupported color type");
            }
            if (payload[12] != 0) throw std::runtime_error("png: interlace unsupported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || idat.empty()) throw std::runtime_error("png: missing data");

    const int channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    std::vector<uint8_t> raw = zlib_inflate(idat.data(), idat.size());
    const size_t expect = size_t(height) * (size_t(width) * channels + 1);
    if (raw.size() != expect) throw std::runtime_error("png: decompressed size mismatch");
    unfilter(raw, width, height, channels);

    std::vector<uint8_t> pixels(size_t(width) * height * 3);
    for (int y = 0; y < height; ++y) {
        const uint8_t* src = raw.data() + size_t(y) * (size_t(width) * channels + 1) + 1;
        for (int x = 0; x < width; ++x) {
            uint8_t r, g, b;
            switch (channels) {
                case 1: r = g = b = src[x]; break;
                case 2: r = g = b = src[size_t(x) * 2]; break;
                case 3:
                    r = src[size_t(x) * 3];
                    g = src[size_t(x) * 3 + 1];
                    b = src[size_t(x) * 3 + 2];
                    break;
                default:
                    r = src[size_t(x) * 4];
                    g = src[size_t(x) * 4 + 1];
                    b = src[size_t(x) * 4 + 2];
                    break;
            }
            const size_t o = (size_t(y) * width + x) * 3;
            pixels[o] = r;
            pixels[o + 1] = g;
            pixels[o + 2] = b;
        }
    }
    return ImageBuffer(width, height, std::move(pixels));
}

void write_png_file(const std::filesystem::path& path, const ImageBuffer& img) {
    const auto bytes = encode_png(img);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_png_file: cannot open " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw std::runtime_error("write_png_file: write failed");
}

ImageBuffer read_png_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_png_file: cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

}  // namespace pinv
