#include "grapetrack/npy.hpp"

#include <cstring>
#include <string_view>

#include <fmt/format.h>
#include <zlib.h>

#include "grapetrack/error.hpp"
#include "text_util.hpp"

namespace grapetrack {

namespace {

constexpr std::uint8_t kMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
    if (at + 2 > b.size()) throw FormatError("truncated input");
    return std::uint16_t(b[at] | (b[at + 1] << 8));
}

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
    if (at + 4 > b.size()) throw FormatError("truncated input");
    return std::uint32_t(b[at]) | (std::uint32_t(b[at + 1]) << 8) | (std::uint32_t(b[at + 2]) << 16) |
           (std::uint32_t(b[at + 3]) << 24);
}

std::uint64_t le64(std::span<const std::uint8_t> b, std::size_t at) {
    return std::uint64_t(le32(b, at)) | (std::uint64_t(le32(b, at + 4)) << 32);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

// Value following "'key':" in the header dict, up to the next top-level comma.
std::string_view dict_value(std::string_view header, std::string_view key) {
    const std::string quoted = fmt::format("'{}'", key);
    auto pos = header.find(quoted);
    if (pos == std::string_view::npos) {
        throw FormatError(fmt::format("NPY header lacks '{}'", key));
    }
    pos = header.find(':', pos + quoted.size());
    if (pos == std::string_view::npos) throw FormatError("malformed NPY header");
    ++pos;
    int depth = 0;
    std::size_t end = pos;
    for (; end < header.size(); ++end) {
        const char c = header[end];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if ((c == ',' && depth == 0) || c == '}') break;
    }
    return detail::trim(header.substr(pos, end - pos));
}

}  // namespace

NpyArray read_npy(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw FormatError("not an NPY payload (bad magic)");
    }
    const std::uint8_t major = bytes[6];
    std::size_t header_len = 0;
    std::size_t header_start = 0;
    if (major == 1) {
        header_len = le16(bytes, 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        header_len = le32(bytes, 8);
        header_start = 12;
    } else {
        throw FormatError(fmt::format("unsupported NPY version {}", major));
    }
    if (header_start + header_len > bytes.size()) throw FormatError("truncated NPY header");
    const std::string_view header(reinterpret_cast<const char*>(bytes.data() + header_start), header_len);

    NpyArray out;
    std::string_view descr = dict_value(header, "descr");
    if (descr.size() < 2 || descr.front() != '\'' || descr.back() != '\'') {
        throw FormatError("NPY descr is not a string");
    }
    descr = descr.substr(1, descr.size() - 2);
    if (descr == "|b1" || descr == "?" || descr == "b1") {
        out.descr = "|b1";
    } else if (descr == "|u1" || descr == "<u1" || descr == ">u1" || descr == "u1") {
        out.descr = "|u1";
    } else {
        throw FormatError(fmt::format("unsupported NPY dtype '{}' (only bool and uint8)", descr));
    }
    const std::string_view fortran = dict_value(header, "fortran_order");
    if (fortran == "True") throw FormatError("Fortran-order NPY arrays are not supported");
    if (fortran != "False") throw FormatError("malformed fortran_order");

    std::string_view shape = dict_value(header, "shape");
    if (shape.size() < 2 || shape.front() != '(' || shape.back() != ')') {
        throw FormatError("malformed NPY shape");
    }
    shape = shape.substr(1, shape.size() - 2);
    std::size_t count = 1;
    for (auto tok : detail::split_char(shape, ',')) {
        tok = detail::trim(tok);
        if (tok.empty()) continue;
        std::size_t dim = 0;
        if (!detail::parse_int(tok, dim)) throw FormatError(fmt::format("bad NPY shape entry '{}'", tok));
        out.shape.push_back(dim);
        count *= dim;
    }
    const std::size_t data_start = header_start + header_len;
    if (bytes.size() - data_start != count) {
        throw FormatError(fmt::format("NPY payload has {} bytes, shape needs {}", bytes.size() - data_start,
                                      count));
    }
    out.data.assign(bytes.begin() + data_start, bytes.end());
    return out;
}

std::vector<std::uint8_t> write_npy(const NpyArray& array) {
    // Python tuple repr: (), (a,), (a, b)
    std::string shape = fmt::format("{}", fmt::join(array.shape, ", "));
    if (array.shape.size() == 1) shape += ',';
    std::string header =
        fmt::format("{{'descr': '{}', 'fortran_order': False, 'shape': ({}), }}", array.descr, shape);
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(1);
    out.push_back(0);
    put16(out, std::uint16_t(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), array.data.begin(), array.data.end());
    return out;
}

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint32_t kZip64EndSig = 0x06064b50;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50;

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("zlib init failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = uInt(in.size());
    zs.next_out = out.data();
    zs.avail_out = uInt(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected) throw FormatError("corrupt deflate stream in NPZ");
    return out;
}

}  // namespace

std::map<std::string, NpyArray> read_npz(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 22) throw FormatError("not a zip archive (too short)");
    std::size_t eocd = std::string_view::npos;
    const std::size_t lowest = bytes.size() > 22 + 65535 ? bytes.size() - 22 - 65535 : 0;
    for (std::size_t at = bytes.size() - 22 + 1; at-- > lowest;) {
        if (le32(bytes, at) == kEndSig) {
            eocd = at;
            break;
        }
    }
    if (eocd == std::string_view::npos) throw FormatError("not a zip archive (no end record)");

    std::uint64_t entries = le16(bytes, eocd + 10);
    std::uint64_t cd_offset = le32(bytes, eocd + 16);
    if ((entries == 0xFFFF || cd_offset == 0xFFFFFFFF) && eocd >= 20 &&
        le32(bytes, eocd - 20) == kZip64LocatorSig) {
        const std::uint64_t z64 = le64(bytes, eocd - 20 + 8);
        if (z64 + 56 > bytes.size() || le32(bytes, z64) != kZip64EndSig) {
            throw FormatError("corrupt zip64 end record");
        }
        entries = le64(bytes, z64 + 32);
        cd_offset = le64(bytes, z64 + 48);
    }

    std::map<std::string, NpyArray> members;
    std::size_t at = cd_offset;
    for (std::uint64_t e = 0; e < entries; ++e) {
        if (le32(bytes, at) != kCentralSig) throw FormatError("corrupt zip central directory");
        const std::uint16_t method = le16(bytes, at + 10);
        const std::uint32_t crc = le32(bytes, at + 16);
        std::uint64_t comp_size = le32(bytes, at + 20);
        std::uint64_t raw_size = le32(bytes, at + 24);
        const std::uint16_t name_len = le16(bytes, at + 28);
        const std::uint16_t extra_len = le16(bytes, at + 30);
        const std::uint16_t comment_len = le16(bytes, at + 32);
        std::uint64_t local = le32(bytes, at + 42);
        if (at + 46 + name_len + extra_len > bytes.size()) throw FormatError("truncated zip directory");
        std::string name(reinterpret_cast<const char*>(bytes.data() + at + 46), name_len);

        // Zip64 extra field: present values appear in a fixed order.
        std::size_t x = at + 46 + name_len;
        const std::size_t x_end = x + extra_len;
        while (x + 4 <= x_end) {
            const std::uint16_t id = le16(bytes, x);
            const std::uint16_t len = le16(bytes, x + 2);
            if (id == 0x0001) {
                std::size_t f = x + 4;
                if (raw_size == 0xFFFFFFFF) { raw_size = le64(bytes, f); f += 8; }
                if (comp_size == 0xFFFFFFFF) { comp_size = le64(bytes, f); f += 8; }
                if (local == 0xFFFFFFFF) { local = le64(bytes, f); }
            }
            x += 4 + len;
        }
        at = x_end + comment_len;

        if (le32(bytes, local) != kLocalSig) throw FormatError("corrupt zip local header");
        const std::size_t data = local + 30 + le16(bytes, local + 26) + le16(bytes, local + 28);
        if (data + comp_size > bytes.size()) throw FormatError("truncated zip member");
        const auto payload = bytes.subspan(data, comp_size);
        std::vector<std::uint8_t> raw;
        if (method == 0) {
            raw.assign(payload.begin(), payload.end());
        } else if (method == 8) {
            raw = inflate_raw(payload, raw_size);
        } else {
            throw FormatError(fmt::format("unsupported zip compression method {}", method));
        }
        if (crc32(0L, raw.data(), uInt(raw.size())) != crc) {
            throw FormatError(fmt::format("CRC mismatch in NPZ member '{}'", name));
        }
        if (name.size() > 4 && name.ends_with(".npy")) name.resize(name.size() - 4);
        members.emplace(std::move(name), read_npy(raw));
    }
    return members;
}

std::vector<std::uint8_t> write_npz(const std::map<std::string, NpyArray>& members) {
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> central;
    for (const auto& [key, array] : members) {
        const std::string name = key + ".npy";
        const auto raw = write_npy(array);
        const std::uint32_t crc = crc32(0L, raw.data(), uInt(raw.size()));
        const auto offset = std::uint32_t(out.size());

        put32(out, kLocalSig);
        put16(out, 20);  // version needed
        put16(out, 0);   // flags
        put16(out, 0);   // stored
        put16(out, 0);   // mod time
        put16(out, 0x21);  // mod date 1980-01-01
        put32(out, crc);
        put32(out, std::uint32_t(raw.size()));
        put32(out, std::uint32_t(raw.size()));
        put16(out, std::uint16_t(name.size()));
        put16(out, 0);
        out.insert(out.end(), name.begin(), name.end());
        out.insert(out.end(), raw.begin(), raw.end());

        put32(central, kCentralSig);
        put16(central, 20);
        put16(central, 20);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0x21);
        put32(central, crc);
        put32(central, std::uint32_t(raw.size()));
        put32(central, std::uint32_t(raw.size()));
        put16(central, std::uint16_t(name.size()));
        put16(central, 0);  // extra
        put16(central, 0);  // comment
        put16(central, 0);  // disk
        put16(central, 0);  // internal attrs
        put32(central, 0);  // external attrs
        put32(central, offset);
        central.insert(central.end(), name.begin(), name.end());
    }
    const auto cd_offset = std::uint32_t(out.size());
    out.insert(out.end(), central.begin(), central.end());
    put32(out, kEndSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, std::uint16_t(members.size()));
    put16(out, std::uint16_t(members.size()));
    put32(out, std::uint32_t(central.size()));
    put32(out, cd_offset);
    put16(out, 0);
    return out;
}

}  // namespace grapetrack
