#include "regen/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "regen/error.hpp"

namespace regen {

namespace binio {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    get_bytes(in, reinterpret_cast<char*>(buf), sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void put_u16(std::ostream& out, std::uint16_t v) { put_le(out, v); }
void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void get_bytes(std::istream& in, char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("truncated file");
}

std::uint16_t get_u16(std::istream& in) { return get_le<std::uint16_t>(in); }
std::uint32_t get_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

std::string get_string(std::istream& in) {
    const auto len = get_u32(in);
    if (len > (1u << 30)) throw FormatError("string length out of range");
    std::string s(len, '\0');
    get_bytes(in, s.data(), len);
    return s;
}

void expect_magic(std::istream& in, const char (&magic)[4], const char* what) {
    char buf[4];
    get_bytes(in, buf, 4);
    if (std::memcmp(buf, magic, 4) != 0) throw FormatError(std::string("bad magic bytes for ") + what);
}

}  // namespace binio

void write_embeddings(std::ostream& out, const std::vector<EmbeddingRecord>& records, std::uint32_t dim) {
    std::unordered_set<std::string_view> seen;
    for (const auto& r : records) {
        if (r.vector.size() != dim) throw ConfigError("embedding '" + r.id + "' has wrong dimension");
        if (r.id.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("embedding id too long");
        if (!seen.insert(r.id).second) throw ConfigError("duplicate embedding id '" + r.id + "'");
    }
    out.write(kEmbeddingMagic, 4);
    binio::put_u32(out, kEmbeddingVersion);
    binio::put_u32(out, dim);
    binio::put_u64(out, records.size());
    for (const auto& r : records) {
        binio::put_u16(out, static_cast<std::uint16_t>(r.id.size()));
        out.write(r.id.data(), static_cast<std::streamsize>(r.id.size()));
        for (float v : r.vector) binio::put_f32(out, v);
    }
    if (!out) throw Error("failed writing embeddings");
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records,
                      std::uint32_t dim) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_embeddings(out, records, dim);
}

EmbeddingFile read_embeddings(std::istream& in) {
    binio::expect_magic(in, kEmbeddingMagic, "embedding file");
    const auto version = binio::get_u32(in);
    if (version != kEmbeddingVersion) throw FormatError("unsupported embedding file version " + std::to_string(version));
    EmbeddingFile file;
    file.dim = binio::get_u32(in);
    const auto count = binio::get_u64(in);
    if (count > 0 && file.dim == 0) throw FormatError("embedding file has records but dim 0");
    std::unordered_set<std::string> seen;
    file.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t i = 0; i < count; ++i) {
        EmbeddingRecord r;
        r.id.resize(binio::get_u16(in));
        binio::get_bytes(in, r.id.data(), r.id.size());
        r.vector.resize(file.dim);
        for (auto& v : r.vector) {
            v = binio::get_f32(in);
            if (!std::isfinite(v)) throw FormatError("non-finite component in embedding '" + r.id + "'");
        }
        if (!seen.insert(r.id).second) throw FormatError("duplicate embedding id '" + r.id + "'");
        file.records.push_back(std::move(r));
    }
    return file;
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return read_embeddings(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace regen
