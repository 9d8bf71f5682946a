#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace regen {

struct EmbeddingRecord {
    std::string id;
    std::vector<float> vector;

    bool operator==(const EmbeddingRecord&) const = default;
};

// Binary embedding file, all integers little-endian:
//   "RGEN" | u32 version=1 | u32 dim | u64 count
//   count x ( u16 id_len | id bytes | dim x f32 )
inline constexpr char kEmbeddingMagic[4] = {'R', 'G', 'E', 'N'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

// dim is written to the header even when records is empty.
void write_embeddings(std::ostream& out, const std::vector<EmbeddingRecord>& records, std::uint32_t dim);
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records,
                      std::uint32_t dim);

struct EmbeddingFile {
    std::uint32_t dim = 0;
    std::vector<EmbeddingRecord> records;
};

// Throws FormatError on bad magic/version, truncation, non-finite components
// or duplicate ids.
EmbeddingFile read_embeddings(std::istream& in);
EmbeddingFile read_embeddings(const std::filesystem::path& path);

namespace binio {

// Little-endian primitives shared by every binary format in the project.
void put_u16(std::ostream& out, std::uint16_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
void put_string(std::ostream& out, const std::string& s);  // u32 length prefix

std::uint16_t get_u16(std::istream& in);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);
double get_f64(std::istream& in);
std::string get_string(std::istream& in);
void get_bytes(std::istream& in, char* dst, std::size_t n);

void expect_magic(std::istream& in, const char (&magic)[4], const char* what);

}  // namespace binio

}  // namespace regen
