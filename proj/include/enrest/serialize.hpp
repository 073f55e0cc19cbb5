// Binary tensor records. All integers little-endian; payloads are raw IEEE
// values in the tensor dtype. Readers validate magic, version and dtype tags
// and throw IOError on anything malformed or truncated.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "enrest/tensor.hpp"

namespace enrest::io {

void write_u8(std::ostream& s, std::uint8_t v);
void write_u16(std::ostream& s, std::uint16_t v);
void write_u32(std::ostream& s, std::uint32_t v);
void write_u64(std::ostream& s, std::uint64_t v);
void write_f64(std::ostream& s, double v);
void write_bytes(std::ostream& s, const void* p, std::size_t n);

std::uint8_t read_u8(std::istream& s);
std::uint16_t read_u16(std::istream& s);
std::uint32_t read_u32(std::istream& s);
std::uint64_t read_u64(std::istream& s);
double read_f64(std::istream& s);
void read_bytes(std::istream& s, void* p, std::size_t n);

// One tensor record: "ERTF", version, dtype, rank, u32 extents, payload.
void save_tensor(std::ostream& s, const Tensor& t);
Tensor load_tensor(std::istream& s);

void save_tensor_file(const std::string& path, const Tensor& t);
Tensor load_tensor_file(const std::string& path);

}  // namespace enrest::io
