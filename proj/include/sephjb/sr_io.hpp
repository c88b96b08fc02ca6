#pragma once

// Files holding a separated vector or operator.
//
// Binary layout (little-endian):
//   "SEPHJBSR"  8 bytes
//   u32 version = 1, u32 kind (0 vector, 1 operator), u32 d
//   u64 M_i for each dimension, u64 rank
//   f64 scales[rank]
//   vector:   for each dimension, the M_i x rank factor matrix, row by row
//   operator: for each term and dimension, the M_i x M_i matrix, row by row
//
// The text layout carries the same fields, one header line per field, with
// every number printed with 17 significant digits.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "sephjb/sep_tensor.hpp"

namespace sephjb {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SrFormat { binary, text };
enum class SrKind { vector, op };

struct SrContent {
  SrKind kind = SrKind::vector;
  SepVector vector;
  SepOperator op;
};

std::string encode_sr(const SepVector& f, SrFormat format);
std::string encode_sr(const SepOperator& A, SrFormat format);
/// Detects the format from the first bytes. Throws IoError on malformed input.
SrContent decode_sr(const std::string& bytes);

void write_sr(const std::filesystem::path& path, const SepVector& f, SrFormat format);
void write_sr(const std::filesystem::path& path, const SepOperator& A, SrFormat format);
SrContent read_sr(const std::filesystem::path& path);

/// Writes to a temporary file in the same directory, then renames it over
/// `path`. Throws IoError.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sephjb
