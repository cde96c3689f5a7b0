#pragma once

// Field persistence. Binary layout: nx and ny as little-endian uint64,
// followed by nx*ny little-endian float64 values, x-fastest. CSV layout:
// one row per y-index, nx comma-separated values per row.

#include "auki/grf.hpp"

#include <filesystem>
#include <iosfwd>

namespace auki {

void write_field_binary(std::ostream& os, const Field& f);
Field read_field_binary(std::istream& is);

void write_field_csv(std::ostream& os, const Field& f);
Field read_field_csv(std::istream& is);

void save_field(const std::filesystem::path& path, const Field& f);
/// Dispatches on extension: ".csv" is CSV, anything else is binary.
Field load_field(const std::filesystem::path& path);

/// Little-endian float64 array helpers shared with checkpoint files.
void write_f64_le(std::ostream& os, const double* data, std::size_t n);
void read_f64_le(std::istream& is, double* data, std::size_t n);

} // namespace auki
