#include "auki/field_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace auki {
namespace {

void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw Error("field binary: truncated header");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
    return v;
}

} // namespace

void write_f64_le(std::ostream& os, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) write_u64_le(os, std::bit_cast<std::uint64_t>(data[i]));
}

void read_f64_le(std::istream& is, double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(read_u64_le(is));
}

void write_field_binary(std::ostream& os, const Field& f) {
    write_u64_le(os, f.grid.nx);
    write_u64_le(os, f.grid.ny);
    write_f64_le(os, f.values.data(), static_cast<std::size_t>(f.values.size()));
    if (!os) throw Error("field binary: write failed");
}

Field read_field_binary(std::istream& is) {
    const auto nx = read_u64_le(is);
    const auto ny = read_u64_le(is);
    if (nx < 2 || ny < 2 || nx > (1u << 20) || ny > (1u << 20)) throw Error("field binary: bad grid header");
    Field f(Grid2D(nx, ny));
    read_f64_le(is, f.values.data(), static_cast<std::size_t>(f.values.size()));
    return f;
}

void write_field_csv(std::ostream& os, const Field& f) {
    os << std::setprecision(17);
    for (std::size_t j = 0; j < f.grid.ny; ++j) {
        for (std::size_t i = 0; i < f.grid.nx; ++i) {
            if (i) os << ',';
            os << f.at(i, j);
        }
        os << '\n';
    }
    if (!os) throw Error("field csv: write failed");
}

Field read_field_csv(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw Error("field csv: unparseable value '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw Error("field csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2 || rows.front().size() < 2) throw Error("field csv: need at least a 2x2 grid");
    Field f(Grid2D(rows.front().size(), rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t i = 0; i < rows[j].size(); ++i) f.at(i, j) = rows[j][i];
    return f;
}

void save_field(const std::filesystem::path& path, const Field& f) {
    if (path.extension() == ".csv") {
        std::ofstream os(path);
        if (!os) throw Error("cannot open " + path.string());
        write_field_csv(os, f);
    } else {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot open " + path.string());
        write_field_binary(os, f);
    }
}

Field load_field(const std::filesystem::path& path) {
    if (path.extension() == ".csv") {
        std::ifstream is(path);
        if (!is) throw Error("cannot open " + path.string());
        return read_field_csv(is);
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return read_field_binary(is);
}

} // namespace auki
