#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "heatgrid/date.hpp"
#include "heatgrid/error.hpp"
#include "heatgrid/text.hpp"

namespace heatgrid {

inline constexpr std::size_t kGridSize = 32;

enum class GridUnits { kelvin, normalized };

inline const char* grid_units_name(GridUnits u) {
    return u == GridUnits::kelvin ? "kelvin" : "normalized";
}

inline GridUnits grid_units_from_name(const std::string& name) {
    if (name == "kelvin") return GridUnits::kelvin;
    if (name == "normalized") return GridUnits::normalized;
    throw Error(ErrorCode::parse, "unknown grid units '" + name + "' (kelvin|normalized)");
}

// One 32x32 raster with an invalid-pixel mask: a thermal scene, a predicted
// map, or a risk layer.
struct GridField {
    Date date;
    std::size_t height = kGridSize;
    std::size_t width = kGridSize;
    std::vector<float> values;        // row-major; invalid cells hold 0
    std::vector<std::uint8_t> valid;  // 1 = observed
    GridUnits units = GridUnits::kelvin;

    static GridField blank(Date date, GridUnits units) {
        GridField g;
        g.date = date;
        g.units = units;
        g.values.assign(kGridSize * kGridSize, 0.0f);
        g.valid.assign(kGridSize * kGridSize, 1);
        return g;
    }

    std::size_t cell_count() const { return height * width; }

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += v;
        return n;
    }

    double invalid_fraction() const {
        return 1.0 - static_cast<double>(valid_count()) / static_cast<double>(cell_count());
    }

    float& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
    float at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
    bool is_valid(std::size_t row, std::size_t col) const { return valid[row * width + col]; }
};

// .grid text format:
//   GRID <height> <width> <units>
//   DATE <YYYY-MM-DD>
//   <height> lines of <width> whitespace-separated values, NA for invalid
inline GridField load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file " + path.string());
    const std::string name = path.string();

    auto fail = [&](std::size_t line, const std::string& what) -> IngestError {
        return IngestError(name + ":" + std::to_string(line) + ": " + what);
    };

    std::string line;
    if (!std::getline(in, line)) throw fail(1, "missing GRID header");
    {
        std::istringstream header(line);
        std::string tag, units;
        std::size_t h = 0, w = 0;
        if (!(header >> tag >> h >> w >> units) || tag != "GRID") {
            throw fail(1, "malformed header '" + line + "' (expected GRID <h> <w> <units>)");
        }
        if (h != kGridSize || w != kGridSize) {
            throw fail(1, "grid extents " + std::to_string(h) + "x" + std::to_string(w) +
                              ", expected exactly 32x32");
        }
        GridField g;
        g.units = grid_units_from_name(units);

        if (!std::getline(in, line)) throw fail(2, "missing DATE line");
        std::istringstream dl(line);
        std::string dtag, dval;
        if (!(dl >> dtag >> dval) || dtag != "DATE") {
            throw fail(2, "malformed date line '" + line + "'");
        }
        g.date = Date::from_iso(dval);

        g.values.assign(kGridSize * kGridSize, 0.0f);
        g.valid.assign(kGridSize * kGridSize, 0);
        for (std::size_t row = 0; row < kGridSize; ++row) {
            if (!std::getline(in, line)) {
                throw fail(3 + row, "unexpected end of file: expected 32 value rows");
            }
            std::istringstream vals(line);
            std::string token;
            for (std::size_t col = 0; col < kGridSize; ++col) {
                if (!(vals >> token)) {
                    throw fail(3 + row, "row has fewer than 32 values (stopped at column " +
                                            std::to_string(col + 1) + ")");
                }
                if (token == "NA") continue;  // cell stays invalid
                double v;
                try {
                    v = parse_double(token);
                } catch (const Error&) {
                    throw fail(3 + row, "unparseable value '" + token + "' at column " +
                                            std::to_string(col + 1));
                }
                if (!std::isfinite(v)) {
                    throw fail(3 + row, "non-finite value at column " + std::to_string(col + 1));
                }
                g.at(row, col) = static_cast<float>(v);
                g.valid[row * kGridSize + col] = 1;
            }
            std::string extra;
            if (vals >> extra) {
                throw fail(3 + row, "row has more than 32 values");
            }
        }
        return g;
    }
}

inline void save_grid(const GridField& g, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "GRID " << g.height << " " << g.width << " " << grid_units_name(g.units) << "\n";
    out << "DATE " << g.date.to_iso() << "\n";
    for (std::size_t row = 0; row < g.height; ++row) {
        for (std::size_t col = 0; col < g.width; ++col) {
            if (col) out << " ";
            if (g.is_valid(row, col)) {
                out << num_to_string(g.at(row, col));
            } else {
                out << "NA";
            }
        }
        out << "\n";
    }
    // write-temp-then-rename so partially written files never surface
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream file(tmp, std::ios::binary);
        if (!file) throw IoError("cannot write " + tmp.string());
        file << out.str();
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace heatgrid
