#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "heatgrid/date.hpp"
#include "heatgrid/error.hpp"
#include "heatgrid/text.hpp"

namespace heatgrid {

// Canonical daily variables, in table column order.
inline constexpr std::array<const char*, 10> kForcingVariables = {
    "temperature_2m_mean",
    "temperature_2m_max",
    "temperature_2m_min",
    "dew_point_2m_mean",
    "precipitation_sum",
    "shortwave_radiation_sum",
    "relative_humidity_2m_mean",
    "cloud_cover_mean",
    "wind_direction_10m_dominant",
    "wind_speed_10m_mean",
};

inline int forcing_variable_index(std::string_view name) {
    for (std::size_t i = 0; i < kForcingVariables.size(); ++i) {
        if (name == kForcingVariables[i]) return static_cast<int>(i);
    }
    return -1;
}

// One (date, location) record. Missing values are NaN; alignment in the
// pipeline drops incomplete dates, so nothing downstream sees a NaN.
struct DailyForcing {
    Date date;
    std::string location_id;
    std::array<double, 10> values{};

    DailyForcing() { values.fill(std::numeric_limits<double>::quiet_NaN()); }

    bool has(int index) const { return std::isfinite(values[static_cast<std::size_t>(index)]); }

    bool complete(const std::vector<std::string>& variables) const {
        for (const auto& v : variables) {
            int idx = forcing_variable_index(v);
            if (idx < 0 || !has(idx)) return false;
        }
        return true;
    }
};

namespace detail {

inline void validate_forcing(const DailyForcing& r, const std::string& context) {
    const auto& v = r.values;
    auto bad = [&](const std::string& what) -> Error {
        return IngestError(context + ": " + what + " (date " + r.date.to_iso() + ", location " +
                           r.location_id + ")");
    };
    if (std::isfinite(v[6]) && (v[6] < 0.0 || v[6] > 100.0)) {
        throw bad("relative humidity outside [0,100]");
    }
    if (std::isfinite(v[8]) && (v[8] < 0.0 || v[8] >= 360.0)) {
        throw bad("wind direction outside [0,360)");
    }
    if (std::isfinite(v[4]) && v[4] < 0.0) {
        throw bad("negative precipitation");
    }
    if (std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) &&
        !(v[2] <= v[0] && v[0] <= v[1])) {
        throw bad("temperature ordering violated (min <= mean <= max)");
    }
}

inline std::string forcing_csv_header() {
    std::string h = "date,location_id";
    for (const char* v : kForcingVariables) {
        h += ",";
        h += v;
    }
    return h;
}

}  // namespace detail

inline std::vector<DailyForcing> load_forcing_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open forcing table " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError(path.string() + ":1: empty forcing table");
    }
    if (trim(line) != detail::forcing_csv_header()) {
        throw IngestError(path.string() + ":1: unexpected header (expected '" +
                          detail::forcing_csv_header() + "')");
    }
    std::vector<DailyForcing> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        auto stripped = trim(line);
        if (stripped.empty()) continue;
        auto fields = split(stripped, ',');
        if (fields.size() != 12) {
            throw IngestError(path.string() + ":" + std::to_string(lineno) + ": expected 12 " +
                              "fields, found " + std::to_string(fields.size()));
        }
        DailyForcing r;
        r.date = Date::from_iso(std::string(fields[0]));
        r.location_id = std::string(fields[1]);
        if (r.location_id.empty()) {
            throw IngestError(path.string() + ":" + std::to_string(lineno) +
                              ": empty location_id");
        }
        for (std::size_t i = 0; i < 10; ++i) {
            auto cell = trim(fields[i + 2]);
            if (cell.empty()) continue;  // missing marker
            try {
                r.values[i] = parse_double(cell);
            } catch (const Error&) {
                throw IngestError(path.string() + ":" + std::to_string(lineno) +
                                  ": unparseable value '" + std::string(cell) + "' for " +
                                  kForcingVariables[i]);
            }
        }
        detail::validate_forcing(r, path.string() + ":" + std::to_string(lineno));
        records.push_back(std::move(r));
    }
    return records;
}

// Writes the canonical table sorted by (date, location_id). Values are the
// shortest round-trip decimal form; missing values are empty cells.
inline void save_forcing_csv(std::vector<DailyForcing> records,
                             const std::filesystem::path& path) {
    if (records.empty()) {
        throw ContractError("refusing to write an empty forcing table");
    }
    std::sort(records.begin(), records.end(), [](const DailyForcing& a, const DailyForcing& b) {
        if (a.date != b.date) return a.date < b.date;
        return a.location_id < b.location_id;
    });
    std::ostringstream out;
    out << detail::forcing_csv_header() << "\n";
    for (const auto& r : records) {
        out << r.date.to_iso() << "," << r.location_id;
        for (double v : r.values) {
            out << ",";
            if (std::isfinite(v)) out << num_to_string(v);
        }
        out << "\n";
    }
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
