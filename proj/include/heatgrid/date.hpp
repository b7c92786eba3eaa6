#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>

#include "heatgrid/error.hpp"

namespace heatgrid {

// Calendar day stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    Date() = default;
    explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day) {
        using namespace std::chrono;
        year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
        if (!ymd.ok()) {
            throw Error(ErrorCode::parse, "invalid calendar date " + std::to_string(year) + "-" +
                                              std::to_string(month) + "-" + std::to_string(day));
        }
        return Date(static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count()));
    }

    // Parses strict YYYY-MM-DD.
    static Date from_iso(const std::string& text) {
        int y = 0;
        unsigned m = 0, d = 0;
        char tail = 0;
        if (text.size() != 10 ||
            std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
            throw Error(ErrorCode::parse, "expected YYYY-MM-DD date, got '" + text + "'");
        }
        return from_ymd(y, m, d);
    }

    std::string to_iso() const {
        using namespace std::chrono;
        year_month_day ymd{sys_days{days{days_}}};
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    std::int32_t days_since_epoch() const { return days_; }
    Date next_day() const { return Date(days_ + 1); }

    friend Date operator+(Date a, std::int32_t days) { return Date(a.days_ + days); }
    friend std::int32_t operator-(Date a, Date b) { return a.days_ - b.days_; }
    auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

}  // namespace heatgrid
