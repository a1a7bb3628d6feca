#pragma once

// Series ingestion: CSV reading and log-return construction at daily,
// weekly or monthly sampling.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace heavytail {

enum class Frequency { Daily, Weekly, Monthly };
enum class SeriesKind { Prices, Returns };

inline std::string frequency_name(Frequency f) {
    switch (f) {
        case Frequency::Daily: return "daily";
        case Frequency::Weekly: return "weekly";
        case Frequency::Monthly: return "monthly";
    }
    return "?";
}

inline Frequency parse_frequency(std::string_view s) {
    if (s == "daily") return Frequency::Daily;
    if (s == "weekly") return Frequency::Weekly;
    if (s == "monthly") return Frequency::Monthly;
    throw DomainError("unknown frequency '" + std::string(s) +
                      "' (expected daily, weekly or monthly)");
}

struct SeriesInput {
    std::string id;
    std::vector<double> values;
    SeriesKind kind = SeriesKind::Returns;
    Frequency frequency = Frequency::Daily;
    /// Days since 1970-01-01, one per value; present for Prices read from a
    /// date,price file.
    std::vector<std::int64_t> days;
};

// ---------------------------------------------------------------------------
// Dates

/// Days since 1970-01-01 of a proleptic Gregorian date (H. Hinnant's
/// days_from_civil).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace detail {

constexpr bool is_leap(std::int64_t y) noexcept {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

constexpr unsigned days_in_month(std::int64_t y, unsigned m) noexcept {
    constexpr unsigned len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : len[m - 1];
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace detail

/// Parses YYYY-MM-DD. Returns days since 1970-01-01.
inline std::int64_t parse_iso_date(std::string_view s, std::size_t row = 0) {
    s = detail::trim(s);
    auto bad = [&] { return DataError("invalid ISO-8601 date '" + std::string(s) + "'", row); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
    auto num = [&](std::size_t pos, std::size_t len) {
        unsigned v = 0;
        const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        if (ec != std::errc() || ptr != s.data() + pos + len) throw bad();
        return v;
    };
    const std::int64_t y = num(0, 4);
    const unsigned m = num(5, 2), d = num(8, 2);
    if (m < 1 || m > 12 || d < 1 || d > detail::days_in_month(y, m)) throw bad();
    return days_from_civil(y, m, d);
}

/// Monday-based week index; 1970-01-01 was a Thursday.
inline std::int64_t week_key(std::int64_t days) {
    const std::int64_t t = days + 3;
    return t >= 0 ? t / 7 : -((-t + 6) / 7);
}

inline std::int64_t month_key(std::int64_t days) {
    // civil_from_days, year and month only.
    const std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
    return y * 12 + (m - 1);
}

// ---------------------------------------------------------------------------
// Returns

/// r_i = ln(p_{i+1} / p_i). For Weekly and Monthly, `period` gives a
/// nondecreasing period key per price and the last price of each period is
/// used. A nonpositive price raises DataError with its 1-based position.
inline std::vector<double> log_returns(std::span<const double> prices, Frequency freq,
                                       std::span<const std::int64_t> period = {}) {
    for (std::size_t i = 0; i < prices.size(); ++i)
        if (!(prices[i] > 0.0) || !std::isfinite(prices[i]))
            throw DataError("price must be positive and finite", i + 1);

    std::vector<double> sampled;
    if (freq == Frequency::Daily) {
        sampled.assign(prices.begin(), prices.end());
    } else {
        if (period.size() != prices.size())
            throw DomainError("log_returns: weekly and monthly sampling need a period key per price");
        for (std::size_t i = 0; i < prices.size(); ++i) {
            if (i + 1 < prices.size() && period[i + 1] < period[i])
                throw DataError("period keys must be nondecreasing", i + 2);
            if (i + 1 == prices.size() || period[i + 1] != period[i]) sampled.push_back(prices[i]);
        }
    }
    if (sampled.size() < 2) throw DataError("need at least two sampled prices");

    std::vector<double> r(sampled.size() - 1);
    for (std::size_t i = 0; i + 1 < sampled.size(); ++i) r[i] = std::log(sampled[i + 1] / sampled[i]);
    return r;
}

/// Period keys for a frequency from day numbers.
inline std::vector<std::int64_t> period_keys(std::span<const std::int64_t> days, Frequency freq) {
    std::vector<std::int64_t> keys(days.size());
    for (std::size_t i = 0; i < days.size(); ++i)
        keys[i] = freq == Frequency::Weekly ? week_key(days[i])
                  : freq == Frequency::Monthly ? month_key(days[i])
                                               : days[i];
    return keys;
}

/// Returns at the requested frequency. Return series carry no dates, so
/// only Daily applies to them.
inline std::vector<double> series_returns(const SeriesInput& s, Frequency freq) {
    if (s.kind == SeriesKind::Returns) {
        if (freq != Frequency::Daily)
            throw DomainError("a return series has no dates; only daily frequency applies");
        return s.values;
    }
    if (freq == Frequency::Daily) return log_returns(s.values, freq);
    const auto keys = period_keys(s.days, freq);
    return log_returns(s.values, freq, keys);
}

/// Header row required: a single `return` column, or `date,price` with
/// ISO-8601 dates in strictly increasing order. Errors carry the 1-based
/// file line.
inline SeriesInput parse_series_csv(std::string_view text, std::string id = "series") {
    SeriesInput s;
    s.id = std::move(id);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    int price_col = -1, date_col = -1, return_col = -1;
    std::size_t columns = 0;

    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = detail::trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF")
            line = line.substr(3);

        const auto cells = detail::split_commas(line);
        if (!have_header) {
            have_header = true;
            columns = cells.size();
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (cells[c] == "date") date_col = static_cast<int>(c);
                else if (cells[c] == "price") price_col = static_cast<int>(c);
                else if (cells[c] == "return") return_col = static_cast<int>(c);
                else throw DataError("unknown column '" + std::string(cells[c]) + "'", line_no);
            }
            if (return_col >= 0 && columns == 1) {
                s.kind = SeriesKind::Returns;
            } else if (date_col >= 0 && price_col >= 0 && columns == 2) {
                s.kind = SeriesKind::Prices;
            } else {
                throw DataError("header must be 'return' or 'date,price'", line_no);
            }
            continue;
        }
        if (cells.size() != columns)
            throw DataError("expected " + std::to_string(columns) + " fields, found " +
                                std::to_string(cells.size()),
                            line_no);
        if (s.kind == SeriesKind::Returns) {
            const auto v = detail::parse_real(cells[static_cast<std::size_t>(return_col)]);
            if (!v || !std::isfinite(*v)) throw DataError("malformed return value", line_no);
            s.values.push_back(*v);
        } else {
            const auto day = parse_iso_date(cells[static_cast<std::size_t>(date_col)], line_no);
            const auto v = detail::parse_real(cells[static_cast<std::size_t>(price_col)]);
            if (!v || !std::isfinite(*v)) throw DataError("malformed price value", line_no);
            if (!(*v > 0.0)) throw DataError("price must be positive", line_no);
            if (!s.days.empty() && day <= s.days.back())
                throw DataError("dates must be strictly increasing", line_no);
            s.days.push_back(day);
            s.values.push_back(*v);
        }
        if (nl == text.size()) break;
    }
    if (!have_header) throw DataError("missing header row", 1);
    if (s.kind == SeriesKind::Prices && s.values.size() < 2)
        throw DataError("a price series needs at least two rows");
    return s;
}

inline SeriesInput read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_series_csv(text, path.stem().string());
}

} // namespace heavytail
