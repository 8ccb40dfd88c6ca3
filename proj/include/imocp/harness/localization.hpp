#pragma once

// UJIIndoorLoc-style RSSI fingerprints: CSV ingestion, feature scaling and a
// seeded synthetic surrogate with the same schema.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imocp/core.hpp"
#include "imocp/feedback.hpp"

namespace imocp::harness {

inline constexpr std::size_t kAccessPoints = 520;
inline constexpr double kNotDetected = 100.0;

class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct LocalizationSample {
    std::vector<double> rssi;  // kAccessPoints values
    double longitude = 0.0;
    double latitude = 0.0;
    int building_id = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::string strip_quotes(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline double parse_number(const std::string& field, std::size_t row, const std::string& column) {
    const std::string s = strip_quotes(field);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw ParseError("row " + std::to_string(row) + ": column " + column + " is not a number: '" + field + "'");
    return v;
}

inline std::string wap_column(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "WAP%03zu", i + 1);
    return buf;
}

}  // namespace detail

// Reads WAP001..WAP520, LONGITUDE, LATITUDE, BUILDINGID; other columns are
// ignored. RSSI 100 (access point not detected) becomes `floor_dbm`. Rows are
// numbered from 1 after the header.
inline std::vector<LocalizationSample> read_ujiindoorloc(std::istream& in, double floor_dbm = -105.0) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header line");
    const auto header = detail::split_csv_line(line);

    auto find_column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::strip_quotes(header[i]) == name) return i;
        throw ParseError("missing column " + name);
    };
    std::vector<std::size_t> wap_idx(kAccessPoints);
    for (std::size_t i = 0; i < kAccessPoints; ++i) wap_idx[i] = find_column(detail::wap_column(i));
    const std::size_t lon_idx = find_column("LONGITUDE");
    const std::size_t lat_idx = find_column("LATITUDE");
    const std::size_t bld_idx = find_column("BUILDINGID");

    std::vector<LocalizationSample> samples;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
        LocalizationSample s;
        s.rssi.resize(kAccessPoints);
        for (std::size_t i = 0; i < kAccessPoints; ++i) {
            const double v = detail::parse_number(fields[wap_idx[i]], row, detail::wap_column(i));
            s.rssi[i] = (v == kNotDetected) ? floor_dbm : v;
        }
        s.longitude = detail::parse_number(fields[lon_idx], row, "LONGITUDE");
        s.latitude = detail::parse_number(fields[lat_idx], row, "LATITUDE");
        const double b = detail::parse_number(fields[bld_idx], row, "BUILDINGID");
        if (b != std::floor(b) || b < 0 || b > 2)
            throw ParseError("row " + std::to_string(row) + ": BUILDINGID must be 0, 1 or 2");
        s.building_id = static_cast<int>(b);
        samples.push_back(std::move(s));
    }
    return samples;
}

inline std::vector<LocalizationSample> load_ujiindoorloc(const std::string& path, double floor_dbm = -105.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_ujiindoorloc(in, floor_dbm);
}

// Maps the not-detected sentinel to `floor_dbm` (the loader does this on read).
inline void apply_detection_floor(std::vector<LocalizationSample>& samples, double floor_dbm = -105.0) {
    for (auto& s : samples)
        for (double& v : s.rssi)
            if (v == kNotDetected) v = floor_dbm;
}

// Per-feature min-max scaling to [0,1] with statistics from the training set.
class FeatureScaler {
public:
    static FeatureScaler fit(std::span<const LocalizationSample> train) {
        if (train.empty()) throw ValidationError("cannot fit a scaler on an empty set");
        const std::size_t m = train.front().rssi.size();
        FeatureScaler s;
        s.lo_.assign(m, std::numeric_limits<double>::infinity());
        s.hi_.assign(m, -std::numeric_limits<double>::infinity());
        for (const auto& x : train)
            for (std::size_t j = 0; j < m; ++j) {
                s.lo_[j] = std::min(s.lo_[j], x.rssi[j]);
                s.hi_[j] = std::max(s.hi_[j], x.rssi[j]);
            }
        return s;
    }

    // Constant training features map to 0.
    void apply(LocalizationSample& x) const {
        for (std::size_t j = 0; j < x.rssi.size(); ++j) {
            const double range = hi_[j] - lo_[j];
            x.rssi[j] = range > 0 ? (x.rssi[j] - lo_[j]) / range : 0.0;
        }
    }

private:
    std::vector<double> lo_, hi_;
};

// Synthetic stand-in for UJIIndoorLoc used when the public CSV is absent: three
// adjacent buildings, 520 access points, log-distance path loss with Gaussian
// shadowing, inter-building wall attenuation and a -100 dBm detection floor
// (weaker signals are reported as 100). Coordinates are in the dataset's
// projected-metre range.
struct SurrogateOptions {
    std::vector<std::size_t> samples_per_building = {3000, 4000, 10000};
    std::uint64_t seed = 2025;
    double shadowing_db = 4.0;
};

inline std::vector<LocalizationSample> generate_surrogate(const SurrogateOptions& opt) {
    struct Box {
        double x0, x1, y0, y1;
    };
    const Box buildings[3] = {{-7680, -7560, 4864900, 4865000},
                              {-7560, -7440, 4864860, 4864960},
                              {-7440, -7300, 4864780, 4864900}};
    rng::CounterEngine eng(opt.seed, rng::kSplitStream + 100);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> shadow(0.0, opt.shadowing_db);

    struct Ap {
        double x, y;
        int building;
        double power;
    };
    std::vector<Ap> aps(kAccessPoints);
    for (std::size_t i = 0; i < kAccessPoints; ++i) {
        const int b = static_cast<int>(i % 3);
        const Box& box = buildings[b];
        aps[i] = {box.x0 + (box.x1 - box.x0) * unit(eng), box.y0 + (box.y1 - box.y0) * unit(eng), b,
                  -35.0 - 10.0 * unit(eng)};
    }

    std::vector<LocalizationSample> samples;
    for (int b = 0; b < 3; ++b) {
        const std::size_t n = b < static_cast<int>(opt.samples_per_building.size()) ? opt.samples_per_building[b] : 0;
        const Box& box = buildings[b];
        for (std::size_t k = 0; k < n; ++k) {
            LocalizationSample s;
            s.building_id = b;
            s.longitude = box.x0 + (box.x1 - box.x0) * unit(eng);
            s.latitude = box.y0 + (box.y1 - box.y0) * unit(eng);
            s.rssi.resize(kAccessPoints);
            for (std::size_t i = 0; i < kAccessPoints; ++i) {
                const double d = std::hypot(aps[i].x - s.longitude, aps[i].y - s.latitude);
                double rssi = aps[i].power - 28.0 * std::log10(1.0 + d) + shadow(eng);
                if (aps[i].building != b) rssi -= 15.0;
                s.rssi[i] = rssi < -100.0 ? kNotDetected : std::round(rssi);
            }
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

inline void write_ujiindoorloc(std::ostream& out, std::span<const LocalizationSample> samples) {
    for (std::size_t i = 0; i < kAccessPoints; ++i) out << detail::wap_column(i) << ',';
    out << "LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n";
    char buf[64];
    for (const auto& s : samples) {
        for (double v : s.rssi) out << v << ',';
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,0,%d\n", s.longitude, s.latitude, s.building_id);
        out << buf;
    }
}

}  // namespace imocp::harness
