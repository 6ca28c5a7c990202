#pragma once

#include "data.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpred {

/// Half-open interval [lo, hi) worth `points`.
struct MewsBand {
    double lo;
    double hi;
    int points;

    friend bool operator==(const MewsBand&, const MewsBand&) = default;
};

enum class MewsParameter { SystolicBP, HeartRate, RespiratoryRate, Temperature };

inline constexpr std::array<MewsParameter, 4> kMewsParameters = {MewsParameter::SystolicBP, MewsParameter::HeartRate,
                                                                 MewsParameter::RespiratoryRate, MewsParameter::Temperature};

constexpr VitalKind vital_for(MewsParameter p) noexcept {
    switch (p) {
        case MewsParameter::SystolicBP: return VitalKind::SystolicBP;
        case MewsParameter::HeartRate: return VitalKind::HeartRate;
        case MewsParameter::RespiratoryRate: return VitalKind::RespiratoryRate;
        case MewsParameter::Temperature: return VitalKind::Temperature;
    }
    return VitalKind::HeartRate;
}

inline const char* parameter_key(MewsParameter p) noexcept {
    switch (p) {
        case MewsParameter::SystolicBP: return "systolic_bp";
        case MewsParameter::HeartRate: return "heart_rate";
        case MewsParameter::RespiratoryRate: return "respiratory_rate";
        case MewsParameter::Temperature: return "temperature";
    }
    return "";
}

struct MewsBands {
    std::array<std::vector<MewsBand>, 4> bands;
    int alarm_threshold = 4;

    const std::vector<MewsBand>& of(MewsParameter p) const { return bands[static_cast<std::size_t>(p)]; }

    /// Bands must tile (-inf, inf) in ascending order with points in 0..3.
    void validate() const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        for (MewsParameter p : kMewsParameters) {
            const auto& list = of(p);
            const std::string who = std::string("MewsBands[") + parameter_key(p) + "]: ";
            if (list.empty()) throw std::invalid_argument(who + "no bands");
            if (list.front().lo != -inf || list.back().hi != inf) throw std::invalid_argument(who + "bands must cover all values");
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (!(list[i].lo < list[i].hi)) throw std::invalid_argument(who + "empty band");
                if (list[i].points < 0 || list[i].points > 3) throw std::invalid_argument(who + "points must lie in 0..3");
                if (i > 0 && list[i].lo != list[i - 1].hi) throw std::invalid_argument(who + "bands must be contiguous and disjoint");
            }
        }
        if (alarm_threshold < 0) throw std::invalid_argument("MewsBands: alarm_threshold must be >= 0");
    }
};

namespace detail {

inline std::vector<MewsBand> bands_from_cuts(std::vector<double> cuts, std::vector<int> points) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<MewsBand> out;
    double lo = -inf;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double hi = i < cuts.size() ? cuts[i] : inf;
        out.push_back({lo, hi, points[i]});
        lo = hi;
    }
    return out;
}

}  // namespace detail

/// SBP <=70:3, 71-80:2, 81-100:1, 101-199:0, >=200:2; HR <=40:2, 41-50:1, 51-100:0, 101-110:1,
/// 111-129:2, >=130:3; RR <9:2, 9-14:0, 15-20:1, 21-29:2, >=30:3; Temp <35:2, 35-38.4:0, >=38.5:2.
inline MewsBands default_mews_bands() {
    MewsBands b;
    b.bands[static_cast<std::size_t>(MewsParameter::SystolicBP)] = detail::bands_from_cuts({71, 81, 101, 200}, {3, 2, 1, 0, 2});
    b.bands[static_cast<std::size_t>(MewsParameter::HeartRate)] = detail::bands_from_cuts({41, 51, 101, 111, 130}, {2, 1, 0, 1, 2, 3});
    b.bands[static_cast<std::size_t>(MewsParameter::RespiratoryRate)] = detail::bands_from_cuts({9, 15, 21, 30}, {2, 0, 1, 2, 3});
    b.bands[static_cast<std::size_t>(MewsParameter::Temperature)] = detail::bands_from_cuts({35, 38.5}, {2, 0, 2});
    return b;
}

/// Latest value per vital kind.
using VitalSnapshot = std::array<std::optional<double>, kVitalKindCount>;

inline VitalSnapshot latest_snapshot(const PatientStay& stay) {
    VitalSnapshot s;
    for (VitalKind k : kAllVitalKinds) {
        const auto& series = stay.series(k);
        if (!series.empty()) s[index_of(k)] = series.back().value;
    }
    return s;
}

inline int band_points(const std::vector<MewsBand>& bands, double value) {
    for (const auto& b : bands)
        if (value >= b.lo && value < b.hi) return b.points;
    throw std::invalid_argument("mews: value " + std::to_string(value) + " not covered by any band");
}

inline bool has_scored_parameter(const VitalSnapshot& snapshot) {
    for (MewsParameter p : kMewsParameters)
        if (snapshot[index_of(vital_for(p))]) return true;
    return false;
}

inline int mews_score(const VitalSnapshot& snapshot, const MewsBands& bands) {
    if (!has_scored_parameter(snapshot)) throw std::invalid_argument("mews_score: all scored parameters are missing");
    int total = 0;
    for (MewsParameter p : kMewsParameters)
        if (const auto& v = snapshot[index_of(vital_for(p))]) total += band_points(bands.of(p), *v);
    return total;
}

/// Stays without any scored parameter score 0.
inline std::vector<int> mews_scores(const std::vector<VitalSnapshot>& snapshots, const MewsBands& bands) {
    std::vector<int> out;
    out.reserve(snapshots.size());
    for (const auto& s : snapshots) out.push_back(has_scored_parameter(s) ? mews_score(s, bands) : 0);
    return out;
}

inline Labels mews_predict(const std::vector<VitalSnapshot>& snapshots, const MewsBands& bands) {
    Labels out;
    out.reserve(snapshots.size());
    for (int score : mews_scores(snapshots, bands)) out.push_back(score >= bands.alarm_threshold ? 1 : 0);
    return out;
}

inline std::vector<VitalSnapshot> snapshots(const Cohort& truncated) {
    std::vector<VitalSnapshot> out;
    out.reserve(truncated.size());
    for (const auto& s : truncated) out.push_back(latest_snapshot(s));
    return out;
}

inline nlohmann::json to_json(const MewsBands& b) {
    auto edge = [](double v) { return std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    nlohmann::json bands = nlohmann::json::object();
    for (MewsParameter p : kMewsParameters) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& band : b.of(p)) list.push_back({{"lo", edge(band.lo)}, {"hi", edge(band.hi)}, {"points", band.points}});
        bands[parameter_key(p)] = list;
    }
    return {{"alarm_threshold", b.alarm_threshold}, {"bands", bands}};
}

/// Band lists: [{"lo": number|null, "hi": number|null, "points": int}, ...]; null is unbounded.
inline std::vector<MewsBand> bands_from_json(const nlohmann::json& list, const char* key) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (!list.is_array()) throw std::invalid_argument(std::string("mews bands.") + key + ": expected an array");
    std::vector<MewsBand> out;
    for (const auto& jb : list) {
        for (const auto& [k, _] : jb.items())
            if (k != "lo" && k != "hi" && k != "points") throw std::invalid_argument(std::string("mews bands.") + key + ": unknown key '" + k + "'");
        MewsBand b{};
        b.lo = jb.at("lo").is_null() ? -inf : jb.at("lo").get<double>();
        b.hi = jb.at("hi").is_null() ? inf : jb.at("hi").get<double>();
        b.points = jb.at("points").get<int>();
        out.push_back(b);
    }
    return out;
}

}  // namespace cdpred
