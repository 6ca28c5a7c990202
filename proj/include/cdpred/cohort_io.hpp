#pragma once

#include "data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

namespace cdpred {

inline constexpr std::string_view kCohortHeader =
    "id,age,gender,disease,specialty,admission,payer,unit,days_last_hosp,outcome,outcome_time_h,kind,time_h,value";

/// Raised for malformed cohort files; `row()` is the 1-based line number (the header is line 1).
class CohortError : public std::runtime_error {
public:
    CohortError(std::size_t row, const std::string& what)
        : std::runtime_error("cohort row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, ptr);
}

inline void check_text_field(const std::string& s, const char* name) {
    if (s.find_first_of(",\"\r\n") != std::string::npos)
        throw std::invalid_argument(std::string("cohort field '") + name + "' may not contain commas, quotes or newlines: " + s);
}

}  // namespace detail

/// Parses a cohort in the one-observation-per-row CSV schema. A row whose kind, time_h and value
/// fields are all empty declares a stay without adding an observation.
inline Cohort read_cohort(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CohortError(1, "missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCohortHeader) throw CohortError(1, "malformed header; expected '" + std::string(kCohortHeader) + "'");

    struct PendingObservation {
        VitalObservation obs;
        std::size_t row;
    };
    Cohort cohort;
    std::vector<std::array<std::vector<PendingObservation>, kVitalKindCount>> pending;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 14) throw CohortError(row, "expected 14 fields, found " + std::to_string(f.size()));

        PatientStay s;
        s.id = std::string(f[0]);
        if (s.id.empty()) throw CohortError(row, "empty id");
        if (!detail::parse_number(f[1], s.age)) throw CohortError(row, "non-numeric age '" + std::string(f[1]) + "'");
        s.gender = std::string(f[2]);
        s.registered_disease = std::string(f[3]);
        s.clinical_specialty = std::string(f[4]);
        s.admission_type = std::string(f[5]);
        s.payer = std::string(f[6]);
        s.care_unit = std::string(f[7]);
        if (!detail::parse_number(f[8], s.days_from_last_hospitalization))
            throw CohortError(row, "non-numeric days_last_hosp '" + std::string(f[8]) + "'");
        if (!detail::parse_number(f[9], s.outcome)) throw CohortError(row, "non-numeric outcome '" + std::string(f[9]) + "'");
        if (!detail::parse_number(f[10], s.outcome_time_h))
            throw CohortError(row, "non-numeric outcome_time_h '" + std::string(f[10]) + "'");
        if (auto e = check_stay(s); !e.empty()) throw CohortError(row, e);

        auto [it, inserted] = index.try_emplace(s.id, cohort.size());
        if (inserted) {
            cohort.push_back(s);
            pending.emplace_back();
        } else if (!(cohort[it->second] == s)) {
            throw CohortError(row, "stay attributes differ from earlier rows of id '" + s.id + "'");
        }

        const bool declares_only = f[11].empty() && f[12].empty() && f[13].empty();
        if (declares_only) continue;
        const auto kind = parse_vital_code(f[11]);
        if (!kind) throw CohortError(row, "unknown vital kind '" + std::string(f[11]) + "'");
        VitalObservation obs{*kind, 0.0, 0.0};
        if (!detail::parse_number(f[12], obs.time_h)) throw CohortError(row, "non-numeric time_h '" + std::string(f[12]) + "'");
        if (!detail::parse_number(f[13], obs.value)) throw CohortError(row, "non-numeric value '" + std::string(f[13]) + "'");
        if (auto e = check_observation(obs); !e.empty()) throw CohortError(row, e);
        if (obs.time_h > s.outcome_time_h) throw CohortError(row, "observation recorded after the outcome");
        pending[it->second][index_of(*kind)].push_back({obs, row});
    }

    for (std::size_t i = 0; i < cohort.size(); ++i) {
        for (VitalKind k : kAllVitalKinds) {
            auto& obs = pending[i][index_of(k)];
            std::stable_sort(obs.begin(), obs.end(),
                             [](const PendingObservation& a, const PendingObservation& b) { return a.obs.time_h < b.obs.time_h; });
            for (std::size_t j = 1; j < obs.size(); ++j) {
                if (obs[j].obs.time_h == obs[j - 1].obs.time_h)
                    throw CohortError(std::max(obs[j].row, obs[j - 1].row),
                                      "duplicate (id, kind, time) triple (" + cohort[i].id + ", " + std::string(vital_code(k)) +
                                          ", " + detail::format_number(obs[j].obs.time_h) + ")");
            }
            auto& series = cohort[i].series(k);
            series.reserve(obs.size());
            for (const auto& p : obs) series.push_back(p.obs);
        }
    }
    return cohort;
}

inline Cohort load_cohort(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_cohort: cannot open '" + path + "'");
    return read_cohort(in);
}

inline void write_cohort(std::ostream& out, const Cohort& cohort) {
    out << kCohortHeader << '\n';
    for (const auto& s : cohort) {
        if (auto e = check_stay(s); !e.empty()) throw std::invalid_argument("write_cohort: stay '" + s.id + "': " + e);
        detail::check_text_field(s.id, "id");
        detail::check_text_field(s.gender, "gender");
        detail::check_text_field(s.registered_disease, "disease");
        detail::check_text_field(s.clinical_specialty, "specialty");
        detail::check_text_field(s.admission_type, "admission");
        detail::check_text_field(s.payer, "payer");
        detail::check_text_field(s.care_unit, "unit");
        std::string prefix = s.id + ',' + std::to_string(s.age) + ',' + s.gender + ',' + s.registered_disease + ',' +
                             s.clinical_specialty + ',' + s.admission_type + ',' + s.payer + ',' + s.care_unit + ',' +
                             detail::format_number(s.days_from_last_hospitalization) + ',' + std::to_string(s.outcome) + ',' +
                             detail::format_number(s.outcome_time_h) + ',';
        if (s.observation_count() == 0) {
            out << prefix << ",,\n";
            continue;
        }
        for (VitalKind k : kAllVitalKinds)
            for (const auto& o : s.series(k))
                out << prefix << vital_code(k) << ',' << detail::format_number(o.time_h) << ','
                    << detail::format_number(o.value) << '\n';
    }
}

inline void save_cohort(const std::string& path, const Cohort& cohort) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_cohort: cannot write '" + path + "'");
    write_cohort(out, cohort);
    out.flush();
    if (!out) throw std::runtime_error("save_cohort: write failed for '" + path + "'");
}

}  // namespace cdpred
