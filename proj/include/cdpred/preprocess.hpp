#pragma once

#include "common.hpp"
#include "data.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpred {

inline constexpr std::size_t kSlotCount = 5;

/// The five most recent collections of one vital kind, oldest first.
struct Slots {
    std::array<double, kSlotCount> value{};
    std::array<bool, kSlotCount> present{};

    bool complete() const noexcept {
        return std::all_of(present.begin(), present.end(), [](bool p) { return p; });
    }
    friend bool operator==(const Slots&, const Slots&) = default;
};

struct SlotStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double std = 0.0;  // sample standard deviation (divisor n - 1)
};

/// Drops every observation recorded after outcome_time - horizon_h.
inline PatientStay truncate_horizon(const PatientStay& stay, double horizon_h = 12.0) {
    if (!(horizon_h >= 0.0)) throw std::invalid_argument("truncate_horizon: horizon_h must be >= 0");
    PatientStay out = stay;
    const double cutoff = stay.outcome_time_h - horizon_h;
    for (auto& series : out.vitals)
        std::erase_if(series, [cutoff](const VitalObservation& o) { return o.time_h > cutoff; });
    return out;
}

inline Cohort truncate_horizon(const Cohort& cohort, double horizon_h = 12.0) {
    Cohort out;
    out.reserve(cohort.size());
    for (const auto& s : cohort) out.push_back(truncate_horizon(s, horizon_h));
    return out;
}

inline Slots last_five(const PatientStay& stay, VitalKind kind) {
    Slots slots;
    const auto& series = stay.series(kind);
    const std::size_t take = std::min(series.size(), kSlotCount);
    const std::size_t offset = kSlotCount - take;
    for (std::size_t i = 0; i < take; ++i) {
        slots.value[offset + i] = series[series.size() - take + i].value;
        slots.present[offset + i] = true;
    }
    return slots;
}

/// Copies the nearest earlier observed value into each missing slot; leading gaps stay missing.
inline Slots forward_fill(Slots slots) {
    for (std::size_t i = 1; i < kSlotCount; ++i) {
        if (!slots.present[i] && slots.present[i - 1]) {
            slots.value[i] = slots.value[i - 1];
            slots.present[i] = true;
        }
    }
    return slots;
}

inline SlotStats slot_stats(const std::array<double, kSlotCount>& v) {
    std::array<double, kSlotCount> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    SlotStats s;
    s.min = sorted.front();
    s.max = sorted.back();
    s.median = sorted[kSlotCount / 2];
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(kSlotCount);
    // Mean of finite values can round a hair outside [min, max].
    s.mean = std::clamp(s.mean, s.min, s.max);
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(kSlotCount - 1));
    return s;
}

inline SlotStats slot_stats(const Slots& slots) {
    if (!slots.complete()) throw std::invalid_argument("slot_stats: every slot must be filled");
    return slot_stats(slots.value);
}

/// Dense design matrix with named columns and aligned labels.
struct FeatureMatrix {
    Matrix values;
    std::vector<std::string> column_names;
    Labels labels;
    std::vector<std::string> row_ids;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }

    void validate() const {
        if (column_names.size() != cols() || labels.size() != rows() || row_ids.size() != rows())
            throw std::logic_error("FeatureMatrix: inconsistent dimensions");
        if (!values.allFinite()) throw std::logic_error("FeatureMatrix: non-finite value");
        require_binary(labels, "FeatureMatrix");
        if (std::set<std::string>(column_names.begin(), column_names.end()).size() != column_names.size())
            throw std::logic_error("FeatureMatrix: duplicate column names");
    }
};

enum class CategoricalAttribute { Gender, Disease, Specialty, Admission, Payer, Unit };

inline constexpr std::array<CategoricalAttribute, 6> kCategoricalAttributes = {
    CategoricalAttribute::Gender,    CategoricalAttribute::Disease, CategoricalAttribute::Specialty,
    CategoricalAttribute::Admission, CategoricalAttribute::Payer,   CategoricalAttribute::Unit,
};

inline const char* attribute_name(CategoricalAttribute a) {
    switch (a) {
        case CategoricalAttribute::Gender: return "gender";
        case CategoricalAttribute::Disease: return "disease";
        case CategoricalAttribute::Specialty: return "specialty";
        case CategoricalAttribute::Admission: return "admission";
        case CategoricalAttribute::Payer: return "payer";
        case CategoricalAttribute::Unit: return "unit";
    }
    return "?";
}

inline const std::string& attribute_value(const PatientStay& s, CategoricalAttribute a) {
    switch (a) {
        case CategoricalAttribute::Gender: return s.gender;
        case CategoricalAttribute::Disease: return s.registered_disease;
        case CategoricalAttribute::Specialty: return s.clinical_specialty;
        case CategoricalAttribute::Admission: return s.admission_type;
        case CategoricalAttribute::Payer: return s.payer;
        case CategoricalAttribute::Unit: return s.care_unit;
    }
    throw std::logic_error("attribute_value: bad attribute");
}

/// Column recipe fitted on a training cohort: per-vital slot values and statistics, three
/// numeric stay attributes, and one indicator per categorical level seen at fit time.
struct EncodingSchema {
    bool fitted = false;
    /// Training means of forward-filled slot values, used for leading gaps.
    std::array<std::array<double, kSlotCount>, kVitalKindCount> slot_means{};
    /// Sorted level vocabulary per categorical attribute, in kCategoricalAttributes order.
    std::array<std::vector<std::string>, kCategoricalAttributes.size()> vocabularies;

    static constexpr std::array<const char*, 5> kStatNames = {"min", "max", "mean", "median", "std"};
    static constexpr std::size_t kNumericWidth = kVitalKindCount * (kSlotCount + 5) + 3;

    static std::vector<std::string> numeric_columns() {
        std::vector<std::string> names;
        names.reserve(kNumericWidth);
        for (VitalKind k : kAllVitalKinds) {
            const std::string code(vital_code(k));
            for (std::size_t j = 0; j < kSlotCount; ++j) names.push_back(code + "_" + std::to_string(j + 1));
            for (const char* stat : kStatNames) names.push_back(code + "_" + stat);
        }
        names.emplace_back("age");
        names.emplace_back("days_last_hosp");
        names.emplace_back("days_from_entrance");
        return names;
    }

    std::vector<std::string> column_names() const {
        auto names = numeric_columns();
        for (std::size_t a = 0; a < kCategoricalAttributes.size(); ++a)
            for (const auto& level : vocabularies[a])
                names.push_back(std::string(attribute_name(kCategoricalAttributes[a])) + "=" + level);
        return names;
    }

    std::size_t width() const {
        std::size_t w = kNumericWidth;
        for (const auto& v : vocabularies) w += v.size();
        return w;
    }

    friend bool operator==(const EncodingSchema&, const EncodingSchema&) = default;
};

inline EncodingSchema fit_schema(const Cohort& training) {
    if (training.empty()) throw std::invalid_argument("fit_schema: empty training cohort");
    EncodingSchema schema;
    for (VitalKind k : kAllVitalKinds) {
        std::array<double, kSlotCount> sum{};
        std::array<std::size_t, kSlotCount> count{};
        for (const auto& s : training) {
            const Slots filled = forward_fill(last_five(s, k));
            for (std::size_t j = 0; j < kSlotCount; ++j) {
                if (!filled.present[j]) continue;
                sum[j] += filled.value[j];
                ++count[j];
            }
        }
        for (std::size_t j = 0; j < kSlotCount; ++j)
            schema.slot_means[index_of(k)][j] = count[j] ? sum[j] / static_cast<double>(count[j]) : 0.0;
    }
    for (std::size_t a = 0; a < kCategoricalAttributes.size(); ++a) {
        std::set<std::string> levels;
        for (const auto& s : training) levels.insert(attribute_value(s, kCategoricalAttributes[a]));
        schema.vocabularies[a].assign(levels.begin(), levels.end());
    }
    schema.fitted = true;
    return schema;
}

/// Encodes stays row by row in cohort order. Levels absent from the vocabulary encode as all zeros.
inline FeatureMatrix apply_schema(const EncodingSchema& schema, const Cohort& cohort) {
    if (!schema.fitted) throw std::logic_error("apply_schema: schema has not been fitted");
    FeatureMatrix fm;
    fm.column_names = schema.column_names();
    const auto width = static_cast<Eigen::Index>(fm.column_names.size());
    fm.values = Matrix::Zero(static_cast<Eigen::Index>(cohort.size()), width);
    fm.labels.reserve(cohort.size());
    fm.row_ids.reserve(cohort.size());

    std::array<std::map<std::string, Eigen::Index, std::less<>>, kCategoricalAttributes.size()> level_column;
    Eigen::Index col = EncodingSchema::kNumericWidth;
    for (std::size_t a = 0; a < kCategoricalAttributes.size(); ++a)
        for (const auto& level : schema.vocabularies[a]) level_column[a].emplace(level, col++);

    for (std::size_t r = 0; r < cohort.size(); ++r) {
        const auto& s = cohort[r];
        const auto row = static_cast<Eigen::Index>(r);
        Eigen::Index c = 0;
        for (VitalKind k : kAllVitalKinds) {
            Slots filled = forward_fill(last_five(s, k));
            for (std::size_t j = 0; j < kSlotCount; ++j) {
                if (!filled.present[j]) {
                    filled.value[j] = schema.slot_means[index_of(k)][j];
                    filled.present[j] = true;
                }
                fm.values(row, c++) = filled.value[j];
            }
            const SlotStats st = slot_stats(filled);
            for (double v : {st.min, st.max, st.mean, st.median, st.std}) fm.values(row, c++) = v;
        }
        fm.values(row, c++) = s.age;
        fm.values(row, c++) = s.days_from_last_hospitalization;
        fm.values(row, c++) = s.days_from_entrance();
        for (std::size_t a = 0; a < kCategoricalAttributes.size(); ++a) {
            const auto it = level_column[a].find(attribute_value(s, kCategoricalAttributes[a]));
            if (it != level_column[a].end()) fm.values(row, it->second) = 1.0;
        }
        fm.labels.push_back(s.outcome);
        fm.row_ids.push_back(s.id);
    }
    fm.validate();
    return fm;
}

inline nlohmann::json to_json(const EncodingSchema& schema) {
    if (!schema.fitted) throw std::logic_error("to_json: schema has not been fitted");
    nlohmann::json j;
    j["format"] = "cdpred.encoding_schema";
    j["version"] = 1;
    j["width"] = schema.width();
    j["numeric_columns"] = EncodingSchema::numeric_columns();
    nlohmann::json cats = nlohmann::json::array();
    for (std::size_t a = 0; a < kCategoricalAttributes.size(); ++a)
        cats.push_back({{"attribute", attribute_name(kCategoricalAttributes[a])}, {"levels", schema.vocabularies[a]}});
    j["categorical"] = cats;
    nlohmann::json means = nlohmann::json::object();
    for (VitalKind k : kAllVitalKinds) means[std::string(vital_code(k))] = schema.slot_means[index_of(k)];
    j["slot_means"] = means;
    j["columns"] = schema.column_names();
    return j;
}

inline EncodingSchema schema_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cdpred.encoding_schema") throw std::invalid_argument("schema_from_json: not an encoding schema");
    EncodingSchema schema;
    const auto& cats = j.at("categorical");
    if (cats.size() != kCategoricalAttributes.size()) throw std::invalid_argument("schema_from_json: wrong categorical count");
    for (std::size_t a = 0; a < kCategoricalAttributes.size(); ++a) {
        if (cats[a].at("attribute").get<std::string>() != attribute_name(kCategoricalAttributes[a]))
            throw std::invalid_argument("schema_from_json: categorical attributes out of order");
        schema.vocabularies[a] = cats[a].at("levels").get<std::vector<std::string>>();
    }
    for (VitalKind k : kAllVitalKinds)
        schema.slot_means[index_of(k)] = j.at("slot_means").at(std::string(vital_code(k))).get<std::array<double, kSlotCount>>();
    schema.fitted = true;
    if (j.at("width").get<std::size_t>() != schema.width()) throw std::invalid_argument("schema_from_json: width mismatch");
    return schema;
}

}  // namespace cdpred
