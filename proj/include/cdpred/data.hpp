#pragma once

#include "common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cdpred {

enum class VitalKind : int {
    HeartRate = 0,         // beats/min
    RespiratoryRate,       // breaths/min
    DiastolicBP,           // mmHg
    SystolicBP,            // mmHg
    OxygenSaturation,      // %
    CapillaryGlucose,      // mg/dL
    Temperature,           // degrees C
};

inline constexpr std::size_t kVitalKindCount = 7;

inline constexpr std::array<VitalKind, kVitalKindCount> kAllVitalKinds = {
    VitalKind::HeartRate,        VitalKind::RespiratoryRate,  VitalKind::DiastolicBP, VitalKind::SystolicBP,
    VitalKind::OxygenSaturation, VitalKind::CapillaryGlucose, VitalKind::Temperature,
};

constexpr std::size_t index_of(VitalKind k) noexcept { return static_cast<std::size_t>(k); }

/// Short code used in the cohort CSV `kind` column and in feature names.
constexpr std::string_view vital_code(VitalKind k) noexcept {
    constexpr std::array<std::string_view, kVitalKindCount> codes = {"HR", "RR", "DBP", "SBP", "SPO2", "GLU", "TEMP"};
    return codes[index_of(k)];
}

inline std::optional<VitalKind> parse_vital_code(std::string_view code) noexcept {
    for (VitalKind k : kAllVitalKinds)
        if (vital_code(k) == code) return k;
    return std::nullopt;
}

/// Physiologic range a value of this kind may take.
struct ValueRange {
    double lo;
    double hi;
};

constexpr ValueRange value_range(VitalKind k) noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (k) {
        case VitalKind::OxygenSaturation: return {0.0, 100.0};
        case VitalKind::Temperature: return {25.0, 45.0};
        default: return {0.0, inf};
    }
}

struct VitalObservation {
    VitalKind kind = VitalKind::HeartRate;
    double value = 0.0;
    double time_h = 0.0;  // hours since admission

    friend bool operator==(const VitalObservation&, const VitalObservation&) = default;
};

/// Checks the value/time invariants of a single observation; returns an empty string when valid.
inline std::string check_observation(const VitalObservation& obs) {
    if (!std::isfinite(obs.value)) return "vital value is not finite";
    if (!std::isfinite(obs.time_h) || obs.time_h < 0) return "observation time must be a non-negative finite number";
    const ValueRange r = value_range(obs.kind);
    if (obs.value < r.lo || obs.value > r.hi)
        return std::string(vital_code(obs.kind)) + " value " + std::to_string(obs.value) + " outside its physiologic range";
    return {};
}

/// One hospital attendance.
struct PatientStay {
    std::string id;
    int age = 0;
    std::string gender;
    std::string registered_disease;
    std::string clinical_specialty;
    std::string admission_type;
    std::string payer;
    std::string care_unit;
    double days_from_last_hospitalization = 0.0;
    int outcome = 0;             // 0 = discharge, 1 = death
    double outcome_time_h = 0.0;  // hours since admission
    /// Indexed by VitalKind; each series strictly increasing in time.
    std::array<std::vector<VitalObservation>, kVitalKindCount> vitals;

    /// Length of stay up to the outcome, in days.
    double days_from_entrance() const noexcept { return outcome_time_h / 24.0; }

    const std::vector<VitalObservation>& series(VitalKind k) const noexcept { return vitals[index_of(k)]; }
    std::vector<VitalObservation>& series(VitalKind k) noexcept { return vitals[index_of(k)]; }

    std::size_t observation_count() const noexcept {
        std::size_t n = 0;
        for (const auto& s : vitals) n += s.size();
        return n;
    }

    friend bool operator==(const PatientStay&, const PatientStay&) = default;
};

using Cohort = std::vector<PatientStay>;

/// Returns an empty string if the stay satisfies every structural invariant, otherwise the first violation.
inline std::string check_stay(const PatientStay& s) {
    if (s.id.empty()) return "empty stay id";
    if (s.age < 0) return "age must be >= 0";
    if (s.outcome != 0 && s.outcome != 1) return "outcome must be 0 or 1";
    if (!std::isfinite(s.outcome_time_h) || s.outcome_time_h < 0) return "outcome_time_h must be >= 0";
    if (!std::isfinite(s.days_from_last_hospitalization) || s.days_from_last_hospitalization < 0)
        return "days_last_hosp must be >= 0";
    for (VitalKind k : kAllVitalKinds) {
        const auto& series = s.series(k);
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (series[i].kind != k) return "observation filed under the wrong vital kind";
            if (auto e = check_observation(series[i]); !e.empty()) return e;
            if (series[i].time_h > s.outcome_time_h) return "observation recorded after the outcome";
            if (i > 0 && !(series[i - 1].time_h < series[i].time_h))
                return std::string(vital_code(k)) + " series not strictly increasing in time";
        }
    }
    return {};
}

struct ClassMoments {
    double mean = 0.0;
    double std = 0.0;
};

/// Per-class marginal statistics that drive the synthetic cohort generator.
struct CalibrationStats {
    /// [kind][class], class 0 = survival, 1 = mortality.
    std::array<std::array<ClassMoments, 2>, kVitalKindCount> vitals{};
    std::array<double, kVitalKindCount> missing_probability{};
    std::array<ClassMoments, 2> age{};
    std::array<ClassMoments, 2> days_from_entrance{};
    double mortality_prior = 0.04;

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        for (std::size_t k = 0; k < kVitalKindCount; ++k) {
            if (!prob(missing_probability[k])) throw std::invalid_argument("calibration: missing probability outside [0,1]");
            for (const auto& m : vitals[k])
                if (!(m.std >= 0.0) || !std::isfinite(m.mean)) throw std::invalid_argument("calibration: bad vital moments");
        }
        for (int c = 0; c < 2; ++c) {
            if (!(age[c].std >= 0.0)) throw std::invalid_argument("calibration: negative age std");
            if (!(days_from_entrance[c].std >= 0.0) || !(days_from_entrance[c].mean > 0.0))
                throw std::invalid_argument("calibration: days_from_entrance needs positive mean and std >= 0");
        }
        if (!(mortality_prior > 0.0 && mortality_prior < 1.0))
            throw std::invalid_argument("calibration: mortality prior must lie in (0,1)");
    }
};

/// Table of per-class means and STDs and per-vital missing rates of the reference
/// out-of-ICU cohort, with a 4% mortality prior.
inline CalibrationStats default_calibration() {
    CalibrationStats c;
    auto set = [&](VitalKind k, ClassMoments surv, ClassMoments mort, double missing) {
        c.vitals[index_of(k)] = {surv, mort};
        c.missing_probability[index_of(k)] = missing;
    };
    set(VitalKind::HeartRate, {78.60, 14.38}, {95.01, 22.55}, 0.1134);
    set(VitalKind::RespiratoryRate, {18.07, 3.88}, {19.19, 4.91}, 0.1516);
    set(VitalKind::DiastolicBP, {72.26, 11.10}, {63.76, 14.88}, 0.1156);
    set(VitalKind::SystolicBP, {120.90, 17.78}, {106.64, 23.09}, 0.1153);
    set(VitalKind::OxygenSaturation, {95.99, 2.68}, {92.57, 5.84}, 0.1612);
    set(VitalKind::CapillaryGlucose, {137.19, 59.40}, {145.94, 78.84}, 0.7637);
    set(VitalKind::Temperature, {36.06, 0.68}, {36.20, 0.82}, 0.1626);
    c.days_from_entrance = {ClassMoments{4.91, 9.04}, ClassMoments{13.47, 21.67}};
    c.age = {ClassMoments{55.55, 17.93}, ClassMoments{70.55, 15.92}};
    c.mortality_prior = 0.04;
    return c;
}

// Level counts of the categorical attributes emitted by the generator.
inline constexpr int kGenderLevels = 2;
inline constexpr int kDiseaseLevels = 20;
inline constexpr int kSpecialtyLevels = 10;
inline constexpr int kAdmissionLevels = 4;
inline constexpr int kPayerLevels = 3;
inline constexpr int kUnitLevels = 3;

// Collection schedule: 5 collections per kind, 4 h apart, the last one 13 h before the outcome.
inline constexpr int kCollectionsPerKind = 5;
inline constexpr double kCollectionSpacingH = 4.0;
inline constexpr double kLastCollectionLeadH = 13.0;
inline constexpr double kArCoefficient = 0.7;
inline constexpr double kInnovationFraction = 0.3;
inline constexpr double kMeanDaysSinceLastHosp = 180.0;

namespace detail {

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

/// E[clamp(X, lo, hi)] for X ~ N(mu, sd^2).
inline double clipped_normal_mean(double mu, double sd, double lo, double hi) {
    if (sd <= 0) return std::clamp(mu, lo, hi);
    const double a = std::isfinite(lo) ? (lo - mu) / sd : -std::numeric_limits<double>::infinity();
    const double b = std::isfinite(hi) ? (hi - mu) / sd : std::numeric_limits<double>::infinity();
    const double pa = std::isfinite(a) ? std_normal_cdf(a) : 0.0;
    const double pb = std::isfinite(b) ? std_normal_cdf(b) : 1.0;
    const double da = std::isfinite(a) ? std_normal_pdf(a) : 0.0;
    const double db = std::isfinite(b) ? std_normal_pdf(b) : 0.0;
    double m = mu * (pb - pa) + sd * (da - db);
    if (std::isfinite(lo)) m += lo * pa;
    if (std::isfinite(hi)) m += hi * (1.0 - pb);
    return m;
}

/// Location mu such that the clamped normal N(mu, sd^2) has the requested mean.
inline double clip_corrected_location(double target, double sd, double lo, double hi) {
    if (sd <= 0 || !(target > lo && target < hi)) return target;
    double a = target - 20 * sd, b = target + 20 * sd;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        (clipped_normal_mean(mid, sd, lo, hi) < target ? a : b) = mid;
    }
    return 0.5 * (a + b);
}

inline std::string level_name(std::string_view prefix, int level, int width) {
    std::string digits = std::to_string(level + 1);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return std::string(prefix) + digits;
}

}  // namespace detail

/// Synthesizes `n` stays whose per-class vital, age and length-of-stay marginals follow `calib`.
/// Stay i is drawn from its own seed stream, so a cohort of n is a prefix of a cohort of n + 1.
inline Cohort generate_synthetic_cohort(std::size_t n, std::uint64_t seed, const CalibrationStats& calib) {
    if (n == 0) throw std::invalid_argument("generate_synthetic_cohort: n must be >= 1");
    calib.validate();

    // Marginal SD of baseline + stationary AR(1) fluctuation.
    const double inflation = std::sqrt(1.0 + kInnovationFraction * kInnovationFraction / (1.0 - kArCoefficient * kArCoefficient));
    std::array<std::array<double, 2>, kVitalKindCount> location{};
    for (VitalKind k : kAllVitalKinds) {
        const ValueRange r = value_range(k);
        for (int c = 0; c < 2; ++c) {
            const auto& m = calib.vitals[index_of(k)][c];
            location[index_of(k)][c] = detail::clip_corrected_location(m.mean, m.std * inflation, r.lo, r.hi);
        }
    }

    const double span_days = (kLastCollectionLeadH + kCollectionSpacingH * (kCollectionsPerKind - 1)) / 24.0;
    for (const auto& los : calib.days_from_entrance)
        if (!(los.mean > span_days))
            throw std::invalid_argument("generate_synthetic_cohort: days_from_entrance mean must exceed the collection span");

    const int id_width = std::max<int>(6, static_cast<int>(std::to_string(n).size()));
    const std::string gender_levels[] = {"F", "M"};

    Cohort cohort;
    cohort.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);

        PatientStay s;
        s.id = detail::level_name("P", static_cast<int>(i), id_width);
        s.outcome = unif(rng) < calib.mortality_prior ? 1 : 0;
        const int c = s.outcome;

        const double age = calib.age[c].mean + calib.age[c].std * normal(rng);
        s.age = std::max(18, static_cast<int>(std::lround(age)));

        // Length of stay = collection span + log-normal excess, moment-matched to the class mean/std.
        const auto& los = calib.days_from_entrance[c];
        const double excess_mean = los.mean - span_days;
        const double sigma2 = std::log1p((los.std * los.std) / (excess_mean * excess_mean));
        const double mu = std::log(excess_mean) - 0.5 * sigma2;
        const double days = span_days + std::exp(mu + std::sqrt(sigma2) * normal(rng));
        s.outcome_time_h = 24.0 * days;

        auto pick = [&](int levels) { return std::uniform_int_distribution<int>(0, levels - 1)(rng); };
        s.gender = gender_levels[pick(kGenderLevels)];
        s.registered_disease = detail::level_name("D", pick(kDiseaseLevels), 2);
        s.clinical_specialty = detail::level_name("S", pick(kSpecialtyLevels), 2);
        s.admission_type = detail::level_name("A", pick(kAdmissionLevels), 1);
        s.payer = detail::level_name("Y", pick(kPayerLevels), 1);
        s.care_unit = detail::level_name("U", pick(kUnitLevels), 1);
        s.days_from_last_hospitalization = std::exponential_distribution<double>(1.0 / kMeanDaysSinceLastHosp)(rng);

        for (VitalKind k : kAllVitalKinds) {
            const auto& m = calib.vitals[index_of(k)][c];
            const ValueRange r = value_range(k);
            const double baseline = location[index_of(k)][c] + m.std * normal(rng);
            const double innovation_sd = kInnovationFraction * m.std;
            double fluctuation = innovation_sd / std::sqrt(1.0 - kArCoefficient * kArCoefficient) * normal(rng);
            auto& series = s.series(k);
            for (int j = 0; j < kCollectionsPerKind; ++j) {
                if (j > 0) fluctuation = kArCoefficient * fluctuation + innovation_sd * normal(rng);
                const double value = std::clamp(baseline + fluctuation, r.lo, r.hi);
                const double t = s.outcome_time_h - kLastCollectionLeadH - kCollectionSpacingH * (kCollectionsPerKind - 1 - j);
                if (unif(rng) < calib.missing_probability[index_of(k)]) continue;
                series.push_back({k, value, t});
            }
        }
        cohort.push_back(std::move(s));
    }
    return cohort;
}

/// Keeps stays with age >= 18, preserving order.
inline Cohort filter_adults(const Cohort& cohort) {
    Cohort out;
    out.reserve(cohort.size());
    for (const auto& s : cohort)
        if (s.age >= 18) out.push_back(s);
    return out;
}

inline Labels outcomes(const Cohort& cohort) {
    Labels y;
    y.reserve(cohort.size());
    for (const auto& s : cohort) y.push_back(s.outcome);
    return y;
}

}  // namespace cdpred
