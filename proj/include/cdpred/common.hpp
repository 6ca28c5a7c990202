#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cdpred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;
using Rng = std::mt19937_64;

/// Per-epoch (network) or per-round (ensemble) training and validation metrics.
struct LearningCurve {
    std::vector<double> train_logloss;
    std::vector<double> val_logloss;
    std::vector<double> train_acc;
    std::vector<double> val_acc;

    std::size_t size() const noexcept { return train_logloss.size(); }
    bool has_validation() const noexcept { return !val_logloss.empty(); }

    void push(double tl, double ta) {
        train_logloss.push_back(tl);
        train_acc.push_back(ta);
    }
    void push_validation(double vl, double va) {
        val_logloss.push_back(vl);
        val_acc.push_back(va);
    }
    friend bool operator==(const LearningCurve&, const LearningCurve&) = default;
};

/// SplitMix64 finalizer; used to derive independent child seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
    return derive_seed(derive_seed(base, a), b);
}

inline double sigmoid(double z) noexcept {
    if (z >= 0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("logit: probability must lie in (0, 1)");
    return std::log(p / (1.0 - p));
}

/// Mean binary cross-entropy; probabilities are clipped away from {0, 1}.
inline double log_loss(std::span<const double> prob, std::span<const int> y) {
    if (prob.size() != y.size()) throw std::invalid_argument("log_loss: size mismatch");
    if (prob.empty()) return 0.0;
    constexpr double eps = 1e-15;
    double total = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double p = std::clamp(prob[i], eps, 1.0 - eps);
        total -= y[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    return total / static_cast<double>(prob.size());
}

inline double accuracy_at_half(std::span<const double> prob, std::span<const int> y) {
    if (prob.size() != y.size()) throw std::invalid_argument("accuracy_at_half: size mismatch");
    if (prob.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < prob.size(); ++i) hit += ((prob[i] >= 0.5) ? 1 : 0) == y[i];
    return static_cast<double>(hit) / static_cast<double>(prob.size());
}

inline void require_binary(std::span<const int> y, const char* who) {
    for (int v : y)
        if (v != 0 && v != 1) throw std::invalid_argument(std::string(who) + ": labels must be 0 or 1");
}

inline bool has_both_classes(std::span<const int> y) {
    bool zero = false, one = false;
    for (int v : y) (v == 1 ? one : zero) = true;
    return zero && one;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Selects the rows of `x` listed in `rows`, in that order.
inline Matrix take_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

template <typename T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be independent;
/// the first exception thrown is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next >= n || error) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min(threads, n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace cdpred
