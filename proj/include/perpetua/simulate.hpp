#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"
#include "perpetua/homology.hpp"
#include "perpetua/model.hpp"
#include "perpetua/rng.hpp"

namespace perpetua {

inline constexpr std::size_t kStationaryStart = std::numeric_limits<std::size_t>::max();
inline constexpr std::uint64_t kDefaultStepCap = 1'000'000;

struct SimOptions {
    std::size_t replicas = 10'000;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 picks the OpenMP default
};

// PERPETUA_THREADS, when set to a positive integer, wins over the request.
inline int effective_threads(int requested) {
    if (const char* env = std::getenv("PERPETUA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<int>(v);
    }
    return requested > 0 ? requested : omp_get_max_threads();
}

// Runs f(r) for r in [0, count); each index writes only its own slot, so the
// result does not depend on the thread count.
template <class F>
void parallel_for(std::size_t count, int threads, F&& f) {
    std::exception_ptr failure;
    std::mutex guard;
    const long long total = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 64) num_threads(effective_threads(threads))
    for (long long r = 0; r < total; ++r) {
        try {
            f(static_cast<std::size_t>(r));
        } catch (...) {
            std::lock_guard<std::mutex> lock(guard);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

struct SampleSet {
    std::vector<double> values;
    std::vector<std::size_t> overflowed;  // replica ids whose value left the double range
    std::uint64_t seed = 0;
    std::size_t n = 0;

    // Empirical law of the finite samples.
    DiscreteLaw law(double tol = kMergeTol) const {
        std::vector<double> finite;
        finite.reserve(values.size());
        for (double v : values)
            if (std::isfinite(v)) finite.push_back(v);
        return DiscreteLaw::from_samples(finite, tol);
    }

    double fraction_within(double x) const {
        std::size_t k = 0;
        for (double v : values)
            if (std::abs(v) <= x) ++k;
        return values.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(values.size());
    }
};

// Draws from a finite law by inverse CDF on a 53-bit uniform.
class LawSampler {
public:
    LawSampler() = default;
    explicit LawSampler(const DiscreteLaw& law) {
        double s = 0.0;
        for (const auto& a : law.atoms()) {
            s += a.m;
            cum_.push_back(s);
            values_.push_back(a.v);
        }
        if (values_.empty()) throw Error(ErrorCode::BadWeights, "cannot sample from an empty law");
        for (auto& c : cum_) c /= s;
    }

    double draw(RandomStream& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        return values_[std::min<std::size_t>(static_cast<std::size_t>(it - cum_.begin()), values_.size() - 1)];
    }

private:
    std::vector<double> cum_;
    std::vector<double> values_;
};

// Joint draw of (next state, edge atom) from one 32-bit word per step. Each
// outcome gets probability within 2^-32 of p_ij * w.
class FiniteSampler {
public:
    struct Entry {
        std::uint64_t threshold;
        std::size_t next;
        double a;
        double b;
        double log_abs_a;
    };

    explicit FiniteSampler(const Model& model) : rows_(model.size()) {
        constexpr double scale = 4294967296.0;
        for (std::size_t s = 0; s < model.size(); ++s) {
            double cum = 0.0;
            for (std::size_t t : model.successors(s))
                for (const auto& c : model.edge(s, t)) {
                    cum += model.p(s, t) * c.w;
                    const auto th = static_cast<std::uint64_t>(std::min(scale, std::round(cum * scale)));
                    rows_[s].push_back({th, t, c.a, c.b, c.a == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(c.a))});
                }
            rows_[s].back().threshold = std::uint64_t{1} << 32;
        }
        double cum = 0.0;
        for (double p : model.pi()) {
            cum += p;
            pi_cum_.push_back(cum);
        }
        pi_cum_.back() = 1.0;
    }

    const Entry& draw(std::size_t s, RandomStream& rng) const {
        const std::uint64_t u = rng.next_u32();
        const auto& row = rows_[s];
        for (const auto& e : row)
            if (u < e.threshold) return e;
        return row.back();
    }

    std::size_t draw_stationary(RandomStream& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(pi_cum_.begin(), pi_cum_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - pi_cum_.begin()), pi_cum_.size() - 1);
    }

    std::size_t start_state(std::size_t start, RandomStream& rng) const {
        return start == kStationaryStart ? draw_stationary(rng) : start;
    }

private:
    std::vector<std::vector<Entry>> rows_;
    std::vector<double> pi_cum_;
};

namespace detail {

inline std::vector<LawSampler> z0_samplers(const InitialLaw& z0, std::size_t n) {
    std::vector<LawSampler> out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(z0.at(i));
    return out;
}

inline void check_start(const Model& model, std::size_t start) {
    if (start != kStationaryStart && start >= model.size())
        throw Error(ErrorCode::BadShape, "start state " + std::to_string(start) + " is outside the model");
}

inline void collect_overflow(SampleSet& set, const std::vector<std::uint8_t>& flags) {
    for (std::size_t r = 0; r < flags.size(); ++r)
        if (flags[r]) set.overflowed.push_back(r);
}

} // namespace detail

// Samples of Psi_{1:n}(Z_0) = Pi_n Z_0 + sum_{k<=n} Pi_{k-1} B_k.
inline SampleSet run_backward(const Model& model, std::size_t start, std::size_t n, const InitialLaw& z0,
                              const SimOptions& opt) {
    detail::check_start(model, start);
    const FiniteSampler fs(model);
    const auto zs = detail::z0_samplers(z0, model.size());
    SampleSet set;
    set.seed = opt.seed;
    set.n = n;
    set.values.resize(opt.replicas);
    std::vector<std::uint8_t> flags(opt.replicas, 0);
    parallel_for(opt.replicas, opt.threads, [&](std::size_t r) {
        RandomStream rng(opt.seed, r);
        std::size_t s = fs.start_state(start, rng);
        const double z = zs[s].draw(rng);
        double pi = 1.0, sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto& e = fs.draw(s, rng);
            sum += pi * e.b;
            pi *= e.a;
            s = e.next;
        }
        const double v = z == 0.0 ? sum : pi * z + sum;
        set.values[r] = v;
        flags[r] = !std::isfinite(v) || !std::isfinite(pi);
    });
    detail::collect_overflow(set, flags);
    return set;
}

// Samples of Psi_{n:1}(Z_0), the Markov chain Z_k = A_k Z_{k-1} + B_k.
inline SampleSet run_forward(const Model& model, std::size_t start, std::size_t n, const InitialLaw& z0,
                             const SimOptions& opt) {
    detail::check_start(model, start);
    const FiniteSampler fs(model);
    const auto zs = detail::z0_samplers(z0, model.size());
    SampleSet set;
    set.seed = opt.seed;
    set.n = n;
    set.values.resize(opt.replicas);
    std::vector<std::uint8_t> flags(opt.replicas, 0);
    parallel_for(opt.replicas, opt.threads, [&](std::size_t r) {
        RandomStream rng(opt.seed, r);
        std::size_t s = fs.start_state(start, rng);
        double v = zs[s].draw(rng);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& e = fs.draw(s, rng);
            v = e.a * v + e.b;
            s = e.next;
        }
        set.values[r] = v;
        flags[r] = !std::isfinite(v);
    });
    detail::collect_overflow(set, flags);
    return set;
}

struct StepRecord {
    std::size_t state = 0;
    double a = 1.0;
    double b = 0.0;
    double pi_n = 1.0;
    double s_n = 0.0;
    double z_backward = 0.0;
    double z_forward = 0.0;
};

struct Trajectory {
    std::vector<StepRecord> steps;  // steps[k] describes time k + 1
    std::size_t start = 0;
    double z0 = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t rng_stream_id = 0;
};

inline Trajectory trace(const Model& model, std::size_t start, std::size_t n, double z0, std::uint64_t seed,
                        std::uint64_t stream_id = 0) {
    detail::check_start(model, start);
    const FiniteSampler fs(model);
    RandomStream rng(seed, stream_id);
    Trajectory t;
    t.start = start;
    t.z0 = z0;
    t.seed = seed;
    t.rng_stream_id = stream_id;
    std::size_t s = start;
    double pi = 1.0, s_log = 0.0, sum = 0.0, fwd = z0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& e = fs.draw(s, rng);
        sum += pi * e.b;
        pi *= e.a;
        s_log -= e.log_abs_a;
        fwd = e.a * fwd + e.b;
        s = e.next;
        t.steps.push_back({s, e.a, e.b, pi, s_log, pi * z0 + sum, fwd});
    }
    return t;
}

// Empirical law of Psi_{1:n}(z) over n = 1..steps along a single path.
inline DiscreteLaw backward_time_average(const Model& model, std::size_t start, double z0, std::size_t steps,
                                         std::uint64_t seed) {
    const FiniteSampler fs(model);
    RandomStream rng(seed, 0);
    std::vector<double> values;
    values.reserve(steps);
    std::size_t s = start;
    double pi = 1.0, sum = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto& e = fs.draw(s, rng);
        sum += pi * e.b;
        pi *= e.a;
        s = e.next;
        values.push_back(pi * z0 + sum);
    }
    return DiscreteLaw::from_samples(values);
}

struct ExcursionSample {
    std::uint64_t tau = 0;
    double a_i = 1.0;
    double b_i = 0.0;
    double w_i = 0.0;
    double s_tau = 0.0;
    bool pi_is_one = false;
    double log_overshoot = 0.0;  // max over the excursion of log|Pi_k| - log|Pi_0|
};

struct ExcursionBatch {
    std::vector<ExcursionSample> samples;
    std::optional<std::size_t> hat_tau_index;  // number of excursions up to the first unit product
    std::optional<std::uint64_t> hat_tau_steps;
    std::uint64_t seed = 0;
    std::uint64_t step_cap = kDefaultStepCap;
};

namespace detail {

inline void locate_hat_tau(ExcursionBatch& batch) {
    double log_sum = 0.0;
    int sign = 1;
    std::uint64_t steps = 0;
    for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        const auto& x = batch.samples[k];
        log_sum -= x.s_tau;
        sign *= x.a_i < 0.0 ? -1 : 1;
        steps += x.tau;
        if (sign == 1 && std::abs(log_sum) <= 1e-12) {
            batch.hat_tau_index = k + 1;
            batch.hat_tau_steps = steps;
            return;
        }
    }
}

inline Error timeout(std::uint64_t cap) {
    return Error(ErrorCode::ExcursionTimeout, "return time exceeded the step cap " + std::to_string(cap));
}

} // namespace detail

// count independent excursions from i under P_i; excursion k uses stream k.
inline ExcursionBatch sample_excursions(const Model& model, std::size_t i, std::size_t count, std::uint64_t seed,
                                        std::uint64_t step_cap = kDefaultStepCap, int threads = 0) {
    detail::check_start(model, i);
    const FiniteSampler fs(model);
    ExcursionBatch batch;
    batch.seed = seed;
    batch.step_cap = step_cap;
    batch.samples.resize(count);
    parallel_for(count, threads, [&](std::size_t r) {
        RandomStream rng(seed, r);
        ExcursionSample x;
        double pi = 1.0, sum = 0.0, w = 0.0, s_log = 0.0, rise = 0.0;
        std::size_t s = i;
        do {
            if (x.tau == step_cap) throw detail::timeout(step_cap);
            const auto& e = fs.draw(s, rng);
            const double term = pi * e.b;
            sum += term;
            w = std::max(w, std::abs(term));
            pi *= e.a;
            s_log -= e.log_abs_a;
            rise = std::max(rise, -s_log);
            s = e.next;
            ++x.tau;
        } while (s != i);
        x.a_i = pi;
        x.b_i = sum;
        x.w_i = w;
        x.s_tau = s_log;
        x.pi_is_one = pi > 0.0 && std::abs(s_log) <= 1e-12;
        x.log_overshoot = rise;
        batch.samples[r] = x;
    });
    detail::locate_hat_tau(batch);
    return batch;
}

struct PerpetuityResult {
    SampleSet samples;
    double max_abs_pi = 0.0;  // max |Pi_horizon| over replicas
    std::size_t horizon = 0;
};

// Partial sums sum_{k<=horizon} Pi_{k-1} B_k; only meaningful when the
// embedded walk drifts to +infinity.
inline PerpetuityResult perpetuity_samples(const Model& model, std::size_t start, std::size_t count, std::size_t horizon,
                                           std::uint64_t seed, int threads = 0) {
    const double drift = stationary_log_drift(model);
    if (!(drift < -kDegeneracyTol))
        throw Error(ErrorCode::NotConvergentRegime, "E_pi log|A| = " + std::to_string(drift) + " is not negative");
    detail::check_start(model, start);
    const FiniteSampler fs(model);
    PerpetuityResult out;
    out.horizon = horizon;
    out.samples.seed = seed;
    out.samples.n = horizon;
    out.samples.values.resize(count);
    std::vector<double> last_pi(count, 0.0);
    std::vector<std::uint8_t> flags(count, 0);
    parallel_for(count, threads, [&](std::size_t r) {
        RandomStream rng(seed, r);
        std::size_t s = fs.start_state(start, rng);
        double pi = 1.0, sum = 0.0;
        for (std::size_t k = 0; k < horizon; ++k) {
            const auto& e = fs.draw(s, rng);
            sum += pi * e.b;
            pi *= e.a;
            s = e.next;
        }
        out.samples.values[r] = sum;
        last_pi[r] = std::abs(pi);
        flags[r] = !std::isfinite(sum);
    });
    detail::collect_overflow(out.samples, flags);
    for (double p : last_pi) out.max_abs_pi = std::max(out.max_abs_pi, p);
    return out;
}

// Samples of sum_{k<=T} Pi_{k-1} B_k with T the first time A_T = 0.
inline SampleSet stopped_perpetuity_samples(const Model& model, std::size_t start, std::size_t count, std::uint64_t seed,
                                            std::uint64_t step_cap = kDefaultStepCap, int threads = 0) {
    detail::check_start(model, start);
    const FiniteSampler fs(model);
    SampleSet set;
    set.seed = seed;
    set.values.resize(count);
    parallel_for(count, threads, [&](std::size_t r) {
        RandomStream rng(seed, r);
        std::size_t s = fs.start_state(start, rng);
        double pi = 1.0, sum = 0.0;
        for (std::uint64_t k = 0; pi != 0.0; ++k) {
            if (k == step_cap) throw detail::timeout(step_cap);
            const auto& e = fs.draw(s, rng);
            sum += pi * e.b;
            pi *= e.a;
            s = e.next;
        }
        set.values[r] = sum;
    });
    return set;
}

struct DivergenceReport {
    std::vector<std::size_t> checkpoints;
    std::vector<double> prob_within;  // empirical P_pi(|S_n| <= x) at each checkpoint
    double x = 1.0;
    std::size_t replicas = 0;
    std::uint64_t seed = 0;
    bool strictly_decreasing = false;
};

// Tracks S_n = -log|Pi_n| under P_pi at the given checkpoints.
inline DivergenceReport divergence_diagnostic(const Model& model, std::vector<std::size_t> checkpoints, std::size_t replicas,
                                              std::uint64_t seed, double x = 1.0, int threads = 0) {
    if (null_homology(model).null_homologous)
        throw Error(ErrorCode::PreconditionRegime, "model is null-homologous; |S_n| stays bounded");
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    const FiniteSampler fs(model);
    const std::size_t m = checkpoints.size();
    std::vector<std::uint8_t> hits(replicas * m, 0);
    parallel_for(replicas, threads, [&](std::size_t r) {
        RandomStream rng(seed, r);
        std::size_t s = fs.draw_stationary(rng);
        double s_log = 0.0;
        std::size_t n = 0;
        for (std::size_t c = 0; c < m; ++c) {
            for (; n < checkpoints[c]; ++n) {
                const auto& e = fs.draw(s, rng);
                s_log -= e.log_abs_a;
                s = e.next;
            }
            hits[r * m + c] = std::abs(s_log) <= x;
        }
    });
    DivergenceReport rep;
    rep.checkpoints = checkpoints;
    rep.x = x;
    rep.replicas = replicas;
    rep.seed = seed;
    rep.prob_within.assign(m, 0.0);
    for (std::size_t r = 0; r < replicas; ++r)
        for (std::size_t c = 0; c < m; ++c) rep.prob_within[c] += hits[r * m + c];
    for (auto& p : rep.prob_within) p /= static_cast<double>(std::max<std::size_t>(replicas, 1));
    rep.strictly_decreasing = m > 1;
    for (std::size_t c = 1; c < m; ++c)
        if (!(rep.prob_within[c] < rep.prob_within[c - 1])) rep.strictly_decreasing = false;
    return rep;
}

// ---------------------------------------------------------------------------
// Generator mode: countable state spaces, coefficients in log form.

// |a| = 2^pow2_a * exp(log_abs_a) and b = sign_b * exp(log_abs_b); a zero
// sign means the coefficient is zero.
struct GeneratorStep {
    std::uint64_t next = 0;
    int sign_a = 1;
    double log_abs_a = 0.0;
    std::int64_t pow2_a = 0;
    int sign_b = 0;
    double log_abs_b = 0.0;

    static GeneratorStep affine(std::uint64_t next, double a, double b) {
        GeneratorStep s;
        s.next = next;
        s.sign_a = a > 0.0 ? 1 : (a < 0.0 ? -1 : 0);
        s.log_abs_a = a == 0.0 ? 0.0 : std::log(std::abs(a));
        s.sign_b = b > 0.0 ? 1 : (b < 0.0 ? -1 : 0);
        s.log_abs_b = b == 0.0 ? 0.0 : std::log(std::abs(b));
        return s;
    }

    double a() const { return sign_a == 0 ? 0.0 : sign_a * std::ldexp(std::exp(log_abs_a), static_cast<int>(pow2_a)); }
    double b() const { return sign_b == 0 ? 0.0 : sign_b * std::exp(log_abs_b); }
};

struct GeneratorModel {
    std::string name;
    std::uint64_t start = 0;
    std::function<GeneratorStep(std::uint64_t, RandomStream&)> step;
};

// Product of coefficients kept as sign, natural-log part and power of two.
struct LogProduct {
    int sign = 1;
    double ln = 0.0;
    std::int64_t pow2 = 0;

    void multiply(const GeneratorStep& s) {
        sign *= s.sign_a;
        ln += s.log_abs_a;
        pow2 += s.pow2_a;
    }

    double log_abs() const {
        return sign == 0 ? -std::numeric_limits<double>::infinity() : ln + static_cast<double>(pow2) * std::numbers::ln2;
    }

    double value() const { return scaled(sign, 0.0); }

    // Pi * b for b = sign_b * exp(log_abs_b), combining the log parts first.
    double times_b(const GeneratorStep& s) const { return scaled(sign * s.sign_b, s.log_abs_b); }

    bool is_one(double tol = 1e-12) const { return sign == 1 && std::abs(log_abs()) <= tol; }

private:
    double scaled(int sg, double extra_ln) const {
        if (sg == 0) return 0.0;
        const auto p = std::clamp<std::int64_t>(pow2, std::numeric_limits<int>::min() / 2, std::numeric_limits<int>::max() / 2);
        return sg * std::ldexp(std::exp(ln + extra_ln), static_cast<int>(p));
    }
};

inline GeneratorModel as_generator(const Model& model, std::size_t start = 0) {
    auto fs = std::make_shared<FiniteSampler>(model);
    GeneratorModel g;
    g.name = "finite";
    g.start = start;
    g.step = [fs](std::uint64_t s, RandomStream& rng) {
        const auto& e = fs->draw(static_cast<std::size_t>(s), rng);
        return GeneratorStep::affine(e.next, e.a, e.b);
    };
    return g;
}

// Walks steps transitions from start; visit(n, previous_state, step, product_after).
template <class Visitor>
void walk(const GeneratorModel& gen, std::uint64_t start, std::uint64_t steps, std::uint64_t seed, std::uint64_t stream,
          Visitor&& visit) {
    RandomStream rng(seed, stream);
    LogProduct prod;
    std::uint64_t s = start;
    for (std::uint64_t n = 1; n <= steps; ++n) {
        const GeneratorStep st = gen.step(s, rng);
        prod.multiply(st);
        visit(n, s, st, static_cast<const LogProduct&>(prod));
        s = st.next;
    }
}

inline SampleSet run_backward(const GeneratorModel& gen, std::size_t n, const DiscreteLaw& z0, const SimOptions& opt) {
    const LawSampler zs(z0);
    SampleSet set;
    set.seed = opt.seed;
    set.n = n;
    set.values.resize(opt.replicas);
    std::vector<std::uint8_t> flags(opt.replicas, 0);
    parallel_for(opt.replicas, opt.threads, [&](std::size_t r) {
        RandomStream rng(opt.seed, r);
        const double z = zs.draw(rng);
        LogProduct prod;
        double sum = 0.0;
        std::uint64_t s = gen.start;
        for (std::size_t k = 0; k < n; ++k) {
            const GeneratorStep st = gen.step(s, rng);
            sum += prod.times_b(st);
            prod.multiply(st);
            s = st.next;
        }
        const double v = z == 0.0 ? sum : prod.value() * z + sum;
        set.values[r] = v;
        flags[r] = !std::isfinite(v);
    });
    detail::collect_overflow(set, flags);
    return set;
}

inline SampleSet run_forward(const GeneratorModel& gen, std::size_t n, const DiscreteLaw& z0, const SimOptions& opt) {
    const LawSampler zs(z0);
    SampleSet set;
    set.seed = opt.seed;
    set.n = n;
    set.values.resize(opt.replicas);
    std::vector<std::uint8_t> flags(opt.replicas, 0);
    parallel_for(opt.replicas, opt.threads, [&](std::size_t r) {
        RandomStream rng(opt.seed, r);
        double v = zs.draw(rng);
        std::uint64_t s = gen.start;
        for (std::size_t k = 0; k < n; ++k) {
            const GeneratorStep st = gen.step(s, rng);
            v = st.a() * v + st.b();
            s = st.next;
        }
        set.values[r] = v;
        flags[r] = !std::isfinite(v);
    });
    detail::collect_overflow(set, flags);
    return set;
}

inline ExcursionBatch sample_excursions(const GeneratorModel& gen, std::uint64_t i, std::size_t count, std::uint64_t seed,
                                        std::uint64_t step_cap = kDefaultStepCap, int threads = 0) {
    ExcursionBatch batch;
    batch.seed = seed;
    batch.step_cap = step_cap;
    batch.samples.resize(count);
    parallel_for(count, threads, [&](std::size_t r) {
        RandomStream rng(seed, r);
        ExcursionSample x;
        LogProduct prod;
        double sum = 0.0, w = 0.0, rise = 0.0;
        std::uint64_t s = i;
        do {
            if (x.tau == step_cap) throw detail::timeout(step_cap);
            const GeneratorStep st = gen.step(s, rng);
            const double term = prod.times_b(st);
            sum += term;
            w = std::max(w, std::abs(term));
            prod.multiply(st);
            rise = std::max(rise, prod.log_abs());
            s = st.next;
            ++x.tau;
        } while (s != i);
        x.a_i = prod.value();
        x.b_i = sum;
        x.w_i = w;
        x.s_tau = -prod.log_abs();
        x.pi_is_one = prod.is_one();
        x.log_overshoot = rise;
        batch.samples[r] = x;
    });
    detail::locate_hat_tau(batch);
    return batch;
}

// Flower chain on {0, 1, 2, ...}: state 0 stays put with probability p_stay
// or jumps to petal i with probability p_0i = (1 - p_stay) q_i; petal i
// always returns to 0.
struct FlowerParams {
    double p_stay = 0.5;
    std::string petals = "geometric:0.5";
};

class PetalWeights {
public:
    explicit PetalWeights(const std::string& spec) {
        const auto colon = spec.find(':');
        const std::string kind = spec.substr(0, colon);
        const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
        if (kind == "geometric") {
            ratio_ = std::stod(rest.empty() ? "0.5" : rest);
            if (!(ratio_ > 0.0 && ratio_ < 1.0)) throw Error(ErrorCode::BadShape, "geometric petal ratio must lie in (0,1)");
        } else if (kind == "weights") {
            std::stringstream ss(rest);
            std::string item;
            double total = 0.0;
            while (std::getline(ss, item, ',')) {
                const double w = std::stod(item);
                if (!(w > 0.0)) throw Error(ErrorCode::BadWeights, "petal weights must be positive");
                finite_.push_back(w);
                total += w;
            }
            if (finite_.empty()) throw Error(ErrorCode::BadWeights, "no petal weights given");
            double cum = 0.0;
            for (auto& w : finite_) {
                w /= total;
                cum += w;
                cum_.push_back(cum);
            }
            cum_.back() = 1.0;
        } else {
            throw Error(ErrorCode::BadShape, "unknown petal specification '" + spec + "'");
        }
    }

    // q_i for i >= 1.
    double prob(std::uint64_t i) const {
        if (finite_.empty()) return (1.0 - ratio_) * std::pow(ratio_, static_cast<double>(i - 1));
        return i >= 1 && i <= finite_.size() ? finite_[i - 1] : 0.0;
    }

    std::uint64_t sample(RandomStream& rng) const {
        const double u = rng.uniform();
        if (finite_.empty()) return 1 + static_cast<std::uint64_t>(std::floor(std::log1p(-u) / std::log(ratio_)));
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        return 1 + std::min<std::uint64_t>(static_cast<std::uint64_t>(it - cum_.begin()), finite_.size() - 1);
    }

private:
    double ratio_ = 0.0;
    std::vector<double> finite_;
    std::vector<double> cum_;
};

// Coefficients: (1, 1) on (0,0); (e^{1/p_0i}, 1) on (0,i); and
// (e^{-1/p_0i} / 2, e^{-1/p_0i}) on (i,0), so each petal round trip
// multiplies Pi by exactly 1/2.
inline GeneratorModel flower_generator(const FlowerParams& params = {}) {
    if (!(params.p_stay >= 0.0 && params.p_stay < 1.0)) throw Error(ErrorCode::BadShape, "p_stay must lie in [0,1)");
    auto weights = std::make_shared<PetalWeights>(params.petals);
    const double p_stay = params.p_stay;
    GeneratorModel g;
    g.name = "flower";
    g.start = 0;
    g.step = [weights, p_stay](std::uint64_t s, RandomStream& rng) {
        GeneratorStep st;
        if (s == 0) {
            const double u = rng.uniform();
            if (u < p_stay) {
                st.next = 0;
                st.sign_b = 1;
                return st;
            }
            const std::uint64_t petal = weights->sample(rng);
            st.next = petal;
            st.log_abs_a = 1.0 / ((1.0 - p_stay) * weights->prob(petal));
            st.sign_b = 1;
            return st;
        }
        const double inv_p = 1.0 / ((1.0 - p_stay) * weights->prob(s));
        st.next = 0;
        st.log_abs_a = -inv_p;
        st.pow2_a = -1;
        st.sign_b = 1;
        st.log_abs_b = -inv_p;
        return st;
    };
    return g;
}

} // namespace perpetua
