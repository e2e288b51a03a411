#pragma once

#include <cmath>
#include <string>

#include "vaelab/model.hpp"
#include "vaelab/ops.hpp"

namespace vaelab {

enum class ObjectiveKind { elbo, beta_vae, mu_vae };

inline const char* objective_name(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::elbo: return "elbo";
        case ObjectiveKind::beta_vae: return "beta";
        case ObjectiveKind::mu_vae: return "mu";
    }
    return "?";
}

inline ObjectiveKind objective_from_name(const std::string& s) {
    if (s == "elbo") return ObjectiveKind::elbo;
    if (s == "beta" || s == "beta_vae") return ObjectiveKind::beta_vae;
    if (s == "mu" || s == "mu_vae") return ObjectiveKind::mu_vae;
    throw ConfigError("unknown objective '" + s + "'");
}

// How the log-variance term enters the mu-VAE regularizer. All three push
// log sigma^2 toward zero from above; the raw form is the default and is
// unbounded below, which the trainer's divergence policy leaves observable.
enum class VarianceReg { log_var_raw, abs_log_var, exp_minus_log_minus_one };

inline const char* variance_reg_name(VarianceReg v) {
    switch (v) {
        case VarianceReg::log_var_raw: return "log_var_raw";
        case VarianceReg::abs_log_var: return "abs_log_var";
        case VarianceReg::exp_minus_log_minus_one: return "exp_minus_log_minus_one";
    }
    return "?";
}

inline VarianceReg variance_reg_from_name(const std::string& s) {
    if (s == "log_var_raw") return VarianceReg::log_var_raw;
    if (s == "abs_log_var") return VarianceReg::abs_log_var;
    if (s == "exp_minus_log_minus_one") return VarianceReg::exp_minus_log_minus_one;
    throw ConfigError("unknown variance regularizer '" + s + "'");
}

struct ObjectiveConfig {
    ObjectiveKind kind = ObjectiveKind::elbo;
    double beta = 1.0;
    ClipConfig clip;
    VarianceReg variance_reg = VarianceReg::log_var_raw;

    void validate() const {
        if (kind == ObjectiveKind::beta_vae && beta <= 0) {
            throw ConfigError("beta must be positive");
        }
        clip.validate();
        if (kind == ObjectiveKind::mu_vae && clip.enabled && clip.coefficient <= 0) {
            throw ConfigError("clip coefficient must be positive");
        }
    }

    static ObjectiveConfig elbo() { return {}; }
    static ObjectiveConfig beta_vae(double beta) {
        ObjectiveConfig c;
        c.kind = ObjectiveKind::beta_vae;
        c.beta = beta;
        return c;
    }
    static ObjectiveConfig mu_vae(double clip_coefficient) {
        ObjectiveConfig c;
        c.kind = ObjectiveKind::mu_vae;
        c.clip.enabled = true;
        c.clip.coefficient = clip_coefficient;
        return c;
    }
};

template <typename T>
struct LossBreakdown {
    Tensor<T> total;        // optimized
    Tensor<T> recon;        // squared error, summed over pixels, mean over batch
    Tensor<T> regularizer;  // unweighted regularizer of the chosen objective
    double diagnostic_kl = 0;  // standard KL metric, identical for every objective
};

// (1/B) * sum_i sum_j (x_j - x'_j)^2
template <typename T>
Tensor<T> recon_loss(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& x_rec) {
    detail::require_same_shape(x, x_rec, "recon_loss");
    const T inv_b = T(1) / static_cast<T>(x.dim(0));
    return mul_scalar(tape, sum(tape, square(tape, sub(tape, x, x_rec))), inv_b);
}

// batch mean of 1/2 sum_d [mu^2 + exp(log_var) - log_var - 1]
template <typename T>
Tensor<T> kl_loss(Tape<T>* tape, const LatentStats<T>& stats) {
    const int B = stats.mu.dim(0), D = stats.mu.dim(1);
    Tensor<T> s = sum(tape, square(tape, stats.mu));
    s = add(tape, s, sum(tape, exp(tape, stats.log_var)));
    s = sub(tape, s, sum(tape, stats.log_var));
    s = add_scalar(tape, s, static_cast<T>(-static_cast<double>(B) * D));
    return mul_scalar(tape, s, T(0.5) / static_cast<T>(B));
}

// Tape-free KL diagnostic used by the metrics log; the same formula as
// kl_loss for every objective so the reported curves are comparable.
template <typename T>
double diagnostic_kl(const LatentStats<T>& stats) {
    const int B = stats.mu.dim(0), D = stats.mu.dim(1);
    const T* mu = stats.mu.data();
    const T* lv = stats.log_var.data();
    double acc = 0.0;
    for (int64_t i = 0; i < static_cast<int64_t>(B) * D; ++i) {
        const double m = static_cast<double>(mu[i]);
        const double l = static_cast<double>(lv[i]);
        acc += m * m + std::exp(l) - l - 1.0;
    }
    return 0.5 * acc / static_cast<double>(B);
}

// (1/B) * | sum_i sum_d mu_d^(i) |  -- the absolute value sits outside both
// sums, so per-sample means may spread while the aggregate stays near zero.
template <typename T>
Tensor<T> mu_reg(Tape<T>* tape, const LatentStats<T>& stats) {
    const T inv_b = T(1) / static_cast<T>(stats.mu.dim(0));
    return mul_scalar(tape, abs(tape, sum(tape, stats.mu)), inv_b);
}

// batch mean of sum_d f(log_var_d) for the chosen variant
template <typename T>
Tensor<T> variance_reg(Tape<T>* tape, const LatentStats<T>& stats, VarianceReg variant) {
    const int B = stats.log_var.dim(0), D = stats.log_var.dim(1);
    const T inv_b = T(1) / static_cast<T>(B);
    switch (variant) {
        case VarianceReg::log_var_raw:
            return mul_scalar(tape, sum(tape, stats.log_var), inv_b);
        case VarianceReg::abs_log_var:
            return mul_scalar(tape, sum(tape, abs(tape, stats.log_var)), inv_b);
        case VarianceReg::exp_minus_log_minus_one: {
            Tensor<T> s = sub(tape, sum(tape, exp(tape, stats.log_var)), sum(tape, stats.log_var));
            s = add_scalar(tape, s, static_cast<T>(-static_cast<double>(B) * D));
            return mul_scalar(tape, s, inv_b);
        }
    }
    throw ConfigError("unknown variance regularizer variant");
}

// total = recon + |aggregate mu| + variance term; stats must already be
// clipped so the regularizer sees what the decoder saw.
template <typename T>
LossBreakdown<T> mu_vae_loss(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& x_rec,
                             const LatentStats<T>& stats,
                             VarianceReg variant = VarianceReg::log_var_raw) {
    LossBreakdown<T> out;
    out.recon = recon_loss(tape, x, x_rec);
    out.regularizer = add(tape, mu_reg(tape, stats), variance_reg(tape, stats, variant));
    out.total = add(tape, out.recon, out.regularizer);
    out.diagnostic_kl = diagnostic_kl(stats);
    return out;
}

// total = recon + beta * KL; beta = 1 recovers the plain negative ELBO with
// squared error standing in for the log-likelihood term.
template <typename T>
LossBreakdown<T> beta_vae_loss(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& x_rec,
                               const LatentStats<T>& stats, double beta) {
    if (beta <= 0) throw ConfigError("beta must be positive");
    LossBreakdown<T> out;
    out.recon = recon_loss(tape, x, x_rec);
    out.regularizer = kl_loss(tape, stats);
    out.total = add(tape, out.recon, mul_scalar(tape, out.regularizer, static_cast<T>(beta)));
    out.diagnostic_kl = diagnostic_kl(stats);
    return out;
}

template <typename T>
LossBreakdown<T> elbo_loss(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& x_rec,
                           const LatentStats<T>& stats) {
    return beta_vae_loss(tape, x, x_rec, stats, 1.0);
}

template <typename T>
LossBreakdown<T> compute_loss(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& x_rec,
                              const LatentStats<T>& stats, const ObjectiveConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case ObjectiveKind::elbo: return elbo_loss(tape, x, x_rec, stats);
        case ObjectiveKind::beta_vae: return beta_vae_loss(tape, x, x_rec, stats, cfg.beta);
        case ObjectiveKind::mu_vae: return mu_vae_loss(tape, x, x_rec, stats, cfg.variance_reg);
    }
    throw ConfigError("unknown objective kind");
}

}  // namespace vaelab
