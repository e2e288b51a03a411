#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "vaelab/checkpoint.hpp"
#include "vaelab/dataset.hpp"
#include "vaelab/manifest.hpp"
#include "vaelab/model.hpp"
#include "vaelab/objectives.hpp"
#include "vaelab/probe.hpp"

namespace vaelab {

struct MetricsRecord {
    int epoch = 0;
    double recon = 0;
    double kl = 0;   // diagnostic KL, the same formula for every objective
    double reg = 0;  // the objective's own regularizer value
    double acc_train = std::nan("");
    double acc_test = std::nan("");
};

// Running check of the per-sample mean-norm bound while training
struct ClipInstrumentation {
    double bound = 0;
    double max_norm = 0;
    int64_t violations = 0;
    int64_t batches_checked = 0;
};

template <typename T>
struct TrainResult {
    std::vector<MetricsRecord> log;
    bool diverged = false;
    int diverged_epoch = -1;
    int diverged_batch = -1;
    std::string divergence_message;
    ClipInstrumentation clip;
    std::shared_ptr<Vae<T>> model;
    std::shared_ptr<Probe<T>> probe;  // null when the probe is disabled
};

namespace detail {

template <typename T>
Tensor<T> noise_like(const Shape& shape, Rng& rng) {
    std::vector<T> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<T>(rng.normal());
    return Tensor<T>(Shape(shape), std::move(data));
}

}  // namespace detail

inline ModelPreset preset_from_manifest(const RunManifest& m) {
    ModelPreset p = m.preset == PresetId::cnn_main
                        ? ModelPreset::cnn_main(m.z_dim)
                        : ModelPreset::toy_dense_2d(m.activation, m.z_dim);
    if (m.preset == PresetId::cnn_main) p.activation = m.activation;
    return p;
}

// Deterministic evaluation codes: z = mu, clipped when the objective clips.
template <typename T>
Tensor<T> encode_eval_mu(const Vae<T>& model, const ObjectiveConfig& obj, const Tensor<T>& images,
                         int eval_batch = 512) {
    const int n = images.dim(0);
    const int D = model.preset().z_dim;
    const int side = model.preset().image_side;
    const size_t per = static_cast<size_t>(side) * side;
    std::vector<T> codes(static_cast<size_t>(n) * D);
    for (int start = 0; start < n; start += eval_batch) {
        const int b = std::min(eval_batch, n - start);
        std::vector<T> chunk(images.values().begin() + start * per,
                             images.values().begin() + (start + b) * per);
        Tensor<T> x({b, 1, side, side}, std::move(chunk));
        auto stats = model.encode(nullptr, x);
        Tensor<T> mu = obj.clip.enabled
                           ? latent_clip<T>(nullptr, stats.mu, obj.clip.bound(D), obj.clip.stop_grad)
                           : stats.mu;
        std::copy_n(mu.data(), static_cast<size_t>(b) * D, codes.begin() + static_cast<size_t>(start) * D);
    }
    return Tensor<T>({n, D}, std::move(codes));
}

// Probe inputs are standardized by the clip coefficient when clipping is on:
// clipped means spread to per-dimension scale ~c, and feeding the raw scale
// into a fixed-width classifier just slows its convergence by the same
// factor. The constant is part of the run config, not a learned quantity, so
// this keeps the accuracy metric comparable across objectives.
template <typename T>
Tensor<T> probe_input(const ObjectiveConfig& obj, const Tensor<T>& codes) {
    if (!obj.clip.enabled) return codes;
    const T s = static_cast<T>(1.0 / obj.clip.coefficient);
    std::vector<T> scaled(codes.values().begin(), codes.values().end());
    for (auto& v : scaled) v *= s;
    return Tensor<T>(codes.shape(), std::move(scaled));
}

// Evaluation with sampled z instead of the deterministic mu codes; reported
// alongside the mean-code accuracy so the gap stays visible.
template <typename T>
double probe_accuracy_stochastic(const Vae<T>& model, const Probe<T>& probe,
                                 const ObjectiveConfig& obj, const Tensor<T>& images,
                                 const std::vector<int>& labels, uint64_t seed,
                                 int eval_batch = 512) {
    const int n = images.dim(0);
    const int D = model.preset().z_dim;
    const int side = model.preset().image_side;
    const size_t per = static_cast<size_t>(side) * side;
    Rng rng(derive_seed(seed, "probe-eval-noise"));
    int64_t hits = 0;
    for (int start = 0; start < n; start += eval_batch) {
        const int b = std::min(eval_batch, n - start);
        std::vector<T> chunk(images.values().begin() + start * per,
                             images.values().begin() + (start + b) * per);
        Tensor<T> x({b, 1, side, side}, std::move(chunk));
        auto stats = model.encode(nullptr, x);
        if (obj.clip.enabled) {
            stats.mu = latent_clip<T>(nullptr, stats.mu, obj.clip.bound(D), obj.clip.stop_grad);
        }
        Tensor<T> eps = detail::noise_like<T>({b, D}, rng);
        Tensor<T> z = reparameterize<T>(nullptr, stats, eps);
        Tensor<T> logits = probe.forward(nullptr, probe_input(obj, z));
        std::vector<int> lab(labels.begin() + start, labels.begin() + start + b);
        hits += static_cast<int64_t>(std::lround(accuracy(logits, lab) * b));
    }
    return static_cast<double>(hits) / n;
}

template <typename T>
double probe_accuracy(const Probe<T>& probe, const Tensor<T>& codes, const std::vector<int>& labels,
                      int eval_batch = 1024) {
    const int n = codes.dim(0), D = codes.dim(1);
    int64_t hits = 0;
    for (int start = 0; start < n; start += eval_batch) {
        const int b = std::min(eval_batch, n - start);
        std::vector<T> chunk(codes.values().begin() + static_cast<size_t>(start) * D,
                             codes.values().begin() + static_cast<size_t>(start + b) * D);
        Tensor<T> z({b, D}, std::move(chunk));
        Tensor<T> logits = probe.forward(nullptr, z);
        std::vector<int> lab(labels.begin() + start, labels.begin() + start + b);
        hits += static_cast<int64_t>(std::lround(accuracy(logits, lab) * b));
    }
    return static_cast<double>(hits) / n;
}

// One full training run. Deterministic given the manifest: the master seed
// fans out into independent weight / shuffle / noise streams, and the probe
// phase consumes none of them, so disabling the probe cannot move the VAE
// trajectory.
template <typename T>
TrainResult<T> train_run(const RunManifest& m, const Dataset<T>& train_full,
                         const Dataset<T>& test_full) {
    m.validate();
    Dataset<T> train = (m.subset_train > 0 && m.subset_train < train_full.size())
                           ? train_full.take(m.subset_train)
                           : train_full;
    Dataset<T> test = (m.subset_test > 0 && m.subset_test < test_full.size())
                          ? test_full.take(m.subset_test)
                          : test_full;

    const ModelPreset preset = preset_from_manifest(m);
    const ObjectiveConfig& obj = m.objective;
    obj.validate();
    const double clip_bound = obj.clip.bound(preset.z_dim);

    TrainResult<T> out;
    out.model = std::make_shared<Vae<T>>(preset, derive_seed(m.seed, "vae-weights"));
    if (m.probe_enabled) {
        out.probe = std::make_shared<Probe<T>>(preset.z_dim, m.probe_hidden,
                                               derive_seed(m.seed, "probe-weights"));
    }
    out.clip.bound = clip_bound;

    std::vector<Tensor<T>> vae_params = out.model->parameters();
    auto vae_opt = AdamState<T>::init(vae_params, m.optim);
    std::vector<Tensor<T>> probe_params;
    AdamState<T> probe_opt;
    if (out.probe) {
        probe_params = out.probe->parameters();
        probe_opt = AdamState<T>::init(probe_params, m.optim);
    }

    Rng noise(derive_seed(m.seed, "noise"));
    const uint64_t shuffle_seed = derive_seed(m.seed, "shuffle");
    const int D = preset.z_dim;

    for (int epoch = 0; epoch < m.epochs; ++epoch) {
        BatchPlan plan{m.batch_size, shuffle_seed, m.shuffle, m.drop_last};
        const auto batches = epoch_batches(plan, train.size(), epoch);
        double sum_recon = 0, sum_kl = 0, sum_reg = 0;
        int batch_index = 0;
        try {
            for (const auto& idx : batches) {
                Batch<T> batch = gather(train, idx);
                const int B = batch.images.dim(0);

                // phase 1: update the VAE, probe untouched
                Tape<T> tape;
                auto stats = out.model->encode(&tape, batch.images);
                if (obj.clip.enabled) {
                    stats.mu = latent_clip(&tape, stats.mu, clip_bound, obj.clip.stop_grad);
                }
                Tensor<T> eps = detail::noise_like<T>({B, D}, noise);
                Tensor<T> z = reparameterize(&tape, stats, eps);
                Tensor<T> xr = out.model->decode(&tape, z);
                LossBreakdown<T> loss = compute_loss(&tape, batch.images, xr, stats, obj);
                tape.backward(loss.total);
                adam_step(vae_params, vae_opt);
                zero_grads(vae_params);

                sum_recon += static_cast<double>(loss.recon.item());
                sum_kl += loss.diagnostic_kl;
                sum_reg += static_cast<double>(loss.regularizer.item());

                if (obj.clip.enabled) {
                    for (int b = 0; b < B; ++b) {
                        double r2 = 0;
                        const T* row = stats.mu.data() + static_cast<size_t>(b) * D;
                        for (int d = 0; d < D; ++d) {
                            r2 += static_cast<double>(row[d]) * static_cast<double>(row[d]);
                        }
                        const double r = std::sqrt(r2);
                        out.clip.max_norm = std::max(out.clip.max_norm, r);
                        if (r > clip_bound * (1.0 + 1e-6)) out.clip.violations++;
                    }
                    out.clip.batches_checked++;
                }

                // phase 2: update the probe on freshly encoded, detached codes
                if (out.probe) {
                    auto pstats = out.model->encode(nullptr, batch.images);
                    Tensor<T> pmu = obj.clip.enabled
                                        ? latent_clip<T>(nullptr, pstats.mu, clip_bound,
                                                         obj.clip.stop_grad)
                                        : pstats.mu;
                    Tensor<T> zp = probe_input(obj, pmu).detach();
                    Tape<T> ptape;
                    Tensor<T> logits = out.probe->forward(&ptape, zp);
                    Tensor<T> ce = softmax_cross_entropy(&ptape, logits, batch.labels);
                    ptape.backward(ce);
                    adam_step(probe_params, probe_opt);
                    zero_grads(probe_params);
                }
                ++batch_index;
            }
        } catch (const NumericError& e) {
            out.diverged = true;
            out.diverged_epoch = epoch;
            out.diverged_batch = batch_index;
            out.divergence_message = e.what();
            MetricsRecord rec;
            rec.epoch = epoch;
            rec.recon = std::nan("");
            rec.kl = std::nan("");
            rec.reg = std::nan("");
            out.log.push_back(rec);
            return out;
        }

        MetricsRecord rec;
        rec.epoch = epoch;
        const double nb = static_cast<double>(batches.size());
        rec.recon = sum_recon / nb;
        rec.kl = sum_kl / nb;
        rec.reg = sum_reg / nb;
        if (out.probe) {
            Tensor<T> train_codes = encode_eval_mu(*out.model, obj, train.images);
            Tensor<T> test_codes = encode_eval_mu(*out.model, obj, test.images);
            rec.acc_train = probe_accuracy(*out.probe, probe_input(obj, train_codes), train.labels);
            rec.acc_test = probe_accuracy(*out.probe, probe_input(obj, test_codes), test.labels);
        }
        out.log.push_back(rec);
    }
    return out;
}

inline std::string metrics_csv(const std::vector<MetricsRecord>& log) {
    std::ostringstream out;
    out << "epoch,recon,kl,reg,acc_train,acc_test\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        out << buf << sep;
    };
    for (const auto& r : log) {
        out << r.epoch << ',';
        put(r.recon, ',');
        put(r.kl, ',');
        put(r.reg, ',');
        put(r.acc_train, ',');
        put(r.acc_test, '\n');
    }
    return out.str();
}

template <typename T>
void save_run_outputs(const std::string& dir, const RunManifest& m, TrainResult<T>& result) {
    std::filesystem::create_directories(dir);
    m.save(dir + "/manifest.txt");
    {
        std::ofstream f(dir + "/metrics.csv");
        if (!f) throw IoError("cannot write metrics.csv in " + dir);
        f << metrics_csv(result.log);
    }
    save_checkpoint(dir + "/checkpoint.bin", result.model->named_parameters());
    if (result.probe) save_checkpoint(dir + "/probe.bin", result.probe->named_parameters());
    {
        std::ofstream f(dir + "/result.txt");
        f << "status = " << (result.diverged ? "diverged" : "ok") << "\n";
        if (result.diverged) {
            f << "diverged_epoch = " << result.diverged_epoch << "\n";
            f << "diverged_batch = " << result.diverged_batch << "\n";
        }
        if (!result.log.empty() && !result.diverged) {
            const auto& r = result.log.back();
            char buf[128];
            std::snprintf(buf, sizeof(buf), "final_recon = %.9g\nfinal_kl = %.9g\nfinal_reg = %.9g\n",
                          r.recon, r.kl, r.reg);
            f << buf;
            std::snprintf(buf, sizeof(buf), "final_acc_train = %.9g\nfinal_acc_test = %.9g\n",
                          r.acc_train, r.acc_test);
            f << buf;
        }
        if (m.objective.clip.enabled) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "clip_bound = %.9g\nclip_max_norm = %.9g\nclip_violations = %lld\n",
                          result.clip.bound, result.clip.max_norm,
                          static_cast<long long>(result.clip.violations));
            f << buf;
        }
    }
}

// ---------------------------------------------------------------------------
// experiment matrix

template <typename T>
struct MatrixEntry {
    std::string dataset;
    std::string label;  // objective label, e.g. "mu_vae_1"
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    TrainResult<T> result;
};

// The four-objective experiment list with its clip coefficients. The mu-VAE
// cells use the |log sigma^2| variance term: the raw form's constant downhill
// gradient destabilizes shared encoders over long runs (it stays available as
// ObjectiveConfig's default for studying exactly that), while the absolute
// form pins sigma near 1 and leaves the spread work to the means.
inline std::vector<std::pair<std::string, ObjectiveConfig>> standard_objectives() {
    auto mu1 = ObjectiveConfig::mu_vae(3.0);
    auto mu2 = ObjectiveConfig::mu_vae(6.0);
    mu1.variance_reg = VarianceReg::abs_log_var;
    mu2.variance_reg = VarianceReg::abs_log_var;
    return {
        {"vae", ObjectiveConfig::elbo()},
        {"beta_vae_4", ObjectiveConfig::beta_vae(4.0)},
        {"mu_vae_1", mu1},
        {"mu_vae_2", mu2},
    };
}

// Runs datasets x objectives x seeds. Cells are independent; failures are
// reported per cell and the rest of the matrix continues. jobs > 1 runs cells
// in parallel threads (each cell is internally single-threaded and owns all
// of its state, so results do not depend on jobs).
template <typename T>
std::vector<MatrixEntry<T>> run_matrix(
    const RunManifest& base, const std::vector<std::string>& datasets,
    const std::vector<std::pair<std::string, ObjectiveConfig>>& objectives,
    const std::vector<uint64_t>& seeds,
    const std::function<const Dataset<T>&(const std::string&, Split)>& data, int jobs = 1) {
    if (seeds.empty()) throw ContractError("run_matrix needs at least one seed");
    std::vector<MatrixEntry<T>> entries;
    for (const auto& ds : datasets) {
        for (const auto& [label, obj] : objectives) {
            for (uint64_t seed : seeds) {
                MatrixEntry<T> e;
                e.dataset = ds;
                e.label = label;
                e.seed = seed;
                entries.push_back(std::move(e));
            }
        }
    }
    std::mutex mu;
    size_t next = 0;
    auto worker = [&] {
        for (;;) {
            size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= entries.size()) return;
                i = next++;
            }
            MatrixEntry<T>& e = entries[i];
            try {
                RunManifest m = base;
                m.dataset = e.dataset;
                for (const auto& [label, obj] : objectives) {
                    if (label == e.label) m.objective = obj;
                }
                m.seed = e.seed;
                e.result = train_run<T>(m, data(e.dataset, Split::train), data(e.dataset, Split::test));
                e.ok = !e.result.diverged;
                if (e.result.diverged) e.error = "diverged: " + e.result.divergence_message;
            } catch (const std::exception& ex) {
                e.ok = false;
                e.error = ex.what();
            }
        }
    };
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return entries;
}

// Mean final metrics per (dataset, objective), the Table-1-style comparison.
template <typename T>
std::string matrix_table(const std::vector<MatrixEntry<T>>& entries) {
    struct Agg {
        double recon = 0, kl = 0, acc = 0;
        int n = 0;
        int failed = 0;
    };
    std::map<std::pair<std::string, std::string>, Agg> cells;
    for (const auto& e : entries) {
        Agg& a = cells[{e.dataset, e.label}];
        if (!e.ok || e.result.log.empty()) {
            a.failed++;
            continue;
        }
        const auto& r = e.result.log.back();
        a.recon += r.recon;
        a.kl += r.kl;
        a.acc += r.acc_test;
        a.n++;
    }
    std::ostringstream out;
    out << "dataset,objective,seeds,final_recon,final_kl,final_acc_test,failed\n";
    char buf[160];
    for (const auto& [key, a] : cells) {
        if (a.n > 0) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.9g,%.9g,%.9g,%d\n", key.first.c_str(),
                          key.second.c_str(), a.n, a.recon / a.n, a.kl / a.n, a.acc / a.n, a.failed);
        } else {
            std::snprintf(buf, sizeof(buf), "%s,%s,0,nan,nan,nan,%d\n", key.first.c_str(),
                          key.second.c_str(), a.failed);
        }
        out << buf;
    }
    return out.str();
}

}  // namespace vaelab
