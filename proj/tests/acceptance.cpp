// Acceptance suite: runs every release criterion end to end and prints one
// [PASS]/[FAIL] line per criterion. Exit code 0 only if all pass.
//
// Dataset: synthesized MNIST-format IDX files (full 60000/10000) unless
// VAELAB_DATA_DIR points at a directory containing real files laid out as
// <dir>/mnist/train-images-idx3-ubyte etc.
//
// The training matrix (criteria 3-6) is the expensive part: 4 objectives x 3
// seeds at desk scale (10k train / 2k test, 20 epochs, batch 64). Cells run
// in parallel; each cell is internally deterministic and single-threaded.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vaelab/eval_export.hpp"
#include "vaelab/grad_check.hpp"
#include "vaelab/synth_data.hpp"
#include "vaelab/trainer.hpp"

using namespace vaelab;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string id;
    bool pass = false;
    std::string detail;
};

std::vector<Criterion>& results() {
    static std::vector<Criterion> r;
    return r;
}

void report(const std::string& id, bool pass, const std::string& detail) {
    results().push_back({id, pass, detail});
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// data setup

struct AcceptanceData {
    fs::path dir;       // <dir>/mnist/...
    Dataset<float> train_full;
    Dataset<float> test_full;
};

AcceptanceData setup_data() {
    AcceptanceData d;
    const char* env = std::getenv("VAELAB_DATA_DIR");
    if (env && *env) {
        d.dir = env;
        std::printf("# using dataset files under %s\n", env);
    } else {
        d.dir = fs::temp_directory_path() / "vaelab_acceptance_data";
        const fs::path marker = d.dir / "mnist" / "t10k-labels-idx1-ubyte";
        if (!fs::exists(marker)) {
            std::printf("# generating synthetic IDX corpus (60000/10000) under %s\n",
                        d.dir.string().c_str());
            std::fflush(stdout);
            SynthConfig cfg;
            cfg.style = SynthStyle::digits;
            write_synth_idx((d.dir / "mnist").string(), cfg);
        } else {
            std::printf("# reusing synthetic IDX corpus under %s\n", d.dir.string().c_str());
        }
    }
    const fs::path mnist = d.dir / "mnist";
    d.train_full = load_idx<float>((mnist / "train-images-idx3-ubyte").string(),
                                   (mnist / "train-labels-idx1-ubyte").string(), Split::train);
    d.test_full = load_idx<float>((mnist / "t10k-images-idx3-ubyte").string(),
                                  (mnist / "t10k-labels-idx1-ubyte").string(), Split::test);
    return d;
}

RunManifest desk_manifest() {
    RunManifest m;
    m.dataset = "mnist";
    m.preset = PresetId::cnn_main;
    m.z_dim = 10;
    m.epochs = 20;
    m.batch_size = 64;
    m.subset_train = 10000;
    m.subset_test = 2000;
    return m;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient correctness

void criterion_grad_correctness() {
    double worst_op = 0;
    std::string worst_name = "-";
    auto track = [&](const char* name, double err) {
        if (err > worst_op) {
            worst_op = err;
            worst_name = name;
        }
    };
    Rng rng(1001);
    using Fn = std::function<Tensor<double>(Tape<double>*, const Tensor<double>&)>;
    auto scalarize = [](Fn inner) {
        return [inner](Tape<double>* t, const Tensor<double>& x) {
            return sum(t, square(t, inner(t, x)));
        };
    };

    // elementwise ops on inputs held away from kinks and domain edges
    std::vector<double> vals(24);
    for (auto& v : vals) v = rng.uniform(0.2, 1.6) * (rng.uniform() < 0.5 ? -1 : 1);
    Tensor<double> x({4, 6}, vals);
    std::vector<double> pos(24);
    for (auto& v : pos) v = rng.uniform(0.3, 2.0);
    Tensor<double> xp({4, 6}, pos);

    const std::vector<std::pair<const char*, Fn>> elementwise = {
        {"add", [&](Tape<double>* t, const Tensor<double>& v) { return add(t, v, xp); }},
        {"sub", [&](Tape<double>* t, const Tensor<double>& v) { return sub(t, v, xp); }},
        {"mul", [&](Tape<double>* t, const Tensor<double>& v) { return mul(t, v, xp); }},
        {"add_scalar", [](Tape<double>* t, const Tensor<double>& v) { return add_scalar(t, v, 0.7); }},
        {"mul_scalar", [](Tape<double>* t, const Tensor<double>& v) { return mul_scalar(t, v, -1.3); }},
        {"exp", [](Tape<double>* t, const Tensor<double>& v) { return exp(t, v); }},
        {"tanh", [](Tape<double>* t, const Tensor<double>& v) { return tanh(t, v); }},
        {"sigmoid", [](Tape<double>* t, const Tensor<double>& v) { return sigmoid(t, v); }},
        {"relu", [](Tape<double>* t, const Tensor<double>& v) { return relu(t, v); }},
        {"leaky_relu", [](Tape<double>* t, const Tensor<double>& v) { return leaky_relu(t, v); }},
        {"square", [](Tape<double>* t, const Tensor<double>& v) { return square(t, v); }},
        {"abs", [](Tape<double>* t, const Tensor<double>& v) { return abs(t, v); }},
        {"reshape", [](Tape<double>* t, const Tensor<double>& v) { return reshape(t, v, {24}); }},
    };
    for (const auto& [name, fn] : elementwise) {
        track(name, grad_check<double>(scalarize(fn), x, 1e-3).max_rel_err);
    }
    const std::vector<std::pair<const char*, Fn>> positive = {
        {"log", [](Tape<double>* t, const Tensor<double>& v) { return log(t, v); }},
        {"sqrt", [](Tape<double>* t, const Tensor<double>& v) { return vaelab::sqrt(t, v); }},
    };
    for (const auto& [name, fn] : positive) {
        track(name, grad_check<double>(scalarize(fn), xp, 1e-3).max_rel_err);
    }

    // sum
    track("sum", grad_check<double>(
                     [](Tape<double>* t, const Tensor<double>& v) {
                         return square(t, sum(t, v));
                     },
                     x, 1e-3)
                     .max_rel_err);

    // affine: x, W, b routes
    {
        Tensor<double> a0 = Tensor<double>::randn({3, 5}, rng);
        Tensor<double> W0 = Tensor<double>::randn({5, 4}, rng);
        Tensor<double> b0 = Tensor<double>::randn({4}, rng);
        track("affine_x", grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                              return affine(t, v, W0, b0);
                          }),
                          a0, 1e-3)
                              .max_rel_err);
        track("affine_W", grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                              return affine(t, a0, v, b0);
                          }),
                          W0, 1e-3)
                              .max_rel_err);
        track("affine_b", grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                              return affine(t, a0, W0, v);
                          }),
                          b0, 1e-3)
                              .max_rel_err);
    }
    // conv2d / conv2d_transpose
    {
        Tensor<double> cx = Tensor<double>::randn({2, 1, 5, 5}, rng);
        Tensor<double> ck = Tensor<double>::randn({2, 1, 3, 3}, rng);
        for (int stride : {1, 2}) {
            track("conv2d_x", grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                                  return conv2d(t, v, ck, stride);
                              }),
                              cx, 1e-3)
                                  .max_rel_err);
            track("conv2d_K", grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                                  return conv2d(t, cx, v, stride);
                              }),
                              ck, 1e-3)
                                  .max_rel_err);
        }
        Tensor<double> tx = Tensor<double>::randn({2, 2, 3, 3}, rng);
        Tensor<double> tk = Tensor<double>::randn({2, 1, 3, 3}, rng);
        track("conv2d_transpose_x",
              grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                  return conv2d_transpose(t, v, tk, 2);
              }),
              tx, 1e-3)
                  .max_rel_err);
        track("conv2d_transpose_K",
              grad_check<double>(scalarize([&](Tape<double>* t, const Tensor<double>& v) {
                  return conv2d_transpose(t, tx, v, 2);
              }),
              tk, 1e-3)
                  .max_rel_err);
    }
    // latent_clip, both branches (rows away from the boundary)
    {
        Tensor<double> mu({2, 3}, {0.2, -0.3, 0.1, 1.8, -2.2, 1.4});
        track("latent_clip", grad_check<double>(scalarize([](Tape<double>* t, const Tensor<double>& v) {
                                 return latent_clip(t, v, 1.5);
                             }),
                             mu, 1e-4)
                                 .max_rel_err);
    }
    // softmax cross-entropy
    {
        Tensor<double> logits = Tensor<double>::randn({5, 10}, rng);
        std::vector<int> labels = {0, 4, 9, 2, 7};
        track("softmax_ce", grad_check<double>(
                                [&](Tape<double>* t, const Tensor<double>& v) {
                                    return softmax_cross_entropy(t, v, labels);
                                },
                                logits, 1e-4)
                                .max_rel_err);
    }

    // full composed mu-VAE loss on a 2-sample batch
    ModelPreset preset = ModelPreset::toy_dense_2d(Activation::tanh, 3);
    preset.image_side = 6;
    preset.dense_widths = {10};
    Vae<double> model(preset, 2025);
    Rng drng(17);
    Tensor<double> xin = Tensor<double>::uniform({2, 1, 6, 6}, drng, 0.05, 0.95);
    Tensor<double> eps({2, 3}, {0.3, -0.8, 0.5, 1.1, 0.2, -0.6});
    double clip_bound;
    {
        auto stats = model.encode(nullptr, xin);
        double n0 = 0, n1 = 0;
        for (int dd = 0; dd < 3; ++dd) {
            n0 += stats.mu.data()[dd] * stats.mu.data()[dd];
            n1 += stats.mu.data()[3 + dd] * stats.mu.data()[3 + dd];
        }
        clip_bound = std::sqrt(std::sqrt(n0 * n1));  // geometric mean of the norms
    }
    auto build = [&](Tape<double>* t) {
        auto stats = model.encode(t, xin);
        stats.mu = latent_clip(t, stats.mu, clip_bound);
        Tensor<double> z = reparameterize(t, stats, eps);
        Tensor<double> xr = model.decode(t, z);
        return mu_vae_loss(t, xin, xr, stats).total;
    };
    const double composed = grad_check_params<double>(build, model.parameters(), 1e-3).max_rel_err;

    const bool pass = worst_op < 1e-4 && composed < 1e-3;
    report("C1 gradient-correctness", pass,
           "worst per-op rel err " + fmt(worst_op) + " (" + worst_name +
               ", tol 1e-4); composed mu-VAE " + fmt(composed) + " (tol 1e-3)");
}

// ---------------------------------------------------------------------------
// criterion 2: KL Monte-Carlo oracle

void criterion_kl_oracle() {
    const int kSamples = 100000;
    Rng rng(271828);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int D = 10;
        std::vector<double> mu(D), lv(D);
        for (auto& m : mu) m = rng.uniform(-2.0, 2.0);
        for (auto& l : lv) l = rng.uniform(-1.0, 1.0);
        LatentStats<double> st{Tensor<double>({1, D}, std::vector<double>(mu)),
                               Tensor<double>({1, D}, std::vector<double>(lv))};
        const double analytic = kl_loss<double>(nullptr, st).item();
        double acc = 0;
        for (int s = 0; s < kSamples; ++s) {
            double term = 0;
            for (int d = 0; d < D; ++d) {
                const double e = rng.normal();
                const double z = mu[static_cast<size_t>(d)] +
                                 std::exp(0.5 * lv[static_cast<size_t>(d)]) * e;
                term += -0.5 * e * e - 0.5 * lv[static_cast<size_t>(d)] + 0.5 * z * z;
            }
            acc += term;
        }
        worst = std::max(worst, std::fabs(acc / kSamples - analytic) / std::fabs(analytic));
    }
    report("C2 kl-monte-carlo", worst < 0.01,
           "worst rel deviation " + fmt(worst) + " over 20 pairs, 1e5 samples (tol 1%)");
}

// ---------------------------------------------------------------------------
// criteria 3-6: the desk-scale matrix

struct MatrixData {
    std::vector<MatrixEntry<float>> entries;
    const Dataset<float>* test_full = nullptr;
    RunManifest base;
};

const MatrixEntry<float>* find_entry(const MatrixData& m, const std::string& label, uint64_t seed) {
    for (const auto& e : m.entries) {
        if (e.label == label && e.seed == seed) return &e;
    }
    return nullptr;
}

MatrixData run_desk_matrix(const AcceptanceData& data, int jobs) {
    MatrixData md;
    md.base = desk_manifest();
    md.test_full = &data.test_full;
    auto loader = [&](const std::string&, Split s) -> const Dataset<float>& {
        return s == Split::train ? data.train_full : data.test_full;
    };
    std::printf("# desk matrix: 4 objectives x 3 seeds, 20 epochs, 10k/2k subset, %d jobs\n", jobs);
    std::fflush(stdout);
    md.entries = run_matrix<float>(md.base, {"mnist"}, standard_objectives(), {1, 2, 3}, loader, jobs);
    for (const auto& e : md.entries) {
        const auto& r = e.result.log;
        std::printf("#   %s seed %llu: %s recon=%s kl=%s acc=%s\n", e.label.c_str(),
                    static_cast<unsigned long long>(e.seed), e.ok ? "ok" : "FAILED",
                    r.empty() ? "-" : fmt(r.back().recon).c_str(),
                    r.empty() ? "-" : fmt(r.back().kl).c_str(),
                    r.empty() ? "-" : fmt(r.back().acc_test).c_str());
    }
    std::fflush(stdout);
    return md;
}

void criterion_clip_invariant(const MatrixData& md) {
    int64_t violations = 0, batches = 0;
    double worst_excess = 0;
    bool all_ok = true;
    for (const auto& e : md.entries) {
        if (e.label != "mu_vae_1" && e.label != "mu_vae_2") continue;
        if (!e.ok) {
            all_ok = false;
            continue;
        }
        violations += e.result.clip.violations;
        batches += e.result.clip.batches_checked;
        worst_excess = std::max(worst_excess, e.result.clip.max_norm / e.result.clip.bound - 1.0);
    }
    report("C3 clip-invariant", all_ok && batches > 0 && violations == 0,
           std::to_string(batches) + " batches instrumented across c in {3,6} x 3 seeds, " +
               std::to_string(violations) + " violations, worst norm excess " + fmt(worst_excess));
}

void criterion_objective_orderings(const MatrixData& md) {
    int maj_a = 0, maj_b = 0, maj_c = 0, usable = 0;
    for (uint64_t seed : {1, 2, 3}) {
        const auto* elbo = find_entry(md, "vae", seed);
        const auto* beta = find_entry(md, "beta_vae_4", seed);
        const auto* mu1 = find_entry(md, "mu_vae_1", seed);
        const auto* mu2 = find_entry(md, "mu_vae_2", seed);
        if (!elbo || !beta || !mu1 || !mu2 || !elbo->ok || !beta->ok || !mu1->ok || !mu2->ok) {
            continue;
        }
        ++usable;
        const auto& re = elbo->result.log.back();
        const auto& rb = beta->result.log.back();
        const auto& r1 = mu1->result.log.back();
        const auto& r2 = mu2->result.log.back();
        const bool a = r1.recon < re.recon && re.recon < rb.recon;
        const bool b = rb.kl < re.kl && re.kl < r1.kl && re.kl < r2.kl;
        const bool c = rb.acc_test < re.acc_test && re.acc_test <= r1.acc_test &&
                       r1.acc_test <= r2.acc_test;
        maj_a += a;
        maj_b += b;
        maj_c += c;
        std::printf("#   seed %llu orderings: recon %d kl %d acc %d\n",
                    static_cast<unsigned long long>(seed), a, b, c);
    }
    const bool pass = usable == 3 && maj_a >= 2 && maj_b >= 2 && maj_c >= 2;
    report("C4 objective-orderings", pass,
           "majority over 3 seeds: recon " + std::to_string(maj_a) + "/3, kl " +
               std::to_string(maj_b) + "/3, acc " + std::to_string(maj_c) + "/3");
}

void criterion_aggregate_mean(const MatrixData& md) {
    std::map<std::string, int> pass_count, total;
    std::string detail;
    for (const auto& e : md.entries) {
        if (e.label != "mu_vae_1" && e.label != "mu_vae_2") continue;
        total[e.label]++;
        if (!e.ok) continue;
        Dataset<float> test = md.test_full->take(md.base.subset_test);
        ObjectiveConfig obj = e.label == "mu_vae_1" ? ObjectiveConfig::mu_vae(3.0)
                                                    : ObjectiveConfig::mu_vae(6.0);
        obj.variance_reg = md.base.objective.variance_reg;
        Tensor<float> codes = encode_eval_mu(*e.result.model, obj, test.images);
        LatentSummary s = latent_histograms(codes);
        const bool ok = std::fabs(s.grand_mean) <= 0.1 * s.grand_std;
        pass_count[e.label] += ok;
        detail += e.label + " seed " + std::to_string(e.seed) + ": |m|/s=" +
                  fmt(std::fabs(s.grand_mean) / std::max(s.grand_std, 1e-12)) + "; ";
    }
    const bool pass = pass_count["mu_vae_1"] >= 2 && pass_count["mu_vae_2"] >= 2 &&
                      total["mu_vae_1"] == 3 && total["mu_vae_2"] == 3;
    report("C5 aggregate-mean", pass,
           "|grand mean| <= 0.1 grand std: mu_vae_1 " + std::to_string(pass_count["mu_vae_1"]) +
               "/3, mu_vae_2 " + std::to_string(pass_count["mu_vae_2"]) + "/3 (" + detail + ")");
}

void criterion_spread(const MatrixData& md) {
    int ok_seeds = 0, usable = 0;
    std::string detail;
    for (uint64_t seed : {1, 2, 3}) {
        const auto* mu2 = find_entry(md, "mu_vae_2", seed);
        const auto* beta = find_entry(md, "beta_vae_4", seed);
        if (!mu2 || !beta || !mu2->ok || !beta->ok) continue;
        ++usable;
        Dataset<float> test = md.test_full->take(md.base.subset_test);
        ObjectiveConfig mu_obj = ObjectiveConfig::mu_vae(6.0);
        mu_obj.variance_reg = md.base.objective.variance_reg;
        Tensor<float> mu_codes = encode_eval_mu(*mu2->result.model, mu_obj, test.images);
        Tensor<float> beta_codes =
            encode_eval_mu(*beta->result.model, ObjectiveConfig::beta_vae(4.0), test.images);
        auto median_std = [](const Tensor<float>& codes) {
            LatentSummary s = latent_histograms(codes);
            std::vector<double> stds = s.stddev;
            std::sort(stds.begin(), stds.end());
            const size_t n = stds.size();
            return n % 2 ? stds[n / 2] : 0.5 * (stds[n / 2 - 1] + stds[n / 2]);
        };
        const double m2 = median_std(mu_codes), mb = median_std(beta_codes);
        detail += "seed " + std::to_string(seed) + ": " + fmt(m2) + " vs " + fmt(mb) + "; ";
        if (m2 > mb) ++ok_seeds;
    }
    report("C6 latent-spread", usable == 3 && ok_seeds == 3,
           "median per-dim std mu_vae_2 > beta_vae on all seeds: " + std::to_string(ok_seeds) +
               "/3 (" + detail + ")");
}

// ---------------------------------------------------------------------------
// criterion 7: probe non-interference (paired run, reduced scale)

void criterion_probe_noninterference(const AcceptanceData& data) {
    RunManifest m = desk_manifest();
    m.subset_train = 2000;
    m.subset_test = 500;
    m.epochs = 5;
    RunManifest off = m;
    off.probe_enabled = false;

    auto with_probe = train_run<float>(m, data.train_full, data.test_full);
    auto without = train_run<float>(off, data.train_full, data.test_full);
    auto pa = with_probe.model->named_parameters();
    auto pb = without.model->named_parameters();
    bool identical = pa.size() == pb.size();
    for (size_t i = 0; identical && i < pa.size(); ++i) {
        identical = pa[i].first == pb[i].first &&
                    std::memcmp(pa[i].second.data(), pb[i].second.data(),
                                static_cast<size_t>(pa[i].second.numel()) * sizeof(float)) == 0;
    }
    report("C7 probe-noninterference", identical,
           identical ? "paired runs (probe on/off, 5 epochs, 2k subset) end bitwise identical"
                     : "VAE trajectories differ between probe on/off");
}

// ---------------------------------------------------------------------------
// criterion 8: determinism per objective kind

void criterion_determinism(const AcceptanceData& data) {
    bool all_ok = true;
    std::string detail;
    const fs::path tmp = fs::temp_directory_path() / "vaelab_acceptance_det";
    fs::remove_all(tmp);
    for (const auto& [label, obj] :
         std::vector<std::pair<std::string, ObjectiveConfig>>{{"elbo", ObjectiveConfig::elbo()},
                                                              {"beta", ObjectiveConfig::beta_vae(4.0)},
                                                              {"mu", ObjectiveConfig::mu_vae(3.0)}}) {
        RunManifest m = desk_manifest();
        m.objective = obj;
        m.subset_train = 1000;
        m.subset_test = 300;
        m.epochs = 3;
        auto a = train_run<float>(m, data.train_full, data.test_full);
        auto b = train_run<float>(m, data.train_full, data.test_full);
        const bool logs_equal = metrics_csv(a.log) == metrics_csv(b.log);
        save_run_outputs((tmp / (label + "_a")).string(), m, a);
        save_run_outputs((tmp / (label + "_b")).string(), m, b);
        auto bytes = [&](const std::string& p) {
            std::ifstream f(p, std::ios::binary);
            return std::vector<char>((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
        };
        const bool ckpt_equal = bytes((tmp / (label + "_a") / "checkpoint.bin").string()) ==
                                bytes((tmp / (label + "_b") / "checkpoint.bin").string());
        all_ok = all_ok && logs_equal && ckpt_equal;
        detail += label + (logs_equal && ckpt_equal ? " ok; " : " MISMATCH; ");
    }
    fs::remove_all(tmp);
    report("C8 determinism", all_ok, "identical manifests give identical CSVs and checkpoints: " + detail);
}

// ---------------------------------------------------------------------------
// criterion 9: export contracts

void criterion_export_contracts(const AcceptanceData& data) {
    bool ok = true;
    std::string detail;

    Vae<float> model(ModelPreset::cnn_main(), 4242);
    ImageGrid trav = latent_traversal(model, -2.0, 2.0, 40);
    ok &= trav.rows == 10 && trav.cols == 40;
    detail += "traversal " + std::to_string(trav.rows) + "x" + std::to_string(trav.cols) + "; ";

    auto r_elbo = traversal_range_preset(ObjectiveConfig::elbo());
    auto r_mu1 = traversal_range_preset(ObjectiveConfig::mu_vae(3.0));
    auto r_mu2 = traversal_range_preset(ObjectiveConfig::mu_vae(6.0));
    const bool ranges = r_elbo == std::pair<double, double>{-2.0, 2.0} &&
                        r_mu1 == std::pair<double, double>{-10.0, 10.0} &&
                        r_mu2 == std::pair<double, double>{-20.0, 20.0};
    ok &= ranges;
    detail += std::string("ranges [-2,2]/[-10,10]/[-20,20] ") + (ranges ? "ok" : "WRONG") + "; ";

    const bool sigmas = prior_sigma_preset(ObjectiveConfig::elbo()) == 1.0 &&
                        prior_sigma_preset(ObjectiveConfig::beta_vae(4.0)) == 1.0 &&
                        prior_sigma_preset(ObjectiveConfig::mu_vae(3.0)) == 3.0;
    ok &= sigmas;
    detail += std::string("sigma presets 1/1/3 ") + (sigmas ? "ok" : "WRONG") + "; ";

    const fs::path tmp = fs::temp_directory_path() / "vaelab_acceptance_export";
    fs::create_directories(tmp);
    Dataset<float> sub = data.test_full.take(500);
    Tensor<float> codes = encode_eval_mu(model, ObjectiveConfig::mu_vae(3.0), sub.images);
    export_latent_codes(codes, sub.labels, (tmp / "codes.csv").string());
    std::ifstream f((tmp / "codes.csv").string());
    std::string line;
    size_t rows = 0;
    size_t cols = 0;
    while (std::getline(f, line)) {
        if (rows == 0) cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
        ++rows;
    }
    ok &= rows == 500 && cols == 11;
    detail += "codes csv " + std::to_string(rows) + " rows x " + std::to_string(cols) + " cols";
    fs::remove_all(tmp);

    report("C9 export-contracts", ok, detail);
}

// ---------------------------------------------------------------------------
// criterion 10: IDX loader

void criterion_idx_loader(const AcceptanceData& data) {
    bool ok = true;
    std::string detail;

    ok &= data.train_full.size() == 60000 && data.test_full.size() == 10000;
    detail += "loaded " + std::to_string(data.train_full.size()) + "/" +
              std::to_string(data.test_full.size()) + "; ";

    float lo = 1e9f, hi = -1e9f;
    for (float v : data.train_full.images.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ok &= lo >= 0.0f && hi <= 1.0f;
    detail += "pixel range [" + fmt(lo) + "," + fmt(hi) + "]; ";

    // corrupted fixtures must be rejected
    const fs::path tmp = fs::temp_directory_path() / "vaelab_acceptance_idx";
    fs::create_directories(tmp);
    {
        std::ofstream f((tmp / "bad").string(), std::ios::binary);
        const unsigned char bytes[] = {0x00, 0x00, 0x08, 0x05, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2,
                                       1,    2,    3,    4};
        f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    }
    bool rejected = false;
    try {
        read_idx_images((tmp / "bad").string());
    } catch (const FormatError&) {
        rejected = true;
    }
    ok &= rejected;
    detail += std::string("bad magic ") + (rejected ? "rejected" : "ACCEPTED");
    fs::remove_all(tmp);

    report("C10 idx-loader", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
    int jobs = 2;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) jobs = std::atoi(argv[++i]);
    }
    try {
        AcceptanceData data = setup_data();

        criterion_grad_correctness();
        criterion_kl_oracle();
        MatrixData md = run_desk_matrix(data, jobs);
        criterion_clip_invariant(md);
        criterion_objective_orderings(md);
        criterion_aggregate_mean(md);
        criterion_spread(md);
        criterion_probe_noninterference(data);
        criterion_determinism(data);
        criterion_export_contracts(data);
        criterion_idx_loader(data);
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance-suite: aborted with %s\n", e.what());
        return 1;
    }

    int failed = 0;
    for (const auto& c : results()) failed += c.pass ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results().size()) - failed,
                results().size());
    return failed == 0 ? 0 : 1;
}
