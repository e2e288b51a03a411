// Command-line front end: train / matrix / eval / toy.
//
// Exit codes: 0 success, 2 usage or config error, 3 missing or malformed
// data, 4 training diverged, 1 anything else. Failures print one line:
//   error: <class>: <message>
#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "vaelab/eval_export.hpp"
#include "vaelab/synth_data.hpp"
#include "vaelab/trainer.hpp"

namespace fs = std::filesystem;
using namespace vaelab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

struct DivergedRun {
    RunManifest manifest;
    int epoch;
    int batch;
};

int fail(const char* cls, const std::string& msg, int code) {
    std::fprintf(stderr, "error: %s: %s\n", cls, msg.c_str());
    return code;
}

std::string idx_path(const std::string& dir, const char* stem) {
    const std::string raw = dir + "/" + stem;
    if (fs::exists(raw)) return raw;
    if (fs::exists(raw + ".gz")) return raw + ".gz";
    throw IoError("missing dataset file " + raw + "[.gz]");
}

template <typename T>
Dataset<T> load_split(const RunManifest& m, const std::string& dataset, Split split) {
    const std::string dir = m.data_dir + "/" + dataset;
    const char* images = split == Split::train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
    const char* labels = split == Split::train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
    return load_idx<T>(idx_path(dir, images), idx_path(dir, labels), split);
}

// Flags shared by train / matrix / toy. Only flags the user actually passed
// override the manifest.
struct CommonFlags {
    std::string manifest_path;
    std::string dataset;
    std::string objective;
    double beta = 4.0;
    double clip_coeff = 3.0;
    int zdim = 0;
    uint64_t seed = 0;
    int epochs = 0;
    int batch = 0;
    int subset = -1;
    int subset_test = -1;
    std::string outdir = "runs/out";
    std::string precision;
    std::string data_dir;
    std::string activation;
    std::string variance_reg;
    double lr = 1e-3;
    bool no_probe = false;

    CLI::App* attach(CLI::App* cmd) {
        cmd->add_option("--manifest", manifest_path, "manifest file; flags override its fields");
        cmd->add_option("--dataset", dataset)->check(CLI::IsMember({"mnist", "fashion"}));
        cmd->add_option("--objective", objective)->check(CLI::IsMember({"elbo", "beta", "mu"}));
        cmd->add_option("--beta", beta, "beta for --objective beta");
        cmd->add_option("--clip-coeff", clip_coeff, "clip coefficient for --objective mu");
        cmd->add_option("--zdim", zdim);
        cmd->add_option("--seed", seed);
        cmd->add_option("--epochs", epochs);
        cmd->add_option("--batch", batch);
        cmd->add_option("--subset", subset, "train on the first N examples (0 = all)");
        cmd->add_option("--subset-test", subset_test, "evaluate on the first N test examples");
        cmd->add_option("--outdir", outdir);
        cmd->add_option("--precision", precision)->check(CLI::IsMember({"f32", "f64"}));
        cmd->add_option("--data-dir", data_dir);
        cmd->add_option("--activation", activation)
            ->check(CLI::IsMember({"relu", "leaky_relu", "tanh", "sigmoid"}));
        cmd->add_option("--variance-reg", variance_reg, "mu-VAE log-variance term variant")
            ->check(CLI::IsMember({"log_var_raw", "abs_log_var", "exp_minus_log_minus_one"}));
        cmd->add_option("--lr", lr, "Adam learning rate");
        cmd->add_flag("--no-probe", no_probe, "skip the probe classifier");
        return cmd;
    }

    RunManifest merge(const CLI::App* cmd) const {
        RunManifest m;
        if (!manifest_path.empty()) m = RunManifest::load(manifest_path);
        if (cmd->count("--dataset")) m.dataset = dataset;
        if (cmd->count("--objective")) {
            m.objective.kind = objective_from_name(objective);
            if (m.objective.kind == ObjectiveKind::mu_vae) {
                m.objective.clip.enabled = true;
                m.objective.clip.coefficient = clip_coeff;
            } else if (m.objective.kind == ObjectiveKind::beta_vae) {
                m.objective.beta = beta;
            }
        }
        if (cmd->count("--beta")) m.objective.beta = beta;
        if (cmd->count("--clip-coeff")) m.objective.clip.coefficient = clip_coeff;
        if (cmd->count("--zdim")) m.z_dim = zdim;
        if (cmd->count("--seed")) m.seed = seed;
        if (cmd->count("--epochs")) m.epochs = epochs;
        if (cmd->count("--batch")) m.batch_size = batch;
        if (cmd->count("--subset")) m.subset_train = subset;
        if (cmd->count("--subset-test")) m.subset_test = subset_test;
        if (cmd->count("--precision")) m.precision = precision_from_name(precision);
        if (cmd->count("--data-dir")) m.data_dir = data_dir;
        if (cmd->count("--activation")) m.activation = activation_from_name(activation);
        if (cmd->count("--variance-reg")) m.objective.variance_reg = variance_reg_from_name(variance_reg);
        if (cmd->count("--lr")) m.optim.lr = lr;
        if (no_probe) m.probe_enabled = false;
        m.validate();
        return m;
    }
};

template <typename T>
int do_train(const RunManifest& m, const std::string& outdir) {
    Dataset<T> train = load_split<T>(m, m.dataset, Split::train);
    Dataset<T> test = load_split<T>(m, m.dataset, Split::test);
    TrainResult<T> result = train_run<T>(m, train, test);
    save_run_outputs(outdir, m, result);
    if (result.diverged) {
        throw DivergedRun{m, result.diverged_epoch, result.diverged_batch};
    }
    const auto& r = result.log.back();
    std::printf("run %s: recon=%.6g kl=%.6g reg=%.6g acc_test=%.4g\n", m.run_name().c_str(),
                r.recon, r.kl, r.reg, r.acc_test);
    std::printf("outputs in %s\n", outdir.c_str());
    return kExitOk;
}

template <typename T>
int do_matrix(const RunManifest& base, const std::string& outdir,
              const std::vector<std::string>& datasets, const std::vector<uint64_t>& seeds,
              int jobs) {
    std::map<std::pair<std::string, int>, Dataset<T>> cache;
    for (const auto& ds : datasets) {
        cache.emplace(std::make_pair(ds, 0), load_split<T>(base, ds, Split::train));
        cache.emplace(std::make_pair(ds, 1), load_split<T>(base, ds, Split::test));
    }
    auto loader = [&](const std::string& name, Split s) -> const Dataset<T>& {
        return cache.at({name, s == Split::train ? 0 : 1});
    };
    auto entries = run_matrix<T>(base, datasets, standard_objectives(), seeds, loader, jobs);

    fs::create_directories(outdir);
    int failures = 0;
    for (auto& e : entries) {
        RunManifest m = base;
        m.dataset = e.dataset;
        for (const auto& [label, obj] : standard_objectives()) {
            if (label == e.label) m.objective = obj;
        }
        m.seed = e.seed;
        const std::string dir = outdir + "/" + e.dataset + "_" + e.label + "_seed" +
                                std::to_string(e.seed);
        if (e.ok || e.result.diverged) {
            save_run_outputs(dir, m, e.result);
        }
        if (!e.ok) {
            ++failures;
            std::printf("cell %s/%s seed %llu FAILED: %s\n", e.dataset.c_str(), e.label.c_str(),
                        static_cast<unsigned long long>(e.seed), e.error.c_str());
        }
    }
    const std::string table = matrix_table(entries);
    std::ofstream(outdir + "/matrix.csv") << table;
    std::printf("%s", table.c_str());
    std::printf("matrix outputs in %s (%d failed cells)\n", outdir.c_str(), failures);
    return kExitOk;
}

template <typename T>
int do_eval(const std::string& run_dir, const std::string& outdir) {
    RunManifest m = RunManifest::load(run_dir + "/manifest.txt");
    Vae<T> model(preset_from_manifest(m), 0);
    load_checkpoint(run_dir + "/checkpoint.bin", model.named_parameters());
    Dataset<T> test = load_split<T>(m, m.dataset, Split::test);
    if (m.subset_test > 0 && m.subset_test < test.size()) test = test.take(m.subset_test);
    run_eval_exports(outdir, m, model, test);
    std::printf("exports in %s\n", outdir.c_str());
    return kExitOk;
}

// The small 2-D latent study: 3 activations x {elbo, elbo+clip, mu+clip},
// dense model, scatter plus codes per cell.
template <typename T>
int do_toy(RunManifest base, const std::string& outdir, const std::string& activation,
           const std::string& objective) {
    base.preset = PresetId::toy_dense_2d;
    base.z_dim = 2;
    base.probe_enabled = false;

    std::vector<std::string> acts = activation == "all"
                                        ? std::vector<std::string>{"tanh", "relu", "leaky_relu"}
                                        : std::vector<std::string>{activation};
    std::vector<std::string> objs =
        objective == "all" ? std::vector<std::string>{"elbo", "elbo_clip", "mu_clip"}
                           : std::vector<std::string>{objective};

    Dataset<T> train = load_split<T>(base, base.dataset, Split::train);
    Dataset<T> test = load_split<T>(base, base.dataset, Split::test);

    for (const auto& act : acts) {
        for (const auto& obj : objs) {
            RunManifest m = base;
            m.activation = activation_from_name(act);
            if (obj == "elbo") {
                m.objective = ObjectiveConfig::elbo();
            } else if (obj == "elbo_clip") {
                m.objective = ObjectiveConfig::elbo();
                m.objective.clip.enabled = true;
                m.objective.clip.coefficient = 3.0;
            } else if (obj == "mu_clip") {
                m.objective = ObjectiveConfig::mu_vae(3.0);
            } else {
                throw ConfigError("unknown toy objective '" + obj + "'");
            }
            TrainResult<T> result = train_run<T>(m, train, test);
            const std::string dir = outdir + "/" + act + "_" + obj;
            save_run_outputs(dir, m, result);
            if (result.diverged) throw DivergedRun{m, result.diverged_epoch, result.diverged_batch};
            Dataset<T> test_sub = (m.subset_test > 0 && m.subset_test < test.size())
                                      ? test.take(m.subset_test)
                                      : test;
            run_eval_exports(dir + "/eval", m, *result.model, test_sub);
            std::printf("toy cell %s/%s: recon=%.6g kl=%.6g\n", act.c_str(), obj.c_str(),
                        result.log.back().recon, result.log.back().kl);
        }
    }
    std::printf("toy outputs in %s\n", outdir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mu-VAE / beta-VAE / ELBO training laboratory"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    CLI::App* train_cmd = train_flags.attach(app.add_subcommand("train", "train one model"));

    CommonFlags matrix_flags;
    CLI::App* matrix_cmd =
        matrix_flags.attach(app.add_subcommand("matrix", "run the objective/dataset/seed matrix"));
    std::vector<std::string> matrix_datasets{"mnist"};
    std::vector<uint64_t> matrix_seeds{1, 2, 3};
    int matrix_jobs = 2;
    matrix_cmd->add_option("--datasets", matrix_datasets, "datasets to include");
    matrix_cmd->add_option("--seeds", matrix_seeds, "seeds to average over");
    matrix_cmd->add_option("--jobs", matrix_jobs, "parallel cells");

    CLI::App* eval_cmd = app.add_subcommand("eval", "export figures for a finished run");
    std::string eval_run, eval_out;
    eval_cmd->add_option("--run", eval_run, "run directory with manifest.txt and checkpoint.bin")
        ->required();
    eval_cmd->add_option("--outdir", eval_out, "export directory (default <run>/eval)");

    CommonFlags toy_flags;
    CLI::App* toy_cmd = toy_flags.attach(
        app.add_subcommand("toy", "2-D latent study: activations x clipping variants"));
    std::string toy_activation = "all";
    std::string toy_objective = "all";
    toy_cmd->add_option("--toy-activation", toy_activation,
                        "tanh | relu | leaky_relu | all")
        ->check(CLI::IsMember({"tanh", "relu", "leaky_relu", "all"}));
    toy_cmd->add_option("--toy-objective", toy_objective, "elbo | elbo_clip | mu_clip | all")
        ->check(CLI::IsMember({"elbo", "elbo_clip", "mu_clip", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        std::fprintf(stderr, "%s", app.help().c_str());
        return kExitUsage;
    }

    try {
        if (*train_cmd) {
            RunManifest m = train_flags.merge(train_cmd);
            return m.precision == Precision::f64 ? do_train<double>(m, train_flags.outdir)
                                                 : do_train<float>(m, train_flags.outdir);
        }
        if (*matrix_cmd) {
            RunManifest base = matrix_flags.merge(matrix_cmd);
            return base.precision == Precision::f64
                       ? do_matrix<double>(base, matrix_flags.outdir, matrix_datasets, matrix_seeds,
                                           matrix_jobs)
                       : do_matrix<float>(base, matrix_flags.outdir, matrix_datasets, matrix_seeds,
                                          matrix_jobs);
        }
        if (*eval_cmd) {
            const std::string out = eval_out.empty() ? eval_run + "/eval" : eval_out;
            RunManifest m = RunManifest::load(eval_run + "/manifest.txt");
            return m.precision == Precision::f64 ? do_eval<double>(eval_run, out)
                                                 : do_eval<float>(eval_run, out);
        }
        if (*toy_cmd) {
            RunManifest base = toy_flags.merge(toy_cmd);
            // desk-scale defaults that finish in seconds per cell
            if (!toy_cmd->count("--epochs")) base.epochs = 10;
            if (!toy_cmd->count("--subset")) base.subset_train = 2000;
            if (!toy_cmd->count("--subset-test")) base.subset_test = 1000;
            return base.precision == Precision::f64
                       ? do_toy<double>(base, toy_flags.outdir, toy_activation, toy_objective)
                       : do_toy<float>(base, toy_flags.outdir, toy_activation, toy_objective);
        }
    } catch (const DivergedRun& d) {
        std::fprintf(stderr, "error: divergence: loss became non-finite at epoch %d batch %d\n",
                     d.epoch, d.batch);
        return kExitDiverged;
    } catch (const ConfigError& e) {
        return fail("config", e.what(), kExitUsage);
    } catch (const IoError& e) {
        return fail("io", e.what(), kExitIo);
    } catch (const FormatError& e) {
        return fail("format", e.what(), kExitIo);
    } catch (const IntegrityError& e) {
        return fail("integrity", e.what(), kExitIo);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kExitInternal);
    }
    return kExitUsage;
}
