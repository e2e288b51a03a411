// Generates the synthetic ten-class IDX dataset pair used for local runs when
// the real MNIST / Fashion-MNIST files are not on disk. Drop-in file names, so
// the trainer cannot tell the difference.
#include "CLI11.hpp"

#include <cstdio>

#include "vaelab/synth_data.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write synthetic MNIST-format IDX files"};
    std::string outdir = "data";
    std::string style = "both";
    int n_train = 60000;
    int n_test = 10000;
    uint64_t seed = 2024;
    bool gzip = false;
    app.add_option("--outdir", outdir, "output directory (per-style subdirs are created)");
    app.add_option("--style", style, "digits | fashion | both")
        ->check(CLI::IsMember({"digits", "fashion", "both", "mnist"}));
    app.add_option("--train", n_train, "training examples");
    app.add_option("--test", n_test, "test examples");
    app.add_option("--seed", seed, "generator seed");
    app.add_flag("--gzip", gzip, "write .gz files");
    CLI11_PARSE(app, argc, argv);

    try {
        vaelab::SynthConfig cfg;
        cfg.n_train = n_train;
        cfg.n_test = n_test;
        cfg.seed = seed;
        cfg.gzip = gzip;
        if (style == "both" || style == "digits" || style == "mnist") {
            cfg.style = vaelab::SynthStyle::digits;
            vaelab::write_synth_idx(outdir + "/mnist", cfg);
            std::printf("wrote %s/mnist (%d train, %d test)\n", outdir.c_str(), n_train, n_test);
        }
        if (style == "both" || style == "fashion") {
            cfg.style = vaelab::SynthStyle::fashion;
            vaelab::write_synth_idx(outdir + "/fashion", cfg);
            std::printf("wrote %s/fashion (%d train, %d test)\n", outdir.c_str(), n_train, n_test);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 3;
    }
    return 0;
}
