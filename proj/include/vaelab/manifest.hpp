#pragma once

#include <cstdint>
#include <string>

#include "vaelab/adam.hpp"
#include "vaelab/objectives.hpp"

namespace vaelab {

enum class Precision { f32, f64 };

inline const char* precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }
inline Precision precision_from_name(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "f64") return Precision::f64;
    throw ConfigError("unknown precision '" + s + "'");
}

// Full reproducibility record for one run. Together with the code version it
// determines every byte of the outputs; the trainer writes the effective
// manifest next to them.
struct RunManifest {
    std::string dataset = "mnist";  // mnist | fashion
    PresetId preset = PresetId::cnn_main;
    Activation activation = Activation::leaky_relu;
    int z_dim = 10;

    ObjectiveConfig objective;

    uint64_t seed = 1;
    int epochs = 20;
    int batch_size = 64;
    AdamConfig optim;
    int subset_train = 10000;  // 0 = full split
    int subset_test = 2000;
    Precision precision = Precision::f32;

    bool probe_enabled = true;
    int probe_hidden = 64;

    std::string data_dir = "data";
    bool shuffle = true;
    bool drop_last = true;

    void validate() const;

    // flat key = value text, fixed key order
    std::string serialize() const;
    static RunManifest parse(const std::string& text);
    static RunManifest load(const std::string& path);
    void save(const std::string& path) const;

    std::string run_name() const;
};

}  // namespace vaelab
