#include "vaelab/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vaelab {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("manifest: bad boolean for " + key + ": '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("manifest: bad number for " + key + ": '" + v + "'");
    }
}

int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int64_t d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("manifest: bad integer for " + key + ": '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        uint64_t d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("manifest: bad integer for " + key + ": '" + v + "'");
    }
}

}  // namespace

void RunManifest::validate() const {
    if (dataset != "mnist" && dataset != "fashion") {
        throw ConfigError("dataset must be mnist or fashion, got '" + dataset + "'");
    }
    if (z_dim < 1) throw ConfigError("z_dim must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (subset_train < 0 || subset_test < 0) throw ConfigError("subset sizes must be >= 0");
    if (optim.lr <= 0) throw ConfigError("lr must be positive");
    if (probe_hidden < 1) throw ConfigError("probe_hidden must be >= 1");
    objective.validate();
}

std::string RunManifest::serialize() const {
    std::ostringstream out;
    out << "manifest_version = 1\n";
    out << "dataset = " << dataset << "\n";
    out << "preset = " << preset_name(preset) << "\n";
    out << "activation = " << activation_name(activation) << "\n";
    out << "z_dim = " << z_dim << "\n";
    out << "objective = " << objective_name(objective.kind) << "\n";
    out << "beta = " << fmt_double(objective.beta) << "\n";
    out << "clip_enabled = " << (objective.clip.enabled ? "true" : "false") << "\n";
    out << "clip_coefficient = " << fmt_double(objective.clip.coefficient) << "\n";
    out << "clip_stop_grad = " << (objective.clip.stop_grad ? "true" : "false") << "\n";
    out << "variance_reg = " << variance_reg_name(objective.variance_reg) << "\n";
    out << "seed = " << seed << "\n";
    out << "epochs = " << epochs << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "lr = " << fmt_double(optim.lr) << "\n";
    out << "adam_beta1 = " << fmt_double(optim.beta1) << "\n";
    out << "adam_beta2 = " << fmt_double(optim.beta2) << "\n";
    out << "adam_eps = " << fmt_double(optim.eps) << "\n";
    out << "subset_train = " << subset_train << "\n";
    out << "subset_test = " << subset_test << "\n";
    out << "precision = " << precision_name(precision) << "\n";
    out << "probe_enabled = " << (probe_enabled ? "true" : "false") << "\n";
    out << "probe_hidden = " << probe_hidden << "\n";
    out << "data_dir = " << data_dir << "\n";
    out << "shuffle = " << (shuffle ? "true" : "false") << "\n";
    out << "drop_last = " << (drop_last ? "true" : "false") << "\n";
    return out.str();
}

RunManifest RunManifest::parse(const std::string& text) {
    RunManifest m;
    std::istringstream in(text);
    std::string line;
    bool saw_version = false;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("manifest: expected key = value: '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key == "manifest_version") {
            if (parse_int(val, key) != 1) throw ConfigError("unsupported manifest_version " + val);
            saw_version = true;
        } else if (key == "dataset") {
            m.dataset = val;
        } else if (key == "preset") {
            m.preset = preset_from_name(val);
        } else if (key == "activation") {
            m.activation = activation_from_name(val);
        } else if (key == "z_dim") {
            m.z_dim = static_cast<int>(parse_int(val, key));
        } else if (key == "objective") {
            m.objective.kind = objective_from_name(val);
        } else if (key == "beta") {
            m.objective.beta = parse_double(val, key);
        } else if (key == "clip_enabled") {
            m.objective.clip.enabled = parse_bool(val, key);
        } else if (key == "clip_coefficient") {
            m.objective.clip.coefficient = parse_double(val, key);
        } else if (key == "clip_stop_grad") {
            m.objective.clip.stop_grad = parse_bool(val, key);
        } else if (key == "variance_reg") {
            m.objective.variance_reg = variance_reg_from_name(val);
        } else if (key == "seed") {
            m.seed = parse_u64(val, key);
        } else if (key == "epochs") {
            m.epochs = static_cast<int>(parse_int(val, key));
        } else if (key == "batch_size") {
            m.batch_size = static_cast<int>(parse_int(val, key));
        } else if (key == "lr") {
            m.optim.lr = parse_double(val, key);
        } else if (key == "adam_beta1") {
            m.optim.beta1 = parse_double(val, key);
        } else if (key == "adam_beta2") {
            m.optim.beta2 = parse_double(val, key);
        } else if (key == "adam_eps") {
            m.optim.eps = parse_double(val, key);
        } else if (key == "subset_train") {
            m.subset_train = static_cast<int>(parse_int(val, key));
        } else if (key == "subset_test") {
            m.subset_test = static_cast<int>(parse_int(val, key));
        } else if (key == "precision") {
            m.precision = precision_from_name(val);
        } else if (key == "probe_enabled") {
            m.probe_enabled = parse_bool(val, key);
        } else if (key == "probe_hidden") {
            m.probe_hidden = static_cast<int>(parse_int(val, key));
        } else if (key == "data_dir") {
            m.data_dir = val;
        } else if (key == "shuffle") {
            m.shuffle = parse_bool(val, key);
        } else if (key == "drop_last") {
            m.drop_last = parse_bool(val, key);
        } else {
            throw ConfigError("manifest: unknown key '" + key + "'");
        }
    }
    if (!saw_version) throw ConfigError("manifest: missing manifest_version");
    m.validate();
    return m;
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void RunManifest::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write manifest " + path);
    f << serialize();
    if (!f) throw IoError("short write to " + path);
}

std::string RunManifest::run_name() const {
    std::string obj = objective_name(objective.kind);
    if (objective.kind == ObjectiveKind::mu_vae) {
        obj += "_c" + std::to_string(static_cast<int>(objective.clip.coefficient));
    } else if (objective.kind == ObjectiveKind::beta_vae) {
        obj += "_b" + std::to_string(static_cast<int>(objective.beta));
    }
    return dataset + "_" + obj + "_seed" + std::to_string(seed);
}

}  // namespace vaelab
