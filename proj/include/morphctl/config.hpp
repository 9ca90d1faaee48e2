#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "morphctl/classifier.hpp"
#include "morphctl/harness.hpp"
#include "morphctl/meta.hpp"

namespace morphctl {

/// Minimal INI reader: [section] headers, key = value lines, comments with
/// '#' or ';'. Vector values are comma- or space-separated numbers.
class Ini {
public:
    static Ini parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw BadConfig("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static Ini parse(const std::string& text, const std::string& origin = "<inline>") {
        Ini ini;
        std::string section;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto where = [&] { return origin + ":" + std::to_string(lineno); };
            std::string s = strip_comment(line);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw BadConfig(where() + ": malformed section header '" + line + "'");
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty()) throw BadConfig(where() + ": empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw BadConfig(where() + ": expected key = value, got '" + line + "'");
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (key.empty()) throw BadConfig(where() + ": empty key");
            if (section.empty()) throw BadConfig(where() + ": key '" + key + "' outside any [section]");
            ini.values_[section + "." + key] = value;
        }
        return ini;
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) > 0;
    }

    std::optional<std::string> raw(const std::string& section, const std::string& key) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return std::nullopt;
        touched_.insert(it->first);
        return it->second;
    }

    double number(const std::string& section, const std::string& key, double fallback) const {
        const auto v = raw(section, key);
        if (!v) return fallback;
        return parse_number(*v, section + "." + key);
    }

    int integer(const std::string& section, const std::string& key, int fallback) const {
        const double d = number(section, key, fallback);
        const int i = static_cast<int>(std::llround(d));
        if (std::abs(d - i) > 1e-9) throw BadConfig(section + "." + key + ": expected an integer");
        return i;
    }

    std::uint64_t uinteger(const std::string& section, const std::string& key, std::uint64_t fallback) const {
        const auto v = raw(section, key);
        if (!v) return fallback;
        try {
            return std::stoull(*v);
        } catch (...) {
            throw BadConfig(section + "." + key + ": expected an unsigned integer, got '" + *v + "'");
        }
    }

    bool boolean(const std::string& section, const std::string& key, bool fallback) const {
        const auto v = raw(section, key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
        if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
        throw BadConfig(section + "." + key + ": expected a boolean, got '" + *v + "'");
    }

    std::string text(const std::string& section, const std::string& key, const std::string& fallback) const {
        const auto v = raw(section, key);
        return v ? *v : fallback;
    }

    std::optional<VectorXd> vector(const std::string& section, const std::string& key) const {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        std::vector<double> vals;
        std::string token;
        std::istringstream in(*v);
        while (std::getline(in, token, ',')) {
            std::istringstream tok(token);
            double d;
            while (tok >> d) vals.push_back(d);
            if (!tok.eof()) {
                std::string bad;
                tok.clear();
                tok >> bad;
                if (!bad.empty()) throw BadConfig(section + "." + key + ": bad number '" + bad + "'");
            }
        }
        VectorXd out(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) out(i) = vals[i];
        return out;
    }

    VectorXd vector_sized(const std::string& section, const std::string& key, const VectorXd& fallback,
                          Eigen::Index size) const {
        const auto v = vector(section, key);
        if (!v) return fallback;
        if (v->size() != size)
            throw BadConfig(section + "." + key + ": expected " + std::to_string(size) + " values, got " +
                            std::to_string(v->size()));
        return *v;
    }

    /// Keys never read through the typed getters; used to flag typos.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!touched_.count(k)) out.push_back(k);
        return out;
    }

private:
    static std::string strip_comment(const std::string& s) {
        const auto pos = s.find_first_of("#;");
        return pos == std::string::npos ? s : s.substr(0, pos);
    }
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static double parse_number(const std::string& v, const std::string& what) {
        std::istringstream in(v);
        double d;
        in >> d;
        if (!in || !(in >> std::ws).eof()) throw BadConfig(what + ": expected a number, got '" + v + "'");
        return d;
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> touched_;
};

struct GameSettings {
    int feature_dim = 5;  // m; head width h = 5m
    GameWeights weights = default_game_weights(25);
    double epsilon = 1e-6;
    double period = 0.01;
    int max_iter = 50;
    bool enforce_budget = true;
};

/// Everything the tools need, with every default overridable from one INI
/// file ([vehicle], [trim], [game], [daiml], [classifier], [scenario]).
struct Config {
    VehicleParams vehicle;
    TrimPoint trim;
    GameSettings game;
    DaimlConfig daiml;
    Vec5 label_noise_std = Vec5::Constant(-1.0);  // negative = derive default
    double seconds_per_condition = 50.0;
    ClassifierConfig classifier;
    Scenario scenario;
    Mat5 lqr_q = Vec5(200.0, 8000.0, 8000.0, 30000.0, 200.0).asDiagonal();
    Eigen::Matrix2d lqr_r = Vec2(3000.0, 0.5).asDiagonal();
    Mat5 a_ref;   // reference Jacobian for the linearize deviation table
    Mat52 b_ref;

    Config() {
        a_ref << -0.0353, 3.91, -9.8, 0.0, 7.54e-5,
                 -0.0127, -1.43, 2.14e-4, 0.95, 2.9e-5,
                  0.0, 0.0, 0.0, 1.0, 0.0,
                 -0.0614, -8.42, 0.0, -1.72, 1.32e-4,
                 -8.73e-4, -40.0, 40.0, 0.0, 0.0;
        b_ref << 0.0, 0.0169,
                 -0.0822, -5.4e-5,
                  0.0, 0.0,
                 -4.2074, 0.0,
                  0.0, 0.0;
    }

    static Config load(const std::string& path) {
        Config cfg;
        if (path.empty()) return cfg;
        const Ini ini = Ini::parse_file(path);
        cfg.apply(ini);
        return cfg;
    }

    void apply(const Ini& ini) {
        vehicle.mass = ini.number("vehicle", "mass", vehicle.mass);
        vehicle.gravity = ini.number("vehicle", "gravity", vehicle.gravity);
        vehicle.b_min = ini.number("vehicle", "b_min", vehicle.b_min);
        vehicle.b_max = ini.number("vehicle", "b_max", vehicle.b_max);
        vehicle.wing_area = ini.number("vehicle", "wing_area", vehicle.wing_area);
        vehicle.chord = ini.number("vehicle", "chord", vehicle.chord);
        vehicle.inertia_y = ini.number("vehicle", "inertia_y", vehicle.inertia_y);
        vehicle.thrust_coeff = ini.number("vehicle", "thrust_coeff", vehicle.thrust_coeff);
        vehicle.inertia_x = ini.number("vehicle", "inertia_x", vehicle.inertia_x);
        vehicle.inertia_z = ini.number("vehicle", "inertia_z", vehicle.inertia_z);
        vehicle.validate();

        trim.x_e = ini.vector_sized("trim", "x_e", trim.x_e, 5);
        trim.u_e = ini.vector_sized("trim", "u_e", trim.u_e, 2);
        trim.xi_e = ini.number("trim", "xi_e", trim.xi_e);
        trim.tol = ini.number("trim", "tol", trim.tol);

        game.feature_dim = ini.integer("game", "feature_dim", game.feature_dim);
        const int head = 5 * game.feature_dim;
        GameWeights w = default_game_weights(head);
        w.Q_u = VectorXd(ini.vector_sized("game", "q_u", w.Q_u.diagonal(), 5)).asDiagonal();
        w.Q_a = VectorXd(ini.vector_sized("game", "q_a", w.Q_a.diagonal(), 5)).asDiagonal();
        w.R_u = VectorXd(ini.vector_sized("game", "r_u", w.R_u.diagonal(), 2)).asDiagonal();
        w.R_a = VectorXd(ini.vector_sized("game", "r_a", w.R_a.diagonal(), head)).asDiagonal();
        game.weights = w;
        game.epsilon = ini.number("game", "epsilon", game.epsilon);
        game.period = ini.number("game", "period", game.period);
        game.max_iter = ini.integer("game", "max_iter", game.max_iter);
        game.enforce_budget = ini.boolean("game", "enforce_budget", game.enforce_budget);

        daiml.alpha = ini.number("daiml", "alpha", daiml.alpha);
        daiml.eta = ini.number("daiml", "eta", daiml.eta);
        daiml.gamma = ini.number("daiml", "gamma", daiml.gamma);
        daiml.adapt_batch = ini.integer("daiml", "adapt_batch", daiml.adapt_batch);
        daiml.train_batch = ini.integer("daiml", "train_batch", daiml.train_batch);
        daiml.lr_phi = ini.number("daiml", "lr_phi", daiml.lr_phi);
        daiml.lr_h = ini.number("daiml", "lr_h", daiml.lr_h);
        daiml.ridge_lambda = ini.number("daiml", "ridge_lambda", daiml.ridge_lambda);
        daiml.epochs = ini.integer("daiml", "epochs", daiml.epochs);
        daiml.steps_per_epoch = ini.integer("daiml", "steps_per_epoch", daiml.steps_per_epoch);
        daiml.seed = ini.uinteger("daiml", "seed", daiml.seed);
        daiml.spectral_bound = ini.number("daiml", "spectral_bound", daiml.spectral_bound);
        daiml.feature_dim = game.feature_dim;
        daiml.select_best = ini.boolean("daiml", "select_best", daiml.select_best);
        daiml.val_fraction = ini.number("daiml", "val_fraction", daiml.val_fraction);
        if (const auto v = ini.vector("daiml", "label_noise_std")) {
            if (v->size() != 5) throw BadConfig("daiml.label_noise_std: expected 5 values");
            label_noise_std = *v;
        }
        seconds_per_condition = ini.number("daiml", "seconds_per_condition", seconds_per_condition);

        classifier.lr = ini.number("classifier", "lr", classifier.lr);
        classifier.batch = ini.integer("classifier", "batch", classifier.batch);
        classifier.steps = ini.integer("classifier", "steps", classifier.steps);
        classifier.val_fraction = ini.number("classifier", "val_fraction", classifier.val_fraction);
        classifier.seed = ini.uinteger("classifier", "seed", classifier.seed);

        scenario.x0_abs = ini.vector_sized("scenario", "x0", scenario.x0_abs, 5);
        scenario.duration = ini.number("scenario", "duration", scenario.duration);
        scenario.control_period = ini.number("scenario", "period", scenario.control_period);
        scenario.substeps = ini.integer("scenario", "substeps", scenario.substeps);
        if (const auto v = ini.vector("scenario", "noise_std")) {
            if (v->size() != 2) throw BadConfig("scenario.noise_std: expected 2 values");
            scenario.noise_std = *v;
            scenario.has_noise_default = false;
        }
        scenario.seed = ini.uinteger("scenario", "seed", scenario.seed);
        const std::string mode = ini.text("scenario", "morph_mode", "model");
        if (mode == "model")
            scenario.morph_mode = MorphMode::Model;
        else if (mode == "lagged")
            scenario.morph_mode = MorphMode::Lagged;
        else if (mode == "instantaneous")
            scenario.morph_mode = MorphMode::Instantaneous;
        else
            throw BadConfig("scenario.morph_mode: expected model|lagged|instantaneous, got '" + mode + "'");
        scenario.morph_rate_limit = ini.number("scenario", "morph_rate_limit", scenario.morph_rate_limit);
        if (ini.has("scenario", "xi0")) scenario.xi0 = ini.number("scenario", "xi0", 0.0);

        lqr_q = VectorXd(ini.vector_sized("scenario", "lqr_q", lqr_q.diagonal(), 5)).asDiagonal();
        lqr_r = VectorXd(ini.vector_sized("scenario", "lqr_r", lqr_r.diagonal(), 2)).asDiagonal();

        if (const auto v = ini.vector("linearize", "a_ref")) {
            if (v->size() != 25) throw BadConfig("linearize.a_ref: expected 25 values (row-major)");
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) a_ref(i, j) = (*v)(5 * i + j);
        }
        if (const auto v = ini.vector("linearize", "b_ref")) {
            if (v->size() != 10) throw BadConfig("linearize.b_ref: expected 10 values (row-major)");
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 2; ++j) b_ref(i, j) = (*v)(2 * i + j);
        }

        const auto leftovers = ini.unused_keys();
        if (!leftovers.empty()) {
            std::string msg = "unknown config keys:";
            for (const auto& k : leftovers) msg += " " + k;
            throw BadConfig(msg);
        }

        scenario.validate();
        daiml.validate();
        classifier.validate();
        game.weights.validate();
    }
};

}  // namespace morphctl
