#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "morphctl/harness.hpp"
#include "morphctl/meta.hpp"
#include "morphctl/mlp.hpp"

namespace morphctl {

namespace io_detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) out.push_back(cur);
    return out;
}

inline double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        return v;
    } catch (...) {
        throw IoError(what + ": bad number '" + s + "'");
    }
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// dataset
// ---------------------------------------------------------------------------

inline void write_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "t,V,alpha,theta,q,h,delta_e,delta_t,y1,y2,y3,y4,y5,xi_true,condition\n";
    for (const auto& r : data.records) {
        out << io_detail::fmt(r.t);
        for (int i = 0; i < 5; ++i) out << ',' << io_detail::fmt(r.x(i));
        for (int i = 0; i < 2; ++i) out << ',' << io_detail::fmt(r.u(i));
        for (int i = 0; i < 5; ++i) out << ',' << io_detail::fmt(r.y(i));
        out << ',' << io_detail::fmt(r.xi_true) << ',' << (r.condition + 1) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset file " + path);
    if (line.rfind("t,V,alpha", 0) != 0) throw IoError(path + ": unrecognized dataset header");
    Dataset data;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = io_detail::split_csv(line);
        if (f.size() != 15) throw IoError(path + ":" + std::to_string(lineno) + ": expected 15 fields");
        const auto where = path + ":" + std::to_string(lineno);
        DatasetRecord r;
        r.t = io_detail::to_double(f[0], where);
        for (int i = 0; i < 5; ++i) r.x(i) = io_detail::to_double(f[1 + i], where);
        for (int i = 0; i < 2; ++i) r.u(i) = io_detail::to_double(f[6 + i], where);
        for (int i = 0; i < 5; ++i) r.y(i) = io_detail::to_double(f[8 + i], where);
        r.xi_true = io_detail::to_double(f[13], where);
        r.condition = static_cast<int>(io_detail::to_double(f[14], where)) - 1;
        if (r.condition < 0 || r.condition >= kNumConditions)
            throw IoError(where + ": condition index out of range");
        data.records.push_back(r);
    }
    return data;
}

// ---------------------------------------------------------------------------
// network weights
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Structured-text weight file: architecture line, activation flavor, config
/// hash, standardization vectors, then named layers with shapes and flat
/// row-major values.
inline void write_weights(const Mlp& net, const std::string& path, const std::string& config_digest = "") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "morphctl-weights v1\n";
    out << "arch";
    for (const int d : net.dims()) out << ' ' << d;
    out << '\n';
    out << "activation " << (net.tanh_output ? "tanh" : "tanh_hidden_linear_out") << '\n';
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, fnv1a(config_digest));
    out << "config_hash " << hash << '\n';
    out << "standardize_mean " << net.in_mean.size();
    for (Eigen::Index i = 0; i < net.in_mean.size(); ++i) out << ' ' << io_detail::fmt(net.in_mean(i));
    out << '\n';
    out << "standardize_scale " << net.in_scale.size();
    for (Eigen::Index i = 0; i < net.in_scale.size(); ++i) out << ' ' << io_detail::fmt(net.in_scale(i));
    out << '\n';
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        out << "layer W" << l << ' ' << net.W[l].rows() << ' ' << net.W[l].cols() << '\n';
        for (Eigen::Index i = 0; i < net.W[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < net.W[l].cols(); ++j) out << (j ? " " : "") << io_detail::fmt(net.W[l](i, j));
            out << '\n';
        }
        out << "layer b" << l << ' ' << net.b[l].size() << '\n';
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) out << (i ? " " : "") << io_detail::fmt(net.b[l](i));
        out << '\n';
    }
    out << "end\n";
    if (!out) throw IoError("write failed: " + path);
}

inline Mlp read_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open weights " + path);
    std::string tok;
    in >> tok;
    if (tok != "morphctl-weights") throw IoError(path + ": not a weight file");
    in >> tok;
    if (tok != "v1") throw IoError(path + ": unsupported version " + tok);

    Mlp net;
    std::vector<int> dims;
    std::string key;
    while (in >> key) {
        if (key == "arch") {
            std::string rest;
            std::getline(in, rest);
            std::istringstream rs(rest);
            int d;
            while (rs >> d) dims.push_back(d);
            if (dims.size() < 2) throw IoError(path + ": bad arch line");
        } else if (key == "activation") {
            in >> tok;
            if (tok == "tanh")
                net.tanh_output = true;
            else if (tok == "tanh_hidden_linear_out")
                net.tanh_output = false;
            else
                throw IoError(path + ": unknown activation '" + tok + "'");
        } else if (key == "config_hash") {
            in >> tok;  // informational
        } else if (key == "standardize_mean" || key == "standardize_scale") {
            Eigen::Index n;
            in >> n;
            VectorXd v(n);
            for (Eigen::Index i = 0; i < n; ++i) in >> v(i);
            (key == "standardize_mean" ? net.in_mean : net.in_scale) = v;
        } else if (key == "layer") {
            std::string name;
            in >> name;
            if (name.empty()) throw IoError(path + ": bad layer name");
            if (name[0] == 'W') {
                Eigen::Index r, c;
                in >> r >> c;
                MatrixXd w(r, c);
                for (Eigen::Index i = 0; i < r; ++i)
                    for (Eigen::Index j = 0; j < c; ++j) in >> w(i, j);
                net.W.push_back(std::move(w));
            } else if (name[0] == 'b') {
                Eigen::Index n;
                in >> n;
                VectorXd b(n);
                for (Eigen::Index i = 0; i < n; ++i) in >> b(i);
                net.b.push_back(std::move(b));
            } else {
                throw IoError(path + ": unknown layer '" + name + "'");
            }
        } else if (key == "end") {
            break;
        } else {
            throw IoError(path + ": unknown directive '" + key + "'");
        }
        if (!in) throw IoError(path + ": truncated weight file");
    }
    if (net.W.size() != net.b.size() || net.W.empty()) throw IoError(path + ": inconsistent layer list");
    if (!dims.empty()) {
        const auto actual = net.dims();
        if (actual != dims) throw IoError(path + ": arch metadata does not match layer shapes");
    }
    if (net.in_mean.size() == 0) net.in_mean = VectorXd::Zero(net.in_dim());
    if (net.in_scale.size() == 0) net.in_scale = VectorXd::Ones(net.in_dim());
    if (net.in_mean.size() != net.in_dim() || net.in_scale.size() != net.in_dim())
        throw IoError(path + ": standardization size mismatch");
    return net;
}

// ---------------------------------------------------------------------------
// simulation logs
// ---------------------------------------------------------------------------

inline void write_sim_log(const SimLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const Eigen::Index h = log.samples.empty() ? 0 : log.samples.front().a.size();
    out << "t,V,alpha,theta,q,h,delta_e,delta_t";
    for (Eigen::Index i = 0; i < h; ++i) out << ",a" << (i + 1);
    out << ",xi_cmd,xi_plant,j_u,j_a,iterations,res_u,res_a,wall_ms,solver_ok\n";
    for (const auto& s : log.samples) {
        out << io_detail::fmt(s.t);
        for (int i = 0; i < 5; ++i) out << ',' << io_detail::fmt(s.x_abs(i));
        for (int i = 0; i < 2; ++i) out << ',' << io_detail::fmt(s.u_abs(i));
        for (Eigen::Index i = 0; i < h; ++i) out << ',' << io_detail::fmt(s.a(i));
        out << ',' << io_detail::fmt(s.xi_cmd) << ',' << io_detail::fmt(s.xi_plant) << ',' << io_detail::fmt(s.j_u)
            << ',' << io_detail::fmt(s.j_a) << ',' << s.iterations << ',' << io_detail::fmt(s.res_u) << ','
            << io_detail::fmt(s.res_a) << ',' << io_detail::fmt(1e3 * s.wall_seconds) << ',' << (s.solver_ok ? 1 : 0)
            << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline SimLog read_sim_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open log " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty log file " + path);
    const auto head = io_detail::split_csv(line);
    if (head.size() < 17 || head[0] != "t") throw IoError(path + ": unrecognized log header");
    const std::size_t h = head.size() - 17;
    SimLog log;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = io_detail::split_csv(line);
        const auto where = path + ":" + std::to_string(lineno);
        if (f.size() != head.size()) throw IoError(where + ": wrong field count");
        SimSample s;
        std::size_t c = 0;
        s.t = io_detail::to_double(f[c++], where);
        for (int i = 0; i < 5; ++i) s.x_abs(i) = io_detail::to_double(f[c++], where);
        for (int i = 0; i < 2; ++i) s.u_abs(i) = io_detail::to_double(f[c++], where);
        s.a = VectorXd(h);
        for (std::size_t i = 0; i < h; ++i) s.a(i) = io_detail::to_double(f[c++], where);
        s.xi_cmd = io_detail::to_double(f[c++], where);
        s.xi_plant = io_detail::to_double(f[c++], where);
        s.j_u = io_detail::to_double(f[c++], where);
        s.j_a = io_detail::to_double(f[c++], where);
        s.iterations = static_cast<int>(io_detail::to_double(f[c++], where));
        s.res_u = io_detail::to_double(f[c++], where);
        s.res_a = io_detail::to_double(f[c++], where);
        s.wall_seconds = io_detail::to_double(f[c++], where) / 1e3;
        s.solver_ok = io_detail::to_double(f[c++], where) != 0.0;
        log.samples.push_back(std::move(s));
    }
    if (log.samples.size() >= 2) log.control_period = log.samples[1].t - log.samples[0].t;
    return log;
}

}  // namespace morphctl
