// Copyright 2026 The estkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ESTKIT_IO_HPP
#define ESTKIT_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "estkit/dynamics.hpp"
#include "estkit/errormodel.hpp"
#include "estkit/hilbert.hpp"
#include "estkit/metrics.hpp"

namespace estkit {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Temp-file-plus-rename so readers never observe partial output.
inline void atomic_write(const std::filesystem::path &path, const std::string &content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        }
        out << content;
        if (!out) {
            throw std::runtime_error("atomic_write: failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

// Pulse files: metadata comment, column header, then
// t_ns, re_eps_MHz, im_eps_MHz, re_omega_MHz, im_omega_MHz.
inline std::string format_pulse(const PulseEnvelope &pulse) {
    std::ostringstream os;
    os << "# pulse dt_ns=" << format_double(pulse.dt_ns) << " ramp_ns=" << format_double(pulse.ramp_ns)
       << " bandwidth_MHz=" << format_double(pulse.bandwidth_mhz)
       << " max_amp_MHz=" << format_double(pulse.max_amp_mhz) << "\n";
    os << "# t_ns,re_eps_MHz,im_eps_MHz,re_omega_MHz,im_omega_MHz\n";
    for (int k = 0; k < pulse.steps(); ++k) {
        os << format_double(k * pulse.dt_ns) << "," << format_double(pulse.eps(k).real()) << ","
           << format_double(pulse.eps(k).imag()) << "," << format_double(pulse.omega(k).real()) << ","
           << format_double(pulse.omega(k).imag()) << "\n";
    }
    return os.str();
}

inline void write_pulse(const std::filesystem::path &path, const PulseEnvelope &pulse) {
    atomic_write(path, format_pulse(pulse));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        fields.push_back(field);
    }
    return fields;
}

inline bool parse_meta(const std::string &line, const std::string &key, double *out) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos) {
        return false;
    }
    *out = std::stod(line.substr(pos + key.size() + 1));
    return true;
}

}  // namespace detail

inline PulseEnvelope read_pulse(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_pulse: cannot open " + path.string());
    }
    PulseEnvelope pulse;
    std::vector<Complex> eps, omega;
    std::string line;
    bool have_meta = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            double v;
            if (detail::parse_meta(line, "dt_ns", &v)) {
                pulse.dt_ns = v;
                have_meta = true;
            }
            if (detail::parse_meta(line, "ramp_ns", &v)) pulse.ramp_ns = v;
            if (detail::parse_meta(line, "bandwidth_MHz", &v)) pulse.bandwidth_mhz = v;
            if (detail::parse_meta(line, "max_amp_MHz", &v)) pulse.max_amp_mhz = v;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 5) {
            throw std::runtime_error("read_pulse: malformed row in " + path.string() + ": '" + line + "'");
        }
        try {
            const double t = std::stod(fields[0]);
            if (!have_meta && eps.size() == 1) {
                pulse.dt_ns = t;  // infer from the second row when no metadata
            }
            eps.emplace_back(std::stod(fields[1]), std::stod(fields[2]));
            omega.emplace_back(std::stod(fields[3]), std::stod(fields[4]));
        } catch (const std::exception &) {
            throw std::runtime_error("read_pulse: malformed number in " + path.string() + ": '" + line + "'");
        }
    }
    pulse.eps = Eigen::Map<const Vector>(eps.data(), static_cast<Eigen::Index>(eps.size()));
    pulse.omega = Eigen::Map<const Vector>(omega.data(), static_cast<Eigen::Index>(omega.size()));
    pulse.validate();
    return pulse;
}

inline std::string format_metric_series(const MetricSeries &series) {
    std::ostringstream os;
    os << "# t_ns,delta_qec,leakage,mismatch\n";
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        os << format_double(series.times[i]) << "," << format_double(series.delta_qec[i]) << ","
           << format_double(series.leakage[i]) << "," << format_double(series.traj_mismatch[i]) << "\n";
    }
    return os.str();
}

inline std::string format_fock_trajectory(const Trajectory &traj, const HilbertConfig &cfg) {
    const auto occ = fock_occupation(traj, cfg);
    std::ostringstream os;
    os << "# t_ns,fock_index,population\n";
    for (std::size_t i = 0; i < occ.size(); ++i) {
        for (std::size_t n = 0; n < occ[i].size(); ++n) {
            os << format_double(traj.dt_ns * static_cast<double>(i)) << "," << n << ","
               << format_double(occ[i][n]) << "\n";
        }
    }
    return os.str();
}

inline std::string format_wigner_grid(const std::vector<Complex> &alphas, const std::vector<double> &values) {
    std::ostringstream os;
    os << "# re_alpha,im_alpha,w\n";
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        os << format_double(alphas[i].real()) << "," << format_double(alphas[i].imag()) << ","
           << format_double(values[i]) << "\n";
    }
    return os.str();
}

// CSV with header `N,fidelity,stderr(optional)`; the header row is optional.
inline FidelityCurve read_fidelity_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_fidelity_csv: cannot open " + path.string());
    }
    FidelityCurve curve;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (first && !fields.empty() && (fields[0] == "N" || fields[0] == "n")) {
            first = false;
            continue;
        }
        first = false;
        if (fields.size() < 2 || fields.size() > 3) {
            throw std::runtime_error("read_fidelity_csv: malformed row '" + line + "'");
        }
        try {
            curve.gate_counts.push_back(std::stoi(fields[0]));
            curve.fidelities.push_back(std::stod(fields[1]));
            if (fields.size() == 3 && !fields[2].empty()) {
                curve.stderrs.push_back(std::stod(fields[2]));
            }
        } catch (const std::exception &) {
            throw std::runtime_error("read_fidelity_csv: malformed number in row '" + line + "'");
        }
    }
    if (!curve.stderrs.empty() && curve.stderrs.size() != curve.fidelities.size()) {
        throw std::runtime_error("read_fidelity_csv: stderr column must be present on all rows or none");
    }
    curve.validate();
    return curve;
}

}  // namespace estkit

#endif
