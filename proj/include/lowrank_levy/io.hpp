#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "sim.hpp"
#include "solver.hpp"
#include "spectral.hpp"

namespace lowrank_levy {

/// Round-trippable decimal form.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidParameter("malformed number '" + s + "'");
    return v;
}

// ---------------------------------------------------------------- samples

/// Columns y1..yd, plus t when the realized clock increments are known.
inline void write_samples_csv(const std::filesystem::path& path, const SampleSet& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    for (Eigen::Index k = 0; k < s.dim(); ++k) out << (k ? "," : "") << "y" << (k + 1);
    if (s.clock_increments) out << ",t";
    out << "\n";
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        for (Eigen::Index k = 0; k < s.dim(); ++k) out << (k ? "," : "") << fmt_double(s.increments(j, k));
        if (s.clock_increments) out << "," << fmt_double((*s.clock_increments)(j));
        out << "\n";
    }
}

inline SampleSet read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InvalidParameter("empty sample file " + path.string());
    const auto header = split_csv_line(line);
    Eigen::Index d = 0;
    bool has_t = false;
    for (const auto& h : header) {
        if (h == "t") has_t = true;
        else if (h.size() > 1 && h[0] == 'y') ++d;
        else throw InvalidParameter("unexpected sample column '" + h + "'");
    }
    if (d == 0) throw InvalidParameter("sample file has no y columns");
    std::vector<double> ys, ts;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw InvalidParameter("ragged sample row in " + path.string());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double v = parse_double(cells[c]);
            (header[c] == "t" ? ts : ys).push_back(v);
        }
    }
    const auto n = static_cast<Eigen::Index>(ys.size()) / d;
    SampleSet s;
    s.increments = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        ys.data(), n, d);
    if (has_t) s.clock_increments = Eigen::Map<const Vector>(ts.data(), n);
    if (!s.increments.allFinite()) throw InvalidParameter("non-finite increments in " + path.string());
    return s;
}

inline constexpr const char* binary_magic = "lowrank_levy-samples v1";

/// One text header line (magic, digest, seed, shape) followed by native
/// little-endian doubles: increments row-major, then clock increments.
inline void write_samples_binary(const std::filesystem::path& path, const SampleSet& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << binary_magic << " digest=" << hex_digest(s.spec_digest) << " seed=" << s.seed << " rows=" << s.size()
        << " cols=" << s.dim() << " clock=" << (s.clock_increments ? 1 : 0) << "\n";
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = s.increments;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (s.clock_increments)
        out.write(reinterpret_cast<const char*>(s.clock_increments->data()),
                  static_cast<std::streamsize>(s.clock_increments->size() * sizeof(double)));
}

inline SampleSet read_samples_binary(const std::filesystem::path& path,
                                     std::optional<std::uint64_t> expected_digest = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    if (header.rfind(binary_magic, 0) != 0) throw InvalidParameter("not a sample cache: " + path.string());
    std::istringstream fields(header.substr(std::string(binary_magic).size()));
    std::string tok;
    SampleSet s;
    long long rows = -1, cols = -1;
    int clock = 0;
    while (fields >> tok) {
        const auto eq = tok.find('=');
        const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "digest") s.spec_digest = std::stoull(val, nullptr, 16);
        else if (key == "seed") s.seed = std::stoull(val);
        else if (key == "rows") rows = std::stoll(val);
        else if (key == "cols") cols = std::stoll(val);
        else if (key == "clock") clock = std::stoi(val);
    }
    if (rows < 1 || cols < 1) throw InvalidParameter("corrupt sample cache header");
    if (expected_digest && *expected_digest != s.spec_digest)
        throw InvalidParameter("sample cache was generated by a different model");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (clock) {
        Vector t(rows);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        s.clock_increments = std::move(t);
    }
    if (!in) throw InvalidParameter("truncated sample cache " + path.string());
    s.increments = rm;
    return s;
}

// ---------------------------------------------------------------- spectral

inline void write_exponent_csv(std::ostream& out, const ExponentEstimate& est) {
    for (Eigen::Index k = 0; k < est.freqs.cols(); ++k) out << "u" << (k + 1) << ",";
    out << "re_psi,im_psi,masked\n";
    for (std::size_t i = 0; i < est.size(); ++i) {
        for (Eigen::Index k = 0; k < est.freqs.cols(); ++k)
            out << fmt_double(est.freqs(static_cast<Eigen::Index>(i), k)) << ",";
        if (est.masked[i]) out << "nan,nan,1\n";
        else out << fmt_double(est.values[i].real()) << "," << fmt_double(est.values[i].imag()) << ",0\n";
    }
}

inline void write_laplace_inverse_csv(std::ostream& out, const EmpiricalLaplaceInverse& inv) {
    out << "j,moment,coefficient\n";
    for (int j = 1; j <= inv.order() + 1; ++j) {
        out << j << "," << fmt_double(inv.moments()[static_cast<std::size_t>(j - 1)]) << ",";
        if (j <= inv.order()) out << fmt_double(inv.coefficients()[static_cast<std::size_t>(j - 1)]);
        out << "\n";
    }
}

// ---------------------------------------------------------------- reports

inline void write_report_csv(std::ostream& out, const EstimateReport& r, Eigen::Index n, std::uint64_t seed) {
    const Eigen::Index d = r.sigma_hat.rows();
    out << "n,seed,lambda,U,rank,rel_error,alpha_hat";
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) out << ",s_" << (i + 1) << "_" << (j + 1);
    out << "\n";
    out << n << "," << seed << "," << fmt_double(r.lambda) << "," << fmt_double(r.cutoff) << "," << r.rank << ","
        << (r.rel_error ? fmt_double(*r.rel_error) : "") << "," << (r.alpha_hat ? fmt_double(*r.alpha_hat) : "");
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) out << "," << fmt_double(r.sigma_hat(i, j));
    out << "\n";
}

inline void write_trace_csv(std::ostream& out, const EstimateReport& r) {
    out << "iteration,objective\n";
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i)
        out << i << "," << fmt_double(r.objective_trace[i]) << "\n";
}

inline std::string summary(const EstimateReport& r) {
    std::ostringstream s;
    s << "lambda      " << r.lambda << "\n"
      << "cut-off U   " << r.cutoff << "\n"
      << "iterations  " << r.iterations << (r.converged ? " (converged)" : " (iteration limit)") << "\n"
      << "rank        " << r.rank << "\n";
    if (r.alpha_hat) s << "alpha_hat   " << *r.alpha_hat << "\n";
    if (r.rel_error) s << "rel_error   " << *r.rel_error << "\n";
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r.sigma_psd, Eigen::EigenvaluesOnly);
    s << "eigenvalues " << eig.eigenvalues().reverse().transpose() << "\n";
    return s.str();
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const auto& c : split_csv_line(line)) row.push_back(parse_double(c));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidParameter("empty matrix file " + path.string());
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw InvalidParameter("ragged matrix file " + path.string());
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt_double(m(i, j));
        out << "\n";
    }
}

}  // namespace lowrank_levy
