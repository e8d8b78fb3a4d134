#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/QR>
#include <json.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace lowrank_levy {

using Json = nlohmann::json;

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of diag(R) folded into Q.
template <class Rng>
Matrix random_orthogonal(Eigen::Index d, Rng& rng) {
    if (d < 1) throw InvalidParameter("random_orthogonal requires d >= 1");
    std::normal_distribution<double> normal;
    Matrix g(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

/// Constructor parameters of a ModelSpec. sigma is either explicit or
/// O^T diag(eigenvalues) O with a seeded random orthogonal O.
struct ModelConfig {
    Eigen::Index dim = 1;
    std::vector<double> eigenvalues;
    std::optional<Matrix> sigma;
    std::optional<std::uint64_t> rotation_seed;
    std::vector<double> drift;
    JumpSpec jumps = NoJumps{};
    ClockSpec clock = DeterministicClock{};
};

inline Matrix build_sigma(const ModelConfig& mc, std::uint64_t master_seed) {
    if (mc.sigma) return *mc.sigma;
    if (mc.dim < 1) throw InvalidParameter("model dim must be positive");
    if (static_cast<Eigen::Index>(mc.eigenvalues.size()) > mc.dim)
        throw InvalidParameter("more eigenvalues than dimensions");
    Vector lambda = Vector::Zero(mc.dim);
    for (std::size_t i = 0; i < mc.eigenvalues.size(); ++i) lambda(static_cast<Eigen::Index>(i)) = mc.eigenvalues[i];
    auto rng = make_engine(mc.rotation_seed.value_or(substream_seed(master_seed, 0, stream_tag::rotation)));
    const Matrix o = random_orthogonal(mc.dim, rng);
    return symmetrize(o.transpose() * lambda.asDiagonal() * o);
}

inline ModelSpec build_model(const ModelConfig& mc, std::uint64_t master_seed) {
    const Matrix sigma = build_sigma(mc, master_seed);
    Vector drift = Vector::Zero(sigma.rows());
    if (!mc.drift.empty()) {
        if (static_cast<Eigen::Index>(mc.drift.size()) != sigma.rows())
            throw InvalidParameter("drift length does not match the dimension");
        drift = Eigen::Map<const Vector>(mc.drift.data(), sigma.rows());
    }
    return ModelSpec(sigma, mc.jumps, mc.clock, drift);
}

// ---------------------------------------------------------------- json

inline JumpSpec jumps_from_json(const Json& j) {
    const std::string type = j.value("type", "none");
    if (type == "none") return NoJumps{};
    if (type == "nig")
        return IndependentNIG{j.value("alpha", 1.0), j.value("beta", 0.0), j.value("delta", 1.0), j.value("mu", 0.0)};
    if (type == "compound_poisson_gaussian" || type == "cpg") return CompoundPoissonGaussian{j.value("intensity", 1.0)};
    throw InvalidParameter("unknown jump type '" + type + "'");
}

inline ClockSpec clock_from_json(const Json& j) {
    const std::string type = j.value("type", "deterministic");
    ClockSpec c;
    if (type == "deterministic") c = DeterministicClock{j.value("step", 1.0)};
    else if (type == "exponential") c = ExponentialClock{j.value("mean", 1.0)};
    else if (type == "gamma") c = GammaClock{j.value("shape", 1.0), j.value("rate", 1.0)};
    else if (type == "cir" || type == "integrated_cir")
        c = IntegratedCirClock{j.value("kappa", 1.0), j.value("eta", 1.0), j.value("xi", 1.0)};
    else throw InvalidParameter("unknown clock type '" + type + "'");
    validate(c);
    return c;
}

/// "deterministic:1", "exponential:1", "gamma:shape,rate", "cir:kappa,eta,xi".
inline ClockSpec parse_clock(const std::string& text) {
    const auto colon = text.find(':');
    const std::string type = text.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::istringstream in(text.substr(colon + 1));
        std::string tok;
        while (std::getline(in, tok, ',')) args.push_back(std::stod(tok));
    }
    auto arg = [&](std::size_t i, double def) { return i < args.size() ? args[i] : def; };
    ClockSpec c;
    if (type == "deterministic") c = DeterministicClock{arg(0, 1.0)};
    else if (type == "exponential") c = ExponentialClock{arg(0, 1.0)};
    else if (type == "gamma") c = GammaClock{arg(0, 1.0), arg(1, 1.0)};
    else if (type == "cir") c = IntegratedCirClock{arg(0, 1.0), arg(1, 1.0), arg(2, 1.0)};
    else throw InvalidParameter("unknown clock '" + text + "'");
    validate(c);
    return c;
}

inline Json clock_to_json(const ClockSpec& clock) {
    return std::visit(
        [](const auto& c) -> Json {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DeterministicClock>) return {{"type", "deterministic"}, {"step", c.step}};
            else if constexpr (std::is_same_v<T, ExponentialClock>) return {{"type", "exponential"}, {"mean", c.mean}};
            else if constexpr (std::is_same_v<T, GammaClock>)
                return {{"type", "gamma"}, {"shape", c.shape}, {"rate", c.rate}};
            else return {{"type", "cir"}, {"kappa", c.kappa}, {"eta", c.eta}, {"xi", c.xi}};
        },
        clock);
}

inline Json jumps_to_json(const JumpSpec& jumps) {
    return std::visit(
        [](const auto& j) -> Json {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) return {{"type", "none"}};
            else if constexpr (std::is_same_v<T, IndependentNIG>)
                return {{"type", "nig"}, {"alpha", j.alpha}, {"beta", j.beta}, {"delta", j.delta}, {"mu", j.mu}};
            else return {{"type", "compound_poisson_gaussian"}, {"intensity", j.intensity}};
        },
        jumps);
}

inline Matrix matrix_from_json(const Json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) throw InvalidParameter("empty matrix");
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw InvalidParameter("ragged matrix");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
    }
    return m;
}

inline Json matrix_to_json(const Matrix& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        out.push_back(row);
    }
    return out;
}

inline ModelConfig model_from_json(const Json& j) {
    ModelConfig mc;
    if (j.contains("sigma")) {
        mc.sigma = matrix_from_json(j.at("sigma"));
        mc.dim = mc.sigma->rows();
    } else {
        mc.dim = j.at("dim").get<Eigen::Index>();
        mc.eigenvalues = j.value("eigenvalues", std::vector<double>{});
    }
    if (j.contains("rotation_seed")) mc.rotation_seed = j.at("rotation_seed").get<std::uint64_t>();
    mc.drift = j.value("drift", std::vector<double>{});
    if (j.contains("jumps")) mc.jumps = jumps_from_json(j.at("jumps"));
    if (j.contains("clock")) mc.clock = clock_from_json(j.at("clock"));
    validate(mc.jumps);
    return mc;
}

inline Json model_to_json(const ModelConfig& mc) {
    Json j;
    if (mc.sigma) j["sigma"] = matrix_to_json(*mc.sigma);
    else {
        j["dim"] = mc.dim;
        j["eigenvalues"] = mc.eigenvalues;
    }
    if (mc.rotation_seed) j["rotation_seed"] = *mc.rotation_seed;
    if (!mc.drift.empty()) j["drift"] = mc.drift;
    j["jumps"] = jumps_to_json(mc.jumps);
    j["clock"] = clock_to_json(mc.clock);
    return j;
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return Json::parse(in, nullptr, true, true);
}

}  // namespace lowrank_levy
