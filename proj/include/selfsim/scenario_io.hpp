#pragma once

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <variant>

#include "selfsim/evolve.hpp"

namespace selfsim {

using AnyScenario = std::variant<Scenario<CartesianGrid2D>, Scenario<CartesianGrid3D>, Scenario<RadialGrid>>;

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw Error(ErrorKind::InvalidArgument, where + ": unknown key '" + k + "'");
}

inline const json& need(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(ErrorKind::InvalidArgument, where + ": missing key '" + key + "'");
    return j.at(key);
}

inline double num(const json& j, const std::string& where) {
    if (!j.is_number()) throw Error(ErrorKind::InvalidArgument, where + ": expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw Error(ErrorKind::InvalidArgument, where + ": expected an integer");
    return j.get<int>();
}

inline double num_or(const json& j, const char* key, double def, const std::string& where) {
    return j.contains(key) ? num(j.at(key), where + "." + key) : def;
}

inline std::string str(const json& j, const std::string& where) {
    if (!j.is_string()) throw Error(ErrorKind::InvalidArgument, where + ": expected a string");
    return j.get<std::string>();
}

inline ShapeSpec parse_shape(const json& j, int dim) {
    ShapeSpec s;
    s.dim = dim;
    auto mat = [&](const json& m, const std::string& where) {
        if (!m.is_array() || m.size() != static_cast<std::size_t>(dim))
            throw Error(ErrorKind::InvalidArgument, where + ": expected a " + std::to_string(dim) + "x" +
                                                        std::to_string(dim) + " matrix");
        Eigen::MatrixXd B(dim, dim);
        for (int r = 0; r < dim; ++r) {
            if (!m[r].is_array() || m[r].size() != static_cast<std::size_t>(dim))
                throw Error(ErrorKind::InvalidArgument, where + ": bad matrix row");
            for (int c = 0; c < dim; ++c) B(r, c) = num(m[r][c], where);
        }
        return B;
    };
    if (!j.is_array() || j.empty()) throw Error(ErrorKind::InvalidArgument, "matrix.shape_samples: expected a non-empty array");
    if (dim == 2) {
        for (std::size_t i = 0; i < j.size(); ++i) s.samples.push_back(mat(j[i], "matrix.shape_samples"));
        s.n_lat = 1;
        s.n_lon = static_cast<int>(j.size());
    } else {
        s.n_lat = static_cast<int>(j.size());
        s.n_lon = -1;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_array()) throw Error(ErrorKind::InvalidArgument, "matrix.shape_samples: expected [lat][lon]");
            if (s.n_lon < 0) s.n_lon = static_cast<int>(j[i].size());
            if (static_cast<int>(j[i].size()) != s.n_lon)
                throw Error(ErrorKind::InvalidArgument, "matrix.shape_samples: ragged latitude rows");
            for (const auto& m : j[i]) s.samples.push_back(mat(m, "matrix.shape_samples"));
        }
    }
    return s;
}

inline MatrixSpec parse_matrix(const json& j, int dim) {
    reject_unknown(j, {"kind", "b", "nu", "amplitude", "shape_samples"}, "matrix");
    const auto kind = str(need(j, "kind", "matrix"), "matrix.kind");
    if (kind == "identity") return MatrixSpec::identity(dim);
    if (kind == "meyers_serrin") return MatrixSpec::meyers_serrin(dim, num(need(j, "b", "matrix"), "matrix.b"));
    if (kind == "perturbed") {
        const MatrixSpec base =
            j.contains("b") ? MatrixSpec::meyers_serrin(dim, num(j.at("b"), "matrix.b")) : MatrixSpec::identity(dim);
        return MatrixSpec::perturbed(base, num(need(j, "amplitude", "matrix"), "matrix.amplitude"),
                                     num(need(j, "nu", "matrix"), "matrix.nu"));
    }
    if (kind == "from_shape") return construct_from_shape(parse_shape(need(j, "shape_samples", "matrix"), dim));
    throw Error(ErrorKind::InvalidArgument, "matrix.kind: unknown kind '" + kind + "'");
}

inline NonlinearitySpec parse_nonlinearity(const json& j, int dim) {
    reject_unknown(j, {"kind", "sigma", "coefficient", "saturation"}, "nonlinearity");
    const auto kind = str(need(j, "kind", "nonlinearity"), "nonlinearity.kind");
    if (kind == "none") return NonlinearitySpec::none();
    if (kind == "power_law")
        return NonlinearitySpec::power_law(dim, num(need(j, "sigma", "nonlinearity"), "nonlinearity.sigma"),
                                           num_or(j, "coefficient", 1.0, "nonlinearity"),
                                           num_or(j, "saturation", 1e3, "nonlinearity"));
    throw Error(ErrorKind::InvalidArgument, "nonlinearity.kind: unknown kind '" + kind + "'");
}

inline InitialDataSpec parse_initial(const json& j, int dim, const std::filesystem::path& base_dir) {
    reject_unknown(j, {"kind", "center", "width", "mass", "b", "ell", "k", "amplitude", "eps", "file"}, "initial");
    const auto kind = str(need(j, "kind", "initial"), "initial.kind");
    InitialDataSpec s;
    if (kind == "gaussian") {
        InitialDataSpec::Gaussian g;
        if (j.contains("center")) {
            const auto& c = j.at("center");
            if (!c.is_array() || c.size() != static_cast<std::size_t>(dim))
                throw Error(ErrorKind::InvalidArgument, "initial.center: expected " + std::to_string(dim) + " numbers");
            for (const auto& v : c) g.center.push_back(num(v, "initial.center"));
        }
        g.width = num_or(j, "width", 1.0, "initial");
        g.mass = num_or(j, "mass", 1.0, "initial");
        if (!(g.width > 0.0)) throw Error(ErrorKind::InvalidArgument, "initial.width must be positive");
        s.kind = g;
    } else if (kind == "eigenmode") {
        const int ell = j.contains("ell") ? integer(j.at("ell"), "initial.ell") : 0;
        const int k = j.contains("k") ? integer(j.at("k"), "initial.k") : 0;
        s.kind = InitialDataSpec::Eigenmode{make_mode(dim, num(need(j, "b", "initial"), "initial.b"), ell, k),
                                            num_or(j, "amplitude", 1.0, "initial")};
    } else if (kind == "phi_plus_mode") {
        s.kind = InitialDataSpec::PhiPlusMode{num_or(j, "eps", 0.1, "initial")};
    } else if (kind == "custom") {
        auto p = std::filesystem::path(str(need(j, "file", "initial"), "initial.file"));
        if (p.is_relative()) p = base_dir / p;
        std::ifstream is(p, std::ios::binary);
        if (!is) throw Error(ErrorKind::Io, "cannot open initial data file " + p.string());
        std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        // grid checked against the scenario grid by the caller
        std::size_t pos = 4 + 2 * sizeof(std::int32_t) + sizeof(double) + sizeof(std::int32_t) + sizeof(std::uint64_t);
        if (bytes.size() < pos || bytes.compare(0, 4, "SSFD") != 0) throw Error(ErrorKind::Io, "bad field file " + p.string());
        std::vector<double> v((bytes.size() - pos) / sizeof(double));
        std::memcpy(v.data(), bytes.data() + pos, v.size() * sizeof(double));
        s.kind = InitialDataSpec::Custom{std::move(v)};
    } else {
        throw Error(ErrorKind::InvalidArgument, "initial.kind: unknown kind '" + kind + "'");
    }
    return s;
}

template <class G>
Scenario<G> fill_scenario(const json& j, const G& grid, int dim, const std::filesystem::path& base_dir) {
    Scenario<G> sc;
    sc.grid = grid;
    sc.matrix = parse_matrix(need(j, "matrix", "scenario"), dim);
    sc.nonlinearity =
        j.contains("nonlinearity") ? parse_nonlinearity(j.at("nonlinearity"), dim) : NonlinearitySpec::none();
    sc.m = num_or(j, "m", 2.0, "scenario");
    sc.delta = num_or(j, "delta", 1.0, "scenario");
    sc.kappa = num_or(j, "kappa", 1.0, "scenario");
    sc.initial = parse_initial(need(j, "initial", "scenario"), dim, base_dir);
    sc.tau_max = num_or(j, "tau_max", 20.0, "scenario");
    sc.dtau = num_or(j, "dtau", 0.0, "scenario");
    if (j.contains("dtau") && !(sc.dtau > 0.0)) throw Error(ErrorKind::InvalidArgument, "dtau must be positive");
    sc.snapshot_stride = j.contains("snapshot_stride") ? integer(j.at("snapshot_stride"), "snapshot_stride") : 10;
    sc.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
    if (!(sc.m > 0.5 * dim)) throw Error(ErrorKind::ParameterOutOfRange, "m must exceed n/2");
    if (!(sc.delta >= 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must be >= 1");
    if (!(sc.kappa > 0.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be positive");
    if (auto c = std::get_if<InitialDataSpec::Custom>(&sc.initial.kind); c && c->values.size() != grid.size())
        throw Error(ErrorKind::InvalidArgument, "custom initial data does not match the grid");
    validate_scenario(sc);
    return sc;
}

}  // namespace detail

inline AnyScenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    using namespace detail;
    reject_unknown(j, {"dim", "matrix", "nonlinearity", "grid", "m", "delta", "kappa", "initial", "tau_max", "dtau",
                       "snapshot_stride", "seed"},
                   "scenario");
    const int dim = integer(need(j, "dim", "scenario"), "dim");
    if (dim != 2 && dim != 3) throw Error(ErrorKind::InvalidArgument, "dim must be 2 or 3");
    const auto& gj = need(j, "grid", "scenario");
    reject_unknown(gj, {"R", "N", "radial"}, "grid");
    const double R = num(need(gj, "R", "grid"), "grid.R");
    const int N = integer(need(gj, "N", "grid"), "grid.N");
    const bool radial = gj.contains("radial") && gj.at("radial").get<bool>();
    if (!(R > 0.0) || N < 2) throw Error(ErrorKind::InvalidArgument, "grid needs R > 0 and N >= 2");
    if (!radial && N % 2 != 0) throw Error(ErrorKind::InvalidArgument, "grid.N must be even");
    if (radial) return fill_scenario(j, RadialGrid{dim, R, N}, dim, base_dir);
    if (dim == 2) return fill_scenario(j, CartesianGrid2D{R, N}, dim, base_dir);
    return fill_scenario(j, CartesianGrid3D{R, N}, dim, base_dir);
}

inline AnyScenario load_scenario(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Io, "cannot open scenario file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("scenario is not valid JSON: ") + e.what());
    }
    try {
        return parse_scenario(j, path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("scenario schema: ") + e.what());
    }
}

}  // namespace selfsim
