#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <locale>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "selfsim/coeffs.hpp"
#include "selfsim/error.hpp"

namespace selfsim {

inline double sphere_area(int n) { return n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi; }

// Cell-centred radial grid r_i = (i+1/2)h on (0, R); cell volumes are exact shells.
struct RadialGrid {
    int n = 3;
    double R = 12.0;
    int N = 400;

    static constexpr bool is_radial = true;
    int dim() const { return n; }
    double h() const { return R / N; }
    std::size_t size() const { return static_cast<std::size_t>(N); }
    double radius(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h(); }
    double face_radius(int f) const { return f * h(); }
    double face_area(int f) const { return sphere_area(n) * std::pow(face_radius(f), n - 1); }
    double volume(std::size_t i) const {
        const double a = static_cast<double>(i) * h(), b = a + h();
        return sphere_area(n) / n * (std::pow(b, n) - std::pow(a, n));
    }
    bool operator==(const RadialGrid& o) const { return n == o.n && R == o.R && N == o.N; }
};

// Uniform grid on [-R, R]^D with N cells per axis; the origin is a cell corner (N even).
template <int D>
struct CartesianGrid {
    double R = 12.0;
    int N = 128;

    static constexpr bool is_radial = false;
    static constexpr int Dim = D;
    int dim() const { return D; }
    double h() const { return 2.0 * R / N; }
    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < D; ++i) s *= static_cast<std::size_t>(N);
        return s;
    }
    std::size_t stride(int d) const {
        std::size_t s = 1;
        for (int i = D - 1; i > d; --i) s *= static_cast<std::size_t>(N);
        return s;
    }
    std::array<int, D> multi(std::size_t idx) const {
        std::array<int, D> m;
        for (int d = D - 1; d >= 0; --d) {
            m[d] = static_cast<int>(idx % N);
            idx /= N;
        }
        return m;
    }
    std::size_t flat(const std::array<int, D>& m) const {
        std::size_t idx = 0;
        for (int d = 0; d < D; ++d) idx = idx * N + m[d];
        return idx;
    }
    double coord(int i) const { return (i + 0.5) * h() - R; }
    Vec<D> center(std::size_t idx) const {
        const auto m = multi(idx);
        Vec<D> x;
        for (int d = 0; d < D; ++d) x[d] = coord(m[d]);
        return x;
    }
    double radius(std::size_t idx) const { return center(idx).norm(); }
    double volume(std::size_t) const { return std::pow(h(), D); }
    bool operator==(const CartesianGrid& o) const { return R == o.R && N == o.N; }
};

using CartesianGrid2D = CartesianGrid<2>;
using CartesianGrid3D = CartesianGrid<3>;

template <class G>
struct Field {
    G grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const G& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    Field(const G& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw Error(ErrorKind::InvalidArgument, "field length does not match grid");
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    Field& operator+=(const Field& o) {
        for (std::size_t i = 0; i < size(); ++i) values[i] += o.values[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        for (std::size_t i = 0; i < size(); ++i) values[i] -= o.values[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (auto& v : values) v *= s;
        return *this;
    }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Sample a function of position; for radial grids the argument is the radius.
template <int D, class F>
Field<CartesianGrid<D>> sample(const CartesianGrid<D>& g, F&& f) {
    Field<CartesianGrid<D>> out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.center(i));
    return out;
}

template <class F>
Field<RadialGrid> sample(const RadialGrid& g, F&& f) {
    Field<RadialGrid> out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.radius(i));
    return out;
}

struct WeightSpec {
    double m = 0.0;
    double delta = 1.0;
    double p = 2.0;
};

enum class WeightForm { OnePlusSq, DeltaSq, OnePlusAbs, Homogeneous };

inline double weight_value(WeightForm form, const WeightSpec& w, double r) {
    switch (form) {
    case WeightForm::OnePlusSq: return std::pow(1.0 + r * r, 0.5 * w.m * w.p);
    case WeightForm::DeltaSq: return std::pow(w.delta + r * r, 0.5 * w.m * w.p);
    case WeightForm::OnePlusAbs: return std::pow(1.0 + r, w.m * w.p);
    case WeightForm::Homogeneous: return std::pow(r, w.m * w.p);
    }
    return 1.0;
}

template <class G>
double integral(const Field<G>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * f.grid.volume(i);
    return s;
}

template <class G>
double inner(const Field<G>& a, const Field<G>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * a.grid.volume(i);
    return s;
}

// (int weight |f|^p)^{1/p}; OnePlusSq with p = 2 is the L^2(m) norm, DeltaSq gives the
// energy weight (delta+|y|^2)^m, OnePlusAbs gives L^p(m).
template <class G>
double weighted_norm(const Field<G>& f, const WeightSpec& w, WeightForm form = WeightForm::OnePlusSq) {
    if (!(w.p >= 1.0)) throw Error(ErrorKind::InvalidArgument, "weight exponent p must be >= 1");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double v = std::abs(f[i]);
        if (v == 0.0) continue;
        s += weight_value(form, w, f.grid.radius(i)) * std::pow(v, w.p) * f.grid.volume(i);
    }
    return std::pow(s, 1.0 / w.p);
}

template <class G>
double l2_norm(const Field<G>& f) {
    return std::sqrt(inner(f, f));
}

template <class G>
double max_abs(const Field<G>& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

// ---- serialization -------------------------------------------------------

namespace detail {

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error(ErrorKind::Io, "cannot open " + tmp.string());
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw Error(ErrorKind::Io, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

template <class T>
void put(std::string& s, const T& v) {
    s.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(const std::string& s, std::size_t& pos) {
    if (pos + sizeof(T) > s.size()) throw Error(ErrorKind::Io, "truncated field file");
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << (v == 0.0 ? 0.0 : v);
    return os.str();
}

}  // namespace detail

// Header: "SSFD", int32 dim, int32 radial flag, double R, int32 N, uint64 count; then values.
template <class G>
std::string field_to_bytes(const Field<G>& f) {
    std::string s = "SSFD";
    detail::put<std::int32_t>(s, f.grid.dim());
    detail::put<std::int32_t>(s, G::is_radial ? 1 : 0);
    detail::put<double>(s, f.grid.R);
    detail::put<std::int32_t>(s, f.grid.N);
    detail::put<std::uint64_t>(s, f.size());
    s.append(reinterpret_cast<const char*>(f.values.data()), f.size() * sizeof(double));
    return s;
}

template <class G>
Field<G> field_from_bytes(const std::string& s) {
    if (s.size() < 4 || s.compare(0, 4, "SSFD") != 0) throw Error(ErrorKind::Io, "bad field magic");
    std::size_t pos = 4;
    const int dim = detail::get<std::int32_t>(s, pos);
    const int radial = detail::get<std::int32_t>(s, pos);
    const double R = detail::get<double>(s, pos);
    const int N = detail::get<std::int32_t>(s, pos);
    const auto count = detail::get<std::uint64_t>(s, pos);
    G g;
    if constexpr (G::is_radial) {
        if (!radial) throw Error(ErrorKind::Io, "field is not radial");
        g = RadialGrid{dim, R, N};
    } else {
        if (radial || dim != G::Dim) throw Error(ErrorKind::Io, "field grid kind mismatch");
        g = G{R, N};
    }
    if (count != g.size() || pos + count * sizeof(double) != s.size())
        throw Error(ErrorKind::Io, "field size mismatch");
    std::vector<double> v(count);
    std::memcpy(v.data(), s.data() + pos, count * sizeof(double));
    return Field<G>(g, std::move(v));
}

template <class G>
void write_field_binary(const std::filesystem::path& p, const Field<G>& f) {
    detail::write_file_atomic(p, field_to_bytes(f));
}

template <class G>
Field<G> read_field_binary(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot open " + p.string());
    std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return field_from_bytes<G>(s);
}

template <class G>
std::string field_to_csv(const Field<G>& f) {
    std::string out;
    if constexpr (G::is_radial) {
        out = "r,value\n";
        for (std::size_t i = 0; i < f.size(); ++i)
            out += detail::format_double(f.grid.radius(i)) + "," + detail::format_double(f[i]) + "\n";
    } else {
        static const char* names[] = {"y1", "y2", "y3"};
        for (int d = 0; d < G::Dim; ++d) out += std::string(names[d]) + ",";
        out += "value\n";
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto c = f.grid.center(i);
            for (int d = 0; d < G::Dim; ++d) out += detail::format_double(c[d]) + ",";
            out += detail::format_double(f[i]) + "\n";
        }
    }
    return out;
}

}  // namespace selfsim
