#pragma once

// Ensemble serialization.
//
// Binary layout (all integers and doubles little-endian):
//   "SEMBENS1" | u32 dim | u32 n_steps | u64 n_paths | f64 t0 | f64 t1 | u64 seed |
//   u32 tag_len | tag bytes | values[step][path][component] as f64
// CSV: one '#' header line with the same metadata, then path_id,step,t,x1..xd.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/sde/ensemble.hpp"

namespace stochemb {

namespace io_detail {

inline constexpr char kMagic[8] = {'S', 'E', 'M', 'B', 'E', 'N', 'S', '1'};

template <class U>
U to_le(U v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        U r = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) r = static_cast<U>((r << 8) | ((v >> (8 * i)) & 0xff));
        return r;
    }
}

template <class T>
void put(std::string& out, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U u;
    std::memcpy(&u, &v, sizeof(T));
    u = to_le(u);
    char buf[sizeof(U)];
    std::memcpy(buf, &u, sizeof(U));
    out.append(buf, sizeof(U));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (pos + sizeof(U) > in.size()) throw InvalidArgument("truncated ensemble file");
    U u;
    std::memcpy(&u, in.data() + pos, sizeof(U));
    pos += sizeof(U);
    u = to_le(u);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
}

inline std::string shortest(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

}  // namespace io_detail

inline std::string to_binary(const PathEnsemble& e) {
    using namespace io_detail;
    std::string out(kMagic, 8);
    out.reserve(64 + e.model_tag().size() + e.raw().size() * 8);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.grid().n_steps));
    put<std::uint64_t>(out, e.n_paths());
    put<double>(out, e.grid().t0);
    put<double>(out, e.grid().t1);
    put<std::uint64_t>(out, e.seed());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.model_tag().size()));
    out += e.model_tag();
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(e.raw().data()), e.raw().size() * sizeof(double));
    } else {
        for (double v : e.raw()) put<double>(out, v);
    }
    return out;
}

inline PathEnsemble from_binary(const std::string& in) {
    using namespace io_detail;
    if (in.size() < 8 || std::memcmp(in.data(), kMagic, 8) != 0) throw InvalidArgument("not an ensemble file");
    std::size_t pos = 8;
    const auto dim = get<std::uint32_t>(in, pos);
    const auto n_steps = get<std::uint32_t>(in, pos);
    const auto n_paths = get<std::uint64_t>(in, pos);
    const double t0 = get<double>(in, pos), t1 = get<double>(in, pos);
    const auto seed = get<std::uint64_t>(in, pos);
    const auto tag_len = get<std::uint32_t>(in, pos);
    if (pos + tag_len > in.size()) throw InvalidArgument("truncated ensemble file");
    std::string tag = in.substr(pos, tag_len);
    pos += tag_len;
    PathEnsemble e(TimeGrid(t0, t1, static_cast<int>(n_steps)), static_cast<int>(dim), n_paths, seed, std::move(tag));
    if (in.size() - pos != e.raw().size() * sizeof(double)) throw InvalidArgument("ensemble payload size mismatch");
    for (double& v : e.raw()) v = get<double>(in, pos);
    return e;
}

inline void write_binary(const PathEnsemble& e, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    const std::string bytes = to_binary(e);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline PathEnsemble read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_binary(ss.str());
}

inline void write_csv(const PathEnsemble& e, std::ostream& out) {
    using io_detail::shortest;
    out << "# dim=" << e.dim() << " n_steps=" << e.grid().n_steps << " n_paths=" << e.n_paths()
        << " t0=" << shortest(e.grid().t0) << " t1=" << shortest(e.grid().t1) << " seed=" << e.seed() << "\n";
    out << "path_id,step,t";
    for (int i = 1; i <= e.dim(); ++i) out << ",x" << i;
    out << "\n";
    for (std::size_t p = 0; p < e.n_paths(); ++p)
        for (int k = 0; k <= e.grid().n_steps; ++k) {
            out << p << ',' << k << ',' << shortest(e.grid().time(k));
            for (int i = 0; i < e.dim(); ++i) out << ',' << shortest(e.at(k, p, i));
            out << '\n';
        }
}

inline void write_csv(const PathEnsemble& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    write_csv(e, out);
}

inline PathEnsemble read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("#", 0) != 0) throw InvalidArgument("csv ensemble: missing header line");
    int dim = 0, n_steps = 0;
    std::size_t n_paths = 0;
    double t0 = 0, t1 = 0;
    std::uint64_t seed = 0;
    std::istringstream hs(line.substr(1));
    std::string kv;
    while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "dim") dim = std::stoi(v);
        else if (k == "n_steps") n_steps = std::stoi(v);
        else if (k == "n_paths") n_paths = std::stoull(v);
        else if (k == "t0") t0 = std::stod(v);
        else if (k == "t1") t1 = std::stod(v);
        else if (k == "seed") seed = std::stoull(v);
    }
    PathEnsemble e(TimeGrid(t0, t1, n_steps), dim, n_paths, seed);
    std::getline(in, line);  // column names
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != static_cast<std::size_t>(3 + dim)) throw InvalidArgument("csv ensemble: bad row " + std::to_string(rows + 3));
        const std::size_t p = std::stoull(cells[0]);
        const int k = std::stoi(cells[1]);
        if (p >= n_paths || k < 0 || k > n_steps) throw InvalidArgument("csv ensemble: index out of range");
        for (int i = 0; i < dim; ++i) {
            double v = 0;
            const std::string& c = cells[static_cast<std::size_t>(3 + i)];
            auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc{}) throw InvalidArgument("csv ensemble: bad number '" + c + "'");
            e.at(k, p, i) = v;
        }
        ++rows;
    }
    if (rows != n_paths * static_cast<std::size_t>(n_steps + 1)) throw InvalidArgument("csv ensemble: row count mismatch");
    return e;
}

}  // namespace stochemb
