#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "otconv/grid/grid.hpp"

namespace otconv {

/// Shortest-safe formatting with 17 significant digits.
inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Text dump: header `# grid=torus|box d=<d> n=<n> t=<time> rank=<r>`, then one
/// node per line (coordinates then components), first axis fastest.
inline void write_field(std::ostream& os, const Field& f, double t) {
    const Grid& g = f.grid();
    os << "# grid=" << to_string(g.kind()) << " d=" << g.dim() << " n=" << g.n() << " t=" << format_real(t)
       << " rank=" << f.rank() << '\n';
    for (std::size_t node = 0; node < g.size(); ++node) {
        const auto x = g.point(node);
        os << format_real(x[0]);
        if (g.dim() == 2) os << ' ' << format_real(x[1]);
        for (int c = 0; c < f.rank(); ++c) os << ' ' << format_real(f(node, c));
        os << '\n';
    }
}

struct FieldSnapshot {
    Field field;
    double t;
};

inline FieldSnapshot read_field(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# grid=", 0) != 0)
        throw InvalidArgument("field dump: missing header");
    std::istringstream hs(line.substr(2));
    std::string kind;
    int d = 0, n = 0, rank = 0;
    double t = 0.0;
    std::string tok;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "grid") kind = val;
        else if (key == "d") d = std::stoi(val);
        else if (key == "n") n = std::stoi(val);
        else if (key == "t") t = std::stod(val);
        else if (key == "rank") rank = std::stoi(val);
    }
    if (kind != "torus" && kind != "box") throw InvalidArgument("field dump: bad grid kind '" + kind + "'");
    const Grid g = kind == "torus" ? Grid::torus(d, n) : Grid::box(d, n);
    Field f(g, rank);
    for (std::size_t node = 0; node < g.size(); ++node) {
        double x;
        for (int a = 0; a < d; ++a)
            if (!(is >> x)) throw InvalidArgument("field dump: truncated");
        for (int c = 0; c < rank; ++c)
            if (!(is >> f(node, c))) throw InvalidArgument("field dump: truncated");
    }
    return {std::move(f), t};
}

}  // namespace otconv
