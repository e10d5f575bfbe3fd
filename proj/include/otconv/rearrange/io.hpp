#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "otconv/grid/io.hpp"
#include "otconv/rearrange/assignment.hpp"
#include "otconv/rearrange/cloud.hpp"

namespace otconv {

/// Header `# atoms=<N> d=<d> m=<m>`, then one row per atom: a components then
/// y components. When `sigma` is given a trailing integer column is added.
inline void write_cloud(std::ostream& os, const LagrangianCloud& cloud, const Permutation* sigma = nullptr) {
    os << "# atoms=" << cloud.size() << " d=" << cloud.dim() << " m=" << cloud.value_dim();
    if (sigma) os << " sigma";
    os << '\n';
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        bool first = true;
        for (double x : cloud.atom(i)) {
            if (!first) os << ' ';
            os << format_real(x);
            first = false;
        }
        for (double y : cloud.value(i)) os << ' ' << format_real(y);
        if (sigma) os << ' ' << (*sigma)[i];
        os << '\n';
    }
}

inline void write_assignment(std::ostream& os, const LagrangianCloud& cloud, const TransportAssignment& a) {
    write_cloud(os, cloud, &a.sigma);
}

inline LagrangianCloud read_cloud(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# atoms=", 0) != 0) throw InvalidArgument("cloud dump: missing header");
    std::istringstream hs(line.substr(2));
    std::size_t n = 0;
    int d = 0, m = 0;
    bool has_sigma = false;
    std::string tok;
    while (hs >> tok) {
        if (tok == "sigma") {
            has_sigma = true;
            continue;
        }
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "atoms") n = std::stoul(val);
        else if (key == "d") d = std::stoi(val);
        else if (key == "m") m = std::stoi(val);
    }
    std::vector<double> atoms(n * d), values(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < d; ++a)
            if (!(is >> atoms[i * d + a])) throw InvalidArgument("cloud dump: truncated");
        for (int c = 0; c < m; ++c)
            if (!(is >> values[i * m + c])) throw InvalidArgument("cloud dump: truncated");
        if (has_sigma) {
            long s;
            if (!(is >> s)) throw InvalidArgument("cloud dump: truncated");
        }
    }
    return LagrangianCloud(d, std::move(atoms), m, std::move(values));
}

}  // namespace otconv
