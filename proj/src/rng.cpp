#include "papersearch/rng.hpp"

#include <cmath>

namespace ps {

double Rng::next_gaussian() {
    // Box-Muller; u1 bounded away from 0.
    double u1 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace ps
