#include "grpokit/assignment.hpp"

#include <algorithm>
#include <limits>

namespace grpokit {

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
    const std::size_t rows = weights.size();
    if (rows == 0) return {};
    const std::size_t cols = weights.front().size();
    const std::size_t n = std::max(rows, cols);

    // pad to square and negate: the potentials below minimize cost
    auto cost = [&](std::size_t r, std::size_t c) {
        return (r < rows && c < cols) ? -weights[r][c] : 0.0;
    };

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> result(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t r = match[j] - 1;
        const std::size_t c = j - 1;
        if (r < rows && c < cols) result[r] = static_cast<int>(c);
    }
    return result;
}

}  // namespace grpokit
