#pragma once

#include <cstddef>

#include "fkpi/errors.hpp"

namespace fkpi {

/// Time mesh t_k = k/m. Times are carried as the integer index k so that
/// "t_k is an integer time" is an exact predicate, never a float compare.
struct MeshSchedule {
    std::size_t m = 1;  // steps per unit time

    explicit MeshSchedule(std::size_t steps_per_unit) : m(steps_per_unit) {
        if (m == 0) throw BadSize("MeshSchedule: m must be >= 1");
    }

    double time_of(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(m); }
    bool is_integer_time(std::size_t k) const { return k % m == 0; }
    std::size_t integer_of(std::size_t k) const { return k / m; }
    std::size_t index_of_integer(std::size_t n) const { return n * m; }
};

}  // namespace fkpi
