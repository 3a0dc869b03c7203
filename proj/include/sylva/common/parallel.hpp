#pragma once

#include <cstddef>
#include <string_view>

namespace sylva {

/// Selects between the OpenMP kernel and its serial reference. Both paths
/// run the same per-element body and write disjoint outputs, so results are
/// bitwise identical regardless of thread count.
enum class ExecPolicy { Serial, Parallel };

std::string_view to_string(ExecPolicy policy);

template <class Body>
void for_each_index(ExecPolicy policy, std::ptrdiff_t n, Body&& body) {
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      body(i);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      body(i);
    }
  }
}

int max_threads();

}  // namespace sylva
