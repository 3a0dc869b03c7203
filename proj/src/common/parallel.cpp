#include "sylva/common/parallel.hpp"

#include <omp.h>

namespace sylva {

std::string_view to_string(ExecPolicy policy) {
  return policy == ExecPolicy::Parallel ? "parallel" : "serial";
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace sylva
