#include "multidiffusion/parallel.hpp"

namespace mdiff::parallel {

namespace {
const int default_threads = omp_get_max_threads();
}

void set_threads(int n) { omp_set_num_threads(n > 0 ? n : default_threads); }

int max_threads() { return omp_get_max_threads(); }

}  // namespace mdiff::parallel
