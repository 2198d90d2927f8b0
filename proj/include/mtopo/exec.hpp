#pragma once

namespace mtopo {

// Every element-level kernel has a plain serial loop (the reference used by
// the tests) and an OpenMP variant. Parallel kernels write per-element slots
// or reduce per-thread partials in thread order, so results are reproducible
// for a fixed thread count.
enum class Exec { Serial, Parallel };

void set_num_threads(int n);
int num_threads();

}  // namespace mtopo
