#pragma once

namespace enrest::par {

// Kernels parallelize over independent output elements with a fixed
// per-element accumulation order, so results are bitwise identical with
// parallelism on or off. The switch exists for the --sequential CLI mode
// and for stable timing comparisons.
void set_enabled(bool on);
bool enabled();
int thread_count();

}  // namespace enrest::par
