#pragma once

namespace air {

// Keeps large tensor buffers on the heap instead of fresh mmaps. Training
// allocates and frees the same sizes every step, and the default glibc
// thresholds turn that into page-fault churn. No-op off glibc.
void tune_allocator();

}  // namespace air
