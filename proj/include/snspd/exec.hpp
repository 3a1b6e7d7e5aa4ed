#pragma once

namespace snspd {

// Every data-parallel kernel has two implementations: an OpenMP one and a
// plain serial one kept as the reference. Both produce bitwise-identical
// results (per-index RNG substreams, ordered reductions); tests assert it
// and benchmarks/bench_kernels compares their throughput.
enum class ExecPolicy { serial, parallel };

}  // namespace snspd
