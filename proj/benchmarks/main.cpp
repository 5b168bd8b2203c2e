#include <benchmark/benchmark.h>

// The packaged benchmark_main archive carries foreign LTO bytecode.
BENCHMARK_MAIN();
