// Writes the frozen forward output of the published kernels. Run once; the
// result is committed under tests/data.

#include <cstdio>

#include "reference_wcnn.hpp"

using namespace lapfield::reference;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s OUT\n", argv[0]);
        return 1;
    }
    const Grid l = frozen_input(kOracleSize, kOracleSize, kOracleSeed);
    const Grid u = forward(l, table3_h(), table3_g(), table3_k(), kOracleLevels);
    std::FILE* f = std::fopen(argv[1], "w");
    if (!f) return 1;
    std::fprintf(f, "# forward output, published 5x5 kernels, %d levels, seed %llu\n", kOracleLevels,
                 static_cast<unsigned long long>(kOracleSeed));
    std::fprintf(f, "%d %d\n", u.rows, u.cols);
    for (double x : u.v) std::fprintf(f, "%a\n", x);
    return std::fclose(f) == 0 ? 0 : 1;
}
