#pragma once

#include <cstdlib>
#include <unistd.h>

namespace lrlab {

// The AVX-512 kernels OpenBLAS selects on some virtualised Xeons return non-orthogonal
// eigenvectors from ?syev/?heev. The core type is read once at library load, so the only
// fix from inside the process is to re-exec with the variable set.
inline void pin_blas_kernels(int argc, char** argv) {
    (void)argc;
    if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("LRLAB_NO_REEXEC")) return;
    setenv("OPENBLAS_CORETYPE", "Haswell", 1);
    setenv("LRLAB_NO_REEXEC", "1", 1);
    execv("/proc/self/exe", argv);
    // exec failed: carry on, eigh will report broken kernels if they are hit
}

}  // namespace lrlab
