#include "lrlab/blas_env.hpp"

#include <gtest/gtest.h>

int main(int argc, char** argv) {
    lrlab::pin_blas_kernels(argc, argv);
    testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
