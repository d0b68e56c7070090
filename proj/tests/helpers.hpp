#pragma once

#include <cstdint>
#include <random>

#include "elsem/numkit.hpp"

namespace test_helpers {

using elsem::Matrix;
using elsem::Vector;

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& gen, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    Matrix out(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) out(i, j) = normal(gen);
    }
    return out;
}

inline Vector random_vector(int size, std::mt19937_64& gen, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    Vector out(size);
    for (int i = 0; i < size; ++i) out[i] = normal(gen);
    return out;
}

inline Matrix random_symmetric(int p, std::mt19937_64& gen) {
    const Matrix a = random_matrix(p, p, gen);
    return (a + a.transpose()) / 2.0;
}

inline Matrix random_pd(int p, std::mt19937_64& gen, double ridge = 0.1) {
    const Matrix a = random_matrix(p, p, gen);
    return a * a.transpose() / static_cast<double>(p) + ridge * Matrix::Identity(p, p);
}

}  // namespace test_helpers
