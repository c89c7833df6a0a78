#pragma once

#include <cstdint>

#include "chitree/dataset.hpp"

namespace chitree {

// Two balanced classes on the alternating cells of a 4x4 board over [-1,1]^2
// plus eight uniform(0,1) noise variables; Bayes error 0.
Dataset gen_chessboard(std::size_t n, std::uint64_t seed);

// Three classes of equal size: the unit circle, the diagonal X1 = X2 and the
// anti-diagonal X1 = -X2, plus three uniform noise variables and three
// 21-level equiprobable categorical noise variables.  n must divide by 3.
Dataset gen_circle_lines(std::size_t n, std::uint64_t seed);

enum class BiasKind { Independence, Dependence };

// Balanced binary class independent of six predictors: three categorical
// (2, 3 and 6 levels) and three numeric.  The dependence variant correlates
// (X4, X5) at 0.7 and couples (X2, X3) through a fixed joint table.
Dataset gen_bias_scenario(BiasKind kind, std::size_t n, std::uint64_t seed);

} // namespace chitree
