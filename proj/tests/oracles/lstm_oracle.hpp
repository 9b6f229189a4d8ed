#pragma once

// Scalar LSTM cell written element by element from the textbook equations.

#include <cmath>
#include <vector>

namespace oracle {

struct LstmOut {
  std::vector<double> h, c;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// w_ih is [4d][d_in], w_hh is [4d][d], gates stacked as input, forget, cell, output.
inline LstmOut lstm_cell(const std::vector<std::vector<double>>& w_ih, const std::vector<std::vector<double>>& w_hh,
                         const std::vector<double>& b, const std::vector<double>& x, const std::vector<double>& h,
                         const std::vector<double>& c) {
  const std::size_t d = h.size();
  std::vector<double> z(4 * d);
  for (std::size_t r = 0; r < 4 * d; ++r) {
    double s = b[r];
    for (std::size_t k = 0; k < x.size(); ++k) s += w_ih[r][k] * x[k];
    for (std::size_t k = 0; k < d; ++k) s += w_hh[r][k] * h[k];
    z[r] = s;
  }
  LstmOut out{std::vector<double>(d), std::vector<double>(d)};
  for (std::size_t j = 0; j < d; ++j) {
    const double i = sigmoid(z[j]);
    const double f = sigmoid(z[d + j]);
    const double g = std::tanh(z[2 * d + j]);
    const double o = sigmoid(z[3 * d + j]);
    out.c[j] = f * c[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

}  // namespace oracle
