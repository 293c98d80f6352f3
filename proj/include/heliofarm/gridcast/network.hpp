#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "heliofarm/gridcast/grid.hpp"
#include "heliofarm/gridcast/standardizer.hpp"

namespace heliofarm::gridcast {

struct ModelConfig {
  int cells = 1;    // C stacked ConvLSTM cells
  int kernel = 3;   // k, odd
  int filters = 4;  // F hidden channels per cell
  int dense = 1;    // D fully connected stages
  int n_x = 10;
  std::vector<int> horizons{1, 11, 31, 61};
  int height = 10;
  int width = 10;

  int n_y() const { return static_cast<int>(horizons.size()); }
  int pixels() const { return height * width; }
  int input_size() const { return n_x * pixels(); }
  int output_size() const { return n_y() * pixels(); }
  int max_horizon() const;
  /// Throws std::invalid_argument on a malformed configuration.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Number of weights implied by the architecture:
/// per cell 4F(in+F)k² + 4F (in = 1 for the first cell, F above), then D dense stages
/// mapping F·H·W to n_y·H·W through hidden stages of width n_y·H·W.
std::size_t parameter_count(const ModelConfig& c);

/// Glorot-uniform weights, zero biases.
std::vector<double> glorot_init(const ModelConfig& c, std::uint64_t seed);

/// Scratch space for one sample; reuse across calls to avoid allocation.
struct Workspace {
  // Per cell, per step: cell input, gates (i, f, o, g), cell state, tanh of state, hidden output.
  std::vector<std::vector<double>> x_in, gates, cstate, tanh_c, hidden;
  std::vector<std::vector<double>> dense_in, dense_out;
  std::vector<double> dz, dh, dc, dh_next, dc_next, dx, dy;
};

/// ConvLSTM encoder (no peepholes, zero-padded convolutions) followed by dense stages
/// with tanh on hidden stages and identity on the output stage.
class Network {
 public:
  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t parameters() const { return count_; }

  /// X: n_x·H·W standardized frames, oldest first. Y: n_y·H·W.
  void forward(std::span<const double> params, std::span<const double> x, std::span<double> y, Workspace& ws) const;

  /// Mean squared error of one sample; accumulates dL/dparams into `grad` (added, not overwritten).
  /// `abs_err` receives the mean absolute error.
  double loss_and_grad(std::span<const double> params, std::span<const double> x, std::span<const double> y_true,
                       std::span<double> grad, Workspace& ws, double* abs_err = nullptr) const;

 private:
  struct CellLayout {
    int in_ch;
    std::size_t wx, wh, b;  // offsets into the parameter vector
  };
  struct DenseLayout {
    int in, out;
    std::size_t w, b;
  };

  void conv_add(std::span<const double> w, int out_ch, int in_ch, const double* src, double* dst) const;
  void check_sizes(std::span<const double> params, std::span<const double> x, std::size_t y_size) const;

  ModelConfig config_;
  std::vector<CellLayout> cells_;
  std::vector<DenseLayout> dense_;
  std::size_t count_ = 0;
};

double sigmoid(double z);

}  // namespace heliofarm::gridcast
