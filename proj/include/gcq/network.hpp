#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gcq/matrix.hpp"
#include "gcq/rng.hpp"

namespace gcq::nn {

enum class Activation { ReLU, Linear };
enum class LayerKind { Dense, GraphConv };

const char* to_string(Activation a);
const char* to_string(LayerKind k);

// One trainable layer. Dense maps rows independently; GraphConv first mixes
// rows with the normalized adjacency and then applies the same affine map.
struct Layer {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  Activation activation = Activation::ReLU;
  Matrix W;  // in x out
  Matrix b;  // 1 x out

  std::size_t in_dim() const { return W.rows(); }
  std::size_t out_dim() const { return W.cols(); }
  std::size_t parameter_count() const { return W.size() + b.size(); }

  bool operator==(const Layer&) const = default;
};

Layer make_layer(std::string name, LayerKind kind, std::size_t in, std::size_t out,
                 Activation act);
// He-normal weights scaled by sqrt(2 / in), zero biases.
void he_init(Layer& layer, Rng& rng);

// Block-diagonal graph: rows [offsets[k], offsets[k+1]) belong to graph k,
// whose normalized adjacency is blocks[k].
struct GraphBlocks {
  std::vector<std::size_t> offsets{0};
  std::vector<Matrix> blocks;

  std::size_t rows() const { return offsets.back(); }
  void append(Matrix normalized_adjacency);
  static GraphBlocks single(Matrix normalized_adjacency);
};

// Anorm * H, one block at a time. The blocks are symmetric, so this is also
// the transpose product used by the backward pass.
Matrix aggregate(const GraphBlocks& graph, const Matrix& H);

struct GraphBatch {
  Matrix X;
  GraphBlocks graph;
  std::vector<double> row_mask;  // 1 keeps a row at the mask step, 0 zeroes it
};

// act(X W + b)
Matrix dense_forward(const Matrix& X, const Layer& layer);
// relu(Anorm H W + b)
Matrix gcn_forward(const Matrix& H, const Matrix& Anorm, const Layer& layer);

// A network is a list of layers plus the order in which they are applied;
// a program step either runs a layer or zeroes rows by the batch mask.
struct ProgramStep {
  enum class Op { Layer, Mask } op = Op::Layer;
  std::size_t layer = 0;
  bool operator==(const ProgramStep&) const = default;
};

struct Network {
  std::vector<Layer> layers;
  std::vector<ProgramStep> program;

  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const Network&) const = default;
};

// Intermediates of one forward pass, one entry per program step.
struct Tape {
  struct Entry {
    Matrix input;
    Matrix mixed;  // Anorm * input, GraphConv only
    Matrix output;
  };
  bool recorded = false;
  std::vector<Entry> entries;
  GraphBlocks graph;
  std::vector<double> row_mask;

  void clear() { *this = Tape{}; }
};

Matrix forward(const Network& net, const GraphBatch& batch, Tape* tape = nullptr);

struct LayerGrad {
  Matrix dW;
  Matrix db;
};

struct Gradients {
  std::vector<LayerGrad> layers;
  Matrix input;  // d loss / d X
};

// Reverse pass over a recorded tape. Throws StateError if nothing was recorded.
Gradients backward(const Network& net, const Tape& tape, const Matrix& upstream);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

// sum(sel * (pred - target)^2) / max(1, sum(sel)).
LossAndGrad masked_mse(const Matrix& pred, const Matrix& target, const Matrix& sel);

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t parameters_checked = 0;
};

// Compares backward() against central finite differences for every
// parameter, with loss masked_mse(forward(net, batch), target, sel).
// `tamper` may modify the analytic gradients before comparison.
GradcheckResult gradcheck(Network net, const GraphBatch& batch, const Matrix& target,
                          const Matrix& sel, double h = 1e-5,
                          const std::function<void(Gradients&)>& tamper = {});

}  // namespace gcq::nn
