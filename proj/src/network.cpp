#include "gcq/network.hpp"

#include <algorithm>
#include <cmath>

#include "gcq/error.hpp"

namespace gcq::nn {

const char* to_string(Activation a) { return a == Activation::ReLU ? "relu" : "linear"; }
const char* to_string(LayerKind k) { return k == LayerKind::Dense ? "dense" : "graph_conv"; }

Layer make_layer(std::string name, LayerKind kind, std::size_t in, std::size_t out,
                 Activation act) {
  if (kind == LayerKind::GraphConv && act != Activation::ReLU)
    throw ShapeError("graph convolution layers use ReLU");
  return Layer{std::move(name), kind, act, Matrix(in, out), Matrix(1, out)};
}

void he_init(Layer& layer, Rng& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(layer.in_dim()));
  for (double& w : layer.W.values()) w = scale * rng.normal();
  layer.b.fill(0.0);
}

void GraphBlocks::append(Matrix normalized_adjacency) {
  if (normalized_adjacency.rows() != normalized_adjacency.cols())
    throw ShapeError("graph block must be square");
  offsets.push_back(offsets.back() + normalized_adjacency.rows());
  blocks.push_back(std::move(normalized_adjacency));
}

GraphBlocks GraphBlocks::single(Matrix normalized_adjacency) {
  GraphBlocks g;
  g.append(std::move(normalized_adjacency));
  return g;
}

Matrix aggregate(const GraphBlocks& graph, const Matrix& H) {
  if (graph.rows() != H.rows())
    throw ShapeError("graph covers " + std::to_string(graph.rows()) + " rows, input has " +
                     std::to_string(H.rows()));
  Matrix out(H.rows(), H.cols());
  const std::size_t d = H.cols();
  for (std::size_t k = 0; k < graph.blocks.size(); ++k) {
    const Matrix& A = graph.blocks[k];
    const std::size_t base = graph.offsets[k];
    const std::size_t n = A.rows();
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = out.data() + (base + i) * d;
      for (std::size_t j = 0; j < n; ++j) {
        const double a = A(i, j);
        if (a == 0.0) continue;
        const double* src = H.data() + (base + j) * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += a * src[c];
      }
    }
  }
  return out;
}

namespace {

void apply_activation(Matrix& m, Activation act) {
  if (act != Activation::ReLU) return;
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

void require_input(const Matrix& X, const Layer& layer) {
  if (X.cols() != layer.in_dim())
    throw ShapeError("layer '" + layer.name + "' expects " + std::to_string(layer.in_dim()) +
                     " input columns, got " + std::to_string(X.cols()));
}

Matrix affine(const Matrix& X, const Layer& layer) {
  require_input(X, layer);
  Matrix Y = matmul(X, layer.W);
  add_row_broadcast(Y, layer.b);
  apply_activation(Y, layer.activation);
  Y.require_finite("layer '" + layer.name + "' output");
  return Y;
}

}  // namespace

Matrix dense_forward(const Matrix& X, const Layer& layer) { return affine(X, layer); }

Matrix gcn_forward(const Matrix& H, const Matrix& Anorm, const Layer& layer) {
  if (Anorm.rows() != H.rows() || Anorm.cols() != H.rows())
    throw ShapeError("normalized adjacency does not match the node count");
  return affine(matmul(Anorm, H), layer);
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

void Network::validate() const {
  for (const auto& l : layers) {
    if (l.b.rows() != 1 || l.b.cols() != l.W.cols())
      throw ShapeError("layer '" + l.name + "' has inconsistent bias shape");
  }
  std::size_t width = 0;
  bool first = true;
  for (const auto& s : program) {
    if (s.op == ProgramStep::Op::Mask) continue;
    if (s.layer >= layers.size()) throw ShapeError("program references a missing layer");
    const Layer& l = layers[s.layer];
    if (!first && l.in_dim() != width)
      throw ShapeError("layer '" + l.name + "' input width does not match its predecessor");
    width = l.out_dim();
    first = false;
  }
}

Matrix forward(const Network& net, const GraphBatch& batch, Tape* tape) {
  if (batch.graph.rows() != batch.X.rows())
    throw ShapeError("graph batch rows do not match feature rows");
  if (batch.row_mask.size() != batch.X.rows())
    throw ShapeError("row mask length does not match feature rows");
  if (tape) {
    tape->clear();
    tape->graph = batch.graph;
    tape->row_mask = batch.row_mask;
    tape->entries.reserve(net.program.size());
  }
  Matrix cur = batch.X;
  for (const auto& s : net.program) {
    Tape::Entry entry;
    if (s.op == ProgramStep::Op::Mask) {
      Matrix out = cur;
      for (std::size_t r = 0; r < out.rows(); ++r)
        if (batch.row_mask[r] == 0.0) std::fill(out.row(r).begin(), out.row(r).end(), 0.0);
      cur = std::move(out);
      if (tape) tape->entries.push_back(std::move(entry));
      continue;
    }
    const Layer& layer = net.layers.at(s.layer);
    Matrix out;
    if (layer.kind == LayerKind::GraphConv) {
      Matrix mixed = aggregate(batch.graph, cur);
      out = affine(mixed, layer);
      if (tape) entry.mixed = std::move(mixed);
    } else {
      out = affine(cur, layer);
    }
    if (tape) {
      entry.input = std::move(cur);
      entry.output = out;
      tape->entries.push_back(std::move(entry));
    }
    cur = std::move(out);
  }
  if (tape) tape->recorded = true;
  return cur;
}

Gradients backward(const Network& net, const Tape& tape, const Matrix& upstream) {
  if (!tape.recorded || tape.entries.size() != net.program.size())
    throw StateError("backward called without a recorded forward pass");
  Gradients grads;
  grads.layers.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    grads.layers[i].dW = Matrix(net.layers[i].W.rows(), net.layers[i].W.cols());
    grads.layers[i].db = Matrix(1, net.layers[i].b.cols());
  }

  Matrix delta = upstream;
  for (std::size_t k = net.program.size(); k-- > 0;) {
    const auto& s = net.program[k];
    const auto& e = tape.entries[k];
    if (s.op == ProgramStep::Op::Mask) {
      for (std::size_t r = 0; r < delta.rows(); ++r)
        if (tape.row_mask[r] == 0.0) std::fill(delta.row(r).begin(), delta.row(r).end(), 0.0);
      continue;
    }
    const Layer& layer = net.layers[s.layer];
    require_same_shape(delta, e.output, "backward through '" + layer.name + "'");
    if (layer.activation == Activation::ReLU) {
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (!(e.output.values()[i] > 0.0)) delta.values()[i] = 0.0;
    }
    const Matrix& x = layer.kind == LayerKind::GraphConv ? e.mixed : e.input;
    auto& g = grads.layers[s.layer];
    // A layer used twice in the program accumulates.
    Matrix dW = matmul_tn(x, delta);
    Matrix db = column_sums(delta);
    for (std::size_t i = 0; i < dW.size(); ++i) g.dW.values()[i] += dW.values()[i];
    for (std::size_t i = 0; i < db.size(); ++i) g.db.values()[i] += db.values()[i];
    Matrix dx = matmul_nt(delta, layer.W);
    delta = layer.kind == LayerKind::GraphConv ? aggregate(tape.graph, dx) : std::move(dx);
  }
  grads.input = std::move(delta);
  return grads;
}

LossAndGrad masked_mse(const Matrix& pred, const Matrix& target, const Matrix& sel) {
  require_same_shape(pred, target, "masked_mse target");
  require_same_shape(pred, sel, "masked_mse selection");
  double count = 0.0;
  for (double s : sel.values()) count += s;
  const double norm = std::max(1.0, count);
  LossAndGrad out{0.0, Matrix(pred.rows(), pred.cols())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double s = sel.values()[i];
    if (s == 0.0) continue;
    const double diff = pred.values()[i] - target.values()[i];
    out.loss += s * diff * diff;
    out.grad.values()[i] = 2.0 * s * diff / norm;
  }
  out.loss /= norm;
  return out;
}

GradcheckResult gradcheck(Network net, const GraphBatch& batch, const Matrix& target,
                          const Matrix& sel, double h,
                          const std::function<void(Gradients&)>& tamper) {
  Tape tape;
  const Matrix q = forward(net, batch, &tape);
  Gradients analytic = backward(net, tape, masked_mse(q, target, sel).grad);
  if (tamper) tamper(analytic);

  auto loss_at = [&]() { return masked_mse(forward(net, batch), target, sel).loss; };

  GradcheckResult result;
  auto check = [&](double& param, double grad, const std::string& label) {
    const double saved = param;
    param = saved + h;
    const double up = loss_at();
    param = saved - h;
    const double down = loss_at();
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(grad), std::abs(numeric), 1e-8});
    const double rel = std::abs(grad - numeric) / denom;
    ++result.parameters_checked;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = label;
    }
  };

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Layer& layer = net.layers[li];
    for (std::size_t i = 0; i < layer.W.size(); ++i)
      check(layer.W.values()[i], analytic.layers[li].dW.values()[i],
            layer.name + ".W[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < layer.b.size(); ++i)
      check(layer.b.values()[i], analytic.layers[li].db.values()[i],
            layer.name + ".b[" + std::to_string(i) + "]");
  }
  return result;
}

}  // namespace gcq::nn
