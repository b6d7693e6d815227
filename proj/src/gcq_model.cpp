#include "gcq/gcq_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gcq/error.hpp"

namespace gcq::model {

using nn::Activation;
using nn::LayerKind;
using nn::ProgramStep;

Network build_gcq(const ModelShape& shape, Rng& rng) {
  Network net;
  std::size_t width = shape.feature_width;
  auto add = [&](std::string name, LayerKind kind, std::size_t out, Activation act) {
    net.layers.push_back(nn::make_layer(std::move(name), kind, width, out, act));
    nn::he_init(net.layers.back(), rng);
    net.program.push_back({ProgramStep::Op::Layer, net.layers.size() - 1});
    width = out;
  };
  for (std::size_t i = 0; i < shape.encoder.size(); ++i)
    add("encoder." + std::to_string(i), LayerKind::Dense, shape.encoder[i], Activation::ReLU);
  add("graph_conv", LayerKind::GraphConv, shape.graph_conv, Activation::ReLU);
  net.program.push_back({ProgramStep::Op::Mask, 0});
  for (std::size_t i = 0; i < shape.q_head.size(); ++i)
    add("q_head." + std::to_string(i), LayerKind::Dense, shape.q_head[i], Activation::ReLU);
  add("output", LayerKind::Dense, shape.actions, Activation::Linear);
  net.validate();
  return net;
}

std::size_t parameter_count(const ModelShape& shape) {
  std::size_t total = 0;
  std::size_t width = shape.feature_width;
  auto layer = [&](std::size_t out) {
    total += (width + 1) * out;
    width = out;
  };
  for (auto w : shape.encoder) layer(w);
  layer(shape.graph_conv);
  for (auto w : shape.q_head) layer(w);
  layer(shape.actions);
  return total;
}

nn::GraphBatch make_batch(const obs::ObservationTensor& o) {
  nn::GraphBatch batch;
  batch.X = o.X;
  batch.graph = nn::GraphBlocks::single(obs::normalize_adjacency(o.A));
  batch.row_mask.assign(o.mask.begin(), o.mask.end());
  return batch;
}

nn::GraphBatch make_batch(std::span<const obs::CompactObservation* const> observations) {
  std::size_t rows = 0;
  std::size_t width = 0;
  for (const auto* o : observations) {
    rows += o->n_real();
    width = o->X.cols();
  }
  nn::GraphBatch batch;
  batch.X = Matrix(rows, width);
  batch.row_mask.reserve(rows);
  std::size_t r = 0;
  for (const auto* o : observations) {
    std::copy(o->X.values().begin(), o->X.values().end(), batch.X.data() + r * width);
    r += o->n_real();
    batch.graph.append(obs::normalize_adjacency(o->adjacency_matrix()));
    batch.row_mask.insert(batch.row_mask.end(), o->mask.begin(), o->mask.end());
  }
  return batch;
}

Matrix forward(const Network& net, const obs::ObservationTensor& o) {
  if (!net.layers.empty() && o.X.cols() != net.layers.front().in_dim())
    throw ShapeError("observation feature width " + std::to_string(o.X.cols()) +
                     " does not match the network input " +
                     std::to_string(net.layers.front().in_dim()));
  return nn::forward(net, make_batch(o));
}

int greedy_action(std::span<const double> q) {
  // Scan in preference order so that only a strictly larger value displaces
  // an earlier candidate.
  constexpr int order[] = {1, 0, 2};
  int best = order[0];
  for (int a : order)
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  return best;
}

sim::LaneCommand action_to_command(int action) {
  if (action < 0 || action > 2) throw StateError("invalid action index " + std::to_string(action));
  return static_cast<sim::LaneCommand>(action);
}

int command_to_action(sim::LaneCommand command) { return static_cast<int>(command); }

sim::CommandMap select_actions(const Matrix& q, std::span<const std::uint8_t> mask,
                               std::span<const sim::VehicleId> slot_ids, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("epsilon must lie in [0, 1]");
  if (q.rows() < mask.size() || slot_ids.size() < mask.size())
    throw ShapeError("select_actions: Q has fewer rows than the mask");
  sim::CommandMap commands;
  for (std::size_t slot = 0; slot < mask.size(); ++slot) {
    if (!mask[slot]) continue;
    int action;
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
      action = static_cast<int>(rng.below(kActionCount));
    } else {
      action = greedy_action(q.row(slot));
    }
    commands[slot_ids[slot]] = action_to_command(action);
  }
  return commands;
}

sim::CommandMap select_actions(const Matrix& q, const obs::ObservationTensor& o, double epsilon,
                               Rng& rng) {
  return select_actions(q, std::span(o.mask).first(o.n_real), std::span(o.slot_ids).first(o.n_real),
                        epsilon, rng);
}

std::string describe(const Network& net) {
  std::ostringstream out;
  out << "layer            kind        activation  W shape   b shape  params\n";
  for (const auto& l : net.layers) {
    std::ostringstream w, b;
    w << l.W.rows() << "x" << l.W.cols();
    b << l.b.rows() << "x" << l.b.cols();
    out.width(17);
    out << std::left << l.name;
    out.width(12);
    out << nn::to_string(l.kind);
    out.width(12);
    out << nn::to_string(l.activation);
    out.width(10);
    out << w.str();
    out.width(9);
    out << b.str() << l.parameter_count() << "\n";
  }
  out << "total trainable parameters: " << net.parameter_count() << "\n";
  return out.str();
}

namespace {

// Smallest |pre-activation| over the ReLU units that can reach the loss.
// Past the mask, zeroed rows carry constant activations and no gradient.
double min_relu_margin(const Network& net, const nn::Tape& tape) {
  double margin = INFINITY;
  bool masked = false;
  for (std::size_t k = 0; k < net.program.size(); ++k) {
    const auto& s = net.program[k];
    if (s.op == ProgramStep::Op::Mask) masked = true;
    if (s.op != ProgramStep::Op::Layer) continue;
    const auto& layer = net.layers[s.layer];
    if (layer.activation != Activation::ReLU) continue;
    const auto& e = tape.entries[k];
    Matrix pre = nn::matmul(layer.kind == LayerKind::GraphConv ? e.mixed : e.input, layer.W);
    nn::add_row_broadcast(pre, layer.b);
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      if (masked && tape.row_mask[r] == 0.0) continue;
      for (double v : pre.row(r)) margin = std::min(margin, std::abs(v));
    }
  }
  return margin;
}

}  // namespace

nn::GradcheckResult gradcheck_gcq(std::uint64_t seed, const GradcheckOptions& options) {
  Rng rng(mix_seed(seed));
  ModelShape shape;
  Network net = build_gcq(shape, rng);
  for (auto& l : net.layers) {
    for (double& b : l.b.values()) b = 0.2 * rng.normal();
    if (options.linear_only) l.activation = Activation::Linear;
  }

  const std::size_t n = options.nodes;
  nn::GraphBatch batch;
  {
    Matrix A(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.bernoulli(0.5)) A(i, j) = A(j, i) = 1.0;
    batch.graph = nn::GraphBlocks::single(obs::normalize_adjacency(A));
    batch.row_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) batch.row_mask[i] = rng.bernoulli(0.6) ? 1.0 : 0.0;
    batch.row_mask[0] = 1.0;
  }
  // Redraw node features until every ReLU unit sits at least 1e-3 away from
  // its kink, so the central difference never straddles one.
  for (int attempt = 0;; ++attempt) {
    batch.X = Matrix(n, shape.feature_width);
    for (double& x : batch.X.values()) x = rng.uniform(-1.0, 1.0);
    if (options.linear_only) break;
    nn::Tape tape;
    nn::forward(net, batch, &tape);
    if (min_relu_margin(net, tape) >= 1e-3) break;
    if (attempt > 1000) throw NumericError("gradcheck could not avoid ReLU kinks");
  }

  Matrix target(n, shape.actions);
  Matrix sel(n, shape.actions);
  for (double& t : target.values()) t = rng.normal();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < shape.actions; ++a)
      sel(i, a) = (batch.row_mask[i] != 0.0 && rng.bernoulli(0.7)) ? 1.0 : 0.0;
  sel(0, 0) = 1.0;

  return nn::gradcheck(std::move(net), batch, target, sel, options.h, options.tamper);
}

}  // namespace gcq::model
