#include "gcq/optim.hpp"

#include <algorithm>
#include <cmath>

#include "gcq/error.hpp"

namespace gcq::nn {

AdamState AdamState::for_network(const Network& net) {
  AdamState s;
  for (const auto& l : net.layers) {
    s.first.push_back({Matrix(l.W.rows(), l.W.cols()), Matrix(1, l.b.cols())});
    s.second.push_back({Matrix(l.W.rows(), l.W.cols()), Matrix(1, l.b.cols())});
  }
  return s;
}

namespace {

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, const AdamState& s,
                 double lr, double correction1, double correction2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.values()[i];
    double& mi = m.values()[i];
    double& vi = v.values()[i];
    mi = s.beta1 * mi + (1.0 - s.beta1) * g;
    vi = s.beta2 * vi + (1.0 - s.beta2) * g * g;
    const double m_hat = mi / correction1;
    const double v_hat = vi / correction2;
    param.values()[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr) {
  if (grads.layers.size() != net.layers.size() || state.first.size() != net.layers.size())
    throw ShapeError("adam_step: gradient/state layout does not match the network");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    require_same_shape(grads.layers[i].dW, net.layers[i].W, "adam_step " + net.layers[i].name);
    require_same_shape(grads.layers[i].db, net.layers[i].b, "adam_step " + net.layers[i].name);
    grads.layers[i].dW.require_finite("gradient of layer '" + net.layers[i].name + "' W");
    grads.layers[i].db.require_finite("gradient of layer '" + net.layers[i].name + "' b");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    adam_update(net.layers[i].W, grads.layers[i].dW, state.first[i].dW, state.second[i].dW, state,
                lr, c1, c2);
    adam_update(net.layers[i].b, grads.layers[i].db, state.first[i].db, state.second[i].db, state,
                lr, c1, c2);
  }
}

void soft_update(Network& target, const Network& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw ShapeError("soft_update: networks differ in layer count");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto blend = [tau](Matrix& t, const Matrix& o) {
      require_same_shape(t, o, "soft_update");
      for (std::size_t k = 0; k < t.size(); ++k)
        t.values()[k] = (1.0 - tau) * t.values()[k] + tau * o.values()[k];
    };
    blend(target.layers[i].W, online.layers[i].W);
    blend(target.layers[i].b, online.layers[i].b);
  }
}

double parameter_distance(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size())
    throw ShapeError("parameter_distance: networks differ in layer count");
  double d = 0.0;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    d = std::max(d, max_abs_diff(a.layers[i].W, b.layers[i].W));
    d = std::max(d, max_abs_diff(a.layers[i].b, b.layers[i].b));
  }
  return d;
}

}  // namespace gcq::nn
