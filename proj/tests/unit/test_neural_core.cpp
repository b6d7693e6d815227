#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "gcq/checkpoint.hpp"
#include "gcq/error.hpp"
#include "gcq/gcq_model.hpp"
#include "gcq/network.hpp"
#include "gcq/optim.hpp"
#include "gcq/rng.hpp"

using namespace gcq;
using namespace gcq::nn;

namespace {

Layer layer_with(LayerKind kind, Activation act, Matrix W, Matrix b) {
  Layer l = make_layer("l", kind, W.rows(), W.cols(), act);
  l.W = std::move(W);
  l.b = std::move(b);
  return l;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Network small_stack(Rng& rng, Activation act) {
  Network net;
  net.layers.push_back(make_layer("enc", LayerKind::Dense, 3, 4, act));
  net.layers.push_back(make_layer("gc", LayerKind::GraphConv, 4, 4, Activation::ReLU));
  net.layers.push_back(make_layer("out", LayerKind::Dense, 4, 2, Activation::Linear));
  for (auto& l : net.layers) {
    he_init(l, rng);
    for (double& b : l.b.values()) b = 0.3 * rng.normal();
  }
  net.program = {{ProgramStep::Op::Layer, 0}, {ProgramStep::Op::Layer, 1},
                 {ProgramStep::Op::Mask, 0}, {ProgramStep::Op::Layer, 2}};
  return net;
}

GraphBatch path_batch(Rng& rng, std::size_t n) {
  Matrix Anorm(n, n);
  // normalized path graph, written out directly
  std::vector<double> deg(n, 1.0);
  for (std::size_t i = 0; i + 1 < n; ++i) deg[i] += 1, deg[i + 1] += 1;
  for (std::size_t i = 0; i < n; ++i) {
    Anorm(i, i) = 1.0 / deg[i];
    if (i + 1 < n) Anorm(i, i + 1) = Anorm(i + 1, i) = 1.0 / std::sqrt(deg[i] * deg[i + 1]);
  }
  GraphBatch b;
  b.X = random_matrix(rng, n, 3);
  b.graph = GraphBlocks::single(Anorm);
  b.row_mask.assign(n, 1.0);
  b.row_mask[1] = 0.0;
  return b;
}

double sum_loss(const Network& net, const GraphBatch& batch) {
  const Matrix out = forward(net, batch);
  double s = 0.0;
  for (double v : out.values()) s += v;
  return s;
}

}  // namespace

TEST_SUITE("matrix") {
  TEST_CASE("products and shape checks") {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{5, 6}, {7, 8}};
    CHECK(matmul(a, b) == Matrix{{19, 22}, {43, 50}});
    CHECK(matmul_tn(a, b) == matmul(a.transpose(), b));
    CHECK(matmul_nt(a, b) == matmul(a, b.transpose()));
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
    CHECK_THROWS_AS(Matrix({{1, 2}, {3}}), ShapeError);
  }

  TEST_CASE("non-finite entries are a hard error") {
    Matrix m(2, 2);
    m(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(m.require_finite("m"), NumericError);
    m(1, 0) = INFINITY;
    CHECK_THROWS_AS(m.require_finite("m"), NumericError);
  }
}

TEST_SUITE("layers") {
  TEST_CASE("identity dense layer") {
    const Matrix X{{1, -2, 3}};
    CHECK(dense_forward(X, layer_with(LayerKind::Dense, Activation::Linear, Matrix::identity(3), Matrix(1, 3))) == X);
  }

  TEST_CASE("ReLU clamps negatives") {
    const auto l = layer_with(LayerKind::Dense, Activation::ReLU, Matrix::identity(2), Matrix(1, 2));
    CHECK(dense_forward(Matrix{{1, -2}}, l) == Matrix{{1, 0}});
  }

  TEST_CASE("hand arithmetic") {
    const auto l = layer_with(LayerKind::Dense, Activation::Linear, Matrix{{1}, {1}}, Matrix{{0.5}});
    CHECK(dense_forward(Matrix{{1, 2}}, l) == Matrix{{3.5}});
  }

  TEST_CASE("shape mismatch is refused") {
    const auto l = layer_with(LayerKind::Dense, Activation::Linear, Matrix{{1}, {1}}, Matrix{{0.5}});
    CHECK_THROWS_AS(dense_forward(Matrix{{1, 2, 3}}, l), ShapeError);
  }

  TEST_CASE("graph convolution on isolated nodes with identity weights") {
    const auto l = layer_with(LayerKind::GraphConv, Activation::ReLU, Matrix::identity(2), Matrix(1, 2));
    const Matrix H{{1, 2}, {0.5, 0}, {3, 1}};
    CHECK(gcn_forward(H, Matrix::identity(3), l) == H);
  }

  TEST_CASE("graph convolution mixes neighbours") {
    const auto l = layer_with(LayerKind::GraphConv, Activation::ReLU, Matrix::identity(2), Matrix(1, 2));
    CHECK(gcn_forward(Matrix{{1, 0}, {0, 1}}, Matrix{{.5, .5}, {.5, .5}}, l) == Matrix{{.5, .5}, {.5, .5}});
  }

  TEST_CASE("a large negative bias silences the layer") {
    const auto l = layer_with(LayerKind::GraphConv, Activation::ReLU, Matrix::identity(2), Matrix{{-10, -10}});
    CHECK(max_abs(gcn_forward(Matrix{{1, 0.3}, {0.2, 1}}, Matrix::identity(2), l)) == 0.0);
  }

  TEST_CASE("graph convolution only accepts ReLU") {
    CHECK_THROWS_AS(make_layer("g", LayerKind::GraphConv, 2, 2, Activation::Linear), ShapeError);
  }

  TEST_CASE("property: dense layers are row-wise") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const auto l = layer_with(LayerKind::Dense, Activation::ReLU, random_matrix(rng, 4, 3), random_matrix(rng, 1, 3));
      const Matrix X = random_matrix(rng, 6, 4);
      const Matrix Y = dense_forward(X, l);
      Matrix Xp(6, 4);
      const std::size_t perm[] = {3, 0, 5, 1, 4, 2};
      for (std::size_t i = 0; i < 6; ++i)
        std::copy(X.row(perm[i]).begin(), X.row(perm[i]).end(), Xp.row(i).begin());
      const Matrix Yp = dense_forward(Xp, l);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 3; ++c) CHECK(Yp(i, c) == Y(perm[i], c));
    }
  }

  TEST_CASE("block-diagonal aggregation equals per-graph products") {
    Rng rng(6);
    GraphBlocks g;
    g.append(Matrix{{0.5, 0.5}, {0.5, 0.5}});
    g.append(Matrix{{1.0}});
    g.append(Matrix{{0.5, 0.5}, {0.5, 0.5}});
    const Matrix H = random_matrix(rng, 5, 3);
    Matrix dense(5, 5);
    dense(0, 0) = dense(0, 1) = dense(1, 0) = dense(1, 1) = 0.5;
    dense(2, 2) = 1.0;
    dense(3, 3) = dense(3, 4) = dense(4, 3) = dense(4, 4) = 0.5;
    CHECK(max_abs_diff(aggregate(g, H), matmul(dense, H)) < 1e-15);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("needs a recorded forward pass") {
    Rng rng(1);
    const Network net = small_stack(rng, Activation::ReLU);
    CHECK_THROWS_AS(backward(net, Tape{}, Matrix(4, 2)), StateError);
  }

  TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(2);
    const Network net = small_stack(rng, Activation::ReLU);
    const auto batch = path_batch(rng, 4);
    Tape tape;
    const Matrix out = forward(net, batch, &tape);
    const auto g = backward(net, tape, Matrix(out.rows(), out.cols()));
    for (const auto& lg : g.layers) {
      CHECK(max_abs(lg.dW) == 0.0);
      CHECK(max_abs(lg.db) == 0.0);
    }
    CHECK(max_abs(g.input) == 0.0);
  }

  TEST_CASE("linear layer under a sum loss") {
    Network net;
    net.layers.push_back(make_layer("d", LayerKind::Dense, 2, 3, Activation::Linear));
    Rng rng(3);
    he_init(net.layers[0], rng);
    net.program = {{ProgramStep::Op::Layer, 0}};
    GraphBatch batch;
    batch.X = Matrix{{1, 2}, {3, -1}, {0.5, 4}};
    batch.graph = GraphBlocks::single(Matrix::identity(3));
    batch.row_mask.assign(3, 1.0);
    Tape tape;
    forward(net, batch, &tape);
    const auto g = backward(net, tape, Matrix(3, 3, 1.0));
    CHECK(g.layers[0].dW == Matrix{{4.5, 4.5, 4.5}, {5, 5, 5}});
    CHECK(g.layers[0].db == Matrix{{3, 3, 3}});
  }

  TEST_CASE("matches an independent finite-difference sweep") {
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
      Network net = small_stack(rng, Activation::Linear);
      const auto batch = path_batch(rng, 5);
      Tape tape;
      const Matrix out = forward(net, batch, &tape);
      const auto g = backward(net, tape, Matrix(out.rows(), out.cols(), 1.0));
      const double h = 1e-6;
      for (std::size_t li = 0; li < net.layers.size(); ++li) {
        for (std::size_t k = 0; k < net.layers[li].W.size(); ++k) {
          double& w = net.layers[li].W.values()[k];
          const double saved = w;
          w = saved + h;
          const double up = sum_loss(net, batch);
          w = saved - h;
          const double down = sum_loss(net, batch);
          w = saved;
          const double fd = (up - down) / (2 * h);
          CHECK(std::abs(fd - g.layers[li].dW.values()[k]) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }

  TEST_CASE("masked rows receive no gradient through the head") {
    Rng rng(12);
    const Network net = small_stack(rng, Activation::ReLU);
    auto batch = path_batch(rng, 4);
    batch.row_mask = {0, 0, 0, 0};
    Tape tape;
    const Matrix out = forward(net, batch, &tape);
    const auto g = backward(net, tape, Matrix(out.rows(), out.cols(), 1.0));
    CHECK(max_abs(g.layers[0].dW) == 0.0);
    CHECK(max_abs(g.layers[1].dW) == 0.0);
    CHECK(max_abs(g.input) == 0.0);
  }
}

TEST_SUITE("masked mse") {
  TEST_CASE("perfect prediction") {
    const auto r = masked_mse(Matrix{{1, 2}}, Matrix{{1, 2}}, Matrix{{1, 1}});
    CHECK(r.loss == 0.0);
    CHECK(max_abs(r.grad) == 0.0);
  }

  TEST_CASE("fully masked") {
    const auto r = masked_mse(Matrix{{1, 2}}, Matrix{{5, -2}}, Matrix{{0, 0}});
    CHECK(r.loss == 0.0);
    CHECK(max_abs(r.grad) == 0.0);
  }

  TEST_CASE("single entry") {
    const auto r = masked_mse(Matrix{{2}}, Matrix{{0}}, Matrix{{1}});
    CHECK(r.loss == 4.0);
    CHECK(r.grad == Matrix{{4}});
  }

  TEST_CASE("normalizes by the selected count and zeroes unselected gradients") {
    const auto r = masked_mse(Matrix{{1, 3}, {2, 0}}, Matrix{{0, 0}, {0, 0}}, Matrix{{1, 0}, {1, 0}});
    CHECK(r.loss == doctest::Approx((1.0 + 4.0) / 2.0));
    CHECK(r.grad == Matrix{{1, 0}, {2, 0}});
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("zero gradients leave parameters unchanged") {
    Rng rng(1);
    Network net = small_stack(rng, Activation::ReLU);
    const Network before = net;
    auto state = AdamState::for_network(net);
    Gradients g;
    for (const auto& l : net.layers) g.layers.push_back({Matrix(l.W.rows(), l.W.cols()), Matrix(1, l.b.cols())});
    adam_step(net, g, state, 1e-3);
    CHECK(net == before);
    CHECK(state.step == 1);
  }

  TEST_CASE("first step moves each parameter by about lr against the gradient sign") {
    Rng rng(2);
    Network net = small_stack(rng, Activation::ReLU);
    const Network before = net;
    auto state = AdamState::for_network(net);
    Gradients g;
    for (const auto& l : net.layers)
      g.layers.push_back({random_matrix(rng, l.W.rows(), l.W.cols()), random_matrix(rng, 1, l.b.cols())});
    const double lr = 1e-3;
    adam_step(net, g, state, lr);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      for (std::size_t k = 0; k < net.layers[li].W.size(); ++k) {
        const double delta = net.layers[li].W.values()[k] - before.layers[li].W.values()[k];
        const double grad = g.layers[li].dW.values()[k];
        CHECK(std::abs(delta) <= lr * (1 + 1e-6));
        CHECK(delta * grad < 0.0);
        CHECK(std::abs(delta) == doctest::Approx(lr).epsilon(1e-4));
      }
    }
  }

  TEST_CASE("non-finite gradients are refused without touching parameters") {
    Rng rng(3);
    Network net = small_stack(rng, Activation::ReLU);
    const Network before = net;
    auto state = AdamState::for_network(net);
    Gradients g;
    for (const auto& l : net.layers) g.layers.push_back({Matrix(l.W.rows(), l.W.cols()), Matrix(1, l.b.cols())});
    g.layers[1].dW(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
      adam_step(net, g, state, 1e-3);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("gc") != std::string::npos);
    }
    CHECK(net == before);
  }

  TEST_CASE("two identical runs are bit-identical") {
    auto run = [] {
      Rng rng(4);
      Network net = small_stack(rng, Activation::ReLU);
      auto state = AdamState::for_network(net);
      for (int i = 0; i < 5; ++i) {
        Gradients g;
        for (const auto& l : net.layers)
          g.layers.push_back({random_matrix(rng, l.W.rows(), l.W.cols()), random_matrix(rng, 1, l.b.cols())});
        adam_step(net, g, state, 1e-3);
      }
      return net;
    };
    CHECK(run() == run());
  }

  TEST_CASE("soft update endpoints and arithmetic") {
    Rng rng(5);
    const Network online = small_stack(rng, Activation::ReLU);
    Network target = small_stack(rng, Activation::ReLU);
    const Network original = target;

    Network t1 = target;
    soft_update(t1, online, 1.0);
    CHECK(t1 == online);

    Network t0 = target;
    soft_update(t0, online, 0.0);
    CHECK(t0 == original);

    Network zeros = online, ones = online;
    for (auto& l : zeros.layers) l.W.fill(0.0), l.b.fill(0.0);
    for (auto& l : ones.layers) l.W.fill(1.0), l.b.fill(1.0);
    soft_update(zeros, ones, 0.01);
    for (const auto& l : zeros.layers)
      for (double v : l.W.values()) CHECK(v == doctest::Approx(0.01).epsilon(1e-12));
  }
}

TEST_SUITE("gradcheck") {
  TEST_CASE("the GCQ stack passes") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto r = model::gradcheck_gcq(seed);
      CHECK(r.max_relative_error < 1e-4);
      CHECK(r.parameters_checked == model::parameter_count({}));
    }
  }

  TEST_CASE("a corrupted weight gradient is caught") {
    model::GradcheckOptions opt;
    opt.tamper = [](Gradients& g) {
      for (double& v : g.layers[2].dW.values()) v = v * 1.5 + 0.1;
    };
    CHECK(model::gradcheck_gcq(1, opt).max_relative_error > 1e-2);
  }

  TEST_CASE("linear-only stack is exact to roundoff") {
    model::GradcheckOptions opt;
    opt.linear_only = true;
    // The loss is exactly quadratic in each parameter, so a wide step has no
    // truncation error and keeps cancellation small.
    opt.h = 1e-2;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
      CHECK(model::gradcheck_gcq(seed, opt).max_relative_error < 1e-7);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("bit-exact round trip through a file") {
    Rng rng(8);
    Checkpoint c;
    c.network = model::build_gcq({}, rng);
    c.network.layers[3].W(0, 0) = 1.0 / 3.0;
    c.network.layers[0].b(0, 1) = -0.0;
    c.config_digest = "abc";
    c.structural_digest = "def";
    c.config_text = "seed = 3\n";
    c.step = 12345;
    const auto path = (std::filesystem::temp_directory_path() / "gcq_roundtrip.ckpt").string();
    save_checkpoint(path, c);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back == c);
    CHECK(serialize(back) == serialize(c));
    CHECK(std::signbit(back.network.layers[0].b(0, 1)));
    std::filesystem::remove(path);
  }

  TEST_CASE("corrupt containers are rejected") {
    Rng rng(9);
    Checkpoint c;
    c.network = model::build_gcq({}, rng);
    std::string bytes = serialize(c);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize(bad), FormatError);
    CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)), FormatError);
    CHECK_THROWS_AS(deserialize(bytes + "x"), FormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.ckpt"), Error);
  }
}
