#include <doctest.h>

#include <cmath>

#include "dicycle/adam.hpp"
#include "dicycle/checkpoint.hpp"
#include "dicycle/tensor.hpp"
#include "gradcheck.hpp"

using namespace dicycle;
using dicycle::testing::check_gradients;

namespace {

// scalar projection sum(w .* t) used to reduce op outputs for grad checks
TensorPtr project(const TensorPtr& t, Rng& rng) {
  auto w = Tensor::zeros(t->shape);
  for (Index i = 0; i < w->numel(); ++i) w->data[i] = rng.uniform(-1.0, 1.0);
  auto prod = mul(t, w);
  auto flat = reshape(prod, {t->numel(), 1});
  auto ones = Tensor::full({t->numel()}, 1.0);
  return weighted_sum_rows(ones, flat);  // [1]
}

TensorPtr random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  return Tensor::random_uniform(std::move(shape), 1.0, rng, requires_grad);
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  auto id = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  auto b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
  auto c = matmul(id, b);
  for (Index i = 0; i < 4; ++i) CHECK(c->data[i] == b->data[i]);

  auto row = Tensor::from_values({1, 2}, {1, 2});
  auto col = Tensor::from_values({2, 1}, {3, 4});
  CHECK(matmul(row, col)->value() == 11.0);
}

TEST_CASE("matmul rejects mismatched shapes, reporting both") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 2});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto build = [&]() {
    Rng prng(99);
    return project(matmul(a, b), prng);
  };
  backward(build());
  auto rep = check_gradients({a, b}, [&]() { return build()->value(); }, 1e-5);
  CHECK_MESSAGE(rep.ok, rep.detail);
}

TEST_CASE("elementwise definitions") {
  auto x = Tensor::from_values({3}, {-1, 0, 2});
  auto r = relu(x);
  CHECK(r->data[0] == 0.0);
  CHECK(r->data[1] == 0.0);
  CHECK(r->data[2] == 2.0);
  CHECK(sigmoid(Tensor::scalar(0.0))->value() == 0.5);
}

TEST_CASE("cos/sin gradients match finite differences on 100 random points") {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    auto x = Tensor::scalar(rng.uniform(-6.0, 6.0), true);
    const bool use_cos = rep % 2 == 0;
    auto y = use_cos ? cos(x) : sin(x);
    backward(y);
    const double numeric = testing::central_difference(
        *x, 0, [&]() { return (use_cos ? cos(x) : sin(x))->value(); }, 1e-6);
    CHECK(std::abs(x->grad[0] - numeric) <=
          1e-6 * std::max({1.0, std::abs(x->grad[0]), std::abs(numeric)}));
  }
}

TEST_CASE("scalar broadcasting in add and mul") {
  auto x = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
  auto c = Tensor::scalar(2.0, true);
  auto y = mul(x, c);
  CHECK(y->data[3] == 8.0);
  auto z = add(y, Tensor::scalar(1.0));
  CHECK(z->data[0] == 3.0);
  Rng prng(3);
  auto loss = project(z, prng);
  backward(loss);
  CHECK(c->grad.size() == 1);  // scalar side accumulated via sum
  CHECK_THROWS_AS(add(Tensor::zeros({2, 2}), Tensor::zeros({3})), DimensionError);
}

TEST_CASE("conv1d identity kernel is the identity map") {
  Rng rng(7);
  for (Index L : {1, 2, 5, 9}) {
    for (Index d : {1, 3, 4}) {
      auto x = random_tensor({L, d}, rng, false);
      auto k = Tensor::zeros({3, d});
      for (Index c = 0; c < d; ++c) k->data[1 * d + c] = 1.0;  // center tap
      auto y = conv1d_depthwise(x, k);
      for (Index i = 0; i < x->numel(); ++i) CHECK(y->data[i] == x->data[i]);
    }
  }
}

TEST_CASE("conv1d shape contract and even-kernel rejection") {
  auto x = Tensor::zeros({5, 2});
  auto k = Tensor::zeros({3, 2});
  auto y = conv1d_depthwise(x, k);
  CHECK(y->shape == Shape{5, 2});
  CHECK_THROWS_AS(conv1d_depthwise(x, Tensor::zeros({4, 2})), ConfigError);
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(13);
  auto x = random_tensor({7, 4}, rng);
  auto k = random_tensor({3, 4}, rng);
  Rng prng(99);
  auto loss = project(conv1d_depthwise(x, k), prng);
  backward(loss);
  auto rep = check_gradients({x, k},
                             [&]() {
                               Rng prng2(99);
                               return project(conv1d_depthwise(x, k), prng2)->value();
                             },
                             1e-5);
  CHECK_MESSAGE(rep.ok, rep.detail);
}

TEST_CASE("maxpool definition, single row, and argmax gradient") {
  auto x = Tensor::from_values({2, 2}, {1, 5, 3, 2});
  auto y = maxpool_over_length(x);
  CHECK(y->data[0] == 3.0);
  CHECK(y->data[1] == 5.0);

  auto row = Tensor::from_values({1, 3}, {4, -1, 2});
  auto yr = maxpool_over_length(row);
  for (Index i = 0; i < 3; ++i) CHECK(yr->data[i] == row->data[i]);

  // extent zero is unrepresentable; the dimension error fires at construction
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), DimensionError);

  Rng rng(17);
  auto z = random_tensor({6, 3}, rng);
  Rng prng(41);
  auto loss = project(maxpool_over_length(z), prng);
  backward(loss);
  auto rep = check_gradients({z},
                             [&]() {
                               Rng prng2(41);
                               return project(maxpool_over_length(z), prng2)->value();
                             },
                             1e-5);
  CHECK_MESSAGE(rep.ok, rep.detail);
  // gradient is one-hot per column at the argmax
  for (Index c = 0; c < 3; ++c) {
    int nonzero = 0;
    for (Index r = 0; r < 6; ++r) nonzero += z->grad[r * 3 + c] != 0.0 ? 1 : 0;
    CHECK(nonzero == 1);
  }
}

TEST_CASE("softmax_masked symmetry, masking, stability, and oracle") {
  auto uniform = softmax_masked(Tensor::from_values({3}, {0, 0, 0}), {true, true, true});
  for (Index i = 0; i < 3; ++i) CHECK(uniform->data[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto masked = softmax_masked(Tensor::from_values({2}, {10, 0}), {true, false});
  CHECK(masked->data[0] == 1.0);
  CHECK(masked->data[1] == 0.0);

  CHECK_THROWS_AS(softmax_masked(Tensor::from_values({2}, {1, 2}), {false, false}),
                  DegenerateInputError);

  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> logits(8);
    for (auto& v : logits) v = rng.uniform(-4.0, 4.0);
    auto out = softmax_masked(Tensor::from_values({8}, logits), std::vector<bool>(8, true));
    // direct exp/sum oracle
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v);
    double total = 0.0;
    for (Index i = 0; i < 8; ++i) {
      CHECK(std::abs(out->data[i] - std::exp(logits[static_cast<std::size_t>(i)]) / denom) < 1e-12);
      total += out->data[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-9);

    // invariance to a constant shift of the unmasked logits
    std::vector<double> shifted = logits;
    for (auto& v : shifted) v += 123.25;
    auto out2 = softmax_masked(Tensor::from_values({8}, shifted), std::vector<bool>(8, true));
    for (Index i = 0; i < 8; ++i) CHECK(std::abs(out->data[i] - out2->data[i]) < 1e-9);
  }
}

TEST_CASE("softmax_masked gradient matches finite differences") {
  Rng rng(29);
  auto logits = random_tensor({6}, rng);
  std::vector<bool> valid = {true, false, true, true, false, true};
  Rng prng(77);
  auto loss = project(softmax_masked(logits, valid), prng);
  backward(loss);
  auto rep = check_gradients({logits},
                             [&]() {
                               Rng prng2(77);
                               return project(softmax_masked(logits, valid), prng2)->value();
                             },
                             1e-5);
  CHECK_MESSAGE(rep.ok, rep.detail);
}

TEST_CASE("backward: analytic derivative of sum of squares") {
  auto x = Tensor::from_values({3}, {1, 2, 3}, true);
  auto sq = mul(x, x);
  auto loss = weighted_sum_rows(Tensor::full({3}, 1.0), reshape(sq, {3, 1}));
  auto stats = backward(loss);
  CHECK(stats.nodes_visited >= 4);
  CHECK(x->grad[0] == 2.0);
  CHECK(x->grad[1] == 4.0);
  CHECK(x->grad[2] == 6.0);
}

TEST_CASE("backward: constant loss leaves gradients at zero") {
  auto x = Tensor::from_values({2}, {1, 2}, true);
  auto c = Tensor::scalar(5.0);
  backward(c);
  CHECK(x->grad.size() == 0);  // never touched
}

TEST_CASE("backward: non-scalar loss and repeated calls are contract errors") {
  auto x = Tensor::from_values({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(relu(x)), ContractError);

  auto loss = weighted_sum_rows(Tensor::full({2}, 1.0), reshape(mul(x, x), {2, 1}));
  backward(loss);
  CHECK_THROWS_AS(backward(loss), ContractError);
}

TEST_CASE("backward: a tensor consumed twice accumulates both contributions") {
  Rng rng(31);
  auto x = random_tensor({4}, rng);
  auto build = [&]() {
    auto doubled = add(mul(x, x), scale(x, 3.0));  // x feeds two ops
    return weighted_sum_rows(Tensor::full({4}, 1.0), reshape(doubled, {4, 1}));
  };
  backward(build());
  auto rep = check_gradients({x}, [&]() { return build()->value(); }, 1e-5);
  CHECK_MESSAGE(rep.ok, rep.detail);
}

TEST_CASE("compute graph visits each node exactly once on a diamond") {
  auto x = Tensor::from_values({2}, {1, 2}, true);
  auto y = mul(x, x);                 // diamond: x reachable along two edges
  auto z = add(y, x);
  auto g = ComputeGraph::build(z);
  CHECK(g.order.size() == 3);  // x, y, z each once
  CHECK(g.order.back() == z.get());
}

TEST_CASE("per-op gradients on random instances") {
  Rng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    auto a = random_tensor({3, 3}, rng);
    auto b = random_tensor({3, 3}, rng);
    const std::uint64_t pseed = rng.next_u64();
    auto build = [&]() {
      auto t = add(mul(sigmoid(a), cos(b)), scale(sin(matmul(a, b)), 0.5));
      Rng prng(pseed);
      return project(relu(t), prng);
    };
    auto loss = build();
    backward(loss);
    auto rep2 = check_gradients({a, b}, [&]() { return build()->value(); }, 1e-4, 1e-8);
    CHECK_MESSAGE(rep2.ok, rep2.detail);
    zero_grad({a, b});
  }
}

TEST_CASE("adam: fresh state with zero gradient is a fixed point") {
  auto w = Tensor::from_values({3}, {1, 2, 3}, true);
  w->ensure_grad();
  AdamState st = AdamState::init({w});
  adam_step({w}, st, {.lr = 0.1});
  CHECK(w->data[0] == 1.0);
  CHECK(w->data[1] == 2.0);
  CHECK(w->data[2] == 3.0);
}

TEST_CASE("adam: bias-corrected first step moves by about -lr") {
  auto w = Tensor::scalar(0.0, true);
  w->ensure_grad();
  w->grad[0] = 1.0;
  AdamState st = AdamState::init({w});
  adam_step({w}, st, {.lr = 0.01});
  CHECK(std::abs(w->data[0] + 0.01) < 1e-6);
}

TEST_CASE("adam: ten steps on w^2 strictly decrease the objective") {
  auto w = Tensor::scalar(1.0, true);
  AdamState st = AdamState::init({w});
  double prev = 1.0;
  for (int i = 0; i < 10; ++i) {
    w->zero_grad();
    auto loss = mul(w, w);
    backward(loss);
    adam_step({w}, st, {.lr = 0.1});
    const double f = w->data[0] * w->data[0];
    CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("adam: state shape mismatch is a contract error") {
  auto w = Tensor::scalar(1.0, true);
  w->ensure_grad();
  AdamState st = AdamState::init({w});
  st.m[0].resize(3);
  CHECK_THROWS_AS(adam_step({w}, st, {}), ContractError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(207);
  std::vector<NamedTensor> entries;
  entries.push_back({"alpha", Tensor::random_uniform({5, 3}, 10.0, rng)});
  entries.push_back({"beta", Tensor::random_uniform({7}, 1e-300, rng)});
  auto weird = Tensor::zeros({4});
  weird->data[0] = 0.1 + 0.2;  // not exactly 0.3
  weird->data[1] = -0.0;
  weird->data[2] = 1e308;
  weird->data[3] = 5e-324;  // denormal
  entries.push_back({"gamma", weird});

  const std::string path = "checkpoint_test.bin";
  save_checkpoint(path, entries);
  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(loaded[i].name == entries[i].name);
    REQUIRE(loaded[i].tensor->shape == entries[i].tensor->shape);
    for (Index k = 0; k < entries[i].tensor->numel(); ++k) {
      std::uint64_t a, b;
      std::memcpy(&a, &entries[i].tensor->data[k], 8);
      std::memcpy(&b, &loaded[i].tensor->data[k], 8);
      CHECK(a == b);
    }
  }
  std::remove(path.c_str());
}
