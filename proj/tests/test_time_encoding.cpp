#include <doctest.h>

#include <cmath>

#include "dicycle/time_encoding.hpp"
#include "gradcheck.hpp"

using namespace dicycle;
using dicycle::testing::check_gradients;

namespace {

AbsoluteTimeEncoder small_encoder(std::uint64_t seed = 1, int J = 2) {
  TimeEncodingConfig cfg;
  cfg.surrounding_range = J;
  Rng rng(seed);
  return AbsoluteTimeEncoder(cfg, 4, rng);
}

double inner(const TensorPtr& a, const TensorPtr& b) {
  double s = 0.0;
  for (Index i = 0; i < a->numel(); ++i) s += a->data[i] * b->data[i];
  return s;
}

}  // namespace

TEST_CASE("slot extraction: ranges and periodicity") {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const auto t = static_cast<std::int64_t>(rng.uniform_index(2'000'000'000));
    const Index h = slot_of(GranularityKind::HourOfDay, t);
    const Index w = slot_of(GranularityKind::DayOfWeek, t);
    const Index m = slot_of(GranularityKind::DayOfMonth, t);
    CHECK(h >= 0);
    CHECK(h < 24);
    CHECK(w >= 0);
    CHECK(w < 7);
    CHECK(m >= 0);
    CHECK(m < 31);
    CHECK(slot_of(GranularityKind::HourOfDay, t + 24 * 3600) == h);
    CHECK(slot_of(GranularityKind::DayOfWeek, t + 7 * 86400) == w);
  }
  // 1600041600 is Monday 2020-09-14 00:00 UTC
  CHECK(slot_of(GranularityKind::HourOfDay, 1600041600) == 0);
  CHECK(slot_of(GranularityKind::DayOfWeek, 1600041600) == 1);
  CHECK(slot_of(GranularityKind::DayOfMonth, 1600041600) == 13);
  // timezone shift moves the hour
  CHECK(slot_of(GranularityKind::HourOfDay, 1600041600, 3600) == 1);
}

TEST_CASE("surrounding window wraps modulo the cycle length") {
  auto enc = small_encoder();
  const Index d = enc.dim();
  // 23:30 on the start day -> hour slot 23
  const std::int64_t t = 1600041600 + 23 * 3600 + 1800;
  REQUIRE(slot_of(GranularityKind::HourOfDay, t) == 23);

  auto w1 = surrounding_window(enc, 0, t, 1);
  CHECK(w1->shape == Shape{3, d});
  const auto& table = enc.table(0);
  const Index expected1[] = {22, 23, 0};
  for (int r = 0; r < 3; ++r) {
    for (Index c = 0; c < d; ++c) {
      CHECK(w1->data[r * d + c] == table->data[expected1[r] * d + c]);
    }
  }

  // slot 0 with j=2 -> 22, 23, 0, 1, 2
  const std::int64_t t0 = 1600041600;
  auto w2 = surrounding_window(enc, 0, t0, 2);
  CHECK(w2->shape == Shape{5, d});
  const Index expected2[] = {22, 23, 0, 1, 2};
  for (int r = 0; r < 5; ++r) {
    for (Index c = 0; c < d; ++c) {
      CHECK(w2->data[r * d + c] == table->data[expected2[r] * d + c]);
    }
  }

  CHECK_THROWS_AS(surrounding_window(enc, 0, t, 3), ConfigError);
  CHECK_THROWS_AS(surrounding_window(enc, 0, t, 0), ConfigError);
}

TEST_CASE("absolute_encode: zero tables give the zero vector") {
  auto enc = small_encoder();
  for (std::size_t g = 0; g < enc.granularities().size(); ++g) {
    enc.table(g)->data.setZero();
  }
  auto out = absolute_encode(enc, 1600000000);
  CHECK(out->shape == Shape{enc.dim()});
  for (Index i = 0; i < out->numel(); ++i) CHECK(out->data[i] == 0.0);
}

TEST_CASE("absolute_encode: output shape is d for any t") {
  auto enc = small_encoder(9);
  for (std::int64_t t : {0LL, 123456LL, 1600041600LL, 1999999999LL}) {
    CHECK(absolute_encode(enc, t)->shape == Shape{enc.dim()});
  }
}

TEST_CASE("absolute_encode: single granularity, identity kernel, non-negative table") {
  TimeEncodingConfig cfg;
  cfg.granularities = {GranularityKind::HourOfDay};
  cfg.surrounding_range = 1;
  Rng rng(17);
  AbsoluteTimeEncoder enc(cfg, 4, rng);
  const auto& table = enc.table(0);
  for (Index i = 0; i < table->numel(); ++i) table->data[i] = std::abs(table->data[i]);
  const auto& kernel = enc.kernel(1);
  kernel->data.setZero();
  for (Index c = 0; c < 4; ++c) kernel->data[1 * 4 + c] = 1.0;  // center tap

  const std::int64_t t = 1600041600 + 7 * 3600;
  const Index slot = slot_of(GranularityKind::HourOfDay, t);
  auto out = absolute_encode(enc, t);

  // direct reimplementation: identity conv + relu on non-negative entries
  // reduces to the column-wise max over the three window rows
  for (Index c = 0; c < 4; ++c) {
    double expect = 0.0;
    for (Index k = -1; k <= 1; ++k) {
      const Index s = ((slot + k) % 24 + 24) % 24;
      expect = std::max(expect, table->data[s * 4 + c]);
    }
    CHECK(out->data[c] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("absolute_encode: weekly periodicity under default granularities") {
  auto enc = small_encoder(21);
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = static_cast<std::int64_t>(rng.uniform_index(1'000'000'000));
    auto a = absolute_encode(enc, t);
    auto b = absolute_encode(enc, t + 7 * 86400);
    for (Index i = 0; i < a->numel(); ++i) CHECK(a->data[i] == b->data[i]);
  }
}

TEST_CASE("absolute_encode_all_slots matches per-timestamp encoding") {
  auto enc = small_encoder(33);
  auto all_hours = absolute_encode_all_slots(enc, 0);
  auto all_week = absolute_encode_all_slots(enc, 1);
  CHECK(all_hours->shape == Shape{24, enc.dim()});
  CHECK(all_week->shape == Shape{7, enc.dim()});
  for (Index hour : {0LL, 5LL, 23LL}) {
    const std::int64_t t = 1600041600 + hour * 3600;
    auto full = absolute_encode(enc, t);
    const Index wslot = slot_of(GranularityKind::DayOfWeek, t);
    for (Index c = 0; c < enc.dim(); ++c) {
      const double expect =
          all_hours->data[hour * enc.dim() + c] + all_week->data[wslot * enc.dim() + c];
      CHECK(full->data[c] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("absolute encoder gradients match finite differences") {
  auto enc = small_encoder(47);
  const std::int64_t t = 1600041600 + 11 * 3600;
  auto build = [&]() {
    Rng prng(7);
    auto out = absolute_encode(enc, t);
    auto w = Tensor::zeros(out->shape);
    for (Index i = 0; i < w->numel(); ++i) w->data[i] = prng.uniform(-1, 1);
    return weighted_sum_rows(Tensor::full({1}, 1.0), reshape(mul(out, w), {1, out->numel()}));
  };
  auto loss = build();
  backward(loss);
  auto rep = check_gradients(enc.parameters(), [&]() { return build()->value(); }, 1e-4, 1e-8);
  CHECK_MESSAGE(rep.ok, rep.detail);
}

TEST_CASE("relative_encode: value at zero interval") {
  auto omega = init_frequencies(4, 99);
  RelativeTimeEncoder enc(omega, 3600.0);
  auto phi0 = relative_encode(enc, 0.0);
  const double s = std::sqrt(0.5);
  CHECK(phi0->data[0] == doctest::Approx(s).epsilon(1e-15));
  CHECK(phi0->data[1] == 0.0);
  CHECK(phi0->data[2] == doctest::Approx(s).epsilon(1e-15));
  CHECK(phi0->data[3] == 0.0);
}

TEST_CASE("relative_encode: full period gives inner product one") {
  auto omega = Tensor::zeros({1}, true);
  omega->data[0] = 2.0 * M_PI / 24.0;
  RelativeTimeEncoder enc(omega, 3600.0);
  auto a = relative_encode(enc, 5.5 * 3600.0);
  auto b = relative_encode(enc, 5.5 * 3600.0 + 24.0 * 3600.0);
  CHECK(inner(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("relative_encode: inner product equals the cosine-sum kernel") {
  auto omega = init_frequencies(8, 3);
  RelativeTimeEncoder enc(omega, 3600.0);
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const double t1 = rng.uniform(0.0, 1e7);
    const double t2 = rng.uniform(0.0, 1e7);
    auto p1 = relative_encode(enc, t1);
    auto p2 = relative_encode(enc, t2);
    // trigonometric identity oracle: (2/d) sum_i cos(w_i (tau2 - tau1))
    double expect = 0.0;
    for (Index i = 0; i < omega->numel(); ++i) {
      expect += std::cos(omega->data[i] * (t2 - t1) / 3600.0);
    }
    expect *= 2.0 / 8.0;
    CHECK(std::abs(inner(p1, p2) - expect) < 1e-12);
  }
}

TEST_CASE("relative_encode: unit norm and translation invariance") {
  auto omega = init_frequencies(16, 12);
  RelativeTimeEncoder enc(omega, 3600.0);
  Rng rng(14);
  for (int rep = 0; rep < 100; ++rep) {
    const double t1 = rng.uniform(0.0, 5e6);
    const double t2 = rng.uniform(0.0, 5e6);
    const double c = rng.uniform(-1e6, 1e6);
    auto p1 = relative_encode(enc, t1);
    CHECK(std::abs(std::sqrt(inner(p1, p1)) - 1.0) < 1e-9);
    const double base = inner(p1, relative_encode(enc, t2));
    const double shifted = inner(relative_encode(enc, t1 + c), relative_encode(enc, t2 + c));
    CHECK(std::abs(base - shifted) < 1e-9);
  }
}

TEST_CASE("relative encoder gradients match finite differences") {
  auto omega = init_frequencies(6, 4);
  RelativeTimeEncoder enc(omega, 3600.0);
  const std::vector<double> deltas = {0.0, 3600.0, 90000.0, 7.5 * 3600.0};
  auto build = [&]() {
    Rng prng(31);
    auto out = relative_encode_batch(enc, deltas);
    auto w = Tensor::zeros(out->shape);
    for (Index i = 0; i < w->numel(); ++i) w->data[i] = prng.uniform(-1, 1);
    return weighted_sum_rows(Tensor::full({1}, 1.0), reshape(mul(out, w), {1, out->numel()}));
  };
  backward(build());
  auto rep = check_gradients({omega}, [&]() { return build()->value(); }, 1e-4, 1e-8, 1e-6);
  CHECK_MESSAGE(rep.ok, rep.detail);
}

TEST_CASE("init_frequencies: count, determinism, bounds") {
  CHECK(init_frequencies(2, 5)->numel() == 1);
  CHECK_THROWS_AS(init_frequencies(3, 5), ConfigError);

  auto a = init_frequencies(8, 42);
  auto b = init_frequencies(8, 42);
  for (Index i = 0; i < a->numel(); ++i) CHECK(a->data[i] == b->data[i]);

  auto big = init_frequencies(2000, 6);
  for (Index i = 0; i < big->numel(); ++i) {
    const double period_hours = 2.0 * M_PI / big->data[i];
    CHECK(period_hours >= 1.0 - 1e-9);
    CHECK(period_hours <= 720.0 + 1e-9);
  }
}
