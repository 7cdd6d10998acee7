#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "core/adam.hpp"
#include "core/grad_check.hpp"
#include "core/nn_ops.hpp"
#include "test_util.hpp"

using namespace stegograph;
using testutil::max_abs_diff;
using testutil::rand_tensor;
using testutil::weighted_sum;

TEST_CASE("tensor shape bookkeeping and accessors") {
    Tensor<float> t(Shape{2, 3}, 1.5f);
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 6);
    CHECK(t.at(1, 2) == 1.5f);
    t.at(0, 1) = -2.0f;
    CHECK(t[1] == -2.0f);

    CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(t.reshaped(Shape{5}), InvalidArgument);
    CHECK(t.reshaped(Shape{6}).rank() == 1);

    Tensor<double> d = t.cast<double>();
    CHECK(d.at(0, 1) == doctest::Approx(-2.0));
}

TEST_CASE("counter rng is order-independent and uniform-ish") {
    // same (seed, counter) -> same draw regardless of call order
    const double a = counter_uniform(42, 7);
    (void)counter_uniform(42, 3);
    CHECK(counter_uniform(42, 7) == a);
    CHECK(counter_uniform(43, 7) != a);

    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        const double u = counter_uniform(5, static_cast<std::uint64_t>(i));
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("backward error paths") {
    ParamStore<double> store;
    auto x = store.add_parameter("x", Tensor<double>(Shape{3}, 2.0));

    SUBCASE("non-scalar loss rejected") { CHECK_THROWS_AS(backward(scale(x, 2.0)), InvalidArgument); }
    SUBCASE("loss without parameters rejected") {
        auto c = make_const(Tensor<double>(Shape{1}, 1.0));
        CHECK_THROWS_AS(backward(c), InvalidArgument);
    }
    SUBCASE("double backward rejected") {
        auto loss = sum_all(mul(x, x));
        backward(loss);
        CHECK_THROWS_AS(backward(loss), InvalidArgument);
    }
    SUBCASE("gradients accumulate across backward calls until zeroed") {
        backward(sum_all(x));
        backward(sum_all(x));
        CHECK(x->grad[0] == doctest::Approx(2.0));
        store.zero_grads();
        CHECK(x->grad[0] == 0.0);
    }
}

TEST_CASE("no-grad mode skips tape construction") {
    ParamStore<double> store;
    auto x = store.add_parameter("x", Tensor<double>(Shape{2}, 1.0));
    NoGradGuard guard;
    auto y = sum_all(mul(x, x));
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
}

TEST_CASE("non-finite forward values are trapped at the producing op") {
    auto big = make_leaf(Tensor<double>(Shape{1}, 1e308), true);
    CHECK_THROWS_AS(mul(big, big), NumericError);
}

TEST_CASE("conv2d matches a nested-loop oracle") {
    const std::int64_t n = 2, cin = 3, h = 6, w = 7, f = 4, kh = 3, kw = 3;
    for (const auto& [stride, pad] : {std::pair<std::int64_t, std::int64_t>{1, 0}, {1, 2}, {2, 1}}) {
        auto x = make_const(rand_tensor<double>(Shape{n, cin, h, w}, 11));
        auto kernel = make_const(rand_tensor<double>(Shape{f, cin, kh, kw}, 12));
        auto bias = make_const(rand_tensor<double>(Shape{f}, 13));
        auto y = conv2d(x, kernel, bias, stride, pad);

        const std::int64_t ho = (h + 2 * pad - kh) / stride + 1, wo = (w + 2 * pad - kw) / stride + 1;
        REQUIRE(y->value.shape() == Shape{n, f, ho, wo});
        Tensor<double> want(Shape{n, f, ho, wo});
        for (std::int64_t img = 0; img < n; ++img)
            for (std::int64_t fo = 0; fo < f; ++fo)
                for (std::int64_t oy = 0; oy < ho; ++oy)
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        double acc = bias->value[fo];
                        for (std::int64_t c = 0; c < cin; ++c)
                            for (std::int64_t ky = 0; ky < kh; ++ky)
                                for (std::int64_t kx = 0; kx < kw; ++kx) {
                                    const std::int64_t iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                    acc += x->value.at(img, c, iy, ix) * kernel->value.at(fo, c, ky, kx);
                                }
                        want.at(img, fo, oy, ox) = acc;
                    }
        CHECK(max_abs_diff(y->value, want) < 1e-12);
    }
}

TEST_CASE("conv2d shape validation") {
    auto x = make_const(Tensor<double>(Shape{1, 2, 4, 4}, 1.0));
    auto k_badc = make_const(Tensor<double>(Shape{1, 3, 3, 3}, 1.0));
    CHECK_THROWS_AS(conv2d(x, k_badc), InvalidArgument);
    auto k_big = make_const(Tensor<double>(Shape{1, 2, 5, 5}, 1.0));
    CHECK_THROWS_AS(conv2d(x, k_big), InvalidArgument);
    CHECK_NOTHROW(conv2d(x, k_big, 1, 1));
}

TEST_CASE("avg_pool2d and global_avg_pool match direct means") {
    auto x = make_const(rand_tensor<double>(Shape{2, 3, 7, 9}, 21));
    auto pooled = avg_pool2d(x, 5, 2);
    REQUIRE(pooled->value.shape() == Shape{2, 3, 2, 3});
    double acc = 0; // window at (2,4) of image 1, channel 2
    for (std::int64_t ky = 0; ky < 5; ++ky)
        for (std::int64_t kx = 0; kx < 5; ++kx) acc += x->value.at(1, 2, 2 + ky, 4 + kx);
    CHECK(pooled->value.at(1, 2, 1, 2) == doctest::Approx(acc / 25.0));

    auto global = global_avg_pool(x);
    REQUIRE(global->value.shape() == Shape{2, 3});
    acc = 0;
    for (std::int64_t y = 0; y < 7; ++y)
        for (std::int64_t z = 0; z < 9; ++z) acc += x->value.at(0, 1, y, z);
    CHECK(global->value.at(0, 1) == doctest::Approx(acc / 63.0));
}

TEST_CASE("batch_norm train mode normalizes with biased batch statistics") {
    const std::int64_t n = 4, c = 2, h = 3, w = 3;
    ParamStore<double> store;
    auto x = make_const(rand_tensor<double>(Shape{n, c, h, w}, 31, -2, 5));
    auto gamma = store.add_parameter("gamma", Tensor<double>(Shape{c}, 1.0));
    auto beta = store.add_parameter("beta", Tensor<double>(Shape{c}));
    auto rmean = store.add_buffer("rmean", Tensor<double>(Shape{c}));
    auto rvar = store.add_buffer("rvar", Tensor<double>(Shape{c}, 1.0));

    auto y = batch_norm(x, gamma, beta, rmean, rvar, Mode::Train);

    for (std::int64_t ch = 0; ch < c; ++ch) {
        double mu = 0, var = 0, out_mu = 0, out_var = 0;
        for (std::int64_t img = 0; img < n; ++img)
            for (std::int64_t i = 0; i < h * w; ++i) {
                mu += x->value.at(img, ch, i / w, i % w);
                out_mu += y->value.at(img, ch, i / w, i % w);
            }
        mu /= double(n * h * w);
        out_mu /= double(n * h * w);
        for (std::int64_t img = 0; img < n; ++img)
            for (std::int64_t i = 0; i < h * w; ++i) {
                var += std::pow(x->value.at(img, ch, i / w, i % w) - mu, 2);
                out_var += std::pow(y->value.at(img, ch, i / w, i % w) - out_mu, 2);
            }
        var /= double(n * h * w);   // biased
        out_var /= double(n * h * w);
        CHECK(out_mu == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(out_var == doctest::Approx(1.0).epsilon(1e-4)); // eps shifts it slightly
        // running update with momentum 0.1 from (0, 1)
        CHECK(rmean->value[ch] == doctest::Approx(0.1 * mu));
        CHECK(rvar->value[ch] == doctest::Approx(0.9 + 0.1 * var));
    }

    SUBCASE("eval mode uses the running statistics per sample") {
        auto single = make_const(rand_tensor<double>(Shape{1, c, h, w}, 32));
        auto out = batch_norm(single, gamma, beta, rmean, rvar, Mode::Eval);
        const double want =
            (single->value.at(0, 1, 2, 2) - rmean->value[1]) / std::sqrt(rvar->value[1] + 1e-5);
        CHECK(out->value.at(0, 1, 2, 2) == doctest::Approx(want));
    }
    SUBCASE("train mode needs at least two samples") {
        auto single = make_const(rand_tensor<double>(Shape{1, c, h, w}, 33));
        CHECK_THROWS_AS(batch_norm(single, gamma, beta, rmean, rvar, Mode::Train), InvalidArgument);
    }
}

TEST_CASE("softmax rows sum to one and cross-entropy matches -log p") {
    auto logits = make_const(rand_tensor<double>(Shape{5, 4}, 41, -3, 3));
    auto probs = row_softmax(logits);
    for (std::int64_t i = 0; i < 5; ++i) {
        double sum = 0;
        for (std::int64_t j = 0; j < 4; ++j) sum += probs->value.at(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    const std::vector<int> labels = {0, 3, 1, 2, 0};
    auto loss = softmax_cross_entropy(logits, labels);
    double want = 0;
    for (std::int64_t i = 0; i < 5; ++i) want -= std::log(probs->value.at(i, labels[size_t(i)]));
    CHECK(loss->value[0] == doctest::Approx(want / 5.0));

    CHECK_THROWS_AS(softmax_cross_entropy(logits, std::vector<int>{0, 1}), InvalidArgument);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, std::vector<int>{0, 1, 2, 3, 4}), InvalidArgument);
}

TEST_CASE("cross-entropy is stable under large logit offsets") {
    Tensor<double> raw(Shape{2, 2});
    raw.at(0, 0) = 1000.0;
    raw.at(0, 1) = 998.0;
    raw.at(1, 0) = -1000.0;
    raw.at(1, 1) = -997.0;
    auto loss = softmax_cross_entropy(make_const(raw), {0, 1});
    // row 0: -log sigmoid(2), row 1: -log sigmoid(3)
    const double want = (-std::log(1 / (1 + std::exp(-2.0))) - std::log(1 / (1 + std::exp(-3.0)))) / 2;
    CHECK(loss->value[0] == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("masked softmax puts exact zeros off-support") {
    auto scores = make_const(rand_tensor<double>(Shape{3, 3}, 51));
    Tensor<double> mask(Shape{3, 3});
    mask.at(0, 0) = 1;
    mask.at(0, 2) = 1;
    mask.at(1, 1) = 1;
    mask.at(2, 0) = 1;
    mask.at(2, 1) = 1;
    mask.at(2, 2) = 1;
    auto alpha = masked_row_softmax(scores, mask);
    CHECK(alpha->value.at(0, 1) == 0.0);
    CHECK(alpha->value.at(1, 0) == 0.0);
    CHECK(alpha->value.at(1, 2) == 0.0);
    CHECK(alpha->value.at(1, 1) == 1.0);
    for (std::int64_t i = 0; i < 3; ++i) {
        double sum = 0;
        for (std::int64_t j = 0; j < 3; ++j) sum += alpha->value.at(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    Tensor<double> empty_row(Shape{3, 3}); // row 1 unsupported
    empty_row.at(0, 0) = 1;
    empty_row.at(2, 2) = 1;
    CHECK_THROWS_AS(masked_row_softmax(scores, empty_row), InvalidArgument);
}

TEST_CASE("gradient checks: every differentiable op") {
    // Each case wires the op into loss = sum(op(..) * fixed_weights) and
    // compares tape gradients against central differences in double.
    auto check = [](ParamStore<double>& store, const std::function<Var<double>()>& loss) {
        const auto report = check_gradients(store, loss, 1e-5);
        INFO("worst: ", report.worst_param, "[", report.worst_index, "] analytic=", report.analytic,
             " numeric=", report.numeric);
        CHECK(report.max_rel_error < 1e-4);
    };

    SUBCASE("add, mul, scale") {
        ParamStore<double> store;
        auto a = store.add_parameter("a", rand_tensor<double>(Shape{3, 4}, 61));
        auto b = store.add_parameter("b", rand_tensor<double>(Shape{3, 4}, 62));
        check(store, [&] { return weighted_sum(scale(add(a, mul(a, b)), 1.7), 63); });
    }
    SUBCASE("reshape, slice_rows, concat_rows, mean_rows") {
        ParamStore<double> store;
        auto a = store.add_parameter("a", rand_tensor<double>(Shape{6, 4}, 64));
        check(store, [&] {
            auto top = slice_rows(a, 0, 2);
            auto bottom = slice_rows(a, 3, 3);
            auto joined = concat_rows<double>({top, bottom, mean_rows(a)});
            return weighted_sum(reshape(joined, Shape{3, 8}), 65);
        });
    }
    SUBCASE("activations") {
        ParamStore<double> store;
        // keep values away from the relu/abs kinks
        auto a = store.add_parameter("a", rand_tensor<double>(Shape{4, 5}, 66, 0.1, 2.0));
        auto b = store.add_parameter("b", rand_tensor<double>(Shape{4, 5}, 67, -2.0, -0.1));
        check(store, [&] {
            auto mixed = add(abs_act(b), tanh_act(a));
            return weighted_sum(add(relu(mixed), add(leaky_relu(b), elu(b))), 68);
        });
    }
    SUBCASE("matmul and linear") {
        ParamStore<double> store;
        auto x = store.add_parameter("x", rand_tensor<double>(Shape{3, 4}, 71));
        auto w = store.add_parameter("w", rand_tensor<double>(Shape{4, 5}, 72));
        auto bias = store.add_parameter("bias", rand_tensor<double>(Shape{5}, 73));
        check(store, [&] { return weighted_sum(linear(x, w, bias), 74); });
        check(store, [&] { return weighted_sum(matmul(x, w), 75); });
    }
    SUBCASE("conv2d stride 1 padded") {
        ParamStore<double> store;
        auto x = store.add_parameter("x", rand_tensor<double>(Shape{2, 2, 5, 6}, 81));
        auto k = store.add_parameter("k", rand_tensor<double>(Shape{3, 2, 3, 3}, 82));
        auto b = store.add_parameter("b", rand_tensor<double>(Shape{3}, 83));
        check(store, [&] { return weighted_sum(conv2d(x, k, b, 1, 1), 84); });
    }
    SUBCASE("conv2d stride 2 no bias") {
        ParamStore<double> store;
        auto x = store.add_parameter("x", rand_tensor<double>(Shape{1, 2, 7, 7}, 85));
        auto k = store.add_parameter("k", rand_tensor<double>(Shape{2, 2, 3, 3}, 86));
        check(store, [&] { return weighted_sum(conv2d(x, k, 2, 1), 87); });
    }
    SUBCASE("pooling") {
        ParamStore<double> store;
        auto x = store.add_parameter("x", rand_tensor<double>(Shape{2, 2, 7, 7}, 88));
        check(store, [&] { return weighted_sum(avg_pool2d(x, 5, 2), 89); });
        check(store, [&] { return weighted_sum(global_avg_pool(x), 90); });
    }
    SUBCASE("batch_norm 4d train and eval") {
        ParamStore<double> store;
        auto x = store.add_parameter("x", rand_tensor<double>(Shape{3, 2, 4, 4}, 91, -2, 4));
        auto gamma = store.add_parameter("gamma", rand_tensor<double>(Shape{2}, 92, 0.5, 1.5));
        auto beta = store.add_parameter("beta", rand_tensor<double>(Shape{2}, 93));
        auto rmean = store.add_buffer("rmean", rand_tensor<double>(Shape{2}, 94));
        auto rvar = store.add_buffer("rvar", rand_tensor<double>(Shape{2}, 95, 0.5, 2.0));
        check(store, [&] { return weighted_sum(batch_norm(x, gamma, beta, rmean, rvar, Mode::Train), 96); });
        check(store, [&] { return weighted_sum(batch_norm(x, gamma, beta, rmean, rvar, Mode::Eval), 97); });
    }
    SUBCASE("batch_norm 2d") {
        ParamStore<double> store;
        auto x = store.add_parameter("x", rand_tensor<double>(Shape{5, 3}, 98, -1, 3));
        auto gamma = store.add_parameter("gamma", rand_tensor<double>(Shape{3}, 99, 0.5, 1.5));
        auto beta = store.add_parameter("beta", rand_tensor<double>(Shape{3}, 100));
        auto rmean = store.add_buffer("rmean", Tensor<double>(Shape{3}));
        auto rvar = store.add_buffer("rvar", Tensor<double>(Shape{3}, 1.0));
        check(store, [&] { return weighted_sum(batch_norm(x, gamma, beta, rmean, rvar, Mode::Train), 101); });
    }
    SUBCASE("softmax family") {
        ParamStore<double> store;
        auto logits = store.add_parameter("logits", rand_tensor<double>(Shape{4, 3}, 102, -2, 2));
        check(store, [&] { return weighted_sum(row_softmax(logits), 103); });
        check(store, [&] { return softmax_cross_entropy(logits, std::vector<int>{0, 2, 1, 0}); });

        Tensor<double> mask(Shape{4, 4}, 0.0);
        for (std::int64_t i = 0; i < 4; ++i) {
            mask.at(i, i) = 1;
            mask.at(i, (i + 1) % 4) = 1;
        }
        ParamStore<double> store2;
        auto scores = store2.add_parameter("scores", rand_tensor<double>(Shape{4, 4}, 104, -2, 2));
        check(store2, [&] { return weighted_sum(masked_row_softmax(scores, mask), 105); });
    }
    SUBCASE("pair_sum") {
        ParamStore<double> store;
        auto col = store.add_parameter("col", rand_tensor<double>(Shape{5, 1}, 106));
        auto row = store.add_parameter("row", rand_tensor<double>(Shape{5, 1}, 107));
        check(store, [&] { return weighted_sum(pair_sum(col, row), 108); });
    }
    SUBCASE("sum_all") {
        ParamStore<double> store;
        auto a = store.add_parameter("a", rand_tensor<double>(Shape{7}, 109));
        check(store, [&] { return sum_all(mul(a, a)); });
    }
}

TEST_CASE("adam reproduces the frozen two-step oracle") {
    // theta0 = [0.5, -1.25, 2.0], lr 1e-3, betas (0.5, 0.999), eps 1e-8,
    // grads g1 = [1, -2, 0.5], g2 = [-0.5, 1, 0.25]. At step 2 the first two
    // coordinates have exactly zero momentum, so they must not move.
    ParamStore<double> store;
    auto theta = store.add_parameter("theta", Tensor<double>(Shape{3}, std::vector<double>{0.5, -1.25, 2.0}));
    Adam<double> opt(store, 1e-3, 0.5, 0.999, 1e-8);

    theta->accumulate(Tensor<double>(Shape{3}, std::vector<double>{1.0, -2.0, 0.5}));
    opt.step();
    CHECK(theta->value[0] == doctest::Approx(0.49900000001).epsilon(1e-12));
    CHECK(theta->value[1] == doctest::Approx(-1.249000000005).epsilon(1e-12));
    CHECK(theta->value[2] == doctest::Approx(1.99900000002).epsilon(1e-12));
    CHECK(theta->grad[0] == 0.0); // step consumed the gradient

    theta->accumulate(Tensor<double>(Shape{3}, std::vector<double>{-0.5, 1.0, 0.25}));
    opt.step();
    CHECK(theta->value[0] == doctest::Approx(0.49900000001).epsilon(1e-12));
    CHECK(theta->value[1] == doctest::Approx(-1.249000000005).epsilon(1e-12));
    CHECK(theta->value[2] == doctest::Approx(1.9981565994157484).epsilon(1e-12));
    CHECK(opt.steps_taken() == 2);
}

TEST_CASE("adam drives a quadratic toward its minimum") {
    ParamStore<float> store;
    auto x = store.add_parameter("x", Tensor<float>(Shape{2}, std::vector<float>{3.0f, -2.0f}));
    Adam<float> opt(store, 0.05f);
    for (int i = 0; i < 400; ++i) {
        auto loss = sum_all(mul(x, x));
        backward(loss);
        opt.step();
    }
    CHECK(std::abs(x->value[0]) < 0.05f);
    CHECK(std::abs(x->value[1]) < 0.05f);
}

TEST_CASE("param store rejects duplicates and counts parameters") {
    ParamStore<float> store;
    store.add_parameter("w", Tensor<float>(Shape{2, 3}));
    store.add_buffer("r", Tensor<float>(Shape{4}));
    CHECK_THROWS_AS(store.add_parameter("w", Tensor<float>(Shape{1})), InvalidArgument);
    CHECK_THROWS_AS(store.add_buffer("w", Tensor<float>(Shape{1})), InvalidArgument);
    CHECK(store.parameter_count() == 6);
    CHECK(store.has("r"));
    CHECK_THROWS_AS(store.get("missing"), InvalidArgument);
    auto as_double = store.cast<double>();
    CHECK(as_double.parameter_count() == 6);
    CHECK(as_double.buffers().size() == 1);
}
