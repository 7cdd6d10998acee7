#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "core/grad_check.hpp"
#include "core/shallow_cnn.hpp"
#include "test_util.hpp"

using namespace stegograph;
using testutil::rand_tensor;
using testutil::weighted_sum;

namespace {

ShallowCnnConfig make_config(int k, std::int64_t hp, std::int64_t wp) {
    ShallowCnnConfig c;
    c.group_count = k;
    c.patch_h = hp;
    c.patch_w = wp;
    return c;
}

ParamStore<float> seeded_params(const ShallowCnnConfig& config, std::uint64_t seed = 9) {
    ParamStore<float> store;
    std::mt19937_64 gen(seed);
    add_cnn_params(store, config, gen);
    return store;
}

} // namespace

TEST_CASE("feature width doubles per group") {
    const std::int64_t want[] = {8, 16, 32, 64, 128};
    for (int k = 1; k <= 5; ++k) {
        CHECK(make_config(k, 256, 256).output_dim() == want[k - 1]);
        CHECK(ShallowCnnConfig::group_channels(k) == want[k - 1]);
    }
}

TEST_CASE("config validation tracks the pooled extent") {
    CHECK_NOTHROW(make_config(3, 64, 64).validate());
    CHECK_NOTHROW(make_config(5, 256, 256).validate());
    CHECK_NOTHROW(make_config(1, 8, 8).validate()); // single group pools globally, any size works
    CHECK_THROWS_AS(make_config(0, 64, 64).validate(), InvalidArgument);
    CHECK_THROWS_AS(make_config(6, 256, 256).validate(), InvalidArgument);
    CHECK_THROWS_AS(make_config(2, 4, 64).validate(), InvalidArgument);  // no room for the window-5 pool
    CHECK_THROWS_AS(make_config(3, 8, 8).validate(), InvalidArgument);   // 8 -> 2, second pool impossible
    CHECK_THROWS_AS(make_config(1, 0, 8).validate(), InvalidArgument);
}

TEST_CASE("high-pass kernel is zero-sum with the fixed coefficient pattern") {
    const auto k = kv_kernel<double>();
    REQUIRE(k.shape() == Shape{1, 1, 5, 5});
    double sum = 0;
    for (std::int64_t i = 0; i < 25; ++i) sum += k[i];
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(k.at(0, 0, 2, 2) == doctest::Approx(-1.0));        // -12/12
    CHECK(k.at(0, 0, 0, 0) == doctest::Approx(-1.0 / 12.0));
    CHECK(k.at(0, 0, 2, 1) == doctest::Approx(8.0 / 12.0));
    // symmetric under horizontal and vertical reflection
    for (std::int64_t y = 0; y < 5; ++y)
        for (std::int64_t x = 0; x < 5; ++x) {
            CHECK(k.at(0, 0, y, x) == k.at(0, 0, 4 - y, x));
            CHECK(k.at(0, 0, y, x) == k.at(0, 0, y, 4 - x));
        }
}

TEST_CASE("hpf layer zeroes constant regions and echoes impulses") {
    auto config = make_config(1, 11, 11);
    auto store = seeded_params(config);

    SUBCASE("constant patch -> zero interior") {
        // exactness is a double-precision claim; float32 keeps ~1e-7 relative
        ParamStore<double> dstore;
        std::mt19937_64 gen(1);
        add_cnn_params(dstore, config, gen);
        auto flat = make_const(Tensor<double>(Shape{1, 1, 11, 11}, 100.0));
        auto out = hpf_forward(dstore, flat);
        REQUIRE(out->value.shape() == Shape{1, 1, 11, 11});
        for (std::int64_t y = 2; y < 9; ++y)
            for (std::int64_t x = 2; x < 9; ++x) CHECK(std::abs(out->value.at(0, 0, y, x)) < 1e-10);
        // zero padding makes the border nonzero for a nonzero constant
        CHECK(std::abs(out->value.at(0, 0, 0, 0)) > 1.0);

        auto fout = hpf_forward(store, make_const(Tensor<float>(Shape{1, 1, 11, 11}, 100.0f)));
        for (std::int64_t y = 2; y < 9; ++y)
            for (std::int64_t x = 2; x < 9; ++x) CHECK(std::abs(fout->value.at(0, 0, y, x)) < 100.0f * 1e-5f);
    }
    SUBCASE("centered impulse of 12 reads back the unscaled kernel") {
        Tensor<float> impulse(Shape{1, 1, 11, 11});
        impulse.at(0, 0, 5, 5) = 12.0f;
        auto out = hpf_forward(store, make_const(impulse));
        const auto k = kv_kernel<double>();
        for (std::int64_t dy = -2; dy <= 2; ++dy)
            for (std::int64_t dx = -2; dx <= 2; ++dx)
                CHECK(out->value.at(0, 0, 5 + dy, 5 + dx) ==
                      doctest::Approx(k.at(0, 0, 2 + dy, 2 + dx) * 12.0).epsilon(1e-5));
        CHECK(out->value.at(0, 0, 5, 5) == doctest::Approx(-12.0));
    }
    SUBCASE("random patch matches a nested-loop oracle") {
        const auto patch = rand_tensor<float>(Shape{2, 1, 11, 11}, 77, 0, 255);
        auto out = hpf_forward(store, make_const(patch));
        const auto k = kv_kernel<double>();
        for (std::int64_t img = 0; img < 2; ++img)
            for (std::int64_t y = 0; y < 11; ++y)
                for (std::int64_t x = 0; x < 11; ++x) {
                    double acc = 0;
                    for (std::int64_t ky = 0; ky < 5; ++ky)
                        for (std::int64_t kx = 0; kx < 5; ++kx) {
                            const std::int64_t iy = y + ky - 2, ix = x + kx - 2;
                            if (iy < 0 || iy >= 11 || ix < 0 || ix >= 11) continue;
                            acc += double(patch.at(img, 0, iy, ix)) * k.at(0, 0, ky, kx);
                        }
                    CHECK(out->value.at(img, 0, y, x) == doctest::Approx(acc).epsilon(1e-4));
                }
    }
}

TEST_CASE("extract_features honors the published shape contract") {
    // B=4, k=3 on full-size patches -> [4, 32]
    auto config = make_config(3, 256, 256);
    auto store = seeded_params(config);
    NoGradGuard guard;
    auto patches = make_const(rand_tensor<float>(Shape{4, 1, 256, 256}, 5, 0, 255));
    auto features = extract_features(store, config, patches, Mode::Eval);
    CHECK(features->value.shape() == Shape{4, 32});
}

TEST_CASE("eval features are per-sample deterministic") {
    auto config = make_config(2, 32, 32);
    auto store = seeded_params(config);
    NoGradGuard guard;

    const auto patch = rand_tensor<float>(Shape{1, 1, 32, 32}, 6, 0, 255);
    Tensor<float> batch(Shape{3, 1, 32, 32});
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 32 * 32; ++j)
            batch[i * 32 * 32 + j] = (i == 1) ? float(200 - patch[j] / 2) : patch[j]; // rows 0 and 2 identical

    auto features = extract_features(store, config, make_const(batch), Mode::Eval);
    for (std::int64_t c = 0; c < 16; ++c) {
        CHECK(features->value.at(0, c) == features->value.at(2, c));
    }

    // same patch alone vs inside the batch: eval mode must not couple samples
    auto solo = extract_features(store, config, make_const(patch), Mode::Eval);
    for (std::int64_t c = 0; c < 16; ++c)
        CHECK(solo->value.at(0, c) == doctest::Approx(features->value.at(0, c)).epsilon(1e-6));
}

TEST_CASE("extract_features validates the batch shape") {
    auto config = make_config(2, 32, 32);
    auto store = seeded_params(config);
    NoGradGuard guard;
    CHECK_THROWS_AS(extract_features(store, config, make_const(Tensor<float>(Shape{2, 1, 16, 32})), Mode::Eval),
                    InvalidArgument);
    CHECK_THROWS_AS(extract_features(store, config, make_const(Tensor<float>(Shape{2, 3, 32, 32})), Mode::Eval),
                    InvalidArgument);
    // train mode needs a real batch for normalization statistics
    CHECK_THROWS_AS(extract_features(store, config, make_const(Tensor<float>(Shape{1, 1, 32, 32})), Mode::Train),
                    InvalidArgument);
}

TEST_CASE("the high-pass kernel never receives gradient") {
    auto config = make_config(2, 32, 32);
    auto store = seeded_params(config);
    auto patches = make_const(rand_tensor<float>(Shape{2, 1, 32, 32}, 8, 0, 255));
    auto loss = sum_all(extract_features(store, config, patches, Mode::Train));
    backward(loss);

    auto hpf = store.get("cnn.hpf.w").node;
    CHECK_FALSE(hpf->requires_grad);
    const auto& g = hpf->grad_or_zeros();
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0f);

    // trainable parameters did receive gradient
    auto conv = store.get("cnn.group1.conv.w").node;
    double total = 0;
    for (std::int64_t i = 0; i < conv->grad.numel(); ++i) total += std::abs(double(conv->grad[i]));
    CHECK(total > 0.0);
}

TEST_CASE("parameter registry matches the serialization contract") {
    auto config = make_config(3, 64, 64);
    auto store = seeded_params(config);
    for (const char* name :
         {"cnn.group1.conv.w", "cnn.group1.conv.b", "cnn.group1.bn.gamma", "cnn.group1.bn.beta",
          "cnn.group2.conv.w", "cnn.group2.conv.b", "cnn.group3.conv.w", "cnn.group3.bn.gamma"})
        CHECK(store.has(name));
    for (const char* name : {"cnn.hpf.w", "cnn.group1.bn.rmean", "cnn.group2.bn.rvar", "cnn.group3.bn.rmean"})
        CHECK(store.has(name));

    CHECK(store.get("cnn.group1.conv.w").node->value.shape() == Shape{8, 1, 5, 5});
    CHECK(store.get("cnn.group2.conv.w").node->value.shape() == Shape{16, 8, 5, 5});
    CHECK(store.get("cnn.group3.conv.w").node->value.shape() == Shape{32, 16, 1, 1});
    CHECK(store.get("cnn.group3.bn.gamma").node->value.shape() == Shape{32});

    // init bound: |w| <= 1/sqrt(fan_in) = 1/5 for the 1x5x5 first conv
    const auto& w1 = store.get("cnn.group1.conv.w").node->value;
    float peak = 0;
    for (std::int64_t i = 0; i < w1.numel(); ++i) peak = std::max(peak, std::abs(w1[i]));
    CHECK(peak <= 0.2f);
    CHECK(peak > 0.01f); // and they are not all zero
    // biases start at zero
    CHECK(store.get("cnn.group1.conv.b").node->value[0] == 0.0f);
    CHECK(store.get("cnn.group1.bn.gamma").node->value[3] == 1.0f);
}

TEST_CASE("baseline classifier emits probability rows") {
    auto config = make_config(2, 32, 32);
    auto store = seeded_params(config);
    std::mt19937_64 gen(10);
    add_linear_params(store, "fc", config.output_dim(), 2, gen);

    NoGradGuard guard;
    auto patches = make_const(rand_tensor<float>(Shape{5, 1, 32, 32}, 11, 0, 255));
    auto probs = cnn_baseline_forward(store, config, patches, Mode::Eval);
    REQUIRE(probs->value.shape() == Shape{5, 2});
    for (std::int64_t i = 0; i < 5; ++i) {
        CHECK(probs->value.at(i, 0) + probs->value.at(i, 1) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(probs->value.at(i, 0) >= 0.0f);
    }
}

TEST_CASE("zero-initialized classification layer is indifferent") {
    auto config = make_config(1, 16, 16);
    auto store = seeded_params(config);
    store.add_parameter("fc.w", Tensor<float>(Shape{config.output_dim(), 2}));
    store.add_parameter("fc.b", Tensor<float>(Shape{2}));

    NoGradGuard guard;
    auto patches = make_const(rand_tensor<float>(Shape{3, 1, 16, 16}, 12, 0, 255));
    auto probs = cnn_baseline_forward(store, config, patches, Mode::Eval);
    for (std::int64_t i = 0; i < 3; ++i) {
        CHECK(probs->value.at(i, 0) == doctest::Approx(0.5));
        CHECK(probs->value.at(i, 1) == doctest::Approx(0.5));
    }
}

TEST_CASE("full single-group pipeline passes a 64-bit gradient check") {
    auto config = make_config(1, 8, 8);
    for (Mode mode : {Mode::Train, Mode::Eval}) {
        // train forwards update the running statistics in place, so each mode
        // gets a fresh store
        ParamStore<double> store;
        std::mt19937_64 gen(13);
        add_cnn_params(store, config, gen);
        testutil::soften_abs_kink(store, "cnn.group1.conv", 1.0, 8.0);
        auto patches = store.add_parameter("patches", rand_tensor<double>(Shape{3, 1, 8, 8}, 14, 0, 2));
        testutil::warm_running_stats([&] { return extract_features(store, config, patches, Mode::Train); });

        const auto report = check_gradients(
            store, [&] { return weighted_sum(extract_features(store, config, patches, mode), 15); }, 1e-5);
        INFO("mode=", std::string(mode == Mode::Train ? "train" : "eval"), " worst=", report.worst_param, "[",
             report.worst_index, "] analytic=", report.analytic, " numeric=", report.numeric);
        CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("two-group pipeline with classifier passes a 64-bit gradient check") {
    auto config = make_config(2, 13, 13); // minimum extent exercising the local pool
    ParamStore<double> store;
    std::mt19937_64 gen(16);
    add_cnn_params(store, config, gen);
    add_linear_params(store, "fc", config.output_dim(), 2, gen);
    testutil::soften_abs_kink(store, "cnn.group1.conv", 1.0, 8.0);
    auto patches = store.add_parameter("patches", rand_tensor<double>(Shape{2, 1, 13, 13}, 17, 0, 2));

    const std::vector<int> labels = {1, 0};
    const auto report = check_gradients(
        store, [&] { return softmax_cross_entropy(cnn_baseline_logits(store, config, patches, Mode::Train), labels); },
        1e-5);
    INFO("worst=", report.worst_param, "[", report.worst_index, "] analytic=", report.analytic,
         " numeric=", report.numeric);
    CHECK(report.max_rel_error < 1e-4);
}
