#include "fslab/core/random.hpp"
#include "fslab/nn/layers.hpp"
#include "fslab/nn/optim.hpp"
#include "fslab/nn/ops.hpp"
#include "checks.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace fslab;
using namespace fslab::nn;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// Worst relative error of d(f)/d(inputs) against central differences.
double gradcheck(std::vector<Var> inputs, const std::function<Var(const std::vector<Var>&)>& f)
{
    for (auto& v : inputs) v.zero_grad();
    backward(f(inputs));
    double worst = 0.0;
    const double h = 1e-5;
    for (auto& v : inputs) {
        Mat numeric(v.rows(), v.cols());
        NoGradGuard guard;
        for (Eigen::Index i = 0; i < v.value().size(); ++i) {
            double& x = v.mutable_value().data()[i];
            const double keep = x;
            x = keep + h;
            const double up = f(inputs).scalar();
            x = keep - h;
            const double down = f(inputs).scalar();
            x = keep;
            numeric.data()[i] = (up - down) / (2.0 * h);
        }
        worst = std::max(worst, testing::max_relative_error(v.grad(), numeric, 1e-5));
    }
    return worst;
}

// Scalar reduction whose gradient differs per entry, so swapped entries show.
Var weighted_sum(const Var& x)
{
    Mat target(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = std::sin(1.0 + static_cast<double>(i));
    return mse(x, target);
}

}  // namespace

TEST_CASE("elementwise and matrix op gradients")
{
    Rng rng = make_rng(1, "ops");
    const Var a = leaf(random_mat(rng, 3, 4)), b = leaf(random_mat(rng, 4, 2)), c = leaf(random_mat(rng, 3, 4));
    const Var row = leaf(random_mat(rng, 1, 4));
    CHECK(gradcheck({a, b}, [](auto& v) { return weighted_sum(matmul(v[0], v[1])); }) < 1e-5);
    CHECK(gradcheck({a, c}, [](auto& v) { return weighted_sum(add(v[0], v[1])); }) < 1e-5);
    CHECK(gradcheck({a, c}, [](auto& v) { return weighted_sum(sub(v[0], v[1])); }) < 1e-5);
    CHECK(gradcheck({a, row}, [](auto& v) { return weighted_sum(add_rowvec(v[0], v[1])); }) < 1e-5);
    CHECK(gradcheck({a}, [](auto& v) { return weighted_sum(gelu(v[0])); }) < 1e-5);
    CHECK(gradcheck({a}, [](auto& v) { return weighted_sum(silu(v[0])); }) < 1e-5);
    CHECK(gradcheck({a}, [](auto& v) { return weighted_sum(relu(v[0])); }) < 1e-5);
    CHECK(gradcheck({a}, [](auto& v) { return weighted_sum(scale(v[0], -2.5)); }) < 1e-5);
}

TEST_CASE("layer norm and linear gradients")
{
    Rng rng = make_rng(2, "ln");
    const Var x = leaf(random_mat(rng, 3, 5)), g = leaf(random_mat(rng, 1, 5)), be = leaf(random_mat(rng, 1, 5));
    const Var w = leaf(random_mat(rng, 5, 2)), bias = leaf(random_mat(rng, 1, 2));
    CHECK(gradcheck({x, g, be}, [](auto& v) { return weighted_sum(layer_norm(v[0], v[1], v[2])); }) < 1e-5);
    CHECK(gradcheck({x, w, bias}, [](auto& v) { return weighted_sum(linear(v[0], v[1], v[2])); }) < 1e-5);
}

TEST_CASE("row manipulation gradients")
{
    Rng rng = make_rng(3, "rows");
    const Var a = leaf(random_mat(rng, 4, 3)), b = leaf(random_mat(rng, 2, 3)), c = leaf(random_mat(rng, 4, 2));
    CHECK(gradcheck({a, c}, [](auto& v) { return weighted_sum(concat_cols(v[0], v[1])); }) < 1e-5);
    CHECK(gradcheck({a, b}, [](auto& v) {
              std::vector<Var> parts{v[0], v[1]};
              return weighted_sum(concat_rows(parts));
          }) < 1e-5);
    CHECK(gradcheck({a}, [](auto& v) { return weighted_sum(slice_rows(v[0], 1, 2)); }) < 1e-5);
    const std::vector<int> rows{3, 0, 3};
    CHECK(gradcheck({a}, [&](auto& v) { return weighted_sum(gather_rows(v[0], rows)); }) < 1e-5);
    const std::vector<int> ids{2, 0, 2};
    CHECK(gradcheck({a}, [&](auto& v) { return weighted_sum(embedding(v[0], ids)); }) < 1e-5);
}

TEST_CASE("loss op gradients")
{
    Rng rng = make_rng(4, "loss");
    const Var logits = leaf(random_mat(rng, 4, 6));
    const std::vector<int> targets{1, 5, 9, 0};
    CHECK(gradcheck({logits}, [&](auto& v) { return cross_entropy(v[0], targets, 9); }) < 1e-5);
    const std::vector<double> weights{0.1, 1, 1, 1, 1, 1};
    CHECK(gradcheck({logits}, [&](auto& v) { return cross_entropy(v[0], targets, 9, weights); }) < 1e-5);
    const Mat target = random_mat(rng, 4, 6);
    CHECK(gradcheck({logits}, [&](auto& v) { return mse(v[0], target); }) < 1e-5);
    CHECK(gradcheck({logits}, [](auto& v) { return mean(v[0]); }) < 1e-5);
}

TEST_CASE("cross-entropy divides by non-ignored rows")
{
    const std::vector<int> targets{0, 2, 2};
    const std::vector<double> weights{0.5, 1.0};
    NoGradGuard guard;
    const Var l = cross_entropy(constant(Mat::Zero(3, 2)), targets, 2, weights);
    CHECK(l.scalar() == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("attention gradients including probabilities")
{
    Rng rng = make_rng(5, "attn");
    const Var q = leaf(random_mat(rng, 5, 4)), k = leaf(random_mat(rng, 6, 4)), v = leaf(random_mat(rng, 6, 4));
    const std::vector<Segment> segs{{0, 2, 0, 4}, {2, 3, 4, 2}};
    CHECK(gradcheck({q, k, v}, [&](auto& x) {
              auto o = attention(x[0], x[1], x[2], 2, segs, false, 0.0, nullptr, false);
              return add(weighted_sum(o.context), scale(weighted_sum(o.probs), 0.7));
          }) < 1e-5);
    const std::vector<Segment> self{{0, 5, 0, 5}};
    const Var kv = leaf(random_mat(rng, 5, 4));
    CHECK(gradcheck({q, kv}, [&](auto& x) {
              auto o = attention(x[0], x[1], x[1], 2, self, true, 0.0, nullptr, false);
              return weighted_sum(o.context);
          }) < 1e-5);
}

TEST_CASE("attention rows are stochastic and respect segments")
{
    Rng rng = make_rng(6, "attn_rows");
    NoGradGuard guard;
    const Var q = constant(random_mat(rng, 5, 4)), k = constant(random_mat(rng, 6, 4));
    const std::vector<Segment> segs{{0, 2, 0, 4}, {2, 3, 4, 2}};
    const auto o = attention(q, k, k, 2, segs, false, 0.0, nullptr, false);
    for (int r = 0; r < 2; ++r) CHECK(o.probs.value().row(r).head(4).sum() == doctest::Approx(1.0));
    for (int r = 2; r < 5; ++r) {
        CHECK(o.probs.value().row(r).head(2).sum() == doctest::Approx(1.0));
        CHECK(o.probs.value().row(r).tail(o.probs.cols() - 2).isZero());
    }
    CHECK((o.probs.value().array() >= 0.0).all());
}

TEST_CASE("dropout is identity in eval mode and seeded in training")
{
    Rng rng = make_rng(7, "drop");
    const Mat x = random_mat(rng, 4, 4);
    NoGradGuard guard;
    CHECK(dropout(constant(x), 0.5, &rng, false).value() == x);
    Rng r1(3), r2(3);
    CHECK(dropout(constant(x), 0.5, &r1, true).value() == dropout(constant(x), 0.5, &r2, true).value());
}

TEST_CASE("adam reduces a quadratic")
{
    ParamList params;
    Var w = leaf(Mat::Constant(1, 3, 2.0));
    params.add("w", w);
    Adam adam(params, 0.1);
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 200; ++step) {
        params.zero_grad();
        Var loss = mse(w, Mat::Zero(1, 3));
        if (step == 0) first = loss.scalar();
        last = loss.scalar();
        backward(loss);
        adam.step();
    }
    CHECK(last < 1e-3 * first);
}
