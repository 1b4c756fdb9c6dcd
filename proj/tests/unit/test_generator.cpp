#include "fslab/datagen/datagen.hpp"
#include "fslab/generator/generator.hpp"
#include "fslab/nn/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace fslab;
using namespace fslab::generator;

namespace {

GeneratorConfig tiny_config(Conditioning c = Conditioning::fwlc)
{
    GeneratorConfig g;
    g.layers = 2;
    g.hidden = 32;
    g.ffn = 64;
    g.heads = 4;
    g.pose_embed = 16;
    g.letter_embed = 16;
    g.diffusion_steps = 10;
    g.dropout = 0.0;
    g.conditioning = c;
    return g;
}

Condition condition_for(const std::string& word, const Charset& cs, int repeat)
{
    Condition c;
    for (char ch : word) {
        c.word_letters.push_back(*cs.id_of(ch));
        for (int r = 0; r < repeat; ++r) c.frame_letters.push_back(*cs.id_of(ch));
    }
    return c;
}

}  // namespace

TEST_CASE("cosine schedule")
{
    const auto s = cosine_schedule(50);
    REQUIRE(s.alphas_bar.size() == 51);
    CHECK(s.at(0) == 1.0);
    for (int t = 0; t < 50; ++t) CHECK(s.at(t + 1) < s.at(t));
    for (double a : s.alphas_bar) {
        CHECK(a > 0.0);
        CHECK(a <= 1.0);
    }
    CHECK(s.at(50) < 1e-3);
    const double f0 = std::pow(std::cos(0.008 / 1.008 * M_PI / 2.0), 2);
    const double f_half = std::pow(std::cos((0.5 + 0.008) / 1.008 * M_PI / 2.0), 2);
    CHECK(s.at(25) == doctest::Approx(f_half / f0).epsilon(1e-12));
}

TEST_CASE("forward noise limits")
{
    Rng rng = make_rng(1, "fwd_noise");
    const auto s = cosine_schedule(50);
    const Matrix x0 = standard_normal(4, 63, rng), noise = standard_normal(4, 63, rng);
    CHECK((forward_noise(x0, s.at(0), noise) - x0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((forward_noise(x0, s.at(50), noise) - noise).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("forward noise energy")
{
    Rng rng = make_rng(2, "energy");
    const auto s = cosine_schedule(50);
    const Matrix x0 = standard_normal(1, 63, rng) * 0.3;
    for (int t : {5, 25, 45}) {
        const double ab = s.at(t);
        double mean = 0.0;
        for (int k = 0; k < 10000; ++k) mean += forward_noise(x0, ab, standard_normal(1, 63, rng)).squaredNorm();
        mean /= 10000.0;
        const double expected = ab * x0.squaredNorm() + (1.0 - ab) * 63.0;
        CHECK(mean == doctest::Approx(expected).epsilon(0.05));
    }
}

TEST_CASE("reverse step with a perfect predictor")
{
    Rng rng = make_rng(3, "oracle");
    const auto s = cosine_schedule(50);
    const Matrix x0 = standard_normal(5, 63, rng) * 0.2;
    const Matrix noise = standard_normal(5, 63, rng);
    for (int t = 1; t <= 50; ++t) {
        const Matrix x_t = forward_noise(x0, s.at(t), noise);
        CHECK((implied_noise(x_t, x0, s.at(t)) - noise).cwiseAbs().maxCoeff() < 1e-5);
        const Matrix prev = ddim_step(x_t, x0, s, t);
        CHECK((prev - forward_noise(x0, s.at(t - 1), noise)).cwiseAbs().maxCoeff() < 1e-5);
    }
    CHECK((ddim_step(forward_noise(x0, s.at(1), noise), x0, s, 1) - x0).cwiseAbs().maxCoeff() < 1e-5);

    Matrix x = forward_noise(x0, s.at(50), noise);
    for (int t = 50; t >= 1; --t) x = ddim_step(x, x0, s, t);
    CHECK((x - x0).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("config checks")
{
    GeneratorConfig g = tiny_config();
    CHECK_NOTHROW(g.validate());
    g.letter_embed = 8;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    const auto j = to_json(tiny_config(Conditioning::lc));
    CHECK(j["conditioning"] == "lc");
    CHECK(to_json(generator_config_from_json(j)) == j);
    auto bad = j;
    bad["conditioning"] = "wc";
    CHECK_THROWS_AS(generator_config_from_json(bad), ConfigError);
}

TEST_CASE("clean prediction contract")
{
    const Charset cs;
    const Generator gen(tiny_config(), cs, 4);
    Rng rng = make_rng(4, "predict");
    const Condition c = condition_for("abc", cs, 3);
    const Matrix x = standard_normal(9, 63, rng);
    const Matrix a = gen.predict_clean(x, 5, c);
    CHECK(a.rows() == 9);
    CHECK(a.cols() == 63);
    CHECK(a == gen.predict_clean(x, 5, c));
    CHECK(a != gen.predict_clean(x, 6, c));
    CHECK_THROWS_AS(gen.predict_clean(standard_normal(8, 63, rng), 5, c), DataError);
    Condition wrong = c;
    wrong.frame_letters[0] = cs.end_id();
    CHECK_THROWS_AS(gen.predict_clean(x, 5, wrong), DataError);
}

TEST_CASE("frame letters change the prediction only in FWLC mode")
{
    const Charset cs;
    Rng rng = make_rng(5, "cond");
    const Matrix x = standard_normal(6, 63, rng);
    Condition c1 = condition_for("ab", cs, 3), c2 = c1;
    std::swap(c2.frame_letters[0], c2.frame_letters[5]);
    const Generator fw(tiny_config(), cs, 5);
    CHECK(fw.predict_clean(x, 3, c1) != fw.predict_clean(x, 3, c2));
    const Generator lc(tiny_config(Conditioning::lc), cs, 5);
    CHECK(lc.predict_clean(x, 3, c1) == lc.predict_clean(x, 3, c2));
    Condition c3 = c1;
    c3.word_letters = {*cs.id_of('b'), *cs.id_of('a')};
    CHECK(lc.predict_clean(x, 3, c1) != lc.predict_clean(x, 3, c3));
}

TEST_CASE("LC prefix tokens")
{
    const Charset cs;
    const Generator lc(tiny_config(Conditioning::lc), cs, 6);
    const std::vector<int> word{1, 2, 3, 4};
    nn::NoGradGuard guard;
    const Matrix p = lc.lc_condition(word).value();
    CHECK(p.rows() == 4);
    CHECK(p.cols() == 32);
    CHECK(p.leftCols(16).isZero());
    CHECK(p == lc.lc_condition(word).value());
}

TEST_CASE("FWLC and LC parameter counts agree")
{
    const Charset cs;
    const Generator fw(GeneratorConfig{}, cs, 7);
    GeneratorConfig lc_cfg;
    lc_cfg.conditioning = Conditioning::lc;
    const Generator lc(lc_cfg, cs, 7);
    const double a = static_cast<double>(fw.params().count()), b = static_cast<double>(lc.params().count());
    CHECK(std::abs(a - b) / a <= 0.01);
}

TEST_CASE("sampling")
{
    const Charset cs;
    const Generator gen(tiny_config(), cs, 8);
    const Condition c = condition_for("hi", cs, 4);
    Rng r1(11), r2(11);
    const Matrix a = gen.sample(c, r1), b = gen.sample(c, r2);
    CHECK(a == b);
    CHECK(a.rows() == 8);
    CHECK(a.cols() == 63);
    CHECK(a.allFinite());
    Condition empty;
    CHECK_THROWS_AS(gen.sample(empty, r1), DataError);
}

TEST_CASE("collapse frame letters")
{
    const Charset cs;
    const int a = *cs.id_of('a'), b = *cs.id_of('b'), phi = cs.blank_id();
    const std::vector<int> f{a, a, phi, b, b, phi, phi, a};
    CHECK(collapse_frame_letters(f, cs) == std::vector<int>{a, b, a});
}

TEST_CASE("training overfits one sample")
{
    const Charset cs;
    GeneratorConfig cfg = tiny_config();
    cfg.lr = 2e-3;
    cfg.batch_size = 1;
    cfg.epochs = 200;
    Generator gen(cfg, cs, 9);
    const datagen::TemplateBank bank(cs, 9, {3, 1, 0.01});
    Rng rng = make_rng(9, "gen_train");
    const auto seq = datagen::synth_sequence("abc", bank, rng);
    const std::vector<GeneratorExample> data{make_generator_example(seq, *seq.frame_labels, cs)};
    CHECK(data[0].x0.cols() == 63);
    CHECK(data[0].cond.word_letters.size() == 3);
    const auto losses = train_generator(gen, data, 10);
    REQUIRE(losses.size() == 200);
    double head = 0.0, tail = 0.0;
    for (int k = 0; k < 10; ++k) {
        head += losses[static_cast<std::size_t>(k)];
        tail += losses[losses.size() - 1 - static_cast<std::size_t>(k)];
    }
    CHECK(tail < 0.1 * head);

    const auto path = std::filesystem::temp_directory_path() / "fslab_test_generator.ckpt";
    gen.save(path);
    const Generator back = Generator::load(path, cs);
    Rng r1(3), r2(3);
    CHECK(back.sample(data[0].cond, r1) == gen.sample(data[0].cond, r2));
    std::filesystem::remove(path);

    const auto sampler = make_sampler(gen);
    Rng r3(4);
    const Matrix out = sampler(data[0].cond.frame_letters, r3);
    CHECK(out.rows() == static_cast<Eigen::Index>(data[0].cond.frame_letters.size()));
}
