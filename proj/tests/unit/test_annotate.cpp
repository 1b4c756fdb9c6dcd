#include "fslab/annotate/annotate.hpp"
#include "fslab/datagen/datagen.hpp"
#include "fslab/nn/tensor.hpp"

#include <doctest.h>

#include <filesystem>

using namespace fslab;
using namespace fslab::annotate;

TEST_CASE("claim threshold")
{
    const std::vector<double> row{0.6, 0.3, 0.05, 0.05};
    CHECK(claim_threshold(row) == doctest::Approx(0.5 * (0.3 + 0.05 + 0.05) / 3.0));
    const std::vector<double> longer{0.1, 0.5, 0.2, 0.4, 0.3, 0.0};
    CHECK(claim_threshold(longer) == doctest::Approx(0.5 * 0.3));
    const std::vector<double> shorter{0.7, 0.2, 0.1};
    CHECK(claim_threshold(shorter) == doctest::Approx(0.5 * 0.15));
    const std::vector<double> one{0.8};
    CHECK(claim_threshold(one) == doctest::Approx(0.4));
    Rng rng = make_rng(1, "theta");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 1; n < 12; ++n) {
        std::vector<double> r(static_cast<std::size_t>(n));
        for (auto& x : r) x = u(rng);
        CHECK(claim_threshold(r) > 0.0);
    }
}

TEST_CASE("coarse token labels")
{
    const Charset cs;
    const int a = *cs.id_of('a'), b = *cs.id_of('b'), phi = cs.blank_id();
    const std::vector<int> letters{a, b};
    const Matrix attn{{0.6, 0.3, 0.05, 0.05}, {0.05, 0.05, 0.3, 0.6}};
    CHECK(coarse_token_labels(attn, letters, cs) == std::vector<int>{a, a, b, b});

    const Matrix overlap{{0.6, 0.3, 0.05, 0.05}, {0.05, 0.3, 0.05, 0.6}};
    CHECK(coarse_token_labels(overlap, letters, cs)[1] == phi);

    const Matrix uniform{{0.25, 0.25, 0.25, 0.25}, {0.0, 0.0, 0.1, 0.9}};
    CHECK(coarse_token_labels(uniform, letters, cs) == std::vector<int>{a, a, phi, phi});

    const Matrix nobody{{0.0, 0.0, 1.0}};
    const std::vector<int> just_a{a};
    CHECK(coarse_token_labels(nobody, just_a, cs) == std::vector<int>{phi, phi, a});
}

TEST_CASE("labels split back per hand")
{
    const Charset cs;
    PoseSequence s;
    s.id = "x";
    s.word = "ab";
    s.tracks = {HandTrack{{0, Side::left}, 2, Matrix::Zero(3, 42)}, HandTrack{{0, Side::right}, 2, Matrix::Zero(3, 42)}};
    const auto tokens = assemble_tokens(s);
    const std::vector<int> token_labels{1, 2, 3, 4, 5, 6};
    const auto split = split_by_hand(token_labels, tokens);
    REQUIRE(split.size() == 2);
    CHECK(split[0].labels == std::vector<int>{1, 2, 3});
    CHECK(split[1].labels == std::vector<int>{4, 5, 6});
}

TEST_CASE("frame accuracy")
{
    CHECK(frame_accuracy({{1, 2, 3, 4}}, {{1, 2, 0, 4}}) == 0.75);
    CHECK_THROWS(frame_accuracy({{1, 2}}, {{1, 2, 3}}));
}

TEST_CASE("refiner classes")
{
    const Charset cs;
    RefinerConfig rc;
    rc.input = 8;
    rc.hidden = 8;
    const Refiner r(rc, cs, 1);
    CHECK(r.classes() == 33);
    CHECK(r.class_of(cs.blank_id()) == cs.start_id());
    CHECK(r.label_of(cs.start_id()) == cs.blank_id());
    CHECK(r.class_of(5) == 5);
    CHECK_THROWS(r.class_of(cs.end_id()));
}

TEST_CASE("refiner loss weights blanks")
{
    const Charset cs;
    RefinerConfig rc;
    rc.input = 4;
    rc.hidden = 8;
    rc.dropout = 0.0;
    const Refiner r(rc, cs, 2);
    Rng rng = make_rng(2, "refiner_loss");
    std::normal_distribution<double> n(0.0, 1.0);
    RefinerExample ex;
    ex.features = Matrix(5, 4);
    for (Eigen::Index i = 0; i < ex.features.size(); ++i) ex.features.data()[i] = n(rng);
    ex.labels.assign(5, cs.blank_id());
    nn::NoGradGuard guard;
    const double weighted = refiner_loss(r, std::span<const RefinerExample>(&ex, 1), {}).scalar();
    const std::vector<int> cls(5, r.blank_class());
    const double plain = nn::cross_entropy(r.forward(ex.features, {}), cls, -1).scalar();
    CHECK(weighted == doctest::Approx(0.1 * plain));

    RefinerExample padded = ex;
    padded.features.conservativeResize(7, 4);
    padded.features.bottomRows(2).setZero();
    padded.labels.push_back(cs.pad_id());
    padded.labels.push_back(cs.pad_id());
    CHECK(refiner_loss(r, std::span<const RefinerExample>(&padded, 1), {}).scalar() == doctest::Approx(weighted));

    RefinerExample empty;
    empty.features = Matrix(2, 4);
    empty.labels.assign(2, cs.pad_id());
    CHECK_THROWS(refiner_loss(r, std::span<const RefinerExample>(&empty, 1), {}));
}

TEST_CASE("refiner fits separable features")
{
    const Charset cs;
    RefinerConfig rc;
    rc.input = 6;
    rc.hidden = 32;
    rc.dropout = 0.0;
    rc.lr = 1e-2;
    rc.epochs = 150;
    rc.batch_size = 4;
    Refiner r(rc, cs, 3);
    // Each of four labels has its own one-hot feature direction.
    const std::vector<int> label_set{cs.blank_id(), *cs.id_of('a'), *cs.id_of('b'), *cs.id_of('c')};
    Rng rng = make_rng(3, "separable");
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<RefinerExample> data;
    for (int s = 0; s < 8; ++s) {
        RefinerExample ex;
        ex.features = Matrix::Zero(10, 6);
        for (int t = 0; t < 10; ++t) {
            const int k = static_cast<int>(rng() % label_set.size());
            ex.features(t, k) = 1.0;
            for (int c = 0; c < 6; ++c) ex.features(t, c) += noise(rng);
            ex.labels.push_back(label_set[static_cast<std::size_t>(k)]);
        }
        data.push_back(std::move(ex));
    }
    const auto losses = train_refiner(r, data, 4);
    CHECK(losses.back() < losses.front());
    int right = 0, total = 0;
    for (const auto& ex : data) {
        const auto pred = r.predict(ex.features);
        for (std::size_t t = 0; t < pred.size(); ++t) {
            right += pred[t] == ex.labels[t];
            ++total;
        }
        for (int p : pred) CHECK(p != cs.end_id());
    }
    CHECK(right == total);

    const auto path = std::filesystem::temp_directory_path() / "fslab_test_refiner.ckpt";
    r.save(path);
    const Refiner back = Refiner::load(path, cs);
    CHECK(back.predict(data[0].features) == r.predict(data[0].features));
    std::filesystem::remove(path);
}

TEST_CASE("annotation of a sequence covers every hand")
{
    const Charset cs;
    recognizer::RecognizerConfig rc;
    rc.enc_layers = 1;
    rc.dec_layers = 2;
    rc.hidden = 16;
    rc.ffn = 32;
    rc.heads = 2;
    rc.head_hidden = 16;
    const recognizer::Recognizer model(rc, cs, 5);
    const datagen::TemplateBank bank(cs, 5, {2, 1, 0.01});
    Rng rng = make_rng(5, "annotate_seq");
    const auto seq = datagen::add_distractor_hand(datagen::synth_sequence("abc", bank, rng), bank, rng, 2.0);
    const auto coarse = coarse_annotate_sequence(model, seq);
    REQUIRE(coarse.labels.size() == 2);
    for (const auto& l : coarse.labels) CHECK(static_cast<int>(l.labels.size()) == seq.frame_count());
    CHECK(coarse.of(seq.signing_hand).labels.size() == seq.frame_labels->labels.size());
    for (int id : coarse.token_labels) CHECK((cs.is_letter(id) || id == cs.blank_id()));

    RefinerConfig fc;
    fc.input = rc.hidden;
    fc.hidden = 8;
    const Refiner refiner(fc, cs, 6);
    const auto ex = make_refiner_example(model, seq);
    CHECK(ex.features.rows() == 2 * seq.frame_count());
    CHECK(ex.features.cols() == rc.hidden);
    const auto fine = refine_annotate(model, refiner, seq);
    CHECK(fine.labels.size() == 2);
    CHECK(fine.hands == coarse.hands);
}
