#include <gtest/gtest.h>

#include "support.hpp"

using namespace coregd;
using ad::Matrix;

namespace {

EngineConfig tiny_engine(int hidden = 8) {
    EngineConfig cfg;
    cfg.hidden = hidden;
    return cfg;
}

TrainConfig quick_train(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg.rounds_mean = 2;
    cfg.lr = 5e-3;
    cfg.buffer_capacity = 32;
    return cfg;
}

/// Reference loss: scale-invariant stress / n^2 through the metrics module.
double reference_loss(const Matrix& positions, const DistanceMatrix& d) {
    double n = static_cast<double>(d.size());
    return scale_invariant_stress(Layout(positions), d).scale_invariant_stress / (n * n);
}

} // namespace

TEST(SampleRounds, Distribution) {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_rounds(5, 0.0, rng), 5);
    double total = 0.0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        int r = sample_rounds(5, 1.0, rng);
        EXPECT_GE(r, 1);
        total += r;
    }
    EXPECT_GE(total / draws, 4.9);
    EXPECT_LE(total / draws, 5.1);
    for (int i = 0; i < 200; ++i) EXPECT_GE(sample_rounds(1, 3.0, rng), 1);
    EXPECT_THROW(sample_rounds(0, 1.0, rng), InputError);
}

TEST(StressLoss, MatchesMetrics) {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        Graph g = testing_support::random_connected_graph(15, 10, rng);
        auto d = all_pairs_distances(g);
        Matrix p = testing_support::random_points(15, 2, rng);
        double n2 = 225.0;
        EXPECT_NEAR(stress_loss(Tensor::constant(p), d).item() / n2, reference_loss(p, d), 1e-12);
    }
    auto d3 = all_pairs_distances(make_path(3));
    Matrix line(3, 2);
    line << 0, 0, 1, 0, 2, 0;
    EXPECT_NEAR(stress_loss(Tensor::constant(line), d3).item(), 0.0, 1e-15);
}

TEST(StressLoss, GradientMatchesFiniteDifferences) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Graph g = testing_support::random_connected_graph(10, 6, rng);
        auto d = all_pairs_distances(g);
        Matrix p = testing_support::random_points(10, 2 + trial % 2, rng);
        Tensor x = Tensor::parameter(p);
        stress_loss(x, d).backward();
        auto f = [&](const RowMatrix& q) { return stress_loss(Tensor::constant(q), d).item(); };
        EXPECT_LT(testing_support::relative_error(x.grad(), testing_support::numeric_gradient(f, p)), 1e-6);
    }
}

TEST(StressLoss, FlooredDenominatorStaysFinite) {
    auto d = all_pairs_distances(make_path(4));
    Matrix p = Matrix::Zero(4, 2);
    p(3, 0) = 1e-9; // B ~ 1e-18, below the floor
    Tensor x = Tensor::parameter(p);
    Tensor loss = stress_loss(x, d);
    EXPECT_TRUE(std::isfinite(loss.item()));
    loss.backward();
    EXPECT_TRUE(x.grad().allFinite());
    auto f = [&](const RowMatrix& q) { return stress_loss(Tensor::constant(q), d).item(); };
    EXPECT_LT(testing_support::relative_error(x.grad(), testing_support::numeric_gradient(f, p, 1e-14)), 1e-4);

    Tensor collapsed = Tensor::parameter(Matrix::Constant(4, 2, 0.5));
    Tensor l2 = stress_loss(collapsed, d);
    double expected = 0.0;
    for (NodeId u = 0; u < 4; ++u)
        for (NodeId v = 0; v < 4; ++v)
            if (u != v) expected += 1.0;
    EXPECT_DOUBLE_EQ(l2.item(), expected);
    l2.backward();
    EXPECT_EQ(collapsed.grad().cwiseAbs().maxCoeff(), 0.0);
}

TEST(BatchLoss, MeanOverItems) {
    Model model(tiny_engine(), 4);
    std::vector<PreparedGraph> data{prepare_graph(make_cycle(6), model.config())};
    Rng rng(5);
    Matrix h = testing_support::random_points(6, 8, rng);
    TrainItem item{0, 0, Tensor::constant(h)};
    double one = batch_loss(model, data, {item}).item();
    EXPECT_NEAR(batch_loss(model, data, {item, item}).item(), one, 1e-15);
    Matrix pos = model.decode(Tensor::constant(h)).value();
    EXPECT_NEAR(one, reference_loss(pos, data[0].distances[0]), 1e-10);
    EXPECT_THROW(batch_loss(model, data, {}), InputError);
}

TEST(ReplayBuffer, CapacityAndSampling) {
    ReplayBuffer buffer(5, 6);
    Rng rng(7);
    for (std::size_t i = 0; i < 40; ++i) {
        TrainItem item{i, 0, Tensor::constant(Matrix::Constant(2, 3, static_cast<double>(i)))};
        EXPECT_TRUE(buffer.offer(item, 1.0));
        EXPECT_LE(buffer.size(), 5u);
    }
    EXPECT_EQ(buffer.size(), 5u);
    EXPECT_FALSE(buffer.offer({0, 0, Tensor::constant(Matrix::Zero(2, 3))}, 0.0));
    auto sample = buffer.sample(3);
    ASSERT_EQ(sample.size(), 3u);
    std::set<std::size_t> graphs;
    for (const auto& s : sample) {
        graphs.insert(s.graph);
        EXPECT_FALSE(s.h.requires_grad());
        EXPECT_EQ(s.h.value()(0, 0), static_cast<double>(s.graph));
    }
    EXPECT_EQ(graphs.size(), 3u);
    EXPECT_EQ(buffer.sample(50).size(), 5u);

    ReplayBuffer none(0);
    EXPECT_FALSE(none.offer({0, 0, Tensor::constant(Matrix::Zero(1, 1))}, 1.0));
    EXPECT_TRUE(none.sample(4).empty());
}

TEST(TrainBatch, LevelsFollowUncoarsenProbability) {
    Model model(tiny_engine(), 8);
    std::vector<PreparedGraph> data{prepare_graph(make_delaunay(80, 9), model.config())};
    ASSERT_GT(data[0].levels(), 2u);
    TrainConfig cfg = quick_train(1);
    TrainState state;
    state.lr = cfg.lr;
    Rng rng(10);
    ReplayBuffer buffer(8, 11);

    cfg.p_uncoarsen = 0.0;
    std::vector<TrainItem> batch{fresh_item(model, data, 0, 1)};
    for (int i = 0; i < 3; ++i) train_batch(batch, model, data, buffer, cfg, state, rng, false);
    EXPECT_EQ(batch[0].level, 0u);
    EXPECT_FALSE(batch[0].h.requires_grad());

    cfg.p_uncoarsen = 1.0;
    const std::size_t finest = data[0].levels() - 1;
    for (std::size_t expect = 1; expect <= finest + 2; ++expect) {
        train_batch(batch, model, data, buffer, cfg, state, rng, false);
        EXPECT_EQ(batch[0].level, std::min(expect, finest));
        EXPECT_EQ(batch[0].h.rows(), data[0].hierarchy.graphs[batch[0].level].num_nodes());
    }
    EXPECT_EQ(state.step, static_cast<std::int64_t>(3 + finest + 2));
    for (std::size_t i = 0; i < buffer.size(); ++i)
        EXPECT_EQ(buffer[i].h.rows(), data[0].hierarchy.graphs[buffer[i].level].num_nodes());
}

TEST(TrainBatch, LossFallsOnToySet) {
    // Calibrated once: the last five batches average 0.55x the first five.
    EngineConfig ecfg;
    Model model(ecfg, 1);
    std::vector<PreparedGraph> data;
    for (int i = 0; i < 10; ++i) {
        data.push_back(prepare_graph(make_path(5), ecfg));
        data.push_back(prepare_graph(make_cycle(6), ecfg));
    }
    TrainConfig cfg;
    cfg.lr = 1e-3;
    TrainState state;
    state.lr = cfg.lr;
    Rng rng(2);
    ReplayBuffer buffer(0);
    std::vector<double> losses;
    for (int b = 0; b < 50; ++b) {
        std::vector<TrainItem> batch;
        for (int j = 0; j < 4; ++j) {
            auto k = static_cast<std::uint64_t>(b * 4 + j);
            batch.push_back(fresh_item(model, data, k % 20, derive_seed(3, k)));
        }
        losses.push_back(train_batch(batch, model, data, buffer, cfg, state, rng, false));
    }
    double first = std::accumulate(losses.begin(), losses.begin() + 5, 0.0) / 5.0;
    double last = std::accumulate(losses.end() - 5, losses.end(), 0.0) / 5.0;
    EXPECT_LE(last, 0.7 * first) << "first " << first << " last " << last;
}

TEST(TrainLoop, RestoresBestValidationSnapshot) {
    std::vector<Graph> train{make_path(5), make_cycle(6)};
    std::vector<Graph> val{make_grid(2, 3)};
    Model model(tiny_engine(), 15);
    TrainConfig cfg = quick_train(8);
    cfg.seed = 16;
    auto result = train_loop(model, train, val, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : result.history) best = std::min(best, r.validation);
    EXPECT_DOUBLE_EQ(result.best_validation, best);
    EXPECT_NEAR(evaluate_model(model, val, derive_seed(cfg.seed, 3)), best, 1e-12);
}

TEST(TrainLoop, ZeroCapacityStillTrains) {
    std::vector<Graph> train{make_path(5), make_cycle(6), make_grid(3, 3)};
    Model model(tiny_engine(), 17);
    TrainConfig cfg = quick_train(3);
    cfg.buffer_capacity = 0;
    auto result = train_loop(model, train, {}, cfg);
    ASSERT_EQ(result.history.size(), 3u);
    for (const auto& r : result.history) {
        EXPECT_EQ(r.buffer_size, 0u);
        EXPECT_TRUE(std::isfinite(r.train_loss));
    }
}

TEST(TrainLoop, DeterministicUnderSeed) {
    std::vector<Graph> train{make_path(5), make_cycle(6), make_delaunay(30, 1)};
    auto run = [&](std::uint64_t seed) {
        Model model(tiny_engine(), 18);
        TrainConfig cfg = quick_train(4);
        cfg.seed = seed;
        std::vector<double> trace;
        for (const auto& r : train_loop(model, train, {}, cfg).history) trace.push_back(r.train_loss);
        return trace;
    };
    EXPECT_EQ(run(19), run(19));
    EXPECT_NE(run(19), run(20));
}

TEST(TrainLoop, Errors) {
    Model model(tiny_engine(), 21);
    EXPECT_THROW(train_loop(model, {}, {}, quick_train(1)), InputError);
    EXPECT_THROW(train_loop(model, {build_graph(3, {{0, 1}})}, {}, quick_train(1)), DisconnectedGraphError);
    TrainConfig bad = quick_train(1);
    bad.p_uncoarsen = 1.5;
    EXPECT_THROW(bad.validate(), InputError);
}
