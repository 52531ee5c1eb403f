#include <gtest/gtest.h>

#include "support.hpp"

using namespace coregd;
using ad::Matrix;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
    return m;
}

EngineConfig small_config(int hidden = 8) {
    EngineConfig cfg;
    cfg.hidden = hidden;
    return cfg;
}

Tensor constant(const Matrix& m) { return Tensor::constant(m); }

/// Direct per-edge evaluation of the aggregated message.
Matrix naive_aggregate(const nn::Mlp& message, const Matrix& h, const MessageEdges& edges) {
    Matrix out = Matrix::Zero(h.rows(), message.layers.back().weight.cols());
    ad::NoGradGuard guard;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        NodeId v = (*edges.dst)[i], w = (*edges.src)[i];
        Matrix pair(1, 2 * h.cols());
        pair << h.row(v), h.row(w);
        out.row(v) += message(constant(pair)).value();
    }
    return out;
}

} // namespace

TEST(ConvStep, NoEdgesIsGruOfZero) {
    Model model(small_config(), 1);
    Rng rng(2);
    Matrix h = random_matrix(4, 8, rng);
    auto edges = make_message_edges(4, {}, {});
    Matrix expected = model.conv_e().gru(constant(Matrix::Zero(4, 8)), constant(h)).value();
    EXPECT_EQ(conv_step(edges, constant(h), model.conv_e()).value(), expected);
}

TEST(ConvStep, SymmetricPairStaysEqual) {
    Model model(small_config(), 3);
    Rng rng(4);
    Matrix row = random_matrix(1, 8, rng);
    Matrix h(2, 8);
    h << row, row;
    Matrix out = conv_step(make_message_edges(make_path(2)), constant(h), model.conv_e()).value();
    EXPECT_EQ(Matrix(out.row(0)), Matrix(out.row(1)));
    Matrix after = model.conv_E(make_path(2), constant(h)).value();
    EXPECT_EQ(Matrix(after.row(0)), Matrix(after.row(1)));
}

TEST(ConvStep, FusedMatchesPerEdge) {
    Model model(small_config(), 5);
    Rng rng(6);
    Graph g = testing_support::random_connected_graph(12, 10, rng);
    auto edges = make_message_edges(g);
    Matrix h = random_matrix(12, 8, rng);
    Matrix fused = aggregate_messages(model.conv_e().message, constant(h), edges).value();
    EXPECT_LT((fused - naive_aggregate(model.conv_e().message, h, edges)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConvStep, GradientMatchesFiniteDifferences) {
    for (ConvKind kind : {ConvKind::gru, ConvKind::gin}) {
        EngineConfig cfg = small_config(5);
        cfg.conv = kind;
        Model model(cfg, 7);
        Rng rng(8);
        Graph g = testing_support::random_connected_graph(6, 3, rng);
        auto edges = make_message_edges(g);
        Matrix h = random_matrix(6, 5, rng);
        Matrix proj = random_matrix(6, 5, rng);
        auto loss_at = [&](const Matrix& x) {
            return conv_step(edges, constant(x), model.conv_e()).value().cwiseProduct(proj).sum();
        };
        Tensor input = Tensor::parameter(h);
        model.params().zero_grad();
        ad::sum(ad::mul(conv_step(edges, input, model.conv_e()), constant(proj))).backward();
        EXPECT_LT(testing_support::relative_error(input.grad(), testing_support::numeric_gradient(loss_at, h)), 1e-5)
            << to_string(kind);
        for (auto& e : model.params().entries()) {
            if (e.name.rfind("conv_e.", 0) != 0) continue;
            Matrix keep = e.param.value();
            auto by_param = [&](const Matrix& w) {
                e.param.mutable_value() = w;
                double v = loss_at(h);
                e.param.mutable_value() = keep;
                return v;
            };
            Matrix numeric = testing_support::numeric_gradient(by_param, keep);
            ASSERT_TRUE(e.param.has_grad()) << e.name;
            EXPECT_LT(testing_support::relative_error(e.param.grad(), numeric), 1e-5) << e.name;
        }
    }
}

TEST(GinConv, IdentityUpdateWithoutEdges) {
    EngineConfig cfg = small_config(4);
    cfg.conv = ConvKind::gin;
    Model model(cfg, 9);
    for (auto& e : model.params().entries()) {
        if (e.name.rfind("conv_e.update", 0) != 0) continue;
        if (e.name.find("weight") != std::string::npos) e.param.mutable_value() = Matrix::Identity(4, 4);
        else e.param.mutable_value().setZero();
    }
    Rng rng(10);
    Matrix h = random_matrix(5, 4, rng).cwiseAbs();
    Matrix out = gin_conv_step(make_message_edges(5, {}, {}), constant(h), model.conv_e()).value();
    EXPECT_LT((out - h).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(gin_conv_step(make_message_edges(5, {}, {}), constant(h), Model(small_config(4), 1).conv_e()),
                 InputError);
}

TEST(GinConv, ZeroMessageIsDegreeIndependent) {
    EngineConfig cfg = small_config(4);
    cfg.conv = ConvKind::gin;
    Model model(cfg, 11);
    for (auto& e : model.params().entries())
        if (e.name.rfind("conv_e.message", 0) == 0) e.param.mutable_value().setZero();
    model.params().get("conv_e.epsilon").mutable_value()(0, 0) = 0.3;
    Rng rng(12);
    Matrix h = random_matrix(6, 4, rng);
    Matrix on_graph = gin_conv_step(make_message_edges(make_cycle(6)), constant(h), model.conv_e()).value();
    Matrix alone = gin_conv_step(make_message_edges(6, {}, {}), constant(h), model.conv_e()).value();
    Matrix direct = model.conv_e().update(constant(1.3 * h)).value();
    EXPECT_LT((on_graph - alone).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((on_graph - direct).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ConvE, TwoStepsOfOneParameterSet) {
    Model model(small_config(), 13);
    Rng rng(14);
    Graph g = make_grid(3, 3);
    auto edges = make_message_edges(g);
    Tensor h = constant(random_matrix(9, 8, rng));
    Matrix manual = conv_step(edges, conv_step(edges, h, model.conv_e()), model.conv_e()).value();
    EXPECT_EQ(model.conv_E(g, h).value(), manual);

    EngineConfig distinct = small_config();
    distinct.distinct_conv_e_layers = true;
    Model two(distinct, 13);
    EXPECT_TRUE(two.params().contains("conv_e2.message.l0.weight"));
    EXPECT_FALSE(model.params().contains("conv_e2.message.l0.weight"));
}

TEST(ConvE, ReachesExactlyTwoHops) {
    Model model(small_config(), 15);
    Rng rng(16);
    Graph g = make_path(10);
    Matrix h = random_matrix(10, 8, rng);
    Matrix base = model.conv_E(g, constant(h)).value();
    Matrix bumped = h;
    bumped.row(4).array() += 0.5;
    Matrix moved = model.conv_E(g, constant(bumped)).value();
    for (NodeId v = 0; v < 10; ++v) {
        bool changed = Matrix(moved.row(v)) != Matrix(base.row(v));
        EXPECT_EQ(changed, std::abs(v - 4) <= 2) << "node " << v;
    }
}

TEST(LayoutOptimization, ZeroRoundsIsConvE) {
    Model model(small_config(), 17);
    Rng rng(18);
    Graph g = make_delaunay(20, 3);
    Tensor h = constant(random_matrix(20, 8, rng));
    EXPECT_EQ(layout_optimization(g, h, 0, model, RewiringConfig{}).value(), model.conv_E(g, h).value());
    EXPECT_THROW(layout_optimization(g, h, -1, model, RewiringConfig{}), InputError);
}

TEST(LayoutOptimization, NoRewiringIsTwoConvE) {
    Model model(small_config(), 19);
    Rng rng(20);
    Graph g = make_delaunay(20, 4);
    Tensor h = constant(random_matrix(20, 8, rng));
    RewiringConfig none;
    none.method = RewiringMethod::none;
    EXPECT_EQ(layout_optimization(g, h, 1, model, none).value(), model.conv_E(g, model.conv_E(g, h)).value());
}

TEST(LayoutOptimization, ManualLoopAndObserver) {
    Model model(small_config(), 21);
    Rng rng(22);
    Graph g = make_delaunay(30, 5);
    Tensor h = constant(random_matrix(30, 8, rng));
    RewiringConfig knn;
    Tensor state = h;
    for (int i = 0; i < 2; ++i) {
        state = model.conv_E(g, state);
        RowMatrix pos = model.decode(state).value();
        state = conv_step(make_message_edges(30, knn_rewire(pos, knn.k)), state, model.conv_r());
    }
    Matrix expected = model.conv_E(g, state).value();
    std::vector<int> seen;
    Matrix got = layout_optimization(g, h, 2, model, knn, [&](int r, const Tensor&) { seen.push_back(r); }).value();
    EXPECT_EQ(got, expected);
    EXPECT_EQ(seen, (std::vector<int>{1, 2}));
}

TEST(LayoutOptimization, Deterministic) {
    Rng rng(23);
    Graph g = make_delaunay(40, 6);
    Matrix h = random_matrix(40, 8, rng);
    for (auto method : {RewiringMethod::knn, RewiringMethod::delaunay, RewiringMethod::radius}) {
        RewiringConfig cfg;
        cfg.method = method;
        Model a(small_config(), 24), b(small_config(), 24);
        EXPECT_EQ(layout_optimization(g, constant(h), 3, a, cfg).value(),
                  layout_optimization(g, constant(h), 3, b, cfg).value());
    }
}

TEST(Decode, RangeAndZeroWeights) {
    Model model(small_config(), 25);
    Rng rng(26);
    Tensor h = constant(random_matrix(7, 8, rng) * 3.0);
    Layout l = decode_layout(model, h);
    EXPECT_EQ(l.size(), 7);
    EXPECT_EQ(l.dim(), 2);
    EXPECT_GT(l.coords.minCoeff(), 0.0);
    EXPECT_LT(l.coords.maxCoeff(), 1.0);
    for (auto& e : model.params().entries())
        if (e.name.rfind("decoder", 0) == 0) e.param.mutable_value().setZero();
    EXPECT_EQ(decode_layout(model, h).coords, Matrix::Constant(7, 2, 0.5));
}

TEST(Forward, SingleNode) {
    Model model(small_config(), 27);
    Graph one = build_graph(1, std::vector<Edge>{});
    Layout l = core_gd_forward(one, model, 3);
    ASSERT_EQ(l.size(), 1);
    EXPECT_TRUE(l.coords.allFinite());
    EXPECT_EQ(scale_invariant_stress(one, l, all_pairs_distances(one)).scale_invariant_stress, 0.0);
}

TEST(Forward, SmallGraphIgnoresHierarchyFlag) {
    Model model(small_config(), 28);
    Graph g = make_cycle(15);
    ForwardOptions flat;
    flat.use_hierarchy = false;
    EXPECT_EQ(core_gd_forward(g, model, 4).coords, core_gd_forward(g, model, 4, flat).coords);
}

TEST(Forward, DeterministicAndSeeded) {
    Model model(small_config(), 29);
    Graph g = make_delaunay(120, 7);
    Layout a = core_gd_forward(g, model, 5);
    EXPECT_EQ(a.coords, core_gd_forward(g, model, 5).coords);
    EXPECT_NE(a.coords, core_gd_forward(g, model, 6).coords);
    EXPECT_GT(hierarchy_for(g, model.config()).levels(), 1u);
    EXPECT_TRUE(a.coords.allFinite());
    EXPECT_THROW(core_gd_forward(build_graph(3, {{0, 1}}), model, 1), DisconnectedGraphError);
}

TEST(Forward, PermutationEquivariant) {
    Model model(small_config(), 30);
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        Graph g = testing_support::random_connected_graph(10, 6, rng);
        std::vector<NodeId> perm(10);
        std::iota(perm.begin(), perm.end(), 0);
        shuffle_in_place(perm, rng);
        std::vector<Edge> relabeled;
        for (auto [u, v] : g.edges()) relabeled.push_back({perm[u], perm[v]});
        Graph pg = build_graph(10, relabeled);
        Matrix h = random_matrix(10, 8, rng);
        Matrix ph(10, 8);
        for (NodeId i = 0; i < 10; ++i) ph.row(perm[i]) = h.row(i);
        Matrix out = layout_optimization(g, constant(h), 3, model, RewiringConfig{}).value();
        Matrix pout = layout_optimization(pg, constant(ph), 3, model, RewiringConfig{}).value();
        for (NodeId i = 0; i < 10; ++i)
            EXPECT_LT((pout.row(perm[i]) - out.row(i)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Forward, EndToEndGradient) {
    EngineConfig cfg = small_config(6);
    cfg.features.n_lap = 4;
    cfg.features.n_beacons = 1;
    cfg.features.enc_per_beacon = 2;
    cfg.rewiring.k = 3;
    Model model(cfg, 32);
    Graph g = make_delaunay(8, 8);
    auto dist = all_pairs_distances(g);
    Tensor feats = constant(assemble_initial_features(g, cfg.features, 9));
    auto loss = [&] {
        Tensor h = layout_optimization(g, model.encode(feats), 2, model, cfg.rewiring);
        return stress_loss(model.decode(h), dist);
    };
    model.params().zero_grad();
    loss().backward();
    for (auto& e : model.params().entries()) {
        Matrix keep = e.param.value();
        auto at = [&](const Matrix& w) {
            e.param.mutable_value() = w;
            double v = loss().item();
            e.param.mutable_value() = keep;
            return v;
        };
        Matrix numeric = testing_support::numeric_gradient(at, keep);
        Matrix analytic = e.param.has_grad() ? e.param.grad() : Matrix::Zero(keep.rows(), keep.cols());
        EXPECT_LT(testing_support::relative_error(analytic, numeric, 1e-6), 1e-4) << e.name;
    }
}
