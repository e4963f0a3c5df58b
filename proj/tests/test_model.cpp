#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "hgnn/model.hpp"
#include "hgnn/synthetic.hpp"
#include "oracles.hpp"

using namespace hgnn;

namespace {

const Matrix& value_of(const Model& m, const std::string& name) {
  for (const auto& p : m.parameters().all())
    if (p.name == name) return p.tensor.value();
  throw Error("no parameter " + name);
}

DesignConfig nc_config(const std::string& target) {
  DesignConfig cfg;
  cfg.task.kind = TaskKind::NodeClassification;
  cfg.task.target = target;
  cfg.hidden_dim = 8;
  cfg.seed = 5;
  return cfg;
}

// k parallel relations author->paper plus one paper->author relation.
HeteroGraph multi_relation_graph(std::size_t k) {
  Rng rng(3);
  std::vector<NodeType> types{{"paper", 12, 4}, {"author", 8, 3}};
  std::vector<Relation> rels;
  std::vector<std::vector<Edge>> edges;
  for (std::size_t r = 0; r < k; ++r) {
    rels.push_back({"w" + std::to_string(r), "author", "paper"});
    std::vector<Edge> list;
    for (int e = 0; e < 20; ++e)
      list.push_back({static_cast<std::uint32_t>(uniform_index(rng, 8)), static_cast<std::uint32_t>(uniform_index(rng, 12)), 1});
    edges.push_back(list);
  }
  std::vector<int> labels(12);
  for (std::size_t i = 0; i < 12; ++i) labels[i] = static_cast<int>(i % 2);
  return build_graph(types, rels, edges, {oracle::random_matrix(rng, 12, 4), oracle::random_matrix(rng, 8, 3)},
                     {labels, {}});
}

Matrix relu_dense(Matrix m) {
  for (auto& v : m.data()) v = std::max(v, 0.0);
  return m;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  auto y = oracle::dense_matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += b(0, j);
  return y;
}

}  // namespace

TEST(Model, RgcnAndHanDesignPointsBuild) {
  const auto g = generate_synthetic(academic_spec(60, 40, 200, 0.9, 1));
  auto rgcn = nc_config("paper");
  rgcn.family = ModelFamily::Relation;
  rgcn.micro = ConvKind::Sage;
  rgcn.macro = MacroKind::Sum;
  Model a(rgcn, g);
  const auto out = a.forward(false);
  EXPECT_EQ(out.logits.rows(), 60u);
  EXPECT_EQ(out.logits.cols(), 4u);
  EXPECT_EQ(a.num_classes(), 4u);

  auto han = nc_config("paper");
  han.family = ModelFamily::Metapath;
  han.micro = ConvKind::GAT;
  han.macro = MacroKind::Attention;
  han.metapaths = {{"PAP", {"written_by", "writes"}}};
  Model b(han, g);
  EXPECT_EQ(b.forward(false).logits.rows(), 60u);
}

TEST(Model, InitializationIsDeterministic) {
  const auto g = generate_synthetic(academic_spec(30, 20, 80, 0.9, 2));
  auto cfg = nc_config("paper");
  Model a(cfg, g), b(cfg, g);
  ASSERT_EQ(a.num_parameters(), b.num_parameters());
  for (std::size_t i = 0; i < a.parameters().all().size(); ++i)
    EXPECT_EQ(a.parameters().all()[i].tensor.value(), b.parameters().all()[i].tensor.value());
  cfg.seed = 6;
  Model c(cfg, g);
  EXPECT_NE(a.parameters().all()[0].tensor.value(), c.parameters().all()[0].tensor.value());
}

TEST(Model, SingleGcnLayerMatchesDenseComposition) {
  // Six nodes on a path 0-1-2-3-4-5 plus one doubled edge.
  std::vector<Edge> edges{{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}, {4, 5}, {5, 4}, {5, 4}};
  Rng rng(7);
  const auto x = oracle::random_matrix(rng, 6, 3);
  const auto g = build_graph({{"n", 6, 3}}, {{"r", "n", "n"}}, {edges}, {x}, {{0, 1, 0, 1, 0, 1}});
  auto cfg = nc_config("n");
  cfg.family = ModelFamily::Homogenization;
  cfg.micro = ConvKind::GCN;
  cfg.macro.reset();
  cfg.mp_layers = 1;
  cfg.connectivity = Connectivity::Stack;
  cfg.activation = Activation::Relu;
  Model m(cfg, g);

  Matrix a(6, 6);
  for (const auto& e : edges) a(e.dst, e.src) += 1.0;
  for (std::size_t i = 0; i < 6; ++i) a(i, i) += 1.0;
  std::vector<double> deg(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);

  auto h = affine(x, value_of(m, "pre0.n.weight"), value_of(m, "pre0.n.bias"));
  h = relu_dense(oracle::dense_matmul(oracle::dense_matmul(a, h), value_of(m, "mp0.conv.weight")));
  h = relu_dense(affine(h, value_of(m, "post0.weight"), value_of(m, "post0.bias")));
  const auto logits = affine(h, value_of(m, "head.weight"), value_of(m, "head.bias"));
  EXPECT_LT(max_abs_diff(m.forward(false).logits.value(), logits), 1e-12);
}

TEST(Model, SkipCatWidthArithmetic) {
  const auto g = generate_synthetic(academic_spec(30, 20, 80, 0.9, 2));
  auto cfg = nc_config("paper");
  cfg.connectivity = Connectivity::SkipCat;
  cfg.mp_layers = 3;
  cfg.hidden_dim = 8;
  Model m(cfg, g);
  EXPECT_EQ(m.post_input_width(), 32u);
  EXPECT_EQ(m.forward(false).h[g.type_index("paper")].cols(), 8u);
}

TEST(Model, EvalForwardIsPureAndDropoutFollowsStep) {
  const auto g = generate_synthetic(academic_spec(30, 20, 80, 0.9, 2));
  auto cfg = nc_config("paper");
  cfg.dropout = 0.3;
  cfg.batch_norm = true;
  Model m(cfg, g);
  const auto a = m.forward(false).logits.value();
  const auto b = m.forward(false).logits.value();
  EXPECT_EQ(a, b);
  Model m1(cfg, g), m2(cfg, g);
  EXPECT_EQ(m1.forward(true, 4).logits.value(), m2.forward(true, 4).logits.value());
  EXPECT_NE(m1.forward(true, 5).logits.value(), m2.forward(true, 6).logits.value());
}

TEST(Model, ScoreLinks) {
  const Matrix zero(2, 2);
  EXPECT_EQ(score_links(zero, zero, {0}, {1}), std::vector<double>{0.5});
  const Matrix basis{{1, 0}, {0, 1}};
  EXPECT_EQ(score_links(basis, basis, {0}, {1}), std::vector<double>{0.5});
  EXPECT_NEAR(score_links(basis, basis, {1}, {1})[0], 0.7310585786300049, 1e-15);
  EXPECT_THROW(score_links(basis, basis, {2}, {0}), Error);
}

TEST(Model, RelationFamilyParametersGrowLinearlyWithRelations) {
  auto cfg = nc_config("paper");
  cfg.family = ModelFamily::Relation;
  cfg.micro = ConvKind::GCN;
  const auto g1 = multi_relation_graph(1), g2 = multi_relation_graph(2), g4 = multi_relation_graph(4);
  Model m1(cfg, g1), m2(cfg, g2), m4(cfg, g4);
  const auto step = m2.num_mp_parameters() - m1.num_mp_parameters();
  EXPECT_GT(step, 0u);
  EXPECT_EQ(m4.num_mp_parameters() - m2.num_mp_parameters(), 2 * step);

  auto homog = cfg;
  homog.family = ModelFamily::Homogenization;
  homog.macro.reset();
  Model h1(homog, g1), h2(homog, g2), h4(homog, g4);
  EXPECT_EQ(h1.num_mp_parameters(), h4.num_mp_parameters());
  EXPECT_EQ(h1.num_parameters(), h2.num_parameters());
  EXPECT_LT(h2.num_parameters(), m2.num_parameters());
  EXPECT_LT(h4.num_parameters(), m4.num_parameters());
}

TEST(Model, InvalidConfigsAreRejected) {
  const auto g = generate_synthetic(academic_spec(30, 20, 80, 0.9, 2));
  auto cfg = nc_config("paper");
  cfg.family = ModelFamily::Metapath;
  cfg.metapaths.clear();
  EXPECT_THROW(Model(cfg, g), Error);
  cfg = nc_config("venue");
  EXPECT_THROW(Model(cfg, g), Error);
  cfg = nc_config("paper");
  cfg.lr = 0.05;
  EXPECT_THROW(Model(cfg, g), Error);
}

TEST(Model, LinkPredictionScoresPairs) {
  const auto g = generate_synthetic(academic_spec(30, 20, 80, 0.9, 2));
  DesignConfig cfg;
  cfg.task.kind = TaskKind::LinkPrediction;
  cfg.task.target = "writes";
  cfg.task.reverse_relation = "written_by";
  cfg.hidden_dim = 8;
  Model m(cfg, g);
  EXPECT_EQ(m.output_types().size(), 2u);
  const auto out = m.forward(false);
  EXPECT_FALSE(out.logits.defined());
  const auto scores = m.link_logits(out, {{0, 0}, {1, 2}, {19, 29}});
  EXPECT_EQ(scores.rows(), 3u);
  EXPECT_THROW(m.link_logits(out, {{20, 0}}), Error);
}

TEST(Model, BindRequiresSameSchema) {
  const auto g = generate_synthetic(academic_spec(30, 20, 80, 0.9, 2));
  Model m(nc_config("paper"), g);
  const auto smaller = remove_edges(g, "writes", {g.edges(g.relation_index("writes"))[0]}, "written_by");
  EXPECT_NO_THROW(m.bind(smaller));
  EXPECT_THROW(m.bind(fixture::academic_toy()), Error);
}

TEST(Model, WholeModelGradientCheck) {
  const auto g = generate_synthetic(academic_spec(20, 12, 50, 0.9, 3));
  for (auto family : {ModelFamily::Homogenization, ModelFamily::Relation, ModelFamily::Metapath}) {
    auto cfg = nc_config("paper");
    cfg.family = family;
    cfg.micro = family == ModelFamily::Relation ? ConvKind::GIN : ConvKind::GAT;
    cfg.attention_form = AttentionForm::SimpleHGN;
    if (family == ModelFamily::Homogenization) cfg.macro.reset();
    if (family == ModelFamily::Metapath) {
      cfg.macro = MacroKind::Attention;
      cfg.metapaths = {{"PAP", {"written_by", "writes"}}, {"PP", {"written_by", "writes", "written_by", "writes"}}};
    }
    cfg.activation = Activation::Tanh;
    cfg.connectivity = Connectivity::SkipCat;
    cfg.pre_layers = 2;
    cfg.post_layers = 2;
    Model m(cfg, g);
    Index rows;
    for (std::uint32_t i = 0; i < 20; i += 2) rows.push_back(i);
    const auto& labels = g.labels(g.type_index("paper"));
    GradCheckOptions opts;
    opts.eps = 1e-6;
    opts.max_coords = 8;
    const double err = grad_check([&] { return cross_entropy(m.forward(false).logits, labels, rows); },
                                  m.parameters().tensors(), opts);
    EXPECT_LT(err, 1e-4) << to_string(family);
  }
}
