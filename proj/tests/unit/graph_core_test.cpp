#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hetgnn/dataset_io.hpp"
#include "hetgnn/metrics.hpp"
#include "hetgnn/neighborhoods.hpp"
#include "hetgnn/splits.hpp"
#include "test_util.hpp"

using namespace hetgnn;
using testutil::random_graph;

namespace {

Graph make(std::size_t n, std::vector<Edge> edges, std::vector<int> labels, std::size_t k, bool directed = false) {
  return Graph::from_edges("g", n, edges, Matrix(n, 1, 1.0), std::move(labels), k, directed);
}

Graph triangle(int c0 = 0, int c1 = 0, int c2 = 0, std::size_t k = 2) {
  return make(3, {{0, 1}, {1, 2}, {0, 2}}, {c0, c1, c2}, k);
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("hetgnn_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  void write(const std::string& file, const std::string& text) const {
    std::filesystem::create_directories((path / file).parent_path());
    std::ofstream(path / file) << text;
  }
};

}  // namespace

TEST(Graph, PathBuildsSymmetricCsr) {
  const Graph g = make(3, {{0, 1}, {1, 2}}, {0, 0, 1}, 2);
  EXPECT_EQ(g.adjacency().nnz(), 4u);
  EXPECT_EQ(g.n_edges(), 2u);
  EXPECT_EQ(g.degree(0), 1u);
  EXPECT_EQ(g.degree(1), 2u);
  EXPECT_EQ(g.degree(2), 1u);
  EXPECT_TRUE(g.adjacency().is_symmetric());
}

TEST(Graph, DropsDuplicatesAndSelfLoops) {
  Graph::BuildReport rep;
  const Graph g = Graph::from_edges("g", 3, std::vector<Edge>{{0, 1}, {1, 0}, {0, 1}, {2, 2}}, Matrix(3, 1), {0, 1, 0},
                                    2, false, &rep);
  EXPECT_EQ(g.n_edges(), 1u);
  EXPECT_EQ(rep.self_loops, 1u);
  EXPECT_EQ(rep.duplicate_edges, 2u);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t e = g.adjacency().row_begin(r) + 1; e < g.adjacency().row_end(r); ++e)
      EXPECT_LT(g.adjacency().col_idx()[e - 1], g.adjacency().col_idx()[e]);
}

TEST(Graph, RejectsBadInput) {
  EXPECT_THROW(make(2, {{0, 5}}, {0, 0}, 2), RangeError);
  EXPECT_THROW(make(2, {{0, 1}}, {0, 2}, 2), RangeError);
  EXPECT_THROW(Graph::from_edges("g", 2, std::vector<Edge>{}, Matrix(3, 1), {0, 1}, 2, false), ShapeError);
}

TEST(Graph, DirectedKeepsOrientation) {
  const Graph g = make(3, {{0, 1}, {1, 2}}, {0, 1, 0}, 2, true);
  EXPECT_EQ(g.adjacency().nnz(), 2u);
  EXPECT_EQ(g.adjacency().at(0, 1), 1.0);
  EXPECT_EQ(g.adjacency().at(1, 0), 0.0);
}

TEST(DatasetIo, LoadsPathTsv) {
  TempDir d;
  d.write("meta.json", R"({"name":"path","n_nodes":3,"n_classes":2,"d_f":2,"directed":false})");
  d.write("edges.tsv", "0\t1\n1\t2\n");
  d.write("labels.tsv", "0\n1\n0\n");
  d.write("features.tsv", "1\t0\n0\t1\n0.5\t0.5\n");
  const auto ds = load_dataset(d.path);
  EXPECT_EQ(ds.graph.adjacency().nnz(), 4u);
  EXPECT_EQ(ds.graph.degrees(), (std::vector<double>{1, 2, 1}));
  EXPECT_EQ(ds.graph.features()(2, 1), 0.5);
  EXPECT_TRUE(ds.splits.empty());
}

TEST(DatasetIo, MalformedLineNamesFileAndLine) {
  TempDir d;
  d.write("meta.json", R"({"name":"p","n_nodes":3,"n_classes":2,"d_f":1,"directed":false})");
  d.write("edges.tsv", "0\t1\n1\tx\n");
  d.write("labels.tsv", "0\n1\n0\n");
  d.write("features.tsv", "1\n1\n1\n");
  try {
    load_dataset(d.path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("edges.tsv"), std::string::npos) << what;
    EXPECT_NE(what.find(":2"), std::string::npos) << what;
  }
}

TEST(DatasetIo, LabelOutOfRangeAndShapeErrors) {
  TempDir d;
  d.write("meta.json", R"({"name":"p","n_nodes":3,"n_classes":2,"d_f":1,"directed":false})");
  d.write("edges.tsv", "0\t1\n");
  d.write("labels.tsv", "0\n7\n0\n");
  d.write("features.tsv", "1\n1\n1\n");
  EXPECT_THROW(load_dataset(d.path), RangeError);
  d.write("labels.tsv", "0\n1\n0\n");
  d.write("features.tsv", "1\n1\n");
  EXPECT_THROW(load_dataset(d.path), ShapeError);
}

TEST(DatasetIo, RoundTripTextAndBinary) {
  const Graph g = random_graph(30, 3, 4, 0.2, 5);
  const auto splits = generate_splits(g, 3, 11);
  for (bool binary : {false, true}) {
    TempDir d;
    save_dataset(d.path / "ds", g, splits, binary);
    const auto ds = load_dataset(d.path / "ds");
    EXPECT_EQ(ds.graph.edge_list(), g.edge_list());
    EXPECT_EQ(ds.graph.labels(), g.labels());
    const double tol = binary ? 1e-6 : 0.0;
    EXPECT_LE(max_abs_diff(ds.graph.features(), g.features()), tol);
    ASSERT_EQ(ds.splits.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(ds.splits[k].train, splits[k].train);
      EXPECT_EQ(ds.splits[k].test, splits[k].test);
    }
  }
}

TEST(DatasetIo, BinaryFeatureHeader) {
  const Matrix x{{1.0, -2.0}, {0.25, 3.0}, {0.0, 1.5}};
  const std::string bytes = encode_features_f32(x);
  ASSERT_EQ(bytes.size(), 4u + 16u + 6u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "GF32");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);
}

TEST(EdgeHomophily, Examples) {
  EXPECT_DOUBLE_EQ(edge_homophily(triangle()), 1.0);
  EXPECT_DOUBLE_EQ(edge_homophily(make(2, {{0, 1}}, {0, 1}, 2)), 0.0);
  EXPECT_DOUBLE_EQ(edge_homophily(make(4, {{0, 1}, {1, 2}, {2, 3}}, {0, 0, 1, 1}, 2)), 2.0 / 3.0);
}

TEST(EdgeHomophily, Errors) {
  EXPECT_THROW(edge_homophily(make(2, {}, {0, 1}, 2)), RangeError);
  EXPECT_THROW(edge_homophily(make(2, {{0, 1}}, {0, kUnlabeled}, 2)), RangeError);
}

TEST(NodeHomophily, Examples) {
  EXPECT_DOUBLE_EQ(node_homophily(triangle()), 1.0);
  EXPECT_DOUBLE_EQ(node_homophily(make(2, {{0, 1}}, {0, 1}, 2)), 0.0);
  // Star, center class 0, leaves class 1: no node has a same-class neighbor.
  EXPECT_DOUBLE_EQ(node_homophily(make(4, {{0, 1}, {0, 2}, {0, 3}}, {0, 1, 1, 1}, 2)), 0.0);
  // Star with one same-class leaf: center 1/3, that leaf 1, others 0.
  EXPECT_DOUBLE_EQ(node_homophily(make(4, {{0, 1}, {0, 2}, {0, 3}}, {0, 0, 1, 1}, 2)), (1.0 / 3.0 + 1.0) / 4.0);
}

TEST(NodeHomophily, IsolatedNodesExcluded) {
  EXPECT_DOUBLE_EQ(node_homophily(make(4, {{0, 1}}, {0, 0, 1, 0}, 2)), 1.0);
  EXPECT_THROW(node_homophily(make(3, {}, {0, 1, 0}, 2)), RangeError);
}

TEST(Homophily, InUnitInterval) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Graph g = random_graph(40, 4, 2, 0.1, s);
    EXPECT_GE(edge_homophily(g), 0.0);
    EXPECT_LE(edge_homophily(g), 1.0);
    EXPECT_GE(node_homophily(g), 0.0);
    EXPECT_LE(node_homophily(g), 1.0);
  }
}

TEST(SemanticNeighborhood, Examples) {
  const Graph g = make(5, {{0, 1}, {0, 2}, {0, 3}}, {1, 0, 0, 1, 0}, 2);
  const Matrix nb = semantic_neighborhood(g, one_hot(g.labels(), 2));
  EXPECT_DOUBLE_EQ(nb(0, 0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(nb(0, 1), 1.0 / 3.0);
  EXPECT_EQ(nb(4, 0), 0.0);
  EXPECT_EQ(nb(4, 1), 0.0);
  EXPECT_THROW(semantic_neighborhood(g, Matrix(4, 2)), ShapeError);
}

TEST(SemanticNeighborhood, MatchesBruteForceCounts) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Graph g = random_graph(6 + s * 4, 3, 1, 0.3, s);
    const Matrix nb = semantic_neighborhood(g, one_hot(g.labels(), 3));
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      std::vector<double> cnt(3, 0.0);
      for (auto v : g.neighbors(i)) cnt[static_cast<std::size_t>(g.labels()[v])] += 1.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double expect = g.degree(i) ? cnt[c] / static_cast<double>(g.degree(i)) : 0.0;
        EXPECT_NEAR(nb(i, c), expect, 1e-15);
      }
    }
  }
}

TEST(ObservedCm, HomophilousIsIdentity) {
  const Graph g = make(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, {0, 0, 0, 1, 1, 1}, 2);
  const auto cm = observed_cm(g);
  EXPECT_EQ(max_abs_diff(cm.m, Matrix::identity(2)), 0.0);
  EXPECT_FALSE(cm.has_fallback());
}

TEST(ObservedCm, BipartiteIsSwap) {
  const Graph g = make(4, {{0, 2}, {0, 3}, {1, 2}, {1, 3}}, {0, 0, 1, 1}, 2);
  const auto cm = observed_cm(g);
  EXPECT_EQ(max_abs_diff(cm.m, Matrix{{0, 1}, {1, 0}}), 0.0);
}

TEST(ObservedCm, ZeroMassRowIsUniformAndFlagged) {
  const Graph g = make(4, {{0, 1}}, {0, 0, 1, 2}, 3);
  const auto cm = observed_cm(g);
  EXPECT_FALSE(cm.fallback_rows[0]);
  EXPECT_TRUE(cm.fallback_rows[1]);
  EXPECT_TRUE(cm.fallback_rows[2]);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(cm.m(1, c), 1.0 / 3.0);
}

TEST(ObservedCm, Errors) {
  EXPECT_THROW(observed_cm(make(2, {{0, 1}}, {0, 0}, 1)), RangeError);
  EXPECT_THROW(observed_cm(make(2, {{0, 1}}, {0, kUnlabeled}, 2)), RangeError);
}

TEST(ObservedCm, RowsStochasticAndPermutationEquivariant) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Graph g = random_graph(50, 4, 2, 0.1, s);
    const auto cm = observed_cm(g);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (double v : cm.m.row(r)) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
    const auto perm = testutil::random_permutation(50, s);
    EXPECT_LE(max_abs_diff(observed_cm(g.permuted(perm)).m, cm.m), 1e-12);

    const std::vector<int> cls{2, 0, 3, 1};
    std::vector<int> y(g.labels());
    for (int& v : y) v = cls[static_cast<std::size_t>(v)];
    const auto pc = observed_cm(g.with_labels(y));
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        EXPECT_NEAR(pc.m(static_cast<std::size_t>(cls[a]), static_cast<std::size_t>(cls[b])), cm.m(a, b), 1e-12);
  }
}

TEST(SparseOps, NormalizationsExamples) {
  const Graph two = make(2, {{0, 1}}, {0, 1}, 2);
  const CsrMatrix rn = row_normalize(two.adjacency());
  EXPECT_EQ(rn.at(0, 1), 1.0);
  EXPECT_EQ(rn.at(1, 0), 1.0);

  const CsrMatrix sn = sym_normalize(triangle().adjacency());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(sn.at(i, j), i == j ? 0.0 : 0.5);

  const CsrMatrix loops = add_self_loops(CsrMatrix(4, 4));
  EXPECT_EQ(max_abs_diff(loops.to_dense(), Matrix::identity(4)), 0.0);

  const CsrMatrix neg = CsrMatrix::from_triplets(2, 2, {{0, 1, -1.0}, {1, 0, -1.0}});
  EXPECT_THROW(sym_normalize(neg), RangeError);
}

TEST(SparseOps, NormalizationInvariants) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Graph g = random_graph(30, 2, 1, 0.1, s);
    const CsrMatrix rn = row_normalize(g.adjacency());
    const auto sums = rn.row_sums();
    for (std::size_t i = 0; i < 30; ++i) {
      if (g.degree(i))
        EXPECT_NEAR(sums[i], 1.0, 1e-12);
      else
        EXPECT_EQ(sums[i], 0.0);
    }
    EXPECT_TRUE(sym_normalize(g.adjacency()).is_symmetric(1e-15));
  }
}

TEST(Khop, Examples) {
  const CsrMatrix p = khop_adjacency(testutil::path_graph(3), 2);
  EXPECT_EQ(p.at(0, 2), 1.0);
  EXPECT_EQ(p.at(2, 0), 1.0);
  EXPECT_EQ(p.at(0, 0), 0.0);
  EXPECT_EQ(p.nnz(), 6u);

  std::vector<Edge> all;
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t v = u + 1; v < 5; ++v) all.emplace_back(u, v);
  const Graph k5 = make(5, all, {0, 1, 0, 1, 0}, 2);
  EXPECT_EQ(max_abs_diff(khop_adjacency(k5, 2).to_dense(), k5.adjacency().to_dense()), 0.0);

  EXPECT_THROW(khop_adjacency(k5, 1), RangeError);
}

TEST(Khop, MatchesBfs) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Graph g = random_graph(20 + 20 * s, 2, 1, 0.06, s);
    const auto dist = testutil::bfs_all(g);
    for (std::size_t k : {2u, 3u}) {
      const CsrMatrix within = khop_adjacency(g, k);
      const CsrMatrix exact = khop_adjacency(g, k, true);
      for (std::size_t u = 0; u < g.n_nodes(); ++u)
        for (std::size_t v = 0; v < g.n_nodes(); ++v) {
          const auto d = dist[u][v];
          EXPECT_EQ(within.at(u, v), (d >= 1 && d <= k) ? 1.0 : 0.0);
          EXPECT_EQ(exact.at(u, v), d == k ? 1.0 : 0.0);
        }
    }
  }
}

TEST(Knn, Examples) {
  const Graph orth = Graph::from_edges("o", 3, std::vector<Edge>{}, Matrix::identity(3), {0, 1, 0}, 2, false);
  const CsrMatrix a = knn_feature_graph(orth, 1);
  EXPECT_EQ(a.at(0, 1), 1.0);
  EXPECT_EQ(a.at(1, 0), 1.0);
  EXPECT_EQ(a.at(2, 0), 1.0);
  EXPECT_EQ(a.nnz(), 3u);

  const Matrix dup{{1, 2}, {3, -1}, {1, 2}, {3, -1}};
  const Graph d = Graph::from_edges("d", 4, std::vector<Edge>{}, dup, {0, 1, 0, 1}, 2, false);
  const CsrMatrix b = knn_feature_graph(d, 1);
  EXPECT_EQ(b.at(0, 2), 1.0);
  EXPECT_EQ(b.at(2, 0), 1.0);
  EXPECT_EQ(b.at(1, 3), 1.0);
  EXPECT_EQ(b.at(3, 1), 1.0);

  EXPECT_THROW(knn_feature_graph(d, 0), RangeError);
  EXPECT_THROW(knn_feature_graph(d, 4), RangeError);
}

TEST(Knn, ZeroRowLinksByIndexTieBreak) {
  const Matrix x{{0, 0}, {1, 0}, {0, 1}};
  const Graph g = Graph::from_edges("z", 3, std::vector<Edge>{}, x, {0, 1, 0}, 2, false);
  const CsrMatrix a = knn_feature_graph(g, 1);
  EXPECT_EQ(a.at(0, 1), 1.0);
}

TEST(Knn, MatchesExhaustiveOracle) {
  hetgnn::Rng rng(3, 1);
  const Matrix x = testutil::random_matrix(30, 8, rng);
  const Graph g = Graph::from_edges("r", 30, std::vector<Edge>{}, x, std::vector<int>(30, 0), 2, false);
  const std::size_t k = 4;
  const CsrMatrix a = knn_feature_graph(g, k);
  for (std::size_t i = 0; i < 30; ++i) {
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t j = 0; j < 30; ++j) {
      if (i == j) continue;
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t f = 0; f < 8; ++f) {
        dot += x(i, f) * x(j, f);
        ni += x(i, f) * x(i, f);
        nj += x(j, f) * x(j, f);
      }
      sims.emplace_back(-dot / std::sqrt(ni * nj), j);
    }
    std::sort(sims.begin(), sims.end());
    EXPECT_EQ(a.row_nnz(i), k);
    for (std::size_t r = 0; r < k; ++r) EXPECT_EQ(a.at(i, sims[r].second), 1.0) << "node " << i;
  }
}

TEST(Splits, SizesAndDeterminism) {
  const auto s = generate_splits(100, 2, 7);
  EXPECT_EQ(s[0].train.size(), 48u);
  EXPECT_EQ(s[0].valid.size(), 32u);
  EXPECT_EQ(s[0].test.size(), 20u);
  const auto again = generate_splits(100, 2, 7);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(s[k].train, again[k].train);
    EXPECT_EQ(s[k].valid, again[k].valid);
    EXPECT_EQ(s[k].test, again[k].test);
  }
  EXPECT_NE(s[0].train, s[1].train);
  EXPECT_NE(generate_splits(100, 1, 8)[0].train, s[0].train);

  const auto actor = split_sizes(7600);
  EXPECT_EQ(actor.train, 3648u);
  EXPECT_EQ(actor.valid, 2432u);
  EXPECT_EQ(actor.test, 1520u);
}

TEST(Splits, PartitionAndProportions) {
  for (std::size_t n = 10; n < 400; n += 7) {
    const auto sp = generate_splits(n, 1, n)[0];
    sp.validate(n);
    EXPECT_EQ(sp.train.size() + sp.valid.size() + sp.test.size(), n);
    const double dn = static_cast<double>(n);
    EXPECT_LE(std::abs(static_cast<double>(sp.train.size()) - 0.48 * dn), 1.0) << n;
    EXPECT_LE(std::abs(static_cast<double>(sp.valid.size()) - 0.32 * dn), 1.0) << n;
    EXPECT_LE(std::abs(static_cast<double>(sp.test.size()) - 0.20 * dn), 1.0) << n;
  }
}

TEST(Splits, Errors) {
  EXPECT_THROW(generate_splits(9, 1, 0), RangeError);
  EXPECT_THROW(generate_splits(100, 0, 0), ConfigError);
  Split bad;
  bad.train = {0, 1};
  bad.test = {1};
  EXPECT_THROW(bad.validate(3), RangeError);
}
