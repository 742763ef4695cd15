#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "heco/errors.hpp"
#include "heco/graph.hpp"
#include "test_util.hpp"

using namespace heco;

namespace {

// Exhaustive typed-path enumeration: recursive DFS along the chain. The
// pair is adjacent when an instance connects it in either orientation.
std::set<std::pair<NodeId, NodeId>> brute_force_edges(const HeteroGraph& g,
                                                      const MetaPathSpec& spec) {
    std::set<std::pair<NodeId, NodeId>> edges;
    std::function<void(NodeId, NodeId, std::size_t)> dfs = [&](NodeId start, NodeId cur,
                                                               std::size_t depth) {
        if (depth == spec.chain.size()) {
            if (cur != start) edges.insert({start, cur});
            return;
        }
        const auto& step = spec.chain[depth];
        const auto& adj = step.forward ? g.adj_fwd(step.relation) : g.adj_bwd(step.relation);
        for (NodeId next : adj[cur]) dfs(start, next, depth + 1);
    };
    for (NodeId i = 0; i < g.target_count(); ++i) dfs(i, i, 0);
    std::set<std::pair<NodeId, NodeId>> sym;
    for (auto [a, b] : edges) {
        sym.insert({a, b});
        sym.insert({b, a});
    }
    return sym;
}

std::set<std::pair<NodeId, NodeId>> edges_of(const MetaPathGraph& mpg) {
    std::set<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < static_cast<NodeId>(mpg.neighbors.size()); ++i)
        for (NodeId j : mpg.neighbors[i]) out.insert({i, j});
    return out;
}

// Toy bibliographic graph: papers P0..P2, authors A0..A2, subjects S0..S1.
// A1 writes P1 and P2, so P1-P2 are meta-path neighbors through authors.
HeteroGraph acm_toy() {
    HeteroGraphData data;
    data.type_names = {"P", "A", "S"};
    data.type_counts = {3, 3, 2};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}, {1, 1}, {2, 1}, {2, 2}};
    RelationSpec ps;
    ps.src_type = 0;
    ps.dst_type = 2;
    ps.edges = {{0, 0}, {1, 0}, {2, 1}};
    data.relations = {pa, ps};
    return HeteroGraph(std::move(data));
}

MetaPathSpec pap_spec() {
    MetaPathSpec spec;
    spec.name = "PAP";
    spec.chain = {{0, true}, {0, false}};
    return spec;
}

HeteroGraph random_hin(Rng& rng, int& out_targets) {
    HeteroGraphData data;
    const int ntypes = 2 + static_cast<int>(rng.index(2));  // 2..3 node types
    const std::vector<std::string> names{"P", "A", "S"};
    for (int t = 0; t < ntypes; ++t) {
        data.type_names.push_back(names[t]);
        data.type_counts.push_back(3 + static_cast<NodeId>(rng.index(15)));
    }
    data.target_type = 0;
    // one relation per non-target type plus sometimes an extra
    for (int t = 1; t < ntypes; ++t) {
        RelationSpec rel;
        rel.src_type = 0;
        rel.dst_type = t;
        for (NodeId a = 0; a < data.type_counts[0]; ++a)
            for (NodeId b = 0; b < data.type_counts[t]; ++b)
                if (rng.bernoulli(0.25)) rel.edges.emplace_back(a, b);
        data.relations.push_back(rel);
    }
    if (ntypes == 3 && rng.bernoulli(0.5)) {
        RelationSpec rel;
        rel.src_type = 1;
        rel.dst_type = 2;
        for (NodeId a = 0; a < data.type_counts[1]; ++a)
            for (NodeId b = 0; b < data.type_counts[2]; ++b)
                if (rng.bernoulli(0.2)) rel.edges.emplace_back(a, b);
        data.relations.push_back(rel);
    }
    out_targets = data.type_counts[0];
    return HeteroGraph(std::move(data));
}

// A random well-typed chain of length 2..4 starting and ending at P.
MetaPathSpec random_chain(const HeteroGraph& g, Rng& rng) {
    MetaPathSpec spec;
    spec.name = "random";
    const int len = 2 + static_cast<int>(rng.index(3));
    TypeId cur = g.target_type();
    for (int s = 0; s < len; ++s) {
        std::vector<MetaPathStep> options;
        for (std::size_t r = 0; r < g.num_relations(); ++r) {
            const auto& rel = g.relation(r);
            if (rel.src_type == cur) options.push_back({r, true});
            if (rel.dst_type == cur) options.push_back({r, false});
        }
        // last step must come back to the target type
        if (s == len - 1) {
            std::vector<MetaPathStep> back;
            for (auto o : options) {
                const auto& rel = g.relation(o.relation);
                if ((o.forward ? rel.dst_type : rel.src_type) == g.target_type()) back.push_back(o);
            }
            options = back;
        }
        if (options.empty()) return random_chain(g, rng);  // resample
        const auto step = options[rng.index(options.size())];
        spec.chain.push_back(step);
        const auto& rel = g.relation(step.relation);
        cur = step.forward ? rel.dst_type : rel.src_type;
    }
    return spec;
}

}  // namespace

TEST_CASE("toy graph: P1 and P2 share an author") {
    auto g = acm_toy();
    auto mpg = build_metapath_graph(g, pap_spec());
    CHECK(mpg.connected(2, 1));
    CHECK(mpg.connected(1, 2));
    // P0's author writes nothing else
    CHECK_FALSE(mpg.connected(0, 1));
    CHECK_FALSE(mpg.connected(0, 2));
    for (NodeId i = 0; i < 3; ++i) CHECK_FALSE(mpg.connected(i, i));
}

TEST_CASE("no shared intermediate nodes means no adjacency") {
    HeteroGraphData data;
    data.type_names = {"P", "A"};
    data.type_counts = {2, 2};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}, {1, 1}};
    data.relations = {pa};
    auto g = HeteroGraph(HeteroGraphData(data));
    auto mpg = build_metapath_graph(g, pap_spec());
    CHECK_FALSE(mpg.connected(0, 1));
    CHECK(mpg.degrees[0] == 0);
}

TEST_CASE("six-node graph equals exhaustive enumeration") {
    HeteroGraphData data;
    data.type_names = {"P", "A"};
    data.type_counts = {3, 3};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}, {0, 1}, {1, 1}, {2, 2}, {1, 2}};
    data.relations = {pa};
    auto g = HeteroGraph(std::move(data));
    auto mpg = build_metapath_graph(g, pap_spec());
    CHECK(edges_of(mpg) == brute_force_edges(g, pap_spec()));
}

TEST_CASE("random graphs match the DFS oracle and stay symmetric") {
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        int n_targets = 0;
        auto g = random_hin(rng, n_targets);
        auto spec = random_chain(g, rng);
        auto mpg = build_metapath_graph(g, spec);
        CHECK(edges_of(mpg) == brute_force_edges(g, spec));
        for (NodeId i = 0; i < n_targets; ++i) {
            CHECK_FALSE(mpg.connected(i, i));
            for (NodeId j : mpg.neighbors[i]) CHECK(mpg.connected(j, i));
            CHECK(mpg.degrees[i] == static_cast<NodeId>(mpg.neighbors[i].size()));
        }
    }
}

TEST_CASE("chain validation errors") {
    auto g = acm_toy();
    MetaPathSpec bad_endpoint;
    bad_endpoint.name = "PAS";
    bad_endpoint.chain = {{0, true}, {1, true}};  // second step expects P, is at A
    CHECK_THROWS_AS(build_metapath_graph(g, bad_endpoint), DataError);

    MetaPathSpec unknown;
    unknown.name = "PXP";
    unknown.chain = {{7, true}, {7, false}};
    CHECK_THROWS_AS(build_metapath_graph(g, unknown), DataError);

    MetaPathSpec short_chain;
    short_chain.name = "P";
    short_chain.chain = {{0, true}};
    CHECK_THROWS_AS(build_metapath_graph(g, short_chain), DataError);
}

TEST_CASE("count_metapath_links") {
    auto g = acm_toy();
    auto pap = build_metapath_graph(g, pap_spec());
    MetaPathSpec psp;
    psp.name = "PSP";
    psp.chain = {{1, true}, {1, false}};
    auto psp_g = build_metapath_graph(g, psp);
    std::vector<MetaPathGraph> mpgs{pap, psp_g};

    // P0 and P1 share subject S0 only; P1 and P2 share author A1 only
    CHECK(count_metapath_links(mpgs, 0, 1) == 1);
    CHECK(count_metapath_links(mpgs, 1, 2) == 1);
    CHECK(count_metapath_links(mpgs, 0, 2) == 0);

    for (NodeId i = 0; i < 3; ++i)
        for (NodeId j = 0; j < 3; ++j)
            if (i != j) CHECK(count_metapath_links(mpgs, i, j) == count_metapath_links(mpgs, j, i));

    CHECK_THROWS_AS(count_metapath_links(mpgs, 0, 0), DataError);
    CHECK_THROWS_AS(count_metapath_links(mpgs, 0, 99), DataError);
}

TEST_CASE("count matches per-meta-path DFS oracle on random instances") {
    Rng rng(555);
    for (int trial = 0; trial < 10; ++trial) {
        int n_targets = 0;
        auto g = random_hin(rng, n_targets);
        auto s1 = random_chain(g, rng);
        auto s2 = random_chain(g, rng);
        std::vector<MetaPathGraph> mpgs{build_metapath_graph(g, s1), build_metapath_graph(g, s2)};
        auto e1 = brute_force_edges(g, s1);
        auto e2 = brute_force_edges(g, s2);
        for (NodeId i = 0; i < std::min<NodeId>(n_targets, 10); ++i)
            for (NodeId j = 0; j < std::min<NodeId>(n_targets, 10); ++j) {
                if (i == j) continue;
                const int want = (e1.count({i, j}) ? 1 : 0) + (e2.count({i, j}) ? 1 : 0);
                CHECK(count_metapath_links(mpgs, i, j) == want);
            }
    }
}

namespace {

// Independent ranking: count links per candidate, stable sort, slice.
PositiveSets reference_select(const std::vector<MetaPathGraph>& mpgs, int t_pos) {
    const NodeId n = static_cast<NodeId>(mpgs[0].neighbors.size());
    PositiveSets out;
    out.t_pos = t_pos;
    out.positives.resize(n);
    out.negatives.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        std::vector<std::pair<int, NodeId>> ranked;  // (-count, id)
        for (NodeId j = 0; j < n; ++j) {
            if (j == i) continue;
            int c = 0;
            for (const auto& mpg : mpgs)
                if (std::find(mpg.neighbors[i].begin(), mpg.neighbors[i].end(), j) !=
                    mpg.neighbors[i].end())
                    ++c;
            if (c > 0) ranked.push_back({-c, j});
        }
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(t_pos); ++r)
            out.positives[i].push_back(ranked[r].second);
        std::set<NodeId> pos(out.positives[i].begin(), out.positives[i].end());
        for (NodeId j = 0; j < n; ++j)
            if (j != i && !pos.count(j)) out.negatives[i].push_back(j);
    }
    return out;
}

MetaPathGraph graph_from_edges(NodeId n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    MetaPathGraph mpg;
    mpg.neighbors.resize(n);
    for (auto [a, b] : edges) {
        mpg.neighbors[a].push_back(b);
        mpg.neighbors[b].push_back(a);
    }
    for (auto& l : mpg.neighbors) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
    }
    mpg.degrees.resize(n);
    for (NodeId i = 0; i < n; ++i) mpg.degrees[i] = static_cast<NodeId>(mpg.neighbors[i].size());
    return mpg;
}

}  // namespace

TEST_CASE("select_positives keeps everything when the pool is small") {
    auto mpg = graph_from_edges(5, {{0, 1}, {0, 2}, {0, 3}});
    auto sets = select_positives({mpg}, 5);
    CHECK(sets.positives[0] == std::vector<NodeId>{1, 2, 3});
    CHECK(sets.negatives[0] == std::vector<NodeId>{4});
}

TEST_CASE("select_positives tie-break: count descending then id ascending") {
    // counts from node 0: j1=3, j2=2, j3=2, j4=1 over three meta-paths
    auto m1 = graph_from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    auto m2 = graph_from_edges(5, {{0, 1}, {0, 2}, {0, 3}});
    auto m3 = graph_from_edges(5, {{0, 1}});
    auto sets = select_positives({m1, m2, m3}, 2);
    CHECK(sets.positives[0] == std::vector<NodeId>{1, 2});
    CHECK(sets.negatives[0] == std::vector<NodeId>{3, 4});
}

TEST_CASE("select_positives with no candidates") {
    auto mpg = graph_from_edges(4, {{1, 2}});
    auto sets = select_positives({mpg}, 3);
    CHECK(sets.positives[0].empty());
    CHECK(sets.negatives[0] == std::vector<NodeId>{1, 2, 3});
}

TEST_CASE("select_positives rejects t_pos = 0") {
    auto mpg = graph_from_edges(3, {{0, 1}});
    CHECK_THROWS_AS(select_positives({mpg}, 0), ConfigError);
}

TEST_CASE("select_positives matches an independent reimplementation") {
    Rng rng(4242);
    for (int trial = 0; trial < 50; ++trial) {
        const NodeId n = 5 + static_cast<NodeId>(rng.index(10));
        std::vector<MetaPathGraph> mpgs;
        const int paths = 1 + static_cast<int>(rng.index(3));
        for (int p = 0; p < paths; ++p) {
            std::vector<std::pair<NodeId, NodeId>> edges;
            for (NodeId a = 0; a < n; ++a)
                for (NodeId b = a + 1; b < n; ++b)
                    if (rng.bernoulli(0.3)) edges.push_back({a, b});
            mpgs.push_back(graph_from_edges(n, edges));
        }
        const int t_pos = 1 + static_cast<int>(rng.index(6));
        auto got = select_positives(mpgs, t_pos);
        auto want = reference_select(mpgs, t_pos);
        CHECK(got.positives == want.positives);
        CHECK(got.negatives == want.negatives);
        for (NodeId i = 0; i < n; ++i) {
            CHECK(got.positives[i].size() <= static_cast<std::size_t>(t_pos));
            CHECK(got.positives[i].size() + got.negatives[i].size() ==
                  static_cast<std::size_t>(n - 1));
        }
    }
}

TEST_CASE("sample_neighbors draws without replacement when possible") {
    HeteroGraphData data;
    data.type_names = {"P", "A"};
    data.type_counts = {1, 5};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}};
    data.relations = {pa};
    auto g = HeteroGraph(std::move(data));

    Rng rng(7);
    auto sample = sample_neighbors(g, 0, 1, 3, rng);
    CHECK(sample.size() == 3);
    std::set<NodeId> distinct(sample.begin(), sample.end());
    CHECK(distinct.size() == 3);
    for (NodeId j : sample) CHECK(j < 5);
}

TEST_CASE("sample_neighbors repeats when the neighborhood is small") {
    HeteroGraphData data;
    data.type_names = {"P", "A"};
    data.type_counts = {1, 2};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}, {0, 1}};
    data.relations = {pa};
    auto g = HeteroGraph(std::move(data));

    Rng rng(8);
    auto sample = sample_neighbors(g, 0, 1, 4, rng);
    CHECK(sample.size() == 4);
    std::set<NodeId> distinct(sample.begin(), sample.end());
    CHECK(distinct.size() <= 2);

    // boundary: degree == t yields the whole set once each
    Rng rng2(9);
    auto exact = sample_neighbors(g, 0, 1, 2, rng2);
    std::sort(exact.begin(), exact.end());
    CHECK(exact == std::vector<NodeId>{0, 1});
}

TEST_CASE("sample_neighbors reports missing neighborhoods") {
    HeteroGraphData data;
    data.type_names = {"P", "A"};
    data.type_counts = {2, 1};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}};
    data.relations = {pa};
    auto g = HeteroGraph(std::move(data));
    Rng rng(10);
    CHECK_THROWS_WITH_AS(sample_neighbors(g, 1, 1, 2, rng), doctest::Contains("type A"), DataError);
}

TEST_CASE("sample_neighbors is seed-reproducible and uniform") {
    HeteroGraphData data;
    data.type_names = {"P", "A"};
    data.type_counts = {1, 8};
    data.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    for (NodeId j = 0; j < 8; ++j) pa.edges.push_back({0, j});
    data.relations = {pa};
    auto g = HeteroGraph(std::move(data));

    Rng a(123), b(123);
    for (int i = 0; i < 20; ++i) {
        auto sa = sample_neighbors(g, 0, 1, 3, a);
        auto sb = sample_neighbors(g, 0, 1, 3, b);
        CHECK(sa == sb);
    }

    // empirical per-neighbor frequency over 10,000 draws of size 3
    Rng rng(321);
    std::vector<int> hits(8, 0);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d)
        for (NodeId j : sample_neighbors(g, 0, 1, 3, rng)) ++hits[j];
    const double expect = draws * 3.0 / 8.0;
    const double p = 3.0 / 8.0;
    const double se = std::sqrt(draws * p * (1.0 - p));
    for (int j = 0; j < 8; ++j) CHECK(std::abs(hits[j] - expect) < 5.0 * se);
}

TEST_CASE("graph construction invariants") {
    // heterogeneity: |types| + |relations| must exceed 2
    HeteroGraphData homo;
    homo.type_names = {"P"};
    homo.type_counts = {3};
    homo.target_type = 0;
    RelationSpec pp;
    pp.src_type = 0;
    pp.dst_type = 0;
    pp.edges = {{0, 1}};
    homo.relations = {pp};
    CHECK_THROWS_AS(HeteroGraph(std::move(homo)), DataError);

    // feature row count must match the node count
    HeteroGraphData bad_feat;
    bad_feat.type_names = {"P", "A"};
    bad_feat.type_counts = {2, 1};
    bad_feat.target_type = 0;
    RelationSpec pa;
    pa.src_type = 0;
    pa.dst_type = 1;
    pa.edges = {{0, 0}};
    bad_feat.relations = {pa};
    bad_feat.features.resize(2);
    bad_feat.features[0] = DenseMatrix(3, 2);
    CHECK_THROWS_AS(HeteroGraph(std::move(bad_feat)), DataError);

    // edges must respect declared endpoint types
    HeteroGraphData bad_edge;
    bad_edge.type_names = {"P", "A"};
    bad_edge.type_counts = {2, 1};
    bad_edge.target_type = 0;
    RelationSpec pa2;
    pa2.src_type = 0;
    pa2.dst_type = 1;
    pa2.edges = {{0, 5}};
    bad_edge.relations = {pa2};
    CHECK_THROWS_AS(HeteroGraph(std::move(bad_edge)), DataError);
}

TEST_CASE("schema derivation") {
    auto g = acm_toy();
    auto schema = derive_schema(g);
    CHECK(schema.types.size() == 3);
    CHECK(schema.schema_edges.size() == 2);
    CHECK(schema.neighbor_types_of_target == std::vector<TypeId>{1, 2});

    SUBCASE("a target with no neighbor types is rejected") {
        HeteroGraphData data;
        data.type_names = {"P", "A", "S"};
        data.type_counts = {2, 2, 1};
        data.target_type = 0;
        RelationSpec as;  // only connects the two non-target types
        as.src_type = 1;
        as.dst_type = 2;
        as.edges = {{0, 0}};
        data.relations = {as};
        auto island = HeteroGraph(std::move(data));
        CHECK_THROWS_AS(derive_schema(island), DataError);
    }
}

TEST_CASE("gcn operator weights") {
    auto mpg = graph_from_edges(3, {{0, 1}});
    auto op = gcn_operator(mpg);
    // node 0: degree 1 -> self 1/2, neighbor 1/sqrt(4)=1/2; node 2: isolated self 1/1
    CHECK(op.w[0] == doctest::Approx(0.5));
    CHECK(op.w[1] == doctest::Approx(0.5));
    CHECK(op.row_ptr[3] - op.row_ptr[2] == 1);
    CHECK(op.w[op.row_ptr[2]] == doctest::Approx(1.0));
}
