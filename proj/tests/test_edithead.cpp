#include <catch2/catch_amalgamated.hpp>

#include "gradcheck.hpp"
#include "mgie/edithead/edit_head.hpp"

using namespace mgie;

namespace {

edithead::EditHeadConfig tiny_cfg() {
    edithead::EditHeadConfig c;
    c.n_layers = 2;
    c.n_heads = 2;
    c.guidance_dim = 16;
    c.guidance_len = 4;
    c.input_dim = 24;
    c.mlp_mult = 2;
    return c;
}

struct Fixture {
    ParamStore store;
    edithead::EditHead head;
    Param* img_states;  // stand-in for the MLLM [IMG] states
    int n_img = 3;
    Fixture() {
        Rng rng(13);
        head.build(store, tiny_cfg(), n_img, rng);
        img_states = &store.add("test.img_states", n_img, 24, 0.5, rng);
    }
    Mat run() {
        Graph g;
        return g.val(head.transform(g, g.param(*img_states)));
    }
};

}  // namespace

TEST_CASE("edit head output shape and determinism") {
    Fixture f;
    Mat u1 = f.run();
    Mat u2 = f.run();
    REQUIRE(u1.rows() == 4);
    REQUIRE(u1.cols() == 16);
    REQUIRE((u1 - u2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(u1.allFinite());
}

TEST_CASE("edit head rejects mismatched source shapes") {
    Fixture f;
    Graph g;
    Var bad = g.constant(Mat::Zero(2, 24));  // wrong number of source states
    REQUIRE_THROWS_AS(f.head.transform(g, bad), std::invalid_argument);
    Var bad2 = g.constant(Mat::Zero(3, 8));  // wrong width
    REQUIRE_THROWS_AS(f.head.transform(g, bad2), std::invalid_argument);
}

TEST_CASE("autoregression: step t depends only on earlier outputs") {
    // Recomputing with the same inputs must reproduce each row exactly; and
    // because generation is sequential, a run that only keeps the first rows
    // agrees with the full run on those rows. We verify the second property
    // by shrinking guidance_len and comparing prefixes.
    Fixture f;
    Mat full = f.run();
    edithead::EditHead short_head = f.head;
    short_head.cfg.guidance_len = 2;
    Graph g;
    Mat pref = g.val(short_head.transform(g, g.param(*f.img_states)));
    REQUIRE((full.topRows(2) - pref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("permuting the source states changes the guidance") {
    Fixture f;
    Mat u1 = f.run();
    Mat v = f.img_states->value;
    f.img_states->value.row(0) = v.row(1);
    f.img_states->value.row(1) = v.row(0);
    Mat u2 = f.run();
    REQUIRE((u1 - u2).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("edit head gradients match finite differences") {
    Fixture f;
    auto build = [&](Graph& g) {
        return g.sum_squares(f.head.transform(g, g.param(*f.img_states)));
    };
    REQUIRE(testutil::grad_rel_err(build, *f.img_states) < 1e-3);
    REQUIRE(testutil::grad_rel_err(build, *f.store.find("edit_head.layer0.cross_attn.wv.b")) <
            1e-3);
    REQUIRE(testutil::grad_rel_err(build, *f.store.find("edit_head.layer0.cross_attn.wq.b")) <
            1e-3);
    REQUIRE(testutil::grad_rel_err(build, *f.store.find("edit_head.start")) < 1e-3);
    REQUIRE(testutil::grad_rel_err(build, *f.store.find("edit_head.out_proj.b")) < 1e-3);
}

TEST_CASE("null guidance has the output shape and is independent of sources") {
    Fixture f;
    Mat n1 = f.head.null_guidance_value();
    REQUIRE(n1.rows() == 4);
    REQUIRE(n1.cols() == 16);
    f.img_states->value.setRandom();
    REQUIRE((f.head.null_guidance_value() - n1).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(n1.allFinite());
}
