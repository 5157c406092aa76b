#include "../support/random_bank.hpp"

#include <gtest/gtest.h>

using namespace ssp;

TEST(Gap, BeforeOnlyWithoutModel) {
  const auto bank = synth_bank(SynthParams{.num_classes = 6, .shots = 4, .num_test = 6, .dim = 16, .grid_h = 2, .grid_w = 2});
  const auto rep = gap_report(bank);
  EXPECT_FALSE(rep.after.has_value());
  const json j = rep.to_json();
  EXPECT_FALSE(j.contains("after"));
  for (const char* key : {"mu_cosine", "kappa_tex", "kappa_vis", "kappa_gap", "kl_tex_vis", "kl_vis_tex", "kl_sym"})
    EXPECT_TRUE(j["before"].contains(key)) << key;
}

TEST(Gap, MetricRelations) {
  const auto bank = synth_bank(SynthParams{.num_classes = 6, .shots = 4, .num_test = 6, .dim = 16, .grid_h = 2, .grid_w = 2});
  const auto m = align(bank, SspConfig{.q = 4, .c = 4, .r_vis = 6, .r_tex = 6});
  const auto rep = gap_report(bank, &m);
  ASSERT_TRUE(rep.after.has_value());
  for (const auto& g : {rep.before, *rep.after}) {
    EXPECT_DOUBLE_EQ(g.kl_sym, g.kl_tex_vis + g.kl_vis_tex);
    EXPECT_DOUBLE_EQ(g.kappa_gap, std::abs(g.kappa_tex - g.kappa_vis));
    EXPECT_LE(std::abs(g.mu_cosine), 1.0);
    EXPECT_GE(g.kl_tex_vis, 0.0);
  }
}

TEST(Gap, IdenticalDistributionsHaveNoGap) {
  const VmfParams p{VectorD::Unit(5, 2), 7.0};
  const auto g = gap_metrics(p, p);
  EXPECT_DOUBLE_EQ(g.mu_cosine, 1.0);
  EXPECT_EQ(g.kappa_gap, 0.0);
  EXPECT_NEAR(g.kl_sym, 0.0, 1e-12);
}

TEST(Gap, AlignmentClosesSyntheticGap) {
  const auto bank = synth_bank(SynthParams{});
  const auto m = align(bank, SspConfig{.q = 40, .c = 40, .r_vis = 16, .r_tex = 16});
  const auto rep = gap_report(bank, &m);
  EXPECT_GT(rep.after->mu_cosine, rep.before.mu_cosine);
  EXPECT_LT(rep.after->kl_sym, rep.before.kl_sym);
}

TEST(Gap, RejectsForeignModel) {
  const auto bank = testing_support::random_bank(3, 2, 6, 1, 2, 2, 1);
  const auto other = testing_support::random_bank(3, 2, 6, 1, 2, 3, 1);
  const auto m = align(bank, SspConfig{.q = 1, .c = 1, .r_vis = 3, .r_tex = 3});
  EXPECT_THROW(gap_report(other, &m), ProvenanceError);
}
