#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ace/pipeline.hpp"
#include "ace/synth.hpp"
#include "helpers.hpp"

using namespace ace;
using Catch::Matchers::WithinAbs;

namespace {

ace_config quick_config() {
  ace_config cfg;
  cfg.dip_replicates = 200;
  cfg.seed = 5;
  return cfg;
}

trial_bundle good_bundle(std::size_t m, std::uint64_t seed, std::size_t n = 120) {
  auto spec = synth_spec::with_defaults(m, n, 6, 3, seed);
  spec.separations.assign(m, 8.0);
  return generate_bundle(spec);
}

}  // namespace

TEST_CASE("identical well-clustered trials collapse to one subgroup") {
  auto base = good_bundle(1, 31);
  trial_bundle bundle;
  bundle.trials.emplace_back("a", base.trials[0].embedding, base.trials[0].labels);
  bundle.trials.emplace_back("b", base.trials[0].embedding, base.trials[0].labels);
  bundle.truth = base.truth;

  auto report = run_ace(bundle, quick_config());
  CHECK(report.dip.retained.size() == 2);
  REQUIRE(report.subgroups.size() == 1);
  CHECK(report.subgroups[0].members == std::vector<std::size_t>{0, 1});
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK_THAT(report.ace_scores[j], WithinAbs(report.pooled[j], 1e-12));
    CHECK_THAT(report.ace_scores[j], WithinAbs(report.paired[j], 1e-12));
  }
}

TEST_CASE("corrupted spaces are screened out of the selection") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto spec = synth_spec::with_defaults(8, 240, 8, 3, seed);
    spec.separations.assign(8, 7.0);
    spec.corrupt = {1, 4};
    spec.label_noise = {0.0, 0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
    auto bundle = generate_bundle(spec);

    auto cfg = quick_config();
    cfg.seed = seed;
    auto report = run_ace(bundle, cfg);
    for (std::size_t member : report.subgroups[report.selected_subgroup].members) {
      INFO("seed " << seed << " member " << member);
      CHECK(member != 1);
      CHECK(member != 4);
    }
  }
}

TEST_CASE("all-noise bundles retain nothing") {
  auto spec = synth_spec::with_defaults(5, 300, 6, 2, 77);
  spec.corrupt = {0, 1, 2, 3, 4};
  auto bundle = generate_bundle(spec);
  auto cfg = quick_config();
  CHECK_THROWS_MATCHES(run_ace(bundle, cfg), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::no_retained_spaces;
                       }));
  CHECK_THROWS_AS(pooled_score(bundle, index_id::silhouette_euclidean, cfg), error);

  cfg.pool_without_dip = true;
  auto pooled = pooled_score(bundle, index_id::silhouette_euclidean, cfg);
  CHECK(pooled.size() == 5);
  for (double v : pooled) CHECK_FALSE(std::isnan(v));
}

TEST_CASE("pooled column means") {
  score_matrix sm;
  sm.m = 2;
  sm.oriented = {0, 1, 2, 3};
  sm.raw = sm.oriented;
  sm.cell_errors.assign(4, {});
  auto mean = detail::column_mean_rows(sm, {0, 1});
  CHECK(mean == std::vector<double>{1, 2});

  // identical rows pool to that row
  sm.oriented = {4, 5, 4, 5};
  auto same = detail::column_mean_rows(sm, {0, 1});
  CHECK(same == std::vector<double>{4, 5});
}

TEST_CASE("raw scores equal paired scores when raw input is each embedding") {
  auto bundle = good_bundle(2, 41);
  bundle.raw_input = bundle.trials[0].embedding;

  auto raw = raw_score(bundle, index_id::silhouette_euclidean);
  double direct = silhouette(bundle.trials[0].embedding, bundle.trials[0].labels).oriented;
  CHECK_THAT(raw[0], WithinAbs(direct, 1e-15));

  trial_bundle no_raw = good_bundle(2, 42);
  CHECK_THROWS_MATCHES(raw_score(no_raw, index_id::silhouette_euclidean), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::missing_raw_input;
                       }));
}

TEST_CASE("single retained space degenerates to its own row") {
  auto spec = synth_spec::with_defaults(4, 260, 6, 3, 55);
  spec.separations.assign(4, 8.0);
  spec.corrupt = {1, 2, 3};
  auto bundle = generate_bundle(spec);
  auto cfg = quick_config();
  auto report = run_ace(bundle, cfg);
  REQUIRE(report.dip.retained == std::vector<std::size_t>{0});
  REQUIRE(report.subgroups.size() == 1);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK_THAT(report.ace_scores[j], WithinAbs(report.scores.at(0, j), 1e-12));
    CHECK_THAT(report.pooled[j], WithinAbs(report.scores.at(0, j), 1e-12));
  }
}

TEST_CASE("ace vector stays within the retained-row envelope") {
  auto bundle = good_bundle(5, 61, 160);
  auto report = run_ace(bundle, quick_config());
  for (std::size_t j = 0; j < bundle.m(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t r : report.dip.retained) {
      double v = report.scores.at(r, j);
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    REQUIRE(report.ace_scores[j] >= lo - 1e-12);
    REQUIRE(report.ace_scores[j] <= hi + 1e-12);
  }
}

TEST_CASE("selected subgroup has the maximal aggregated mean") {
  auto bundle = good_bundle(6, 71, 140);
  auto report = run_ace(bundle, quick_config());
  double best = report.subgroups[report.selected_subgroup].mean;
  for (const auto& sg : report.subgroups)
    if (!std::isnan(sg.mean)) CHECK(best >= sg.mean);
}

TEST_CASE("reports are deterministic across runs and thread counts") {
  auto bundle = good_bundle(5, 81, 140);
  auto cfg = quick_config();
  cfg.seed = 42;
  auto a = report_to_json(run_ace(bundle, cfg)).dump(2);
  auto b = report_to_json(run_ace(bundle, cfg)).dump(2);
  CHECK(a == b);

  cfg.threads = 8;
  auto c = report_to_json(run_ace(bundle, cfg)).dump(2);
  CHECK(a == c);
}

namespace {

ace_report report_with_groups(const std::vector<std::vector<double>>& aggregated,
                              const std::vector<std::vector<std::size_t>>& members,
                              const std::vector<bool>& outlier_flags) {
  ace_report r;
  std::size_t m = aggregated.front().size();
  r.n = 10;
  for (std::size_t t = 0; t < m; ++t) r.trial_ids.push_back("t" + std::to_string(t));
  r.scores.m = m;
  r.phase1_outlier = outlier_flags;
  for (std::size_t s = 0; s < aggregated.size(); ++s) {
    subgroup_report sg;
    sg.members = members[s];
    sg.weights.assign(members[s].size(), 1.0 / members[s].size());
    sg.aggregated = aggregated[s];
    sg.mean = detail::mean_skip_missing(sg.aggregated);
    r.subgroups.push_back(sg);
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < r.subgroups.size(); ++s)
    if (r.subgroups[s].mean > r.subgroups[best].mean &&
        !(r.subgroups[s].members.size() == 1 && outlier_flags[r.subgroups[s].members[0]]))
      best = s;
  r.selected_subgroup = best;
  r.ace_scores = r.subgroups[best].aggregated;
  return r;
}

}  // namespace

TEST_CASE("outlier rescue: no outlier singletons leaves the report unchanged") {
  auto r = report_with_groups({{1, 2, 3}, {0, 1, 2}}, {{0, 1}, {2}}, {false, false, false});
  auto rescued = apply_outlier_rescue(r);
  CHECK(rescued.selected_subgroup == r.selected_subgroup);
  CHECK_FALSE(rescued.rescue_applied);
}

TEST_CASE("outlier rescue: dominating outlier row takes over") {
  // outlier singleton {2} beats subgroup {0,1} by +1 on every column
  auto r = report_with_groups({{1, 2, 3}, {2, 3, 4}}, {{0, 1}, {2}}, {false, false, true});
  REQUIRE(r.selected_subgroup == 0);
  auto rescued = apply_outlier_rescue(r);
  CHECK(rescued.rescue_applied);
  CHECK(rescued.selected_subgroup == 1);
  CHECK(rescued.ace_scores == std::vector<double>{2, 3, 4});
}

TEST_CASE("outlier rescue: alternating differences keep the original") {
  // outlier mean is higher but the paired t-test cannot call it at 0.05
  std::vector<double> subgroup_scores = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  std::vector<double> outlier_scores = {3.5, 0.5, 5.5, 2.5, 7.5, 4.5};  // mean +1, sign-flipping
  double p = paired_t_test_onesided(outlier_scores, subgroup_scores);
  REQUIRE(p > 0.05);  // hand check: mean diff 1, sd ~2.19, t ~1.12 on 5 df
  auto r = report_with_groups({subgroup_scores, outlier_scores}, {{0, 1}, {2}},
                              {false, false, true});
  REQUIRE(r.selected_subgroup == 0);
  auto rescued = apply_outlier_rescue(r);
  CHECK_FALSE(rescued.rescue_applied);
  CHECK(rescued.selected_subgroup == 0);
}

TEST_CASE("evaluate_regimes fixture rows") {
  auto spec = synth_spec::with_defaults(4, 120, 6, 3, 91);
  spec.separations.assign(4, 8.0);
  spec.label_noise = {0.0, 0.1, 0.2, 0.3};  // NMI must vary for rank correlation
  auto bundle = generate_bundle(spec);
  auto report = run_ace(bundle, quick_config());
  // overwrite the ace vector with the exact NMI values
  std::vector<double> nmi_v(4);
  for (std::size_t t = 0; t < 4; ++t) nmi_v[t] = nmi(*bundle.truth, bundle.trials[t].labels);
  report.ace_scores = nmi_v;
  auto rows = evaluate_regimes(report, *bundle.truth);
  bool found = false;
  for (const auto& row : rows) {
    if (row.regime == "ace" && row.external == "nmi") {
      found = true;
      CHECK_THAT(row.r_s, WithinAbs(1.0, 1e-12));
      CHECK_THAT(row.tau_b, WithinAbs(1.0, 1e-12));
    }
  }
  CHECK(found);

  // reversed scores anti-correlate
  for (double& v : report.ace_scores) v = -v;
  auto rows2 = evaluate_regimes(report, *bundle.truth);
  for (const auto& row : rows2)
    if (row.regime == "ace" && row.external == "nmi") CHECK_THAT(row.r_s, WithinAbs(-1.0, 1e-12));
}

TEST_CASE("report json round-trips the regime vectors") {
  auto bundle = good_bundle(3, 101);
  auto report = run_ace(bundle, quick_config());
  auto j = report_to_json(report);
  auto back = report_from_json(j);
  CHECK(back.trial_ids == report.trial_ids);
  CHECK(back.trial_labels == report.trial_labels);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(back.paired[t] == report.paired[t]);
    CHECK(back.pooled[t] == report.pooled[t]);
    CHECK(back.ace_scores[t] == report.ace_scores[t]);
  }
}
