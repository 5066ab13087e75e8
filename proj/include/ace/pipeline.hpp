#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ace/error.hpp"
#include "ace/external.hpp"
#include "ace/grouping.hpp"
#include "ace/indices.hpp"
#include "ace/link_analysis.hpp"
#include "ace/stats.hpp"
#include "ace/types.hpp"
#include "ace/util.hpp"

namespace ace {

enum class link_method { pagerank, hits };

struct ace_config {
  index_id index = index_id::silhouette_euclidean;
  double dip_alpha = 0.05;
  std::size_t dip_replicates = 1000;
  double edge_alpha = 0.1;
  grouping_method grouping = grouping_method::hdbscan;
  link_method link = link_method::pagerank;
  std::uint64_t seed = 0;
  bool include_outlier_rescue = false;
  bool pool_without_dip = false;
  unsigned threads = 1;

  void validate() const {
    require(dip_alpha > 0.0 && dip_alpha < 1.0, errc::invalid_alpha, "dip alpha must lie in (0,1)");
    require(edge_alpha > 0.0 && edge_alpha < 1.0, errc::invalid_alpha,
            "edge alpha must lie in (0,1)");
    require(dip_replicates >= 1, errc::invalid_params, "need at least one dip replicate");
  }
};

struct dip_screen {
  std::vector<dip_result> per_trial;
  std::vector<bool> reject;            // multimodality rejected the unimodal null
  std::vector<std::size_t> retained;   // indices of rejecting (retained) spaces
};

struct subgroup_report {
  std::vector<std::size_t> members;  // original trial indices
  std::vector<double> weights;       // link ratings per member
  std::vector<double> aggregated;    // length M, NaN where missing
  double mean = std::numeric_limits<double>::quiet_NaN();
  struct edge {
    std::size_t a, b;
    double weight, p_value;
  };
  std::vector<edge> edges;
};

struct ace_report {
  ace_config config;
  std::vector<std::string> trial_ids;
  std::vector<std::vector<std::size_t>> trial_labels;
  std::size_t n = 0;

  std::optional<std::vector<double>> raw;
  std::vector<double> paired;
  std::vector<double> pooled;
  std::vector<double> ace_scores;

  dip_screen dip;
  score_matrix scores;              // retained rows (plus diagonal), M columns
  std::vector<double> correlation;  // M x M Spearman, NaN outside retained pairs
  std::vector<bool> phase1_outlier;
  std::vector<subgroup_report> subgroups;
  std::size_t selected_subgroup = 0;
  bool rescue_applied = false;
};

namespace detail {

inline dip_screen run_dip_screen(const trial_bundle& bundle, const ace_config& cfg) {
  std::size_t m = bundle.m();
  dip_screen screen;
  screen.per_trial.resize(m);
  parallel_for(m, cfg.threads, [&](std::size_t t) {
    try {
      std::vector<double> projection = pca_first_component(bundle.trials[t].embedding);
      screen.per_trial[t] =
          dip_pvalue(std::move(projection), cfg.dip_replicates,
                     counter_rng(cfg.seed).substream(t).next_u64());
    } catch (const error&) {
      // degenerate space (constant rows): unimodality cannot be rejected
      screen.per_trial[t] = {0.0, 1.0, cfg.dip_replicates};
    }
  });
  std::vector<double> pvals(m);
  for (std::size_t t = 0; t < m; ++t) pvals[t] = screen.per_trial[t].p_value;
  screen.reject = holm_bonferroni(pvals, cfg.dip_alpha);
  for (std::size_t t = 0; t < m; ++t)
    if (screen.reject[t]) screen.retained.push_back(t);
  return screen;
}

/// Column means over chosen rows, skipping missing cells.
inline std::vector<double> column_mean_rows(const score_matrix& sm,
                                            const std::vector<std::size_t>& rows) {
  std::vector<double> out(sm.m, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < sm.m; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r : rows) {
      double v = sm.at(r, j);
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    if (count > 0) out[j] = sum / static_cast<double>(count);
  }
  return out;
}

inline double mean_skip_missing(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      sum += x;
      ++count;
    }
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

/// Score matrix restricted to the rows that are actually needed: the given
/// rows fully, plus every diagonal cell for the paired baseline.
inline score_matrix scores_for_rows(const trial_bundle& bundle, index_id id,
                                    const std::vector<std::size_t>& rows, unsigned threads) {
  std::size_t m = bundle.m();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  score_matrix out;
  out.index = id;
  out.m = m;
  out.raw.assign(m * m, nan);
  out.oriented.assign(m * m, nan);
  out.cell_errors.assign(m * m, {});

  std::vector<char> want_row(m, 0);
  for (std::size_t r : rows) want_row[r] = 1;
  std::vector<std::size_t> cells;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c)
      if (want_row[r] || r == c) cells.push_back(r * m + c);

  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    std::size_t cell = cells[idx];
    std::size_t space = cell / m, part = cell % m;
    try {
      index_value v = compute_index(bundle.trials[space].embedding, bundle.trials[part].labels, id);
      out.raw[cell] = v.raw;
      out.oriented[cell] = v.oriented;
    } catch (const error& e) {
      out.cell_errors[cell] = e.what();
    }
  });
  return out;
}

}  // namespace detail

/// Oriented index of every partition evaluated on the shared raw input.
inline std::vector<double> raw_score(const trial_bundle& bundle, index_id id,
                                     unsigned threads = 1) {
  require(bundle.raw_input.has_value(), errc::missing_raw_input, "bundle has no raw input");
  std::size_t m = bundle.m();
  std::vector<double> out(m, std::numeric_limits<double>::quiet_NaN());
  parallel_for(m, threads, [&](std::size_t t) {
    try {
      out[t] = compute_index(*bundle.raw_input, bundle.trials[t].labels, id).oriented;
    } catch (const error&) {
    }
  });
  return out;
}

/// Oriented index of each partition in its own embedding space.
inline std::vector<double> paired_score(const trial_bundle& bundle, index_id id,
                                        unsigned threads = 1) {
  std::size_t m = bundle.m();
  std::vector<double> out(m, std::numeric_limits<double>::quiet_NaN());
  parallel_for(m, threads, [&](std::size_t t) {
    try {
      out[t] = compute_index(bundle.trials[t].embedding, bundle.trials[t].labels, id).oriented;
    } catch (const error&) {
    }
  });
  return out;
}

/// Unweighted column mean over dip-retained spaces, or over all spaces when
/// pool_without_dip is set.
inline std::vector<double> pooled_score(const trial_bundle& bundle, index_id id,
                                        const ace_config& cfg) {
  cfg.validate();
  std::vector<std::size_t> rows;
  if (cfg.pool_without_dip) {
    for (std::size_t t = 0; t < bundle.m(); ++t) rows.push_back(t);
  } else {
    rows = detail::run_dip_screen(bundle, cfg).retained;
    require(!rows.empty(), errc::no_retained_spaces, "no space rejected unimodality");
  }
  score_matrix sm = detail::scores_for_rows(bundle, id, rows, cfg.threads);
  return detail::column_mean_rows(sm, rows);
}

/// Full adaptive evaluation: dip screening, score matrix and rank
/// correlations over retained spaces, stage-wise grouping, per-subgroup link
/// weighting, and max-mean subgroup selection.
inline ace_report run_ace(const trial_bundle& bundle, const ace_config& cfg) {
  cfg.validate();
  require(bundle.m() >= 2, errc::shape_mismatch, "ace needs at least 2 trials");
  std::size_t m = bundle.m();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  ace_report report;
  report.config = cfg;
  report.n = bundle.n();
  for (const auto& t : bundle.trials) {
    report.trial_ids.push_back(t.id);
    report.trial_labels.push_back(t.labels.labels());
  }

  // Step 1: multimodality screen.
  report.dip = detail::run_dip_screen(bundle, cfg);
  const auto& retained = report.dip.retained;
  require(!retained.empty(), errc::no_retained_spaces, "no space rejected unimodality");

  // Step 2: scores and rank correlations over retained spaces.
  std::vector<std::size_t> rows = retained;
  if (cfg.pool_without_dip)
    for (std::size_t t = 0; t < m; ++t)
      if (!report.dip.reject[t]) rows.push_back(t);
  report.scores = detail::scores_for_rows(bundle, cfg.index, rows, cfg.threads);

  report.correlation.assign(m * m, nan);
  for (std::size_t a : retained) {
    report.correlation[a * m + a] = 1.0;
    for (std::size_t b : retained) {
      if (b <= a) continue;
      auto row_a = report.scores.row(a);
      auto row_b = report.scores.row(b);
      double r;
      try {
        r = spearman(row_a, row_b);
      } catch (const error&) {
        // Degenerate variance: identical rows are perfectly concordant,
        // anything else stays undefined (treated as uncorrelated downstream).
        bool equal = true, any = false;
        for (std::size_t j = 0; j < m; ++j) {
          if (std::isnan(row_a[j]) || std::isnan(row_b[j])) continue;
          any = true;
          if (row_a[j] != row_b[j]) equal = false;
        }
        r = (any && equal) ? 1.0 : nan;
      }
      report.correlation[a * m + b] = report.correlation[b * m + a] = r;
    }
  }

  std::size_t r_count = retained.size();
  std::vector<double> corr_local(r_count * r_count, 1.0);
  for (std::size_t a = 0; a < r_count; ++a)
    for (std::size_t b = 0; b < r_count; ++b)
      corr_local[a * r_count + b] = report.correlation[retained[a] * m + retained[b]];
  score_matrix scores_local;
  scores_local.index = cfg.index;
  scores_local.m = m;
  scores_local.cell_errors.assign(r_count * m, {});
  for (std::size_t a = 0; a < r_count; ++a)
    for (std::size_t j = 0; j < m; ++j) {
      scores_local.oriented.push_back(report.scores.at(retained[a], j));
      scores_local.raw.push_back(report.scores.raw_at(retained[a], j));
    }

  grouping_params gp;
  gp.method = cfg.grouping;
  stagewise_result staged = stagewise_group(corr_local, r_count, scores_local, gp);

  report.phase1_outlier.assign(m, false);
  for (std::size_t a = 0; a < r_count; ++a)
    if (staged.phase1_outlier[a]) report.phase1_outlier[retained[a]] = true;

  // Step 3: per-subgroup link analysis and aggregation.
  for (const auto& local_group : staged.final.subgroups) {
    subgroup_report sg;
    correlation_graph graph = build_graph(corr_local, local_group, r_count, m, cfg.edge_alpha);
    link_weights weights = cfg.link == link_method::pagerank ? pagerank(graph)
                                                             : hits_authority(graph);
    sg.weights = weights.w;
    sg.aggregated = aggregate_scores(scores_local, local_group, weights);
    sg.mean = detail::mean_skip_missing(sg.aggregated);
    for (std::size_t lo : local_group) sg.members.push_back(retained[lo]);
    for (std::size_t a = 0; a < local_group.size(); ++a)
      for (std::size_t b = a + 1; b < local_group.size(); ++b)
        if (graph.weight(a, b) > 0.0)
          sg.edges.push_back({retained[local_group[a]], retained[local_group[b]],
                              graph.weight(a, b), graph.p_values[a * local_group.size() + b]});
    report.subgroups.push_back(std::move(sg));
  }

  // Selection: largest aggregated mean; ties prefer larger then
  // earliest-member subgroups.
  std::size_t best = 0;
  for (std::size_t s = 1; s < report.subgroups.size(); ++s) {
    const auto& cand = report.subgroups[s];
    const auto& cur = report.subgroups[best];
    double a = cand.mean, b = cur.mean;
    bool better;
    if (std::isnan(a))
      better = false;
    else if (std::isnan(b))
      better = true;
    else if (a != b)
      better = a > b;
    else if (cand.members.size() != cur.members.size())
      better = cand.members.size() > cur.members.size();
    else
      better = cand.members.front() < cur.members.front();
    if (better) best = s;
  }
  report.selected_subgroup = best;
  report.ace_scores = report.subgroups[best].aggregated;

  // Baselines carried in the same report.
  report.paired.assign(m, nan);
  for (std::size_t t = 0; t < m; ++t) report.paired[t] = report.scores.at(t, t);
  report.pooled =
      detail::column_mean_rows(report.scores, cfg.pool_without_dip ? rows : retained);
  if (bundle.raw_input) report.raw = raw_score(bundle, cfg.index, cfg.threads);
  return report;
}

/// Rescue decision on an existing report: when the best rank-uncorrelated
/// singleton beats the selected subgroup on mean score, a one-sided paired
/// t-test must also favor it before it replaces the selection.
inline ace_report apply_outlier_rescue(ace_report report) {
  std::size_t best_outlier = report.subgroups.size();
  for (std::size_t s = 0; s < report.subgroups.size(); ++s) {
    const auto& sg = report.subgroups[s];
    if (sg.members.size() != 1 || !report.phase1_outlier[sg.members[0]]) continue;
    if (std::isnan(sg.mean)) continue;
    if (best_outlier == report.subgroups.size() || sg.mean > report.subgroups[best_outlier].mean)
      best_outlier = s;
  }
  if (best_outlier == report.subgroups.size() || best_outlier == report.selected_subgroup)
    return report;

  const auto& outlier = report.subgroups[best_outlier];
  const auto& selected = report.subgroups[report.selected_subgroup];
  if (std::isnan(selected.mean) || outlier.mean <= selected.mean) return report;

  std::vector<double> a, b;
  for (std::size_t j = 0; j < report.scores.m; ++j) {
    if (std::isnan(outlier.aggregated[j]) || std::isnan(selected.aggregated[j])) continue;
    a.push_back(outlier.aggregated[j]);
    b.push_back(selected.aggregated[j]);
  }
  if (a.size() < 2) return report;
  double p;
  try {
    p = paired_t_test_onesided(a, b);
  } catch (const error&) {
    return report;  // identical vectors: nothing to rescue
  }
  if (p <= 0.05) {
    report.selected_subgroup = best_outlier;
    report.ace_scores = outlier.aggregated;
    report.rescue_applied = true;
  }
  return report;
}

inline ace_report ace_with_outlier_rescue(const trial_bundle& bundle, const ace_config& cfg) {
  return apply_outlier_rescue(run_ace(bundle, cfg));
}

/// One row of the regime-vs-external comparison table.
struct regime_row {
  std::string regime;
  std::string external;
  double r_s;
  double tau_b;
};

/// Spearman/Kendall agreement of every regime score vector with NMI and ACC
/// against the truth partition.
inline std::vector<regime_row> evaluate_regimes(const ace_report& report, const partition& truth) {
  std::size_t m = report.trial_ids.size();
  require(truth.size() == report.n, errc::missing_truth,
          "truth length does not match report observations");

  std::vector<double> nmi_v(m), acc_v(m);
  for (std::size_t t = 0; t < m; ++t) {
    partition pred = partition::from_labels(report.trial_labels[t]);
    nmi_v[t] = nmi(truth, pred);
    acc_v[t] = clustering_accuracy(truth, pred);
  }

  std::vector<std::pair<std::string, const std::vector<double>*>> regimes;
  if (report.raw) regimes.emplace_back("raw", &*report.raw);
  regimes.emplace_back("paired", &report.paired);
  regimes.emplace_back("pooled", &report.pooled);
  regimes.emplace_back("ace", &report.ace_scores);

  std::vector<regime_row> rows;
  for (const auto& [name, vec] : regimes) {
    for (const auto& [ext_name, ext] :
         std::vector<std::pair<std::string, const std::vector<double>*>>{{"nmi", &nmi_v},
                                                                         {"acc", &acc_v}}) {
      double rs = std::numeric_limits<double>::quiet_NaN();
      double tb = std::numeric_limits<double>::quiet_NaN();
      try {
        rs = spearman(*vec, *ext);
        tb = kendall_tau_b(*vec, *ext);
      } catch (const error&) {
      }
      rows.push_back({name, ext_name, rs, tb});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

inline nlohmann::json vec_json(const std::vector<double>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) arr.push_back(num_or_null(x));
  return arr;
}

inline std::vector<double> vec_from_json(const nlohmann::json& arr) {
  std::vector<double> out;
  for (const auto& x : arr)
    out.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return out;
}

}  // namespace detail

inline nlohmann::json report_to_json(const ace_report& r) {
  nlohmann::json j;
  j["config"] = {
      {"index", std::string(index_name(r.config.index))},
      {"dip_alpha", r.config.dip_alpha},
      {"dip_replicates", r.config.dip_replicates},
      {"edge_alpha", r.config.edge_alpha},
      {"grouping", r.config.grouping == grouping_method::hdbscan ? "hdbscan" : "dbscan"},
      {"link", r.config.link == link_method::pagerank ? "pagerank" : "hits"},
      {"seed", r.config.seed},
      {"outlier_rescue", r.config.include_outlier_rescue},
      {"pool_without_dip", r.config.pool_without_dip},
  };
  j["n"] = r.n;
  j["trial_ids"] = r.trial_ids;
  j["trial_labels"] = r.trial_labels;

  nlohmann::json regimes;
  if (r.raw) regimes["raw"] = detail::vec_json(*r.raw);
  regimes["paired"] = detail::vec_json(r.paired);
  regimes["pooled"] = detail::vec_json(r.pooled);
  regimes["ace"] = detail::vec_json(r.ace_scores);
  j["regimes"] = regimes;

  nlohmann::json dip = nlohmann::json::array();
  for (std::size_t t = 0; t < r.dip.per_trial.size(); ++t) {
    dip.push_back({{"dip", r.dip.per_trial[t].dip},
                   {"p_value", r.dip.per_trial[t].p_value},
                   {"replicates", r.dip.per_trial[t].replicates},
                   {"retained", static_cast<bool>(r.dip.reject[t])}});
  }
  j["dip"] = dip;
  j["retained"] = r.dip.retained;

  nlohmann::json score_rows = nlohmann::json::array();
  nlohmann::json raw_rows = nlohmann::json::array();
  for (std::size_t a = 0; a < r.scores.m; ++a) {
    nlohmann::json row = nlohmann::json::array(), rrow = nlohmann::json::array();
    for (std::size_t b = 0; b < r.scores.m; ++b) {
      row.push_back(detail::num_or_null(r.scores.at(a, b)));
      rrow.push_back(detail::num_or_null(r.scores.raw_at(a, b)));
    }
    score_rows.push_back(row);
    raw_rows.push_back(rrow);
  }
  j["score_matrix"] = {{"index", std::string(index_name(r.scores.index))},
                       {"oriented", score_rows},
                       {"raw", raw_rows}};
  nlohmann::json missing = nlohmann::json::array();
  for (std::size_t a = 0; a < r.scores.m; ++a)
    for (std::size_t b = 0; b < r.scores.m; ++b)
      if (!r.scores.cell_errors[a * r.scores.m + b].empty())
        missing.push_back(
            {{"space", a}, {"partition", b}, {"error", r.scores.cell_errors[a * r.scores.m + b]}});
  j["missing_cells"] = missing;

  nlohmann::json corr_rows = nlohmann::json::array();
  std::size_t m = r.trial_ids.size();
  for (std::size_t a = 0; a < m; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t b = 0; b < m; ++b) row.push_back(detail::num_or_null(r.correlation[a * m + b]));
    corr_rows.push_back(row);
  }
  j["correlation"] = corr_rows;
  j["phase1_outlier"] = r.phase1_outlier;

  nlohmann::json groups = nlohmann::json::array();
  for (const auto& sg : r.subgroups) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : sg.edges)
      edges.push_back({{"a", e.a}, {"b", e.b}, {"weight", e.weight}, {"p_value", e.p_value}});
    groups.push_back({{"members", sg.members},
                      {"weights", sg.weights},
                      {"aggregated", detail::vec_json(sg.aggregated)},
                      {"mean", detail::num_or_null(sg.mean)},
                      {"edges", edges}});
  }
  j["subgroups"] = groups;
  j["selected_subgroup"] = r.selected_subgroup;
  j["rescue_applied"] = r.rescue_applied;
  return j;
}

/// Round-trips the pieces `compare` needs; diagnostics are read back only as
/// far as the regime table requires.
inline ace_report report_from_json(const nlohmann::json& j) {
  ace_report r;
  r.n = j.at("n").get<std::size_t>();
  r.trial_ids = j.at("trial_ids").get<std::vector<std::string>>();
  r.trial_labels = j.at("trial_labels").get<std::vector<std::vector<std::size_t>>>();
  const auto& regimes = j.at("regimes");
  if (regimes.contains("raw")) r.raw = detail::vec_from_json(regimes.at("raw"));
  r.paired = detail::vec_from_json(regimes.at("paired"));
  r.pooled = detail::vec_from_json(regimes.at("pooled"));
  r.ace_scores = detail::vec_from_json(regimes.at("ace"));
  if (j.contains("selected_subgroup")) r.selected_subgroup = j.at("selected_subgroup").get<std::size_t>();
  return r;
}

}  // namespace ace
