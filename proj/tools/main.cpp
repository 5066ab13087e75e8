#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ace/external.hpp"
#include "ace/io.hpp"
#include "ace/pipeline.hpp"
#include "ace/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_no_retained = 2;
constexpr int exit_usage = 64;
constexpr int exit_software = 70;
constexpr int exit_io = 74;

std::string format_value(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(text)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

ace::index_id parse_index_or_exit(const std::string& name) {
  auto id = ace::index_from_name(name);
  if (!id) {
    std::cerr << "unknown index '" << name << "'; valid ids:";
    for (ace::index_id i : ace::all_index_ids) std::cerr << ' ' << ace::index_name(i);
    std::cerr << '\n';
    std::exit(exit_usage);
  }
  return *id;
}

fs::path manifest_path_of(const std::string& trials) {
  fs::path p(trials);
  if (fs::is_directory(p)) return p / "manifest.json";
  return p;
}

int map_error_exit(const ace::error& e) {
  switch (e.code()) {
    case ace::errc::no_retained_spaces:
      return exit_no_retained;
    case ace::errc::missing_file:
    case ace::errc::parse_error:
      return exit_io;
    case ace::errc::invalid_alpha:
    case ace::errc::invalid_params:
    case ace::errc::invalid_spec:
      return exit_usage;
    default:
      return exit_software;
  }
}

void emit_no_retained(const ace::error& e) {
  json reason = {{"error", "no_retained_spaces"},
                 {"reason", "no space rejected unimodality"},
                 {"hint", "direct pooling can stand in when nothing passes the dip screen; "
                          "rerun with --pool-without-dip"}};
  std::cout << reason.dump() << '\n';
  std::cerr << e.what() << '\n';
}

/// Config file mirrors the AceConfig field names; command-line flags override.
void apply_config_file(const fs::path& path, ace::ace_config& cfg) {
  json doc = json::parse(ace::io::read_file(path));
  if (doc.contains("index")) cfg.index = parse_index_or_exit(doc["index"].get<std::string>());
  if (doc.contains("dip_alpha")) cfg.dip_alpha = doc["dip_alpha"].get<double>();
  if (doc.contains("dip_replicates")) cfg.dip_replicates = doc["dip_replicates"].get<std::size_t>();
  if (doc.contains("edge_alpha")) cfg.edge_alpha = doc["edge_alpha"].get<double>();
  if (doc.contains("grouping"))
    cfg.grouping = doc["grouping"].get<std::string>() == "dbscan" ? ace::grouping_method::dbscan
                                                                  : ace::grouping_method::hdbscan;
  if (doc.contains("link"))
    cfg.link = doc["link"].get<std::string>() == "hits" ? ace::link_method::hits
                                                        : ace::link_method::pagerank;
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("include_outlier_rescue"))
    cfg.include_outlier_rescue = doc["include_outlier_rescue"].get<bool>();
  if (doc.contains("pool_without_dip")) cfg.pool_without_dip = doc["pool_without_dip"].get<bool>();
}

int cmd_score(const std::string& embedding, const std::string& labels, const std::string& index) {
  ace::embedding_matrix z = ace::io::load_matrix(embedding);
  ace::partition rho = ace::io::load_partition(labels);
  std::vector<ace::index_id> ids;
  if (index == "all")
    ids.assign(std::begin(ace::all_index_ids), std::end(ace::all_index_ids));
  else
    ids.push_back(parse_index_or_exit(index));

  std::cout << "index,raw,oriented\n";
  for (ace::index_id id : ids) {
    try {
      ace::index_value v = ace::compute_index(z, rho, id);
      std::cout << ace::index_name(id) << ',' << format_value(v.raw) << ','
                << format_value(v.oriented) << '\n';
    } catch (const ace::error& e) {
      if (ids.size() == 1) throw;
      std::cout << ace::index_name(id) << ",NA,NA\n";
      std::cerr << ace::index_name(id) << ": " << e.what() << '\n';
    }
  }
  return exit_ok;
}

int cmd_run(const std::string& trials, const ace::ace_config& cfg, const std::string& out_path,
            const std::string& scores_csv) {
  ace::trial_bundle bundle = ace::io::load_bundle(manifest_path_of(trials));
  ace::ace_report report = cfg.include_outlier_rescue ? ace::ace_with_outlier_rescue(bundle, cfg)
                                                      : ace::run_ace(bundle, cfg);
  std::ofstream out(out_path, std::ios::binary);
  if (!out.good()) {
    std::cerr << "cannot write " << out_path << '\n';
    return exit_io;
  }
  out << ace::report_to_json(report).dump(2) << '\n';
  if (!scores_csv.empty()) {
    std::ofstream csv(scores_csv, std::ios::binary);
    if (!csv.good()) {
      std::cerr << "cannot write " << scores_csv << '\n';
      return exit_io;
    }
    csv << ace::score_matrix_to_csv(report.scores);
  }
  std::cerr << "report written to " << out_path << "; selected subgroup ["
            << [&] {
                 std::string s;
                 for (std::size_t m : report.subgroups[report.selected_subgroup].members)
                   s += (s.empty() ? "" : " ") + report.trial_ids[m];
                 return s;
               }()
            << "]\n";
  return exit_ok;
}

int cmd_baselines(const std::string& trials, const ace::ace_config& cfg) {
  ace::trial_bundle bundle = ace::io::load_bundle(manifest_path_of(trials));
  std::vector<double> paired = ace::paired_score(bundle, cfg.index, cfg.threads);
  std::vector<double> pooled = ace::pooled_score(bundle, cfg.index, cfg);
  std::vector<double> raw;
  if (bundle.raw_input) raw = ace::raw_score(bundle, cfg.index, cfg.threads);

  std::cout << "trial,raw,paired,pooled\n";
  for (std::size_t t = 0; t < bundle.m(); ++t) {
    std::cout << bundle.trials[t].id << ','
              << (raw.empty() ? "NA" : format_value(raw[t])) << ',' << format_value(paired[t])
              << ',' << format_value(pooled[t]) << '\n';
  }
  return exit_ok;
}

int cmd_external(const std::string& pred, const std::string& truth) {
  ace::partition a = ace::io::load_partition(truth);
  ace::partition b = ace::io::load_partition(pred);
  std::cout << "measure,value\n";
  std::cout << "nmi," << format_value(ace::nmi(a, b)) << '\n';
  std::cout << "acc," << format_value(ace::clustering_accuracy(a, b)) << '\n';
  return exit_ok;
}

int cmd_synth(std::size_t m, std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed,
              const std::string& out_dir, const std::string& corrupt,
              const std::string& label_noise, const std::string& separations) {
  ace::synth_spec spec = ace::synth_spec::with_defaults(m, n, d, k, seed);
  if (!corrupt.empty())
    for (std::size_t c : parse_index_list(corrupt)) spec.corrupt.insert(c);
  if (!label_noise.empty()) spec.label_noise = parse_double_list(label_noise);
  if (!separations.empty()) spec.separations = parse_double_list(separations);
  ace::trial_bundle bundle = ace::generate_bundle(spec);
  ace::io::save_bundle(bundle, out_dir);
  std::cerr << "bundle with " << bundle.m() << " trials written to " << out_dir << '\n';
  return exit_ok;
}

int cmd_dimdemo(std::size_t n, const std::string& dims, std::size_t reps, std::uint64_t seed) {
  ace::concentration_stats stats = ace::concentration_demo(n, parse_index_list(dims), reps, seed);
  std::cout << "p,ratio_median,index_abs_median\n";
  for (std::size_t i = 0; i < stats.dims.size(); ++i)
    std::cout << stats.dims[i] << ',' << format_value(stats.ratio_median[i]) << ','
              << format_value(stats.index_abs_median[i]) << '\n';
  return exit_ok;
}

ace::partition load_truth_for_compare(const std::string& path, const ace::ace_report& report) {
  std::string text = ace::io::read_file(path);
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc = json::parse(text);
    if (doc.contains("ids")) {
      auto ids = doc["ids"].get<std::vector<std::string>>();
      if (ids != report.trial_ids)
        ace::fail(ace::errc::id_mismatch, "truth ids do not match the report's trial ids");
    }
    std::vector<long long> labels = doc.at("labels").get<std::vector<long long>>();
    return ace::partition::canonicalize(labels);
  }
  return ace::io::load_partition(path);
}

int cmd_compare(const std::string& report_path, const std::string& truth_path) {
  ace::ace_report report = ace::report_from_json(json::parse(ace::io::read_file(report_path)));
  ace::partition truth = load_truth_for_compare(truth_path, report);
  if (truth.size() != report.n)
    ace::fail(ace::errc::id_mismatch, "truth length does not match the report");
  auto rows = ace::evaluate_regimes(report, truth);
  std::cout << "regime,external,r_s,tau_b\n";
  for (const auto& row : rows)
    std::cout << row.regime << ',' << row.external << ',' << format_value(row.r_s) << ','
              << format_value(row.tau_b) << '\n';
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Internal-validity evaluation and ranking for deep-clustering trials"};
  app.require_subcommand(1);

  ace::ace_config cfg;
  std::string index_name_arg = "silhouette_euclidean";
  std::string trials, embedding, labels, pred, truth, report_path, out_path = "report.json";
  std::string config_path, grouping_arg, link_arg;
  std::string corrupt, label_noise, separations, dims = "2,20,200,2000", out_dir, scores_csv;
  std::size_t m = 10, n = 500, d = 16, k = 5, reps = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  auto* score = app.add_subcommand("score", "Compute one or all indices for a single trial");
  score->add_option("--embedding", embedding)->required();
  score->add_option("--labels", labels)->required();
  score->add_option("--index", index_name_arg)->required();

  auto* run = app.add_subcommand("run", "Run the full adaptive evaluation on a bundle");
  run->add_option("--trials", trials)->required();
  run->add_option("--index", index_name_arg);
  run->add_option("--dip-alpha", cfg.dip_alpha);
  run->add_option("--dip-replicates", cfg.dip_replicates);
  run->add_option("--edge-alpha", cfg.edge_alpha);
  run->add_option("--grouping", grouping_arg)->check(CLI::IsMember({"hdbscan", "dbscan"}));
  run->add_option("--link", link_arg)->check(CLI::IsMember({"pagerank", "hits"}));
  run->add_option("--seed", cfg.seed);
  run->add_flag("--pool-without-dip", cfg.pool_without_dip);
  run->add_flag("--outlier-rescue", cfg.include_outlier_rescue);
  run->add_option("--out", out_path);
  run->add_option("--scores-csv", scores_csv);
  run->add_option("--threads", threads);
  run->add_option("--config", config_path);

  auto* baselines = app.add_subcommand("baselines", "Raw/paired/pooled scores for a bundle");
  baselines->add_option("--trials", trials)->required();
  baselines->add_option("--index", index_name_arg)->required();
  baselines->add_option("--seed", cfg.seed);
  baselines->add_option("--dip-alpha", cfg.dip_alpha);
  baselines->add_option("--dip-replicates", cfg.dip_replicates);
  baselines->add_flag("--pool-without-dip", cfg.pool_without_dip);
  baselines->add_option("--threads", threads);

  auto* external = app.add_subcommand("external", "NMI and accuracy against ground truth");
  external->add_option("--pred", pred)->required();
  external->add_option("--truth", truth)->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic trial bundle");
  synth->add_option("--m", m);
  synth->add_option("--n", n);
  synth->add_option("--d", d);
  synth->add_option("--k", k);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--corrupt", corrupt);
  synth->add_option("--label-noise", label_noise);
  synth->add_option("--separations", separations);

  auto* dimdemo = app.add_subcommand("dimdemo", "Distance concentration across dimensions");
  dimdemo->add_option("--n", n);
  dimdemo->add_option("--dims", dims);
  dimdemo->add_option("--reps", reps);
  dimdemo->add_option("--seed", seed);

  auto* compare = app.add_subcommand("compare", "Regime-vs-external correlation table");
  compare->add_option("--report", report_path)->required();
  compare->add_option("--truth", truth)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*run && !config_path.empty()) {
      ace::ace_config from_file = cfg;
      apply_config_file(config_path, from_file);
      // explicit flags win over config-file values
      if (run->count("--index") == 0) index_name_arg = std::string(ace::index_name(from_file.index));
      if (run->count("--dip-alpha") == 0) cfg.dip_alpha = from_file.dip_alpha;
      if (run->count("--dip-replicates") == 0) cfg.dip_replicates = from_file.dip_replicates;
      if (run->count("--edge-alpha") == 0) cfg.edge_alpha = from_file.edge_alpha;
      if (run->count("--grouping") == 0) cfg.grouping = from_file.grouping;
      if (run->count("--link") == 0) cfg.link = from_file.link;
      if (run->count("--seed") == 0) cfg.seed = from_file.seed;
      if (run->count("--pool-without-dip") == 0) cfg.pool_without_dip = from_file.pool_without_dip;
      if (run->count("--outlier-rescue") == 0)
        cfg.include_outlier_rescue = from_file.include_outlier_rescue;
    }
    if (*score) return cmd_score(embedding, labels, index_name_arg);
    if (*external) return cmd_external(pred, truth);
    if (*synth) return cmd_synth(m, n, d, k, seed, out_dir, corrupt, label_noise, separations);
    if (*dimdemo) return cmd_dimdemo(n, dims, reps, seed);
    if (*compare) return cmd_compare(report_path, truth);

    cfg.index = parse_index_or_exit(index_name_arg);
    if (!grouping_arg.empty())
      cfg.grouping = grouping_arg == "dbscan" ? ace::grouping_method::dbscan
                                              : ace::grouping_method::hdbscan;
    if (!link_arg.empty())
      cfg.link = link_arg == "hits" ? ace::link_method::hits : ace::link_method::pagerank;
    cfg.threads = threads;

    if (*run) return cmd_run(trials, cfg, out_path, scores_csv);
    if (*baselines) return cmd_baselines(trials, cfg);
  } catch (const ace::error& e) {
    if (e.code() == ace::errc::no_retained_spaces) {
      emit_no_retained(e);
      return exit_no_retained;
    }
    std::cerr << e.what() << '\n';
    return map_error_exit(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << e.what() << '\n';
    return exit_io;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return exit_software;
  }
  return exit_usage;
}
