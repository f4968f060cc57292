#include "ccpt/cli/app.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ccpt/cli/experiments.hpp"
#include "ccpt/errors.hpp"
#include "ccpt/imitation/imitation.hpp"
#include "ccpt/sim/map_io.hpp"
#include "ccpt/sim/planner.hpp"
#include "ccpt/trainer/trainer.hpp"
#include "ccpt/triage/triage.hpp"
#include "json.hpp"

namespace ccpt::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct ConfigFlags {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool deterministic = false;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--profile", profile, "Architecture profile")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--workers", workers, "Rollout worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--deterministic", deterministic, "Require bit-exact reproducibility");
    cmd->add_option("--set", sets, "Dotted override, e.g. ppo.lr=0.001")->take_all();
  }

  trainer::TrainConfig load() const {
    std::vector<std::string> overrides = sets;
    if (!profile.empty()) overrides.push_back("profile=\"" + profile + "\"");
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (workers) overrides.push_back("workers=" + std::to_string(*workers));
    if (deterministic) overrides.push_back("deterministic=true");
    trainer::TrainConfig cfg = trainer::load_config(config, overrides);
    trainer::validate(cfg);
    return cfg;
  }
};

struct EpsilonFlags {
  std::string mode = "quantile";
  std::optional<double> epsilon;
  double quantile = triage::kDefaultQuantile;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "Threshold mode")->check(CLI::IsMember({"absolute", "quantile"}));
    cmd->add_option("--epsilon", epsilon, "Threshold for --mode absolute");
    cmd->add_option("--quantile", quantile, "Quantile for --mode quantile")->check(CLI::Range(0.0, 1.0));
  }

  triage::TriageReport run(const fs::path& dir) const {
    const auto m = *triage::parse_epsilon_mode(mode);
    if (m == triage::EpsilonMode::Absolute && !epsilon) throw ConfigError("--mode absolute requires --epsilon");
    if (m == triage::EpsilonMode::Quantile && epsilon) throw ConfigError("--epsilon is only valid with --mode absolute");
    return triage::triage_run(dir, m, epsilon.value_or(0.0), quantile);
  }
};

fs::path out_root() {
  const char* env = std::getenv(kOutRootEnv);
  return (env && *env) ? fs::path(env) : fs::path("runs");
}

fs::path default_dir(const std::string& config, const trainer::TrainConfig& cfg, const std::string& suffix) {
  return out_root() / (fs::path(config).stem().string() + "-" + cfg.profile + "-s" + std::to_string(cfg.seed) + suffix);
}

std::vector<sim::Vec3> parse_via(const std::string& text) {
  std::vector<sim::Vec3> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    sim::Vec3 v;
    char c1 = 0;
    char c2 = 0;
    std::istringstream is(item);
    if (!(is >> v.x >> c1 >> v.y >> c2 >> v.z) || c1 != ',' || c2 != ',') {
      throw ConfigError("--via expects x,y,z;x,y,z but got '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvariantError("cannot write " + path.string());
  out << text;
  if (!out) throw InvariantError("write failed for " + path.string());
}

void print_report(std::ostream& out, const fs::path& dir, const triage::TriageReport& r) {
  std::ifstream in(dir / "manifest.json");
  if (in) {
    const json m = json::parse(in);
    out << "run            " << dir.string() << '\n';
    out << "status         " << m.value("status", "?") << '\n';
    out << "seed           " << m.value("seed", 0) << '\n';
    out << "config_hash    " << m.value("config_hash", "") << '\n';
  }
  out << "trajectories   " << r.trajectories << '\n';
  out << "coverage       " << r.coverage << '\n';
  out << "epsilon        " << r.epsilon << " (" << triage::epsilon_mode_name(r.mode) << ")\n";
  out << "demo scores   ";
  for (double d : r.demo_scores) out << ' ' << d;
  out << '\n';
  out << "theta          " << r.theta.size() << '\n';
  out << "bugs           planted " << r.bugs.planted << ", found " << r.bugs.found << ", highlighted "
      << r.bugs.highlighted << '\n';
  for (const auto& t : r.bugs.by_kind) {
    if (t.planted == 0) continue;
    out << "  " << t.kind << ": planted " << t.planted << ", found " << t.found << ", highlighted " << t.highlighted
        << '\n';
  }
  std::vector<triage::TrajectoryScore> top = r.theta;
  std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return *a.score > *b.score; });
  if (top.size() > 10) top.resize(10);
  if (!top.empty()) out << "top highlighted (id alpha T score bugs):\n";
  for (const auto& s : top) {
    out << "  " << s.id << ' ' << s.alpha << ' ' << s.T << ' ' << *s.score << ' ' << s.bugs_entered << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Curiosity-conditioned play-testing agents on voxel maps", "ccpt"};
  app.require_subcommand(1);

  // train
  ConfigFlags train_flags;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train a run and persist its dataset and checkpoints");
  train_flags.add_to(train);
  train->add_option("--out", train_out, "Run directory (must not exist)");

  // triage / report / export
  std::string triage_dir;
  std::string triage_out;
  EpsilonFlags triage_eps;
  auto* triage_cmd = app.add_subcommand("triage", "Score a finished run and write the JSON report");
  triage_cmd->add_option("run_dir", triage_dir)->required()->check(CLI::ExistingDirectory);
  triage_cmd->add_option("--out", triage_out, "Report path (stdout when omitted)");
  triage_eps.add_to(triage_cmd);

  std::string report_dir;
  EpsilonFlags report_eps;
  auto* report_cmd = app.add_subcommand("report", "Print a readable triage summary of a finished run");
  report_cmd->add_option("run_dir", report_dir)->required()->check(CLI::ExistingDirectory);
  report_eps.add_to(report_cmd);

  std::string export_dir;
  std::string export_out;
  std::string export_which = "theta";
  bool export_demos = false;
  EpsilonFlags export_eps;
  auto* export_cmd = app.add_subcommand("export", "Write trajectories in the columnar text format");
  export_cmd->add_option("run_dir", export_dir)->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--out", export_out, "Output file")->required();
  export_cmd->add_option("--which", export_which, "Trajectories to write")->check(CLI::IsMember({"theta", "all"}));
  export_cmd->add_flag("--demos", export_demos, "Append the replayed demonstrations");
  export_eps.add_to(export_cmd);

  // demo tooling
  std::string rec_map;
  int rec_goal = 0;
  std::string rec_via;
  std::string rec_out;
  auto* demo_record = app.add_subcommand("demo-record", "Plan a bug-free demonstration and write its script");
  demo_record->add_option("--map", rec_map)->required()->check(CLI::ExistingFile);
  demo_record->add_option("--goal", rec_goal, "Goal id");
  demo_record->add_option("--via", rec_via, "Waypoints x,y,z;x,y,z");
  demo_record->add_option("--out", rec_out, "Demo file (must not exist)")->required();

  std::string ver_map;
  std::vector<std::string> ver_files;
  auto* demo_verify = app.add_subcommand("demo-verify", "Replay demonstrations and check they reach their goal");
  demo_verify->add_option("--map", ver_map)->required()->check(CLI::ExistingFile);
  demo_verify->add_option("demos", ver_files)->required()->check(CLI::ExistingFile);

  // ablations
  ConfigFlags enc_flags;
  std::string enc_out;
  auto* ablate_encoding = app.add_subcommand("ablate-encoding", "Coverage series for the observation ablations");
  enc_flags.add_to(ablate_encoding);
  ablate_encoding->add_option("--out", enc_out, "Output root for the runs and series.tsv");

  ConfigFlags rew_flags;
  std::string rew_out;
  double rew_quantile = triage::kDefaultQuantile;
  auto* ablate_reward = app.add_subcommand("ablate-reward", "CCPT against fixed-alpha baselines");
  rew_flags.add_to(ablate_reward);
  ablate_reward->add_option("--out", rew_out, "Output root for the runs and table.txt");
  ablate_reward->add_option("--quantile", rew_quantile, "Triage quantile")->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (app.get_subcommands().empty()) err << app.help();
    return kExitValidation;
  }

  auto progress = [&err](const std::string& label, const trainer::IterationMetrics& m) {
    err << (label.empty() ? "" : label + " ") << "iteration " << m.iteration << " steps " << m.env_steps
        << " goal_rate " << m.goal_rate << " coverage " << m.coverage;
    if (m.eval_goal_rate) err << " eval " << *m.eval_goal_rate;
    err << '\n';
  };

  try {
    if (train->parsed()) {
      const auto cfg = train_flags.load();
      const fs::path dir = train_out.empty() ? default_dir(train_flags.config, cfg, "") : fs::path(train_out);
      if (fs::exists(dir)) throw ConfigError("run directory " + dir.string() + " already exists; refusing to overwrite");
      const auto result = trainer::run_training(cfg, dir, [&](const trainer::IterationMetrics& m) { progress("", m); });
      out << "run " << dir.string() << '\n';
      out << "trajectories " << result.trajectories << '\n';
      out << "coverage " << result.coverage << '\n';
      if (result.final_eval_goal_rate) out << "eval_goal_rate " << *result.final_eval_goal_rate << '\n';
    } else if (triage_cmd->parsed()) {
      const auto r = triage_eps.run(triage_dir);
      const std::string text = triage::report_to_json(r).dump(2) + "\n";
      if (triage_out.empty()) {
        out << text;
      } else {
        write_text(triage_out, text);
        out << "report " << triage_out << " theta " << r.theta.size() << " highlighted " << r.bugs.highlighted << '\n';
      }
    } else if (report_cmd->parsed()) {
      print_report(out, report_dir, report_eps.run(report_dir));
    } else if (export_cmd->parsed()) {
      const auto r = export_eps.run(export_dir);
      const auto g = trainer::load_dataset(fs::path(export_dir) / "G.jsonl");
      std::map<std::uint64_t, std::optional<double>> scores;
      for (const auto& s : r.scores) scores[s.id] = s.score;
      std::map<std::uint64_t, bool> in_theta;
      for (const auto& s : r.theta) in_theta[s.id] = true;
      std::vector<triage::ExportRecord> records;
      for (const auto& rec : g) {
        const bool hi = in_theta.count(rec.id) > 0;
        if (export_which == "theta" && !hi) continue;
        records.push_back(triage::export_record(rec, hi ? "theta" : "train", scores[rec.id]));
      }
      if (export_demos) {
        std::ifstream in(fs::path(export_dir) / "config.json");
        const auto cfg = trainer::config_from_json(json::parse(in));
        const auto map = sim::load_map_file(cfg.map);
        std::uint64_t id = 0;
        for (const auto& d : imitation::load_demos(map, cfg.demos)) {
          triage::ExportRecord e;
          e.id = id;
          e.tag = "demo";
          e.score = id < r.demo_scores.size() ? std::optional<double>(r.demo_scores[id]) : std::nullopt;
          e.reached_goal = d.trajectory.reached_goal;
          e.bugs = d.trajectory.bugs_entered();
          for (const auto& s : d.trajectory.states) e.positions.push_back(s.pos);
          e.bug_masks = d.trajectory.bug_masks;
          records.push_back(std::move(e));
          ++id;
        }
      }
      triage::write_export(export_out, records);
      out << "exported " << records.size() << " trajectories to " << export_out << '\n';
    } else if (demo_record->parsed()) {
      if (fs::exists(rec_out)) throw ConfigError(rec_out + " already exists; refusing to overwrite");
      const auto map = sim::load_map_file(rec_map);
      const auto via = parse_via(rec_via);
      const auto plan = sim::plan_demo(map, rec_goal, via);
      if (!plan) throw InvariantError("no bug-free route to goal " + std::to_string(rec_goal) + " through the waypoints");
      const sim::DemoScript script{map.name(), rec_goal, *plan};
      imitation::record_demo(map, script);
      write_text(rec_out, sim::format_demo(script));
      out << "wrote " << rec_out << " (" << plan->size() << " actions)\n";
    } else if (demo_verify->parsed()) {
      const auto map = sim::load_map_file(ver_map);
      int failures = 0;
      for (const auto& f : ver_files) {
        try {
          const auto d = imitation::record_demo(map, sim::load_demo_file(f));
          out << "ok   " << f << " actions " << d.script.actions.size() << " goal_step " << d.trajectory.first_goal_step
              << " bugs " << d.trajectory.bugs_entered() << '\n';
        } catch (const std::exception& e) {
          ++failures;
          out << "FAIL " << f << ": " << e.what() << '\n';
        }
      }
      if (failures > 0) return kExitValidation;
    } else if (ablate_encoding->parsed()) {
      const auto cfg = enc_flags.load();
      const fs::path root = enc_out.empty() ? default_dir(enc_flags.config, cfg, "-ablate") : fs::path(enc_out);
      const auto series = cli::ablate_encoding(cfg, root, progress);
      const std::string text = format_series(series);
      write_text(root / "series.tsv", text);
      out << text;
      const auto full = series.front().points.back().coverage;
      const auto norm = series[1].points.back().coverage;
      out << "# check full coverage " << full << (full >= norm ? " >= " : " < ") << "normalized coverage " << norm
          << (full >= norm ? "" : " (soft check failed)") << '\n';
    } else if (ablate_reward->parsed()) {
      const auto cfg = rew_flags.load();
      const fs::path root = rew_out.empty() ? default_dir(rew_flags.config, cfg, "-ablate") : fs::path(rew_out);
      const auto rows = cli::ablate_reward(cfg, root, rew_quantile, progress);
      const std::string text = format_reward_table(rows);
      write_text(root / "table.txt", text);
      out << text;
      const bool cov = rows[2].coverage < rows[0].coverage;
      out << "# check only-imitation coverage < CCPT coverage: " << (cov ? "holds" : "does not hold (soft check)")
          << '\n';
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace ccpt::cli
