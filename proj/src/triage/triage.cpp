#include "ccpt/triage/triage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ccpt/errors.hpp"
#include "ccpt/imitation/imitation.hpp"
#include "ccpt/sim/map_io.hpp"
#include "ccpt/trainer/config.hpp"

namespace ccpt::triage {

using nlohmann::json;

std::optional<double> average_curiosity(std::span<const double> r_c, int T) {
  if (T <= 0) return std::nullopt;
  if (static_cast<std::size_t>(T) >= r_c.size()) throw ShapeError("first goal step beyond trajectory end");
  double sum = 0.0;
  for (int t = 0; t <= T; ++t) sum += r_c[t];
  return sum / T;
}

std::optional<double> score_trajectory(std::span<const sim::AgentState> states, int first_goal_step,
                                       const curiosity::RNDPair& rnd) {
  if (first_goal_step <= 0) return std::nullopt;
  const auto prefix = states.first(static_cast<std::size_t>(first_goal_step) + 1);
  const std::vector<double> r = rnd.rewards(prefix);
  return average_curiosity(r, first_goal_step);
}

std::vector<TrajectoryScore> score_dataset(std::span<const trainer::TrajectoryRecord> g,
                                           const curiosity::RNDPair& rnd) {
  std::vector<TrajectoryScore> out;
  out.reserve(g.size());
  for (const auto& r : g) {
    TrajectoryScore s;
    s.id = r.id;
    s.alpha = r.alpha;
    s.reached_goal = r.reached_goal;
    s.T = r.first_goal_step;
    s.bugs_entered = r.bugs_entered();
    if (r.reached_goal) s.score = score_trajectory(r.states, r.first_goal_step, rnd);
    out.push_back(s);
  }
  return out;
}

std::string epsilon_mode_name(EpsilonMode m) { return m == EpsilonMode::Absolute ? "absolute" : "quantile"; }

std::optional<EpsilonMode> parse_epsilon_mode(const std::string& s) {
  if (s == "absolute") return EpsilonMode::Absolute;
  if (s == "quantile") return EpsilonMode::Quantile;
  return std::nullopt;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvariantError("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double quantile_epsilon(std::span<const double> demo_scores, std::span<const TrajectoryScore> scores, double q) {
  std::vector<double> ref(demo_scores.begin(), demo_scores.end());
  for (const auto& s : scores) {
    if (s.alpha < kAlphaCutoff && s.reached_goal && s.score) ref.push_back(*s.score);
  }
  if (ref.empty()) throw InvariantError("quantile threshold needs demo or low-alpha goal-reaching scores");
  return quantile(std::move(ref), q);
}

std::vector<TrajectoryScore> filter_theta(std::span<const TrajectoryScore> scores, double epsilon) {
  if (scores.empty()) throw InvariantError("cannot filter an empty dataset");
  std::vector<TrajectoryScore> out;
  for (const auto& s : scores) {
    if (s.alpha >= kAlphaCutoff && s.reached_goal && s.score && *s.score > epsilon) out.push_back(s);
  }
  return out;
}

BugReport evaluate_bugs(std::span<const TrajectoryScore> all, std::span<const TrajectoryScore> theta,
                        const sim::VoxelMap& map) {
  BugReport r;
  r.planted = static_cast<int>(map.bugs.size());
  for (const auto& s : all) r.found_mask |= s.bugs_entered;
  for (const auto& s : theta) r.highlighted_mask |= s.bugs_entered;
  r.found = std::popcount(r.found_mask);
  r.highlighted = std::popcount(r.highlighted_mask);
  for (auto kind : {sim::BugKind::MissingCollision, sim::BugKind::InfiniteJumpGlitch,
                    sim::BugKind::UnintendedClimbable}) {
    BugTally t;
    t.kind = std::string(sim::bug_kind_name(kind));
    for (std::size_t i = 0; i < map.bugs.size(); ++i) {
      if (map.bugs[i].kind != kind) continue;
      ++t.planted;
      t.found += (r.found_mask >> i) & 1u;
      t.highlighted += (r.highlighted_mask >> i) & 1u;
    }
    r.by_kind.push_back(t);
  }
  return r;
}

namespace {

json score_json(const TrajectoryScore& s) {
  json j{{"id", s.id}, {"alpha", s.alpha}, {"reached_goal", s.reached_goal}, {"T", s.T}, {"bugs", s.bugs_entered}};
  j["score"] = s.score ? json(*s.score) : json(nullptr);
  return j;
}

}  // namespace

json report_to_json(const TriageReport& r) {
  json j;
  j["format_version"] = kReportFormatVersion;
  j["mode"] = epsilon_mode_name(r.mode);
  j["epsilon"] = r.epsilon;
  if (r.mode == EpsilonMode::Quantile) j["quantile"] = r.quantile;
  j["trajectories"] = r.trajectories;
  j["coverage"] = r.coverage;
  j["theta"] = json::array();
  for (const auto& s : r.theta) j["theta"].push_back(score_json(s));
  j["demo_scores"] = r.demo_scores;
  json bugs{{"planted", r.bugs.planted},
            {"found", r.bugs.found},
            {"highlighted", r.bugs.highlighted},
            {"found_mask", r.bugs.found_mask},
            {"highlighted_mask", r.bugs.highlighted_mask}};
  bugs["by_kind"] = json::array();
  for (const auto& t : r.bugs.by_kind) {
    bugs["by_kind"].push_back({{"kind", t.kind}, {"planted", t.planted}, {"found", t.found}, {"highlighted", t.highlighted}});
  }
  j["bugs"] = std::move(bugs);
  j["scores"] = json::array();
  for (const auto& s : r.scores) j["scores"].push_back(score_json(s));
  return j;
}

TriageReport triage_run(const std::filesystem::path& run_dir, EpsilonMode mode, double epsilon, double q) {
  const auto config_path = run_dir / "config.json";
  const auto g_path = run_dir / "G.jsonl";
  const auto ckpt = run_dir / "checkpoints";
  for (const auto& p : {config_path, g_path, ckpt / "rnd_target.bin", ckpt / "rnd_predictor.bin"}) {
    if (!std::filesystem::exists(p)) throw InvariantError("run directory is incomplete: missing " + p.string());
  }
  std::ifstream in(config_path);
  const trainer::TrainConfig cfg = trainer::config_from_json(json::parse(in));
  const sim::VoxelMap map = sim::load_map_file(cfg.map);
  curiosity::RNDPair rnd(cfg.arch(), 0, cfg.curiosity);
  rnd.load((ckpt / "rnd_target.bin").string(), (ckpt / "rnd_predictor.bin").string());

  const std::vector<trainer::TrajectoryRecord> g = trainer::load_dataset(g_path);
  if (g.empty()) throw InvariantError("dataset " + g_path.string() + " is empty");

  TriageReport r;
  r.mode = mode;
  r.quantile = q;
  r.trajectories = g.size();
  r.coverage = trainer::coverage(g);
  r.scores = score_dataset(g, rnd);
  if (!cfg.demos.empty()) {
    for (const auto& d : imitation::load_demos(map, cfg.demos)) {
      if (auto s = score_trajectory(d.trajectory.states, d.trajectory.first_goal_step, rnd)) r.demo_scores.push_back(*s);
    }
  }
  r.epsilon = mode == EpsilonMode::Absolute ? epsilon : quantile_epsilon(r.demo_scores, r.scores, q);
  r.theta = filter_theta(r.scores, r.epsilon);
  r.bugs = evaluate_bugs(r.scores, r.theta, map);
  return r;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string format_export(std::span<const ExportRecord> records) {
  std::ostringstream os;
  os << "# ccpt-trajectories " << kExportFormatVersion << '\n';
  for (const auto& r : records) {
    if (r.tag.empty() || r.tag.find_first_of(" \t\n") != std::string::npos) {
      throw InvariantError("export tags must be single words");
    }
    if (r.bug_masks.size() != r.positions.size()) throw ShapeError("export record needs one bug mask per position");
    os << "T " << r.id << ' ' << r.tag << ' ' << fmt_double(r.alpha) << ' '
       << (r.score ? fmt_double(*r.score) : std::string("nan")) << ' ' << (r.reached_goal ? 1 : 0) << ' ' << r.bugs
       << ' ' << r.positions.size() << '\n';
    for (std::size_t i = 0; i < r.positions.size(); ++i) {
      const auto& p = r.positions[i];
      os << "P " << i << ' ' << p.x << ' ' << p.y << ' ' << p.z << ' ' << r.bug_masks[i] << '\n';
    }
  }
  return os.str();
}

std::vector<ExportRecord> parse_export(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) { throw ParseError(msg, lineno, "export"); };
  if (!std::getline(in, line)) throw ParseError("empty export file", 1, "export");
  ++lineno;
  {
    std::istringstream hs(line);
    std::string hash, magic;
    int version = 0;
    if (!(hs >> hash >> magic >> version) || hash != "#" || magic != "ccpt-trajectories") fail("missing export header");
    if (version != kExportFormatVersion) fail("unsupported export version " + std::to_string(version));
  }
  std::vector<ExportRecord> out;
  std::size_t pending = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "T") {
      if (pending != 0) fail("trajectory ended early");
      ExportRecord r;
      std::string alpha, score;
      int reached = 0;
      if (!(ls >> r.id >> r.tag >> alpha >> score >> reached >> r.bugs >> pending)) fail("malformed trajectory header");
      r.alpha = std::stod(alpha);
      if (score != "nan") r.score = std::stod(score);
      r.reached_goal = reached != 0;
      out.push_back(std::move(r));
    } else if (kind == "P") {
      if (out.empty() || pending == 0) fail("position row outside a trajectory");
      std::size_t step = 0;
      sim::Vec3 p;
      std::uint32_t mask = 0;
      if (!(ls >> step >> p.x >> p.y >> p.z >> mask)) fail("malformed position row");
      if (step != out.back().positions.size()) fail("position rows out of order");
      out.back().positions.push_back(p);
      out.back().bug_masks.push_back(mask);
      --pending;
    } else {
      fail("unknown row type '" + kind + "'");
    }
  }
  if (pending != 0) fail("trajectory ended early");
  return out;
}

void write_export(const std::filesystem::path& path, std::span<const ExportRecord> records) {
  std::ofstream out(path);
  if (!out) throw InvariantError("cannot write " + path.string());
  out << format_export(records);
  if (!out) throw InvariantError("write failed for " + path.string());
}

ExportRecord export_record(const trainer::TrajectoryRecord& r, const std::string& tag, std::optional<double> score) {
  ExportRecord e;
  e.id = r.id;
  e.tag = tag;
  e.alpha = r.alpha;
  e.score = score;
  e.reached_goal = r.reached_goal;
  e.bugs = r.bugs_entered();
  for (const auto& s : r.states) e.positions.push_back(s.pos);
  e.bug_masks = r.bug_masks;
  return e;
}

}  // namespace ccpt::triage
