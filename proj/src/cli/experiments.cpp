#include "ccpt/cli/experiments.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "ccpt/errors.hpp"
#include "json.hpp"

namespace ccpt::cli {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw InvariantError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

trainer::TrainConfig fixed_alpha(trainer::TrainConfig c, double a) {
  c.alpha_mode = trainer::AlphaMode::Fixed;
  c.alpha_value = a;
  return c;
}

}  // namespace

RunOutcome ensure_run(const trainer::TrainConfig& cfg, const std::filesystem::path& dir,
                      const std::function<void(const trainer::IterationMetrics&)>& progress) {
  if (std::filesystem::exists(dir)) {
    const auto manifest_path = dir / "manifest.json";
    const auto config_path = dir / "config.json";
    if (std::filesystem::exists(manifest_path) && std::filesystem::exists(config_path)) {
      const json manifest = read_json(manifest_path);
      const trainer::TrainConfig existing = trainer::config_from_json(read_json(config_path));
      if (manifest.value("status", "") == "complete" && trainer::config_hash(existing) == trainer::config_hash(cfg)) {
        return {dir, true};
      }
    }
    throw ConfigError("run directory " + dir.string() + " exists and does not hold a completed run of this config");
  }
  trainer::run_training(cfg, dir, progress);
  return {dir, false};
}

std::vector<MetricsPoint> load_metrics(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "metrics.jsonl";
  std::ifstream in(path);
  if (!in) throw InvariantError("cannot read " + path.string());
  std::vector<MetricsPoint> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("iteration").get<int>(), j.at("env_steps").get<long>(), j.at("coverage").get<std::size_t>()});
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

std::vector<RunSpec> reward_ablation_specs(const trainer::TrainConfig& base) {
  trainer::TrainConfig ccpt = base;
  ccpt.alpha_mode = trainer::AlphaMode::Sample;
  return {{"CCPT", "ccpt", ccpt},
          {"Linear Combination", "linear-combination", fixed_alpha(base, 0.5)},
          {"Only Imitation", "only-imitation", fixed_alpha(base, 0.0)},
          {"Only Curiosity", "only-curiosity", fixed_alpha(base, 1.0)}};
}

std::vector<RewardRow> ablate_reward(const trainer::TrainConfig& base, const std::filesystem::path& out_root,
                                     double q, const Progress& progress) {
  const auto specs = reward_ablation_specs(base);
  for (const auto& s : specs) trainer::validate(s.cfg);
  std::vector<RewardRow> rows;
  for (const auto& s : specs) {
    const auto dir = out_root / s.slug;
    ensure_run(s.cfg, dir, [&](const trainer::IterationMetrics& m) {
      if (progress) progress(s.label, m);
    });
    const triage::TriageReport r = triage::triage_run(dir, triage::EpsilonMode::Quantile, 0.0, q);
    RewardRow row;
    row.label = s.label;
    if (s.cfg.alpha_mode == trainer::AlphaMode::Sample) {
      row.alpha = "U(0,1)";
    } else {
      std::ostringstream os;
      os << s.cfg.alpha_value;
      row.alpha = os.str();
    }
    row.coverage = r.coverage;
    row.bugs_found = r.bugs.found;
    row.bugs_highlighted = r.bugs.highlighted;
    row.theta = r.theta.size();
    row.epsilon = r.epsilon;
    row.run_dir = dir;
    rows.push_back(row);
  }
  return rows;
}

std::string format_reward_table(const std::vector<RewardRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "method" << std::setw(8) << "alpha" << std::right << std::setw(10) << "coverage"
     << std::setw(12) << "bugs_found" << std::setw(18) << "bugs_highlighted" << std::setw(8) << "theta"
     << std::setw(14) << "epsilon" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(20) << r.label << std::setw(8) << r.alpha << std::right << std::setw(10)
       << r.coverage << std::setw(12) << r.bugs_found << std::setw(18) << r.bugs_highlighted << std::setw(8)
       << r.theta << std::setw(14) << std::setprecision(6) << r.epsilon << '\n';
  }
  return os.str();
}

std::vector<RunSpec> encoding_ablation_specs(const trainer::TrainConfig& base) {
  std::vector<RunSpec> out;
  trainer::TrainConfig full = base;
  full.position = encode::PositionMode::Sinusoidal;
  full.local = encode::LocalMode::Occupancy;
  out.push_back({"full", "ccpt", full});
  trainer::TrainConfig c = full;
  c.position = encode::PositionMode::Normalized;
  out.push_back({"normalized", "encoding-normalized", c});
  c = full;
  c.position = encode::PositionMode::Learned;
  out.push_back({"learned", "encoding-learned", c});
  c = full;
  c.local = encode::LocalMode::None;
  out.push_back({"global-only", "encoding-global-only", c});
  c = full;
  c.local = encode::LocalMode::Raycast;
  out.push_back({"raycast", "encoding-raycast", c});
  return out;
}

std::vector<Series> ablate_encoding(const trainer::TrainConfig& base, const std::filesystem::path& out_root,
                                    const Progress& progress) {
  const auto specs = encoding_ablation_specs(base);
  for (const auto& s : specs) trainer::validate(s.cfg);
  std::vector<Series> out;
  for (const auto& s : specs) {
    const auto dir = out_root / s.slug;
    ensure_run(s.cfg, dir, [&](const trainer::IterationMetrics& m) {
      if (progress) progress(s.label, m);
    });
    out.push_back({s.label, load_metrics(dir), dir});
  }
  return out;
}

std::string format_series(const std::vector<Series>& series) {
  std::ostringstream os;
  os << "series\titeration\tenv_steps\tcoverage\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) os << s.label << '\t' << p.iteration << '\t' << p.env_steps << '\t' << p.coverage << '\n';
  }
  return os.str();
}

}  // namespace ccpt::cli
