#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ccpt/cli/app.hpp"
#include "ccpt/encode/encode.hpp"
#include "ccpt/errors.hpp"
#include "ccpt/imitation/imitation.hpp"
#include "ccpt/sim/map_io.hpp"
#include "ccpt/triage/triage.hpp"

namespace py = pybind11;
using namespace ccpt;

namespace {

py::tuple vec(const sim::Vec3& v) { return py::make_tuple(v.x, v.y, v.z); }

sim::Action to_action(const std::string& name) {
  const auto a = sim::parse_action(name);
  if (!a) throw ConfigError("unknown action '" + name + "'");
  return *a;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Voxel navigation playtesting core";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<sim::AgentState>(m, "AgentState")
      .def_property_readonly("pos", [](const sim::AgentState& s) { return vec(s.pos); })
      .def_readonly("jump_ticks", &sim::AgentState::jump_ticks)
      .def_readonly("grounded", &sim::AgentState::grounded)
      .def_readonly("climbing", &sim::AgentState::climbing)
      .def("__eq__", [](const sim::AgentState& a, const sim::AgentState& b) { return a == b; })
      .def("__repr__", [](const sim::AgentState& s) {
        return "AgentState(pos=(" + std::to_string(s.pos.x) + ", " + std::to_string(s.pos.y) + ", " +
               std::to_string(s.pos.z) + "))";
      });

  py::class_<sim::VoxelMap>(m, "VoxelMap")
      .def_property_readonly("name", &sim::VoxelMap::name)
      .def_property_readonly("dims", [](const sim::VoxelMap& map) { return vec(map.dims()); })
      .def_property_readonly("spawn", [](const sim::VoxelMap& map) { return vec(map.spawn); })
      .def_property_readonly("bug_count", [](const sim::VoxelMap& map) { return map.bugs.size(); })
      .def("semantic",
           [](const sim::VoxelMap& map, int x, int y, int z) {
             const sim::Vec3 p{x, y, z};
             if (!map.in_bounds(p)) throw ShapeError("voxel out of bounds");
             return static_cast<int>(map.semantic(p));
           })
      .def("with_bug_physics", &sim::VoxelMap::with_bug_physics, py::arg("enabled"));

  m.def("load_map", &sim::load_map_file, py::arg("path"), "Load a JSON voxel map.");
  m.def("reset", [](const sim::VoxelMap& map) { return sim::reset(map); }, py::arg("map"));
  m.def(
      "step",
      [](const sim::VoxelMap& map, const sim::AgentState& s, const std::string& action, long tick) {
        const auto r = sim::step(map, s, to_action(action), tick);
        return py::make_tuple(r.state, r.extrinsic, r.done);
      },
      py::arg("map"), py::arg("state"), py::arg("action"), py::arg("tick"),
      "Advance one tick; returns (state, extrinsic reward, done).");
  m.def(
      "play_script",
      [](const sim::VoxelMap& map, const std::vector<std::string>& actions) {
        std::vector<sim::Action> acts;
        for (const auto& a : actions) acts.push_back(to_action(a));
        const auto t = sim::play_script(map, acts);
        py::list positions;
        for (const auto& s : t.states) positions.append(vec(s.pos));
        py::dict out;
        out["positions"] = positions;
        out["extrinsic"] = t.extrinsic;
        out["bug_masks"] = t.bug_masks;
        out["reached_goal"] = t.reached_goal;
        out["first_goal_step"] = t.first_goal_step;
        return out;
      },
      py::arg("map"), py::arg("actions"));
  m.def("action_names", [] {
    std::vector<std::string> out;
    for (int a = 0; a < sim::kActionCount; ++a) out.emplace_back(sim::action_name(static_cast<sim::Action>(a)));
    return out;
  });

  m.def(
      "positional_embedding",
      [](int pos, int dim, double base) { return encode::positional_embedding(pos, {dim, base}); },
      py::arg("pos"), py::arg("dim") = 32, py::arg("base") = 10000.0);
  m.def("imitation_reward", &imitation::imitation_reward, py::arg("d"));
  m.def(
      "average_curiosity",
      [](const std::vector<double>& r_c, int first_goal_step) { return triage::average_curiosity(r_c, first_goal_step); },
      py::arg("r_c"), py::arg("first_goal_step"));
  m.def("quantile", &triage::quantile, py::arg("values"), py::arg("q"));

  m.def(
      "triage",
      [](const std::filesystem::path& run_dir, const std::string& mode, double epsilon, double q) {
        const auto parsed = triage::parse_epsilon_mode(mode);
        if (!parsed) throw ConfigError("unknown epsilon mode '" + mode + "'");
        return json_to_py(triage::report_to_json(triage::triage_run(run_dir, *parsed, epsilon, q)));
      },
      py::arg("run_dir"), py::arg("mode") = "quantile", py::arg("epsilon") = 0.0,
      py::arg("quantile") = triage::kDefaultQuantile, "Triage a finished run; returns the report as a dict.");

  m.def(
      "read_export",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& r : triage::parse_export(sim::read_text_file(path))) {
          py::dict d;
          d["id"] = r.id;
          d["tag"] = r.tag;
          d["alpha"] = r.alpha;
          d["score"] = r.score;
          d["reached_goal"] = r.reached_goal;
          d["bugs"] = r.bugs;
          py::list pos;
          for (const auto& p : r.positions) pos.append(vec(p));
          d["positions"] = pos;
          d["bug_masks"] = r.bug_masks;
          out.append(d);
        }
        return out;
      },
      py::arg("path"), "Parse a trajectory export file into a list of dicts.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a ccpt subcommand in-process; returns (exit code, stdout, stderr).");
}
