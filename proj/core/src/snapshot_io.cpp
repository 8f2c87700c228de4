#include "viral/sim/snapshot_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "viral/errors.hpp"

namespace viral::sim {

namespace {

void put_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void put_vec(std::string& out, std::initializer_list<double> vals) {
  out += '[';
  bool first = true;
  for (double v : vals) {
    if (!first) out += ',';
    put_num(out, v);
    first = false;
  }
  out += ']';
}

void put_object(std::string& out, const ObjectState& o) {
  out += "{\"pos\":";
  put_vec(out, {o.pos.x, o.pos.y, o.pos.z});
  out += ",\"shape\":" + std::to_string(static_cast<int>(o.shape_id));
  out += ",\"grasp_radius\":";
  put_num(out, o.grasp_radius);
  out += ",\"attached\":" + std::string(o.attached ? "1" : "0");
  out += ",\"resting_table\":" +
         std::to_string(o.resting_table ? *o.resting_table : -1);
  out += '}';
}

void put_table(std::string& out, const TableGeom& t) {
  out += "{\"pose\":";
  put_vec(out, {t.pose.x, t.pose.y, t.pose.yaw});
  out += ",\"width\":";
  put_num(out, t.width);
  out += ",\"depth\":";
  put_num(out, t.depth);
  out += ",\"height\":";
  put_num(out, t.height);
  out += ",\"thickness\":";
  put_num(out, t.thickness);
  out += '}';
}

ObjectState parse_object(const nlohmann::json& j) {
  ObjectState o;
  o.pos = {j["pos"][0].get<double>(), j["pos"][1].get<double>(),
           j["pos"][2].get<double>()};
  o.shape_id = static_cast<Shape>(j["shape"].get<int>());
  o.grasp_radius = j["grasp_radius"].get<double>();
  o.attached = j["attached"].get<int>() != 0;
  const int rt = j["resting_table"].get<int>();
  if (rt >= 0) o.resting_table = rt;
  return o;
}

TableGeom parse_table(const nlohmann::json& j) {
  TableGeom t;
  t.pose = {j["pose"][0].get<double>(), j["pose"][1].get<double>(),
            j["pose"][2].get<double>()};
  t.width = j["width"].get<double>();
  t.depth = j["depth"].get<double>();
  t.height = j["height"].get<double>();
  t.thickness = j["thickness"].get<double>();
  return t;
}

}  // namespace

std::string snapshot_to_json(const DemoSnapshot& snap) {
  const WorldState& w = snap.state;
  std::string out;
  out.reserve(1024);
  out += "{\"demo_id\":" + std::to_string(snap.demo_id);
  out += ",\"source_step\":" + std::to_string(snap.source_step);
  out += ",\"base\":";
  put_vec(out, {w.base.x, w.base.y, w.base.yaw});
  out += ",\"base_vel\":";
  put_vec(out, {w.base_vel[0], w.base_vel[1], w.base_vel[2]});
  out += ",\"q_arm\":";
  put_vec(out, {w.joints.q_arm[0], w.joints.q_arm[1]});
  out += ",\"dq_arm\":";
  put_vec(out, {w.joints.dq_arm[0], w.joints.dq_arm[1]});
  out += ",\"g\":";
  put_num(out, w.joints.g);
  out += ",\"dg\":";
  put_num(out, w.joints.dg);
  out += ",\"v_cmd\":";
  put_vec(out, {w.cmd.v_cmd[0], w.cmd.v_cmd[1]});
  out += ",\"w_cmd\":";
  put_num(out, w.cmd.w_cmd);
  out += ",\"q_arm_tgt\":";
  put_vec(out, {w.cmd.q_arm_tgt[0], w.cmd.q_arm_tgt[1]});
  out += ",\"g_tgt\":";
  put_num(out, w.cmd.g_tgt);
  out += ",\"last_delta\":";
  const auto ld = w.last_delta.flat();
  put_vec(out, {ld[0], ld[1], ld[2], ld[3], ld[4], ld[5]});
  out += ",\"hold_obj\":";
  put_object(out, w.hold_obj);
  out += ",\"grasp_obj\":";
  put_object(out, w.grasp_obj);
  out += ",\"table_a\":";
  put_table(out, w.scene.table_a);
  out += ",\"table_b\":";
  put_table(out, w.scene.table_b);
  out += ",\"tray\":";
  put_vec(out, {w.scene.tray.pose.x, w.scene.tray.pose.y, w.scene.tray.radius});
  out += ",\"floor\":";
  put_num(out, w.scene.floor_half_extent);
  out += ",\"stage\":" + std::to_string(w.stage);
  out += ",\"cycle_count\":" + std::to_string(w.cycle_count);
  out += ",\"t\":" + std::to_string(w.t);
  out += ",\"active_table\":" + std::to_string(w.active_table);
  out += ",\"lift_goal\":";
  put_vec(out, {w.lift_goal.x, w.lift_goal.y, w.lift_goal.z});
  out += ",\"object_mode\":" +
         std::to_string(w.object_mode == ObjectMode::kMulti ? 1 : 0);
  out += '}';
  return out;
}

DemoSnapshot snapshot_from_json(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  DemoSnapshot snap;
  snap.demo_id = j["demo_id"].get<int>();
  snap.source_step = j["source_step"].get<int>();
  WorldState& w = snap.state;
  w.base = {j["base"][0].get<double>(), j["base"][1].get<double>(),
            j["base"][2].get<double>()};
  for (int i = 0; i < 3; ++i) w.base_vel[i] = j["base_vel"][i].get<double>();
  for (int i = 0; i < 2; ++i) w.joints.q_arm[i] = j["q_arm"][i].get<double>();
  for (int i = 0; i < 2; ++i) w.joints.dq_arm[i] = j["dq_arm"][i].get<double>();
  w.joints.g = j["g"].get<double>();
  w.joints.dg = j["dg"].get<double>();
  for (int i = 0; i < 2; ++i) w.cmd.v_cmd[i] = j["v_cmd"][i].get<double>();
  w.cmd.w_cmd = j["w_cmd"].get<double>();
  for (int i = 0; i < 2; ++i) w.cmd.q_arm_tgt[i] = j["q_arm_tgt"][i].get<double>();
  w.cmd.g_tgt = j["g_tgt"].get<double>();
  std::array<double, 6> ld{};
  for (int i = 0; i < 6; ++i) ld[i] = j["last_delta"][i].get<double>();
  w.last_delta = ActionDelta::from_flat(ld);
  w.hold_obj = parse_object(j["hold_obj"]);
  w.grasp_obj = parse_object(j["grasp_obj"]);
  w.scene.table_a = parse_table(j["table_a"]);
  w.scene.table_b = parse_table(j["table_b"]);
  w.scene.tray.pose = {j["tray"][0].get<double>(), j["tray"][1].get<double>(), 0.0};
  w.scene.tray.radius = j["tray"][2].get<double>();
  w.scene.floor_half_extent = j["floor"].get<double>();
  w.stage = j["stage"].get<int>();
  w.cycle_count = j["cycle_count"].get<int>();
  w.t = j["t"].get<int>();
  w.active_table = j["active_table"].get<int>();
  w.lift_goal = {j["lift_goal"][0].get<double>(), j["lift_goal"][1].get<double>(),
                 j["lift_goal"][2].get<double>()};
  w.object_mode = j["object_mode"].get<int>() != 0 ? ObjectMode::kMulti
                                                   : ObjectMode::kSingle;
  return snap;
}

void write_demo_file(const std::string& path, const std::vector<DemoSnapshot>& buffer) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open demo file for writing: " + path);
  out << "{\"format\":\"viral-demo\",\"version\":1}\n";
  for (const DemoSnapshot& s : buffer) out << snapshot_to_json(s) << '\n';
  if (!out) throw IoError("write failure on demo file: " + path);
}

std::vector<DemoSnapshot> read_demo_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open demo file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("demo file is empty: " + path);
  const nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "viral-demo" || header.value("version", 0) != 1)
    throw IoError("demo file has an unrecognized header: " + path);
  std::vector<DemoSnapshot> buffer;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    buffer.push_back(snapshot_from_json(line));
  }
  return buffer;
}

}  // namespace viral::sim
