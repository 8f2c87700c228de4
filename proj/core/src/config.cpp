#include "viral/runtime/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "viral/errors.hpp"

namespace viral::runtime {

int head_history_len(HeadKind head) {
  switch (head) {
    case HeadKind::kHist2: return 2;
    case HeadKind::kHist4: return 4;
    case HeadKind::kHist8: return 8;
    default: return 1;
  }
}

const char* head_name(HeadKind head) {
  switch (head) {
    case HeadKind::kMlp: return "mlp";
    case HeadKind::kHist2: return "hist2";
    case HeadKind::kHist4: return "hist4";
    case HeadKind::kHist8: return "hist8";
    case HeadKind::kGru: return "gru";
  }
  return "mlp";
}

const char* encoder_name(EncoderKind enc) {
  return enc == EncoderKind::kConv ? "conv" : "patchmean";
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) fail(line, "malformed number '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    fail(line, "malformed number '" + v + "'");
  }
}

int64_t parse_int(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const int64_t d = std::stoll(v, &pos);
    if (pos != v.size()) fail(line, "malformed integer '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    fail(line, "malformed integer '" + v + "'");
  }
}

bool parse_bool(const std::string& v, int line) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  fail(line, "expected on/off, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, int line) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(line, "empty list entry");
    out.push_back(static_cast<int>(parse_int(item, line)));
  }
  if (out.empty()) fail(line, "empty list");
  return out;
}

// stage masks: "0-4", "1,3", "0-1,3-4"
uint8_t parse_mask(const std::string& v, int line) {
  uint8_t mask = 0;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const size_t dash = item.find('-');
    int lo, hi;
    if (dash == std::string::npos) {
      lo = hi = static_cast<int>(parse_int(item, line));
    } else {
      lo = static_cast<int>(parse_int(trim(item.substr(0, dash)), line));
      hi = static_cast<int>(parse_int(trim(item.substr(dash + 1)), line));
    }
    if (lo < 0 || hi > 4 || lo > hi) fail(line, "stage mask out of range: " + item);
    for (int s = lo; s <= hi; ++s) mask |= static_cast<uint8_t>(1u << s);
  }
  return mask;
}

reward::Term reward_term_by_name(const std::string& name, int line) {
  for (int t = 0; t < reward::kNumTerms; ++t)
    if (name == reward::term_name(static_cast<reward::Term>(t)))
      return static_cast<reward::Term>(t);
  fail(line, "unknown reward term '" + name + "'");
}

void check(bool ok, int line, const std::string& msg) {
  if (!ok) fail(line, msg);
}

void apply_key(ExperimentConfig& cfg, const std::string& section,
               const std::string& key, const std::string& value, int line) {
  auto d = [&] { return parse_double(value, line); };
  auto i = [&] { return static_cast<int>(parse_int(value, line)); };
  auto b = [&] { return parse_bool(value, line); };

  if (section.empty()) {
    if (key == "preset") {
      if (value == "paper") {
        apply_paper_preset(cfg);
        cfg.preset = "paper";
      } else if (value == "desk") {
        cfg.preset = "desk";
      } else {
        fail(line, "unknown preset '" + value + "'");
      }
      return;
    }
    fail(line, "key '" + key + "' outside any section");
  }

  if (section == "sim") {
    if (key == "horizon") {
      cfg.sim.horizon = i();
      check(cfg.sim.horizon >= 1, line, "horizon must be >= 1");
    } else if (key == "object_mode") {
      if (value == "single") cfg.sim.object_mode = sim::ObjectMode::kSingle;
      else if (value == "multi") cfg.sim.object_mode = sim::ObjectMode::kMulti;
      else fail(line, "object_mode must be single or multi");
    } else if (key == "table_height_lo") cfg.sim.ranges.height_lo = d();
    else if (key == "table_height_hi") cfg.sim.ranges.height_hi = d();
    else if (key == "table_depth_lo") cfg.sim.ranges.depth_lo = d();
    else if (key == "table_depth_hi") cfg.sim.ranges.depth_hi = d();
    else if (key == "table_width_lo") cfg.sim.ranges.width_lo = d();
    else if (key == "table_width_hi") cfg.sim.ranges.width_hi = d();
    else if (key == "table_thickness_lo") cfg.sim.ranges.thickness_lo = d();
    else if (key == "table_thickness_hi") cfg.sim.ranges.thickness_hi = d();
    else if (key == "spawn_dist_lo") cfg.sim.ranges.spawn_dist_lo = d();
    else if (key == "spawn_dist_hi") cfg.sim.ranges.spawn_dist_hi = d();
    else if (key == "spawn_face_err") cfg.sim.ranges.spawn_face_err = d();
    else fail(line, "unknown key sim." + key);
    check(cfg.sim.ranges.valid(), line, "scene ranges violate type invariants");
    return;
  }

  if (section == "reward") {
    if (key.rfind("w_", 0) == 0) {
      cfg.weights.rows[reward_term_by_name(key.substr(2), line)].weight = d();
    } else if (key.rfind("mask_", 0) == 0) {
      cfg.weights.rows[reward_term_by_name(key.substr(5), line)].mask =
          parse_mask(value, line);
    } else if (key.rfind("stage_w", 0) == 0 && key.size() == 8) {
      const int s = key[7] - '0';
      check(s >= 0 && s <= 4, line, "stage weight index out of range");
      cfg.weights.stage_weight[s] = d();
    } else {
      fail(line, "unknown key reward." + key);
    }
    return;
  }

  if (section == "percept") {
    auto& pc = cfg.percept;
    auto prob = [&](double v) {
      check(v >= 0.0 && v <= 1.0, line, "probability out of [0,1]");
      return v;
    };
    if (key == "randomization") pc.enabled = b();
    else if (key == "p_brightness") pc.p_brightness = prob(d());
    else if (key == "brightness_lo") pc.brightness_lo = d();
    else if (key == "brightness_hi") pc.brightness_hi = d();
    else if (key == "p_contrast") pc.p_contrast = prob(d());
    else if (key == "contrast_lo") pc.contrast_lo = d();
    else if (key == "contrast_hi") pc.contrast_hi = d();
    else if (key == "p_hue") pc.p_hue = prob(d());
    else if (key == "hue_lo") pc.hue_lo = d();
    else if (key == "hue_hi") pc.hue_hi = d();
    else if (key == "p_saturation") pc.p_saturation = prob(d());
    else if (key == "saturation_lo") pc.saturation_lo = d();
    else if (key == "saturation_hi") pc.saturation_hi = d();
    else if (key == "p_noise") pc.p_noise = prob(d());
    else if (key == "noise_lo") pc.noise_lo = d();
    else if (key == "noise_hi") pc.noise_hi = d();
    else if (key == "p_blur") pc.p_blur = prob(d());
    else if (key == "blur_sigma_lo") pc.blur_sigma_lo = d();
    else if (key == "blur_sigma_hi") pc.blur_sigma_hi = d();
    else if (key == "light_lo") pc.light_lo = d();
    else if (key == "light_hi") pc.light_hi = d();
    else if (key == "tint_lo") pc.tint_lo = d();
    else if (key == "tint_hi") pc.tint_hi = d();
    else if (key == "cam_dx") pc.cam_dx = d();
    else if (key == "cam_dy") pc.cam_dy = d();
    else if (key == "cam_dyaw") pc.cam_dyaw = d();
    else if (key == "delay_max") {
      pc.delay_max = i();
      check(pc.delay_max >= 0 && pc.delay_max <= 2, line, "delay_max must be in [0,2]");
    } else fail(line, "unknown key percept." + key);
    return;
  }

  if (section == "ppo") {
    auto& p = cfg.ppo;
    if (key == "gamma") {
      p.gamma = d();
      check(p.gamma > 0.0 && p.gamma <= 1.0, line, "gamma must be in (0,1]");
    } else if (key == "lam") {
      p.lam = d();
      check(p.lam > 0.0 && p.lam <= 1.0, line, "lam must be in (0,1]");
    } else if (key == "clip") {
      p.clip = d();
      check(p.clip > 0.0, line, "clip must be > 0");
    } else if (key == "entropy_coef") p.entropy_coef = d();
    else if (key == "vf_coef") p.vf_coef = d();
    else if (key == "epochs") { p.epochs = i(); check(p.epochs >= 1, line, "epochs >= 1"); }
    else if (key == "minibatches") { p.minibatches = i(); check(p.minibatches >= 1, line, "minibatches >= 1"); }
    else if (key == "lr") { p.lr = d(); check(p.lr > 0.0, line, "lr must be > 0"); }
    else if (key == "n_envs") { p.n_envs = i(); check(p.n_envs >= 1, line, "n_envs >= 1"); }
    else if (key == "steps") { p.steps = i(); check(p.steps >= 1, line, "steps >= 1"); }
    else if (key == "iters") { p.iters = i(); check(p.iters >= 1, line, "iters >= 1"); }
    else if (key == "eval_every") { p.eval_every = i(); check(p.eval_every >= 1, line, "eval_every >= 1"); }
    else if (key == "eval_episodes") { p.eval_episodes = i(); check(p.eval_episodes >= 1, line, "eval_episodes >= 1"); }
    else if (key == "rsi") p.rsi = b();
    else if (key == "rsi_prob") {
      p.rsi_prob = d();
      check(p.rsi_prob >= 0.0 && p.rsi_prob <= 1.0, line, "rsi_prob in [0,1]");
    } else if (key == "absolute_actions") p.absolute_actions = b();
    else if (key == "hidden") p.hidden = parse_int_list(value, line);
    else if (key == "init_std") { p.init_std = d(); check(p.init_std > 0.0, line, "init_std > 0"); }
    else fail(line, "unknown key ppo." + key);
    return;
  }

  if (section == "distill") {
    auto& ds = cfg.distill;
    if (key == "alpha") {
      ds.alpha = d();
      check(ds.alpha >= 0.0 && ds.alpha <= 1.0, line, "alpha must be in [0,1]");
    } else if (key == "lr") { ds.lr = d(); check(ds.lr > 0.0, line, "lr must be > 0"); }
    else if (key == "n_envs") { ds.n_envs = i(); check(ds.n_envs >= 1, line, "n_envs >= 1"); }
    else if (key == "steps") { ds.steps = i(); check(ds.steps >= 1, line, "steps >= 1"); }
    else if (key == "iters") { ds.iters = i(); check(ds.iters >= 1, line, "iters >= 1"); }
    else if (key == "minibatch") { ds.minibatch = i(); check(ds.minibatch >= 1, line, "minibatch >= 1"); }
    else if (key == "head") {
      if (value == "mlp") ds.head = HeadKind::kMlp;
      else if (value == "hist2") ds.head = HeadKind::kHist2;
      else if (value == "hist4") ds.head = HeadKind::kHist4;
      else if (value == "hist8") ds.head = HeadKind::kHist8;
      else if (value == "gru") ds.head = HeadKind::kGru;
      else fail(line, "head must be one of mlp,hist2,hist4,hist8,gru");
    } else if (key == "encoder") {
      if (value == "conv") ds.encoder = EncoderKind::kConv;
      else if (value == "patchmean") ds.encoder = EncoderKind::kPatchMean;
      else fail(line, "encoder must be conv or patchmean");
    } else if (key == "randomization") ds.randomization = b();
    else if (key == "teacher_ckpt") ds.teacher_ckpt = value;
    else if (key == "eval_episodes") { ds.eval_episodes = i(); check(ds.eval_episodes >= 1, line, "eval_episodes >= 1"); }
    else if (key == "hidden") ds.hidden = parse_int_list(value, line);
    else if (key == "gru_hidden") { ds.gru_hidden = i(); check(ds.gru_hidden >= 1, line, "gru_hidden >= 1"); }
    else fail(line, "unknown key distill." + key);
    return;
  }

  if (section == "sysid") {
    auto& sy = cfg.sysid;
    if (key == "a0") sy.initial.armature = d();
    else if (key == "k0") sy.initial.stiffness = d();
    else if (key == "d0") sy.initial.damping = d();
    else if (key == "hidden_a") sy.hidden.armature = d();
    else if (key == "hidden_k") sy.hidden.stiffness = d();
    else if (key == "hidden_d") sy.hidden.damping = d();
    else if (key == "noise_std") {
      sy.noise_std = d();
      check(sy.noise_std >= 0.0, line, "noise_std must be >= 0");
    } else if (key == "budget") {
      sy.budget = i();
      check(sy.budget >= 0, line, "budget must be >= 0");
    } else fail(line, "unknown key sysid." + key);
    check(sy.initial.valid() && sy.hidden.valid(), line,
          "finger parameters violate positivity invariants");
    return;
  }

  if (section == "runtime") {
    if (key == "workers") {
      cfg.runtime.workers = i();
      check(cfg.runtime.workers >= 0, line, "workers must be >= 0");
    } else if (key == "seed") {
      cfg.runtime.seed = static_cast<uint64_t>(parse_int(value, line));
    } else if (key == "out") {
      cfg.runtime.out_dir = value;
    } else fail(line, "unknown key runtime." + key);
    return;
  }

  fail(line, "unknown section [" + section + "]");
}

}  // namespace

void apply_paper_preset(ExperimentConfig& cfg) {
  cfg.ppo.gamma = 0.998;
  cfg.ppo.lr = 2e-5;
  cfg.ppo.entropy_coef = 0.01;
  cfg.ppo.vf_coef = 1.0;
  cfg.ppo.init_std = 0.5;
  cfg.ppo.hidden = {512, 256, 128};
  cfg.distill.lr = 2e-4;
  cfg.distill.hidden = {512, 256, 128};
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = raw;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (value.empty()) fail(line_no, "empty value for '" + key + "'");
    std::string sec = section;
    const size_t dot = key.find('.');
    if (dot != std::string::npos) {
      sec = key.substr(0, dot);
      key = key.substr(dot + 1);
    }
    apply_key(cfg, sec, key, value, line_no);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string ExperimentConfig::canonical_string() const {
  std::ostringstream o;
  o.precision(17);
  o << "preset=" << preset << '\n';
  o << "sim.horizon=" << sim.horizon << '\n';
  o << "sim.object_mode=" << (sim.object_mode == sim::ObjectMode::kMulti ? "multi" : "single") << '\n';
  const auto& r = sim.ranges;
  o << "sim.ranges=" << r.height_lo << ',' << r.height_hi << ',' << r.depth_lo << ','
    << r.depth_hi << ',' << r.width_lo << ',' << r.width_hi << ',' << r.thickness_lo
    << ',' << r.thickness_hi << ',' << r.spawn_dist_lo << ',' << r.spawn_dist_hi
    << ',' << r.spawn_face_err << '\n';
  for (int t = 0; t < reward::kNumTerms; ++t) {
    const auto& row = weights.rows[t];
    o << "reward." << reward::term_name(static_cast<reward::Term>(t)) << '='
      << row.weight << '/' << static_cast<int>(row.mask) << '\n';
  }
  for (int s = 0; s < 5; ++s) o << "reward.stage_w" << s << '=' << weights.stage_weight[s] << '\n';
  const auto& pc = percept;
  o << "percept=" << pc.enabled << ',' << pc.p_brightness << ',' << pc.brightness_lo
    << ',' << pc.brightness_hi << ',' << pc.p_contrast << ',' << pc.contrast_lo << ','
    << pc.contrast_hi << ',' << pc.p_hue << ',' << pc.hue_lo << ',' << pc.hue_hi << ','
    << pc.p_saturation << ',' << pc.saturation_lo << ',' << pc.saturation_hi << ','
    << pc.p_noise << ',' << pc.noise_lo << ',' << pc.noise_hi << ',' << pc.p_blur << ','
    << pc.blur_sigma_lo << ',' << pc.blur_sigma_hi << ',' << pc.light_lo << ','
    << pc.light_hi << ',' << pc.tint_lo << ',' << pc.tint_hi << ',' << pc.cam_dx << ','
    << pc.cam_dy << ',' << pc.cam_dyaw << ',' << pc.delay_max << '\n';
  const auto& p = ppo;
  o << "ppo=" << p.gamma << ',' << p.lam << ',' << p.clip << ',' << p.entropy_coef
    << ',' << p.vf_coef << ',' << p.epochs << ',' << p.minibatches << ',' << p.lr
    << ',' << p.n_envs << ',' << p.steps << ',' << p.iters << ',' << p.eval_every
    << ',' << p.eval_episodes << ',' << p.rsi << ',' << p.rsi_prob << ','
    << p.absolute_actions << ',' << p.init_std;
  for (int h : p.hidden) o << ",h" << h;
  o << '\n';
  const auto& ds = distill;
  o << "distill=" << ds.alpha << ',' << ds.lr << ',' << ds.n_envs << ',' << ds.steps
    << ',' << ds.iters << ',' << ds.minibatch << ',' << head_name(ds.head) << ','
    << encoder_name(ds.encoder) << ',' << ds.randomization << ',' << ds.teacher_ckpt
    << ',' << ds.eval_episodes << ',' << ds.gru_hidden;
  for (int h : ds.hidden) o << ",h" << h;
  o << '\n';
  const auto& sy = sysid;
  o << "sysid=" << sy.initial.armature << ',' << sy.initial.stiffness << ','
    << sy.initial.damping << ',' << sy.hidden.armature << ',' << sy.hidden.stiffness
    << ',' << sy.hidden.damping << ',' << sy.noise_std << ',' << sy.budget << '\n';
  o << "runtime=" << runtime.workers << ',' << runtime.seed << ',' << runtime.out_dir
    << '\n';
  return o.str();
}

uint64_t ExperimentConfig::config_hash() const {
  const std::string s = canonical_string();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace viral::runtime
