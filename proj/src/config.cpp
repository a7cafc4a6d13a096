#include "vecquad/config.hpp"

#include <cstdlib>
#include <set>

#include <yaml-cpp/yaml.h>

#ifndef VECQUAD_DEFAULT_CONFIG_DIR
#define VECQUAD_DEFAULT_CONFIG_DIR "config"
#endif

namespace vecquad {

namespace {

// one mapping of a config file; remembers which keys were read so leftovers
// can be reported as unknown
class Section
{
public:
  Section(YAML::Node node, std::string path, std::string file)
    : node_(std::move(node)), path_(std::move(path)), file_(std::move(file))
  {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail("", "expected a mapping");
  }

  bool has(const char* key) const { return node_ && node_.IsMap() && node_[key]; }

  Section child(const char* key)
  {
    used_.insert(key);
    return Section(has(key) ? node_[key] : YAML::Node(), name(key), file_);
  }

  template <typename T>
  void get(const char* key, T& out)
  {
    used_.insert(key);
    if (!has(key)) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      fail(key, "has the wrong type");
    }
  }

  void get_deg(const char* key, double& out_rad)
  {
    double deg = out_rad * kRadToDeg;
    get(key, deg);
    out_rad = deg * kDegToRad;
  }

  void get_vec3(const char* key, Vec3& out)
  {
    used_.insert(key);
    if (!has(key)) return;
    const YAML::Node n = node_[key];
    if (n.IsScalar()) {
      double v = 0.0;
      get(key, v);
      out.setConstant(v);
      return;
    }
    if (!n.IsSequence() || n.size() != 3) fail(key, "must be a number or a list of 3 numbers");
    for (int a = 0; a < 3; ++a) {
      try {
        out(a) = n[a].as<double>();
      } catch (const YAML::Exception&) {
        fail(key, "has the wrong type");
      }
    }
  }

  void require_positive(const char* key, double v)
  {
    if (!(v > 0.0)) fail(key, "must be positive");
  }

  void finish() const
  {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) fail(key, "is not a known key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const
  {
    throw ConfigError(file_ + ": " + (key.empty() ? path_ : name(key)) + " " + what);
  }

private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  std::string file_;
  std::set<std::string> used_;
};

YAML::Node read_file(const std::filesystem::path& file)
{
  if (!std::filesystem::is_regular_file(file)) throw ConfigError(file.string() + ": no such file");
  try {
    return YAML::LoadFile(file.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

void read_pose(Section s, LegPose& pose)
{
  s.get_deg("hip_pitch_deg", pose.hip_pitch);
  s.get_deg("knee_pitch_deg", pose.knee_pitch);
  s.finish();
}

void read_mode(Section s, ModeSettings& m)
{
  s.get("rotor_weight", m.weights.rotor);
  s.get("joint_weight", m.weights.joint);
  s.get("max_joint_torque", m.max_joint_torque);
  s.require_positive("max_joint_torque", m.max_joint_torque);
  s.finish();
}

}  // namespace

std::filesystem::path default_config_dir()
{
  if (const char* env = std::getenv("VECQUAD_CONFIG_DIR"); env && *env) return env;
  return VECQUAD_DEFAULT_CONFIG_DIR;
}

RobotDescription load_robot(const std::filesystem::path& file)
{
  RobotDescription d;
  Section root(read_file(file), "", file.string());

  Section torso = root.child("torso");
  torso.get("half_width", d.torso_half_width);
  torso.get("mass", d.torso_mass);
  Vec3 inertia = d.torso_inertia.diagonal();
  torso.get_vec3("inertia_diagonal", inertia);
  d.torso_inertia = inertia.asDiagonal();
  torso.finish();

  Section link = root.child("link");
  link.get("length", d.link_length);
  link.get("radius", d.link_radius);
  double rod = d.links[0].rod_mass, module = d.links[0].module_mass;
  link.get("rod_mass", rod);
  link.get("module_mass", module);
  for (auto& l : d.links) l = LinkMass{rod, module};
  link.finish();

  Section rotor = root.child("rotor");
  rotor.get("position", d.rotor_position);
  rotor.get("vectoring_axis_offset", d.vectoring_axis_offset);
  rotor.get("max_thrust", d.max_thrust);
  rotor.get("max_vectoring_speed", d.max_vectoring_speed);
  rotor.finish();

  Section joints = root.child("joints");
  double lower = d.joint_limits[0].lower, upper = d.joint_limits[0].upper;
  joints.get_deg("lower_deg", lower);
  joints.get_deg("upper_deg", upper);
  for (auto& j : d.joint_limits) j = JointLimit{lower, upper};
  joints.get("max_torque", d.max_joint_torque);
  joints.get("max_speed", d.max_joint_speed);
  joints.finish();

  Section foot = root.child("foot");
  foot.get("radius", d.foot_radius);
  foot.finish();

  root.get_deg("first_hip_angle_deg", d.first_hip_angle);
  root.finish();

  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return d;
}

void apply_gains(ScenarioConfig& cfg, const std::filesystem::path& file)
{
  Section root(read_file(file), "", file.string());

  ControlGains& g = cfg.gains;
  Section pos = root.child("position");
  pos.get_vec3("p", g.force_p);
  pos.get_vec3("i", g.force_i);
  pos.get_vec3("d", g.force_d);
  pos.get("integral_limit", g.force_integral_limit);
  pos.finish();
  Section att = root.child("attitude");
  att.get_vec3("p", g.torque_p);
  att.get_vec3("i", g.torque_i);
  att.get_vec3("d", g.torque_d);
  att.get("integral_limit", g.torque_integral_limit);
  att.finish();
  Section joint = root.child("joint");
  joint.get("p", g.joint_p);
  joint.get("d", g.joint_d);
  joint.get("accel_limit", cfg.joint_accel);
  joint.require_positive("accel_limit", cfg.joint_accel);
  joint.finish();
  root.get("altitude_p", g.altitude_p);

  Section alloc = root.child("allocation");
  read_mode(alloc.child("aerial"), cfg.aerial);
  read_mode(alloc.child("terrestrial"), cfg.terrestrial);
  double reg = cfg.aerial.weights.regularization;
  alloc.get("regularization", reg);
  alloc.require_positive("regularization", reg);
  cfg.aerial.weights.regularization = cfg.terrestrial.weights.regularization = reg;
  alloc.get("box_half_width", cfg.box_half_width);
  alloc.get("planning_friction", cfg.planning_friction);
  Section refine = alloc.child("refine");
  refine.get("enabled", cfg.refine_enabled);
  refine.get("max_iterations", cfg.refine.max_iters);
  refine.get("tolerance", cfg.refine.tolerance);
  refine.finish();
  alloc.finish();

  Section gait = root.child("gait");
  gait.get("stride", cfg.gait.stride);
  gait.get("lift_height", cfg.gait.lift_height);
  gait.get_deg("touchdown_threshold_deg", cfg.gait.touchdown_threshold);
  gait.get_deg("joint_tolerance_deg", cfg.gait.joint_tolerance);
  gait.get("settle_time", cfg.gait.settle_time);
  gait.get("torso_speed", cfg.gait.torso_speed);
  gait.get("load_transfer_time", cfg.gait.load_transfer_time);
  gait.get("cycles", cfg.gait.cycles);
  gait.get("feedback", cfg.gait.feedback);
  gait.finish();

  Section sim = root.child("sim");
  sim.get("timestep", cfg.sim.timestep);
  sim.get("control_rate", cfg.control_rate);
  sim.require_positive("control_rate", cfg.control_rate);
  sim.get("ground_stiffness", cfg.sim.ground_stiffness);
  sim.get("ground_damping", cfg.sim.ground_damping);
  sim.get("tangential_damping", cfg.sim.tangential_damping);
  sim.get("friction", cfg.sim.friction);
  sim.get("thrust_time_constant", cfg.sim.thrust_time_constant);
  sim.get("servo_time_constant", cfg.sim.servo_time_constant);
  sim.get("joint_time_constant", cfg.sim.joint_time_constant);
  sim.get("position_noise", cfg.sim.position_noise);
  sim.get_deg("attitude_noise_deg", cfg.sim.attitude_noise);
  sim.get_deg("joint_noise_deg", cfg.sim.joint_noise);
  sim.get_deg("joint_bias_deg", cfg.sim.joint_bias);
  sim.finish();

  Section poses = root.child("poses");
  read_pose(poses.child("standing"), cfg.standing);
  read_pose(poses.child("extended"), cfg.extended);
  poses.finish();

  Section sc = root.child("scenario");
  sc.get("hover_height", cfg.hover_height);
  sc.get_vec3("hover_initial_offset", cfg.hover_initial_offset);
  Vec3 rpy_deg = cfg.hover_initial_rpy * kRadToDeg;
  sc.get_vec3("hover_initial_rpy_deg", rpy_deg);
  cfg.hover_initial_rpy = rpy_deg * kDegToRad;
  sc.get("transform_speed", cfg.transform_speed);
  sc.get("transform_hold", cfg.transform_hold);
  sc.get("transform_start", cfg.transform_start);
  sc.get("lift_leg", cfg.lift_leg);
  if (cfg.lift_leg < 0 || cfg.lift_leg >= kNumLegs) sc.fail("lift_leg", "must be 0..3");
  sc.get_deg("lift_hip_pitch_deg", cfg.lift_hip_pitch);
  sc.get("lift_start", cfg.lift_start);
  sc.get("lift_hold", cfg.lift_hold);
  sc.get("lift_speed", cfg.lift_speed);
  sc.require_positive("lift_speed", cfg.lift_speed);
  sc.require_positive("transform_speed", cfg.transform_speed);
  sc.get("takeoff_height", cfg.takeoff_height);
  sc.get("takeoff_time", cfg.takeoff_time);
  sc.get("post_takeoff", cfg.post_takeoff);
  sc.get("stand_settle", cfg.stand_settle);
  sc.finish();

  root.finish();

  try {
    cfg.gains.validate();
    cfg.sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

ScenarioConfig load_scenario_config(ScenarioKind kind, const std::filesystem::path& robot_file,
                                    const std::filesystem::path& gains_file)
{
  ScenarioConfig cfg;
  cfg.kind = kind;
  cfg.robot = load_robot(robot_file);
  apply_gains(cfg, gains_file);
  return cfg;
}

}  // namespace vecquad
