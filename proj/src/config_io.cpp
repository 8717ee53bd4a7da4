#include "explo/config_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace explo::mission {

namespace {

using json = nlohmann::ordered_json;

/// Reads keys from one JSON object and rejects any key nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = take(key);
    if (!v) return;
    read(*v, out, where(key));
  }

  /// Nested object, or nullptr when absent.
  const json* child(const char* key) {
    const json* v = take(key);
    if (v && !v->is_object()) throw ConfigError(where(key) + ": expected an object");
    return v;
  }
  const json* array(const char* key) {
    const json* v = take(key);
    if (v && !v->is_array()) throw ConfigError(where(key) + ": expected an array");
    return v;
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "config" : path_;
    return key ? p + "." + key : p;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + where(it.key().c_str()) + "'");
  }

 private:
  const json* take(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  static void read(const json& v, double& out, const std::string& at) {
    if (!v.is_number()) throw ConfigError(at + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(at + ": not finite");
  }
  static void read(const json& v, int& out, const std::string& at) {
    if (!v.is_number_integer()) throw ConfigError(at + ": expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, std::int64_t& out, const std::string& at) {
    if (!v.is_number_integer()) throw ConfigError(at + ": expected an integer");
    out = v.get<std::int64_t>();
  }
  static void read(const json& v, std::uint64_t& out, const std::string& at) {
    if (!v.is_number_unsigned()) throw ConfigError(at + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, bool& out, const std::string& at) {
    if (!v.is_boolean()) throw ConfigError(at + ": expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, std::string& out, const std::string& at) {
    if (!v.is_string()) throw ConfigError(at + ": expected a string");
    out = v.get<std::string>();
  }
  template <int N>
  static void read(const json& v, Eigen::Matrix<double, N, 1>& out, const std::string& at) {
    if (!v.is_array() || v.size() != N) throw ConfigError(at + ": expected an array of " + std::to_string(N) + " numbers");
    for (int k = 0; k < N; ++k) read(v[k], out[k], at);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <int N>
json vec(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (int k = 0; k < N; ++k) a.push_back(v[k]);
  return a;
}

json primitives_to_json(const std::vector<Cylinder>& cyl, const std::vector<Box>& boxes,
                        const std::vector<HalfSpace>& hs) {
  json out = json::object();
  json c = json::array(), b = json::array(), h = json::array();
  for (const auto& x : cyl)
    c.push_back({{"center", vec<2>(x.center)}, {"radius", x.radius}, {"z_min", x.z_min}, {"z_max", x.z_max}});
  for (const auto& x : boxes) b.push_back({{"min", vec<3>(x.min)}, {"max", vec<3>(x.max)}});
  for (const auto& x : hs) h.push_back({{"normal", vec<3>(x.normal)}, {"offset", x.offset}});
  out["cylinders"] = c;
  out["boxes"] = b;
  out["halfspaces"] = h;
  return out;
}

void read_primitives(Reader& r, std::vector<Cylinder>& cyl, std::vector<Box>& boxes, std::vector<HalfSpace>& hs) {
  if (const json* a = r.array("cylinders")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      Reader e((*a)[i], r.where("cylinders") + "[" + std::to_string(i) + "]");
      Cylinder c;
      e.get("center", c.center);
      e.get("radius", c.radius);
      e.get("z_min", c.z_min);
      e.get("z_max", c.z_max);
      e.finish();
      cyl.push_back(c);
    }
  }
  if (const json* a = r.array("boxes")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      Reader e((*a)[i], r.where("boxes") + "[" + std::to_string(i) + "]");
      Box b;
      e.get("min", b.min);
      e.get("max", b.max);
      e.finish();
      boxes.push_back(b);
    }
  }
  if (const json* a = r.array("halfspaces")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      Reader e((*a)[i], r.where("halfspaces") + "[" + std::to_string(i) + "]");
      HalfSpace h;
      e.get("normal", h.normal);
      e.get("offset", h.offset);
      e.finish();
      hs.push_back(h);
    }
  }
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;

  const auto& s = c.scene;
  json scene{{"type", s.type},
             {"seed", s.seed},
             {"min", vec<2>(s.min)},
             {"max", vec<2>(s.max)},
             {"height", s.height},
             {"density", s.density},
             {"radius_min", s.radius_min},
             {"radius_max", s.radius_max},
             {"min_gap", s.min_gap},
             {"start_clearance", s.start_clearance},
             {"pillar_pitch", s.pillar_pitch},
             {"pillar_size", s.pillar_size},
             {"wall_thickness", s.wall_thickness},
             {"parked_cars", s.parked_cars}};
  const json prims = primitives_to_json(s.cylinders, s.boxes, s.halfspaces);
  for (auto& [k, v] : prims.items()) scene[k] = v;
  j["scene"] = scene;
  j["boundary"] = {{"min", vec<2>(c.boundary_min)}, {"max", vec<2>(c.boundary_max)}};

  const auto& l = c.lidar;
  j["lidar"] = {{"h_fov_deg", l.h_fov_deg}, {"v_fov_deg", l.v_fov_deg}, {"n_azimuth", l.n_azimuth},
                {"n_elevation", l.n_elevation}, {"max_range", l.max_range}, {"rate_hz", l.rate_hz},
                {"noise_sigma", l.noise_sigma}};
  const auto& m = c.imu;
  j["imu"] = {{"rate_hz", m.rate_hz},
              {"gyro_noise_density", m.gyro_noise_density},
              {"accel_noise_density", m.accel_noise_density},
              {"bias_gyro", vec<3>(m.bias_gyro)},
              {"bias_accel", vec<3>(m.bias_accel)},
              {"gravity", m.gravity}};
  j["pose_noise"] = {{"sigma_pos", c.pose_noise.sigma_pos},
                     {"sigma_rot", c.pose_noise.sigma_rot},
                     {"drift_rate", c.pose_noise.drift_rate}};
  const auto& g = c.grid;
  j["grid"] = {{"length", g.length}, {"width", g.width}, {"height", g.height}, {"size", g.size},
               {"inflation", g.inflation}, {"symmetric_inflation", g.symmetric_inflation},
               {"fusion_frames", g.fusion_frames}};
  const auto& p = c.planner;
  const auto& w = p.cost;
  j["planner"] = {{"lambda_smooth", w.lambda_smooth},
                  {"lambda_collision", w.lambda_collision},
                  {"lambda_feasibility", w.lambda_feasibility},
                  {"safe_distance", w.safe_distance},
                  {"w_vel", w.w_vel},
                  {"w_acc", w.w_acc},
                  {"w_jerk", w.w_jerk},
                  {"v_max", w.v_max},
                  {"a_max", w.a_max},
                  {"j_max", w.j_max},
                  {"limit_ratio", w.limit_ratio},
                  {"junction_ratio", w.junction_ratio},
                  {"epsilon", w.epsilon},
                  {"max_iters", p.max_iters},
                  {"tol", p.tol},
                  {"use_lbfgs", p.use_lbfgs},
                  {"multi_anchor", p.multi_anchor},
                  {"max_rounds", p.max_rounds},
                  {"horizon", p.horizon},
                  {"control_spacing", p.control_spacing},
                  {"cruise_speed", p.cruise_speed},
                  {"route_clearance", p.route_clearance},
                  {"replan_lead", p.replan_lead}};
  const auto& e = c.explore;
  j["explore"] = {{"mode", explore::to_string(e.mode)},
                  {"lambda_info", e.weights.lambda_info},
                  {"lambda_dist", e.weights.lambda_dist},
                  {"lambda_dir", e.weights.lambda_dir},
                  {"stop_threshold", e.weights.stop_threshold},
                  {"info_radius", e.weights.info_radius},
                  {"rrt_step", e.rrt.step},
                  {"rrt_iterations", e.rrt.iterations},
                  {"candidate_clearance", e.rrt.clearance},
                  {"known_window", e.rrt.window},
                  {"known_limit", e.rrt.known_limit},
                  {"resolution", e.resolution},
                  {"cloud_resolution", e.cloud_resolution},
                  {"slice_lo", e.slice.z_lo},
                  {"slice_hi", e.slice.z_hi},
                  {"carve_below", e.slice.carve_below}};
  j["rates"] = {{"track", c.rates.track}, {"collision_check", c.rates.collision_check},
                {"lidar", c.rates.lidar}, {"imu", c.rates.imu}};
  const auto& mi = c.mission;
  j["mission"] = {{"start", vec<2>(mi.start)},
                  {"altitude", mi.altitude},
                  {"goal_tolerance", mi.goal_tolerance},
                  {"max_time", mi.max_time},
                  {"max_failures", mi.max_failures},
                  {"return_to_start", mi.return_to_start},
                  {"follower_lag", mi.follower_lag},
                  {"ground_filter", mi.ground_filter},
                  {"lidar_offset", vec<3>(mi.lidar_offset)},
                  {"write_snapshots", mi.write_snapshots}};
  return j;
}

ScenarioConfig from_json(const json& j) {
  ScenarioConfig c;
  Reader r(j, "");
  if (!j.contains("version")) throw ConfigError("config.version is required");
  r.get("version", c.version);
  if (c.version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(c.version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  r.get("seed", c.seed);

  if (const json* v = r.child("scene")) {
    Reader s(*v, "scene");
    auto& sc = c.scene;
    s.get("type", sc.type);
    s.get("seed", sc.seed);
    s.get("min", sc.min);
    s.get("max", sc.max);
    s.get("height", sc.height);
    s.get("density", sc.density);
    s.get("radius_min", sc.radius_min);
    s.get("radius_max", sc.radius_max);
    s.get("min_gap", sc.min_gap);
    s.get("start_clearance", sc.start_clearance);
    s.get("pillar_pitch", sc.pillar_pitch);
    s.get("pillar_size", sc.pillar_size);
    s.get("wall_thickness", sc.wall_thickness);
    s.get("parked_cars", sc.parked_cars);
    read_primitives(s, sc.cylinders, sc.boxes, sc.halfspaces);
    s.finish();
  }
  if (const json* v = r.child("boundary")) {
    Reader b(*v, "boundary");
    b.get("min", c.boundary_min);
    b.get("max", c.boundary_max);
    b.finish();
  }
  if (const json* v = r.child("lidar")) {
    Reader l(*v, "lidar");
    l.get("h_fov_deg", c.lidar.h_fov_deg);
    l.get("v_fov_deg", c.lidar.v_fov_deg);
    l.get("n_azimuth", c.lidar.n_azimuth);
    l.get("n_elevation", c.lidar.n_elevation);
    l.get("max_range", c.lidar.max_range);
    l.get("rate_hz", c.lidar.rate_hz);
    l.get("noise_sigma", c.lidar.noise_sigma);
    l.finish();
  }
  if (const json* v = r.child("imu")) {
    Reader m(*v, "imu");
    m.get("rate_hz", c.imu.rate_hz);
    m.get("gyro_noise_density", c.imu.gyro_noise_density);
    m.get("accel_noise_density", c.imu.accel_noise_density);
    m.get("bias_gyro", c.imu.bias_gyro);
    m.get("bias_accel", c.imu.bias_accel);
    m.get("gravity", c.imu.gravity);
    m.finish();
  }
  if (const json* v = r.child("pose_noise")) {
    Reader n(*v, "pose_noise");
    n.get("sigma_pos", c.pose_noise.sigma_pos);
    n.get("sigma_rot", c.pose_noise.sigma_rot);
    n.get("drift_rate", c.pose_noise.drift_rate);
    n.finish();
  }
  if (const json* v = r.child("grid")) {
    Reader g(*v, "grid");
    g.get("length", c.grid.length);
    g.get("width", c.grid.width);
    g.get("height", c.grid.height);
    g.get("size", c.grid.size);
    g.get("inflation", c.grid.inflation);
    g.get("symmetric_inflation", c.grid.symmetric_inflation);
    g.get("fusion_frames", c.grid.fusion_frames);
    g.finish();
  }
  if (const json* v = r.child("planner")) {
    Reader p(*v, "planner");
    auto& w = c.planner.cost;
    p.get("lambda_smooth", w.lambda_smooth);
    p.get("lambda_collision", w.lambda_collision);
    p.get("lambda_feasibility", w.lambda_feasibility);
    p.get("safe_distance", w.safe_distance);
    p.get("w_vel", w.w_vel);
    p.get("w_acc", w.w_acc);
    p.get("w_jerk", w.w_jerk);
    p.get("v_max", w.v_max);
    p.get("a_max", w.a_max);
    p.get("j_max", w.j_max);
    p.get("limit_ratio", w.limit_ratio);
    p.get("junction_ratio", w.junction_ratio);
    p.get("epsilon", w.epsilon);
    p.get("max_iters", c.planner.max_iters);
    p.get("tol", c.planner.tol);
    p.get("use_lbfgs", c.planner.use_lbfgs);
    p.get("multi_anchor", c.planner.multi_anchor);
    p.get("max_rounds", c.planner.max_rounds);
    p.get("horizon", c.planner.horizon);
    p.get("control_spacing", c.planner.control_spacing);
    p.get("cruise_speed", c.planner.cruise_speed);
    p.get("route_clearance", c.planner.route_clearance);
    p.get("replan_lead", c.planner.replan_lead);
    p.finish();
  }
  if (const json* v = r.child("explore")) {
    Reader e(*v, "explore");
    auto& x = c.explore;
    std::string mode = explore::to_string(x.mode);
    e.get("mode", mode);
    try {
      x.mode = explore::parse_mode(mode);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(std::string("explore.mode: ") + err.what());
    }
    e.get("lambda_info", x.weights.lambda_info);
    e.get("lambda_dist", x.weights.lambda_dist);
    e.get("lambda_dir", x.weights.lambda_dir);
    e.get("stop_threshold", x.weights.stop_threshold);
    e.get("info_radius", x.weights.info_radius);
    e.get("rrt_step", x.rrt.step);
    e.get("rrt_iterations", x.rrt.iterations);
    e.get("candidate_clearance", x.rrt.clearance);
    e.get("known_window", x.rrt.window);
    e.get("known_limit", x.rrt.known_limit);
    e.get("resolution", x.resolution);
    e.get("cloud_resolution", x.cloud_resolution);
    e.get("slice_lo", x.slice.z_lo);
    e.get("slice_hi", x.slice.z_hi);
    e.get("carve_below", x.slice.carve_below);
    e.finish();
  }
  if (const json* v = r.child("rates")) {
    Reader t(*v, "rates");
    t.get("track", c.rates.track);
    t.get("collision_check", c.rates.collision_check);
    t.get("lidar", c.rates.lidar);
    t.get("imu", c.rates.imu);
    t.finish();
  }
  if (const json* v = r.child("mission")) {
    Reader m(*v, "mission");
    auto& mi = c.mission;
    m.get("start", mi.start);
    m.get("altitude", mi.altitude);
    m.get("goal_tolerance", mi.goal_tolerance);
    m.get("max_time", mi.max_time);
    m.get("max_failures", mi.max_failures);
    m.get("return_to_start", mi.return_to_start);
    m.get("follower_lag", mi.follower_lag);
    m.get("ground_filter", mi.ground_filter);
    m.get("lidar_offset", mi.lidar_offset);
    m.get("write_snapshots", mi.write_snapshots);
    m.finish();
  }
  r.finish();
  c.validate();
  return c;
}

bool divides(double base, double rate) {
  const double n = base / rate;
  return std::abs(n - std::round(n)) < 1e-9 && std::round(n) >= 1.0;
}

}  // namespace

Scene build_scene(const SceneSpec& s) {
  if (s.type == "forest") {
    ForestParams p;
    p.seed = s.seed;
    p.min = s.min;
    p.max = s.max;
    p.height = s.height;
    p.density = s.density;
    p.radius_min = s.radius_min;
    p.radius_max = s.radius_max;
    p.min_gap = s.min_gap;
    p.start_clearance = s.start_clearance;
    return generate_forest(p);
  }
  if (s.type == "garage") {
    GarageParams p;
    p.seed = s.seed;
    p.min = s.min;
    p.max = s.max;
    p.height = s.height;
    p.pillar_pitch = s.pillar_pitch;
    p.pillar_size = s.pillar_size;
    p.wall_thickness = s.wall_thickness;
    p.parked_cars = s.parked_cars;
    return generate_garage(p);
  }
  if (s.type == "open") return generate_open(s.min, s.max, s.height);
  if (s.type == "explicit") {
    const Aabb bounds{Vec3(s.min.x(), s.min.y(), 0.0), Vec3(s.max.x(), s.max.y(), s.height)};
    return Scene(bounds, s.cylinders, s.boxes, s.halfspaces);
  }
  throw ConfigError("unknown scene type '" + s.type + "'");
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (version != kConfigVersion) fail("unsupported config version");
  if (scene.type != "forest" && scene.type != "garage" && scene.type != "open" && scene.type != "explicit")
    fail("scene.type must be forest, garage, open or explicit");
  if (scene.type != "explicit" && (!scene.cylinders.empty() || !scene.boxes.empty() || !scene.halfspaces.empty()))
    fail("scene primitives are only allowed with type explicit");
  if (!((scene.max - scene.min).array() > 0.0).all() || !(scene.height > 0.0)) fail("scene bounds are empty");
  if (!((boundary_max - boundary_min).array() > 0.0).all()) fail("boundary is empty");
  if ((boundary_min.array() < scene.min.array() - 1e-9).any() || (boundary_max.array() > scene.max.array() + 1e-9).any())
    fail("boundary must lie inside the scene bounds");
  if ((mission.start.array() <= boundary_min.array()).any() || (mission.start.array() >= boundary_max.array()).any())
    fail("mission.start must lie inside the boundary");
  try {
    lidar.validate();
    imu.validate();
    grid.validate();
    planner.cost.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  for (double r : {rates.track, rates.collision_check, rates.lidar, rates.imu})
    if (!(r > 0.0)) fail("rates must be positive");
  if (!divides(rates.imu, rates.track) || !divides(rates.imu, rates.collision_check) || !divides(rates.imu, rates.lidar))
    fail("track, collision_check and lidar rates must divide the imu rate");
  if (std::abs(imu.rate_hz - rates.imu) > 1e-9) fail("imu.rate_hz must equal rates.imu");
  if (std::abs(lidar.rate_hz - rates.lidar) > 1e-9) fail("lidar.rate_hz must equal rates.lidar");
  if (pose_noise.sigma_pos < 0 || pose_noise.sigma_rot < 0 || pose_noise.drift_rate < 0)
    fail("pose noise must be >= 0");
  const auto& p = planner;
  if (p.max_iters < 1 || !(p.tol > 0) || p.max_rounds < 1) fail("planner iteration limits must be positive");
  if (!(p.horizon > 0) || !(p.control_spacing > 0) || !(p.cruise_speed > 0) || !(p.route_clearance >= 0) ||
      !(p.replan_lead >= 0))
    fail("planner distances and speeds must be positive");
  if (p.horizon > 0.5 * std::min(grid.width, grid.length)) fail("planner.horizon must fit inside the local grid");
  const auto& e = explore;
  if (!(e.resolution > 0) || !(e.cloud_resolution > 0)) fail("explore resolutions must be positive");
  if (!(e.slice.z_hi > e.slice.z_lo)) fail("explore slice is empty");
  if (!(e.weights.lambda_info >= 0) || !(e.weights.lambda_dist >= 0) || !(e.weights.lambda_dir >= 0))
    fail("explore weights must be >= 0");
  if (e.weights.stop_threshold < 0 || !(e.weights.info_radius > 0)) fail("bad stop threshold or info radius");
  if (!(e.rrt.step > 0) || e.rrt.iterations < 1 || !(e.rrt.clearance >= 0) || !(e.rrt.window > 0) ||
      !(e.rrt.known_limit > 0 && e.rrt.known_limit <= 1))
    fail("bad RRT parameters");
  const auto& m = mission;
  if (!(m.altitude > e.slice.z_lo && m.altitude < e.slice.z_hi)) fail("mission.altitude must lie inside the slice");
  if (!(m.altitude < scene.height)) fail("mission.altitude must be below the scene top");
  if (!(m.goal_tolerance > 0) || !(m.max_time > 0) || m.max_failures < 1 || !(m.follower_lag >= 0))
    fail("bad mission parameters");
}

ScenarioConfig ScenarioConfig::with_seed(std::uint64_t s) const {
  ScenarioConfig c = *this;
  c.seed = s;
  c.scene.seed = s;
  return c;
}

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_config(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

std::string dump_scene(const Scene& scene) {
  json j{{"min", vec<3>(scene.bounds().min)}, {"max", vec<3>(scene.bounds().max)}};
  const json prims = primitives_to_json(scene.cylinders(), scene.boxes(), scene.halfspaces());
  for (auto& [k, v] : prims.items()) j[k] = v;
  return j.dump(2) + "\n";
}

Scene parse_scene(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  Reader r(j, "scene");
  Aabb bounds;
  r.get("min", bounds.min);
  r.get("max", bounds.max);
  std::vector<Cylinder> c;
  std::vector<Box> b;
  std::vector<HalfSpace> h;
  read_primitives(r, c, b, h);
  r.finish();
  try {
    return Scene(bounds, std::move(c), std::move(b), std::move(h));
  } catch (const SceneError& e) {
    throw ConfigError(e.what());
  }
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) { return to_json(a) == to_json(b); }

}  // namespace explo::mission
