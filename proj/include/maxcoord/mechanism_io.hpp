// Mechanism files (JSON).
//
//   {
//     "format": "maxcoord-mechanism", "version": 1, "name": "...",
//     "gravity": [0, 0, -9.81],
//     "simulation": {"dt": 0.01, "steps": 100, "tol": 1e-10},
//     "bodies": [{"id": 1, "name": "link1", "mass": 1,
//                 "inertia": [Ixx, Ixy, Ixz, Iyy, Iyz, Izz],
//                 "x": [..], "q": [w, x, y, z], "v": [..], "omega": [..]}],
//     "joints": [{"name": "j1", "type": "revolute", "parent": "world" | id,
//                 "child": id, "p_parent": [..], "p_child": [..],
//                 "axis": [..], "offset": [w, x, y, z]}],
//     "contacts": [{"name": "c1", "body": id, "point": [..], "friction": 0.5,
//                   "directions": 2, "normal": [0, 0, 1], "radius": 0,
//                   "other": "world" | id, "other_point": [..]}],
//     "forces": [{"kind": "spring" | "damper" | "actuator" | "external", ...}]
//   }
//
// Bodies are referenced by id.  omega is in the body frame.  Optional
// fields take the defaults of the corresponding C++ types.
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "maxcoord/errors.hpp"
#include "maxcoord/mechanism.hpp"
#include "maxcoord/simulate.hpp"
#include "maxcoord/trajectory_io.hpp"

namespace maxcoord {

struct MechanismFile {
  Mechanism mechanism;
  std::vector<BodyState> states;
  SimulationOptions defaults;
};

/// Quaternions in files may be off unit length by this much; they are
/// normalized on load.
inline constexpr double kFileQuaternionTolerance = 1e-6;

namespace mechanism_io_detail {

using nlohmann::json;

/// Line (1-based) where the value at `path` starts, 0 if not found.
class LineLocator {
 public:
  explicit LineLocator(std::string_view text) : t_(text) {}

  [[nodiscard]] std::size_t find(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    ws(pos);
    for (const auto& step : path) {
      if (pos >= t_.size()) return 0;
      if (t_[pos] == '{') {
        if (!enter_key(pos, step)) return 0;
      } else if (t_[pos] == '[') {
        if (!enter_index(pos, std::stoul(step))) return 0;
      } else {
        return 0;
      }
    }
    return line_of(pos);
  }

  [[nodiscard]] std::size_t line_of(std::size_t pos) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos && i < t_.size(); ++i) line += t_[i] == '\n';
    return line;
  }

 private:
  std::string_view t_;

  void ws(std::size_t& p) const {
    while (p < t_.size() && (t_[p] == ' ' || t_[p] == '\n' || t_[p] == '\r' || t_[p] == '\t')) ++p;
  }
  std::string_view str(std::size_t& p) const {
    const std::size_t start = ++p;
    while (p < t_.size() && t_[p] != '"') p += t_[p] == '\\' ? 2 : 1;
    return t_.substr(start, (p++) - start);
  }
  void skip(std::size_t& p) const {
    if (p >= t_.size()) return;
    if (t_[p] == '"') {
      str(p);
      return;
    }
    if (t_[p] == '{' || t_[p] == '[') {
      int depth = 0;
      while (p < t_.size()) {
        const char c = t_[p];
        if (c == '"') {
          str(p);
          continue;
        }
        if (c == '{' || c == '[') ++depth;
        if (c == '}' || c == ']') --depth;
        ++p;
        if (depth == 0) return;
      }
      return;
    }
    while (p < t_.size() && t_[p] != ',' && t_[p] != '}' && t_[p] != ']') ++p;
  }
  bool enter_key(std::size_t& p, const std::string& key) const {
    ++p;
    for (;;) {
      ws(p);
      if (p >= t_.size() || t_[p] != '"') return false;
      const auto k = str(p);
      ws(p);
      if (p >= t_.size() || t_[p] != ':') return false;
      ++p;
      ws(p);
      if (k == key) return true;
      skip(p);
      ws(p);
      if (p >= t_.size() || t_[p] != ',') return false;
      ++p;
    }
  }
  bool enter_index(std::size_t& p, std::size_t index) const {
    ++p;
    for (std::size_t i = 0;; ++i) {
      ws(p);
      if (p >= t_.size() || t_[p] == ']') return false;
      if (i == index) return true;
      skip(p);
      ws(p);
      if (p >= t_.size() || t_[p] != ',') return false;
      ++p;
    }
  }
};

/// Walks a parsed document while tracking the field path for errors.
class Reader {
 public:
  Reader(std::string_view text, const json& root) : loc_(text), root_(root) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& what) const {
    const std::string field = dotted(path);
    const std::size_t line = loc_.find(path);
    throw ParseError(line, field, (line ? "line " + std::to_string(line) + ", " : std::string()) + "field '" +
                                      field + "': " + what);
  }

  const json* get(const std::vector<std::string>& path) const {
    const json* j = &root_;
    for (const auto& s : path) {
      if (j->is_object()) {
        auto it = j->find(s);
        if (it == j->end()) return nullptr;
        j = &*it;
      } else if (j->is_array()) {
        const std::size_t i = std::stoul(s);
        if (i >= j->size()) return nullptr;
        j = &(*j)[i];
      } else {
        return nullptr;
      }
    }
    return j;
  }

  const json& need(const std::vector<std::string>& path) const {
    const json* j = get(path);
    if (!j) fail(path, "missing");
    return *j;
  }

  double number(const std::vector<std::string>& path, std::optional<double> fallback = std::nullopt) const {
    const json* j = get(path);
    if (!j) {
      if (fallback) return *fallback;
      fail(path, "missing");
    }
    if (!j->is_number()) fail(path, "expected a number");
    const double x = j->get<double>();
    if (!std::isfinite(x)) fail(path, "not finite");
    return x;
  }

  int integer(const std::vector<std::string>& path, std::optional<int> fallback = std::nullopt) const {
    const json* j = get(path);
    if (!j) {
      if (fallback) return *fallback;
      fail(path, "missing");
    }
    if (!j->is_number_integer()) fail(path, "expected an integer");
    return j->get<int>();
  }

  std::string text(const std::vector<std::string>& path, std::optional<std::string> fallback = std::nullopt) const {
    const json* j = get(path);
    if (!j) {
      if (fallback) return *fallback;
      fail(path, "missing");
    }
    if (!j->is_string()) fail(path, "expected a string");
    return j->get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const std::vector<std::string>& path,
                                  std::optional<Eigen::Matrix<double, N, 1>> fallback = std::nullopt) const {
    const json* j = get(path);
    if (!j) {
      if (fallback) return *fallback;
      fail(path, "missing");
    }
    if (!j->is_array() || j->size() != N) fail(path, "expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
      auto p = path;
      p.push_back(std::to_string(i));
      v[i] = number(p);
    }
    return v;
  }

  UnitQuaternion quaternion(const std::vector<std::string>& path) const {
    if (!get(path)) return {};
    const Vec4 c = vec<4>(path);
    if (std::abs(c.norm() - 1.0) > kFileQuaternionTolerance)
      fail(path, "quaternion norm " + format_double(c.norm()) + " is not 1");
    return std::abs(c.norm() - 1.0) <= 4e-16 ? UnitQuaternion::exact(c) : UnitQuaternion::normalized(c);
  }

  std::size_t count(const std::string& key) const {
    const json* j = get({key});
    if (!j) return 0;
    if (!j->is_array()) fail({key}, "expected an array");
    return j->size();
  }

  static std::string dotted(const std::vector<std::string>& path) {
    std::string s;
    for (const auto& p : path) {
      if (!p.empty() && std::isdigit(static_cast<unsigned char>(p[0])))
        s += "[" + p + "]";
      else
        s += (s.empty() ? "" : ".") + p;
    }
    return s;
  }

 private:
  LineLocator loc_;
  const json& root_;
};

inline std::vector<std::string> at(std::vector<std::string> base, const std::string& key) {
  base.push_back(key);
  return base;
}

inline nlohmann::ordered_json vec_json(const Eigen::Ref<const VecX>& v) {
  auto a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace mechanism_io_detail

inline MechanismFile parse_mechanism(std::string_view text) {
  using namespace mechanism_io_detail;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t line = LineLocator(text).line_of(e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(line, "", "line " + std::to_string(line) + ": " + e.what());
  }
  Reader r(text, root);
  if (!root.is_object()) r.fail({}, "document must be an object");
  if (r.text({"format"}) != "maxcoord-mechanism") r.fail({"format"}, "expected 'maxcoord-mechanism'");
  if (r.integer({"version"}) != 1) r.fail({"version"}, "unsupported version");

  MechanismFile f;
  Mechanism& m = f.mechanism;
  m.name = r.text({"name"}, "");
  m.gravity = r.vec<3>({"gravity"}, Vec3(0.0, 0.0, -9.81));
  f.defaults.dt = r.number({"simulation", "dt"}, f.defaults.dt);
  f.defaults.steps = r.integer({"simulation", "steps"}, f.defaults.steps);
  f.defaults.solve.tol = r.number({"simulation", "tol"}, f.defaults.solve.tol);
  if (!(f.defaults.dt > 0.0)) r.fail({"simulation", "dt"}, "must be positive");
  if (f.defaults.steps < 0) r.fail({"simulation", "steps"}, "must be nonnegative");
  if (!(f.defaults.solve.tol > 0.0)) r.fail({"simulation", "tol"}, "must be positive");

  std::map<int, int> index_of;
  for (std::size_t i = 0; i < r.count("bodies"); ++i) {
    const std::vector<std::string> p{"bodies", std::to_string(i)};
    Body b;
    b.id = r.integer(at(p, "id"));
    if (!index_of.emplace(b.id, static_cast<int>(i)).second) r.fail(at(p, "id"), "duplicate body id");
    b.name = r.text(at(p, "name"), "");
    b.mass = r.number(at(p, "mass"));
    if (!(b.mass > 0.0)) r.fail(at(p, "mass"), "must be positive");
    const auto I = r.vec<6>(at(p, "inertia"));
    b.inertia << I[0], I[1], I[2], I[1], I[3], I[4], I[2], I[4], I[5];
    if (!(Eigen::SelfAdjointEigenSolver<Mat3>(b.inertia).eigenvalues().minCoeff() > 0.0))
      r.fail(at(p, "inertia"), "must be positive definite");
    BodyState s;
    s.x = r.vec<3>(at(p, "x"), Vec3::Zero());
    s.q = r.quaternion(at(p, "q"));
    s.v = r.vec<3>(at(p, "v"), Vec3::Zero());
    s.omega = r.vec<3>(at(p, "omega"), Vec3::Zero());
    m.bodies.push_back(b);
    f.states.push_back(s);
  }

  auto body_ref = [&](const std::vector<std::string>& p, bool world_ok, std::optional<int> fallback = std::nullopt) {
    const json* j = r.get(p);
    if (!j) {
      if (fallback) return *fallback;
      r.fail(p, "missing");
    }
    if (j->is_string() && j->get<std::string>() == "world") {
      if (!world_ok) r.fail(p, "world not allowed here");
      return kWorld;
    }
    if (!j->is_number_integer()) r.fail(p, "expected a body id or \"world\"");
    auto it = index_of.find(j->get<int>());
    if (it == index_of.end()) r.fail(p, "no body with id " + std::to_string(j->get<int>()));
    return it->second;
  };

  for (std::size_t i = 0; i < r.count("joints"); ++i) {
    const std::vector<std::string> p{"joints", std::to_string(i)};
    JointType type{};
    try {
      type = joint_type_from_name(r.text(at(p, "type")));
    } catch (const ModelError& e) {
      r.fail(at(p, "type"), e.what());
    }
    const int parent = body_ref(at(p, "parent"), true);
    const int child = body_ref(at(p, "child"), false);
    const Vec3 axis = r.vec<3>(at(p, "axis"), Vec3::UnitZ());
    try {
      m.joints.push_back(make_joint(type, parent, child, r.vec<3>(at(p, "p_parent"), Vec3::Zero()),
                                    r.vec<3>(at(p, "p_child"), Vec3::Zero()), axis, r.quaternion(at(p, "offset")),
                                    r.text(at(p, "name"), "")));
    } catch (const DegenerateAxis& e) {
      // Keep the error type so callers can tell a bad axis apart.
      const std::size_t line = LineLocator(text).find(at(p, "axis"));
      throw DegenerateAxis("line " + std::to_string(line) + ", field '" + Reader::dotted(at(p, "axis")) +
                           "': " + e.what());
    }
  }

  for (std::size_t i = 0; i < r.count("contacts"); ++i) {
    const std::vector<std::string> p{"contacts", std::to_string(i)};
    Contact c;
    c.name = r.text(at(p, "name"), "");
    c.body = body_ref(at(p, "body"), false);
    c.p = r.vec<3>(at(p, "point"), Vec3::Zero());
    c.cf = r.number(at(p, "friction"), 0.0);
    c.nf = r.integer(at(p, "directions"), 2);
    c.normal = r.vec<3>(at(p, "normal"), Vec3::UnitZ());
    c.radius = r.number(at(p, "radius"), 0.0);
    c.other = body_ref(at(p, "other"), true, kWorld);
    c.p_other = r.vec<3>(at(p, "other_point"), Vec3::Zero());
    if (c.cf < 0.0) r.fail(at(p, "friction"), "must be nonnegative");
    if (c.nf < 1) r.fail(at(p, "directions"), "must be at least 1");
    if (!(c.normal.norm() > 0.0)) r.fail(at(p, "normal"), "must be nonzero");
    if (std::abs(c.normal.norm() - 1.0) > 4e-16) c.normal.normalize();
    if (c.radius < 0.0) r.fail(at(p, "radius"), "must be nonnegative");
    m.contacts.push_back(c);
  }

  for (std::size_t i = 0; i < r.count("forces"); ++i) {
    const std::vector<std::string> p{"forces", std::to_string(i)};
    ForceElement e;
    try {
      e.kind = force_kind_from_name(r.text(at(p, "kind")));
    } catch (const ModelError& err) {
      r.fail(at(p, "kind"), err.what());
    }
    e.name = r.text(at(p, "name"), "");
    if (e.kind == ForceKind::Actuator) {
      e.joint = r.integer(at(p, "joint"));
      if (e.joint < 0 || e.joint >= static_cast<int>(m.joints.size())) r.fail(at(p, "joint"), "no such joint");
    } else {
      e.body_b = body_ref(at(p, "body_b"), false);
    }
    if (e.kind == ForceKind::Spring || e.kind == ForceKind::Damper) e.body_a = body_ref(at(p, "body_a"), true, kWorld);
    e.p_a = r.vec<3>(at(p, "p_a"), Vec3::Zero());
    e.p_b = r.vec<3>(at(p, "p_b"), Vec3::Zero());
    e.stiffness = r.number(at(p, "stiffness"), 0.0);
    e.damping = r.number(at(p, "damping"), 0.0);
    e.angular_damping = r.number(at(p, "angular_damping"), 0.0);
    e.force = r.vec<3>(at(p, "force"), Vec3::Zero());
    e.torque = r.vec<3>(at(p, "torque"), Vec3::Zero());
    for (const char* k : {"stiffness", "damping", "angular_damping"})
      if (r.number(at(p, k), 0.0) < 0.0) r.fail(at(p, k), "must be nonnegative");
    m.forces.push_back(e);
  }

  m.validate();
  return f;
}

inline MechanismFile load_mechanism(const std::string& path) {
  return parse_mechanism(trajectory_detail::read_file(path));
}

inline nlohmann::ordered_json mechanism_to_json(const MechanismFile& f) {
  using mechanism_io_detail::vec_json;
  using json = nlohmann::ordered_json;
  const Mechanism& m = f.mechanism;
  auto ref = [&](int b) { return b == kWorld ? json("world") : json(m.bodies.at(b).id); };
  json j;
  j["format"] = "maxcoord-mechanism";
  j["version"] = 1;
  j["name"] = m.name;
  j["gravity"] = vec_json(m.gravity);
  j["simulation"] = {{"dt", f.defaults.dt}, {"steps", f.defaults.steps}, {"tol", f.defaults.solve.tol}};
  auto& bodies = j["bodies"] = json::array();
  for (int i = 0; i < m.num_bodies(); ++i) {
    const auto& b = m.bodies[i];
    const auto& s = f.states.at(i);
    const Mat3& I = b.inertia;
    bodies.push_back({{"id", b.id},
                      {"name", b.name},
                      {"mass", b.mass},
                      {"inertia", {I(0, 0), I(0, 1), I(0, 2), I(1, 1), I(1, 2), I(2, 2)}},
                      {"x", vec_json(s.x)},
                      {"q", vec_json(s.q.coeffs())},
                      {"v", vec_json(s.v)},
                      {"omega", vec_json(s.omega)}});
  }
  auto& joints = j["joints"] = json::array();
  for (const auto& jt : m.joints)
    joints.push_back({{"name", jt.name},
                      {"type", joint_type_name(jt.type)},
                      {"parent", ref(jt.parent)},
                      {"child", ref(jt.child)},
                      {"p_parent", vec_json(jt.p_a)},
                      {"p_child", vec_json(jt.p_b)},
                      {"axis", vec_json(jt.axis)},
                      {"offset", vec_json(jt.q_off.coeffs())}});
  auto& contacts = j["contacts"] = json::array();
  for (const auto& c : m.contacts)
    contacts.push_back({{"name", c.name},
                        {"body", ref(c.body)},
                        {"point", vec_json(c.p)},
                        {"friction", c.cf},
                        {"directions", c.nf},
                        {"normal", vec_json(c.normal)},
                        {"radius", c.radius},
                        {"other", ref(c.other)},
                        {"other_point", vec_json(c.p_other)}});
  auto& forces = j["forces"] = json::array();
  for (const auto& e : m.forces) {
    json o{{"kind", force_kind_name(e.kind)}, {"name", e.name}};
    switch (e.kind) {
      case ForceKind::Spring:
      case ForceKind::Damper:
        o["body_a"] = ref(e.body_a);
        o["body_b"] = ref(e.body_b);
        o["p_a"] = vec_json(e.p_a);
        o["p_b"] = vec_json(e.p_b);
        o["stiffness"] = e.stiffness;
        o["damping"] = e.damping;
        o["angular_damping"] = e.angular_damping;
        break;
      case ForceKind::Actuator:
        o["joint"] = e.joint;
        o["force"] = vec_json(e.force);
        o["torque"] = vec_json(e.torque);
        break;
      case ForceKind::External:
        o["body_b"] = ref(e.body_b);
        o["force"] = vec_json(e.force);
        o["torque"] = vec_json(e.torque);
        break;
    }
    forces.push_back(std::move(o));
  }
  return j;
}

inline std::string format_mechanism(const MechanismFile& f) { return mechanism_to_json(f).dump(2) + "\n"; }

inline void save_mechanism(const MechanismFile& f, const std::string& path) {
  trajectory_detail::write_file(path, format_mechanism(f));
}

}  // namespace maxcoord
