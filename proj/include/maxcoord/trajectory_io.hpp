// Trajectory export.
//
// CSV layout (version 1):
//   # maxcoord-trajectory v1 bodies=B joints=J contacts=C dt=DT
//   t,body0.x,body0.y,body0.z,body0.qw,body0.qx,body0.qy,body0.qz,
//     body0.vx,body0.vy,body0.vz,body0.wx,body0.wy,body0.wz,...,
//     joint0.g,...,contact0.gap,contact0.gamma,...,energy,iterations
//   one data row per recorded step
// Floats use the shortest representation that reads back to the same double.
#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "maxcoord/errors.hpp"
#include "maxcoord/simulate.hpp"

namespace maxcoord {

inline constexpr std::string_view kTrajectoryMagic = "# maxcoord-trajectory v1";

enum class TrajectoryFormat { Csv, Json };

inline TrajectoryFormat trajectory_format_from_name(std::string_view s) {
  if (s == "csv") return TrajectoryFormat::Csv;
  if (s == "json") return TrajectoryFormat::Json;
  throw Error("unknown trajectory format '" + std::string(s) + "'");
}

inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::vector<std::string> trajectory_columns(int bodies, int joints, int contacts) {
  static constexpr const char* kBodyCols[] = {"x", "y", "z", "qw", "qx", "qy", "qz",
                                              "vx", "vy", "vz", "wx", "wy", "wz"};
  std::vector<std::string> c{"t"};
  for (int b = 0; b < bodies; ++b)
    for (const char* s : kBodyCols) c.push_back("body" + std::to_string(b) + "." + s);
  for (int j = 0; j < joints; ++j) c.push_back("joint" + std::to_string(j) + ".g");
  for (int k = 0; k < contacts; ++k) {
    c.push_back("contact" + std::to_string(k) + ".gap");
    c.push_back("contact" + std::to_string(k) + ".gamma");
  }
  c.push_back("energy");
  c.push_back("iterations");
  return c;
}

namespace trajectory_detail {

inline std::vector<double> flatten(const TrajectoryRow& r) {
  std::vector<double> v{r.t};
  for (const auto& s : r.states) {
    v.insert(v.end(), s.x.data(), s.x.data() + 3);
    const Vec4 q = s.q.coeffs();
    v.insert(v.end(), q.data(), q.data() + 4);
    v.insert(v.end(), s.v.data(), s.v.data() + 3);
    v.insert(v.end(), s.omega.data(), s.omega.data() + 3);
  }
  v.insert(v.end(), r.constraint_inf.begin(), r.constraint_inf.end());
  for (std::size_t k = 0; k < r.gap.size(); ++k) {
    v.push_back(r.gap[k]);
    v.push_back(r.gamma[k]);
  }
  v.push_back(r.energy);
  return v;
}

inline TrajectoryRow unflatten(const std::vector<double>& v, int iterations, int nb, int nj, int nc) {
  TrajectoryRow r;
  std::size_t i = 0;
  auto take3 = [&] {
    Vec3 x(v[i], v[i + 1], v[i + 2]);
    i += 3;
    return x;
  };
  r.t = v[i++];
  for (int b = 0; b < nb; ++b) {
    BodyState s;
    s.x = take3();
    s.q = UnitQuaternion::exact(Vec4(v[i], v[i + 1], v[i + 2], v[i + 3]));
    i += 4;
    s.v = take3();
    s.omega = take3();
    r.states.push_back(s);
  }
  for (int j = 0; j < nj; ++j) r.constraint_inf.push_back(v[i++]);
  for (int k = 0; k < nc; ++k) {
    r.gap.push_back(v[i++]);
    r.gamma.push_back(v[i++]);
  }
  r.energy = v[i++];
  r.iterations = iterations;
  return r;
}

inline double parse_double(std::string_view s, std::size_t line, const std::string& field) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError(line, field, "line " + std::to_string(line) + ", column '" + field + "': bad number '" +
                                      std::string(s) + "'");
  return x;
}

inline int parse_int(std::string_view s, std::size_t line, const std::string& field) {
  int x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError(line, field, "line " + std::to_string(line) + ", column '" + field + "': bad integer '" +
                                      std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw IoError(path, "write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError(path, "read from '" + path + "' failed");
  return ss.str();
}

}  // namespace trajectory_detail

inline std::string to_csv(const TrajectoryRecord& rec) {
  std::string out(kTrajectoryMagic);
  out += " bodies=" + std::to_string(rec.num_bodies) + " joints=" + std::to_string(rec.num_joints) +
         " contacts=" + std::to_string(rec.num_contacts) + " dt=" + format_double(rec.dt) + "\n";
  const auto cols = trajectory_columns(rec.num_bodies, rec.num_joints, rec.num_contacts);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : rec.rows) {
    for (double x : trajectory_detail::flatten(r)) {
      out += format_double(x);
      out += ',';
    }
    out += std::to_string(r.iterations);
    out += '\n';
  }
  return out;
}

inline TrajectoryRecord parse_csv(std::string_view text) {
  using namespace trajectory_detail;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 2 || lines[0].substr(0, kTrajectoryMagic.size()) != kTrajectoryMagic)
    throw ParseError(1, "header", "line 1: missing '" + std::string(kTrajectoryMagic) + "' header");

  TrajectoryRecord rec;
  bool seen[4] = {false, false, false, false};
  for (auto kv : split(lines[0].substr(kTrajectoryMagic.size()), ' ')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    const std::string key(kv.substr(0, eq));
    if (eq == std::string_view::npos) throw ParseError(1, key, "line 1: expected key=value, got '" + key + "'");
    const auto val = kv.substr(eq + 1);
    if (key == "bodies") rec.num_bodies = parse_int(val, 1, key), seen[0] = true;
    else if (key == "joints") rec.num_joints = parse_int(val, 1, key), seen[1] = true;
    else if (key == "contacts") rec.num_contacts = parse_int(val, 1, key), seen[2] = true;
    else if (key == "dt") rec.dt = parse_double(val, 1, key), seen[3] = true;
    else throw ParseError(1, key, "line 1: unknown header key '" + key + "'");
  }
  for (bool s : seen)
    if (!s) throw ParseError(1, "header", "line 1: header needs bodies, joints, contacts and dt");
  if (rec.num_bodies < 0 || rec.num_joints < 0 || rec.num_contacts < 0)
    throw ParseError(1, "header", "line 1: negative component count");

  const auto cols = trajectory_columns(rec.num_bodies, rec.num_joints, rec.num_contacts);
  const auto names = split(lines[1], ',');
  if (names.size() != cols.size()) throw ParseError(2, "columns", "line 2: wrong number of columns");
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (names[i] != cols[i]) throw ParseError(2, cols[i], "line 2: expected column '" + cols[i] + "'");

  for (std::size_t l = 2; l < lines.size(); ++l) {
    const std::size_t line = l + 1;
    const auto cells = split(lines[l], ',');
    if (cells.size() != cols.size())
      throw ParseError(line, "row", "line " + std::to_string(line) + ": expected " + std::to_string(cols.size()) +
                                        " fields, got " + std::to_string(cells.size()));
    std::vector<double> v;
    v.reserve(cells.size() - 1);
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) v.push_back(parse_double(cells[i], line, cols[i]));
    const int it = parse_int(cells.back(), line, cols.back());
    try {
      rec.rows.push_back(unflatten(v, it, rec.num_bodies, rec.num_joints, rec.num_contacts));
    } catch (const InvalidQuaternion& e) {
      throw ParseError(line, "q", "line " + std::to_string(line) + ": " + e.what());
    }
  }
  return rec;
}

inline nlohmann::json to_json_value(const TrajectoryRecord& rec) {
  nlohmann::json j;
  j["format"] = "maxcoord-trajectory";
  j["version"] = 1;
  j["bodies"] = rec.num_bodies;
  j["joints"] = rec.num_joints;
  j["contacts"] = rec.num_contacts;
  j["dt"] = rec.dt;
  j["columns"] = trajectory_columns(rec.num_bodies, rec.num_joints, rec.num_contacts);
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : rec.rows) {
    nlohmann::json row = trajectory_detail::flatten(r);
    row.push_back(r.iterations);
    rows.push_back(std::move(row));
  }
  return j;
}

inline std::string to_json(const TrajectoryRecord& rec) { return to_json_value(rec).dump() + "\n"; }

inline TrajectoryRecord parse_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, "", e.what());
  }
  try {
    if (j.at("format") != "maxcoord-trajectory" || j.at("version") != 1)
      throw ParseError(0, "format", "not a version 1 maxcoord trajectory");
    TrajectoryRecord rec;
    rec.num_bodies = j.at("bodies").get<int>();
    rec.num_joints = j.at("joints").get<int>();
    rec.num_contacts = j.at("contacts").get<int>();
    rec.dt = j.at("dt").get<double>();
    const std::size_t n = trajectory_columns(rec.num_bodies, rec.num_joints, rec.num_contacts).size();
    for (const auto& row : j.at("rows")) {
      if (row.size() != n) throw ParseError(0, "rows", "row has wrong length");
      std::vector<double> v;
      for (std::size_t i = 0; i + 1 < n; ++i) v.push_back(row[i].get<double>());
      rec.rows.push_back(
          trajectory_detail::unflatten(v, row[n - 1].get<int>(), rec.num_bodies, rec.num_joints, rec.num_contacts));
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "", e.what());
  }
}

inline std::string format_trajectory(const TrajectoryRecord& rec, TrajectoryFormat fmt) {
  return fmt == TrajectoryFormat::Csv ? to_csv(rec) : to_json(rec);
}

inline void write_trajectory(const TrajectoryRecord& rec, TrajectoryFormat fmt, const std::string& path) {
  trajectory_detail::write_file(path, format_trajectory(rec, fmt));
}

/// Reads either format, chosen by the first character.
inline TrajectoryRecord read_trajectory(const std::string& path) {
  const std::string text = trajectory_detail::read_file(path);
  return !text.empty() && text[0] == '{' ? parse_json(text) : parse_csv(text);
}

}  // namespace maxcoord
