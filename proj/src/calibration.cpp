#include "bevswarm/calibration.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace bevswarm {

using nlohmann::json;

CameraCalibration calibration_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CalibrationError(std::string("calibration: malformed JSON: ") + e.what());
  }

  CameraCalibration c;
  try {
    c.intrinsics.fx = j.at("fx").get<double>();
    c.intrinsics.fy = j.at("fy").get<double>();
    c.intrinsics.cx = j.at("cx").get<double>();
    c.intrinsics.cy = j.at("cy").get<double>();
    c.intrinsics.width = j.at("width").get<int>();
    c.intrinsics.height = j.at("height").get<int>();
    c.pose.H = j.at("H").get<double>();

    if (j.contains("R")) {
      const auto r = j.at("R").get<std::vector<double>>();
      if (r.size() != 9) throw CalibrationError("calibration: R must hold 9 row-major floats");
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) c.pose.R(i, k) = r[static_cast<std::size_t>(i) * 3 + k];
    } else if (j.contains("q")) {
      const auto q = j.at("q").get<std::vector<double>>();
      if (q.size() != 4) throw CalibrationError("calibration: q must hold [w, x, y, z]");
      c.pose.R = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
    } else {
      throw CalibrationError("calibration: missing rotation (R or q)");
    }

    const auto t = j.at("T").get<std::vector<double>>();
    if (t.size() != 3) throw CalibrationError("calibration: T must hold 3 floats");
    c.pose.T = Eigen::Vector3d(t[0], t[1], t[2]);
  } catch (const json::exception& e) {
    throw CalibrationError(std::string("calibration: ") + e.what());
  }

  c.intrinsics.validate();
  c.pose.validate();
  return c;
}

std::string calibration_to_json(const CameraCalibration& c) {
  json j;
  j["fx"] = c.intrinsics.fx;
  j["fy"] = c.intrinsics.fy;
  j["cx"] = c.intrinsics.cx;
  j["cy"] = c.intrinsics.cy;
  j["width"] = c.intrinsics.width;
  j["height"] = c.intrinsics.height;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(i) * 3 + k] = c.pose.R(i, k);
  j["R"] = r;
  j["T"] = {c.pose.T.x(), c.pose.T.y(), c.pose.T.z()};
  j["H"] = c.pose.H;
  return j.dump(2);
}

CameraCalibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("calibration: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return calibration_from_json(ss.str());
}

void save_calibration(const CameraCalibration& calib, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CalibrationError("calibration: cannot write " + path.string());
  out << calibration_to_json(calib) << "\n";
}

}  // namespace bevswarm
