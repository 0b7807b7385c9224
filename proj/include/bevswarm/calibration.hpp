#pragma once

#include <filesystem>
#include <string>

#include "bevswarm/geometry.hpp"

namespace bevswarm {

// One platform's camera calibration: intrinsics plus extrinsics in the
// platform world frame.
struct CameraCalibration {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

// JSON record. Rotation is either "R" (9 row-major floats) or a unit
// quaternion "q" as [w, x, y, z]; both forms are accepted on load, R is
// written on save.
CameraCalibration calibration_from_json(const std::string& text);
std::string calibration_to_json(const CameraCalibration& calib);

CameraCalibration load_calibration(const std::filesystem::path& path);
void save_calibration(const CameraCalibration& calib, const std::filesystem::path& path);

}  // namespace bevswarm
