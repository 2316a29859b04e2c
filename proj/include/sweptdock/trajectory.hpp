// Trajectory CSV: header "i,px,py,pz,qw,qx,qy,qz", positions in mm,
// scalar-first unit quaternions, canonical sign on write.

#pragma once

#include "sweptdock/core.hpp"
#include "sweptdock/se3.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace sweptdock {

inline void save_trajectory_csv(const std::string& path, const std::vector<Pose>& trajectory) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open trajectory CSV for writing: " + path);
  out << "i,px,py,pz,qw,qx,qy,qz\n";
  char line[256];
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const Pose& pose = trajectory[i];
    Quat q = canonicalized(pose.q.normalized());
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                  pose.p.x(), pose.p.y(), pose.p.z(), q.w(), q.x(), q.y(), q.z());
    out << line;
  }
}

inline std::vector<Pose> load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open trajectory CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error(path + ": empty trajectory file");
  // Tolerate an optional BOM and whitespace in the header check.
  if (line.find("px") == std::string::npos || line.find("qw") == std::string::npos) {
    throw io_error(path + ": missing trajectory CSV header 'i,px,py,pz,qw,qx,qy,qz'");
  }

  std::vector<Pose> trajectory;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double fields[8];
    std::string cell;
    for (int f = 0; f < 8; ++f) {
      if (!std::getline(ss, cell, ',')) {
        throw io_error(path + ": row " + std::to_string(row) + " has fewer than 8 fields");
      }
      try {
        fields[f] = std::stod(cell);
      } catch (const std::exception&) {
        throw io_error(path + ": row " + std::to_string(row) + " field " + std::to_string(f + 1) +
                       " is not a number: '" + cell + "'");
      }
    }
    Quat q(fields[4], fields[5], fields[6], fields[7]);
    double norm = std::sqrt(q.w() * q.w() + q.x() * q.x() + q.y() * q.y() + q.z() * q.z());
    if (std::abs(norm - 1.0) > 1e-6) {
      std::ostringstream msg;
      msg << path << ": row " << row << " quaternion norm " << norm
          << " deviates from 1 by more than 1e-6";
      throw io_error(msg.str());
    }
    trajectory.emplace_back(q, Vec3(fields[1], fields[2], fields[3]));
  }
  if (trajectory.empty()) throw invalid_input(path + ": trajectory contains no poses");
  return trajectory;
}

}  // namespace sweptdock
