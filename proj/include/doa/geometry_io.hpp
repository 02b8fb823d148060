#pragma once

// JSON array description:
//
//   {
//     "speed_of_sound_m_per_s": 343.0,
//     "microphones_m": [[0.2, 0.0], [0.1, 0.1732], ...]
//   }
//
// Coordinates are meters in the array frame, channel i of the audio maps to
// microphones_m[i].

#include "json.hpp"  // nlohmann/json (vendored)

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doa/errors.hpp"
#include "doa/geometry.hpp"

namespace doa {

inline ArrayGeometry geometry_from_json(const nlohmann::json& j) {
  try {
    const double v = j.at("speed_of_sound_m_per_s").get<double>();
    std::vector<Vec2> mics;
    for (const auto& m : j.at("microphones_m")) {
      if (!m.is_array() || m.size() != 2)
        throw Error(ErrorCode::MalformedInput, "each microphone must be [x, y]");
      mics.push_back({m[0].get<double>(), m[1].get<double>()});
    }
    return ArrayGeometry(std::move(mics), v);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("geometry: ") + e.what());
  }
}

inline nlohmann::json geometry_to_json(const ArrayGeometry& g) {
  nlohmann::json mics = nlohmann::json::array();
  for (const Vec2& m : g.mics()) mics.push_back({m.x, m.y});
  return {{"speed_of_sound_m_per_s", g.speed_of_sound()}, {"microphones_m", mics}};
}

inline ArrayGeometry load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
    throw Error(ErrorCode::MalformedInput, "cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, path.string() + ": " + e.what());
  }
  return geometry_from_json(j);
}

}  // namespace doa
