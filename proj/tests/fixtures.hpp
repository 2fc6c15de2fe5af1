#pragma once

#include <random>

#include "pinch/scenario.hpp"

namespace pinch::testing {

// 10 x 10 x 3 room, one 10 m waveguide along x at y = 5 on the ceiling.
inline ScenarioConfig one_guide(int grid = 5) {
  ScenarioConfig c;
  c.room = {{0, 0, 0}, {10, 10, 3}};
  Waveguide w;
  w.id = 0;
  w.feed = {0, 5, 3};
  w.axis = {1, 0, 0};
  w.length = 10;
  w.grid_size = grid;
  w.tx_power = 1.0;
  c.waveguides.push_back(w);
  User u;
  u.id = 0;
  u.position = {3, 4, 0};
  c.users.push_back(u);
  return c;
}

// Two parallel guides at y = 2 and y = 8, one user under each.
inline ScenarioConfig two_guides(int grid = 8) {
  ScenarioConfig c;
  c.room = {{0, 0, 0}, {10, 10, 3}};
  for (int i = 0; i < 2; ++i) {
    Waveguide w;
    w.id = i;
    w.feed = {0, i == 0 ? 2.0 : 8.0, 3};
    w.axis = {1, 0, 0};
    w.length = 10;
    w.grid_size = grid;
    c.waveguides.push_back(w);
    User u;
    u.id = i;
    u.position = {2.0 + 5.0 * i, i == 0 ? 2.5 : 7.5, 0};
    c.users.push_back(u);
  }
  c.access = AccessMode::MULTI_WAVEGUIDE;
  return c;
}

inline Point3 random_point(std::mt19937_64& rng, const RoomBounds& room) {
  std::uniform_real_distribution<double> ux(room.lo.x, room.hi.x), uy(room.lo.y, room.hi.y), uz(room.lo.z, room.hi.z);
  const double x = ux(rng), y = uy(rng), z = uz(rng);
  return {x, y, z};
}

}  // namespace pinch::testing
