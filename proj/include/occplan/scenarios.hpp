#pragma once

#include "occplan/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace occplan::scenarios {

/// Straight road, short sensor range, no traffic.
WorldState free_drive_limited_visibility(double sensor_range = 20.0);

WorldState empty_road();

/// Ego approaches a crossing priority road past a corner building.
WorldState give_way(double sensor_range = 80.0);

/// Standing vehicle placed just past the initial visible range.
WorldState stopped_vehicle();

/// Lead full-brakes at t = 5 s from a 30 m gap.
WorldState lead_brakes();

/// give_way() plus a crossing vehicle appearing at the line of sight.
WorldState hidden_spawn(double spawn_time = 6.0);

/// Ego on the priority road; a crossing vehicle ignores it.
WorldState right_of_way_uncompliant();

/// Equal-rank crossing with a stop sign on the ego approach.
WorldState stop_sign();

/// Measurement and localization noise with the matching confidence factor.
void apply_noise(WorldState& w, double sigma_pos, double sigma_speed, double k);

/// Every named builder, in the form written to the scenarios/ directory.
std::vector<std::pair<std::string, WorldState>> catalog();

}  // namespace occplan::scenarios
