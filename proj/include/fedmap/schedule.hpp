#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedmap/tensor.hpp"

namespace fedmap::schedule {

enum class Kind { Stepwise, Continuous };

struct ScheduleSpec {
    Kind kind = Kind::Stepwise;
    std::size_t interval = 90;      // rounds between pruning steps
    double rate = 0.25;             // fraction removed per step
    double floor_fraction = 0.05;   // never schedule below this share of the weights
    std::size_t total_weights = 0;  // prunable weight count
    std::size_t total_rounds = 0;   // run horizon
};

// Number of kept weights the schedule allows at round t. Stepwise holds the
// count flat inside each interval; continuous interpolates the same knot
// values with a monotone piecewise cubic, so both agree exactly whenever
// t is a multiple of the interval.
std::size_t remaining_params(const ScheduleSpec& spec, std::size_t t);

// Rounds in [1, total_rounds] where the allowance drops below the previous
// round's.
std::vector<std::size_t> prune_events(const ScheduleSpec& spec);

} // namespace fedmap::schedule
