#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace cibpu {

enum class DistSource { Analytical, Empirical };

// Probability that a bin (set) holds N balls (valid tags), N = 0..size()-1.
struct SteadyStateDist {
  std::vector<long double> p;
  DistSource source = DistSource::Empirical;
  // For recursion output: entries with N <= seed_n were taken from the input.
  std::optional<unsigned> seed_n;

  std::size_t size() const { return p.size(); }
  long double at(std::size_t n) const { return n < p.size() ? p[n] : 0.0L; }
};

}  // namespace cibpu
