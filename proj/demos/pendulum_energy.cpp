// Double pendulum for 10 s at dt = 0.01; prints time, energy and the largest
// joint residual every half second.
#include <cstdio>

#include "maxcoord/maxcoord.hpp"

int main() {
  using namespace maxcoord;
  const auto sc = double_pendulum();
  SimulationOptions opt;
  opt.dt = 0.01;
  opt.steps = 1000;
  const auto rec = simulate(sc.mechanism, sc.states, opt);
  const double e0 = rec.rows.front().energy;
  std::printf("%6s %14s %12s %10s\n", "t", "energy", "rel.drift", "max|g|");
  for (std::size_t k = 0; k < rec.rows.size(); k += 50) {
    const auto& r = rec.rows[k];
    double g = 0;
    for (double c : r.constraint_inf) g = std::max(g, c);
    std::printf("%6.2f %14.8f %12.3e %10.2e\n", r.t, r.energy, (r.energy - e0) / e0, g);
  }
}
