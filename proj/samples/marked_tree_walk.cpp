// Samples one marked tree under the spine construction and prints what the
// spine sees at each generation.

#include <cstdio>

#include "gwspine/gwspine.hpp"

int main() {
  using namespace gwspine;
  const auto law = OffspringLaw::geometric(0.5);
  const std::size_t depth = 12;
  const std::size_t horizon = 4;
  const auto table = build_norming_table(law, 0.5, depth + 1);
  const SpineKernels kernels(law, table, depth);

  Rng rng = replica_stream(2024, 0);
  const MarkedTree marked = sample_marked_tree(kernels, depth, 1'000'000, rng);
  const auto record = holder_trajectory(marked, table, law.mean(), horizon);

  std::printf("vertices %llu, truncated %s\n",
              static_cast<unsigned long long>(marked.tree.vertex_count()),
              marked.tree.truncated() ? "yes" : "no");
  std::printf("%3s %8s %10s %12s %12s\n", "n", "nu(xi)", "Z_n", "W(xi_n)", "holder");
  for (const auto& pt : record.points) {
    std::printf("%3zu %8llu %10llu %12.6f %12.6f\n", pt.n,
                static_cast<unsigned long long>(pt.nu_spine),
                static_cast<unsigned long long>(pt.z_n), pt.w_hat_spine, pt.holder_hat);
  }
}
