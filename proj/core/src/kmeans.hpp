#pragma once

#include <random>
#include <vector>

#include <Eigen/Core>

namespace ilr::detail {

// Lloyd's algorithm with k-means++ seeding on the rows of `points`. Labels
// are renumbered so that cluster 0 is the largest; some clusters may be empty
// when there are fewer distinct points than k.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng,
                        int max_iters = 100);

}  // namespace ilr::detail
