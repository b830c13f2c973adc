/// @file  kmeans.hpp
/// @brief Lloyd's k-means with k-means++ seeding.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "caiaf/common.hpp"

namespace caiaf {

struct KMeansConfig {
	std::size_t max_iter = 100;
	double tol = 1e-6;
	std::uint64_t rng_seed = 0;
};

struct KMeansResult {
	std::vector<std::size_t> assignment;         ///< cluster of each point
	std::vector<std::vector<double>> centroids;
	double objective = 0.0;                      ///< sum of squared distances
	std::vector<double> history;                 ///< objective after every iteration
	std::size_t iterations = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
	double s = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		const double d = a[i] - b[i];
		s += d * d;
	}
	return s;
}

namespace detail {

/// k-means++: first centre uniform, then each next centre drawn with
/// probability proportional to its squared distance to the nearest chosen
/// centre. If every remaining point coincides with a centre, the next centre
/// is drawn uniformly from the points not chosen yet.
inline std::vector<std::size_t> kmeanspp_seeds(std::span<const std::vector<double>> points, std::size_t k, Rng& rng) {
	const std::size_t n = points.size();
	std::vector<std::size_t> chosen;
	std::vector<bool> is_chosen(n, false);
	chosen.push_back(rng.index(n));
	is_chosen[chosen.back()] = true;
	std::vector<double> d2(n, std::numeric_limits<double>::infinity());
	while (chosen.size() < k) {
		const auto& last = points[chosen.back()];
		double total = 0.0;
		for (std::size_t i = 0; i < n; ++i) {
			d2[i] = std::min(d2[i], squared_distance(points[i], last));
			total += d2[i];
		}
		std::size_t pick = n;
		if (total > 0.0) {
			const double r = rng.uniform() * total;
			double acc = 0.0;
			for (std::size_t i = 0; i < n; ++i) {
				if (d2[i] <= 0.0)
					continue;
				acc += d2[i];
				pick = i;
				if (acc > r)
					break;
			}
		} else {
			std::vector<std::size_t> rest;
			for (std::size_t i = 0; i < n; ++i)
				if (!is_chosen[i])
					rest.push_back(i);
			pick = rest[rng.index(rest.size())];
		}
		chosen.push_back(pick);
		is_chosen[pick] = true;
	}
	return chosen;
}

} // namespace detail

/// Cluster `points` into k groups. Each iteration assigns points to their
/// nearest centroid (ties to the lower cluster index), repairs empty clusters
/// by moving the point farthest from its centroid into them, then moves
/// centroids to cluster means. Stops when the objective improves by less
/// than `tol` or after `max_iter` iterations. The objective never increases
/// from one iteration to the next and no cluster is empty on return.
inline KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k, const KMeansConfig& config = {}) {
	const std::size_t n = points.size();
	if (k == 0)
		throw InvalidArgument("k must be >= 1");
	if (k > n)
		throw InvalidArgument("k (" + std::to_string(k) + ") exceeds the number of points (" + std::to_string(n) + ")");
	const std::size_t dim = points.front().size();
	for (const auto& p : points) {
		if (p.size() != dim)
			throw InvalidArgument("points have inconsistent dimensions");
		for (double v : p)
			if (!std::isfinite(v))
				throw InvalidArgument("non-finite coordinate");
	}
	if (config.max_iter < 1)
		throw InvalidArgument("max_iter must be >= 1");

	Rng rng(config.rng_seed);
	KMeansResult out;
	for (std::size_t s : detail::kmeanspp_seeds(points, k, rng))
		out.centroids.push_back(points[s]);
	out.assignment.assign(n, 0);

	std::vector<std::size_t> sizes(k);
	for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
		// assignment
		std::fill(sizes.begin(), sizes.end(), 0);
		for (std::size_t i = 0; i < n; ++i) {
			std::size_t best = 0;
			double best_d = squared_distance(points[i], out.centroids[0]);
			for (std::size_t c = 1; c < k; ++c) {
				const double d = squared_distance(points[i], out.centroids[c]);
				if (d < best_d) {
					best_d = d;
					best = c;
				}
			}
			out.assignment[i] = best;
			++sizes[best];
		}
		// empty-cluster repair
		for (std::size_t c = 0; c < k; ++c) {
			if (sizes[c] != 0)
				continue;
			std::size_t far = n;
			double far_d = -1.0;
			for (std::size_t i = 0; i < n; ++i) {
				if (sizes[out.assignment[i]] <= 1)
					continue;
				const double d = squared_distance(points[i], out.centroids[out.assignment[i]]);
				if (d > far_d) {
					far_d = d;
					far = i;
				}
			}
			--sizes[out.assignment[far]];
			out.assignment[far] = c;
			sizes[c] = 1;
			out.centroids[c] = points[far];
		}
		// update
		for (auto& c : out.centroids)
			std::fill(c.begin(), c.end(), 0.0);
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t d = 0; d < dim; ++d)
				out.centroids[out.assignment[i]][d] += points[i][d];
		for (std::size_t c = 0; c < k; ++c)
			for (auto& v : out.centroids[c])
				v /= static_cast<double>(sizes[c]);

		double obj = 0.0;
		for (std::size_t i = 0; i < n; ++i)
			obj += squared_distance(points[i], out.centroids[out.assignment[i]]);
		out.history.push_back(obj);
		out.objective = obj;
		out.iterations = iter + 1;
		if (iter > 0 && out.history[iter - 1] - obj < config.tol)
			break;
	}
	return out;
}

} // namespace caiaf
