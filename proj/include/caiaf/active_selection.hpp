/// @file  active_selection.hpp
/// @brief Batch query strategies: informative-and-diverse, uncertainty and
///        random.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caiaf/dataset.hpp"
#include "caiaf/kmeans.hpp"
#include "caiaf/linear_classifier.hpp"

namespace caiaf {

enum class Strategy { informative_diverse, uncertainty, random };

inline std::string_view to_string(Strategy s) {
	switch (s) {
	case Strategy::informative_diverse: return "informative_diverse";
	case Strategy::uncertainty: return "uncertainty";
	case Strategy::random: return "random";
	}
	return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
	for (auto v : {Strategy::informative_diverse, Strategy::uncertainty, Strategy::random})
		if (to_string(v) == s)
			return v;
	throw InvalidArgument("unknown selection strategy '" + std::string(s) + "'");
}

struct SelectionConfig {
	Strategy strategy = Strategy::informative_diverse;
	std::size_t batch_size = 5;
	std::uint64_t rng_seed = 0;
	/// Number of pool clusters for informative_diverse; defaults to
	/// min(batch_size, |pool|).
	std::optional<std::size_t> clusters;
};

/// Per-dimension z-scores (population standard deviation). Constant
/// dimensions are centred but not scaled.
inline std::vector<std::vector<double>> standardize(std::span<const std::span<const double>> rows) {
	std::vector<std::vector<double>> out;
	if (rows.empty())
		return out;
	const std::size_t dim = rows.front().size();
	const double n = static_cast<double>(rows.size());
	std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
	for (const auto& r : rows)
		for (std::size_t d = 0; d < dim; ++d)
			mean[d] += r[d];
	for (auto& m : mean)
		m /= n;
	for (const auto& r : rows)
		for (std::size_t d = 0; d < dim; ++d)
			sd[d] += (r[d] - mean[d]) * (r[d] - mean[d]);
	for (auto& s : sd) {
		s = std::sqrt(s / n);
		if (s == 0.0)
			s = 1.0;
	}
	out.reserve(rows.size());
	for (const auto& r : rows) {
		std::vector<double> z(dim);
		for (std::size_t d = 0; d < dim; ++d)
			z[d] = (r[d] - mean[d]) / sd[d];
		out.push_back(std::move(z));
	}
	return out;
}

/// Indices of the `m` smallest uncertainties, ties by index.
inline std::vector<std::size_t> select_by_uncertainty(std::span<const double> uncertainties, std::size_t m) {
	std::vector<std::size_t> idx(uncertainties.size());
	std::iota(idx.begin(), idx.end(), std::size_t{0});
	std::stable_sort(idx.begin(), idx.end(),
	                 [&](std::size_t a, std::size_t b) { return uncertainties[a] < uncertainties[b]; });
	idx.resize(std::min(m, idx.size()));
	return idx;
}

/// Informative-and-diverse batch over pool rows:
///  1. z-score the features per dimension;
///  2. k-means (k-means++ seeded from `rng_seed`, tol 1e-6, 100 iterations);
///  3. order clusters by size descending, ties by smallest member index;
///  4. visit clusters round-robin, each visit taking that cluster's
///     not-yet-taken member with the smallest uncertainty (ties by index),
///     skipping exhausted clusters, until `m` items are taken.
inline std::vector<std::size_t> select_informative_diverse(std::span<const std::span<const double>> features,
                                                           std::span<const double> uncertainties, std::size_t m,
                                                           std::size_t k, std::uint64_t rng_seed) {
	const std::size_t n = features.size();
	m = std::min(m, n);
	k = std::min(k, n);
	if (n == 0 || m == 0)
		return {};
	const auto z = standardize(features);
	const auto km = kmeans(z, k, KMeansConfig{100, 1e-6, rng_seed});

	// Members are pushed in index order, so members[c].front() is the
	// cluster's smallest index.
	std::vector<std::vector<std::size_t>> members(k);
	for (std::size_t i = 0; i < n; ++i)
		members[km.assignment[i]].push_back(i);
	std::vector<std::size_t> order(k);
	std::iota(order.begin(), order.end(), std::size_t{0});
	std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		if (members[a].size() != members[b].size())
			return members[a].size() > members[b].size();
		return members[a].front() < members[b].front();
	});
	for (auto& mem : members)
		std::stable_sort(mem.begin(), mem.end(),
		                 [&](std::size_t a, std::size_t b) { return uncertainties[a] < uncertainties[b]; });

	std::vector<std::size_t> taken;
	std::vector<std::size_t> cursor(k, 0);
	while (taken.size() < m) {
		for (std::size_t c : order) {
			if (taken.size() == m)
				break;
			if (cursor[c] < members[c].size())
				taken.push_back(members[c][cursor[c]++]);
		}
	}
	return taken;
}

/// `m` distinct indices of [0, n) drawn uniformly (partial Fisher-Yates).
inline std::vector<std::size_t> select_random_indices(std::size_t n, std::size_t m, std::uint64_t rng_seed) {
	std::vector<std::size_t> idx(n);
	std::iota(idx.begin(), idx.end(), std::size_t{0});
	Rng rng(rng_seed);
	m = std::min(m, n);
	for (std::size_t i = 0; i < m; ++i)
		std::swap(idx[i], idx[i + rng.index(n - i)]);
	idx.resize(m);
	return idx;
}

/// Random baseline over a pool of records (or record pointers).
template <std::ranges::random_access_range Pool>
std::vector<std::string> select_random(const Pool& pool, std::size_t m, std::uint64_t rng_seed) {
	std::vector<std::string> ids;
	for (std::size_t i : select_random_indices(std::ranges::size(pool), m, rng_seed))
		ids.push_back(detail::as_record(pool[i]).id);
	return ids;
}

/// Next batch of min(batch_size, |pool|) distinct ids from `pool`, which
/// holds ImageRecord values or pointers.
template <std::ranges::random_access_range Pool>
std::vector<std::string> select(const Pool& pool, const Model& model, const SelectionConfig& config) {
	const std::size_t n = std::ranges::size(pool);
	if (n == 0)
		throw InvalidArgument("cannot select from an empty pool");
	if (config.batch_size < 1)
		throw InvalidArgument("batch size must be >= 1");
	if (config.strategy == Strategy::random)
		return select_random(pool, config.batch_size, config.rng_seed);

	std::vector<std::span<const double>> features;
	std::vector<double> unc;
	features.reserve(n);
	unc.reserve(n);
	for (std::size_t i = 0; i < n; ++i) {
		const ImageRecord& r = detail::as_record(pool[i]);
		features.emplace_back(r.features);
		unc.push_back(uncertainty(model, r.features));
	}
	std::vector<std::size_t> picked;
	if (config.strategy == Strategy::uncertainty) {
		picked = select_by_uncertainty(unc, config.batch_size);
	} else {
		const std::size_t k = config.clusters.value_or(std::min(config.batch_size, n));
		if (k < 1)
			throw InvalidArgument("cluster count must be >= 1");
		picked = select_informative_diverse(features, unc, config.batch_size, k, config.rng_seed);
	}
	std::vector<std::string> ids;
	ids.reserve(picked.size());
	for (std::size_t i : picked)
		ids.push_back(detail::as_record(pool[i]).id);
	return ids;
}

} // namespace caiaf
