/// @file  batch_clustering.hpp
/// @brief Groups one selected batch by metadata similarity and lays it out
///        as a PresentationPlan.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caiaf/context_metrics.hpp"
#include "caiaf/dataset.hpp"
#include "caiaf/kmeans.hpp"
#include "caiaf/linear_classifier.hpp"

namespace caiaf {

enum class Mode { caiaf, plain };

inline std::string_view to_string(Mode m) { return m == Mode::caiaf ? "caiaf" : "plain"; }

inline Mode mode_from_string(std::string_view s) {
	if (s == "caiaf")
		return Mode::caiaf;
	if (s == "plain")
		return Mode::plain;
	throw InvalidArgument("unknown mode '" + std::string(s) + "' (expected caiaf or plain)");
}

struct ClusterConfig {
	std::size_t k = 2;
	std::size_t max_iter = 100;
	double tol = 1e-6;
	std::uint64_t rng_seed = 0;

	friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;
};

struct PlanItem {
	std::string id;
	ContextPayload context;

	friend bool operator==(const PlanItem&, const PlanItem&) = default;
};

/// One batch as shown to the annotator: ordered groups of ordered items.
/// Plain mode is a single group in selection order.
struct PresentationPlan {
	std::size_t batch_index = 0;
	std::size_t total_batches = 0;
	Mode mode = Mode::caiaf;
	ContextDimension dimension = ContextDimension::location;
	std::vector<std::vector<PlanItem>> groups;

	std::vector<std::string> item_ids() const {
		std::vector<std::string> ids;
		for (const auto& g : groups)
			for (const auto& it : g)
				ids.push_back(it.id);
		return ids;
	}

	std::size_t size() const {
		std::size_t n = 0;
		for (const auto& g : groups)
			n += g.size();
		return n;
	}

	/// Flattened positions after which a group separator is drawn.
	std::vector<std::size_t> boundaries() const {
		std::vector<std::size_t> b;
		std::size_t pos = 0;
		for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
			pos += groups[g].size();
			b.push_back(pos);
		}
		return b;
	}

	friend bool operator==(const PresentationPlan&, const PresentationPlan&) = default;
};

/// Vectors whose Euclidean geometry stands in for the dimension's metric:
/// location -> earth-centred Cartesian km; time -> seconds; user_tags and
/// description_keywords -> mean embedding of the (keyword) tag set, or the
/// zero vector when no word is in the vocabulary.
inline std::vector<std::vector<double>> embed_for_clustering(std::span<const ImageRecord* const> records,
                                                             ContextDimension dimension,
                                                             const EmbeddingTable& embeddings) {
	std::vector<std::vector<double>> out;
	out.reserve(records.size());
	for (const ImageRecord* r : records) {
		const Metadata& m = r->metadata;
		if (!m.has(dimension))
			throw InvalidArgument("record '" + r->id + "' has no " + std::string(to_string(dimension)) + " metadata");
		switch (dimension) {
		case ContextDimension::location: {
			const auto xyz = to_cartesian_km(*m.location);
			out.emplace_back(xyz.begin(), xyz.end());
			break;
		}
		case ContextDimension::time:
			out.push_back({static_cast<double>(*m.timestamp)});
			break;
		case ContextDimension::user_tags:
		case ContextDimension::description_keywords: {
			const auto tokens = dimension == ContextDimension::user_tags ? m.tags : keyword_tokens(m);
			auto mean = mean_embedding(normalize_tags(tokens), embeddings);
			out.push_back(mean ? std::move(*mean) : std::vector<double>(embeddings.dim, 0.0));
			break;
		}
		}
	}
	return out;
}

/// Everything plan() needs besides the batch itself.
struct PlanContext {
	const Dataset& dataset;
	const EmbeddingTable& embeddings;
	const Gazetteer& gazetteer;
	const Model& model;
};

/// Lay out a selected batch. In caiaf mode the batch is clustered with
/// k = min(config.k, |batch|); groups are ordered by size descending then by
/// smallest member position in `batch_ids`, and items inside a group by
/// ascending uncertainty under the current model, ties by position.
inline PresentationPlan plan(std::span<const std::string> batch_ids, ContextDimension dimension, Mode mode,
                             const ClusterConfig& config, const PlanContext& ctx, std::size_t batch_index = 0,
                             std::size_t total_batches = 0) {
	if (batch_ids.empty())
		throw InvalidArgument("cannot plan an empty batch");
	if (config.k < 1)
		throw InvalidArgument("cluster count k must be >= 1");
	std::vector<const ImageRecord*> records;
	records.reserve(batch_ids.size());
	for (const auto& id : batch_ids)
		records.push_back(&ctx.dataset.at(id));

	PresentationPlan p;
	p.batch_index = batch_index;
	p.total_batches = total_batches;
	p.mode = mode;
	p.dimension = dimension;
	auto item = [&](std::size_t i) { return PlanItem{records[i]->id, context_payload(*records[i], ctx.gazetteer)}; };

	if (mode == Mode::plain) {
		auto& g = p.groups.emplace_back();
		for (std::size_t i = 0; i < records.size(); ++i)
			g.push_back(item(i));
		return p;
	}

	const auto points = embed_for_clustering(records, dimension, ctx.embeddings);
	const std::size_t k = std::min(config.k, records.size());
	const auto km = kmeans(points, k, KMeansConfig{config.max_iter, config.tol, config.rng_seed});

	std::vector<std::vector<std::size_t>> members(k);
	for (std::size_t i = 0; i < records.size(); ++i)
		members[km.assignment[i]].push_back(i);
	std::vector<std::size_t> order(k);
	std::iota(order.begin(), order.end(), std::size_t{0});
	std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		if (members[a].size() != members[b].size())
			return members[a].size() > members[b].size();
		return members[a].front() < members[b].front();
	});
	std::vector<double> unc(records.size());
	for (std::size_t i = 0; i < records.size(); ++i)
		unc[i] = uncertainty(ctx.model, records[i]->features);
	for (std::size_t c : order) {
		auto mem = members[c];
		std::stable_sort(mem.begin(), mem.end(), [&](std::size_t a, std::size_t b) { return unc[a] < unc[b]; });
		auto& g = p.groups.emplace_back();
		for (std::size_t i : mem)
			g.push_back(item(i));
	}
	return p;
}

inline OrderedJson plan_to_json(const PresentationPlan& p) {
	OrderedJson j;
	j["batch_index"] = p.batch_index;
	j["total_batches"] = p.total_batches;
	j["mode"] = to_string(p.mode);
	j["dimension"] = to_string(p.dimension);
	OrderedJson groups = OrderedJson::array();
	for (const auto& g : p.groups) {
		OrderedJson items = OrderedJson::array();
		for (const auto& it : g) {
			OrderedJson ij;
			ij["item_id"] = it.id;
			ij["context"] = payload_to_json(it.context);
			items.push_back(std::move(ij));
		}
		groups.push_back(std::move(items));
	}
	j["groups"] = std::move(groups);
	j["boundaries"] = p.boundaries();
	return j;
}

inline PresentationPlan plan_from_json(const Json& j) {
	try {
		PresentationPlan p;
		p.batch_index = j.at("batch_index").get<std::size_t>();
		p.total_batches = j.at("total_batches").get<std::size_t>();
		p.mode = mode_from_string(j.at("mode").get<std::string>());
		p.dimension = dimension_from_string(j.at("dimension").get<std::string>());
		for (const auto& g : j.at("groups")) {
			auto& group = p.groups.emplace_back();
			for (const auto& it : g)
				group.push_back({it.at("item_id").get<std::string>(), payload_from_json(it.at("context"))});
		}
		return p;
	} catch (const Json::exception& e) {
		throw ParseError("", 0, std::string("bad presentation plan: ") + e.what());
	}
}

} // namespace caiaf
