/// @file  context_metrics.hpp
/// @brief Per-dimension distances between image metadata and the context
///        payload shown next to each image.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caiaf/dataset.hpp"
#include "caiaf/geo.hpp"

namespace caiaf {

/// Places closer than this to a gazetteer entry are displayed by name.
inline constexpr double kPlaceNameRadiusKm = 200.0;

/// |a - b| in seconds.
inline std::uint64_t time_distance_s(std::int64_t a, std::int64_t b) noexcept {
	return a >= b ? static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b)
	              : static_cast<std::uint64_t>(b) - static_cast<std::uint64_t>(a);
}

/// Lowercased, de-duplicated, sorted tag set.
inline std::vector<std::string> normalize_tags(std::span<const std::string> tags) {
	std::set<std::string> s;
	for (const auto& t : tags)
		if (!t.empty())
			s.insert(to_lower_ascii(t));
	return {s.begin(), s.end()};
}

/// Mean of the embedding vectors of the in-vocabulary words of a normalized
/// tag set; nullopt when none are in the vocabulary.
inline std::optional<std::vector<double>> mean_embedding(std::span<const std::string> normalized,
                                                         const EmbeddingTable& table) {
	std::vector<double> sum(table.dim, 0.0);
	std::size_t hits = 0;
	for (const auto& w : normalized) {
		if (const auto* v = table.lookup(w)) {
			for (std::size_t i = 0; i < table.dim; ++i)
				sum[i] += (*v)[i];
			++hits;
		}
	}
	if (hits == 0)
		return std::nullopt;
	for (auto& v : sum)
		v /= static_cast<double>(hits);
	return sum;
}

/// 1 - |A n B| / |A u B| over normalized sets; two empty sets are at 1.
inline double jaccard_distance(std::span<const std::string> a, std::span<const std::string> b) {
	std::vector<std::string> inter, uni;
	std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
	std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
	if (uni.empty())
		return 1.0;
	return 1.0 - static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

/// Embedding distance between tag lists: tags are lowercased and treated as
/// a set, each side is averaged over its in-vocabulary words, and the
/// distance is 1 - cosine of the means (in [0, 2]). If either side has no
/// in-vocabulary word (or a zero mean vector) the distance falls back to
/// Jaccard distance (in [0, 1]).
inline double tag_distance(std::span<const std::string> a, std::span<const std::string> b,
                           const EmbeddingTable& table) {
	const auto na = normalize_tags(a);
	const auto nb = normalize_tags(b);
	const auto ma = mean_embedding(na, table);
	const auto mb = mean_embedding(nb, table);
	if (ma && mb) {
		double dot_ab = 0.0, aa = 0.0, bb = 0.0;
		for (std::size_t i = 0; i < table.dim; ++i) {
			dot_ab += (*ma)[i] * (*mb)[i];
			aa += (*ma)[i] * (*ma)[i];
			bb += (*mb)[i] * (*mb)[i];
		}
		if (aa > 0.0 && bb > 0.0)
			return std::clamp(1.0 - dot_ab / std::sqrt(aa * bb), 0.0, 2.0);
	}
	return jaccard_distance(na, nb);
}

/// Lowercased alphanumeric runs of `text`.
inline std::vector<std::string> tokenize(std::string_view text) {
	std::vector<std::string> out;
	std::string cur;
	for (char c : text) {
		if (std::isalnum(static_cast<unsigned char>(c))) {
			cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
		} else if (!cur.empty()) {
			out.push_back(std::move(cur));
			cur.clear();
		}
	}
	if (!cur.empty())
		out.push_back(std::move(cur));
	return out;
}

/// Description tokens followed by the tags.
inline std::vector<std::string> keyword_tokens(const Metadata& m) {
	std::vector<std::string> out = m.description ? tokenize(*m.description) : std::vector<std::string>{};
	out.insert(out.end(), m.tags.begin(), m.tags.end());
	return out;
}

inline double keyword_distance(const Metadata& a, const Metadata& b, const EmbeddingTable& table) {
	return tag_distance(keyword_tokens(a), keyword_tokens(b), table);
}

// ---------------------------------------------------------------------------
// Display payload

struct ContextPayload {
	std::optional<std::string> time_display;  ///< ISO-8601 UTC
	std::optional<std::string> place_display;
	std::vector<std::string> tags_display;
	std::optional<std::string> description_display;

	friend bool operator==(const ContextPayload&, const ContextPayload&) = default;
};

/// "YYYY-MM-DDTHH:MM:SSZ"
inline std::string iso8601_utc(std::int64_t epoch_seconds) {
	const std::time_t t = static_cast<std::time_t>(epoch_seconds);
	std::tm tm{};
	if (!gmtime_r(&t, &tm))
		throw InvalidArgument("timestamp out of range");
	char buf[32];
	std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
	return buf;
}

/// Name of the nearest gazetteer entry within kPlaceNameRadiusKm, otherwise
/// "lat,lon" with four decimals.
inline std::string place_name(const LatLon& p, const Gazetteer& gazetteer) {
	const GazetteerEntry* best = nullptr;
	double best_km = kPlaceNameRadiusKm;
	for (const auto& e : gazetteer.entries) {
		const double km = geodesic_km(p, e.position);
		if (km <= best_km) {
			best_km = km;
			best = &e;
		}
	}
	if (best)
		return best->name;
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.4f,%.4f", p.lat, p.lon);
	return buf;
}

inline ContextPayload context_payload(const ImageRecord& record, const Gazetteer& gazetteer) {
	ContextPayload c;
	const Metadata& m = record.metadata;
	if (m.timestamp)
		c.time_display = iso8601_utc(*m.timestamp);
	if (m.location)
		c.place_display = place_name(*m.location, gazetteer);
	for (const auto& t : m.tags)
		if (std::find(c.tags_display.begin(), c.tags_display.end(), t) == c.tags_display.end())
			c.tags_display.push_back(t);
	if (m.description && !m.description->empty())
		c.description_display = *m.description;
	return c;
}

inline OrderedJson payload_to_json(const ContextPayload& c) {
	OrderedJson j = OrderedJson::object();
	if (c.time_display)
		j["time_display"] = *c.time_display;
	if (c.place_display)
		j["place_display"] = *c.place_display;
	j["tags_display"] = c.tags_display;
	if (c.description_display)
		j["description_display"] = *c.description_display;
	return j;
}

inline ContextPayload payload_from_json(const Json& j) {
	ContextPayload c;
	if (j.contains("time_display"))
		c.time_display = j["time_display"].get<std::string>();
	if (j.contains("place_display"))
		c.place_display = j["place_display"].get<std::string>();
	if (j.contains("tags_display"))
		c.tags_display = j["tags_display"].get<std::vector<std::string>>();
	if (j.contains("description_display"))
		c.description_display = j["description_display"].get<std::string>();
	return c;
}

} // namespace caiaf
