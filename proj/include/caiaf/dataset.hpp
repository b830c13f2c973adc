/// @file  dataset.hpp
/// @brief Image records with metadata: loading, validation, splitting,
///        synthesis, plus the embedding table and gazetteer side files.
///
/// Dataset files are line-delimited JSON. The first line is a header
///
///     {"format":"caiaf-dataset","version":1,"feature_dim":D,"classes":[...]}
///
/// and every following non-blank line is one record
///
///     {"id":..,"features":[..],"label":..,"metadata":{"lat":..,"lon":..,
///      "timestamp":..,"tags":[..],"description":..,"headline":..,"exif":{..}},
///      "image_uri":..,"alpha":..}
///
/// with absent optional fields omitted.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ranges>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "caiaf/common.hpp"
#include "caiaf/geo.hpp"

namespace caiaf {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Metadata axis used to cluster and display a batch. Camera (Exif) tags are
/// stored on records but have no metric, so they are not a dimension.
enum class ContextDimension { location, time, user_tags, description_keywords };

inline constexpr std::array<ContextDimension, 4> kAllDimensions = {
	ContextDimension::location, ContextDimension::time, ContextDimension::user_tags,
	ContextDimension::description_keywords};

inline std::string_view to_string(ContextDimension d) {
	switch (d) {
	case ContextDimension::location: return "location";
	case ContextDimension::time: return "time";
	case ContextDimension::user_tags: return "user_tags";
	case ContextDimension::description_keywords: return "description_keywords";
	}
	return "?";
}

inline std::optional<ContextDimension> parse_dimension(std::string_view s) {
	for (auto d : kAllDimensions)
		if (to_string(d) == s)
			return d;
	return std::nullopt;
}

inline ContextDimension dimension_from_string(std::string_view s) {
	if (auto d = parse_dimension(s))
		return *d;
	throw InvalidArgument("unknown context dimension '" + std::string(s) +
	                      "' (expected location, time, user_tags or description_keywords)");
}

struct Metadata {
	std::optional<LatLon> location;
	std::optional<std::int64_t> timestamp; ///< seconds since the Unix epoch, UTC
	std::vector<std::string> tags;
	std::optional<std::string> description;
	std::optional<std::string> headline;
	std::map<std::string, std::string> exif;

	/// True when the record carries what `d` needs to be clustered and shown.
	bool has(ContextDimension d) const {
		switch (d) {
		case ContextDimension::location: return location.has_value();
		case ContextDimension::time: return timestamp.has_value();
		case ContextDimension::user_tags: return !tags.empty();
		case ContextDimension::description_keywords:
			return !tags.empty() || (description && !description->empty());
		}
		return false;
	}

	friend bool operator==(const Metadata&, const Metadata&) = default;
};

struct ImageRecord {
	std::string id;
	std::vector<double> features;
	std::optional<std::string> label;
	Metadata metadata;
	std::optional<std::string> image_uri;
	/// Intrinsic ambiguity in [0,1]; only synthetic data carries it, and only
	/// the simulated annotator reads it.
	std::optional<double> alpha;

	friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Dataset {
	std::size_t feature_dim = 0;
	std::vector<std::string> classes;
	std::vector<ImageRecord> records;

	/// Position of `id` in `records`, or nullopt. Uses the id index when it
	/// is current (see reindex()), a linear scan otherwise.
	std::optional<std::size_t> find(std::string_view id) const {
		if (index_.size() != records.size()) {
			for (std::size_t i = 0; i < records.size(); ++i)
				if (records[i].id == id)
					return i;
			return std::nullopt;
		}
		auto it = index_.find(std::string(id));
		if (it == index_.end())
			return std::nullopt;
		return it->second;
	}

	const ImageRecord& at(std::string_view id) const {
		if (auto pos = find(id))
			return records[*pos];
		throw InvalidArgument("unknown item id '" + std::string(id) + "'");
	}

	bool has_class(std::string_view name) const {
		return std::find(classes.begin(), classes.end(), name) != classes.end();
	}

	/// Rebuild the id index; call after mutating `records`.
	void reindex() {
		index_.clear();
		for (std::size_t i = 0; i < records.size(); ++i)
			index_.emplace(records[i].id, i);
	}

	friend bool operator==(const Dataset& a, const Dataset& b) {
		return a.feature_dim == b.feature_dim && a.classes == b.classes && a.records == b.records;
	}

private:
	std::unordered_map<std::string, std::size_t> index_;
};

struct IngestReport {
	std::size_t read = 0;    ///< well-formed records seen
	std::size_t kept = 0;
	std::size_t dropped = 0; ///< records missing a required dimension
	std::vector<std::string> dropped_ids;
};

struct DatasetSplit {
	std::vector<std::string> seed_labeled;
	std::vector<std::string> pool;
	std::vector<std::string> holdout;

	friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct EmbeddingTable {
	std::size_t dim = 0;
	std::map<std::string, std::vector<double>> entries;

	const std::vector<double>* lookup(const std::string& word) const {
		auto it = entries.find(word);
		return it == entries.end() ? nullptr : &it->second;
	}
	bool empty() const noexcept { return entries.empty(); }
};

struct GazetteerEntry {
	std::string name;
	LatLon position;
};

struct Gazetteer {
	std::vector<GazetteerEntry> entries;
};

// ---------------------------------------------------------------------------
// JSON encoding

namespace detail {

[[noreturn]] inline void bad_field(const std::string& source, std::size_t line, const std::string& what) {
	throw ParseError(source, line, what);
}

inline double json_number(const Json& j, const char* name, const std::string& src, std::size_t line) {
	if (!j.is_number())
		bad_field(src, line, std::string("field '") + name + "' must be a number");
	const double v = j.get<double>();
	if (!std::isfinite(v))
		bad_field(src, line, std::string("field '") + name + "' must be finite");
	return v;
}

inline std::string json_string(const Json& j, const char* name, const std::string& src, std::size_t line) {
	if (!j.is_string())
		bad_field(src, line, std::string("field '") + name + "' must be a string");
	return j.get<std::string>();
}

} // namespace detail

inline OrderedJson metadata_to_json(const Metadata& m) {
	OrderedJson j = OrderedJson::object();
	if (m.location) {
		j["lat"] = m.location->lat;
		j["lon"] = m.location->lon;
	}
	if (m.timestamp)
		j["timestamp"] = *m.timestamp;
	if (!m.tags.empty())
		j["tags"] = m.tags;
	if (m.description)
		j["description"] = *m.description;
	if (m.headline)
		j["headline"] = *m.headline;
	if (!m.exif.empty()) {
		OrderedJson e = OrderedJson::object();
		for (const auto& [k, v] : m.exif)
			e[k] = v;
		j["exif"] = std::move(e);
	}
	return j;
}

inline OrderedJson record_to_json(const ImageRecord& r) {
	OrderedJson j;
	j["id"] = r.id;
	j["features"] = r.features;
	if (r.label)
		j["label"] = *r.label;
	OrderedJson meta = metadata_to_json(r.metadata);
	if (!meta.empty())
		j["metadata"] = std::move(meta);
	if (r.image_uri)
		j["image_uri"] = *r.image_uri;
	if (r.alpha)
		j["alpha"] = *r.alpha;
	return j;
}

inline Metadata metadata_from_json(const Json& j, const std::string& src = {}, std::size_t line = 0) {
	using detail::bad_field;
	if (!j.is_object())
		bad_field(src, line, "'metadata' must be an object");
	Metadata m;
	const bool has_lat = j.contains("lat");
	const bool has_lon = j.contains("lon");
	if (has_lat != has_lon)
		bad_field(src, line, "'lat' and 'lon' must be given together");
	if (has_lat) {
		LatLon p{detail::json_number(j["lat"], "lat", src, line), detail::json_number(j["lon"], "lon", src, line)};
		if (!in_bounds(p))
			bad_field(src, line, "coordinates out of range");
		m.location = p;
	}
	if (j.contains("timestamp")) {
		const Json& t = j["timestamp"];
		if (!t.is_number_integer())
			bad_field(src, line, "'timestamp' must be an integer");
		const auto ts = t.get<std::int64_t>();
		if (ts < 0)
			bad_field(src, line, "'timestamp' must be >= 0");
		m.timestamp = ts;
	}
	if (j.contains("tags")) {
		const Json& t = j["tags"];
		if (!t.is_array())
			bad_field(src, line, "'tags' must be an array of strings");
		for (const auto& tag : t)
			m.tags.push_back(detail::json_string(tag, "tags", src, line));
	}
	if (j.contains("description"))
		m.description = detail::json_string(j["description"], "description", src, line);
	if (j.contains("headline"))
		m.headline = detail::json_string(j["headline"], "headline", src, line);
	if (j.contains("exif")) {
		const Json& e = j["exif"];
		if (!e.is_object())
			bad_field(src, line, "'exif' must be an object");
		for (const auto& [k, v] : e.items())
			m.exif[k] = v.is_string() ? v.get<std::string>() : v.dump();
	}
	return m;
}

/// Parse and validate one record line against the dataset header.
inline ImageRecord record_from_json(const Json& j, std::size_t feature_dim, std::span<const std::string> classes,
                                    const std::string& src = {}, std::size_t line = 0) {
	using detail::bad_field;
	if (!j.is_object())
		bad_field(src, line, "record must be a JSON object");
	ImageRecord r;
	if (!j.contains("id"))
		bad_field(src, line, "record has no 'id'");
	r.id = detail::json_string(j["id"], "id", src, line);
	if (r.id.empty())
		bad_field(src, line, "'id' must be non-empty");
	if (!j.contains("features") || !j["features"].is_array())
		bad_field(src, line, "record '" + r.id + "' has no 'features' array");
	for (const auto& v : j["features"])
		r.features.push_back(detail::json_number(v, "features", src, line));
	if (r.features.size() != feature_dim)
		bad_field(src, line, "record '" + r.id + "' has " + std::to_string(r.features.size()) +
		                         " features, header declares " + std::to_string(feature_dim));
	if (j.contains("label")) {
		r.label = detail::json_string(j["label"], "label", src, line);
		if (std::find(classes.begin(), classes.end(), *r.label) == classes.end())
			bad_field(src, line, "record '" + r.id + "' has undeclared label '" + *r.label + "'");
	}
	if (j.contains("metadata"))
		r.metadata = metadata_from_json(j["metadata"], src, line);
	if (j.contains("image_uri"))
		r.image_uri = detail::json_string(j["image_uri"], "image_uri", src, line);
	if (j.contains("alpha")) {
		const double a = detail::json_number(j["alpha"], "alpha", src, line);
		if (a < 0.0 || a > 1.0)
			bad_field(src, line, "'alpha' must lie in [0,1]");
		r.alpha = a;
	}
	return r;
}

inline OrderedJson dataset_header_json(const Dataset& d) {
	OrderedJson h;
	h["format"] = "caiaf-dataset";
	h["version"] = 1;
	h["feature_dim"] = d.feature_dim;
	h["classes"] = d.classes;
	return h;
}

inline void write_dataset(std::ostream& os, const Dataset& d) {
	os << dataset_header_json(d).dump() << '\n';
	for (const auto& r : d.records)
		os << record_to_json(r).dump() << '\n';
}

inline void write_dataset(const std::string& path, const Dataset& d) {
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw Error("cannot open '" + path + "' for writing");
	write_dataset(os, d);
	if (!os)
		throw Error("write to '" + path + "' failed");
}

inline std::string dataset_to_string(const Dataset& d) {
	std::ostringstream os;
	write_dataset(os, d);
	return os.str();
}

// ---------------------------------------------------------------------------
// Ingest

/// Read a dataset, dropping records that lack any dimension in
/// `require_complete`. Records keep file order.
inline std::pair<Dataset, IngestReport> ingest(std::istream& in, std::span<const ContextDimension> require_complete,
                                               const std::string& source = "<input>") {
	using detail::bad_field;
	Dataset d;
	IngestReport report;
	std::unordered_set<std::string> seen;
	std::string text;
	std::size_t line = 0;
	bool have_header = false;
	while (std::getline(in, text)) {
		++line;
		if (!text.empty() && text.back() == '\r')
			text.pop_back();
		if (text.find_first_not_of(" \t") == std::string::npos)
			continue;
		Json j;
		try {
			j = Json::parse(text);
		} catch (const Json::parse_error& e) {
			bad_field(source, line, std::string("malformed JSON: ") + e.what());
		}
		if (!have_header) {
			if (!j.is_object() || j.value("format", "") != "caiaf-dataset")
				bad_field(source, line, "missing caiaf-dataset header");
			if (!j.contains("version") || j["version"] != 1)
				bad_field(source, line, "unsupported dataset version");
			if (!j.contains("feature_dim") || !j["feature_dim"].is_number_unsigned() || j["feature_dim"].get<std::size_t>() == 0)
				bad_field(source, line, "'feature_dim' must be a positive integer");
			d.feature_dim = j["feature_dim"].get<std::size_t>();
			if (!j.contains("classes") || !j["classes"].is_array())
				bad_field(source, line, "'classes' must be an array");
			for (const auto& c : j["classes"]) {
				auto name = detail::json_string(c, "classes", source, line);
				if (name.empty() || d.has_class(name))
					bad_field(source, line, "class names must be non-empty and unique");
				d.classes.push_back(std::move(name));
			}
			have_header = true;
			continue;
		}
		ImageRecord r = record_from_json(j, d.feature_dim, d.classes, source, line);
		if (!seen.insert(r.id).second)
			bad_field(source, line, "duplicate id '" + r.id + "'");
		++report.read;
		const bool complete = std::all_of(require_complete.begin(), require_complete.end(),
		                                  [&](ContextDimension dim) { return r.metadata.has(dim); });
		if (!complete) {
			++report.dropped;
			report.dropped_ids.push_back(r.id);
			continue;
		}
		d.records.push_back(std::move(r));
	}
	if (!have_header)
		bad_field(source, 0, "empty dataset file (no header)");
	report.kept = d.records.size();
	d.reindex();
	return {std::move(d), std::move(report)};
}

inline std::pair<Dataset, IngestReport> ingest(const std::string& path,
                                               std::span<const ContextDimension> require_complete = {}) {
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw Error("cannot open dataset '" + path + "'");
	return ingest(in, require_complete, path);
}

// ---------------------------------------------------------------------------
// Split

namespace detail {

inline const ImageRecord& as_record(const ImageRecord& r) { return r; }
inline const ImageRecord& as_record(const ImageRecord* r) { return *r; }

} // namespace detail

/// Stratified seed / holdout / pool split over the labeled records of each
/// class in `classes`; unlabeled records (and labels outside `classes`) are
/// never placed in seed or holdout. Per class: shuffle that class's records,
/// take `seed_per_class`, then round(holdout_frac * class size) for holdout,
/// the rest go to the pool. All three lists are reported in record order.
template <std::ranges::random_access_range Records>
DatasetSplit split(const Records& records, std::span<const std::string> classes, std::size_t seed_per_class,
                   double holdout_frac, std::uint64_t rng_seed) {
	using detail::as_record;
	if (!(holdout_frac > 0.0 && holdout_frac < 0.5))
		throw InvalidArgument("holdout fraction must lie in (0, 0.5)");
	std::vector<std::string> ordered(classes.begin(), classes.end());
	std::sort(ordered.begin(), ordered.end());
	enum class Part : unsigned char { pool, seed, holdout };
	const std::size_t n = std::ranges::size(records);
	std::vector<Part> part(n, Part::pool);
	Rng rng(rng_seed);
	for (const auto& cls : ordered) {
		std::vector<std::size_t> members;
		for (std::size_t i = 0; i < n; ++i)
			if (as_record(records[i]).label && *as_record(records[i]).label == cls)
				members.push_back(i);
		if (members.size() < seed_per_class)
			throw InvalidArgument("class '" + cls + "' has " + std::to_string(members.size()) +
			                      " labeled records, fewer than seed_per_class=" + std::to_string(seed_per_class));
		const auto n_holdout = static_cast<std::size_t>(std::floor(holdout_frac * static_cast<double>(members.size()) + 0.5));
		if (seed_per_class + n_holdout > members.size())
			throw InvalidArgument("class '" + cls + "' is too small for the requested seed and holdout sizes");
		rng.shuffle(members);
		for (std::size_t k = 0; k < seed_per_class; ++k)
			part[members[k]] = Part::seed;
		for (std::size_t k = seed_per_class; k < seed_per_class + n_holdout; ++k)
			part[members[k]] = Part::holdout;
	}
	DatasetSplit s;
	for (std::size_t i = 0; i < n; ++i) {
		switch (part[i]) {
		case Part::seed: s.seed_labeled.push_back(as_record(records[i]).id); break;
		case Part::holdout: s.holdout.push_back(as_record(records[i]).id); break;
		case Part::pool: s.pool.push_back(as_record(records[i]).id); break;
		}
	}
	return s;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthClass {
	std::string name;
	std::vector<double> mean; ///< empty: -/+ SynthConfig::mean_offset on every axis
	LatLon anchor;
	double radius_km = 30.0;
	std::int64_t time_start = 0;
	std::int64_t time_end = 0; ///< inclusive
	std::vector<std::string> vocabulary;
};

struct SynthConfig {
	std::size_t n_per_class = 400;
	std::size_t feature_dim = 8;
	double mean_offset = 0.5;
	double sigma = 1.0;
	/// Probability that an item's metadata comes from its own class.
	double rho = 0.9;
	std::size_t tags_per_item = 3;
	double tag_noise = 0.1;
	std::string id_prefix;
	std::array<SynthClass, 2> classes = {
		SynthClass{"lake", {}, {40.7128, -74.0060}, 30.0, 1559347200, 1559347200 + 14 * 86400,
		           {"lake", "shore", "pier", "calm", "reflection", "canoe", "pond", "dock"}},
		SynthClass{"ocean", {}, {36.1699, -115.1398}, 30.0, 1564617600, 1564617600 + 14 * 86400,
		           {"ocean", "wave", "surf", "beach", "tide", "sand", "coast", "seagull"}},
	};
	std::vector<std::string> noise_vocabulary = {"photo", "nikon", "canon", "summer",
	                                             "travel", "vacation", "friends", "weekend"};
};

namespace detail {

inline std::array<std::vector<double>, 2> class_means(const SynthConfig& c) {
	std::array<std::vector<double>, 2> means;
	for (std::size_t k = 0; k < 2; ++k) {
		if (c.classes[k].mean.empty())
			means[k].assign(c.feature_dim, k == 0 ? -c.mean_offset : c.mean_offset);
		else
			means[k] = c.classes[k].mean;
		if (means[k].size() != c.feature_dim)
			throw InvalidArgument("class mean length does not match feature_dim");
	}
	return means;
}

} // namespace detail

/// Ambiguity of `x` under the equal-prior isotropic two-Gaussian mixture:
/// 1 - 2|P(class 1 | x) - 1/2|, i.e. 1 on the decision boundary and -> 0 far
/// from it.
inline double mixture_ambiguity(std::span<const double> x, std::span<const double> mean0,
                                std::span<const double> mean1, double sigma) {
	double d0 = 0.0, d1 = 0.0;
	for (std::size_t i = 0; i < x.size(); ++i) {
		d0 += (x[i] - mean0[i]) * (x[i] - mean0[i]);
		d1 += (x[i] - mean1[i]) * (x[i] - mean1[i]);
	}
	if (sigma == 0.0)
		return d0 == d1 ? 1.0 : 0.0;
	// log-odds of class 1; 2P - 1 = tanh(L / 2)
	const double log_odds = (d0 - d1) / (2.0 * sigma * sigma);
	return 1.0 - std::fabs(std::tanh(0.5 * log_odds));
}

inline void validate(const SynthConfig& c) {
	if (!(c.rho >= 0.0 && c.rho <= 1.0))
		throw InvalidArgument("rho must lie in [0,1]");
	if (c.n_per_class < 1)
		throw InvalidArgument("n_per_class must be >= 1");
	if (c.feature_dim < 1)
		throw InvalidArgument("feature_dim must be >= 1");
	if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma))
		throw InvalidArgument("sigma must be finite and >= 0");
	if (!(c.tag_noise >= 0.0 && c.tag_noise <= 1.0))
		throw InvalidArgument("tag_noise must lie in [0,1]");
	if (c.classes[0].name.empty() || c.classes[1].name.empty() || c.classes[0].name == c.classes[1].name)
		throw InvalidArgument("synthetic class names must be distinct and non-empty");
	const auto means = detail::class_means(c);
	if (c.sigma == 0.0 && means[0] == means[1])
		throw InvalidArgument("degenerate synthetic config: identical class means with sigma = 0");
	for (const auto& cls : c.classes) {
		require_in_bounds(cls.anchor);
		if (!(cls.radius_km >= 0.0))
			throw InvalidArgument("radius_km must be >= 0");
		if (cls.time_start < 0 || cls.time_end < cls.time_start)
			throw InvalidArgument("class time window must satisfy 0 <= start <= end");
		if (cls.vocabulary.empty())
			throw InvalidArgument("class vocabulary must be non-empty");
	}
	if (c.tag_noise > 0.0 && c.noise_vocabulary.empty())
		throw InvalidArgument("tag_noise > 0 needs a noise vocabulary");
}

/// Two-class synthetic dataset. Items alternate between the classes; each
/// item's location, timestamp and tags come from its own class with
/// probability rho and from the other class otherwise (one draw per item).
inline Dataset synth(const SynthConfig& c, std::uint64_t rng_seed) {
	validate(c);
	const auto means = detail::class_means(c);
	Rng rng(rng_seed);
	Dataset d;
	d.feature_dim = c.feature_dim;
	d.classes = {c.classes[0].name, c.classes[1].name};
	d.records.reserve(2 * c.n_per_class);
	const int width = static_cast<int>(std::to_string(c.n_per_class - 1).size());
	for (std::size_t i = 0; i < c.n_per_class; ++i) {
		for (std::size_t k = 0; k < 2; ++k) {
			const SynthClass& own = c.classes[k];
			ImageRecord r;
			std::string num = std::to_string(i);
			r.id = c.id_prefix + own.name + "-" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
			r.label = own.name;
			r.features.resize(c.feature_dim);
			for (std::size_t f = 0; f < c.feature_dim; ++f)
				r.features[f] = means[k][f] + c.sigma * rng.normal();
			r.alpha = mixture_ambiguity(r.features, means[0], means[1], c.sigma);

			const SynthClass& src = rng.bernoulli(c.rho) ? own : c.classes[1 - k];
			const double bearing = rng.uniform(0.0, 2.0 * std::numbers::pi);
			const double dist = src.radius_km * std::sqrt(rng.uniform());
			r.metadata.location = destination(src.anchor, bearing, dist);
			r.metadata.timestamp = rng.integer(src.time_start, src.time_end);

			std::vector<std::string> vocab = src.vocabulary;
			rng.shuffle(vocab);
			vocab.resize(std::min(c.tags_per_item, vocab.size()));
			for (auto& tag : vocab)
				if (rng.bernoulli(c.tag_noise))
					tag = c.noise_vocabulary[rng.index(c.noise_vocabulary.size())];
			r.metadata.tags = std::move(vocab);
			std::string desc = "photo";
			if (!r.metadata.tags.empty())
				desc += " of " + r.metadata.tags.front();
			r.metadata.description = desc;
			r.metadata.exif["FlashUsed"] = rng.bernoulli(0.3) ? "true" : "false";
			r.metadata.exif["FocalLength"] = std::to_string(rng.integer(18, 200)) + "mm";
			d.records.push_back(std::move(r));
		}
	}
	d.reindex();
	return d;
}

/// Embedding table matching a synthetic config's vocabularies: each class's
/// words scatter around a random class direction, noise words around zero.
inline EmbeddingTable synth_embeddings(const SynthConfig& c, std::size_t dim, std::uint64_t rng_seed,
                                       double spread = 0.3) {
	if (dim == 0)
		throw InvalidArgument("embedding dim must be positive");
	Rng rng(rng_seed);
	EmbeddingTable t;
	t.dim = dim;
	for (const auto& cls : c.classes) {
		std::vector<double> dir(dim);
		double norm = 0.0;
		for (auto& v : dir) {
			v = rng.normal();
			norm += v * v;
		}
		norm = std::sqrt(norm);
		for (auto& v : dir)
			v /= norm;
		for (const auto& w : cls.vocabulary) {
			std::vector<double> vec(dim);
			for (std::size_t i = 0; i < dim; ++i)
				vec[i] = dir[i] + spread * rng.normal();
			t.entries[to_lower_ascii(w)] = std::move(vec);
		}
	}
	for (const auto& w : c.noise_vocabulary) {
		std::vector<double> vec(dim);
		for (auto& v : vec)
			v = rng.normal() / std::sqrt(static_cast<double>(dim));
		t.entries.try_emplace(to_lower_ascii(w), std::move(vec));
	}
	return t;
}

// ---------------------------------------------------------------------------
// Side files

namespace detail {

inline std::optional<double> parse_double(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
		s.remove_prefix(1);
	while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
		s.remove_suffix(1);
	if (!s.empty() && s.front() == '+')
		s.remove_prefix(1);
	double v = 0.0;
	auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
	if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
		return std::nullopt;
	return v;
}

} // namespace detail

/// Text embeddings, one `word<TAB>v1 v2 ...` per line. The first row fixes
/// the dimension. Words are lowercased.
inline EmbeddingTable load_embeddings(std::istream& in, const std::string& source = "<embeddings>") {
	EmbeddingTable t;
	std::string text;
	std::size_t line = 0;
	while (std::getline(in, text)) {
		++line;
		if (!text.empty() && text.back() == '\r')
			text.pop_back();
		if (text.find_first_not_of(" \t") == std::string::npos)
			continue;
		const auto tab = text.find('\t');
		if (tab == std::string::npos || tab == 0)
			throw ParseError(source, line, "expected 'word<TAB>values'");
		std::string word = to_lower_ascii(std::string_view(text).substr(0, tab));
		std::vector<double> vec;
		std::istringstream fields(text.substr(tab + 1));
		std::string tok;
		while (fields >> tok) {
			auto v = detail::parse_double(tok);
			if (!v)
				throw ParseError(source, line, "bad number '" + tok + "'");
			vec.push_back(*v);
		}
		if (vec.empty())
			throw ParseError(source, line, "word '" + word + "' has no vector");
		if (t.entries.empty())
			t.dim = vec.size();
		else if (vec.size() != t.dim)
			throw ParseError(source, line, "vector for '" + word + "' has length " + std::to_string(vec.size()) +
			                                   ", expected " + std::to_string(t.dim));
		if (!t.entries.emplace(std::move(word), std::move(vec)).second)
			throw ParseError(source, line, "duplicate word");
	}
	return t;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
	std::ifstream in(path);
	if (!in)
		throw Error("cannot open embeddings '" + path + "'");
	return load_embeddings(in, path);
}

inline void write_embeddings(std::ostream& os, const EmbeddingTable& t) {
	for (const auto& [word, vec] : t.entries) {
		os << word << '\t';
		for (std::size_t i = 0; i < vec.size(); ++i) {
			if (i)
				os << ' ';
			os << Json(vec[i]).dump();
		}
		os << '\n';
	}
}

namespace detail {

/// Split one CSV row; double-quoted fields may contain commas and "" escapes.
inline std::optional<std::vector<std::string>> csv_fields(std::string_view row) {
	std::vector<std::string> out;
	std::string cur;
	bool quoted = false;
	bool was_quoted = false;
	for (std::size_t i = 0; i < row.size(); ++i) {
		const char c = row[i];
		if (quoted) {
			if (c == '"') {
				if (i + 1 < row.size() && row[i + 1] == '"') {
					cur.push_back('"');
					++i;
				} else {
					quoted = false;
				}
			} else {
				cur.push_back(c);
			}
		} else if (c == '"' && cur.empty() && !was_quoted) {
			quoted = was_quoted = true;
		} else if (c == ',') {
			out.push_back(std::move(cur));
			cur.clear();
			was_quoted = false;
		} else {
			cur.push_back(c);
		}
	}
	if (quoted)
		return std::nullopt;
	out.push_back(std::move(cur));
	return out;
}

} // namespace detail

/// Gazetteer CSV with header `name,lat,lon`.
inline Gazetteer load_gazetteer(std::istream& in, const std::string& source = "<gazetteer>") {
	Gazetteer g;
	std::string text;
	std::size_t line = 0;
	bool header = false;
	while (std::getline(in, text)) {
		++line;
		if (!text.empty() && text.back() == '\r')
			text.pop_back();
		if (text.find_first_not_of(" \t") == std::string::npos)
			continue;
		auto fields = detail::csv_fields(text);
		if (!fields || fields->size() != 3)
			throw ParseError(source, line, "expected 3 CSV fields: name,lat,lon");
		if (!header) {
			if (to_lower_ascii((*fields)[0]) != "name" || to_lower_ascii((*fields)[1]) != "lat" ||
			    to_lower_ascii((*fields)[2]) != "lon")
				throw ParseError(source, line, "expected header 'name,lat,lon'");
			header = true;
			continue;
		}
		auto lat = detail::parse_double((*fields)[1]);
		auto lon = detail::parse_double((*fields)[2]);
		if (!lat || !lon)
			throw ParseError(source, line, "bad coordinate");
		LatLon p{*lat, *lon};
		if (!in_bounds(p))
			throw ParseError(source, line, "coordinate out of range");
		if ((*fields)[0].empty())
			throw ParseError(source, line, "empty place name");
		g.entries.push_back({std::move((*fields)[0]), p});
	}
	return g;
}

inline Gazetteer load_gazetteer(const std::string& path) {
	std::ifstream in(path);
	if (!in)
		throw Error("cannot open gazetteer '" + path + "'");
	return load_gazetteer(in, path);
}

} // namespace caiaf
