/// @file  session.hpp
/// @brief Event-sourced annotation session: issue a batch plan, collect one
///        label per item with its elapsed time, retrain once per completed
///        batch, repeat until the batch budget is spent.
///
/// Every state change is recorded as a SessionEvent. The event log is
/// line-delimited JSON, one event per line:
///
///     {"seq":N,"kind":"...","payload":{...},"wall_clock":"..."}
///
/// `wall_clock` is optional and never enters determinism checks. A session is
/// a deterministic function of its config, its resources and the sequence of
/// submitted (item, class, elapsed_ms) triples, so resume() rebuilds one by
/// replaying the label submissions of a log.
///
/// Sub-seeds: split = seed + seed_role::split; selection of batch b = seed +
/// seed_role::selection + b; clustering of batch b = seed +
/// seed_role::clustering + b; training after b batches = seed +
/// seed_role::training + b.
///
/// A Session is not internally synchronized: callers serialize mutations
/// (the HTTP service holds a per-session mutex).

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "caiaf/active_selection.hpp"
#include "caiaf/batch_clustering.hpp"
#include "caiaf/context_metrics.hpp"
#include "caiaf/dataset.hpp"
#include "caiaf/linear_classifier.hpp"

namespace caiaf {

// ---------------------------------------------------------------------------
// F1

/// 2TP / (2TP + FP + FN) for `positive`; 0 when the denominator is 0.
template <typename Label>
double f1_score(std::span<const Label> predictions, std::span<const Label> truths, const Label& positive) {
	if (predictions.size() != truths.size())
		throw InvalidArgument("predictions and truths differ in length");
	std::size_t tp = 0, fp = 0, fn = 0;
	for (std::size_t i = 0; i < truths.size(); ++i) {
		const bool p = predictions[i] == positive;
		const bool t = truths[i] == positive;
		tp += p && t;
		fp += p && !t;
		fn += !p && t;
	}
	const std::size_t denom = 2 * tp + fp + fn;
	return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

/// Mean of f1_score over `classes`.
template <typename Label>
double macro_f1(std::span<const Label> predictions, std::span<const Label> truths, std::span<const Label> classes) {
	if (classes.empty())
		return 0.0;
	double sum = 0.0;
	for (const auto& c : classes)
		sum += f1_score(predictions, truths, c);
	return sum / static_cast<double>(classes.size());
}

// ---------------------------------------------------------------------------
// Configuration

struct SessionConfig {
	std::string dataset; ///< reference to the dataset (path or name); informational
	ContextDimension dimension = ContextDimension::location;
	Mode mode = Mode::caiaf;
	std::size_t batch_size = 5;
	std::size_t total_batches = 20;
	Strategy strategy = Strategy::informative_diverse;
	std::optional<std::size_t> selection_clusters;
	/// lambda and epochs; the seed is derived from rng_seed.
	TrainConfig train;
	/// k, max_iter and tol; the seed is derived from rng_seed.
	ClusterConfig cluster;
	std::uint64_t rng_seed = 0;
	std::size_t seed_per_class = 10;
	double holdout_frac = 0.2;
	/// Required when the dataset declares more than two classes.
	std::optional<std::array<std::string, 2>> class_pair;

	friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

inline void validate(const SessionConfig& c) {
	if (c.batch_size < 1)
		throw InvalidArgument("batch_size must be >= 1");
	if (c.total_batches < 1)
		throw InvalidArgument("total_batches must be >= 1");
	if (c.cluster.k < 1 || c.cluster.k > c.batch_size)
		throw InvalidArgument("cluster k must satisfy 1 <= k <= batch_size");
	if (c.cluster.max_iter < 1)
		throw InvalidArgument("cluster max_iter must be >= 1");
	if (!(c.train.lambda > 0.0) || !std::isfinite(c.train.lambda))
		throw InvalidArgument("lambda must be > 0");
	if (c.train.epochs < 1)
		throw InvalidArgument("epochs must be >= 1");
	if (!(c.holdout_frac > 0.0 && c.holdout_frac < 0.5))
		throw InvalidArgument("holdout_frac must lie in (0, 0.5)");
	if (c.selection_clusters && *c.selection_clusters < 1)
		throw InvalidArgument("selection_clusters must be >= 1");
}

inline OrderedJson config_to_json(const SessionConfig& c) {
	OrderedJson j;
	j["dataset"] = c.dataset;
	j["dimension"] = to_string(c.dimension);
	j["mode"] = to_string(c.mode);
	j["batch_size"] = c.batch_size;
	j["total_batches"] = c.total_batches;
	j["strategy"] = to_string(c.strategy);
	if (c.selection_clusters)
		j["selection_clusters"] = *c.selection_clusters;
	j["train"] = {{"lambda", c.train.lambda}, {"epochs", c.train.epochs}};
	j["cluster"] = {{"k", c.cluster.k}, {"max_iter", c.cluster.max_iter}, {"tol", c.cluster.tol}};
	j["rng_seed"] = c.rng_seed;
	j["seed_per_class"] = c.seed_per_class;
	j["holdout_frac"] = c.holdout_frac;
	if (c.class_pair)
		j["class_pair"] = {(*c.class_pair)[0], (*c.class_pair)[1]};
	return j;
}

/// Missing fields keep their defaults; unknown fields are rejected.
inline SessionConfig config_from_json(const Json& j) {
	static const std::unordered_set<std::string> known = {
		"dataset", "dimension", "mode", "batch_size", "total_batches", "strategy", "selection_clusters",
		"train", "cluster", "rng_seed", "seed_per_class", "holdout_frac", "class_pair"};
	if (!j.is_object())
		throw InvalidArgument("session config must be a JSON object");
	for (const auto& [k, v] : j.items())
		if (!known.contains(k))
			throw InvalidArgument("unknown session config field '" + k + "'");
	SessionConfig c;
	try {
		if (j.contains("dataset"))
			c.dataset = j["dataset"].get<std::string>();
		if (j.contains("dimension"))
			c.dimension = dimension_from_string(j["dimension"].get<std::string>());
		if (j.contains("mode"))
			c.mode = mode_from_string(j["mode"].get<std::string>());
		if (j.contains("batch_size"))
			c.batch_size = j["batch_size"].get<std::size_t>();
		if (j.contains("total_batches"))
			c.total_batches = j["total_batches"].get<std::size_t>();
		if (j.contains("strategy"))
			c.strategy = strategy_from_string(j["strategy"].get<std::string>());
		if (j.contains("selection_clusters"))
			c.selection_clusters = j["selection_clusters"].get<std::size_t>();
		if (j.contains("train")) {
			const auto& t = j["train"];
			c.train.lambda = t.value("lambda", c.train.lambda);
			c.train.epochs = t.value("epochs", c.train.epochs);
		}
		if (j.contains("cluster")) {
			const auto& k = j["cluster"];
			c.cluster.k = k.value("k", c.cluster.k);
			c.cluster.max_iter = k.value("max_iter", c.cluster.max_iter);
			c.cluster.tol = k.value("tol", c.cluster.tol);
		}
		if (j.contains("rng_seed"))
			c.rng_seed = j["rng_seed"].get<std::uint64_t>();
		if (j.contains("seed_per_class"))
			c.seed_per_class = j["seed_per_class"].get<std::size_t>();
		if (j.contains("holdout_frac"))
			c.holdout_frac = j["holdout_frac"].get<double>();
		if (j.contains("class_pair")) {
			auto v = j["class_pair"].get<std::vector<std::string>>();
			if (v.size() != 2)
				throw InvalidArgument("class_pair must list exactly two classes");
			c.class_pair = std::array<std::string, 2>{v[0], v[1]};
		}
	} catch (const Json::exception& e) {
		throw InvalidArgument(std::string("bad session config: ") + e.what());
	}
	validate(c);
	return c;
}

// ---------------------------------------------------------------------------
// Events

enum class EventKind { session_created, batch_issued, label_submitted, batch_completed, model_retrained, session_completed };

inline std::string_view to_string(EventKind k) {
	switch (k) {
	case EventKind::session_created: return "session_created";
	case EventKind::batch_issued: return "batch_issued";
	case EventKind::label_submitted: return "label_submitted";
	case EventKind::batch_completed: return "batch_completed";
	case EventKind::model_retrained: return "model_retrained";
	case EventKind::session_completed: return "session_completed";
	}
	return "?";
}

inline EventKind event_kind_from_string(std::string_view s) {
	for (auto k : {EventKind::session_created, EventKind::batch_issued, EventKind::label_submitted,
	               EventKind::batch_completed, EventKind::model_retrained, EventKind::session_completed})
		if (to_string(k) == s)
			return k;
	throw InvalidArgument("unknown event kind '" + std::string(s) + "'");
}

struct SessionEvent {
	std::uint64_t seq = 0;
	EventKind kind = EventKind::session_created;
	OrderedJson payload;
	std::optional<std::string> wall_clock;

	/// Equality ignoring wall_clock.
	bool same_as(const SessionEvent& o) const { return seq == o.seq && kind == o.kind && payload == o.payload; }
};

inline OrderedJson event_to_json(const SessionEvent& e) {
	OrderedJson j;
	j["seq"] = e.seq;
	j["kind"] = to_string(e.kind);
	j["payload"] = e.payload;
	if (e.wall_clock)
		j["wall_clock"] = *e.wall_clock;
	return j;
}

inline SessionEvent event_from_json(const OrderedJson& j) {
	try {
		SessionEvent e;
		e.seq = j.at("seq").get<std::uint64_t>();
		e.kind = event_kind_from_string(j.at("kind").get<std::string>());
		e.payload = j.at("payload");
		if (j.contains("wall_clock"))
			e.wall_clock = j["wall_clock"].get<std::string>();
		return e;
	} catch (const OrderedJson::exception& ex) {
		throw ParseError("", 0, std::string("bad event: ") + ex.what());
	}
}

inline std::string event_line(const SessionEvent& e) { return event_to_json(e).dump(); }

inline std::vector<SessionEvent> read_event_log(std::istream& in, const std::string& source = "<event log>") {
	std::vector<SessionEvent> out;
	std::string text;
	std::size_t line = 0;
	while (std::getline(in, text)) {
		++line;
		if (text.find_first_not_of(" \t\r") == std::string::npos)
			continue;
		try {
			out.push_back(event_from_json(OrderedJson::parse(text)));
		} catch (const OrderedJson::exception& e) {
			throw ParseError(source, line, std::string("malformed event: ") + e.what());
		} catch (const ParseError& e) {
			throw ParseError(source, line, e.what());
		}
	}
	return out;
}

inline std::vector<SessionEvent> read_event_log(const std::string& path) {
	std::ifstream in(path);
	if (!in)
		throw Error("cannot open event log '" + path + "'");
	return read_event_log(in, path);
}

inline void write_event_log(std::ostream& os, std::span<const SessionEvent> events) {
	for (const auto& e : events)
		os << event_line(e) << '\n';
}

// ---------------------------------------------------------------------------
// Metrics

struct BatchMetrics {
	std::size_t batch_index = 0;
	double batch_ms = 0.0;
	double cumulative_ms = 0.0;
	double holdout_f1 = 0.0;
	std::size_t labeled_count = 0;

	friend bool operator==(const BatchMetrics&, const BatchMetrics&) = default;
};

struct SessionMetrics {
	std::vector<BatchMetrics> batches;
	double initial_f1 = 0.0; ///< model trained on the seed set only
	double final_f1 = 0.0;   ///< latest model
	std::size_t total_batches = 0;
	bool completed = false;

	double cumulative_ms() const { return batches.empty() ? 0.0 : batches.back().cumulative_ms; }

	friend bool operator==(const SessionMetrics&, const SessionMetrics&) = default;
};

/// Metrics are a fold over the event log; no dataset needed.
inline SessionMetrics metrics_from_events(std::span<const SessionEvent> events) {
	SessionMetrics m;
	for (const auto& e : events) {
		switch (e.kind) {
		case EventKind::session_created:
			m.total_batches = e.payload.at("config").at("total_batches").get<std::size_t>();
			break;
		case EventKind::batch_completed: {
			BatchMetrics b;
			b.batch_index = e.payload.at("batch_index").get<std::size_t>();
			b.batch_ms = e.payload.at("batch_ms").get<double>();
			b.cumulative_ms = e.payload.at("cumulative_ms").get<double>();
			b.labeled_count = e.payload.at("labeled_count").get<std::size_t>();
			m.batches.push_back(b);
			break;
		}
		case EventKind::model_retrained: {
			const double f1 = e.payload.at("holdout_f1").get<double>();
			const auto after = e.payload.at("after_batches").get<std::size_t>();
			if (after == 0)
				m.initial_f1 = f1;
			else if (!m.batches.empty() && m.batches.back().batch_index + 1 == after)
				m.batches.back().holdout_f1 = f1;
			m.final_f1 = f1;
			break;
		}
		case EventKind::session_completed: m.completed = true; break;
		default: break;
		}
	}
	return m;
}

inline std::string format_number(double v) { return Json(v).dump(); }

/// CSV: batch_index,batch_ms,cumulative_ms,holdout_f1
inline void write_metrics_csv(std::ostream& os, const SessionMetrics& m) {
	os << "batch_index,batch_ms,cumulative_ms,holdout_f1\n";
	for (const auto& b : m.batches)
		os << b.batch_index << ',' << format_number(b.batch_ms) << ',' << format_number(b.cumulative_ms) << ','
		   << format_number(b.holdout_f1) << '\n';
}

inline OrderedJson metrics_to_json(const SessionMetrics& m) {
	OrderedJson j;
	OrderedJson rows = OrderedJson::array();
	for (const auto& b : m.batches)
		rows.push_back({{"batch_index", b.batch_index},
		                {"batch_ms", b.batch_ms},
		                {"cumulative_ms", b.cumulative_ms},
		                {"holdout_f1", b.holdout_f1},
		                {"labeled_count", b.labeled_count}});
	j["batches"] = std::move(rows);
	j["completed_batches"] = m.batches.size();
	j["total_batches"] = m.total_batches;
	j["cumulative_ms"] = m.cumulative_ms();
	j["initial_f1"] = m.initial_f1;
	j["final_f1"] = m.final_f1;
	j["completed"] = m.completed;
	return j;
}

// ---------------------------------------------------------------------------
// Session

/// Error codes shared with the HTTP layer.
enum class ErrorCode { unknown_session, unknown_item, batch_closed, duplicate_label, bad_request };

inline std::string_view to_string(ErrorCode c) {
	switch (c) {
	case ErrorCode::unknown_session: return "unknown_session";
	case ErrorCode::unknown_item: return "unknown_item";
	case ErrorCode::batch_closed: return "batch_closed";
	case ErrorCode::duplicate_label: return "duplicate_label";
	case ErrorCode::bad_request: return "bad_request";
	}
	return "?";
}

class SessionError : public Error {
public:
	SessionError(ErrorCode code, const std::string& what) : Error(what), code_(code) {}
	ErrorCode code() const noexcept { return code_; }

private:
	ErrorCode code_;
};

/// Read-only inputs a session runs against.
struct SessionResources {
	std::shared_ptr<const Dataset> dataset;
	std::shared_ptr<const EmbeddingTable> embeddings = std::make_shared<EmbeddingTable>();
	std::shared_ptr<const Gazetteer> gazetteer = std::make_shared<Gazetteer>();
};

struct SessionOptions {
	/// Called with every new event, in order, before the mutating call returns.
	std::function<void(const SessionEvent&)> on_event;
	/// Stamp events with the current UTC time.
	bool wall_clock = false;
};

enum class SubmitStatus { ok, batch_complete, session_complete };

inline std::string_view to_string(SubmitStatus s) {
	switch (s) {
	case SubmitStatus::ok: return "ok";
	case SubmitStatus::batch_complete: return "batch_complete";
	case SubmitStatus::session_complete: return "session_complete";
	}
	return "?";
}

class Session {
public:
	/// Start a session: split the data, train on the seed set and issue the
	/// first batch. Throws InvalidArgument on a bad config or a seed set that
	/// does not contain both classes.
	static Session create(SessionConfig config, SessionResources resources, SessionOptions options = {}) {
		Session s(std::move(config), std::move(resources), std::move(options));
		s.start();
		return s;
	}

	/// Rebuild a session from its event log by replaying the label
	/// submissions; every regenerated event must match the logged one. Events
	/// the log is missing at its tail (e.g. a crash between a label and the
	/// batch it completed) are regenerated and passed to options.on_event.
	static Session resume(std::span<const SessionEvent> log, SessionResources resources, SessionOptions options = {}) {
		if (log.empty() || log.front().kind != EventKind::session_created)
			throw InvalidArgument("event log must start with session_created");
		SessionConfig config = config_from_json(log.front().payload.at("config"));
		auto sink = std::move(options.on_event);
		options.on_event = nullptr;
		Session s(std::move(config), std::move(resources), std::move(options));
		s.start();
		for (std::size_t i = 0; i < log.size(); ++i) {
			if (i >= s.events_.size()) {
				if (log[i].kind != EventKind::label_submitted)
					throw Error("event log diverges at seq " + std::to_string(log[i].seq) + ": unexpected " +
					            std::string(to_string(log[i].kind)));
				const auto& p = log[i].payload;
				s.submit_label(p.at("item_id").get<std::string>(), p.at("class").get<std::string>(),
				               p.at("elapsed_ms").get<double>());
			}
			if (!s.events_[i].same_as(log[i]))
				throw Error("event log diverges at seq " + std::to_string(log[i].seq) + " (" +
				            std::string(to_string(log[i].kind)) + ")");
			s.events_[i].wall_clock = log[i].wall_clock;
		}
		if (sink)
			for (std::size_t i = log.size(); i < s.events_.size(); ++i)
				sink(s.events_[i]);
		s.options_.on_event = std::move(sink);
		return s;
	}

	/// Record the annotator's label for `item_id`. Completing a batch retrains
	/// the model and issues the next batch (or ends the session).
	SubmitStatus submit_label(const std::string& item_id, const std::string& cls, double elapsed_ms) {
		if (completed_)
			throw SessionError(ErrorCode::batch_closed, "session is complete; no batch is open");
		if (!std::isfinite(elapsed_ms) || elapsed_ms < 0.0)
			throw SessionError(ErrorCode::bad_request, "elapsed_ms must be a finite value >= 0");
		if (!labels_.contains(cls))
			throw SessionError(ErrorCode::bad_request, "class '" + cls + "' is not one of this session's classes");
		if (labeled_.contains(item_id) || batch_labels_.contains(item_id))
			throw SessionError(ErrorCode::duplicate_label, "item '" + item_id + "' is already labeled");
		const auto ids = plan_->item_ids();
		if (std::find(ids.begin(), ids.end(), item_id) == ids.end())
			throw SessionError(ErrorCode::bad_request, "item '" + item_id + "' is not in the open batch");

		batch_labels_.emplace(item_id, cls);
		batch_order_.push_back({item_id, cls, elapsed_ms});
		OrderedJson p;
		p["batch_index"] = plan_->batch_index;
		p["item_id"] = item_id;
		p["class"] = cls;
		p["elapsed_ms"] = elapsed_ms;
		emit(EventKind::label_submitted, std::move(p));
		if (batch_order_.size() < ids.size())
			return SubmitStatus::ok;
		return complete_batch();
	}

	const SessionConfig& config() const noexcept { return config_; }
	const SessionResources& resources() const noexcept { return resources_; }
	const Dataset& dataset() const { return *resources_.dataset; }
	const BinaryLabels& labels() const noexcept { return labels_; }
	const DatasetSplit& split() const noexcept { return split_; }
	const Model& model() const noexcept { return model_; }
	const std::vector<SessionEvent>& events() const noexcept { return events_; }
	bool completed() const noexcept { return completed_; }
	std::size_t completed_batches() const noexcept { return batches_done_; }

	/// Open batch, or nullopt once the session is complete.
	const std::optional<PresentationPlan>& current_plan() const noexcept { return plan_; }

	/// Items of the open batch labeled so far, in submission order.
	std::vector<std::string> labeled_in_batch() const {
		std::vector<std::string> out;
		for (const auto& s : batch_order_)
			out.push_back(s.item_id);
		return out;
	}

	/// Ids still available for selection, in dataset order.
	std::vector<std::string> pool_ids() const {
		std::vector<std::string> out;
		for (const auto* r : pool_)
			out.push_back(r->id);
		return out;
	}

	/// Every id with a label the learner trains on: the seed set and all
	/// annotator labels of completed batches.
	std::size_t labeled_count() const noexcept { return split_.seed_labeled.size() + annotations_.size(); }

	SessionMetrics metrics() const { return metrics_from_events(events_); }

private:
	struct Submission {
		std::string item_id;
		std::string cls;
		double elapsed_ms;
	};

	Session(SessionConfig config, SessionResources resources, SessionOptions options)
		: config_(std::move(config)), resources_(std::move(resources)), options_(std::move(options)) {}

	void start() {
		validate(config_);
		if (!resources_.dataset)
			throw InvalidArgument("session needs a dataset");
		if (!resources_.embeddings)
			resources_.embeddings = std::make_shared<EmbeddingTable>();
		if (!resources_.gazetteer)
			resources_.gazetteer = std::make_shared<Gazetteer>();
		const Dataset& d = *resources_.dataset;

		std::array<std::string, 2> pair;
		if (config_.class_pair) {
			pair = *config_.class_pair;
			for (const auto& c : pair)
				if (!d.has_class(c))
					throw InvalidArgument("class '" + c + "' is not declared by the dataset");
		} else if (d.classes.size() == 2) {
			pair = {d.classes[0], d.classes[1]};
		} else {
			throw InvalidArgument("dataset declares " + std::to_string(d.classes.size()) +
			                      " classes; set class_pair to choose a binary task");
		}
		labels_ = BinaryLabels(pair[0], pair[1]);

		// Records outside the pair, and records missing the active dimension,
		// take no part in the session.
		for (const auto& r : d.records) {
			if (config_.class_pair && !(r.label && labels_.contains(*r.label)))
				continue;
			if (!r.metadata.has(config_.dimension))
				continue;
			records_.push_back(&r);
		}
		const std::vector<std::string> names(labels_.names().begin(), labels_.names().end());
		split_ = caiaf::split(records_, names, config_.seed_per_class, config_.holdout_frac,
		                      derive_seed(config_.rng_seed, seed_role::split));
		bool neg = false, pos = false;
		for (const auto& id : split_.seed_labeled)
			(labels_.sign(*d.at(id).label) < 0 ? neg : pos) = true;
		if (!neg || !pos)
			throw InvalidArgument("seed set must contain labeled examples of both classes (seed_per_class >= 1)");
		for (const auto& id : split_.seed_labeled)
			labeled_.insert(id);
		std::unordered_set<std::string> in_pool(split_.pool.begin(), split_.pool.end());
		for (const auto* r : records_)
			if (in_pool.contains(r->id))
				pool_.push_back(r);

		OrderedJson p;
		p["config"] = config_to_json(config_);
		p["classes"] = labels_.names();
		p["seed_count"] = split_.seed_labeled.size();
		p["pool_count"] = split_.pool.size();
		p["holdout_count"] = split_.holdout.size();
		emit(EventKind::session_created, std::move(p));
		retrain();
		if (pool_.empty())
			finish();
		else
			issue_batch();
	}

	void emit(EventKind kind, OrderedJson payload) {
		SessionEvent e;
		e.seq = events_.size();
		e.kind = kind;
		e.payload = std::move(payload);
		if (options_.wall_clock)
			e.wall_clock = now_iso8601();
		events_.push_back(std::move(e));
		if (options_.on_event)
			options_.on_event(events_.back());
	}

	static std::string now_iso8601() {
		using namespace std::chrono;
		const auto ms = duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
		std::string s = iso8601_utc(ms / 1000);
		char frac[8];
		std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms % 1000));
		s.pop_back();
		return s + frac;
	}

	void retrain() {
		const Dataset& d = *resources_.dataset;
		std::vector<ExampleView> examples;
		examples.reserve(labeled_count());
		for (const auto& id : split_.seed_labeled) {
			const auto& r = d.at(id);
			examples.push_back({r.features, labels_.sign(*r.label)});
		}
		std::vector<std::pair<std::size_t, const std::string*>> annotated;
		annotated.reserve(annotations_.size());
		for (const auto& [id, cls] : annotations_)
			annotated.emplace_back(*d.find(id), &cls);
		std::sort(annotated.begin(), annotated.end());
		for (const auto& [pos, cls] : annotated)
			examples.push_back({d.records[pos].features, labels_.sign(*cls)});
		TrainConfig tc = config_.train;
		tc.rng_seed = derive_seed(config_.rng_seed, seed_role::training, batches_done_);
		model_ = train(examples, tc);

		OrderedJson p;
		p["after_batches"] = batches_done_;
		p["labeled_count"] = examples.size();
		p["holdout_f1"] = holdout_f1();
		p["model"] = model_to_json(model_);
		emit(EventKind::model_retrained, std::move(p));
	}

	double holdout_f1() const {
		const Dataset& d = *resources_.dataset;
		std::vector<int> pred, truth;
		for (const auto& id : split_.holdout) {
			const auto& r = d.at(id);
			pred.push_back(predict(model_, r.features));
			truth.push_back(labels_.sign(*r.label));
		}
		const std::array<int, 2> classes = {-1, +1};
		return macro_f1<int>(pred, truth, classes);
	}

	void issue_batch() {
		SelectionConfig sc;
		sc.strategy = config_.strategy;
		sc.batch_size = config_.batch_size;
		sc.rng_seed = derive_seed(config_.rng_seed, seed_role::selection, batches_done_);
		sc.clusters = config_.selection_clusters;
		const auto ids = select(pool_, model_, sc);
		ClusterConfig cc = config_.cluster;
		cc.rng_seed = derive_seed(config_.rng_seed, seed_role::clustering, batches_done_);
		const PlanContext ctx{*resources_.dataset, *resources_.embeddings, *resources_.gazetteer, model_};
		plan_ = plan(ids, config_.dimension, config_.mode, cc, ctx, batches_done_, config_.total_batches);
		batch_labels_.clear();
		batch_order_.clear();
		OrderedJson p;
		p["plan"] = plan_to_json(*plan_);
		emit(EventKind::batch_issued, std::move(p));
	}

	SubmitStatus complete_batch() {
		double batch_ms = 0.0;
		for (const auto& s : batch_order_) {
			batch_ms += s.elapsed_ms;
			annotations_.emplace_back(s.item_id, s.cls);
			labeled_.insert(s.item_id);
		}
		std::erase_if(pool_, [&](const ImageRecord* r) { return batch_labels_.contains(r->id); });
		cumulative_ms_ += batch_ms;
		OrderedJson p;
		p["batch_index"] = plan_->batch_index;
		p["batch_ms"] = batch_ms;
		p["cumulative_ms"] = cumulative_ms_;
		p["labeled_count"] = labeled_count();
		emit(EventKind::batch_completed, std::move(p));
		++batches_done_;
		batch_labels_.clear();
		batch_order_.clear();
		retrain();
		if (batches_done_ >= config_.total_batches || pool_.empty()) {
			finish();
			return SubmitStatus::session_complete;
		}
		issue_batch();
		return SubmitStatus::batch_complete;
	}

	void finish() {
		plan_.reset();
		completed_ = true;
		OrderedJson p;
		p["completed_batches"] = batches_done_;
		p["cumulative_ms"] = cumulative_ms_;
		p["final_f1"] = events_.empty() ? 0.0 : metrics_from_events(events_).final_f1;
		emit(EventKind::session_completed, std::move(p));
	}

	SessionConfig config_;
	SessionResources resources_;
	SessionOptions options_;
	BinaryLabels labels_;
	std::vector<const ImageRecord*> records_;
	DatasetSplit split_;
	std::vector<const ImageRecord*> pool_;
	std::unordered_set<std::string> labeled_;
	std::vector<std::pair<std::string, std::string>> annotations_;
	Model model_;
	std::optional<PresentationPlan> plan_;
	std::unordered_map<std::string, std::string> batch_labels_;
	std::vector<Submission> batch_order_;
	std::size_t batches_done_ = 0;
	double cumulative_ms_ = 0.0;
	bool completed_ = false;
	std::vector<SessionEvent> events_;
};

/// Append-only event log file; each event is flushed as it is written.
class EventLogWriter {
public:
	explicit EventLogWriter(const std::string& path, bool append = true)
		: out_(std::make_shared<std::ofstream>(path, append ? std::ios::app : std::ios::trunc)) {
		if (!*out_)
			throw Error("cannot open event log '" + path + "' for writing");
	}

	void operator()(const SessionEvent& e) const {
		*out_ << event_line(e) << '\n';
		out_->flush();
		if (!*out_)
			throw Error("event log write failed");
	}

private:
	std::shared_ptr<std::ofstream> out_;
};

} // namespace caiaf
