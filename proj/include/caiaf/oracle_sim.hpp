/// @file  oracle_sim.hpp
/// @brief Simulated annotator with a parametric time/error model, and the
///        paired CAIAF-vs-plain experiment driver built on it.
///
/// For item i of a plan (in display order) the annotator perceives
///
///     a'_i = alpha_i * (1 - delta * s_i)
///
/// where alpha_i is the item's intrinsic ambiguity and s_i the fraction of
/// the other items of its displayed group that share its true class (0 for a
/// singleton group). It picks the wrong class with probability
/// min(0.5, p0 + p_amb * a'_i) and spends
///
///     t_base + t_amb * a'_i + t_switch * [chosen_i != chosen_{i-1}] + noise
///
/// milliseconds, with noise ~ N(0, noise_sd) and the total truncated at 0.
/// The switch term only applies inside a batch. Each item's random draws come
/// from a stream keyed by (seed, item id), so the same item meets the same
/// draws whichever arm or position it is shown in.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "caiaf/batch_clustering.hpp"
#include "caiaf/dataset.hpp"
#include "caiaf/session.hpp"

namespace caiaf {

struct CostModelParams {
	double t_base = 2000.0;
	double t_switch = 1500.0;
	double t_amb = 3000.0;
	double context_discount = 0.5; ///< delta
	double noise_sd = 100.0;
	std::uint64_t rng_seed = 0;
};

struct ErrorModelParams {
	double p0 = 0.02;
	double p_amb = 0.15;
};

inline constexpr double kMaxErrorProbability = 0.5;

inline void validate(const CostModelParams& c) {
	for (double v : {c.t_base, c.t_switch, c.t_amb, c.noise_sd})
		if (!(v >= 0.0) || !std::isfinite(v))
			throw InvalidArgument("cost model times must be finite and >= 0");
	if (!(c.context_discount >= 0.0 && c.context_discount <= 1.0))
		throw InvalidArgument("context discount must lie in [0,1]");
}

inline void validate(const ErrorModelParams& e) {
	if (!(e.p0 >= 0.0) || !(e.p_amb >= 0.0) || !std::isfinite(e.p0) || !std::isfinite(e.p_amb))
		throw InvalidArgument("error model probabilities must be finite and >= 0");
}

inline double perceived_ambiguity(double alpha, double same_class_fraction, double context_discount) {
	return alpha * (1.0 - context_discount * same_class_fraction);
}

inline double error_probability(double perceived, const ErrorModelParams& e) {
	return std::min(kMaxErrorProbability, e.p0 + e.p_amb * perceived);
}

/// What the annotator knows about an item.
struct ItemTruth {
	std::string label;
	double alpha = 0.0;
};

/// Fraction of the other members of `group_truths` equal to
/// group_truths[index]; 0 for a singleton.
inline double same_class_fraction(std::span<const std::string> group_truths, std::size_t index) {
	if (group_truths.size() <= 1)
		return 0.0;
	std::size_t same = 0;
	for (std::size_t j = 0; j < group_truths.size(); ++j)
		same += j != index && group_truths[j] == group_truths[index];
	return static_cast<double>(same) / static_cast<double>(group_truths.size() - 1);
}

struct Annotation {
	std::string item_id;
	std::string chosen;
	double elapsed_ms = 0.0;
	double perceived = 0.0;
	bool error = false;
	bool switched = false;
};

/// Label a plan in display order. `truth(id)` returns the item's true class
/// and ambiguity; `classes` are the two classes on offer.
template <typename TruthFn>
std::vector<Annotation> annotate(const PresentationPlan& plan, TruthFn&& truth, const std::array<std::string, 2>& classes,
                                 const CostModelParams& cost, const ErrorModelParams& err) {
	validate(cost);
	validate(err);
	std::vector<Annotation> out;
	out.reserve(plan.size());
	for (const auto& group : plan.groups) {
		std::vector<ItemTruth> truths;
		std::vector<std::string> labels;
		for (const auto& item : group) {
			truths.push_back(truth(item.id));
			labels.push_back(truths.back().label);
		}
		for (std::size_t i = 0; i < group.size(); ++i) {
			Rng rng(mix64(cost.rng_seed ^ fnv1a(group[i].id)));
			const double u_err = rng.uniform();
			const double z = rng.normal();

			Annotation a;
			a.item_id = group[i].id;
			a.perceived = perceived_ambiguity(truths[i].alpha, same_class_fraction(labels, i), cost.context_discount);
			a.error = u_err < error_probability(a.perceived, err);
			const std::string& truth_label = truths[i].label;
			const std::string& other = truth_label == classes[0] ? classes[1] : classes[0];
			a.chosen = a.error ? other : truth_label;
			a.switched = !out.empty() && out.back().chosen != a.chosen;
			const double t = cost.t_base + cost.t_amb * a.perceived + (a.switched ? cost.t_switch : 0.0) + cost.noise_sd * z;
			a.elapsed_ms = std::max(0.0, t);
			out.push_back(std::move(a));
		}
	}
	return out;
}

/// annotate() with truth taken from dataset labels and stored ambiguity
/// (records without one are treated as unambiguous).
inline std::vector<Annotation> annotate(const PresentationPlan& plan, const Dataset& dataset,
                                        const std::array<std::string, 2>& classes, const CostModelParams& cost,
                                        const ErrorModelParams& err) {
	return annotate(
		plan,
		[&](const std::string& id) {
			const auto& r = dataset.at(id);
			if (!r.label)
				throw InvalidArgument("simulated annotation needs a ground-truth label for '" + id + "'");
			return ItemTruth{*r.label, r.alpha.value_or(0.0)};
		},
		classes, cost, err);
}

// ---------------------------------------------------------------------------
// Headless runs

struct ArmResult {
	std::uint64_t seed = 0;
	Mode mode = Mode::caiaf;
	double cumulative_ms = 0.0;
	double final_f1 = 0.0;
	std::size_t switches_total = 0;
	std::size_t errors_total = 0;
	std::size_t labeled = 0; ///< annotator labels
	std::size_t batches = 0;
};

/// Run one full session with the simulated annotator. Its draws are seeded
/// with `config.rng_seed + seed_role::annotator + cost.rng_seed`, so two arms
/// that share a session seed share the annotator too.
inline ArmResult simulate_session(const SessionConfig& config, const SessionResources& resources,
                                  const CostModelParams& cost, const ErrorModelParams& err,
                                  SessionOptions options = {}, std::vector<SessionEvent>* events = nullptr) {
	Session session = Session::create(config, resources, std::move(options));
	CostModelParams annotator = cost;
	annotator.rng_seed = derive_seed(config.rng_seed, seed_role::annotator, cost.rng_seed);
	ArmResult r;
	r.seed = config.rng_seed;
	r.mode = config.mode;
	while (!session.completed()) {
		const PresentationPlan plan = *session.current_plan();
		for (const auto& a : annotate(plan, session.dataset(), session.labels().names(), annotator, err)) {
			session.submit_label(a.item_id, a.chosen, a.elapsed_ms);
			r.switches_total += a.switched;
			r.errors_total += a.error;
			++r.labeled;
		}
	}
	const auto m = session.metrics();
	r.cumulative_ms = m.cumulative_ms();
	r.final_f1 = m.final_f1;
	r.batches = m.batches.size();
	if (events)
		*events = session.events();
	return r;
}

struct AbReport {
	std::vector<ArmResult> rows; ///< sorted by (seed, mode)
	std::size_t caiaf_faster = 0;
	std::size_t plain_faster = 0;
	std::size_t ties = 0;
	double mean_f1_caiaf = 0.0;
	double mean_f1_plain = 0.0;
	double mean_ms_caiaf = 0.0;
	double mean_ms_plain = 0.0;
};

/// Paired CAIAF-vs-plain sessions: for every seed both arms use the same
/// dataset, session seed (hence split, training and selection seeds) and
/// annotator seed; only the presentation mode differs.
inline AbReport run_ab(const SessionResources& resources, SessionConfig base, std::span<const std::uint64_t> seeds,
                       const CostModelParams& cost, const ErrorModelParams& err) {
	AbReport rep;
	for (std::uint64_t seed : seeds) {
		base.rng_seed = seed;
		base.mode = Mode::caiaf;
		const ArmResult c = simulate_session(base, resources, cost, err);
		base.mode = Mode::plain;
		const ArmResult p = simulate_session(base, resources, cost, err);
		rep.rows.push_back(c);
		rep.rows.push_back(p);
		if (c.cumulative_ms < p.cumulative_ms)
			++rep.caiaf_faster;
		else if (p.cumulative_ms < c.cumulative_ms)
			++rep.plain_faster;
		else
			++rep.ties;
		rep.mean_f1_caiaf += c.final_f1;
		rep.mean_f1_plain += p.final_f1;
		rep.mean_ms_caiaf += c.cumulative_ms;
		rep.mean_ms_plain += p.cumulative_ms;
	}
	std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const ArmResult& a, const ArmResult& b) {
		if (a.seed != b.seed)
			return a.seed < b.seed;
		return to_string(a.mode) < to_string(b.mode);
	});
	if (!seeds.empty()) {
		const double n = static_cast<double>(seeds.size());
		rep.mean_f1_caiaf /= n;
		rep.mean_f1_plain /= n;
		rep.mean_ms_caiaf /= n;
		rep.mean_ms_plain /= n;
	}
	return rep;
}

/// CSV: seed,mode,cumulative_ms,final_f1,switches_total
inline void write_report_csv(std::ostream& os, std::span<const ArmResult> rows) {
	os << "seed,mode,cumulative_ms,final_f1,switches_total\n";
	for (const auto& r : rows)
		os << r.seed << ',' << to_string(r.mode) << ',' << format_number(r.cumulative_ms) << ','
		   << format_number(r.final_f1) << ',' << r.switches_total << '\n';
}

} // namespace caiaf
