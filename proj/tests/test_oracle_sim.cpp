#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace caiaf;
using caiaf::testing::synth_resources;

namespace {

PresentationPlan plan_of(std::vector<std::vector<std::string>> groups) {
	PresentationPlan p;
	for (auto& g : groups) {
		auto& out = p.groups.emplace_back();
		for (auto& id : g)
			out.push_back(PlanItem{id, {}});
	}
	return p;
}

const std::array<std::string, 2> kClasses{"a", "b"};

CostModelParams quiet() {
	CostModelParams c;
	c.t_switch = 0;
	c.t_amb = 0;
	c.noise_sd = 0;
	return c;
}

ErrorModelParams no_errors() { return ErrorModelParams{0.0, 0.0}; }

} // namespace

TEST(PerceivedAmbiguity, Formula) {
	EXPECT_DOUBLE_EQ(perceived_ambiguity(0.7, 1.0, 0.0), 0.7);
	EXPECT_DOUBLE_EQ(perceived_ambiguity(0.8, 1.0, 0.5), 0.4);
	const std::vector<std::string> g{"a", "a", "a"};
	EXPECT_DOUBLE_EQ(same_class_fraction(g, 0), 1.0);
	EXPECT_DOUBLE_EQ(same_class_fraction(std::vector<std::string>{"a", "b", "a"}, 1), 0.0);
	EXPECT_DOUBLE_EQ(same_class_fraction(std::vector<std::string>{"a"}, 0), 0.0);
	EXPECT_DOUBLE_EQ(error_probability(10.0, ErrorModelParams{}), 0.5);
}

TEST(PerceivedAmbiguity, PureGroupsLowerTheMean) {
	const auto res = synth_resources(200, 1.0);
	const Dataset& d = *res.dataset;
	Rng rng(4);
	double plain_sum = 0.0, pure_sum = 0.0;
	std::size_t count = 0;
	for (int trial = 0; trial < 200; ++trial) {
		std::vector<std::string> ids, labels;
		for (int i = 0; i < 5; ++i) {
			ids.push_back(d.records[rng.index(d.records.size())].id);
			labels.push_back(*d.at(ids.back()).label);
		}
		std::map<std::string, std::vector<std::string>> by_class;
		for (std::size_t i = 0; i < ids.size(); ++i) {
			plain_sum += perceived_ambiguity(*d.at(ids[i]).alpha, same_class_fraction(labels, i), 0.5);
			by_class[labels[i]].push_back(labels[i]);
		}
		for (std::size_t i = 0; i < ids.size(); ++i) {
			const auto& group = by_class[labels[i]];
			pure_sum += perceived_ambiguity(*d.at(ids[i]).alpha, same_class_fraction(group, 0), 0.5);
		}
		count += ids.size();
	}
	EXPECT_GE(plain_sum / count, pure_sum / count);
}

TEST(Annotate, QuietAnnotatorSpendsTheBaseTime) {
	const auto res = synth_resources(20);
	const PresentationPlan p = plan_of({{"lake-00", "ocean-00", "lake-01"}, {"ocean-01", "lake-02"}});
	const auto out = annotate(p, *res.dataset, {"lake", "ocean"}, quiet(), no_errors());
	ASSERT_EQ(out.size(), 5u);
	for (const auto& a : out) {
		EXPECT_EQ(a.elapsed_ms, 2000.0);
		EXPECT_EQ(a.chosen, *res.dataset->at(a.item_id).label);
	}
	EXPECT_EQ(out[3].item_id, "ocean-01");
}

TEST(Annotate, AlternatingClassesPayFourSwitches) {
	CostModelParams c = quiet();
	c.t_switch = 1500;
	const PresentationPlan p = plan_of({{"1", "2", "3", "4", "5"}});
	const auto out = annotate(
		p, [](const std::string& id) { return ItemTruth{std::stoi(id) % 2 ? "a" : "b", 0.0}; }, kClasses, c, no_errors());
	double total = 0.0;
	std::size_t switches = 0;
	for (const auto& a : out) {
		total += a.elapsed_ms;
		switches += a.switched;
	}
	EXPECT_EQ(switches, 4u);
	EXPECT_DOUBLE_EQ(total, 5 * 2000.0 + 4 * 1500.0);
}

TEST(Annotate, ErrorRateFollowsPerceivedAmbiguity) {
	CostModelParams c = quiet();
	c.context_discount = 0.0;
	const ErrorModelParams e{0.02, 0.15};
	std::vector<std::vector<std::string>> groups;
	for (int i = 0; i < 10000; ++i)
		groups.push_back({"item" + std::to_string(i)});
	const auto out = annotate(
		plan_of(groups), [](const std::string&) { return ItemTruth{"a", 0.2}; }, kClasses, c, e);
	std::size_t wrong = 0;
	for (const auto& a : out) {
		wrong += a.chosen != "a";
		EXPECT_EQ(a.error, a.chosen != "a");
		EXPECT_DOUBLE_EQ(a.perceived, 0.2);
	}
	EXPECT_NEAR(wrong / 10000.0, 0.02 + 0.2 * 0.15, 0.01);
}

TEST(Annotate, DrawsAreKeyedByItemNotPosition) {
	CostModelParams c;
	c.t_switch = 0;
	c.t_amb = 0;
	c.rng_seed = 77;
	auto truth = [](const std::string&) { return ItemTruth{"a", 0.0}; };
	const auto fwd = annotate(plan_of({{"x", "y", "z"}}), truth, kClasses, c, no_errors());
	const auto rev = annotate(plan_of({{"z"}, {"y", "x"}}), truth, kClasses, c, no_errors());
	EXPECT_EQ(fwd[0].elapsed_ms, rev[2].elapsed_ms);
	EXPECT_EQ(fwd[2].elapsed_ms, rev[0].elapsed_ms);
	EXPECT_NE(fwd[0].elapsed_ms, fwd[1].elapsed_ms);
}

TEST(Annotate, InvalidParametersAreRejected) {
	CostModelParams c;
	c.context_discount = 1.5;
	const auto p = plan_of({{"x"}});
	auto truth = [](const std::string&) { return ItemTruth{"a", 0.0}; };
	EXPECT_THROW(annotate(p, truth, kClasses, c, ErrorModelParams{}), InvalidArgument);
	EXPECT_THROW(annotate(p, truth, kClasses, CostModelParams{}, ErrorModelParams{-0.1, 0}), InvalidArgument);
}

TEST(Simulate, DegenerateKnobsGiveEqualArmTimes) {
	const auto res = synth_resources(200);
	SessionConfig base = caiaf::testing::small_config();
	base.total_batches = 8;
	const std::vector<std::uint64_t> seeds{1, 2, 3};
	const AbReport rep = run_ab(res, base, seeds, quiet(), ErrorModelParams{});
	for (std::size_t i = 0; i < rep.rows.size(); i += 2)
		EXPECT_EQ(rep.rows[i].cumulative_ms, rep.rows[i + 1].cumulative_ms);
	EXPECT_EQ(rep.ties, 3u);
}

TEST(Simulate, ErrorFreeArmsLabelTheSameItems) {
	const auto res = synth_resources(200);
	SessionConfig c = caiaf::testing::small_config(4);
	c.total_batches = 6;
	auto labeled = [&](Mode m) {
		c.mode = m;
		std::vector<SessionEvent> ev;
		simulate_session(c, res, CostModelParams{}, no_errors(), {}, &ev);
		std::vector<std::set<std::string>> per_batch;
		for (const auto& e : ev) {
			if (e.kind == EventKind::batch_issued)
				per_batch.emplace_back();
			if (e.kind == EventKind::label_submitted)
				per_batch.back().insert(e.payload["item_id"].get<std::string>());
		}
		return per_batch;
	};
	EXPECT_EQ(labeled(Mode::caiaf), labeled(Mode::plain));
}

TEST(Simulate, CaiafGroupingSwitchesLessOnCorrelatedData) {
	const auto res = synth_resources(200, 1.0);
	SessionConfig base = caiaf::testing::small_config();
	base.total_batches = 10;
	const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
	const AbReport rep = run_ab(res, base, seeds, CostModelParams{}, ErrorModelParams{});
	std::size_t caiaf_sw = 0, plain_sw = 0;
	for (const auto& r : rep.rows)
		(r.mode == Mode::caiaf ? caiaf_sw : plain_sw) += r.switches_total;
	EXPECT_LT(caiaf_sw, plain_sw);
	EXPECT_GE(rep.caiaf_faster, 4u);
}

TEST(Report, OneRowPerSeedAndArm) {
	const auto res = synth_resources(100);
	SessionConfig base = caiaf::testing::small_config();
	base.total_batches = 2;
	const std::vector<std::uint64_t> seeds{5, 3, 9};
	const AbReport rep = run_ab(res, base, seeds, CostModelParams{}, ErrorModelParams{});
	ASSERT_EQ(rep.rows.size(), 6u);
	EXPECT_EQ(rep.rows[0].seed, 3u);
	EXPECT_EQ(rep.rows[0].mode, Mode::caiaf);
	EXPECT_EQ(rep.rows[1].mode, Mode::plain);
	EXPECT_EQ(rep.caiaf_faster + rep.plain_faster + rep.ties, 3u);
	std::ostringstream csv;
	write_report_csv(csv, rep.rows);
	const std::string text = csv.str();
	EXPECT_EQ(text.substr(0, text.find('\n')), "seed,mode,cumulative_ms,final_f1,switches_total");
	EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}
