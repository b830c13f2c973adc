#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

using namespace caiaf;

namespace {

struct Fixture {
	Dataset dataset;
	EmbeddingTable embeddings;
	Gazetteer gazetteer;
	Model model = Model::zero(1);

	PlanContext ctx() const { return {dataset, embeddings, gazetteer, model}; }

	void add(std::string id, LatLon where, double feature = 0.0) {
		ImageRecord r;
		r.id = std::move(id);
		r.features = {feature};
		r.label = "a";
		r.metadata.location = where;
		dataset.records.push_back(std::move(r));
	}
};

std::vector<std::size_t> sizes(const PresentationPlan& p) {
	std::vector<std::size_t> s;
	for (const auto& g : p.groups)
		s.push_back(g.size());
	return s;
}

double within_group_sum(const std::vector<LatLon>& pts, unsigned mask) {
	double s = 0.0;
	for (std::size_t i = 0; i < pts.size(); ++i)
		for (std::size_t j = i + 1; j < pts.size(); ++j)
			if (((mask >> i) & 1u) == ((mask >> j) & 1u))
				s += geodesic_km(pts[i], pts[j]);
	return s;
}

} // namespace

TEST(Plan, PlainModeIsOneGroupInSelectionOrder) {
	Fixture f;
	for (int i = 0; i < 5; ++i)
		f.add("p" + std::to_string(i), {10.0 * i, 0.0});
	const std::vector<std::string> ids{"p3", "p0", "p4", "p1", "p2"};
	const auto p = plan(ids, ContextDimension::location, Mode::plain, ClusterConfig{}, f.ctx(), 2, 20);
	ASSERT_EQ(p.groups.size(), 1u);
	EXPECT_EQ(p.item_ids(), ids);
	EXPECT_TRUE(p.boundaries().empty());
	EXPECT_EQ(p.batch_index, 2u);
	EXPECT_EQ(p.total_batches, 20u);
}

TEST(Plan, GroupsAreOrderedBySizeThenFirstPosition) {
	Fixture f;
	f.add("vegas1", {36.17, -115.14});
	f.add("nyc1", {40.71, -74.00});
	f.add("vegas2", {36.18, -115.13});
	f.add("nyc2", {40.72, -74.01});
	f.add("nyc3", {40.70, -74.02});
	f.dataset.reindex();
	const std::vector<std::string> ids{"vegas1", "nyc1", "vegas2", "nyc2", "nyc3"};
	const auto p = plan(ids, ContextDimension::location, Mode::caiaf, ClusterConfig{}, f.ctx());
	EXPECT_EQ(sizes(p), (std::vector<std::size_t>{3, 2}));
	EXPECT_EQ(p.boundaries(), std::vector<std::size_t>{3});
	EXPECT_EQ(p.groups[1][0].id, "vegas1");
}

TEST(Plan, ItemsInsideAGroupFollowUncertainty) {
	Fixture f;
	f.model.weights = {1.0};
	f.add("a", {40.71, -74.00}, 3.0);
	f.add("b", {40.72, -74.01}, -0.5);
	f.add("c", {40.70, -74.02}, 1.0);
	f.add("d", {36.17, -115.14}, 0.2);
	f.add("e", {36.18, -115.13}, 0.2);
	f.dataset.reindex();
	const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
	const auto p = plan(ids, ContextDimension::location, Mode::caiaf, ClusterConfig{}, f.ctx());
	EXPECT_EQ(p.item_ids(), (std::vector<std::string>{"b", "c", "a", "d", "e"}));
}

TEST(Plan, MatchesABruteForceGeodesicTwoPartition) {
	Rng rng(12);
	for (int trial = 0; trial < 50; ++trial) {
		Fixture f;
		std::vector<LatLon> pts;
		std::vector<std::string> ids;
		for (int i = 0; i < 6; ++i) {
			const bool paris = i == 1 || (i > 1 && rng.bernoulli(0.5));
			const LatLon anchor = paris ? LatLon{48.8566, 2.3522} : LatLon{40.7128, -74.0060};
			pts.push_back(destination(anchor, rng.uniform(0, 6.28), rng.uniform(0, 30)));
			ids.push_back("i" + std::to_string(i));
			f.add(ids.back(), pts.back());
		}
		f.dataset.reindex();
		unsigned best = 0;
		double best_sum = 1e300;
		for (unsigned mask = 0; mask < 32; ++mask) { // item 5 fixed on side 0
			const double s = within_group_sum(pts, mask);
			if (s < best_sum) {
				best_sum = s;
				best = mask;
			}
		}
		ClusterConfig cc;
		cc.rng_seed = static_cast<std::uint64_t>(trial);
		const auto p = plan(ids, ContextDimension::location, Mode::caiaf, cc, f.ctx());
		unsigned got = 0;
		for (const auto& item : p.groups[0])
			got |= 1u << std::stoi(item.id.substr(1));
		if (got & (1u << 5))
			got = ~got & 63u;
		EXPECT_EQ(got, best) << "trial " << trial;
	}
}

TEST(Plan, GroupingIsInvariantToInputOrder) {
	Fixture f;
	Rng rng(3);
	std::vector<std::string> ids;
	for (int i = 0; i < 5; ++i) {
		const LatLon anchor = i < 3 ? LatLon{40.7128, -74.0060} : LatLon{36.1699, -115.1398};
		ids.push_back("g" + std::to_string(i));
		f.add(ids.back(), destination(anchor, rng.uniform(0, 6.28), rng.uniform(0, 20)));
	}
	f.dataset.reindex();
	auto groups_as_sets = [](const PresentationPlan& p) {
		std::vector<std::vector<std::string>> out;
		for (const auto& g : p.groups) {
			std::vector<std::string> s;
			for (const auto& it : g)
				s.push_back(it.id);
			std::sort(s.begin(), s.end());
			out.push_back(s);
		}
		std::sort(out.begin(), out.end());
		return out;
	};
	const auto base = groups_as_sets(plan(ids, ContextDimension::location, Mode::caiaf, ClusterConfig{}, f.ctx()));
	std::vector<std::string> perm = ids;
	for (int t = 0; t < 20; ++t) {
		rng.shuffle(perm);
		EXPECT_EQ(groups_as_sets(plan(perm, ContextDimension::location, Mode::caiaf, ClusterConfig{}, f.ctx())), base);
	}
}

TEST(Plan, ClampsKToTheBatchAndCoversEveryItem) {
	Fixture f;
	f.add("only", {1, 1});
	f.dataset.reindex();
	const std::vector<std::string> ids{"only"};
	const auto p = plan(ids, ContextDimension::location, Mode::caiaf, ClusterConfig{}, f.ctx());
	EXPECT_EQ(p.item_ids(), ids);
	EXPECT_THROW(plan({}, ContextDimension::location, Mode::caiaf, ClusterConfig{}, f.ctx()), InvalidArgument);
}

TEST(Plan, RecordsWithoutTheDimensionAreRejected) {
	Fixture f;
	f.add("a", {1, 1});
	f.dataset.reindex();
	const std::vector<std::string> ids{"a"};
	EXPECT_THROW(plan(ids, ContextDimension::time, Mode::caiaf, ClusterConfig{}, f.ctx()), InvalidArgument);
}

TEST(EmbedForClustering, PerDimensionVectors) {
	ImageRecord a, b;
	a.metadata.location = LatLon{0, 0};
	a.metadata.timestamp = 42;
	a.metadata.tags = {"u", "zzz"};
	b.metadata.tags = {"qq"};
	EmbeddingTable t;
	t.dim = 2;
	t.entries["u"] = {1.0, 3.0};
	const std::vector<const ImageRecord*> ra{&a};
	EXPECT_NEAR(embed_for_clustering(ra, ContextDimension::location, t)[0][0], kEarthRadiusKm, 1e-9);
	EXPECT_EQ(embed_for_clustering(ra, ContextDimension::time, t)[0], std::vector<double>{42.0});
	EXPECT_EQ(embed_for_clustering(ra, ContextDimension::user_tags, t)[0], (std::vector<double>{1.0, 3.0}));
	const std::vector<const ImageRecord*> rb{&b};
	EXPECT_EQ(embed_for_clustering(rb, ContextDimension::user_tags, t)[0], (std::vector<double>{0.0, 0.0}));
}

TEST(Plan, JsonRoundTripKeepsBoundaries) {
	const auto res = caiaf::testing::synth_resources(30);
	Model m = Model::zero(8);
	const PlanContext ctx{*res.dataset, *res.embeddings, *res.gazetteer, m};
	const std::vector<std::string> ids{"lake-00", "ocean-00", "lake-01", "ocean-01", "lake-02"};
	const auto p = plan(ids, ContextDimension::user_tags, Mode::caiaf, ClusterConfig{}, ctx, 1, 4);
	const OrderedJson j = plan_to_json(p);
	EXPECT_EQ(j.at("boundaries").get<std::vector<std::size_t>>(), p.boundaries());
	EXPECT_EQ(plan_from_json(Json::parse(j.dump())), p);
	EXPECT_EQ(mode_from_string("plain"), Mode::plain);
	EXPECT_THROW(mode_from_string("fancy"), InvalidArgument);
}
