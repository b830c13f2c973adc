#include <gtest/gtest.h>

#include <thread>

#include "caiaf/service.hpp"
#include "support.hpp"

using namespace caiaf;
using caiaf::testing::TempDir;

namespace {

class ServiceTest : public ::testing::Test {
protected:
	void SetUp() override {
		res_ = caiaf::testing::synth_resources(100, 1.0);
		auto d = std::make_shared<Dataset>(*res_.dataset);
		write_file(tmp_.file("lake-00.png"), "not really a png");
		d->records[0].image_uri = tmp_.file("lake-00.png");
		d->records[1].image_uri = "https://example.org/ocean.jpg";
		d->reindex();
		res_.dataset = d;
		ServiceOptions opts;
		opts.log_dir = tmp_.file("logs");
		service_ = std::make_unique<AnnotationService>(res_, opts);
		service_->mount(server_);
		port_ = server_.bind_to_any_port("127.0.0.1");
		ASSERT_GT(port_, 0);
		thread_ = std::thread([this] { server_.listen_after_bind(); });
		server_.wait_until_ready();
		client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
	}

	void TearDown() override {
		server_.stop();
		if (thread_.joinable())
			thread_.join();
	}

	static void write_file(const std::string& path, const std::string& text) { caiaf::testing::write_file(path, text); }

	std::pair<int, Json> post(const std::string& path, const std::string& body) {
		auto r = client_->Post(path, body, "application/json");
		EXPECT_TRUE(r);
		return {r->status, Json::parse(r->body)};
	}

	std::pair<int, Json> get(const std::string& path) {
		auto r = client_->Get(path);
		EXPECT_TRUE(r);
		return {r->status, Json::parse(r->body)};
	}

	std::string create(const std::string& config = R"({"dataset":"synth","batch_size":5,"total_batches":2,"rng_seed":3})") {
		auto [status, body] = post("/api/sessions", config);
		EXPECT_EQ(status, 201) << body.dump();
		return body.value("session_id", "");
	}

	std::pair<int, Json> label(const std::string& sid, const std::string& item, const std::string& cls, double ms) {
		Json b{{"item_id", item}, {"class", cls}, {"elapsed_ms", ms}};
		return post("/api/sessions/" + sid + "/labels", b.dump());
	}

	std::vector<std::string> open_items(const std::string& sid) {
		auto [status, body] = get("/api/sessions/" + sid + "/current-batch");
		std::vector<std::string> ids;
		for (const auto& g : body["groups"])
			for (const auto& it : g)
				ids.push_back(it["item_id"]);
		return ids;
	}

	std::string truth(const std::string& id) const { return *res_.dataset->at(id).label; }

	TempDir tmp_;
	SessionResources res_;
	std::unique_ptr<AnnotationService> service_;
	httplib::Server server_;
	int port_ = 0;
	std::thread thread_;
	std::unique_ptr<httplib::Client> client_;
};

} // namespace

TEST_F(ServiceTest, ScriptedTwoBatchSession) {
	const std::string sid = create();
	double posted = 0.0;
	std::vector<std::string> statuses;
	for (int batch = 0; batch < 2; ++batch) {
		double ms = 1500.0 + batch;
		for (const auto& id : open_items(sid)) {
			auto [status, body] = label(sid, id, truth(id), ms);
			EXPECT_EQ(status, 200) << body.dump();
			statuses.push_back(body["status"]);
			posted += ms;
			ms += 37.5;
		}
	}
	EXPECT_EQ(statuses[4], "batch_complete");
	EXPECT_EQ(statuses[9], "session_complete");
	EXPECT_EQ(statuses[0], "ok");

	auto [status, m] = get("/api/sessions/" + sid + "/metrics");
	EXPECT_EQ(status, 200);
	EXPECT_EQ(m["batches"].size(), 2u);
	EXPECT_EQ(m["completed"], true);
	EXPECT_DOUBLE_EQ(m["cumulative_ms"].get<double>(), posted);

	auto [st2, done] = get("/api/sessions/" + sid + "/current-batch");
	EXPECT_EQ(st2, 200);
	EXPECT_EQ(done["status"], "complete");
	EXPECT_EQ(label(sid, "lake-05", "lake", 1.0).first, 409);
}

TEST_F(ServiceTest, ErrorsMapToStatusCodes) {
	const std::string sid = create();
	const auto ids = open_items(sid);
	EXPECT_EQ(label(sid, ids[0], truth(ids[0]), 100).first, 200);

	auto [dup, dup_body] = label(sid, ids[0], truth(ids[0]), 100);
	EXPECT_EQ(dup, 409);
	EXPECT_EQ(dup_body["error"]["code"], "duplicate_label");

	std::string outside;
	for (const auto& r : res_.dataset->records)
		if (std::find(ids.begin(), ids.end(), r.id) == ids.end()) {
			outside = r.id;
			break;
		}
	auto [not_open, not_open_body] = label(sid, outside, "lake", 100);
	EXPECT_EQ(not_open, 400);
	EXPECT_EQ(not_open_body["error"]["code"], "bad_request");

	EXPECT_EQ(label(sid, ids[1], "river", 100).first, 400);
	EXPECT_EQ(post("/api/sessions/" + sid + "/labels", "{oops").first, 400);
	EXPECT_EQ(post("/api/sessions/" + sid + "/labels", R"({"item_id":"x"})").first, 400);
	EXPECT_EQ(get("/api/sessions/nope/current-batch").first, 404);
	EXPECT_EQ(get("/api/sessions/nope/metrics").first, 404);
	EXPECT_EQ(post("/api/sessions", R"({"batch_size":0})").first, 400);
	EXPECT_EQ(post("/api/sessions", R"({"unknown":1})").first, 400);
	EXPECT_EQ(post("/api/sessions", R"({"seed_per_class":0})").first, 400);
	EXPECT_EQ(get("/api/images/not-an-item").first, 404);
}

TEST_F(ServiceTest, CaiafBatchShowsPlaceGroups) {
	const std::string sid = create(R"({"dimension":"location","mode":"caiaf","rng_seed":5})");
	auto [status, b] = get("/api/sessions/" + sid + "/current-batch");
	EXPECT_EQ(status, 200);
	EXPECT_EQ(b["status"], "open");
	EXPECT_EQ(b["batch_index"], 0);
	EXPECT_EQ(b["total_batches"], 20);
	EXPECT_EQ(b["classes"], (Json{"lake", "ocean"}));
	ASSERT_GE(b["groups"].size(), 2u);
	EXPECT_EQ(b["boundaries"].size(), b["groups"].size() - 1);
	for (const auto& g : b["groups"])
		for (const auto& it : g) {
			const std::string place = it["context"].value("place_display", "");
			EXPECT_FALSE(place.empty());
		}
}

TEST_F(ServiceTest, CurrentBatchIsIdempotentMidBatch) {
	const std::string sid = create();
	const auto ids = open_items(sid);
	label(sid, ids[0], truth(ids[0]), 900);
	label(sid, ids[1], truth(ids[1]), 900);
	auto [s1, a] = get("/api/sessions/" + sid + "/current-batch");
	auto [s2, b] = get("/api/sessions/" + sid + "/current-batch");
	EXPECT_EQ(a, b);
	EXPECT_EQ(a["labeled"], (Json{ids[0], ids[1]}));
}

TEST_F(ServiceTest, PlainSessionHasNoSeparators) {
	const std::string sid = create(R"({"mode":"plain"})");
	auto [status, b] = get("/api/sessions/" + sid + "/current-batch");
	EXPECT_EQ(b["groups"].size(), 1u);
	EXPECT_TRUE(b["boundaries"].empty());
}

TEST_F(ServiceTest, EventLogReplaysToTheSameSession) {
	const std::string sid = create();
	for (int i = 0; i < 7; ++i) {
		const auto ids = open_items(sid);
		const auto [s, body] = get("/api/sessions/" + sid + "/current-batch");
		const auto labeled = body["labeled"].get<std::vector<std::string>>();
		for (const auto& id : ids)
			if (std::find(labeled.begin(), labeled.end(), id) == labeled.end()) {
				label(sid, id, truth(id), 1000 + i);
				break;
			}
	}
	const std::string path = (std::filesystem::path(tmp_.file("logs")) / (sid + ".jsonl")).string();
	const auto logged = read_event_log(path);
	const auto live = service_->events(sid);
	ASSERT_EQ(logged.size(), live.size());
	for (const auto& e : logged)
		EXPECT_TRUE(e.wall_clock.has_value());
	const Session replayed = Session::resume(logged, res_);
	ASSERT_EQ(replayed.events().size(), live.size());
	for (std::size_t i = 0; i < live.size(); ++i)
		EXPECT_TRUE(replayed.events()[i].same_as(live[i]));
	EXPECT_EQ(replayed.labeled_in_batch().size(), 2u);
}

TEST_F(ServiceTest, FailedCreationLeavesNoLog) {
	EXPECT_EQ(post("/api/sessions", R"({"seed_per_class":0})").first, 400);
	std::size_t files = 0;
	for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(tmp_.file("logs")))
		++files;
	EXPECT_EQ(files, 0u);
}

TEST_F(ServiceTest, ImagesFromFileRedirectOrPlaceholder) {
	auto file = client_->Get("/api/images/lake-00");
	ASSERT_TRUE(file);
	EXPECT_EQ(file->status, 200);
	EXPECT_EQ(file->body, "not really a png");
	EXPECT_EQ(file->get_header_value("Content-Type"), "image/png");

	auto redirect = client_->Get("/api/images/ocean-00");
	ASSERT_TRUE(redirect);
	EXPECT_EQ(redirect->status, 302);
	EXPECT_EQ(redirect->get_header_value("Location"), "https://example.org/ocean.jpg");

	auto ph = client_->Get("/api/images/lake-01");
	ASSERT_TRUE(ph);
	EXPECT_EQ(ph->status, 200);
	EXPECT_EQ(ph->body.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
	EXPECT_EQ(ph->body, placeholder_png("lake-01"));
	EXPECT_NE(placeholder_png("lake-01"), placeholder_png("lake-02"));
}

TEST(Png, SolidImageIsWellFormed) {
	const std::string png = solid_png(10, 20, 30, 4, 3);
	EXPECT_EQ(png.substr(12, 4), "IHDR");
	EXPECT_EQ(static_cast<unsigned char>(png[19]), 4u); // width low byte
	EXPECT_EQ(static_cast<unsigned char>(png[23]), 3u); // height low byte
	EXPECT_EQ(png.substr(png.size() - 8, 4), "IEND");
}

TEST(HttpStatus, Mapping) {
	EXPECT_EQ(http_status(ErrorCode::unknown_session), 404);
	EXPECT_EQ(http_status(ErrorCode::unknown_item), 404);
	EXPECT_EQ(http_status(ErrorCode::duplicate_label), 409);
	EXPECT_EQ(http_status(ErrorCode::batch_closed), 409);
	EXPECT_EQ(http_status(ErrorCode::bad_request), 400);
}
