// Shared fixtures for the unit tests.
#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "caiaf/caiaf.hpp"

namespace caiaf::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
	TempDir() {
		std::random_device rd;
		path_ = std::filesystem::temp_directory_path() / ("caiaf-test-" + std::to_string(rd()) + std::to_string(rd()));
		std::filesystem::create_directories(path_);
	}
	~TempDir() {
		std::error_code ec;
		std::filesystem::remove_all(path_, ec);
	}
	TempDir(const TempDir&) = delete;
	TempDir& operator=(const TempDir&) = delete;

	const std::filesystem::path& path() const { return path_; }
	std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
	std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
	std::ofstream(path, std::ios::binary) << text;
}

/// Two Gaussian blobs in D dimensions with means -/+ offset on every axis.
struct Blobs {
	std::vector<std::vector<double>> x;
	std::vector<int> y;

	std::vector<ExampleView> views() const {
		std::vector<ExampleView> v;
		for (std::size_t i = 0; i < x.size(); ++i)
			v.push_back({x[i], y[i]});
		return v;
	}
};

inline Blobs make_blobs(std::size_t n, std::size_t dim, double offset, double sigma, std::uint64_t seed) {
	Rng rng(seed);
	Blobs b;
	for (std::size_t i = 0; i < n; ++i) {
		const int label = i % 2 == 0 ? -1 : +1;
		std::vector<double> p(dim);
		for (auto& v : p)
			v = label * offset + sigma * rng.normal();
		b.x.push_back(std::move(p));
		b.y.push_back(label);
	}
	return b;
}

inline SessionResources synth_resources(std::size_t n_per_class = 100, double rho = 0.9, std::uint64_t seed = 7) {
	SynthConfig sc;
	sc.n_per_class = n_per_class;
	sc.rho = rho;
	SessionResources res;
	res.dataset = std::make_shared<Dataset>(synth(sc, seed));
	res.embeddings = std::make_shared<EmbeddingTable>(synth_embeddings(sc, 16, seed + 1));
	Gazetteer g;
	g.entries = {{"New York City", {40.7128, -74.0060}}, {"Las Vegas", {36.1699, -115.1398}}};
	res.gazetteer = std::make_shared<Gazetteer>(std::move(g));
	return res;
}

inline SessionConfig small_config(std::uint64_t seed = 1) {
	SessionConfig c;
	c.dataset = "synth";
	c.batch_size = 5;
	c.total_batches = 4;
	c.rng_seed = seed;
	return c;
}

/// Label every open item with its ground truth, `ms` each, until `batches`
/// batches are complete or the session ends.
inline void label_truthfully(Session& s, std::size_t batches, double ms = 1000.0) {
	const std::size_t stop = s.completed_batches() + batches;
	while (!s.completed() && s.completed_batches() < stop) {
		for (const auto& id : s.current_plan()->item_ids()) {
			const auto labeled = s.labeled_in_batch();
			if (std::find(labeled.begin(), labeled.end(), id) != labeled.end())
				continue;
			s.submit_label(id, *s.dataset().at(id).label, ms);
		}
	}
}

} // namespace caiaf::testing
