// Synthesize a two-class dataset and compare CAIAF and plain presentation
// with the simulated annotator.
#include <iostream>
#include <vector>

#include "caiaf/caiaf.hpp"

int main() {
	using namespace caiaf;
	SynthConfig synth_cfg;
	synth_cfg.n_per_class = 200;
	auto dataset = std::make_shared<Dataset>(synth(synth_cfg, 7));

	SessionResources res;
	res.dataset = dataset;
	res.embeddings = std::make_shared<EmbeddingTable>();
	res.gazetteer = std::make_shared<Gazetteer>();

	SessionConfig cfg;
	cfg.dimension = ContextDimension::location;
	cfg.batch_size = 5;
	cfg.total_batches = 10;

	const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
	const AbReport rep = run_ab(res, cfg, seeds, CostModelParams{}, ErrorModelParams{});
	write_report_csv(std::cout, rep.rows);
	std::cout << "caiaf faster in " << rep.caiaf_faster << "/" << seeds.size() << " seeds\n";
}
