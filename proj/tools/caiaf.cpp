// caiaf: command-line entry points for dataset preparation, headless
// simulation, serving the annotation API and reading event logs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caiaf/caiaf.hpp"
#include "caiaf/service.hpp"

namespace fs = std::filesystem;
using namespace caiaf;

namespace {

/// Relative input paths that do not exist from the working directory are
/// looked up under $CAIAF_DATA_DIR.
std::string resolve_input(const std::string& path) {
	if (path.empty() || fs::path(path).is_absolute() || fs::exists(path))
		return path;
	if (const char* dir = std::getenv("CAIAF_DATA_DIR")) {
		fs::path p = fs::path(dir) / path;
		if (fs::exists(p))
			return p.string();
	}
	return path;
}

std::vector<ContextDimension> parse_dimension_list(const std::string& csv) {
	std::vector<ContextDimension> out;
	std::string tok;
	std::istringstream in(csv);
	while (std::getline(in, tok, ','))
		if (!tok.empty())
			out.push_back(dimension_from_string(tok));
	return out;
}

std::ofstream open_out(const std::string& path) {
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw Error("cannot open '" + path + "' for writing");
	return os;
}

SessionResources load_resources(const std::string& dataset, const std::string& embeddings,
                                const std::string& gazetteer, std::span<const ContextDimension> require) {
	SessionResources res;
	auto [d, report] = ingest(resolve_input(dataset), require);
	if (report.dropped > 0)
		std::cerr << "ingest: dropped " << report.dropped << " of " << report.read
		          << " records with incomplete metadata\n";
	res.dataset = std::make_shared<Dataset>(std::move(d));
	if (!embeddings.empty())
		res.embeddings = std::make_shared<EmbeddingTable>(load_embeddings(resolve_input(embeddings)));
	if (!gazetteer.empty())
		res.gazetteer = std::make_shared<Gazetteer>(load_gazetteer(resolve_input(gazetteer)));
	return res;
}

const std::vector<std::string> kDimensionNames = {"location", "time", "user_tags", "description_keywords"};

struct SessionFlags {
	std::string config_file;
	std::string dimension = "location";
	std::string strategy = "informative_diverse";
	std::size_t batch_size = 5;
	std::size_t batches = 20;
	std::size_t clusters = 2;
	std::size_t seed_per_class = 10;
	double holdout_frac = 0.2;
	double lambda = 1e-4;
	std::size_t epochs = 50;
	std::vector<std::string> class_pair;
	std::vector<CLI::Option*> opts;

	void add(CLI::App* app) {
		opts.push_back(app->add_option("--config", config_file, "JSON session config; flags override it")
		                   ->check(CLI::ExistingFile));
		opts.push_back(app->add_option("--dimension", dimension, "Context dimension")
		                   ->check(CLI::IsMember(kDimensionNames)));
		opts.push_back(app->add_option("--strategy", strategy, "Selection strategy")
		                   ->check(CLI::IsMember({"informative_diverse", "uncertainty", "random"})));
		opts.push_back(app->add_option("--batch-size", batch_size, "Images per batch")->check(CLI::PositiveNumber));
		opts.push_back(app->add_option("--batches", batches, "Batches per session")->check(CLI::PositiveNumber));
		opts.push_back(app->add_option("--clusters", clusters, "Groups per batch (k)")->check(CLI::PositiveNumber));
		opts.push_back(app->add_option("--seed-per-class", seed_per_class, "Initial labeled items per class"));
		opts.push_back(app->add_option("--holdout-frac", holdout_frac, "Holdout fraction per class"));
		opts.push_back(app->add_option("--lambda", lambda, "Classifier regularization"));
		opts.push_back(app->add_option("--epochs", epochs, "Classifier epochs"));
		opts.push_back(app->add_option("--class-pair", class_pair, "Two classes for a binary task")
		                   ->delimiter(',')
		                   ->expected(2));
	}

	bool given(std::size_t i) const { return opts[i]->count() > 0; }

	SessionConfig build(const std::string& dataset_ref) const {
		SessionConfig c;
		if (!config_file.empty()) {
			std::ifstream in(config_file);
			c = config_from_json(Json::parse(in));
		}
		if (c.dataset.empty())
			c.dataset = dataset_ref;
		if (given(1) || config_file.empty())
			c.dimension = dimension_from_string(dimension);
		if (given(2) || config_file.empty())
			c.strategy = strategy_from_string(strategy);
		if (given(3) || config_file.empty())
			c.batch_size = batch_size;
		if (given(4) || config_file.empty())
			c.total_batches = batches;
		if (given(5) || config_file.empty())
			c.cluster.k = std::min(clusters, c.batch_size);
		if (given(6) || config_file.empty())
			c.seed_per_class = seed_per_class;
		if (given(7) || config_file.empty())
			c.holdout_frac = holdout_frac;
		if (given(8) || config_file.empty())
			c.train.lambda = lambda;
		if (given(9) || config_file.empty())
			c.train.epochs = epochs;
		if (given(10))
			c.class_pair = std::array<std::string, 2>{class_pair[0], class_pair[1]};
		validate(c);
		return c;
	}
};

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Context-aware batch annotation for active learning"};
	app.require_subcommand(1);
	app.failure_message(CLI::FailureMessage::help);

	// ingest
	auto* ingest_cmd = app.add_subcommand("ingest", "Validate a dataset and drop records with incomplete metadata");
	std::string ingest_in, ingest_out, ingest_require;
	ingest_cmd->add_option("--in", ingest_in, "Dataset file")->required();
	ingest_cmd->add_option("--out", ingest_out, "Write the kept records here");
	ingest_cmd->add_option("--require", ingest_require, "Comma-separated dimensions every record must carry");

	// synth
	auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic two-class dataset");
	std::string synth_out, synth_emb_out;
	SynthConfig sc;
	std::uint64_t synth_seed = 0;
	std::size_t emb_dim = 16;
	std::vector<std::string> synth_classes;
	synth_cmd->add_option("--out", synth_out, "Dataset file to write")->required();
	synth_cmd->add_option("--n-per-class", sc.n_per_class, "Items per class")->check(CLI::PositiveNumber);
	synth_cmd->add_option("--rho", sc.rho, "Metadata/label correlation")->check(CLI::Range(0.0, 1.0));
	synth_cmd->add_option("--seed", synth_seed, "Random seed");
	synth_cmd->add_option("--feature-dim", sc.feature_dim, "Feature dimension")->check(CLI::PositiveNumber);
	synth_cmd->add_option("--mean-offset", sc.mean_offset, "Per-axis distance of class means from the origin");
	synth_cmd->add_option("--sigma", sc.sigma, "Feature noise standard deviation");
	synth_cmd->add_option("--tag-noise", sc.tag_noise, "Probability a tag is replaced by a noise word")
		->check(CLI::Range(0.0, 1.0));
	synth_cmd->add_option("--classes", synth_classes, "Two class names")->delimiter(',')->expected(2);
	synth_cmd->add_option("--id-prefix", sc.id_prefix, "Prefix for generated ids");
	synth_cmd->add_option("--embeddings-out", synth_emb_out, "Also write an embedding table for the vocabularies");
	synth_cmd->add_option("--embedding-dim", emb_dim, "Embedding dimension")->check(CLI::PositiveNumber);

	// simulate
	auto* sim_cmd = app.add_subcommand("simulate", "Run headless sessions with the simulated annotator");
	std::string sim_dataset, sim_out, sim_emb, sim_gaz, sim_log_dir, sim_mode = "both";
	std::size_t sim_seeds = 1;
	std::uint64_t sim_seed = 1;
	CostModelParams cost;
	ErrorModelParams err;
	SessionFlags sim_flags;
	sim_cmd->add_option("--dataset", sim_dataset, "Dataset file")->required();
	sim_flags.add(sim_cmd);
	sim_cmd->add_option("--mode", sim_mode, "Presentation arm(s)")->check(CLI::IsMember({"caiaf", "plain", "both"}));
	sim_cmd->add_option("--seeds", sim_seeds, "Number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber);
	sim_cmd->add_option("--seed", sim_seed, "First seed");
	sim_cmd->add_option("--out", sim_out, "Report CSV")->required();
	sim_cmd->add_option("--embeddings", sim_emb, "Embedding table");
	sim_cmd->add_option("--gazetteer", sim_gaz, "Gazetteer CSV");
	sim_cmd->add_option("--log-dir", sim_log_dir, "Write every session's event log here");
	auto* cost_group = sim_cmd->add_option_group("annotator", "Simulated annotator model");
	cost_group->add_option("--t-base", cost.t_base, "ms per image");
	cost_group->add_option("--t-switch", cost.t_switch, "ms penalty per class switch");
	cost_group->add_option("--t-amb", cost.t_amb, "ms per unit perceived ambiguity");
	cost_group->add_option("--context-discount", cost.context_discount, "Ambiguity discount from same-class neighbours")
		->check(CLI::Range(0.0, 1.0));
	cost_group->add_option("--noise-sd", cost.noise_sd, "Timing noise (ms)");
	cost_group->add_option("--p0", err.p0, "Base error probability");
	cost_group->add_option("--p-amb", err.p_amb, "Error probability per unit perceived ambiguity");

	// serve
	auto* serve_cmd = app.add_subcommand("serve", "Serve the annotation HTTP API");
	std::string serve_dataset, serve_gaz, serve_emb, serve_log_dir, serve_static, serve_host = "127.0.0.1",
	                                                                              serve_require;
	int serve_port = 8080;
	serve_cmd->add_option("--dataset", serve_dataset, "Dataset file")->required();
	serve_cmd->add_option("--port", serve_port, "TCP port")->check(CLI::Range(1, 65535));
	serve_cmd->add_option("--host", serve_host, "Bind address");
	serve_cmd->add_option("--gazetteer", serve_gaz, "Gazetteer CSV");
	serve_cmd->add_option("--embeddings", serve_emb, "Embedding table");
	serve_cmd->add_option("--log-dir", serve_log_dir, "Directory for per-session event logs");
	serve_cmd->add_option("--static-dir", serve_static, "Serve UI files from this directory at /");
	serve_cmd->add_option("--require", serve_require, "Comma-separated dimensions every record must carry");

	// eval
	auto* eval_cmd = app.add_subcommand("eval", "Summarize a session event log");
	std::string eval_log;
	eval_cmd->add_option("--log", eval_log, "Event log")->required();

	// export-metrics
	auto* export_cmd = app.add_subcommand("export-metrics", "Write per-batch metrics of an event log as CSV");
	std::string export_log, export_out;
	export_cmd->add_option("--log", export_log, "Event log")->required();
	export_cmd->add_option("--out", export_out, "CSV file")->required();

	CLI11_PARSE(app, argc, argv);

	try {
		if (*ingest_cmd) {
			const auto require = parse_dimension_list(ingest_require);
			auto [d, report] = ingest(resolve_input(ingest_in), require);
			if (!ingest_out.empty()) {
				auto os = open_out(ingest_out);
				write_dataset(os, d);
			}
			std::cout << "read " << report.read << " records, kept " << report.kept << ", dropped " << report.dropped
			          << '\n';
		} else if (*synth_cmd) {
			if (!synth_classes.empty()) {
				sc.classes[0].name = synth_classes[0];
				sc.classes[1].name = synth_classes[1];
			}
			const Dataset d = synth(sc, synth_seed);
			{
				auto os = open_out(synth_out);
				write_dataset(os, d);
			}
			if (!synth_emb_out.empty()) {
				auto os = open_out(synth_emb_out);
				write_embeddings(os, synth_embeddings(sc, emb_dim, derive_seed(synth_seed, seed_role::split)));
			}
			std::cout << "wrote " << d.records.size() << " records to " << synth_out << '\n';
		} else if (*sim_cmd) {
			const SessionConfig base = sim_flags.build(sim_dataset);
			const std::vector<ContextDimension> require = {base.dimension};
			const SessionResources res = load_resources(sim_dataset, sim_emb, sim_gaz, require);
			if (!sim_log_dir.empty())
				fs::create_directories(sim_log_dir);
			std::vector<Mode> modes;
			if (sim_mode != "plain")
				modes.push_back(Mode::caiaf);
			if (sim_mode != "caiaf")
				modes.push_back(Mode::plain);
			std::vector<ArmResult> rows;
			for (std::size_t i = 0; i < sim_seeds; ++i) {
				for (Mode m : modes) {
					SessionConfig c = base;
					c.rng_seed = sim_seed + i;
					c.mode = m;
					std::vector<SessionEvent> events;
					rows.push_back(simulate_session(c, res, cost, err, {}, sim_log_dir.empty() ? nullptr : &events));
					if (!sim_log_dir.empty()) {
						auto os = open_out((fs::path(sim_log_dir) / ("seed" + std::to_string(c.rng_seed) + "-" +
						                                             std::string(to_string(m)) + ".jsonl"))
						                       .string());
						write_event_log(os, events);
					}
				}
			}
			{
				auto os = open_out(sim_out);
				write_report_csv(os, rows);
			}
			std::size_t wins = 0;
			double f1_c = 0.0, f1_p = 0.0;
			for (std::size_t i = 0; i + 1 < rows.size() && modes.size() == 2; i += 2) {
				wins += rows[i].cumulative_ms < rows[i + 1].cumulative_ms;
				f1_c += rows[i].final_f1;
				f1_p += rows[i + 1].final_f1;
			}
			std::cout << "wrote " << rows.size() << " rows to " << sim_out << '\n';
			if (modes.size() == 2)
				std::cout << "caiaf faster in " << wins << "/" << sim_seeds << " seeds; mean final macro-F1 caiaf "
				          << f1_c / sim_seeds << ", plain " << f1_p / sim_seeds << '\n';
		} else if (*serve_cmd) {
			const auto require = parse_dimension_list(serve_require);
			SessionResources res = load_resources(serve_dataset, serve_emb, serve_gaz, require);
			ServiceOptions opts;
			opts.log_dir = serve_log_dir;
			opts.static_dir = serve_static;
			AnnotationService service(std::move(res), opts);
			httplib::Server server;
			service.mount(server);
			std::cout << "listening on http://" << serve_host << ':' << serve_port << std::endl;
			if (!server.listen(serve_host, serve_port)) {
				std::cerr << "error: cannot listen on " << serve_host << ':' << serve_port << '\n';
				return 1;
			}
		} else if (*eval_cmd) {
			const auto events = read_event_log(resolve_input(eval_log));
			const SessionMetrics m = metrics_from_events(events);
			std::cout << "batches " << m.batches.size() << '/' << m.total_batches
			          << (m.completed ? " (complete)" : " (open)") << '\n'
			          << "cumulative_ms " << format_number(m.cumulative_ms()) << '\n'
			          << "initial_macro_f1 " << format_number(m.initial_f1) << '\n'
			          << "final_macro_f1 " << format_number(m.final_f1) << '\n';
		} else if (*export_cmd) {
			const auto events = read_event_log(resolve_input(export_log));
			auto os = open_out(export_out);
			write_metrics_csv(os, metrics_from_events(events));
		}
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	}
	return 0;
}
