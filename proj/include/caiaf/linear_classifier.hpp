/// @file  linear_classifier.hpp
/// @brief Binary linear max-margin classifier trained by stochastic
///        subgradient descent on the L2-regularized hinge loss.
///
/// Objective: lambda/2 |w|^2 + (1/n) sum_i max(0, 1 - y_i (w.x_i + b)).
/// Steps are per example with eta_t = 1 / (lambda t) over a global step
/// counter t starting at 1; w starts at zero and the example order is
/// reshuffled every epoch from the config seed.
///
/// The bias is left out of the objective, but in the update it is shrunk by
/// the same (1 - eta lambda) factor as w, i.e. treated as the weight of a
/// constant feature.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "caiaf/common.hpp"

namespace caiaf {

struct TrainConfig {
	double lambda = 1e-4;
	std::size_t epochs = 50;
	std::uint64_t rng_seed = 0;

	friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Model {
	std::vector<double> weights;
	double bias = 0.0;
	double lambda = 1e-4;
	std::size_t epochs = 0;
	std::uint64_t rng_seed = 0;
	std::size_t trained_on = 0;

	/// Untrained model of dimension `dim`: decision 0 everywhere.
	static Model zero(std::size_t dim) {
		Model m;
		m.weights.assign(dim, 0.0);
		return m;
	}

	std::size_t dim() const noexcept { return weights.size(); }

	friend bool operator==(const Model&, const Model&) = default;
};

/// Training example; `label` is -1 or +1.
struct ExampleView {
	std::span<const double> features;
	int label = 0;
};

/// Maps the two class names of a binary task to {-1, +1}: the
/// lexicographically smaller name is -1.
class BinaryLabels {
public:
	BinaryLabels() = default;
	BinaryLabels(std::string a, std::string b) {
		if (a == b)
			throw InvalidArgument("binary task needs two distinct class names");
		if (b < a)
			std::swap(a, b);
		names_ = {std::move(a), std::move(b)};
	}

	int sign(std::string_view name) const {
		if (name == names_[0])
			return -1;
		if (name == names_[1])
			return +1;
		throw InvalidArgument("class '" + std::string(name) + "' is not part of this binary task");
	}
	const std::string& name(int sign) const { return sign < 0 ? names_[0] : names_[1]; }
	bool contains(std::string_view name) const { return name == names_[0] || name == names_[1]; }
	const std::array<std::string, 2>& names() const noexcept { return names_; }

private:
	std::array<std::string, 2> names_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
	double s = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i)
		s += a[i] * b[i];
	return s;
}

/// w.x + b; its sign is the predicted class.
inline double decision(const Model& model, std::span<const double> features) {
	if (features.size() != model.dim())
		throw InvalidArgument("feature length " + std::to_string(features.size()) + " does not match model dimension " +
		                      std::to_string(model.dim()));
	return dot(model.weights, features) + model.bias;
}

/// |w.x + b|; smaller means less certain.
inline double uncertainty(const Model& model, std::span<const double> features) {
	return std::fabs(decision(model, features));
}

inline int predict(const Model& model, std::span<const double> features) {
	return decision(model, features) >= 0.0 ? +1 : -1;
}

/// Regularized hinge objective at (w, b).
inline double objective(std::span<const double> w, double b, std::span<const ExampleView> examples, double lambda) {
	double hinge = 0.0;
	for (const auto& e : examples)
		hinge += std::max(0.0, 1.0 - e.label * (dot(w, e.features) + b));
	const double n = static_cast<double>(examples.size());
	return 0.5 * lambda * dot(w, w) + (examples.empty() ? 0.0 : hinge / n);
}

inline double objective(const Model& m, std::span<const ExampleView> examples, double lambda) {
	return objective(m.weights, m.bias, examples, lambda);
}

struct Subgradient {
	std::vector<double> weights;
	double bias = 0.0;
};

/// A subgradient of objective() at (w, b). Examples exactly on the hinge
/// kink (margin == 1) contribute zero.
inline Subgradient subgradient(std::span<const double> w, double b, std::span<const ExampleView> examples,
                               double lambda) {
	Subgradient g;
	g.weights.assign(w.size(), 0.0);
	const double inv_n = examples.empty() ? 0.0 : 1.0 / static_cast<double>(examples.size());
	for (const auto& e : examples) {
		if (e.label * (dot(w, e.features) + b) < 1.0) {
			for (std::size_t i = 0; i < w.size(); ++i)
				g.weights[i] -= inv_n * e.label * e.features[i];
			g.bias -= inv_n * e.label;
		}
	}
	for (std::size_t i = 0; i < w.size(); ++i)
		g.weights[i] += lambda * w[i];
	return g;
}

/// Train from scratch. When `epoch_objectives` is given, the objective after
/// every epoch is appended to it.
inline Model train(std::span<const ExampleView> examples, const TrainConfig& config,
                   std::vector<double>* epoch_objectives = nullptr) {
	if (!(config.lambda > 0.0) || !std::isfinite(config.lambda))
		throw InvalidArgument("lambda must be > 0");
	if (config.epochs < 1)
		throw InvalidArgument("epochs must be >= 1");
	if (examples.empty())
		throw InvalidArgument("cannot train on an empty example set");
	const std::size_t dim = examples.front().features.size();
	bool has_neg = false, has_pos = false;
	for (const auto& e : examples) {
		if (e.features.size() != dim)
			throw InvalidArgument("examples have inconsistent feature lengths");
		if (e.label != -1 && e.label != +1)
			throw InvalidArgument("labels must be -1 or +1");
		if (!std::all_of(e.features.begin(), e.features.end(), [](double v) { return std::isfinite(v); }))
			throw InvalidArgument("non-finite feature value");
		(e.label < 0 ? has_neg : has_pos) = true;
	}
	if (!has_neg || !has_pos)
		throw InvalidArgument("training set must contain both classes");

	Model m = Model::zero(dim);
	m.lambda = config.lambda;
	m.epochs = config.epochs;
	m.rng_seed = config.rng_seed;
	m.trained_on = examples.size();

	std::vector<std::size_t> order(examples.size());
	std::iota(order.begin(), order.end(), std::size_t{0});
	Rng rng(config.rng_seed);
	std::uint64_t t = 0;
	for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
		rng.shuffle(order);
		for (std::size_t idx : order) {
			const auto& e = examples[idx];
			++t;
			const double eta = 1.0 / (config.lambda * static_cast<double>(t));
			const double shrink = 1.0 - eta * config.lambda;
			const double margin = e.label * (dot(m.weights, e.features) + m.bias);
			if (margin < 1.0) {
				const double step = eta * e.label;
				for (std::size_t i = 0; i < dim; ++i)
					m.weights[i] = shrink * m.weights[i] + step * e.features[i];
				m.bias = shrink * m.bias + step;
			} else {
				for (auto& w : m.weights)
					w *= shrink;
				m.bias *= shrink;
			}
		}
		if (epoch_objectives)
			epoch_objectives->push_back(objective(m, examples, config.lambda));
	}
	return m;
}

inline nlohmann::ordered_json model_to_json(const Model& m) {
	nlohmann::ordered_json j;
	j["weights"] = m.weights;
	j["bias"] = m.bias;
	j["lambda"] = m.lambda;
	j["epochs"] = m.epochs;
	j["rng_seed"] = m.rng_seed;
	j["trained_on"] = m.trained_on;
	return j;
}

inline Model model_from_json(const nlohmann::json& j) {
	try {
		Model m;
		m.weights = j.at("weights").get<std::vector<double>>();
		m.bias = j.at("bias").get<double>();
		m.lambda = j.at("lambda").get<double>();
		m.epochs = j.at("epochs").get<std::size_t>();
		m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
		m.trained_on = j.value("trained_on", std::size_t{0});
		return m;
	} catch (const nlohmann::json::exception& e) {
		throw ParseError("", 0, std::string("bad model JSON: ") + e.what());
	}
}

} // namespace caiaf
