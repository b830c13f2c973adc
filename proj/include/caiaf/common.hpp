/// @file  common.hpp
/// @brief Error types, deterministic random numbers and small shared helpers.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace caiaf {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Input that failed to parse or validate; carries the 1-based line number
/// when the input is line oriented (0 otherwise).
class ParseError : public Error {
public:
	ParseError(std::string source, std::size_t line, const std::string& what)
		: Error(format(source, line, what)), source_(std::move(source)), line_(line) {}

	const std::string& source() const noexcept { return source_; }
	std::size_t line() const noexcept { return line_; }

private:
	static std::string format(const std::string& source, std::size_t line, const std::string& what) {
		std::string s = source.empty() ? std::string("<input>") : source;
		if (line > 0)
			s += ":" + std::to_string(line);
		return s + ": " + what;
	}

	std::string source_;
	std::size_t line_;
};

/// Precondition or configuration violation.
class InvalidArgument : public Error {
public:
	using Error::Error;
};

// ---------------------------------------------------------------------------
// Random numbers
//
// All randomness in the library flows through Rng so that results are
// bit-reproducible across standard library implementations: the engine is
// std::mt19937_64 (fully specified by the standard) and the distributions are
// implemented here rather than taken from <random>.

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

/// 64-bit FNV-1a over the bytes of a string.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char c : s) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	return h;
}

/// Seed derivation: every consumer of randomness gets `base + role offset
/// (+ an index such as the batch number)`, so one user-facing seed fans out
/// to independent, documented sub-streams.
namespace seed_role {
inline constexpr std::uint64_t split = 1'000'003ULL;
inline constexpr std::uint64_t selection = 2'000'006ULL;
inline constexpr std::uint64_t clustering = 3'000'009ULL;
inline constexpr std::uint64_t training = 4'000'012ULL;
inline constexpr std::uint64_t annotator = 5'000'015ULL;
} // namespace seed_role

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t role, std::uint64_t index = 0) noexcept {
	return base + role + index;
}

class Rng {
public:
	explicit Rng(std::uint64_t seed) : engine_(seed) {}

	std::uint64_t next() { return engine_(); }

	/// Uniform double in [0, 1) with 53 random bits.
	double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
	std::size_t index(std::size_t n) {
		if (n == 0)
			throw InvalidArgument("Rng::index: empty range");
		const std::uint64_t bound = static_cast<std::uint64_t>(n);
		const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
		std::uint64_t r;
		do {
			r = engine_();
		} while (r >= limit);
		return static_cast<std::size_t>(r % bound);
	}

	/// Uniform integer in [lo, hi].
	std::int64_t integer(std::int64_t lo, std::int64_t hi) {
		if (hi < lo)
			throw InvalidArgument("Rng::integer: empty range");
		const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
		if (span == 0)
			return static_cast<std::int64_t>(engine_());
		return lo + static_cast<std::int64_t>(index(static_cast<std::size_t>(span)));
	}

	bool bernoulli(double p) { return uniform() < p; }

	/// Standard normal via Box-Muller (one value per call, two uniforms).
	double normal() {
		const double u1 = 1.0 - uniform(); // (0, 1]
		const double u2 = uniform();
		return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
	}

	double normal(double mean, double sd) { return mean + sd * normal(); }

	template <typename T>
	void shuffle(std::vector<T>& v) {
		for (std::size_t i = v.size(); i > 1; --i)
			std::swap(v[i - 1], v[index(i)]);
	}

private:
	std::mt19937_64 engine_;
};

inline std::string to_lower_ascii(std::string_view s) {
	std::string out(s);
	for (char& c : out)
		if (c >= 'A' && c <= 'Z')
			c = static_cast<char>(c - 'A' + 'a');
	return out;
}

} // namespace caiaf
