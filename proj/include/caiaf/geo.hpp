/// @file  geo.hpp
/// @brief Spherical-earth geodesy: great-circle distance, destination points,
///        Cartesian embedding.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "caiaf/common.hpp"

namespace caiaf {

/// Mean earth radius (IUGG), km.
inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
	double lat = 0.0; ///< degrees, [-90, 90]
	double lon = 0.0; ///< degrees, [-180, 180]

	friend bool operator==(const LatLon&, const LatLon&) = default;
};

constexpr double deg2rad(double d) noexcept { return d * (std::numbers::pi / 180.0); }
constexpr double rad2deg(double r) noexcept { return r * (180.0 / std::numbers::pi); }

inline bool in_bounds(const LatLon& p) noexcept {
	return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
	       p.lon >= -180.0 && p.lon <= 180.0;
}

inline void require_in_bounds(const LatLon& p) {
	if (!in_bounds(p))
		throw InvalidArgument("coordinate out of range: (" + std::to_string(p.lat) + ", " +
		                      std::to_string(p.lon) + ")");
}

/// Great-circle distance in km (haversine). Symmetric bit-for-bit: only
/// absolute differences and commutative products enter the formula.
inline double geodesic_km(const LatLon& a, const LatLon& b) {
	require_in_bounds(a);
	require_in_bounds(b);
	const double phi_a = deg2rad(a.lat);
	const double phi_b = deg2rad(b.lat);
	const double half_dphi = 0.5 * std::fabs(phi_a - phi_b);
	const double half_dlambda = 0.5 * deg2rad(std::fabs(a.lon - b.lon));
	const double s_phi = std::sin(half_dphi);
	const double s_lambda = std::sin(half_dlambda);
	const double h = s_phi * s_phi + (std::cos(phi_a) * std::cos(phi_b)) * (s_lambda * s_lambda);
	return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

/// Point reached by travelling `distance_km` along a great circle from
/// `origin` with initial bearing `bearing_rad` (clockwise from north).
inline LatLon destination(const LatLon& origin, double bearing_rad, double distance_km) {
	const double delta = distance_km / kEarthRadiusKm;
	const double phi1 = deg2rad(origin.lat);
	const double lambda1 = deg2rad(origin.lon);
	const double sin_phi2 =
		std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(bearing_rad);
	const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
	const double lambda2 =
		lambda1 + std::atan2(std::sin(bearing_rad) * std::sin(delta) * std::cos(phi1),
		                     std::cos(delta) - std::sin(phi1) * sin_phi2);
	double lon = rad2deg(lambda2);
	lon = std::fmod(lon + 540.0, 360.0) - 180.0;
	return {std::clamp(rad2deg(phi2), -90.0, 90.0), std::clamp(lon, -180.0, 180.0)};
}

/// Earth-centred Cartesian coordinates in km.
inline std::array<double, 3> to_cartesian_km(const LatLon& p) {
	const double phi = deg2rad(p.lat);
	const double lambda = deg2rad(p.lon);
	return {kEarthRadiusKm * std::cos(phi) * std::cos(lambda),
	        kEarthRadiusKm * std::cos(phi) * std::sin(lambda), kEarthRadiusKm * std::sin(phi)};
}

} // namespace caiaf
