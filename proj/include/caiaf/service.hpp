/// @file  service.hpp
/// @brief HTTP/JSON facade over sessions for the annotation UI and scripts.
///
///   POST /api/sessions                      SessionConfig  -> {"session_id"}
///   GET  /api/sessions/{id}/current-batch   -> plan + labeled ids + classes
///   POST /api/sessions/{id}/labels          {"item_id","class","elapsed_ms"} -> {"status"}
///   GET  /api/sessions/{id}/metrics         -> SessionMetrics
///   GET  /api/images/{item_id}              -> image bytes or a placeholder PNG
///
/// Errors are {"error":{"code":..,"message":..}} with 400 bad_request,
/// 404 unknown_session / unknown_item, 409 duplicate_label / batch_closed.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <zlib.h>

#include "caiaf/session.hpp"

namespace caiaf {

inline int http_status(ErrorCode c) {
	switch (c) {
	case ErrorCode::unknown_session:
	case ErrorCode::unknown_item: return 404;
	case ErrorCode::batch_closed:
	case ErrorCode::duplicate_label: return 409;
	case ErrorCode::bad_request: return 400;
	}
	return 500;
}

// ---------------------------------------------------------------------------
// Placeholder images

namespace detail {

inline void png_chunk(std::string& out, const char* type, const std::string& data) {
	auto be32 = [&](std::uint32_t v) {
		for (int s = 24; s >= 0; s -= 8)
			out.push_back(static_cast<char>((v >> s) & 0xff));
	};
	be32(static_cast<std::uint32_t>(data.size()));
	const std::size_t start = out.size();
	out.append(type, 4);
	out += data;
	const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(out.data() + start),
	                         static_cast<uInt>(out.size() - start));
	be32(static_cast<std::uint32_t>(crc));
}

} // namespace detail

/// Solid-colour RGB PNG.
inline std::string solid_png(std::uint8_t r, std::uint8_t g, std::uint8_t b, std::uint32_t width = 64,
                             std::uint32_t height = 64) {
	std::string out = "\x89PNG\r\n\x1a\n";
	std::string ihdr;
	for (std::uint32_t v : {width, height})
		for (int s = 24; s >= 0; s -= 8)
			ihdr.push_back(static_cast<char>((v >> s) & 0xff));
	ihdr += std::string{8, 2, 0, 0, 0}; // 8-bit depth, truecolour
	detail::png_chunk(out, "IHDR", ihdr);

	std::string raw;
	raw.reserve(height * (1 + 3 * width));
	for (std::uint32_t y = 0; y < height; ++y) {
		raw.push_back(0); // filter: none
		for (std::uint32_t x = 0; x < width; ++x) {
			raw.push_back(static_cast<char>(r));
			raw.push_back(static_cast<char>(g));
			raw.push_back(static_cast<char>(b));
		}
	}
	uLongf len = compressBound(static_cast<uLong>(raw.size()));
	std::string idat(len, '\0');
	if (compress(reinterpret_cast<Bytef*>(idat.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
	             static_cast<uLong>(raw.size())) != Z_OK)
		throw Error("zlib compress failed");
	idat.resize(len);
	detail::png_chunk(out, "IDAT", idat);
	detail::png_chunk(out, "IEND", "");
	return out;
}

/// Placeholder for an item without an image: colour keyed by the id hash.
inline std::string placeholder_png(std::string_view item_id) {
	const std::uint64_t h = mix64(fnv1a(item_id));
	return solid_png(static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16));
}

inline std::string image_content_type(const std::filesystem::path& p) {
	const std::string ext = to_lower_ascii(p.extension().string());
	if (ext == ".png")
		return "image/png";
	if (ext == ".jpg" || ext == ".jpeg")
		return "image/jpeg";
	if (ext == ".gif")
		return "image/gif";
	if (ext == ".webp")
		return "image/webp";
	return "application/octet-stream";
}

// ---------------------------------------------------------------------------
// Service

struct ServiceOptions {
	/// When set, every session's events are appended to <log_dir>/<id>.jsonl.
	std::string log_dir;
	/// When set, files under it are served at "/".
	std::string static_dir;
	bool wall_clock = true;
};

/// Session registry plus the JSON handlers. Mutations on one session are
/// serialized by a per-session mutex; different sessions proceed in parallel.
class AnnotationService {
public:
	AnnotationService(SessionResources resources, ServiceOptions options = {})
		: resources_(std::move(resources)), options_(std::move(options)) {
		if (!resources_.dataset)
			throw InvalidArgument("service needs a dataset");
		if (!options_.log_dir.empty())
			std::filesystem::create_directories(options_.log_dir);
	}

	struct Reply {
		int status = 200;
		OrderedJson body;
	};

	Reply create_session(const std::string& body) {
		return guarded([&] {
			const SessionConfig config = config_from_json(parse_body(body));
			std::string id;
			{
				std::lock_guard lock(registry_mu_);
				id = "s" + std::to_string(++next_id_);
			}
			SessionOptions so;
			so.wall_clock = options_.wall_clock;
			std::filesystem::path log_path;
			if (!options_.log_dir.empty()) {
				log_path = std::filesystem::path(options_.log_dir) / (id + ".jsonl");
				so.on_event = EventLogWriter(log_path.string(), false);
			}
			std::shared_ptr<Entry> entry;
			try {
				entry = std::make_shared<Entry>(Session::create(config, resources_, std::move(so)));
			} catch (...) {
				if (!log_path.empty())
					std::filesystem::remove(log_path);
				throw;
			}
			{
				std::lock_guard lock(registry_mu_);
				sessions_.emplace(id, entry);
			}
			OrderedJson j;
			j["session_id"] = id;
			return Reply{201, std::move(j)};
		});
	}

	Reply current_batch(const std::string& session_id) {
		return guarded([&] {
			auto entry = find(session_id);
			std::lock_guard lock(entry->mu);
			const Session& s = entry->session;
			OrderedJson j;
			j["session_id"] = session_id;
			j["classes"] = s.labels().names();
			if (!s.current_plan()) {
				j["status"] = "complete";
				j["completed_batches"] = s.completed_batches();
				j["total_batches"] = s.config().total_batches;
				return Reply{200, std::move(j)};
			}
			j["status"] = "open";
			const OrderedJson plan = plan_to_json(*s.current_plan());
			for (const auto& [k, v] : plan.items())
				j[k] = v;
			j["labeled"] = s.labeled_in_batch();
			return Reply{200, std::move(j)};
		});
	}

	Reply submit_label(const std::string& session_id, const std::string& body) {
		return guarded([&] {
			auto entry = find(session_id);
			const Json j = parse_body(body);
			std::string item, cls;
			double elapsed = 0.0;
			try {
				item = j.at("item_id").get<std::string>();
				cls = j.at("class").get<std::string>();
				elapsed = j.at("elapsed_ms").get<double>();
			} catch (const Json::exception& e) {
				throw SessionError(ErrorCode::bad_request, std::string("label body: ") + e.what());
			}
			std::lock_guard lock(entry->mu);
			const SubmitStatus st = entry->session.submit_label(item, cls, elapsed);
			OrderedJson out;
			out["status"] = to_string(st);
			return Reply{200, std::move(out)};
		});
	}

	Reply metrics(const std::string& session_id) {
		return guarded([&] {
			auto entry = find(session_id);
			SessionMetrics m;
			{
				std::lock_guard lock(entry->mu);
				m = entry->session.metrics();
			}
			return Reply{200, metrics_to_json(m)};
		});
	}

	/// Events of a session (copy, taken under the session lock).
	std::vector<SessionEvent> events(const std::string& session_id) {
		auto entry = find(session_id);
		std::lock_guard lock(entry->mu);
		return entry->session.events();
	}

	/// Register the routes on `server`.
	void mount(httplib::Server& server) {
		auto send = [](httplib::Response& res, const Reply& r) {
			res.status = r.status;
			res.set_content(r.body.dump(), "application/json");
		};
		server.Post("/api/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
			send(res, create_session(req.body));
		});
		server.Get(R"(/api/sessions/([^/]+)/current-batch)",
		           [this, send](const httplib::Request& req, httplib::Response& res) {
			           send(res, current_batch(req.matches[1]));
		           });
		server.Post(R"(/api/sessions/([^/]+)/labels)", [this, send](const httplib::Request& req, httplib::Response& res) {
			send(res, submit_label(req.matches[1], req.body));
		});
		server.Get(R"(/api/sessions/([^/]+)/metrics)", [this, send](const httplib::Request& req, httplib::Response& res) {
			send(res, metrics(req.matches[1]));
		});
		server.Get(R"(/api/images/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
			const std::string id = req.matches[1];
			const auto pos = resources_.dataset->find(id);
			if (!pos) {
				send(res, error_reply(ErrorCode::unknown_item, "unknown item '" + id + "'"));
				return;
			}
			const auto& uri = resources_.dataset->records[*pos].image_uri;
			if (uri && (uri->starts_with("http://") || uri->starts_with("https://"))) {
				res.set_redirect(*uri);
				return;
			}
			if (uri) {
				std::ifstream in(*uri, std::ios::binary);
				if (in) {
					std::ostringstream bytes;
					bytes << in.rdbuf();
					res.set_content(bytes.str(), image_content_type(*uri));
					return;
				}
			}
			res.set_content(placeholder_png(id), "image/png");
		});
		if (!options_.static_dir.empty())
			server.set_mount_point("/", options_.static_dir);
	}

private:
	struct Entry {
		explicit Entry(Session s) : session(std::move(s)) {}
		std::mutex mu;
		Session session;
	};

	static Json parse_body(const std::string& body) {
		try {
			return Json::parse(body);
		} catch (const Json::parse_error& e) {
			throw SessionError(ErrorCode::bad_request, std::string("malformed JSON body: ") + e.what());
		}
	}

	static Reply error_reply(ErrorCode code, const std::string& message) {
		OrderedJson j;
		j["error"] = {{"code", to_string(code)}, {"message", message}};
		return Reply{http_status(code), std::move(j)};
	}

	template <typename F>
	static Reply guarded(F&& f) {
		try {
			return f();
		} catch (const SessionError& e) {
			return error_reply(e.code(), e.what());
		} catch (const InvalidArgument& e) {
			return error_reply(ErrorCode::bad_request, e.what());
		} catch (const ParseError& e) {
			return error_reply(ErrorCode::bad_request, e.what());
		}
	}

	std::shared_ptr<Entry> find(const std::string& id) {
		std::lock_guard lock(registry_mu_);
		auto it = sessions_.find(id);
		if (it == sessions_.end())
			throw SessionError(ErrorCode::unknown_session, "unknown session '" + id + "'");
		return it->second;
	}

	SessionResources resources_;
	ServiceOptions options_;
	std::mutex registry_mu_;
	std::map<std::string, std::shared_ptr<Entry>> sessions_;
	std::uint64_t next_id_ = 0;
};

} // namespace caiaf
