#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>

#include "medground/audit/session.hpp"
#include "medground/mask/png_io.hpp"
#include "medground/verification/judge.hpp"

namespace medground {

struct AuditServerOptions {
  std::filesystem::path image_root;
  std::filesystem::path static_dir;  // audit UI bundle; optional
};

/// JSON API over an AuditSession:
///   GET  /api/next?annotator=      next unvoted item for the annotator
///   POST /api/vote                 {"id", "verdict": good|bad, "comment"?}
///   GET  /api/report               vote distribution per dataset
///   GET  /api/image/{id}?variant=  original | overlay PNG
///   GET  /api/export               verified JSONL, 409 while votes are pending
/// The annotator comes from the X-Annotator header or the annotator query
/// parameter; missing is 401, unregistered is 403.
class AuditServer {
 public:
  AuditServer(AuditSession& session, AuditServerOptions opts)
      : session_(session), opts_(std::move(opts)) {
    routes();
  }

  /// Binds and returns the port; port 0 picks a free one.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  httplib::Server& raw() { return server_; }

 private:
  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void send_error(httplib::Response& res, int status, const std::string& code,
                         const std::string& message) {
    send_json(res, status, {{"error", code}, {"message", message}});
  }

  std::optional<std::string> annotator(const httplib::Request& req, httplib::Response& res) const {
    std::string a = req.get_header_value("X-Annotator");
    if (a.empty()) a = req.get_param_value("annotator");
    if (a.empty()) {
      send_error(res, 401, "missing_annotator", "annotator id required");
      return std::nullopt;
    }
    if (!session_.is_annotator(a)) {
      send_error(res, 403, "unknown_annotator", "unregistered annotator: " + a);
      return std::nullopt;
    }
    return a;
  }

  static Json item_json(const ReferringTriplet& t) {
    Json boxes = Json::array();
    for (const auto& b : t.answer_boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    return {{"id", t.id},
            {"dataset", t.image.dataset},
            {"modality", std::string(to_string(t.image.modality))},
            {"image", t.image.path},
            {"width", t.image.width},
            {"height", t.image.height},
            {"query", t.query},
            {"boxes", boxes},
            {"image_url", "/api/image/" + httplib::detail::encode_url(t.id) + "?variant=original"},
            {"overlay_url", "/api/image/" + httplib::detail::encode_url(t.id) + "?variant=overlay"}};
  }

  void routes() {
    server_.Get("/api/next", [this](const httplib::Request& req, httplib::Response& res) {
      auto a = annotator(req, res);
      if (!a) return;
      auto next = session_.next_item(*a);
      if (!next) return send_error(res, 403, next.error().code, next.error().message);
      Json body = {{"annotator", *a}, {"total", session_.size()}};
      if (!next->has_value()) {
        body["done"] = true;
        body["voted"] = session_.size();
      } else {
        body["done"] = false;
        body["voted"] = (*next)->voted;
        body["ordinal"] = (*next)->ordinal;
        body["item"] = item_json((*next)->triplet);
      }
      send_json(res, 200, body);
    });

    server_.Post("/api/vote", [this](const httplib::Request& req, httplib::Response& res) {
      auto a = annotator(req, res);
      if (!a) return;
      Json j = Json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
          !j.contains("verdict") || !j["verdict"].is_string())
        return send_error(res, 400, "bad_request", "body must be {\"id\": str, \"verdict\": good|bad}");
      auto verdict = parse_verdict(j["verdict"].get<std::string>());
      if (!verdict) return send_error(res, 400, "bad_verdict", "verdict must be good or bad");
      VoteEvent v{j["id"].get<std::string>(), *a, *verdict, {}, {}};
      if (j.contains("comment") && j["comment"].is_string()) v.comment = j["comment"].get<std::string>();
      auto d = session_.submit_vote(v);
      if (!d) return send_error(res, 404, d.error().code, d.error().message);
      send_json(res, 200,
                {{"id", d->triplet_id},
                 {"votes", d->votes},
                 {"good_votes", d->good_votes},
                 {"decision", std::string(to_string(d->state))}});
    });

    server_.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, audit_report_json(session_.audit_report()));
    });

    server_.Get(R"(/api/image/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = httplib::detail::decode_url(req.matches[1].str(), false);
      auto t = session_.find(id);
      if (!t) return send_error(res, 404, "unknown_triplet", "unknown triplet id: " + id);
      const std::string variant = req.has_param("variant") ? req.get_param_value("variant") : "original";
      if (variant != "original" && variant != "overlay")
        return send_error(res, 400, "bad_variant", "variant must be original or overlay");
      const auto path = opts_.image_root / t->image.path;
      if (opts_.image_root.empty() || !std::filesystem::exists(path))
        return send_error(res, 404, "missing_image", "image not found: " + t->image.path);
      std::vector<std::uint8_t> bytes = read_binary_file(path.string());
      if (variant == "overlay") {
        auto img = decode_rgb_png(bytes);
        if (!img) return send_error(res, 500, img.error().code, img.error().message);
        bytes = encode_rgb_png(render_overlay(std::move(img).value(), t->answer_boxes));
      }
      res.status = 200;
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    });

    server_.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      auto out = session_.export_verified();
      if (!out) return send_error(res, 409, out.error().code, out.error().message);
      res.status = 200;
      res.set_content(*out, "application/x-ndjson");
    });

    if (!opts_.static_dir.empty() && std::filesystem::is_directory(opts_.static_dir))
      server_.set_mount_point("/", opts_.static_dir.string());
  }

  AuditSession& session_;
  AuditServerOptions opts_;
  httplib::Server server_;
};

}  // namespace medground
