// REST binding of the teaching service.

#pragma once

#include <optional>
#include <string>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro.
#include "calib/teach_service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace calib::teach {

inline void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

inline std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw Error("body must be a JSON object");
        return j;
    } catch (const std::exception& e) {
        send(res, error_reply(400, std::string("invalid JSON body: ") + e.what()));
        return std::nullopt;
    }
}

/// Register all routes on `server`. `service` must outlive it.
inline void mount(TeachService& service, httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/session", [&](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, service.create_session(*body));
    });
    server.Get(R"(/session/([A-Za-z0-9_-]+))", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.session_info(req.matches[1]));
    });
    server.Get(R"(/session/([A-Za-z0-9_-]+)/query/next)", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.next_query(req.matches[1]));
    });
    server.Post(R"(/session/([A-Za-z0-9_-]+)/label)", [&](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, service.label(req.matches[1], *body));
    });
    server.Post(R"(/session/([A-Za-z0-9_-]+)/train)", [&](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, service.train(req.matches[1], *body));
    });
    server.Get(R"(/session/([A-Za-z0-9_-]+)/models)", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.models(req.matches[1]));
    });
    server.Get(R"(/model/([A-Za-z0-9_-]+))", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.model_status(req.matches[1]));
    });
    server.Get(R"(/model/([A-Za-z0-9_-]+)/pointcloud)", [&](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> step;
        if (req.has_param("context_step")) step = req.get_param_value("context_step");
        send(res, service.pointcloud(req.matches[1], step));
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send(res, error_reply(500, what));
    });
}

}  // namespace calib::teach
