#include "cwtune/status_service.hpp"

#include <stdexcept>

#include <httplib.h>

namespace cwtune::control {

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void error(httplib::Response& res, int status, const std::string& what)
{
    reply(res, status, {{"error", what}});
}

} // namespace

std::pair<std::string, int> parse_bind(const std::string& bind)
{
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size()) {
        throw std::invalid_argument("bind address must look like host:port, got '" + bind + "'");
    }
    std::size_t used = 0;
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1), &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != bind.size() - colon - 1 || port < 0 || port > 65535) {
        throw std::invalid_argument("invalid port in bind address '" + bind + "'");
    }
    return {bind.substr(0, colon), port};
}

StatusService::StatusService(Controller& controller)
    : controller_(controller), server_(std::make_unique<httplib::Server>())
{
    server_->Get("/status", [this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, controller_.status_json());
    });
    server_->Get("/load", [this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, controller_.load_json());
    });
    server_->Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, controller_.metrics_json());
    });
    server_->Post("/cw", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            return error(res, 400, "body must be a JSON object");
        }
        if (!body.contains("cw") || !body.at("cw").is_number_integer()) {
            return error(res, 400, "field 'cw' must be an integer");
        }
        const auto cw = body.at("cw").get<std::int64_t>();
        if (cw < mac::kMinCw || cw > mac::kMaxCw) {
            return error(res, 422, "cw must lie in [1, 1023]");
        }
        controller_.request_cw(static_cast<int>(cw));
        reply(res, 202, {{"accepted", true}, {"cw", cw}, {"effective_period", controller_.status_json().at("period")}});
    });
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            error(res, res.status, "no such endpoint");
        }
    });
}

StatusService::~StatusService()
{
    stop();
}

int StatusService::start(const std::string& host, int port)
{
    int bound = port;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
    } else if (!server_->bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) {
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void StatusService::stop()
{
    if (server_) {
        server_->stop();
    }
    if (thread_.joinable()) {
        thread_.join();
    }
}

} // namespace cwtune::control
