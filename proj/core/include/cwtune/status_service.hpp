#pragma once

// HTTP+JSON control surface over a running controller.
//
//   GET  /status   model snapshot, queue sizes, last decision
//   GET  /load     per-AP {id, tp_bps, active} of the last period
//   GET  /metrics  aggregate metrics of the last period
//   POST /cw       {"cw": int}, applied once at the next period boundary
//
// Malformed requests get a 4xx status with {"error": "..."}.

#include <memory>
#include <string>
#include <thread>
#include <utility>

#include "cwtune/controller.hpp"

namespace httplib {
class Server;
}

namespace cwtune::control {

/// Splits "host:port"; throws std::invalid_argument.
std::pair<std::string, int> parse_bind(const std::string& bind);

class StatusService {
public:
    explicit StatusService(Controller& controller);
    ~StatusService();

    StatusService(const StatusService&) = delete;
    StatusService& operator=(const StatusService&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a free
    /// port. Returns the bound port; throws std::runtime_error on failure.
    int start(const std::string& host, int port);
    void stop();

private:
    Controller& controller_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

} // namespace cwtune::control
