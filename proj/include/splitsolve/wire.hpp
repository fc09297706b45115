#pragma once

#include <splitsolve/campaign.hpp>
#include <splitsolve/spool.hpp>

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace splitsolve {

class LineReader;

/// Line protocol between pull-only workers and the master.
///
///     LEASE <worker_id>                               -> UNIT <len>\n<payload> | NONE
///     RESULT <unit_id> <attempt> <len>\n<payload>     -> OK | DUP
///     HEARTBEAT <worker_id> <unit_id>                 -> OK | NONE
///
/// Any request may instead be answered with ERR <message>.
class WireError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

auto encode_unit_payload(const LeasedUnit & unit) -> std::string;
auto decode_unit_payload(const std::string & payload) -> LeasedUnit;
auto encode_result_payload(const UnitResult & result, const std::vector<Model> & children) -> std::string;
auto decode_result_payload(const std::string & payload) -> ExecutedUnit;

class WireServer {
public:
    /// Listens on host:port; port 0 picks a free port.
    WireServer(WorkQueue & queue, const std::string & host = "127.0.0.1", std::uint16_t port = 0);
    ~WireServer();
    WireServer(const WireServer &) = delete;
    auto operator=(const WireServer &) -> WireServer & = delete;

    auto port() const -> std::uint16_t { return port_; }
    /// Closes the listener and every open connection.
    void stop();

private:
    void accept_loop();
    void serve(int fd);
    auto handle(const std::string & line, LineReader & in) -> std::string;

    WorkQueue & queue_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex connections_mutex_;
    std::vector<std::thread> connections_;
};

class WireClient : public QueueClient {
public:
    WireClient(std::string host, std::uint16_t port);
    ~WireClient() override;

    auto lease(const std::string & worker_id) -> std::optional<LeasedUnit> override;
    auto report(const std::string & worker_id, const UnitResult & result, const std::vector<Model> & children)
        -> ReportOutcome override;
    auto heartbeat(const std::string & worker_id, const std::string & unit_id) -> bool override;

    /// Sends one raw request and returns the status line and payload.
    auto request(const std::string & head, const std::string & body = {}) -> std::pair<std::string, std::string>;

private:
    void connect();

    std::string host_;
    std::uint16_t port_;
    int fd_ = -1;
    std::unique_ptr<LineReader> reader_;
};

/// Parses "host:port".
auto parse_endpoint(const std::string & text) -> std::pair<std::string, std::uint16_t>;

} // namespace splitsolve
