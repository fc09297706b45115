#include <splitsolve/unit_file.hpp>
#include <splitsolve/wire.hpp>

#include <algorithm>
#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sstream>
#include <sys/socket.h>
#include <unistd.h>

namespace splitsolve {

using nlohmann::json;

namespace {
    constexpr std::size_t kMaxPayload = std::size_t{256} << 20;

    void send_all(int fd, std::string_view data)
    {
        while (! data.empty()) {
            auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw WireError(std::string("send failed: ") + std::strerror(errno));
            }
            data.remove_prefix(static_cast<std::size_t>(n));
        }
    }

    auto parse_length(const std::string & s) -> std::size_t
    {
        std::size_t len = 0;
        std::size_t pos = 0;
        try {
            len = std::stoull(s, &pos);
        }
        catch (const std::exception &) {
            throw WireError("bad payload length '" + s + "'");
        }
        if (pos != s.size() || len > kMaxPayload)
            throw WireError("bad payload length '" + s + "'");
        return len;
    }

    auto split_words(const std::string & line) -> std::vector<std::string>
    {
        std::istringstream in(line);
        std::vector<std::string> words;
        for (std::string w; in >> w;)
            words.push_back(w);
        return words;
    }
}

/// Buffered reads of lines and exact-length payloads from a socket.
class LineReader {
public:
    explicit LineReader(int fd, const std::atomic<bool> * stopping = nullptr) : fd_(fd), stopping_(stopping) {}

    /// Returns nothing on orderly close before any byte of the line.
    auto line() -> std::optional<std::string>
    {
        while (true) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string out = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (! out.empty() && out.back() == '\r')
                    out.pop_back();
                return out;
            }
            if (! fill()) {
                if (buffer_.empty())
                    return std::nullopt;
                throw WireError("connection closed mid-line");
            }
        }
    }

    auto exactly(std::size_t n) -> std::string
    {
        while (buffer_.size() < n)
            if (! fill())
                throw WireError("connection closed mid-payload");
        std::string out = buffer_.substr(0, n);
        buffer_.erase(0, n);
        return out;
    }

private:
    auto fill() -> bool
    {
        char chunk[65536];
        while (true) {
            if (stopping_) {
                if (*stopping_)
                    return false;
                pollfd p{fd_, POLLIN, 0};
                int r = ::poll(&p, 1, 100);
                if (r == 0)
                    continue;
                if (r < 0 && errno == EINTR)
                    continue;
            }
            auto n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
                return false;
            buffer_.append(chunk, static_cast<std::size_t>(n));
            return true;
        }
    }

    int fd_;
    const std::atomic<bool> * stopping_;
    std::string buffer_;
};

auto encode_unit_payload(const LeasedUnit & unit) -> std::string
{
    json j{{"unit_id", unit.unit_id}, {"attempt", unit.attempt}, {"model_digest", unit.model_digest},
        {"model", model_to_json(unit.model)}};
    return j.dump();
}

auto decode_unit_payload(const std::string & payload) -> LeasedUnit
{
    try {
        auto j = json::parse(payload);
        return LeasedUnit{j.at("unit_id").get<std::string>(), j.at("attempt").get<int>(), model_from_json(j.at("model")),
            j.at("model_digest").get<std::string>()};
    }
    catch (const json::exception & e) {
        throw WireError(std::string("bad UNIT payload: ") + e.what());
    }
}

auto encode_result_payload(const UnitResult & result, const std::vector<Model> & children) -> std::string
{
    json kids = json::array();
    for (auto & c : children)
        kids.push_back(model_to_json(c));
    return json{{"result", result_to_json(result)}, {"children", kids}}.dump();
}

auto decode_result_payload(const std::string & payload) -> ExecutedUnit
{
    try {
        auto j = json::parse(payload);
        ExecutedUnit out;
        out.result = result_from_json(j.at("result"));
        for (auto & c : j.at("children"))
            out.children.push_back(model_from_json(c));
        return out;
    }
    catch (const json::exception & e) {
        throw WireError(std::string("bad RESULT payload: ") + e.what());
    }
}

auto parse_endpoint(const std::string & text) -> std::pair<std::string, std::uint16_t>
{
    auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0)
        throw WireError("expected host:port, got '" + text + "'");
    std::size_t pos = 0;
    unsigned long port = 0;
    try {
        port = std::stoul(text.substr(colon + 1), &pos);
    }
    catch (const std::exception &) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size() - colon - 1 || port == 0 || port > 65535)
        throw WireError("bad port in '" + text + "'");
    return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

WireServer::WireServer(WorkQueue & queue, const std::string & host, std::uint16_t port) : queue_(queue)
{
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0)
        throw WireError(std::string("socket: ") + std::strerror(errno));
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw WireError("bad listen address '" + host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
        auto err = std::string(std::strerror(errno));
        ::close(listen_fd_);
        throw WireError("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr *>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

WireServer::~WireServer()
{
    stop();
}

void WireServer::stop()
{
    if (stopping_.exchange(true))
        return;
    if (acceptor_.joinable())
        acceptor_.join();
    ::close(listen_fd_);
    std::vector<std::thread> conns;
    {
        std::lock_guard lk(connections_mutex_);
        conns.swap(connections_);
    }
    for (auto & t : conns)
        t.join();
}

void WireServer::accept_loop()
{
    while (! stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        int r = ::poll(&p, 1, 100);
        if (r <= 0)
            continue;
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0)
            continue;
        std::lock_guard lk(connections_mutex_);
        connections_.emplace_back([this, fd] { serve(fd); });
    }
}

void WireServer::serve(int fd)
{
    LineReader in(fd, &stopping_);
    try {
        while (auto line = in.line()) {
            std::string reply;
            try {
                reply = handle(*line, in);
            }
            catch (const WireError &) {
                throw;
            }
            catch (const std::exception & e) {
                std::string msg = e.what();
                std::replace(msg.begin(), msg.end(), '\n', ' ');
                reply = "ERR " + msg + "\n";
            }
            send_all(fd, reply);
        }
    }
    catch (const WireError &) {
    }
    ::close(fd);
}

auto WireServer::handle(const std::string & line, LineReader & in) -> std::string
{
    auto words = split_words(line);
    if (words.empty())
        return "ERR empty request\n";
    const auto & verb = words[0];
    if (verb == "LEASE" && words.size() == 2) {
        LocalQueueClient local(queue_);
        auto unit = local.lease(words[1]);
        if (! unit)
            return "NONE\n";
        auto payload = encode_unit_payload(*unit);
        return "UNIT " + std::to_string(payload.size()) + "\n" + payload;
    }
    if (verb == "RESULT" && words.size() == 4) {
        auto payload = in.exactly(parse_length(words[3]));
        auto done = decode_result_payload(payload);
        if (done.result.unit_id != words[1] || std::to_string(done.result.attempt) != words[2])
            return "ERR RESULT header does not match payload\n";
        auto outcome = queue_.report_result(done.result.worker_id, done.result, done.children);
        return outcome == ReportOutcome::accepted ? "OK\n" : "DUP\n";
    }
    if (verb == "HEARTBEAT" && words.size() == 3)
        return queue_.heartbeat(words[1], words[2]) ? "OK\n" : "NONE\n";
    return "ERR unknown request '" + line + "'\n";
}

WireClient::WireClient(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port)
{
    connect();
}

WireClient::~WireClient()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void WireClient::connect()
{
    if (fd_ >= 0)
        ::close(fd_);
    fd_ = -1;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo * res = nullptr;
    if (int rc = ::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res); rc != 0)
        throw WireError("cannot resolve " + host_ + ": " + ::gai_strerror(rc));
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
        throw WireError("cannot connect to " + host_ + ":" + std::to_string(port_));
    fd_ = fd;
    reader_ = std::make_unique<LineReader>(fd_);
}

auto WireClient::request(const std::string & head, const std::string & body) -> std::pair<std::string, std::string>
{
    send_all(fd_, head + "\n" + body);
    auto status = reader_->line();
    if (! status)
        throw WireError("master closed the connection");
    auto words = split_words(*status);
    if (! words.empty() && words[0] == "UNIT" && words.size() == 2)
        return {*status, reader_->exactly(parse_length(words[1]))};
    return {*status, {}};
}

namespace {
    [[noreturn]] void unexpected(const std::string & status)
    {
        if (status.rfind("ERR ", 0) == 0)
            throw WireError("master: " + status.substr(4));
        throw WireError("unexpected reply '" + status + "'");
    }
}

auto WireClient::lease(const std::string & worker_id) -> std::optional<LeasedUnit>
{
    auto [status, payload] = request("LEASE " + worker_id);
    if (status == "NONE")
        return std::nullopt;
    if (status.rfind("UNIT ", 0) == 0)
        return decode_unit_payload(payload);
    unexpected(status);
}

auto WireClient::report(const std::string &, const UnitResult & result, const std::vector<Model> & children)
    -> ReportOutcome
{
    auto payload = encode_result_payload(result, children);
    auto [status, body] = request("RESULT " + result.unit_id + " " + std::to_string(result.attempt) + " "
            + std::to_string(payload.size()),
        payload);
    if (status == "OK")
        return ReportOutcome::accepted;
    if (status == "DUP")
        return ReportOutcome::duplicate;
    unexpected(status);
}

auto WireClient::heartbeat(const std::string & worker_id, const std::string & unit_id) -> bool
{
    auto [status, body] = request("HEARTBEAT " + worker_id + " " + unit_id);
    if (status == "OK")
        return true;
    if (status == "NONE")
        return false;
    unexpected(status);
}

} // namespace splitsolve
