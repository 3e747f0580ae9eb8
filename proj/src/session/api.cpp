#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <map>
#include <thread>

#include "api.hpp"

namespace dexmouse::session {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::size_t kClientQueue = 64;

}  // namespace

struct Session::Api::Impl {
  struct Connection : std::enable_shared_from_this<Connection> {
    Connection(Impl& owner, tcp::socket socket, std::uint64_t id) : owner(owner), ws(std::move(socket)), id(id) {}

    void start() {
      ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws.async_accept([self = shared_from_this()](beast::error_code ec) {
        if (ec) return self->owner.drop(self->id);
        self->send(json{{"type", "hello"}, {"client", self->id}, {"role", "viewer"}}.dump());
        self->read();
      });
    }

    void read() {
      ws.async_read(buffer, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->owner.drop(self->id);
        const std::string text = beast::buffers_to_string(self->buffer.data());
        self->buffer.consume(self->buffer.size());
        self->owner.on_message(*self, text);
        self->read();
      });
    }

    void send(std::string text) {
      if (queue.size() >= kClientQueue) {
        // front is owned by async_write while a write is in flight
        queue.erase(queue.begin() + (writing ? 1 : 0));
        ++dropped;
      }
      queue.push_back(std::move(text));
      if (!writing) write_next();
    }

    void write_next() {
      if (queue.empty()) {
        writing = false;
        return;
      }
      writing = true;
      ws.text(true);
      ws.async_write(net::buffer(queue.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->owner.drop(self->id);
        self->queue.pop_front();
        self->write_next();
      });
    }

    Impl& owner;
    websocket::stream<beast::tcp_stream> ws;
    std::uint64_t id;
    beast::flat_buffer buffer;
    std::deque<std::string> queue;
    bool writing = false;
    std::uint64_t dropped = 0;
  };

  Impl(Session& s, int port) : session(s), acceptor(ioc), timer(ioc) {
    tcp::endpoint ep(net::ip::make_address("127.0.0.1"), static_cast<unsigned short>(port));
    acceptor.open(ep.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
    bound_port = acceptor.local_endpoint().port();
    accept();
    poll();
    thread = std::thread([this] { ioc.run(); });
  }

  ~Impl() {
    net::post(ioc, [this] {
      beast::error_code ec;
      acceptor.close(ec);
      timer.cancel();
      for (auto& [id, c] : conns) beast::get_lowest_layer(c->ws).socket().close(ec);
      conns.clear();
      ioc.stop();
    });
    if (thread.joinable()) thread.join();
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(*this, std::move(socket), ++next_id);
      conns[c->id] = c;
      c->start();
      accept();
    });
  }

  // Moves loop output to clients; the loop never waits on this side.
  void poll() {
    while (auto out = session.outbox().try_pop()) {
      if (out->client) {
        if (auto it = conns.find(*out->client); it != conns.end()) it->second->send(std::move(out->text));
      } else {
        for (auto& [id, c] : conns) c->send(out->text);
      }
    }
    timer.expires_after(std::chrono::milliseconds(2));
    timer.async_wait([this](beast::error_code ec) {
      if (!ec) poll();
    });
  }

  void drop(std::uint64_t id) {
    conns.erase(id);
    if (controller == id) controller.reset();
  }

  void reply_error(Connection& c, const json& request_id, const std::string& message) {
    json body{{"type", "error"}, {"message", message}};
    if (!request_id.is_null()) body["id"] = request_id;
    c.send(body.dump());
  }

  void on_message(Connection& c, const std::string& text) {
    json msg;
    try {
      msg = json::parse(text);
    } catch (const json::exception& e) {
      return reply_error(c, nullptr, std::string("malformed JSON: ") + e.what());
    }
    const json request_id = msg.is_object() && msg.contains("id") ? msg["id"] : json(nullptr);
    const std::string type = msg.is_object() && msg.contains("type") && msg["type"].is_string()
                                 ? msg["type"].get<std::string>()
                                 : std::string{};

    if (type == "claim") {
      if (controller && *controller != c.id) return reply_error(c, request_id, "controller busy");
      controller = c.id;
      json body{{"type", "role"}, {"role", "controller"}};
      if (!request_id.is_null()) body["id"] = request_id;
      return c.send(body.dump());
    }
    if (type == "release") {
      if (controller == c.id) controller.reset();
      json body{{"type", "role"}, {"role", "viewer"}};
      if (!request_id.is_null()) body["id"] = request_id;
      return c.send(body.dump());
    }
    if (type == "list_episodes") {
      json files = json::array();
      std::error_code ec;
      for (const auto& entry : std::filesystem::directory_iterator(session.log_dir(), ec)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path().filename().string());
      }
      std::sort(files.begin(), files.end());
      json body{{"type", "episodes"}, {"files", files}};
      if (!request_id.is_null()) body["id"] = request_id;
      return c.send(body.dump());
    }
    if (controller != c.id) return reply_error(c, request_id, "read-only viewer: claim control first");

    Command command;
    try {
      command = parse_command(msg);
    } catch (const CommandError& e) {
      return reply_error(c, request_id, e.what());
    }
    if (!session.inbox().try_push(Inbound{c.id, request_id, std::move(command)})) {
      reply_error(c, request_id, "session busy");
    }
  }

  Session& session;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::steady_timer timer;
  std::thread thread;
  std::map<std::uint64_t, std::shared_ptr<Connection>> conns;
  std::optional<std::uint64_t> controller;
  std::uint64_t next_id = 0;
  int bound_port = 0;
};

Session::Api::Api(Session& session, int port) : impl_(std::make_unique<Impl>(session, port)) {}
Session::Api::~Api() = default;
int Session::Api::port() const { return impl_->bound_port; }

}  // namespace dexmouse::session
