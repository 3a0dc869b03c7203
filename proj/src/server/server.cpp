#include "sylva/server/server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <map>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "sylva/common/log.hpp"
#include "sylva/service/wire.hpp"

namespace sylva::server {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using service::Command;
using service::MissionRunner;

namespace {

std::string client_name(int id) { return "client-" + std::to_string(id); }

Json reject_event(const std::string& command, int client, std::optional<std::int64_t> seq, const std::string& reason) {
  Json ev = {{"kind", "reject"}, {"command", command}, {"source", client_name(client)}, {"reason", reason}};
  if (seq) ev["command_seq"] = *seq;
  return ev;
}

Json control_event(std::optional<int> holder, const std::string& reason) {
  return {{"kind", "control"},
          {"holder", holder ? Json(client_name(*holder)) : Json()},
          {"reason", reason}};
}

/// Snapshot slot a message replaces for late joiners, empty when the message
/// is not part of the snapshot.
std::string snapshot_key(const Json& msg) {
  const std::string type = msg.at("type").get<std::string>();
  if (type == "state" || type == "metrics" || type == "tree_update" || type == "terrain_patch") return type;
  if (type == "graph_update") return msg.at("data").value("full", false) ? type : "";
  if (type == "event") {
    const std::string kind = msg.at("data").value("kind", "");
    if (kind == "plan" || kind == "report" || kind == "mission_end") return "event:" + kind;
  }
  return "";
}

}  // namespace

class Session;

struct MissionServer::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;
  std::unique_ptr<MissionRunner> runner;
  std::atomic<bool> stopping{false};

  mutable std::mutex mutex;
  std::map<int, std::shared_ptr<Session>> sessions;
  std::map<std::string, Json> snapshot;
  std::optional<int> holder;
  int next_id = 1;

  void do_accept();
  void join(const std::shared_ptr<Session>& s);
  void leave(int id);
  void on_message(int id, const std::string& text, bool is_text);
  void broadcast(const Json& msg);
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, MissionServer::Impl& hub, int id) : ws_(std::move(socket)), hub_(hub), id_(id) {}

  int id() const { return id_; }

  void run() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      self->ws_.async_accept([self](beast::error_code ec) {
        if (ec) return;
        self->hub_.join(self);
        self->do_read();
      });
    });
  }

  void send(std::shared_ptr<const std::string> text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)] {
      if (self->closed_) return;
      self->queue_.push_back(text);
      if (self->queue_.size() == 1) self->do_write();
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed_) return;
      self->closed_ = true;
      self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
    });
  }

 private:
  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->hub_.leave(self->id_);
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->hub_.on_message(self->id_, text, self->ws_.got_text());
      self->do_read();
    });
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->queue_.clear();
        self->hub_.leave(self->id_);
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->do_write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  MissionServer::Impl& hub_;
  int id_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool closed_ = false;
};

void MissionServer::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (stopping) return;
    if (!ec) {
      int id = 0;
      {
        std::lock_guard<std::mutex> lock(mutex);
        id = next_id++;
      }
      std::make_shared<Session>(std::move(socket), *this, id)->run();
    }
    do_accept();
  });
}

void MissionServer::Impl::join(const std::shared_ptr<Session>& s) {
  std::lock_guard<std::mutex> lock(mutex);
  sessions[s->id()] = s;
  const Json hello = service::make_message(
      "hello", 0, 0.0,
      {{"protocol", service::kProtocolVersion},
       {"client", client_name(s->id())},
       {"holder", holder ? Json(client_name(*holder)) : Json()}});
  s->send(std::make_shared<const std::string>(hello.dump()));
  std::vector<const Json*> cached;
  for (const auto& [key, msg] : snapshot) cached.push_back(&msg);
  std::sort(cached.begin(), cached.end(),
            [](const Json* a, const Json* b) { return a->at("seq").get<std::int64_t>() < b->at("seq").get<std::int64_t>(); });
  for (const Json* msg : cached) s->send(std::make_shared<const std::string>(msg->dump()));
  log().info("{} connected", client_name(s->id()));
}

void MissionServer::Impl::leave(int id) {
  std::lock_guard<std::mutex> lock(mutex);
  if (sessions.erase(id) == 0) return;
  log().info("{} disconnected", client_name(id));
  if (holder == id) {
    holder.reset();
    runner->submit_notice(control_event(std::nullopt, client_name(id) + " disconnected"));
  }
}

void MissionServer::Impl::on_message(int id, const std::string& text, bool is_text) {
  if (!is_text) {
    runner->submit_notice(reject_event("", id, std::nullopt, "binary frames are not supported"));
    return;
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    runner->submit_notice(reject_event("", id, std::nullopt, std::string("malformed JSON: ") + e.what()));
    return;
  }
  const std::string type = j.is_object() && j.contains("type") && j.at("type").is_string() ? j.at("type").get<std::string>() : "";
  std::optional<std::int64_t> seq;
  if (j.is_object() && j.contains("seq") && j.at("seq").is_number_integer()) seq = j.at("seq").get<std::int64_t>();
  std::lock_guard<std::mutex> lock(mutex);
  if (type == "release") {
    if (holder == id) {
      holder.reset();
      runner->submit_notice(control_event(std::nullopt, client_name(id) + " released control"));
    } else {
      runner->submit_notice(reject_event("release", id, seq, "client does not hold control"));
    }
    return;
  }
  Command c;
  try {
    c = service::command_from_json(j);
  } catch (const service::WireError& e) {
    runner->submit_notice(reject_event(type, id, e.seq() ? e.seq() : seq, e.what()));
    return;
  }
  if (!holder) {
    holder = id;
    runner->submit_notice(control_event(id, client_name(id) + " took control"));
  } else if (*holder != id) {
    runner->submit_notice(reject_event(type, id, seq, "control is held by " + client_name(*holder)));
    return;
  }
  c.source = client_name(id);
  runner->submit(std::move(c));
}

void MissionServer::Impl::broadcast(const Json& msg) {
  auto text = std::make_shared<const std::string>(msg.dump());
  std::lock_guard<std::mutex> lock(mutex);
  const std::string key = snapshot_key(msg);
  if (!key.empty()) snapshot[key] = msg;
  for (auto& [id, s] : sessions) s->send(text);
}

MissionServer::MissionServer(service::MissionConfig config, ServerOptions options)
    : config_(std::move(config)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  impl_->runner = std::make_unique<MissionRunner>(config_, options_.runner);
  impl_->runner->set_sink([this](const Json& msg) { impl_->broadcast(msg); });
  if (options_.autostart) impl_->runner->load_config_commands();
}

MissionServer::~MissionServer() { stop(); }

void MissionServer::start() {
  const tcp::endpoint endpoint(net::ip::make_address(options_.address), options_.port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen(net::socket_base::max_listen_connections);
  port_ = impl_->acceptor.local_endpoint().port();
  impl_->do_accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
  mission_thread_ = std::thread([this] { mission_loop(); });
  log().info("serving mission '{}' on ws://{}:{} at speed {}", config_.name, options_.address, port_, options_.speed);
}

void MissionServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  {
    std::lock_guard<std::mutex> lock(report_mutex_);
    report_cv_.notify_all();
  }
  if (mission_thread_.joinable()) mission_thread_.join();
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    std::lock_guard<std::mutex> lock(impl_->mutex);
    for (auto& [id, s] : impl_->sessions) s->close();
  });
  if (impl_->io_thread.joinable()) {
    // Give close frames a moment, then tear down whatever is left.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    impl_->ioc.stop();
    impl_->io_thread.join();
  }
  std::lock_guard<std::mutex> lock(impl_->mutex);
  impl_->sessions.clear();
}

void MissionServer::mission_loop() {
  using clock = std::chrono::steady_clock;
  MissionRunner& runner = *impl_->runner;
  const double period = options_.speed > 0.0 ? runner.dt() / options_.speed : 0.0;
  auto next = clock::now();
  while (!impl_->stopping) {
    if (!runner.ended()) {
      runner.tick();
    } else {
      bool have_report = false;
      {
        std::lock_guard<std::mutex> lock(report_mutex_);
        have_report = report_.has_value();
      }
      if (!have_report) {
        auto report = runner.finish();
        std::lock_guard<std::mutex> lock(report_mutex_);
        report_ = std::move(report);
        report_cv_.notify_all();
      }
      runner.tick();
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      continue;
    }
    if (period > 0.0) {
      next += std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(period));
      const auto now = clock::now();
      if (next < now - std::chrono::milliseconds(200)) next = now;
      std::this_thread::sleep_until(next);
    }
  }
}

metrics::MissionReport MissionServer::wait_report() {
  std::unique_lock<std::mutex> lock(report_mutex_);
  report_cv_.wait(lock, [this] { return report_.has_value() || impl_->stopping; });
  if (!report_) throw Error("server stopped before the mission ended");
  return *report_;
}

std::optional<metrics::MissionReport> MissionServer::report() const {
  std::lock_guard<std::mutex> lock(report_mutex_);
  return report_;
}

std::size_t MissionServer::clients() const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return impl_->sessions.size();
}

}  // namespace sylva::server
