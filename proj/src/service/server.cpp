#include <atomic>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <condition_variable>
#include <thread>

#include "retinavr/error.hpp"
#include "retinavr/service.hpp"

namespace retinavr {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

void run_connection(tcp::socket socket, ServiceOptions options, std::shared_ptr<SessionRegistry> registry) {
  try {
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept();
    ws.text(true);
    ProtocolSession session(options, registry);
    beast::flat_buffer buffer;
    while (!session.closed()) {
      buffer.clear();
      ws.read(buffer);
      for (const auto& reply : session.handle(beast::buffers_to_string(buffer.data()))) {
        ws.write(asio::buffer(reply.dump()));
      }
    }
    ws.close(websocket::close_code::normal);
  } catch (const std::exception&) {
    // Client went away or spoke something other than WebSocket. The session
    // destructor still finalizes its log.
  }
}

}  // namespace

struct Server::Impl {
  ServiceOptions options;
  std::shared_ptr<SessionRegistry> registry;
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread accept_thread;
  std::mutex mu;
  std::condition_variable cv;
  bool stopped = false;

  void accept_next() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::thread(run_connection, std::move(socket), options, registry).detach();
      accept_next();
    });
  }
};

Server::Server(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->registry = std::make_shared<SessionRegistry>(impl_->options.log_dir);
}

Server::~Server() { stop(); }

unsigned short Server::start(const std::string& address, unsigned short port) {
  beast::error_code ec;
  const auto ip = asio::ip::make_address(address, ec);
  if (ec) throw Error(ErrorCode::BindFailure, "bad bind address '" + address + "'");
  const tcp::endpoint endpoint(ip, port);
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorCode::BindFailure, "cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
  }
  const unsigned short bound = acc.local_endpoint().port();
  impl_->accept_next();
  impl_->accept_thread = std::thread([this] { impl_->ioc.run(); });
  return bound;
}

void Server::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->cv.wait(lock, [this] { return impl_->stopped; });
}

void Server::stop() {
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopped) return;
    impl_->stopped = true;
  }
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  impl_->cv.notify_all();
}

std::shared_ptr<SessionRegistry> Server::registry() const { return impl_->registry; }

}  // namespace retinavr
