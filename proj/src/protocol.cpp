#include "faitheval/protocol.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

namespace faitheval::protocol {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, const std::string& data, bool socket) {
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = socket ? ::send(fd, data.data() + written, data.size() - written, MSG_NOSIGNAL)
                             : ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError("cannot write to oracle: " + errno_text());
    }
    written += static_cast<std::size_t>(n);
  }
}

std::string read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = buffer.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      throw OracleTimeout("oracle did not answer within " + std::to_string(timeout.count()) + " ms");
    }
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw OracleError("poll on oracle failed: " + errno_text());
    }
    if (ready == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError("cannot read from oracle: " + errno_text());
    }
    if (n == 0) throw OracleError("oracle closed its output");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Channels

ProcessChannel::ProcessChannel(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw OracleError("pipe failed: " + errno_text());
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw OracleError("pipe failed: " + errno_text());
  }
  pid_ = ::fork();
  if (pid_ < 0) throw OracleError("fork failed: " + errno_text());
  if (pid_ == 0) {
    ::setpgid(0, 0);
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid_, pid_);
  ::close(to_child[0]);
  ::close(from_child[1]);
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

ProcessChannel::~ProcessChannel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        ::kill(-pid_, SIGKILL);
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
}

void ProcessChannel::send_line(const std::string& line) { write_all(to_child_, line + "\n", false); }

std::string ProcessChannel::receive_line(std::chrono::milliseconds timeout) {
  return read_line(from_child_, buffer_, timeout);
}

TcpChannel::TcpChannel(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    throw OracleError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  }
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd_ = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) throw OracleError("cannot connect to " + host + ":" + port);
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::send_line(const std::string& line) { write_all(fd_, line + "\n", true); }

std::string TcpChannel::receive_line(std::chrono::milliseconds timeout) {
  return read_line(fd_, buffer_, timeout);
}

// ---------------------------------------------------------------------------
// JSON mapping

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t cols_if_empty) {
  if (!j.is_array()) throw InvalidInput("matrix must be an array of rows");
  if (j.empty()) return Matrix(0, cols_if_empty);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InvalidInput("matrix rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw InvalidInput("matrix entry is not a number");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

ordered_json input_to_json(const ModelInput& input) {
  return ordered_json{{"text", matrix_to_json(input.text)},
                      {"vision", matrix_to_json(input.vision)}};
}

ordered_json target_to_json(const GradientTarget& target) {
  if (const auto* c = std::get_if<ClassTarget>(&target)) {
    return ordered_json{{"class", c->class_index}};
  }
  const auto& t = std::get<TokenTarget>(target);
  return ordered_json{{"step", t.step},
                      {"token", t.token},
                      {"answer_class", t.answer_class},
                      {"prefix", t.prefix}};
}

GradientTarget target_from_json(const json& j) {
  if (j.contains("class")) return ClassTarget{j.at("class").get<int>()};
  TokenTarget t;
  t.step = j.at("step").get<std::size_t>();
  t.token = j.at("token").get<int>();
  t.answer_class = j.at("answer_class").get<int>();
  t.prefix = j.value("prefix", std::vector<int>{});
  return t;
}

ordered_json info_to_json(const OracleInfo& info) {
  ordered_json vis = ordered_json::array();
  vis.push_back(info.n_regions ? ordered_json(*info.n_regions) : ordered_json(nullptr));
  vis.push_back(info.vis_dim);
  return ordered_json{{"classes", info.classes},
                      {"vis_dims", vis},
                      {"vocab", info.vocab},
                      {"text_dim", info.text_dim},
                      {"pad_id", info.pad_id},
                      {"n_tokens", info.n_tokens ? ordered_json(*info.n_tokens) : ordered_json(nullptr)},
                      {"explainer", info.explainer},
                      {"explainer_vision", info.explainer_uses_vision},
                      {"max_explanation_length", info.max_explanation_length}};
}

OracleInfo info_from_json(const json& j) {
  OracleInfo info;
  info.classes = j.at("classes").get<int>();
  info.vocab = j.at("vocab").get<int>();
  info.text_dim = j.at("text_dim").get<std::size_t>();
  const auto& vis = j.at("vis_dims");
  if (!vis.is_array() || vis.size() != 2) throw InvalidInput("vis_dims must be [n_regions, d]");
  if (!vis[0].is_null()) info.n_regions = vis[0].get<std::size_t>();
  info.vis_dim = vis[1].get<std::size_t>();
  info.pad_id = j.value("pad_id", 0);
  if (j.contains("n_tokens") && !j["n_tokens"].is_null()) info.n_tokens = j["n_tokens"].get<std::size_t>();
  info.explainer = j.value("explainer", false);
  info.explainer_uses_vision = j.value("explainer_vision", false);
  info.max_explanation_length = j.value("max_explanation_length", std::size_t{0});
  if (info.classes < 1 || info.vocab < 1 || info.text_dim == 0) {
    throw InvalidInput("info response declares empty dimensions");
  }
  if (info.pad_id < 0 || info.pad_id >= info.vocab) throw InvalidInput("pad_id outside vocabulary");
  return info;
}

// ---------------------------------------------------------------------------
// Client

RemoteOracle::RemoteOracle(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  if (!channel_) throw InvalidInput("null oracle channel");
  const auto response = call(ordered_json{{"op", "info"}});
  try {
    info_ = info_from_json(response);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("bad info response: ") + e.what(), received_bytes_);
  }
}

json RemoteOracle::call(ordered_json request) {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  ordered_json framed{{"id", id}};
  for (auto& [key, value] : request.items()) framed[key] = std::move(value);
  channel_->send_line(framed.dump());

  const std::string line = channel_->receive_line(timeout_);
  const std::size_t offset = received_bytes_;
  received_bytes_ += line.size() + 1;
  json response;
  try {
    response = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError("malformed response line: " + std::string(e.what()),
                        offset + (e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!response.is_object()) throw ProtocolError("response is not a JSON object", offset);
  if (!response.contains("id") || !response["id"].is_number_unsigned() ||
      response["id"].get<std::uint64_t>() != id) {
    throw ProtocolError("response id " + (response.contains("id") ? response["id"].dump() : "<none>") +
                            " does not match request id " + std::to_string(id),
                        offset);
  }
  if (response.contains("error")) {
    throw OracleError("oracle error: " + (response["error"].is_string()
                                              ? response["error"].get<std::string>()
                                              : response["error"].dump()));
  }
  return response;
}

Matrix RemoteOracle::embed(std::span<const int> token_ids) {
  const auto response =
      call(ordered_json{{"op", "embed"}, {"tokens", std::vector<int>(token_ids.begin(), token_ids.end())}});
  Matrix m;
  try {
    m = matrix_from_json(response.at("embeddings"), info_.text_dim);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("bad embed response: ") + e.what(), received_bytes_);
  }
  if (m.rows != token_ids.size() || (m.rows > 0 && m.cols != info_.text_dim)) {
    throw ProtocolError("embed response shape does not match request", received_bytes_);
  }
  return m;
}

PredictionDistribution RemoteOracle::predict(const ModelInput& input) {
  check_input_shape(info_, input);
  const auto response = call(ordered_json{{"op", "predict"}, {"payload", input_to_json(input)}});
  try {
    auto probs = response.at("probs").get<std::vector<double>>();
    if (probs.size() != static_cast<std::size_t>(info_.classes)) {
      throw InvalidInput("expected " + std::to_string(info_.classes) + " probabilities");
    }
    return PredictionDistribution::from_probs(std::move(probs));
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("bad predict response: ") + e.what(), received_bytes_);
  }
}

GradientRecord RemoteOracle::gradient(const ModelInput& input, const GradientTarget& target) {
  check_input_shape(info_, input);
  const auto response = call(ordered_json{
      {"op", "gradient"}, {"payload", input_to_json(input)}, {"target", target_to_json(target)}});
  GradientRecord g;
  try {
    const auto& grads = response.at("grads");
    g.text = matrix_from_json(grads.at("text"), input.text.cols);
    g.vision = matrix_from_json(grads.at("vision"), input.vision.cols);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("bad gradient response: ") + e.what(), received_bytes_);
  }
  if (g.text.rows != input.text.rows || g.text.cols != input.text.cols ||
      g.vision.rows != input.vision.rows || g.vision.cols != input.vision.cols) {
    throw ProtocolError("gradient shape does not match the input shape", received_bytes_);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Server

std::string handle_request(Oracle& oracle, const std::string& line) {
  ordered_json response;
  json request;
  try {
    request = json::parse(line);
  } catch (const json::parse_error& e) {
    response["id"] = nullptr;
    response["error"] = std::string("malformed request: ") + e.what();
    return response.dump();
  }
  response["id"] = request.is_object() && request.contains("id") ? request["id"] : json(nullptr);
  try {
    const auto op = request.at("op").get<std::string>();
    const auto& info = oracle.info();
    auto payload = [&] {
      const auto& p = request.at("payload");
      return ModelInput{matrix_from_json(p.at("text"), info.text_dim),
                        matrix_from_json(p.at("vision"), info.vis_dim)};
    };
    if (op == "info") {
      const auto fields = info_to_json(info);
      for (const auto& [key, value] : fields.items()) response[key] = value;
    } else if (op == "embed") {
      const auto ids = request.at("tokens").get<std::vector<int>>();
      response["embeddings"] = matrix_to_json(oracle.embed(ids));
    } else if (op == "predict") {
      response["probs"] = oracle.predict(payload()).probs;
    } else if (op == "gradient") {
      response["grads"] = input_to_json(oracle.gradient(payload(), target_from_json(request.at("target"))));
    } else {
      throw InvalidInput("unknown op '" + op + "'");
    }
  } catch (const std::exception& e) {
    ordered_json err{{"id", response["id"]}, {"error", e.what()}};
    return err.dump();
  }
  return response.dump();
}

void serve(Oracle& oracle, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request(oracle, line) << '\n';
    out.flush();
  }
}

void serve_socket(Oracle& oracle, int fd) {
  std::string buffer;
  char chunk[65536];
  for (;;) {
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError("cannot read from client: " + errno_text());
    }
    if (n == 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      write_all(fd, handle_request(oracle, line) + "\n", true);
    }
  }
}

void serve_tcp(Oracle& oracle, const std::string& host, const std::string& port,
               std::size_t max_connections, const std::function<void(unsigned short)>& ready) {
  std::signal(SIGPIPE, SIG_IGN);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    throw OracleError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  }
  const int listener = ::socket(found->ai_family, found->ai_socktype | SOCK_CLOEXEC, found->ai_protocol);
  if (listener < 0) {
    ::freeaddrinfo(found);
    throw OracleError("socket failed: " + errno_text());
  }
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  if (::bind(listener, found->ai_addr, found->ai_addrlen) != 0 || ::listen(listener, 8) != 0) {
    const std::string reason = errno_text();
    ::freeaddrinfo(found);
    ::close(listener);
    throw OracleError("cannot listen on " + host + ":" + port + ": " + reason);
  }
  ::freeaddrinfo(found);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&bound), &len);
  if (ready) ready(ntohs(bound.sin_port));
  for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
    const int client = ::accept4(listener, nullptr, nullptr, SOCK_CLOEXEC);
    if (client < 0) {
      if (errno == EINTR) continue;
      ::close(listener);
      throw OracleError("accept failed: " + errno_text());
    }
    try {
      serve_socket(oracle, client);
    } catch (const OracleError&) {
    }
    ::close(client);
  }
  ::close(listener);
}

}  // namespace faitheval::protocol
