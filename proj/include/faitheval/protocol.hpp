#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>

#include "faitheval/oracle.hpp"
#include "json.hpp"

// Newline-delimited JSON oracle protocol.
//
//   -> {"id":1,"op":"info"}
//   <- {"id":1,"classes":3,"vocab":32,"text_dim":8,"vis_dims":[null,6],"pad_id":0,...}
//   -> {"id":2,"op":"embed","tokens":[5,9]}
//   <- {"id":2,"embeddings":[[...],[...]]}
//   -> {"id":3,"op":"predict","payload":{"text":[[...]],"vision":[[...]]}}
//   <- {"id":3,"probs":[...]}
//   -> {"id":4,"op":"gradient","payload":{...},"target":{"class":1}}
//   -> {"id":5,"op":"gradient","payload":{...},
//       "target":{"step":1,"token":7,"answer_class":1,"prefix":[4]}}
//   <- {"id":4,"grads":{"text":[[...]],"vision":[[...]]}}
//   <- {"id":n,"error":"message"}
//
// One request is in flight per session; every response carries the id of
// the request it answers.

namespace faitheval::protocol {

// A bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws OracleTimeout when no complete line arrives in time.
  virtual std::string receive_line(std::chrono::milliseconds timeout) = 0;
};

// Spawns `/bin/sh -c command` and talks over its stdin/stdout. The child's
// stderr is inherited.
class ProcessChannel final : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command);
  ~ProcessChannel() override;
  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  void send_line(const std::string& line) override;
  std::string receive_line(std::chrono::milliseconds timeout) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// TCP client using the same framing.
class TcpChannel final : public LineChannel {
 public:
  TcpChannel(const std::string& host, const std::string& port);
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void send_line(const std::string& line) override;
  std::string receive_line(std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, std::size_t cols_if_empty);

nlohmann::ordered_json input_to_json(const ModelInput& input);
nlohmann::ordered_json target_to_json(const GradientTarget& target);
GradientTarget target_from_json(const nlohmann::json& j);
nlohmann::ordered_json info_to_json(const OracleInfo& info);
OracleInfo info_from_json(const nlohmann::json& j);

// Client side of a session.
class RemoteOracle final : public Oracle {
 public:
  // Performs the info handshake.
  explicit RemoteOracle(std::unique_ptr<LineChannel> channel,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));

  const OracleInfo& info() const override { return info_; }
  Matrix embed(std::span<const int> token_ids) override;
  PredictionDistribution predict(const ModelInput& input) override;
  GradientRecord gradient(const ModelInput& input, const GradientTarget& target) override;

  std::size_t requests_sent() const { return next_id_ - 1; }

 private:
  nlohmann::json call(nlohmann::ordered_json request);

  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::size_t received_bytes_ = 0;
  OracleInfo info_;
};

// Server side: answers requests from `in` on `out` until end of input.
// Malformed requests get an error response; the loop keeps running.
void serve(Oracle& oracle, std::istream& in, std::ostream& out);

// Answers a single request line.
std::string handle_request(Oracle& oracle, const std::string& line);

// Serves one connected socket until the peer closes it.
void serve_socket(Oracle& oracle, int fd);

// Listens on host:port (port 0 picks a free one), reports the bound port
// through `ready`, then serves connections one after another. Returns after
// `max_connections` connections, or never when it is 0.
void serve_tcp(Oracle& oracle, const std::string& host, const std::string& port,
               std::size_t max_connections, const std::function<void(unsigned short)>& ready);

}  // namespace faitheval::protocol
