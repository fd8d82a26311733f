#pragma once

#include <csignal>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "morphocf/errors.hpp"
#include "morphocf/predictor.hpp"

namespace morphocf {

// External-process bridge. The child speaks newline-delimited JSON on its
// stdin/stdout, one object per line:
//   request  {"id": <u64>, "op": "predict", "instances": [[f64,...],...]}
//   response {"id": <u64>, "classes": [<u32>,...]}
// with a handshake {"id":0,"op":"hello"} -> {"id":0,"classes":[],"n_classes":N}
// before the first batch. Access to the child is serialized; there is never
// more than one in-flight batch.
class SubprocessPredictor final : public Predictor {
public:
  explicit SubprocessPredictor(std::vector<std::string> command, int timeout_ms = 30000,
                               std::size_t batch_size = 256)
      : command_(std::move(command)), timeout_ms_(timeout_ms), batch_size_(batch_size) {
    if (command_.empty()) throw Error("subprocess predictor needs a command");
    spawn();
    nlohmann::json hello = {{"id", 0}, {"op", "hello"}};
    nlohmann::json resp = roundtrip(hello, 0);
    if (!resp.contains("n_classes") || !resp["n_classes"].is_number_unsigned())
      throw ProtocolViolation("handshake response lacks n_classes");
    names_ = default_class_names(resp["n_classes"].get<std::size_t>());
    std::string joined;
    for (const auto& c : command_) {
      if (!joined.empty()) joined += ' ';
      joined += c;
    }
    fingerprint_ = "cmd:" + joined;
  }

  ~SubprocessPredictor() override { shutdown(); }

  SubprocessPredictor(const SubprocessPredictor&) = delete;
  SubprocessPredictor& operator=(const SubprocessPredictor&) = delete;

  std::vector<ClassId> predict(const std::vector<EncodedInstance>& batch) const override {
    std::vector<ClassId> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); i += batch_size_) {
      const std::size_t e = std::min(batch.size(), i + batch_size_);
      nlohmann::json instances = nlohmann::json::array();
      for (std::size_t k = i; k < e; ++k) instances.push_back(batch[k].values);
      const std::uint64_t id = ++next_id_;
      nlohmann::json req = {{"id", id}, {"op", "predict"}, {"instances", std::move(instances)}};
      nlohmann::json resp = roundtrip(req, id);
      if (!resp.contains("classes") || !resp["classes"].is_array() ||
          resp["classes"].size() != e - i)
        throw ProtocolViolation("response classes do not match batch size");
      for (const auto& c : resp["classes"]) {
        if (!c.is_number_unsigned() || c.get<std::size_t>() >= names_.size())
          throw ProtocolViolation("class id out of range");
        out.push_back(c.get<ClassId>());
      }
    }
    return out;
  }

  const std::vector<std::string>& class_names() const override { return names_; }
  std::string fingerprint() const override { return fingerprint_; }

private:
  void spawn() {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw Error("subprocess: pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw Error("subprocess: fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> argv;
      argv.reserve(command_.size() + 1);
      for (auto& c : command_) argv.push_back(c.data());
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    stdin_fd_ = to_child[1];
    stdout_fd_ = from_child[0];
    signal(SIGPIPE, SIG_IGN);
  }

  void shutdown() {
    if (stdin_fd_ >= 0) close(stdin_fd_);
    if (stdout_fd_ >= 0) close(stdout_fd_);
    stdin_fd_ = stdout_fd_ = -1;
    if (pid_ > 0) {
      for (int i = 0; i < 20; ++i) {
        int status = 0;
        if (waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        usleep(10000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  nlohmann::json roundtrip(const nlohmann::json& request, std::uint64_t expect_id) const {
    std::lock_guard<std::mutex> lock(io_mutex_);
    const std::string line = request.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      ssize_t n = write(stdin_fd_, line.data() + written, line.size() - written);
      if (n <= 0) throw ProcessExit("subprocess stdin closed");
      written += static_cast<std::size_t>(n);
    }
    const std::string resp_line = read_line();
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(resp_line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolViolation("unparseable response line: " + resp_line);
    }
    if (!resp.contains("id") || !resp["id"].is_number_unsigned() ||
        resp["id"].get<std::uint64_t>() != expect_id)
      throw ProtocolViolation("response id does not match request id");
    return resp;
  }

  std::string read_line() const {
    while (true) {
      auto nl = read_buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = read_buf_.substr(0, nl);
        read_buf_.erase(0, nl + 1);
        return line;
      }
      struct pollfd pfd = {stdout_fd_, POLLIN, 0};
      int pr = poll(&pfd, 1, timeout_ms_);
      if (pr == 0) throw Timeout("subprocess response timed out");
      if (pr < 0) throw Error("subprocess: poll() failed");
      char chunk[4096];
      ssize_t n = read(stdout_fd_, chunk, sizeof chunk);
      if (n <= 0) throw ProcessExit("subprocess terminated mid-request");
      read_buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> command_;
  int timeout_ms_;
  std::size_t batch_size_;
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::vector<std::string> names_;
  std::string fingerprint_;
  mutable std::mutex io_mutex_;
  mutable std::string read_buf_;
  mutable std::uint64_t next_id_ = 0;
};

inline std::unique_ptr<Predictor> subprocess_predictor(std::vector<std::string> command,
                                                       int timeout_ms = 30000,
                                                       std::size_t batch_size = 256) {
  return std::make_unique<SubprocessPredictor>(std::move(command), timeout_ms, batch_size);
}

} // namespace morphocf
