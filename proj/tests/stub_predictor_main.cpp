// External-predictor stand-in for the wire protocol tests. Speaks the
// newline-delimited JSON protocol on stdin/stdout. The mode argument selects
// a failure behavior:
//   ok        threshold classifier (class 1 iff first value > 0.5)
//   wrong-id  answers with a mismatched response id
//   die       exits after the handshake
//   slow      sleeps 2s before each predict response

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";
  std::string line;
  while (std::getline(std::cin, line)) {
    const nlohmann::json req = nlohmann::json::parse(line);
    const std::uint64_t id = req.at("id").get<std::uint64_t>();
    const std::string op = req.at("op").get<std::string>();
    nlohmann::json resp;
    if (op == "hello") {
      resp = {{"id", id}, {"classes", nlohmann::json::array()}, {"n_classes", 2}};
      std::cout << resp.dump() << "\n" << std::flush;
      if (mode == "die") return 0;
      continue;
    }
    if (mode == "slow") std::this_thread::sleep_for(std::chrono::seconds(2));
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& inst : req.at("instances"))
      classes.push_back(inst.at(0).get<double>() > 0.5 ? 1 : 0);
    resp = {{"id", mode == "wrong-id" ? id + 7 : id}, {"classes", std::move(classes)}};
    std::cout << resp.dump() << "\n" << std::flush;
  }
  return 0;
}
