// Scriptable runner for the protocol and lifecycle tests.
//
//   fake_runner --mode <mode> [--after N] --model <path>
//
// good            answers with the first declared label
// truth           answers with the label encoded in the sample id (`<id>@<label>`)
// malformed       first line is not JSON
// not_ready       first line is a prediction instead of ready
// init_error      answers init with an error message
// silent          never answers init
// exit_early      exits before reading init
// crash           exits after N predictions
// hang            stops answering after N predictions
// spam            answers with the label "spam"
// error_reply     answers every predict with an error message
// wrong_id        answers with a different id
// garbage         answers predict with a non-JSON line
// ignore_shutdown keeps running after shutdown
// stderr_flood    writes 1 MiB to stderr before each answer

#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "edgemark/protocol.hpp"

using namespace edgemark;

int main(int argc, char** argv) {
  std::string mode = "good";
  int after = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    std::string a = argv[i];
    if (a == "--mode") mode = argv[++i];
    else if (a == "--after") after = std::atoi(argv[++i]);
    else if (a == "--model") ++i;
  }
  std::signal(SIGPIPE, SIG_IGN);

  auto send = [](const protocol::Message& m) { std::cout << protocol::encode(m) << '\n' << std::flush; };
  auto forever = [] {
    while (true) std::this_thread::sleep_for(std::chrono::hours(1));
  };

  if (mode == "exit_early") return 3;

  std::string line;
  if (!std::getline(std::cin, line)) return 1;
  const auto init = std::get<protocol::Init>(protocol::decode(line));

  if (mode == "silent") forever();
  if (mode == "malformed") {
    std::cout << "this is not json\n" << std::flush;
    forever();
  }
  if (mode == "not_ready") {
    send(protocol::Prediction{"x", init.labels.front(), std::nullopt});
    forever();
  }
  if (mode == "init_error") {
    send(protocol::ErrorMessage{std::nullopt, "model file is corrupt"});
    return 1;
  }
  send(protocol::Ready{"fake-" + mode, static_cast<int>(getpid())});

  int served = 0;
  while (std::getline(std::cin, line)) {
    const auto msg = protocol::decode(line);
    if (std::holds_alternative<protocol::Shutdown>(msg)) {
      if (mode == "ignore_shutdown") forever();
      return 0;
    }
    const auto& req = std::get<protocol::Predict>(msg);
    if (mode == "crash" && served >= after) std::_Exit(7);
    if (mode == "hang" && served >= after) forever();
    ++served;

    if (mode == "stderr_flood") {
      const std::string junk(1 << 20, 'e');
      std::cerr << junk << std::flush;
    }
    if (mode == "spam") {
      send(protocol::Prediction{req.id, "spam", std::nullopt});
    } else if (mode == "error_reply") {
      send(protocol::ErrorMessage{req.id, "inference failed"});
    } else if (mode == "wrong_id") {
      send(protocol::Prediction{req.id + "-other", init.labels.front(), std::nullopt});
    } else if (mode == "garbage") {
      std::cout << "{not json\n" << std::flush;
    } else if (mode == "truth") {
      const auto at = req.id.find('@');
      send(protocol::Prediction{req.id, req.id.substr(at + 1), 0.125});
    } else {
      send(protocol::Prediction{req.id, init.labels.front(), 0.001});
    }
  }
  return 0;
}
