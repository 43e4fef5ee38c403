#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "kgcurate/icl.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

int main(int argc, char** argv) {
  CLI::App app{"Local chat-completions stand-in"};
  int port = 8080;
  std::string mode = "constant";
  kgc::MockOptions opts;
  app.add_option("-p,--port", port);
  app.add_option("--mode", mode)->check(CLI::IsMember({"constant", "hash", "alternating"}));
  app.add_option("--text", opts.constant_text, "reply in constant mode");
  app.add_option("--fail-first", opts.fail_first);
  app.add_option("--fail-status", opts.fail_status);
  app.add_option("--token", opts.required_token, "require this bearer token");
  CLI11_PARSE(app, argc, argv);
  opts.mode = mode == "hash" ? kgc::MockMode::Hash : mode == "alternating" ? kgc::MockMode::Alternating
                                                                          : kgc::MockMode::Constant;
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  try {
    kgc::MockChatServer server(opts, port);
    std::cout << server.url() << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
