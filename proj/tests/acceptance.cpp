#include <cstring>
#include <iostream>

#include "nfdm/parallel.hpp"
#include "nfdm/selftest.hpp"

int main(int argc, char** argv) {
  auto opt = nfdm::SelftestOptions{};
  if (argc > 1 && std::strcmp(argv[1], "--quick") == 0) opt = nfdm::SelftestOptions::quick();
  opt.threads = nfdm::default_thread_count();
  const bool ok = nfdm::run_selftest(opt, std::cout);
  std::cout << (ok ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return ok ? 0 : 1;
}
