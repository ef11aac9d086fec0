// Acceptance runner: `acceptance` runs every criterion, `acceptance
// --criterion N` runs one.  Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <sr3/verify.hpp>

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <vector>

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      ids.push_back(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 64;
    }
  }
  if (ids.empty())
    for (int id = 1; id <= 13; ++id) ids.push_back(id);
  bool all = true;
  for (const int id : ids) {
    if (id < 1 || id > 13) {
      std::cerr << "criterion must be in 1..13\n";
      return 64;
    }
    const auto r = sr3::verify::run_criterion(id);
    std::cout << sr3::verify::format_line(r) << std::endl;
    all = all && r.passed;
  }
  return all ? 0 : 1;
}
