// One PASS/FAIL line per criterion on the reference grids; tolerances live in choquard/suite.hpp.

#include "choquard/suite.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace choquard;

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string out, criteria;
  bool tiny = false, fault = false;
  app.add_option("--out", out, "directory for report.json");
  app.add_option("--criteria", criteria, "comma-separated criterion keys");
  app.add_flag("--tiny", tiny, "16^3 smoke scale");
  app.add_flag("--inject-fault", fault, "corrupt one kernel multiplier before the oracle comparison");
  CLI11_PARSE(app, argc, argv);

  suite::Options o;
  o.scale = tiny ? suite::tiny_scale() : suite::reference_scale();
  o.inject_fault = fault;
  o.log = &std::cerr;
  std::stringstream ss(criteria);
  for (std::string k; std::getline(ss, k, ',');)
    if (!k.empty()) o.only.insert(k);

  const auto res = suite::run_suite(o);
  std::cout << "\n";
  for (const auto& c : res) std::cout << suite::summary_line(c) << "\n";
  const auto report = suite::report_json(res, o.scale);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "report.json") << report.dump(2) << "\n";
  }
  std::size_t passed = 0;
  for (const auto& c : res) passed += c.pass;
  std::cout << passed << "/" << res.size() << " criteria pass\n";
  return passed == res.size() ? 0 : 1;
}
