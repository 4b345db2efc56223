#include <filesystem>
#include <iostream>
#include <string>

#include "gradtd/verify.hpp"

// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
int main(int argc, char** argv) {
  gradtd::verify::SuiteOptions options;
  options.scratch_dir = (std::filesystem::temp_directory_path() / "gradtd_acceptance").string();
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick") options.quick = true;
  }
  options.on_result = [](const gradtd::verify::CriterionResult& r) {
    std::cout << gradtd::verify::format_result(r) << std::endl;
  };
  const auto results = gradtd::verify::run_acceptance(options);
  return gradtd::verify::all_passed(results) ? 0 : 1;
}
