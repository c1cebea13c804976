// Serves a toy oracle over the stdio wire protocol.
//
//   hierxai-toy-oracle --spec planted.json
//   hierxai-toy-oracle --spec linear.toml --exit-after 3

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "hierxai/oracle.hpp"
#include "hierxai/pipeline.hpp"
#include "hierxai/wire.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Toy classifier served over newline-delimited JSON on stdin/stdout"};
  std::string spec_path;
  std::size_t exit_after = 0;
  app.add_option("--spec", spec_path, "toy spec file (.json or .toml)")->required();
  app.add_option("--exit-after", exit_after, "exit without replying after this many requests (0 = never)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  std::unique_ptr<hierxai::Oracle> oracle;
  try {
    oracle = hierxai::make_toy_oracle(hierxai::load_toy_spec(spec_path));
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  std::ios::sync_with_stdio(false);
  std::string line;
  std::size_t seen = 0;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (exit_after != 0 && ++seen > exit_after) return 3;
    std::cout << hierxai::wire::handle_line(*oracle, line) << '\n' << std::flush;
  }
  return 0;
}
