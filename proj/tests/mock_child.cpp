// Scriptable child process for the external model protocol tests.
//
//   mock_child echo0               prediction = first value of the row
//   mock_child rowindex            prediction = position of the row in its batch
//   mock_child linear W B          prediction = W . x + B, W comma separated
//   mock_child record PATH         echo0, appending every received line to PATH
//   mock_child short               n - 1 lines, then waits
//   mock_child exit-short          n - 1 lines, then exits
//   mock_child extra               n + 1 lines
//   mock_child err                 ERR line instead of predictions
//   mock_child bad-number          non-numeric prediction
//   mock_child nan                 NaN prediction
//   mock_child no-ready            wrong handshake reply
//   mock_child sleep               never answers a batch
//   mock_child exit1               echo0, but exits 1 with a stderr note

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ablate/format.hpp"

namespace {

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> row;
  std::istringstream in(line);
  for (std::string tok; in >> tok;) {
    const auto v = ablate::parse_finite_double(tok);
    if (!v) {
      std::cout << "ERR parse" << std::endl;
      std::exit(1);
    }
    row.push_back(*v);
  }
  return row;
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> w;
  std::stringstream in(text);
  for (std::string tok; std::getline(in, tok, ',');) w.push_back(*ablate::parse_finite_double(tok));
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo0";
  std::vector<double> weights;
  double intercept = 0.0;
  std::ofstream record;
  if (mode == "linear") {
    if (argc < 4) return 64;
    weights = parse_weights(argv[2]);
    intercept = *ablate::parse_finite_double(argv[3]);
  } else if (mode == "record") {
    if (argc < 3) return 64;
    record.open(argv[2], std::ios::app);
  }

  std::string line;
  auto next_line = [&]() -> bool {
    if (!std::getline(std::cin, line)) return false;
    if (record.is_open()) record << line << '\n' << std::flush;
    return true;
  };

  if (!next_line()) return 0;
  if (line.rfind("HELLO ", 0) != 0) {
    std::cout << "ERR expected HELLO" << std::endl;
    return 1;
  }
  const std::size_t m = std::stoul(line.substr(6));
  if (mode == "linear" && m != weights.size()) {
    std::cout << "ERR dimension mismatch" << std::endl;
    return 1;
  }
  std::cout << (mode == "no-ready" ? "HI" : "READY") << std::endl;

  while (next_line()) {
    if (line.rfind("BATCH ", 0) != 0) {
      std::cout << "ERR parse" << std::endl;
      return 1;
    }
    const std::size_t n = std::stoul(line.substr(6));
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < n; ++b) {
      if (!next_line()) return 1;
      rows.push_back(parse_row(line));
    }

    if (mode == "sleep") std::this_thread::sleep_for(std::chrono::hours(1));
    if (mode == "err") {
      std::cout << "ERR model exploded" << std::endl;
      continue;
    }
    std::size_t count = n;
    if (mode == "short" || mode == "exit-short") count = n - 1;
    std::string out;
    for (std::size_t b = 0; b < count; ++b) {
      double pred = rows[b].empty() ? 0.0 : rows[b][0];
      if (mode == "rowindex") pred = static_cast<double>(b);
      if (mode == "linear") {
        pred = intercept;
        for (std::size_t c = 0; c < weights.size(); ++c) pred += weights[c] * rows[b][c];
      }
      if (mode == "bad-number" && b == 0) {
        out += "abc\n";
      } else if (mode == "nan" && b == 0) {
        out += "nan\n";
      } else {
        out += ablate::format_double(pred) + '\n';
      }
    }
    if (mode == "extra") out += "0\n";
    std::cout << out << std::flush;
    if (mode == "exit-short") return 0;
  }

  if (mode == "exit1") {
    std::cerr << "mock_child: failing on purpose" << std::endl;
    return 1;
  }
  return 0;
}
