#include <algorithm>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pdeloop/pdeloop.hpp"

namespace {

// nlohmann reports a byte offset; turn it into line:column for the message.
std::string locate(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
  const auto last_nl = text.rfind('\n', byte == 0 ? 0 : byte - 1);
  const auto col = last_nl == std::string::npos ? byte : byte - last_nl - 1;
  return fmt::format("line {}, column {}", line, col);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-gain certificates, simulation and ISS verification for coupled hyperbolic-parabolic loops"};
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  bool full_profiles = false;
  app.add_option("command", command, "certify | simulate | verify | gain-curve | sweep")
      ->required()
      ->check(CLI::IsMember(pdeloop::known_commands()));
  app.add_option("--config,-c", config_path, "JSON run configuration")->required();
  app.add_option("--out,-o", out_dir, "output directory");
  app.add_flag("--full-profiles", full_profiles, "also write profiles.csv");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pdeloop::kExitConfig;
  }

  std::string text;
  try {
    text = pdeloop::read_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pdeloop::kExitConfig;
  }

  pdeloop::json doc;
  try {
    doc = pdeloop::json::parse(text);
  } catch (const pdeloop::json::parse_error& e) {
    std::cerr << fmt::format("{}: {}: invalid JSON ({})\n", config_path, locate(text, e.byte), e.what());
    return pdeloop::kExitConfig;
  }

  const auto parsed = pdeloop::parse_config(doc);
  if (!parsed.diagnostics.empty()) {
    for (const auto& d : parsed.diagnostics) std::cerr << config_path << ": " << d << "\n";
    return pdeloop::kExitConfig;
  }

  const auto res = pdeloop::run(parsed.config, command, out_dir, full_profiles);
  auto& sink = res.exit_code == pdeloop::kExitConfig ? std::cerr : std::cout;
  for (const auto& m : res.messages) sink << m << "\n";
  for (const auto& a : res.artifacts) std::cout << "wrote " << a << "\n";
  return res.exit_code;
}
