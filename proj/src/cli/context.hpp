#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

namespace underspec::cli {

using Json = nlohmann::ordered_json;

// Options every leaf command accepts.
struct CommonOptions {
  std::string config;
  unsigned threads = 1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool json = false;
};

// Collects the files a command writes so the manifest can hash them.
class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}
  // Full path for `name` inside the output directory; records the name.
  std::string file(const std::string& name);
  const std::vector<std::string>& names() const { return names_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

// A leaf command fills `report` (printed with --json) and writes its files.
using Action = std::function<void(const CommonOptions&, Outputs&, Json& report)>;

struct Leaf {
  CLI::App* app = nullptr;
  std::vector<std::string> path;  // e.g. {"rf", "shift-curve"}
  Action action;
};

class Registry {
 public:
  Leaf& add(CLI::App* parent, const std::string& name, const std::string& description,
            std::vector<std::string> path);
  std::deque<Leaf>& leaves() { return leaves_; }
  CommonOptions& common() { return common_; }

 private:
  std::deque<Leaf> leaves_;  // stable references across add()
  CommonOptions common_;
};

void register_sir(CLI::App& root, Registry& reg);
void register_rf(CLI::App& root, Registry& reg);
void register_stats(CLI::App& root, Registry& reg);
void register_cluster(CLI::App& root, Registry& reg);

// Config files are flat JSON objects keyed by long option names (dashes or
// underscores). Values may be strings, numbers, booleans or arrays.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(CLI::App* root) : root_(root) {}
  std::string to_config(const CLI::App*, bool, bool, std::string) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  CLI::App* root_;
};

// Resolved value of every long option on `leaf` and on the root (given or
// default), keyed by long name. config, out-dir, json and help are left out.
Json snapshot_options(const CLI::App* root, const CLI::App* leaf);

// Closest long option name on `app` to `name`, or "" when nothing is close.
std::string suggest_option(const CLI::App* app, const std::string& name);

// Active leaf subcommand below `root` (the deepest parsed subcommand).
const CLI::App* active_leaf(const CLI::App* root);

}  // namespace underspec::cli
