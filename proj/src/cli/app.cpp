#include "underspec/cli/app.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "context.hpp"
#include "underspec/common/error.hpp"
#include "underspec/common/hash.hpp"
#include "underspec/common/version.hpp"

namespace underspec::cli {

namespace fs = std::filesystem;

std::string Outputs::file(const std::string& name) {
  names_.push_back(name);
  return (dir_ / name).string();
}

Leaf& Registry::add(CLI::App* parent, const std::string& name, const std::string& description,
                    std::vector<std::string> path) {
  Leaf leaf;
  leaf.app = parent->add_subcommand(name, description);
  leaf.path = std::move(path);
  leaves_.push_back(std::move(leaf));
  return leaves_.back();
}

namespace {

// Raised by reproduce when hashes differ or outputs are missing.
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kManifestName = "manifest.json";

void write_manifest(const Outputs& outputs, const std::vector<std::string>& path,
                    const Json& config, std::uint64_t seed, double seconds) {
  Json m;
  m["artifact"] = "underspec";
  m["version"] = kVersion;
  m["command"] = path;
  m["seed"] = seed;
  m["config"] = config;
  Json files = Json::array();
  for (const auto& name : outputs.names())
    files.push_back({{"path", name}, {"sha256", sha256_file((outputs.dir() / name).string())}});
  m["outputs"] = files;
  m["wall_clock_seconds"] = seconds;
  std::ofstream out(outputs.dir() / kManifestName);
  out << m.dump(2) << '\n';
}

int reproduce(const std::string& manifest_path, std::ostream& out, std::ostream& err);

int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App root{"Desk-scale underspecification laboratory", "underspec"};
  root.fallthrough();
  root.require_subcommand(1);
  root.set_version_flag("--version", kVersion);
  Registry reg;
  CommonOptions& common = reg.common();
  common.threads = std::max(1u, std::thread::hardware_concurrency());
  root.config_formatter(std::make_shared<JsonConfig>(&root));
  root.set_config("--config", "", "JSON file of option values (flags override it)");
  root.add_option("--threads", common.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  root.add_option("--seed", common.seed, "Master seed")->capture_default_str();
  const char* env_dir = std::getenv("UNDERSPEC_OUT_DIR");
  if (env_dir != nullptr && *env_dir != '\0') common.out_dir = env_dir;
  root.add_option("--out-dir", common.out_dir, "Output directory (env UNDERSPEC_OUT_DIR)")
      ->capture_default_str();
  root.add_flag("--json", common.json, "Print a JSON report to stdout");

  register_sir(root, reg);
  register_rf(root, reg);
  register_stats(root, reg);
  register_cluster(root, reg);

  std::string manifest_path;
  CLI::App* repro = root.add_subcommand("reproduce", "Re-run a manifest and verify output hashes");
  repro->add_option("manifest", manifest_path, "Path to manifest.json")->required();

  if (args.empty()) {
    err << root.help();
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    root.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << root.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << root.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ExtrasError& e) {
    err << "error: " << e.what() << '\n';
    const CLI::App* leaf = active_leaf(&root);
    for (const auto& extra : root.remaining(true)) {
      if (extra.rfind("-", 0) != 0) continue;
      const std::string hint = suggest_option(leaf, extra);
      if (!hint.empty()) err << "  '" << extra << "': did you mean '" << hint << "'?\n";
    }
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const CLI::App* leaf = active_leaf(&root);
    err << "run '" << leaf->get_name() << " --help' for usage\n";
    return kExitUsage;
  }

  if (repro->parsed()) return reproduce(manifest_path, out, err);

  for (Leaf& leaf : reg.leaves()) {
    if (!leaf.app->parsed()) continue;
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(common.out_dir);
    Outputs outputs(common.out_dir);
    Json report;
    report["command"] = leaf.path;
    leaf.action(common, outputs, report);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(outputs, leaf.path, snapshot_options(&root, leaf.app), common.seed, seconds);
    report["outputs"] = outputs.names();
    if (common.json) out << report.dump(2) << '\n';
    return kExitOk;
  }
  err << root.help();
  return kExitUsage;
}

int reproduce(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw UsageError("cannot open manifest '" + manifest_path + "'");
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError(std::string("manifest is not valid JSON: ") + e.what());
  }
  for (const char* key : {"artifact", "version", "command", "seed", "config", "outputs"})
    if (!m.contains(key)) throw UsageError(std::string("manifest lacks '") + key + "'");
  if (m["artifact"] != "underspec" || !m["command"].is_array() || !m["config"].is_object() ||
      !m["outputs"].is_array())
    throw UsageError("manifest does not match the expected schema");
  const std::string version = m["version"].get<std::string>();
  if (version != kVersion)
    throw MismatchError("manifest was written by version " + version + ", this is " + kVersion +
                        "; outputs are not comparable across versions");

  const fs::path manifest_dir = fs::path(manifest_path).parent_path();
  for (const auto& f : m["outputs"]) {
    const fs::path recorded = manifest_dir / f.at("path").get<std::string>();
    if (!fs::exists(recorded))
      throw MismatchError("manifest references missing output file '" + recorded.string() + "'");
  }

  // The snapshot is a complete config file for the recorded command; the
  // top-level seed wins so that editing it is honoured.
  Json config = m["config"];
  config["seed"] = m["seed"];
  std::random_device rd;
  const fs::path scratch =
      fs::temp_directory_path() / ("underspec-reproduce-" + std::to_string(rd()));
  fs::create_directories(scratch);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{scratch};
  {
    std::ofstream cfg(scratch / "config.json");
    cfg << config.dump(2);
  }
  std::vector<std::string> args = m["command"].get<std::vector<std::string>>();
  args.insert(args.end(), {"--config", (scratch / "config.json").string(), "--out-dir",
                           (scratch / "out").string()});
  std::ostringstream sub_out;
  const int code = run(args, sub_out, err);
  if (code != kExitOk) return code;

  int mismatches = 0;
  for (const auto& f : m["outputs"]) {
    const std::string name = f.at("path").get<std::string>();
    const fs::path fresh = scratch / "out" / name;
    if (!fs::exists(fresh)) {
      err << "missing: re-run did not produce '" << name << "'\n";
      ++mismatches;
      continue;
    }
    if (sha256_file(fresh.string()) != f.at("sha256").get<std::string>()) {
      err << "hash mismatch: " << name << '\n';
      ++mismatches;
    }
  }
  if (mismatches > 0) return kExitNumerical;
  out << "reproduced " << m["outputs"].size() << " output(s)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run_impl(args, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace underspec::cli
