#include <algorithm>
#include <sstream>

#include "context.hpp"
#include "underspec/common/error.hpp"

namespace underspec::cli {

namespace {

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::vector<std::string> json_inputs(const Json& v) {
  auto scalar = [](const Json& x) -> std::string {
    if (x.is_string()) return x.get<std::string>();
    if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
    if (x.is_number_integer()) return std::to_string(x.get<long long>());
    if (x.is_number_unsigned()) return std::to_string(x.get<unsigned long long>());
    if (x.is_number_float()) return x.dump();
    throw UsageError("unsupported config value " + x.dump());
  };
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(scalar(x));
  } else {
    out.push_back(scalar(v));
  }
  return out;
}

std::vector<std::string> long_names(const CLI::App* app) {
  std::vector<std::string> out;
  for (const CLI::Option* opt : app->get_options())
    for (const auto& n : opt->get_lnames()) out.push_back(n);
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> path_of(const CLI::App* root, const CLI::App* leaf) {
  std::vector<std::string> path;
  for (const CLI::App* a = leaf; a != nullptr && a != root; a = a->get_parent())
    path.insert(path.begin(), a->get_name());
  return path;
}

}  // namespace

const CLI::App* active_leaf(const CLI::App* root) {
  const CLI::App* cur = root;
  for (;;) {
    auto subs = cur->get_subcommands();
    if (subs.empty()) return cur;
    cur = subs.front();
  }
}

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return snapshot_options(root_, app).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  Json doc;
  try {
    doc = Json::parse(input);
  } catch (const Json::parse_error& e) {
    throw UsageError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
  const CLI::App* leaf = active_leaf(root_);
  const auto leaf_path = path_of(root_, leaf);
  std::vector<CLI::ConfigItem> items;
  for (const auto& [raw_key, value] : doc.items()) {
    const std::string key = normalize_key(raw_key);
    if (key == "config") continue;
    CLI::ConfigItem item;
    item.name = key;
    item.inputs = json_inputs(value);
    if (leaf != root_ && leaf->get_option_no_throw("--" + key) != nullptr) {
      item.parents = leaf_path;
    } else if (root_->get_option_no_throw("--" + key) == nullptr) {
      std::string msg = "unknown config key '" + raw_key + "'";
      const std::string hint = suggest_option(leaf, key);
      if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
      throw UsageError(msg);
    }
    items.push_back(std::move(item));
  }
  return items;
}

Json snapshot_options(const CLI::App* root, const CLI::App* leaf) {
  Json out = Json::object();
  auto add = [&](const CLI::App* app) {
    for (const CLI::Option* opt : app->get_options()) {
      const auto& names = opt->get_lnames();
      if (names.empty()) continue;
      const std::string& name = names.front();
      if (name == "help" || name == "config" || name == "out-dir" || name == "json" ||
          name == "version")
        continue;
      if (out.contains(name)) continue;
      std::vector<std::string> values = opt->results();
      if (opt->count() == 0) {
        const std::string def = opt->get_default_str();
        values.clear();
        if (opt->get_expected_max() > 1) {
          // Defaults of list options are printed as "[a,b,c]".
          std::string body = def;
          // and empty ones as "{}".
          if (body.size() >= 2 && (body.front() == '[' || body.front() == '{'))
            body = body.substr(1, body.size() - 2);
          std::stringstream ss(body);
          std::string part;
          while (std::getline(ss, part, ',')) values.push_back(part);
        } else {
          values.push_back(def);
        }
      }
      // Unset lists and flags have nothing to replay.
      if (values.empty() || (values.size() == 1 && values.front().empty())) continue;
      if (opt->get_expected_max() > 1)
        out[name] = values;
      else
        out[name] = values.back();
    }
  };
  add(leaf);
  if (leaf != root) add(root);
  return out;
}

std::string suggest_option(const CLI::App* app, const std::string& name) {
  std::string key = name;
  while (!key.empty() && key.front() == '-') key.erase(key.begin());
  const auto eq = key.find('=');
  if (eq != std::string::npos) key.resize(eq);
  std::vector<std::string> names = long_names(app);
  for (const CLI::App* p = app->get_parent(); p != nullptr; p = p->get_parent()) {
    auto more = long_names(p);
    names.insert(names.end(), more.begin(), more.end());
  }
  std::string best;
  std::size_t best_d = std::max<std::size_t>(3, key.size() / 3) + 1;
  for (const auto& n : names) {
    const std::size_t d = edit_distance(key, n);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best.empty() ? "" : "--" + best;
}

}  // namespace underspec::cli
