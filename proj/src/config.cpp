// SPDX-License-Identifier: Apache-2.0
#include "semsplat/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>
#include <vector>

#include "semsplat/error.hpp"

namespace semsplat {
namespace {

using FieldRef = std::variant<double TrainConfig::*, std::int64_t TrainConfig::*, std::uint64_t TrainConfig::*>;

struct FieldEntry {
  const char* key;
  FieldRef ref;
};

const std::vector<FieldEntry>& field_table() {
  static const std::vector<FieldEntry> table = {
      {"lambda_sem", &TrainConfig::lambda_sem},
      {"lambda_guide", &TrainConfig::lambda_guide},
      {"lambda_soft", &TrainConfig::lambda_soft},
      {"lambda_hard", &TrainConfig::lambda_hard},
      {"lambda_ssim", &TrainConfig::lambda_ssim},
      {"omega_d", &TrainConfig::omega_d},
      {"omega_ng", &TrainConfig::omega_ng},
      {"omega_nb", &TrainConfig::omega_nb},
      {"alpha_sigmoid_scale", &TrainConfig::alpha_sigmoid_scale},
      {"total_iters", &TrainConfig::total_iters},
      {"guidance_start_iter", &TrainConfig::guidance_start_iter},
      {"lr_position_init", &TrainConfig::lr_position_init},
      {"lr_position_final", &TrainConfig::lr_position_final},
      {"lr_rotation", &TrainConfig::lr_rotation},
      {"lr_log_scale", &TrainConfig::lr_log_scale},
      {"lr_opacity", &TrainConfig::lr_opacity},
      {"lr_color", &TrainConfig::lr_color},
      {"lr_semantic", &TrainConfig::lr_semantic},
      {"spatial_lr_scale", &TrainConfig::spatial_lr_scale},
      {"densify_from_iter", &TrainConfig::densify_from_iter},
      {"densify_until_iter", &TrainConfig::densify_until_iter},
      {"densify_interval", &TrainConfig::densify_interval},
      {"densify_grad_threshold", &TrainConfig::densify_grad_threshold},
      {"percent_dense", &TrainConfig::percent_dense},
      {"prune_opacity", &TrainConfig::prune_opacity},
      {"min_primitives", &TrainConfig::min_primitives},
      {"max_primitives", &TrainConfig::max_primitives},
      {"edge_mask_dilation", &TrainConfig::edge_mask_dilation},
      {"boundary_labels_from_render", &TrainConfig::boundary_labels_from_render},
      {"checkpoint_interval", &TrainConfig::checkpoint_interval},
      {"eval_interval", &TrainConfig::eval_interval},
      {"seed", &TrainConfig::seed},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

void TrainConfig::validate() const {
  const std::pair<const char*, double> weights[] = {
      {"lambda_sem", lambda_sem},   {"lambda_guide", lambda_guide}, {"lambda_soft", lambda_soft},
      {"lambda_hard", lambda_hard}, {"lambda_ssim", lambda_ssim},   {"omega_d", omega_d},
      {"omega_ng", omega_ng},       {"omega_nb", omega_nb},         {"alpha_sigmoid_scale", alpha_sigmoid_scale}};
  for (const auto& [name, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError(std::string(name) + " must be a finite value >= 0");
  }
  if (lambda_ssim > 1.0) throw ConfigError("lambda_ssim must be <= 1");
  if (total_iters < 0) throw ConfigError("total_iters must be >= 0");
  if (guidance_start_iter < 0) throw ConfigError("guidance_start_iter must be >= 0");
  const double rates[] = {lr_position_init, lr_position_final, lr_rotation, lr_log_scale,
                          lr_opacity,       lr_color,          lr_semantic};
  for (double r : rates) {
    if (!(r >= 0.0)) throw ConfigError("learning rates must be >= 0");
  }
  if (densify_interval <= 0) throw ConfigError("densify_interval must be positive");
  if (min_primitives < 0 || max_primitives < min_primitives) {
    throw ConfigError("need 0 <= min_primitives <= max_primitives");
  }
  if (edge_mask_dilation < 0) throw ConfigError("edge_mask_dilation must be >= 0");
  if (boundary_labels_from_render != 0 && boundary_labels_from_render != 1) {
    throw ConfigError("boundary_labels_from_render must be 0 or 1");
  }
  if (checkpoint_interval < 0 || eval_interval < 0) throw ConfigError("intervals must be >= 0");
}

void TrainConfig::apply(const std::map<std::string, std::string>& values) {
  const auto& table = field_table();
  for (const auto& [key, text] : values) {
    auto it = std::find_if(table.begin(), table.end(), [&](const FieldEntry& e) { return key == e.key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(this->*member)>;
          this->*member = parse_number<T>(key, text);
        },
        it->ref);
  }
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& entry : field_table()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, double>) {
            out[entry.key] = format_exact(this->*member);
          } else {
            out[entry.key] = std::to_string(this->*member);
          }
        },
        entry.ref);
  }
  return out;
}

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate config key '" + key + "'");
  }
  return out;
}

void write_key_value_file(const std::filesystem::path& path, const std::map<std::string, std::string>& values) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : values) out << k << " = " << v << '\n';
}

}  // namespace semsplat
