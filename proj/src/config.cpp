#include "tdseg/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace tdseg {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

float to_float(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    float f = std::stof(v, &pos);
    require(pos == v.size(), "config", "trailing junk in value for " + key + ": '" + v + "'");
    return f;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error("config", "bad numeric value for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long n = std::stol(v, &pos);
    require(pos == v.size(), "config", "trailing junk in value for " + key + ": '" + v + "'");
    return static_cast<int>(n);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error("config", "bad integer value for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw Error("config", "bad on/off value for " + key + ": '" + v + "'");
}

std::vector<float> to_float_list(const std::string& key, const std::string& v) {
  std::vector<float> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(to_float(key, tok));
  }
  require(!out.empty(), "config", "empty list for " + key);
  return out;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, "config",
            origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    require(!key.empty() && !val.empty(), "config",
            origin + ":" + std::to_string(lineno) + ": empty key or value");

    if (key == "network.branches") {
      if (val == "ht")
        cfg.network.branches = Branches::kHtOnly;
      else if (val == "ht_dct")
        cfg.network.branches = Branches::kHtDct;
      else
        throw Error("config", "network.branches must be 'ht' or 'ht_dct', got '" + val + "'");
    } else if (key == "network.base_width") {
      cfg.network.base_width = to_int(key, val);
    } else if (key == "network.in_channels") {
      cfg.network.in_channels = to_int(key, val);
    } else if (key == "network.in_size") {
      cfg.network.in_size = to_int(key, val);
    } else if (key == "network.out_channels") {
      cfg.network.out_channels = to_int(key, val);
    } else if (key == "network.mask_threshold") {
      cfg.network.mask_threshold = to_float(key, val);
    } else if (key == "network.perceptrons") {
      cfg.network.perceptrons_enabled = to_bool(key, val);
    } else if (key == "loss.lambda_bce") {
      cfg.loss.lambda_bce = to_float(key, val);
    } else if (key == "loss.lambda_dice") {
      cfg.loss.lambda_dice = to_float(key, val);
    } else if (key == "loss.lambda_focal") {
      cfg.loss.lambda_focal = to_float(key, val);
    } else if (key == "loss.focal_gamma") {
      cfg.loss.focal_gamma = to_float(key, val);
    } else if (key == "loss.focal_alpha") {
      cfg.loss.focal_alpha = to_float(key, val);
    } else if (key == "loss.dice_smooth") {
      cfg.loss.dice_smooth = to_float(key, val);
    } else if (key == "loss.pos_weight_cap") {
      cfg.loss.pos_weight_cap = to_float(key, val);
    } else if (key == "opt.lr") {
      cfg.opt.lr = to_float(key, val);
    } else if (key == "opt.beta1") {
      cfg.opt.beta1 = to_float(key, val);
    } else if (key == "opt.beta2") {
      cfg.opt.beta2 = to_float(key, val);
    } else if (key == "opt.eps") {
      cfg.opt.eps = to_float(key, val);
    } else if (key == "train.epochs") {
      cfg.epochs = to_int(key, val);
    } else if (key == "train.batch_size") {
      cfg.batch_size = to_int(key, val);
    } else if (key == "train.max_steps") {
      cfg.max_steps = to_int(key, val);
    } else if (key == "train.seed") {
      cfg.seed = static_cast<std::uint32_t>(to_int(key, val));
    } else if (key == "data.manifest") {
      cfg.manifest_path = val;
    } else if (key == "prep.margin_crop") {
      cfg.prep.margin_crop = to_bool(key, val);
    } else if (key == "prep.smooth_sigmas") {
      cfg.prep.smoothing.sigmas = to_float_list(key, val);
    } else if (key == "prep.smooth_mode") {
      if (val == "off")
        cfg.prep.smooth_mode = PreprocessConfig::SmoothMode::kOff;
      else if (val == "replace")
        cfg.prep.smooth_mode = PreprocessConfig::SmoothMode::kReplace;
      else if (val == "append")
        cfg.prep.smooth_mode = PreprocessConfig::SmoothMode::kAppend;
      else
        throw Error("config", "prep.smooth_mode must be off|replace|append, got '" + val + "'");
    } else if (key == "prep.flips") {
      cfg.prep.flips = to_bool(key, val);
    } else if (key == "out.dir") {
      cfg.out_dir = val;
    } else if (key == "gen.count") {
      cfg.gen.count = to_int(key, val);
    } else if (key == "gen.size") {
      cfg.gen.size = to_int(key, val);
    } else if (key == "gen.channels") {
      cfg.gen.channels = to_int(key, val);
    } else if (key == "gen.seed") {
      cfg.gen.seed = static_cast<std::uint32_t>(to_int(key, val));
    } else if (key == "gen.wind_bias") {
      cfg.gen.wind_bias = to_float(key, val);
    } else if (key == "gen.growth_steps") {
      cfg.gen.growth_steps = to_int(key, val);
    } else if (key == "gen.uncertain_frac") {
      cfg.gen.uncertain_frac = to_float(key, val);
    } else {
      throw Error("config", origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str(), path);
}

namespace {

std::string fmt(float v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream o;
  o << "network.branches = "
    << (cfg.network.branches == Branches::kHtOnly ? "ht" : "ht_dct") << "\n";
  o << "network.base_width = " << cfg.network.base_width << "\n";
  o << "network.in_channels = " << cfg.network.in_channels << "\n";
  o << "network.in_size = " << cfg.network.in_size << "\n";
  o << "network.out_channels = " << cfg.network.out_channels << "\n";
  o << "network.mask_threshold = " << fmt(cfg.network.mask_threshold) << "\n";
  o << "network.perceptrons = " << (cfg.network.perceptrons_enabled ? "on" : "off") << "\n";
  o << "loss.lambda_bce = " << fmt(cfg.loss.lambda_bce) << "\n";
  o << "loss.lambda_dice = " << fmt(cfg.loss.lambda_dice) << "\n";
  o << "loss.lambda_focal = " << fmt(cfg.loss.lambda_focal) << "\n";
  o << "loss.focal_gamma = " << fmt(cfg.loss.focal_gamma) << "\n";
  o << "loss.focal_alpha = " << fmt(cfg.loss.focal_alpha) << "\n";
  o << "loss.dice_smooth = " << fmt(cfg.loss.dice_smooth) << "\n";
  o << "loss.pos_weight_cap = " << fmt(cfg.loss.pos_weight_cap) << "\n";
  o << "opt.lr = " << fmt(cfg.opt.lr) << "\n";
  o << "opt.beta1 = " << fmt(cfg.opt.beta1) << "\n";
  o << "opt.beta2 = " << fmt(cfg.opt.beta2) << "\n";
  o << "opt.eps = " << fmt(cfg.opt.eps) << "\n";
  o << "train.epochs = " << cfg.epochs << "\n";
  o << "train.batch_size = " << cfg.batch_size << "\n";
  o << "train.max_steps = " << cfg.max_steps << "\n";
  o << "train.seed = " << cfg.seed << "\n";
  if (!cfg.manifest_path.empty()) o << "data.manifest = " << cfg.manifest_path << "\n";
  o << "prep.margin_crop = " << (cfg.prep.margin_crop ? "on" : "off") << "\n";
  o << "prep.smooth_sigmas = ";
  for (std::size_t i = 0; i < cfg.prep.smoothing.sigmas.size(); ++i) {
    if (i) o << ",";
    o << fmt(cfg.prep.smoothing.sigmas[i]);
  }
  o << "\n";
  o << "prep.smooth_mode = ";
  switch (cfg.prep.smooth_mode) {
    case PreprocessConfig::SmoothMode::kOff: o << "off"; break;
    case PreprocessConfig::SmoothMode::kReplace: o << "replace"; break;
    case PreprocessConfig::SmoothMode::kAppend: o << "append"; break;
  }
  o << "\n";
  o << "prep.flips = " << (cfg.prep.flips ? "on" : "off") << "\n";
  o << "out.dir = " << cfg.out_dir << "\n";
  o << "gen.count = " << cfg.gen.count << "\n";
  o << "gen.size = " << cfg.gen.size << "\n";
  o << "gen.channels = " << cfg.gen.channels << "\n";
  o << "gen.seed = " << cfg.gen.seed << "\n";
  o << "gen.wind_bias = " << fmt(cfg.gen.wind_bias) << "\n";
  o << "gen.growth_steps = " << cfg.gen.growth_steps << "\n";
  o << "gen.uncertain_frac = " << fmt(cfg.gen.uncertain_frac) << "\n";
  return o.str();
}

void write_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  require(out.good(), "io", "cannot open " + path + " for writing");
  out << format_run_config(cfg);
  require(out.good(), "io", "write failed for " + path);
}

}  // namespace tdseg
