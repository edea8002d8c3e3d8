#include "tdseg/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tdseg {

namespace {

constexpr unsigned char kSentinel = 0xAB;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& m,
                     const std::vector<ChannelStat>& norm_stats,
                     const PreprocessConfig& prep) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io", "cannot open " + path + " for writing");
  std::ostringstream head;
  head << "tdseg-checkpoint v1\n";
  head << "branches " << (m.cfg.branches == Branches::kHtOnly ? "ht" : "ht_dct") << "\n";
  head << "base_width " << m.cfg.base_width << "\n";
  head << "in_channels " << m.cfg.in_channels << "\n";
  head << "in_size " << m.cfg.in_size << "\n";
  head << "out_channels " << m.cfg.out_channels << "\n";
  head << "mask_threshold " << fmt(m.cfg.mask_threshold) << "\n";
  head << "perceptrons " << (m.cfg.perceptrons_enabled ? 1 : 0) << "\n";
  head << "prep_margin_crop " << (prep.margin_crop ? 1 : 0) << "\n";
  head << "prep_smooth_mode "
       << (prep.smooth_mode == PreprocessConfig::SmoothMode::kOff
               ? "off"
               : prep.smooth_mode == PreprocessConfig::SmoothMode::kReplace ? "replace"
                                                                            : "append")
       << "\n";
  head << "prep_sigmas " << prep.smoothing.sigmas.size();
  for (float s : prep.smoothing.sigmas) head << " " << fmt(s);
  head << "\n";
  head << "normstats " << norm_stats.size() << "\n";
  for (const auto& s : norm_stats)
    head << "stat " << fmt(s.mean) << " " << fmt(s.std) << " " << (s.exempt ? 1 : 0) << "\n";
  head << "params " << m.params.count() << "\n";
  for (const auto& e : m.params.entries()) {
    head << "param " << e.name << " " << (e.trainable ? 1 : 0) << " " << e.value.rank();
    for (int i = 0; i < e.value.rank(); ++i) head << " " << e.value.extent(i);
    head << "\n";
  }
  head << "end\n";
  std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.put(static_cast<char>(kSentinel));
  for (const auto& e : m.params.entries())
    out.write(reinterpret_cast<const char*>(e.value.data()),
              static_cast<std::streamsize>(e.value.size() * 4));
  require(out.good(), "io", "write failed for " + path);
}

Model load_checkpoint(const std::string& path, std::vector<ChannelStat>* norm_stats,
                      PreprocessConfig* prep_out) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io", "cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  require(line == "tdseg-checkpoint v1", "io", "bad checkpoint header in " + path);

  NetworkConfig cfg;
  PreprocessConfig prep;
  std::vector<ChannelStat> stats;
  struct ParamDesc {
    std::string name;
    bool trainable;
    std::vector<int> shape;
  };
  std::vector<ParamDesc> descs;

  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "branches") {
      std::string v;
      ls >> v;
      cfg.branches = v == "ht" ? Branches::kHtOnly : Branches::kHtDct;
    } else if (key == "base_width") {
      ls >> cfg.base_width;
    } else if (key == "in_channels") {
      ls >> cfg.in_channels;
    } else if (key == "in_size") {
      ls >> cfg.in_size;
    } else if (key == "out_channels") {
      ls >> cfg.out_channels;
    } else if (key == "mask_threshold") {
      ls >> cfg.mask_threshold;
    } else if (key == "perceptrons") {
      int v;
      ls >> v;
      cfg.perceptrons_enabled = v != 0;
    } else if (key == "prep_margin_crop") {
      int v;
      ls >> v;
      prep.margin_crop = v != 0;
    } else if (key == "prep_smooth_mode") {
      std::string v;
      ls >> v;
      prep.smooth_mode = v == "off" ? PreprocessConfig::SmoothMode::kOff
                         : v == "replace" ? PreprocessConfig::SmoothMode::kReplace
                                          : PreprocessConfig::SmoothMode::kAppend;
    } else if (key == "prep_sigmas") {
      std::size_t count;
      ls >> count;
      prep.smoothing.sigmas.clear();
      for (std::size_t i = 0; i < count; ++i) {
        float s;
        ls >> s;
        prep.smoothing.sigmas.push_back(s);
      }
    } else if (key == "normstats" || key == "params") {
      // counts are implied by the stat/param lines
    } else if (key == "stat") {
      ChannelStat s;
      int exempt;
      ls >> s.mean >> s.std >> exempt;
      s.exempt = exempt != 0;
      stats.push_back(s);
    } else if (key == "param") {
      ParamDesc d;
      int trainable, rank;
      ls >> d.name >> trainable >> rank;
      d.trainable = trainable != 0;
      for (int i = 0; i < rank; ++i) {
        int e;
        ls >> e;
        d.shape.push_back(e);
      }
      require(!ls.fail(), "io", "malformed param line in " + path + ": '" + line + "'");
      descs.push_back(std::move(d));
    } else {
      throw Error("io", "unknown checkpoint key '" + key + "' in " + path);
    }
  }
  int sentinel = in.get();
  require(sentinel == kSentinel, "io", "bad checkpoint sentinel in " + path);

  Model m = build_network(cfg, /*seed=*/0);
  require(m.params.count() == descs.size(), "io",
          "checkpoint parameter count does not match the architecture");
  for (std::size_t i = 0; i < descs.size(); ++i) {
    auto& e = m.params.entries()[i];
    require(e.name == descs[i].name, "io",
            "checkpoint parameter order mismatch: expected " + e.name + ", found " +
                descs[i].name);
    require(e.value.shape() == descs[i].shape, "io",
            "checkpoint shape mismatch for " + e.name);
    require(e.trainable == descs[i].trainable, "io",
            "checkpoint trainable flag mismatch for " + e.name);
    in.read(reinterpret_cast<char*>(e.value.data()),
            static_cast<std::streamsize>(e.value.size() * 4));
    require(in.gcount() == e.value.size() * 4, "io",
            "truncated checkpoint payload for " + e.name + " in " + path);
  }
  in.peek();
  require(in.eof(), "io", "trailing bytes after checkpoint payload in " + path);
  if (norm_stats) *norm_stats = stats;
  if (prep_out) {
    prep.flips = false;  // augmentation is a training-only concern
    *prep_out = prep;
  }
  return m;
}

}  // namespace tdseg
