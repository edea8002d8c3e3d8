#include "tdseg/data_io.hpp"

#include "tdseg/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tdseg {

namespace fs = std::filesystem;

namespace {

constexpr unsigned char kSentinel = 0xAB;

void ensure_little_endian() {
  const std::uint32_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  require(b == 1, "io", "tensor files require a little-endian host");
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
  ensure_little_endian();
  require(t.rank() >= 1, "io", "write_tensor: empty shape");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io", "cannot open " + path + " for writing");
  std::string header = "tdseg-tensor v1 dtype=f32 shape=";
  for (int i = 0; i < t.rank(); ++i) {
    if (i) header += ",";
    header += std::to_string(t.extent(i));
  }
  header += " order=le\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.put(static_cast<char>(kSentinel));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * 4));
  require(out.good(), "io", "write failed for " + path);
}

Tensor read_tensor(const std::string& path) {
  ensure_little_endian();
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io", "cannot open tensor file " + path);
  std::string header;
  std::getline(in, header);
  require(in.good(), "io", "malformed header in " + path + ": missing newline");

  std::istringstream hs(header);
  std::string magic, version, dtype, shape_field, order;
  hs >> magic >> version >> dtype >> shape_field >> order;
  require(magic == "tdseg-tensor" && version == "v1", "io",
          "malformed header in " + path + ": bad magic '" + magic + "'");
  require(dtype == "dtype=f32", "io", "unsupported dtype in " + path);
  require(order == "order=le", "io", "unsupported byte order in " + path);
  require(shape_field.rfind("shape=", 0) == 0, "io", "malformed shape field in " + path);

  std::vector<int> shape;
  std::stringstream ss(shape_field.substr(6));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    int 	e = 0;
    try {
      e = std::stoi(tok);
    } catch (const std::exception&) {
      throw Error("io", "malformed shape extent '" + tok + "' in " + path);
    }
    require(e > 0, "io", "nonpositive shape extent in " + path);
    shape.push_back(e);
  }
  require(!shape.empty(), "io", "empty shape in " + path);

  int sentinel = in.get();
  require(sentinel == kSentinel, "io", "malformed header in " + path + ": bad sentinel byte");

  std::int64_t count = Tensor::element_count(shape);
  std::vector<float> data(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * 4));
  require(in.gcount() == count * 4, "io",
          "truncated payload in " + path + ": expected " + std::to_string(count * 4) +
              " bytes, got " + std::to_string(in.gcount()));
  in.peek();
  require(in.eof(), "io", "payload byte length disagrees with shape in " + path +
                              ": trailing bytes after " + std::to_string(count * 4));
  return Tensor::from_data(shape, std::move(data));
}

std::vector<std::size_t> Manifest::split_indices(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == s) idx.push_back(i);
  return idx;
}

int Manifest::role_index(const std::string& role) const {
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == role) return static_cast<int>(i);
  return -1;
}

void write_manifest(const std::string& path, const Manifest& m) {
  require(static_cast<int>(m.roles.size()) == m.channels, "data",
          "manifest: role list length does not match channel count");
  std::ofstream out(path);
  require(out.good(), "io", "cannot open " + path + " for writing");
  out << "tdseg-manifest v1\n";
  out << "channels " << m.channels << "\n";
  out << "resolution " << m.resolution << "\n";
  out << "roles";
  for (const auto& r : m.roles) out << " " << r;
  out << "\n";
  for (const auto& s : m.samples)
    out << "sample " << s.input_path << " " << s.target_path << " " << split_name(s.split)
        << "\n";
  require(out.good(), "io", "write failed for " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "io", "cannot open manifest " + path);
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  std::string line;
  std::getline(in, line);
  require(line == "tdseg-manifest v1", "data", "bad manifest header in " + path);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "channels") {
      ls >> m.channels;
    } else if (key == "resolution") {
      ls >> m.resolution;
    } else if (key == "roles") {
      std::string r;
      while (ls >> r) m.roles.push_back(r);
    } else if (key == "sample") {
      SampleRecord rec;
      std::string split;
      ls >> rec.input_path >> rec.target_path >> split;
      require(!rec.input_path.empty() && !rec.target_path.empty() && !split.empty(), "data",
              "malformed sample line in " + path + ": '" + line + "'");
      rec.split = split_from_name(split);
      m.samples.push_back(std::move(rec));
    } else {
      throw Error("data", "unknown manifest key '" + key + "' in " + path);
    }
  }
  require(m.channels > 0 && m.resolution > 0, "data", "manifest missing channels/resolution");
  require(static_cast<int>(m.roles.size()) == m.channels, "data",
          "manifest roles length does not match channel count");
  for (const auto& s : m.samples) {
    for (const auto& p : {s.input_path, s.target_path}) {
      fs::path full = fs::path(m.base_dir) / p;
      require(fs::exists(full), "data", "manifest references missing file " + full.string());
    }
  }
  return m;
}

namespace {

Tensor smooth_noise_field(int n, float sigma, Rng& rng) {
  Tensor noise({n, n});
  for (std::int64_t i = 0; i < noise.size(); ++i) noise[i] = normal_real(rng, 0.0f, 1.0f);
  Tensor field = gaussian_blur(noise, sigma);
  float lo = field[0], hi = field[0];
  for (std::int64_t i = 0; i < field.size(); ++i) {
    lo = std::min(lo, field[i]);
    hi = std::max(hi, field[i]);
  }
  float range = hi - lo;
  if (range < 1e-12f) range = 1.0f;
  for (std::int64_t i = 0; i < field.size(); ++i) field[i] = (field[i] - lo) / range;
  return field;
}

}  // namespace

Manifest generate_synthetic(const SynthConfig& cfg, const std::string& out_dir) {
  require(cfg.count >= 1, "config", "synthetic sample count must be >= 1");
  require(is_power_of_two(cfg.size), "config", "synthetic resolution must be a power of two");
  require(cfg.channels >= 4, "config",
          "synthetic generator needs >= 4 channels (prefire_mask, wind_x, wind_y, elevation)");
  require(cfg.uncertain_frac >= 0.0f && cfg.uncertain_frac < 0.5f, "config",
          "uncertain_frac out of range");
  fs::create_directories(out_dir);

  const int n = cfg.size;
  Manifest m;
  m.channels = cfg.channels;
  m.resolution = n;
  m.roles = {"prefire_mask", "wind_x", "wind_y", "elevation"};
  for (int c = 4; c < cfg.channels; ++c) m.roles.push_back("env_" + std::to_string(c - 4));

  for (int s = 0; s < cfg.count; ++s) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    Tensor input({cfg.channels, n, n});

    // wind: constant per-sample vector
    const float angle = uniform_real(rng, 0.0f, 6.2831853f);
    const float speed = uniform_real(rng, 0.3f, 1.0f);
    const float wx = speed * std::cos(angle), wy = speed * std::sin(angle);

    // pre-fire ellipse
    const float cx = uniform_real(rng, 0.3f, 0.7f) * n;
    const float cy = uniform_real(rng, 0.3f, 0.7f) * n;
    const float rx = uniform_real(rng, n / 10.0f, n / 5.0f);
    const float ry = uniform_real(rng, n / 10.0f, n / 5.0f);
    const float rot = uniform_real(rng, 0.0f, 3.1415927f);
    std::vector<std::uint8_t> fire(static_cast<std::size_t>(n) * n, 0);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        float dx = x + 0.5f - cx, dy = y + 0.5f - cy;
        float u = dx * std::cos(rot) + dy * std::sin(rot);
        float v = -dx * std::sin(rot) + dy * std::cos(rot);
        if ((u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0f)
          fire[static_cast<std::size_t>(y) * n + x] = 1;
      }
    }
    std::vector<std::uint8_t> prefire = fire;

    // wind-biased synchronous dilation; growth only ever adds pixels
    const float wnorm = std::sqrt(wx * wx + wy * wy);
    for (int step = 0; step < cfg.growth_steps; ++step) {
      std::vector<std::uint8_t> next = fire;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          if (fire[static_cast<std::size_t>(y) * n + x]) continue;
          float best = -2.0f;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dx == 0 && dy == 0) continue;
              int sy = y - dy, sx = x - dx;  // burning source at (sy,sx), spread dir (dx,dy)
              if (sy < 0 || sy >= n || sx < 0 || sx >= n) continue;
              if (!fire[static_cast<std::size_t>(sy) * n + sx]) continue;
              float dn = std::sqrt(static_cast<float>(dx * dx + dy * dy));
              float align = wnorm > 1e-6f ? (dx * wx + dy * wy) / (dn * wnorm) : 0.0f;
              best = std::max(best, align);
            }
          }
          if (best < -1.5f) continue;  // no burning neighbor
          float p = 0.35f + cfg.wind_bias * 0.5f * std::max(0.0f, best);
          if (uniform_real(rng, 0.0f, 1.0f) < p)
            next[static_cast<std::size_t>(y) * n + x] = 1;
        }
      }
      fire.swap(next);
    }

    Tensor target({1, n, n});
    for (std::int64_t i = 0; i < target.size(); ++i) target[i] = fire[static_cast<std::size_t>(i)];

    // mark a fixed count of target pixels uncertain
    const int n_unc = static_cast<int>(std::lround(cfg.uncertain_frac * n * n));
    std::vector<std::int64_t> pix(static_cast<std::size_t>(n) * n);
    std::iota(pix.begin(), pix.end(), 0);
    for (int i = 0; i < n_unc; ++i) {
      int j = uniform_int(rng, i, static_cast<int>(pix.size()) - 1);
      std::swap(pix[static_cast<std::size_t>(i)], pix[static_cast<std::size_t>(j)]);
      target[pix[static_cast<std::size_t>(i)]] = -1.0f;
    }

    // channels: prefire mask, wind, terrain, extra smooth-noise fields
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n) * n; ++i)
      input[i] = prefire[static_cast<std::size_t>(i)];
    {
      const std::int64_t plane = static_cast<std::int64_t>(n) * n;
      for (std::int64_t i = 0; i < plane; ++i) input[plane + i] = wx;
      for (std::int64_t i = 0; i < plane; ++i) input[2 * plane + i] = wy;
      Tensor elev = smooth_noise_field(n, n / 16.0f, rng);
      for (std::int64_t i = 0; i < plane; ++i) input[3 * plane + i] = elev[i];
      for (int c = 4; c < cfg.channels; ++c) {
        Tensor env = smooth_noise_field(n, n / 8.0f, rng);
        for (std::int64_t i = 0; i < plane; ++i)
          input[static_cast<std::int64_t>(c) * plane + i] = env[i];
      }
    }

    char name[64];
    std::snprintf(name, sizeof(name), "input_%04d.tf", s);
    std::string input_name = name;
    std::snprintf(name, sizeof(name), "target_%04d.tf", s);
    std::string target_name = name;
    write_tensor((fs::path(out_dir) / input_name).string(), input);
    write_tensor((fs::path(out_dir) / target_name).string(), target);
    m.samples.push_back({input_name, target_name, Split::kTrain});
  }

  std::vector<Split> splits = split_dataset(static_cast<std::size_t>(cfg.count), cfg.seed);
  for (std::size_t i = 0; i < splits.size(); ++i) m.samples[i].split = splits[i];
  m.base_dir = out_dir;
  write_manifest((fs::path(out_dir) / "manifest.txt").string(), m);
  return m;
}

bool role_is_smoothed(const std::string& role) {
  return role == "prefire_mask" || role == "wind_x" || role == "wind_y";
}

bool role_is_mask_like(const std::string& role) {
  return role == "prefire_mask" || role.rfind("smoothed_", 0) == 0;
}

int effective_channels(const Manifest& m, const PreprocessConfig& prep) {
  int c = m.channels;
  if (prep.smooth_mode == PreprocessConfig::SmoothMode::kAppend)
    for (const auto& r : m.roles)
      if (role_is_smoothed(r)) ++c;
  return c;
}

std::vector<ChannelStat> compute_norm_stats(const Manifest& m, const PreprocessConfig& prep) {
  const int c_eff = effective_channels(m, prep);
  std::vector<ChannelStat> stats(static_cast<std::size_t>(c_eff));
  std::vector<std::string> eff_roles = m.roles;
  if (prep.smooth_mode == PreprocessConfig::SmoothMode::kAppend)
    for (const auto& r : m.roles)
      if (role_is_smoothed(r)) eff_roles.push_back("smoothed_" + r);

  std::vector<double> sum(static_cast<std::size_t>(c_eff), 0.0);
  std::vector<double> sq(static_cast<std::size_t>(c_eff), 0.0);
  std::int64_t count = 0;
  for (std::size_t i : m.split_indices(Split::kTrain)) {
    Tensor x = read_tensor((fs::path(m.base_dir) / m.samples[i].input_path).string());
    require(x.rank() == 3 && x.extent(0) == m.channels, "data",
            "sample " + m.samples[i].input_path + " does not match manifest channels");
    const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
    count += plane;
    for (int c = 0; c < m.channels; ++c)
      for (std::int64_t j = 0; j < plane; ++j) {
        double v = x[static_cast<std::int64_t>(c) * plane + j];
        sum[static_cast<std::size_t>(c)] += v;
        sq[static_cast<std::size_t>(c)] += v * v;
      }
  }
  require(count > 0, "data", "normalization stats need a nonempty training split");
  for (int c = 0; c < c_eff; ++c) {
    ChannelStat& s = stats[static_cast<std::size_t>(c)];
    s.exempt = role_is_mask_like(eff_roles[static_cast<std::size_t>(c)]);
    if (c >= m.channels || s.exempt) continue;  // appended maps keep identity stats
    s.mean = sum[static_cast<std::size_t>(c)] / count;
    double var = sq[static_cast<std::size_t>(c)] / count - s.mean * s.mean;
    s.std = std::sqrt(std::max(var, 0.0));
    if (s.std < 1e-6) s.std = 1e-6;
  }
  return stats;
}

void load_sample(const Manifest& m, std::size_t index, std::uint32_t seed,
                 std::uint64_t epoch, const PreprocessConfig& prep,
                 const std::vector<ChannelStat>& stats, Tensor& x, Tensor& target) {
  require(index < m.samples.size(), "data", "sample index out of range");
  const SampleRecord& rec = m.samples[index];
  Tensor raw, tgt;
  try {
    raw = read_tensor((fs::path(m.base_dir) / rec.input_path).string());
    tgt = read_tensor((fs::path(m.base_dir) / rec.target_path).string());
  } catch (const Error& e) {
    throw Error(e.code(), "sample " + rec.input_path + ": " + e.what());
  }
  require(raw.rank() == 3 && raw.extent(0) == m.channels && raw.extent(1) == m.resolution &&
              raw.extent(2) == m.resolution,
          "data", "sample " + rec.input_path + " shape does not match manifest");
  require(tgt.rank() == 3 && tgt.extent(0) == 1 && tgt.extent(1) == m.resolution &&
              tgt.extent(2) == m.resolution,
          "data", "target " + rec.target_path + " shape does not match manifest");

  const int n = m.resolution;
  const std::int64_t plane = static_cast<std::int64_t>(n) * n;
  Rng rng(derive_seed(seed, epoch, index));

  // margin crop enriches the pre-fire mask channel
  int prefire = m.role_index("prefire_mask");
  if (prep.margin_crop && prefire >= 0) {
    Tensor ch({n, n});
    std::copy(raw.data() + prefire * plane, raw.data() + (prefire + 1) * plane, ch.data());
    Tensor cropped = random_margin_crop(ch, prep.margin, rng);
    std::copy(cropped.data(), cropped.data() + plane, raw.data() + prefire * plane);
  }

  // Gaussian-mixture smoothing of the pre-fire mask and wind channels
  std::vector<Tensor> appended;
  if (prep.smooth_mode != PreprocessConfig::SmoothMode::kOff) {
    for (int c = 0; c < m.channels; ++c) {
      if (!role_is_smoothed(m.roles[static_cast<std::size_t>(c)])) continue;
      Tensor ch({n, n});
      std::copy(raw.data() + c * plane, raw.data() + (c + 1) * plane, ch.data());
      Tensor smooth = gaussian_mixture_smooth(ch, prep.smoothing);
      if (prep.smooth_mode == PreprocessConfig::SmoothMode::kReplace)
        std::copy(smooth.data(), smooth.data() + plane, raw.data() + c * plane);
      else
        appended.push_back(std::move(smooth));
    }
  }

  const int c_eff = m.channels + static_cast<int>(appended.size());
  x = Tensor({c_eff, n, n});
  std::copy(raw.data(), raw.data() + raw.size(), x.data());
  for (std::size_t a = 0; a < appended.size(); ++a)
    std::copy(appended[a].data(), appended[a].data() + plane,
              x.data() + (m.channels + static_cast<std::int64_t>(a)) * plane);

  normalize_channels(x, stats);
  target = std::move(tgt);
}

std::vector<Batch> load_batches(const Manifest& m, Split split, int batch_size,
                                std::uint32_t seed, std::uint64_t epoch,
                                const PreprocessConfig& prep,
                                const std::vector<ChannelStat>& stats, bool shuffle,
                                bool augment) {
  require(batch_size >= 1, "config", "batch_size must be >= 1");
  std::vector<std::size_t> idx = m.split_indices(split);
  require(!idx.empty(), "data", "split '" + split_name(split) + "' is empty");
  if (shuffle) {
    Rng rng(derive_seed(seed, epoch, 0x575ffull));
    std::shuffle(idx.begin(), idx.end(), rng);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
    const int b = static_cast<int>(end - start);
    Batch batch;
    batch.sample_indices.assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                idx.begin() + static_cast<std::ptrdiff_t>(end));
    for (int j = 0; j < b; ++j) {
      Tensor x, tgt;
      std::size_t si = batch.sample_indices[static_cast<std::size_t>(j)];
      load_sample(m, si, seed, epoch, prep, stats, x, tgt);
      if (augment) {
        Rng rng(derive_seed(seed, epoch ^ 0xf11f5ull, si));
        augment_flip(x, tgt, rng);
      }
      if (j == 0) {
        batch.x = Tensor({b, x.extent(0), x.extent(1), x.extent(2)});
        batch.target = Tensor({b, 1, tgt.extent(1), tgt.extent(2)});
      }
      std::copy(x.data(), x.data() + x.size(), batch.x.data() + static_cast<std::int64_t>(j) * x.size());
      std::copy(tgt.data(), tgt.data() + tgt.size(),
                batch.target.data() + static_cast<std::int64_t>(j) * tgt.size());
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace tdseg
