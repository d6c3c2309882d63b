// Copyright 2026 The NCFL Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ncfl/bench.hpp"

#include "ncfl/image_io.hpp"
#include "ncfl/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ncfl {
namespace fs = std::filesystem;

namespace {

enum : uint64_t { kStreamEvalNoise = 7, kStreamRobustNoise = 11 };

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

torch::Tensor gaussian_window() {
  auto x = torch::arange(kSsimWindow, torch::kFloat64) - (kSsimWindow - 1) / 2.0;
  auto g = torch::exp(-x.square() / (2.0 * kSsimSigma * kSsimSigma));
  g = g / g.sum();
  return torch::outer(g, g).reshape({1, 1, kSsimWindow, kSsimWindow});
}

double rms(const torch::Tensor& a, const torch::Tensor& b) {
  return (a - b).square().mean().sqrt().item<double>();
}

double mean_rms(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  double sum = 0;
  for (size_t t = 0; t < a.size(); ++t) sum += rms(a[t], b[t]);
  return sum / static_cast<double>(a.size());
}

struct ClipFeatures {
  std::vector<torch::Tensor> warped;
  std::vector<torch::Tensor> refined;
};

ClipFeatures trace_features(NcflModel& model, const torch::Tensor& frames) {
  torch::NoGradGuard guard;
  auto run = model->run(frames.unsqueeze(0), true, true);
  ClipFeatures out;
  for (size_t t = 1; t < run.traces.size(); ++t) {
    out.warped.push_back(run.traces[t].warped.data);
    out.refined.push_back(run.traces[t].refined.data);
  }
  return out;
}

double parse_number(const std::string& text) {
  size_t used = 0;
  double value = 0;
  try {
    const auto slash = text.find('/');
    if (slash == std::string::npos) {
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      const auto num_text = text.substr(0, slash), den_text = text.substr(slash + 1);
      const double num = std::stod(num_text, &used);
      if (used != num_text.size()) throw std::invalid_argument(text);
      const double den = std::stod(den_text, &used);
      if (used != den_text.size() || den == 0) throw std::invalid_argument(text);
      value = num / den;
    }
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad number '" + text + "'");
  }
  if (!std::isfinite(value) || value < 0) throw std::invalid_argument("bad number '" + text + "'");
  return value;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (auto& ch : out) {
    if (ch == '/' || ch == '=' || ch == ' ') ch = '_';
  }
  return out;
}

}  // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.defined() && b.defined(), "psnr: undefined input");
  if (a.sizes() != b.sizes()) throw InvariantError("psnr: shape mismatch");
  const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).square().mean().item<double>();
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.defined() && b.defined(), "ssim: undefined input");
  if (a.sizes() != b.sizes()) throw InvariantError("ssim: shape mismatch");
  require(a.dim() >= 2, "ssim: expected [..., H, W]");
  const int64_t h = a.size(-2), w = a.size(-1);
  if (h < kSsimWindow || w < kSsimWindow) {
    throw InvariantError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                         std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " window");
  }
  auto x = a.to(torch::kFloat64).reshape({-1, 1, h, w});
  auto y = b.to(torch::kFloat64).reshape({-1, 1, h, w});
  const auto window = gaussian_window();
  auto filter = [&](const torch::Tensor& t) { return torch::conv2d(t, window); };
  auto mu_x = filter(x), mu_y = filter(y);
  auto sxx = filter(x * x) - mu_x.square();
  auto syy = filter(y * y) - mu_y.square();
  auto sxy = filter(x * y) - mu_x * mu_y;
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  auto map = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) / ((mu_x.square() + mu_y.square() + c1) * (sxx + syy + c2));
  return map.mean().item<double>();
}

torch::Tensor median_filter(const torch::Tensor& frames, int k) {
  require(frames.defined() && frames.dim() >= 2, "median_filter: expected [..., H, W]");
  if (k != 3 && k != 5) throw InvariantError("median_filter: k must be 3 or 5, got " + std::to_string(k));
  const int64_t h = frames.size(-2), w = frames.size(-1), pad = k / 2;
  require(h > pad && w > pad, "median_filter: image too small for reflect padding");
  auto x = frames.reshape({-1, 1, h, w});
  auto padded = torch::reflection_pad2d(x, {pad, pad, pad, pad});
  auto windows = padded.unfold(2, k, 1).unfold(3, k, 1).reshape({x.size(0), 1, h, w, k * k});
  auto med = std::get<0>(windows.median(-1));
  return med.reshape(frames.sizes());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : row.clips) {
      clips.push_back({{"id", c.id},
                       {"psnr", c.psnr},
                       {"ssim", c.ssim},
                       {"input_psnr", c.input_psnr},
                       {"input_ssim", c.input_ssim}});
    }
    rows_json.push_back({{"variant", row.variant},
                         {"seed", row.seed},
                         {"fingerprint", row.fingerprint},
                         {"mean_psnr", row.mean_psnr},
                         {"mean_ssim", row.mean_ssim},
                         {"mean_input_psnr", row.mean_input_psnr},
                         {"mean_input_ssim", row.mean_input_ssim},
                         {"clips", clips}});
  }
  return {{"sigma", sigma}, {"seeds", seeds}, {"rows", rows_json}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "variant,seed,fingerprint,clip,psnr,ssim,input_psnr,input_ssim\n";
  for (const auto& row : rows) {
    for (const auto& c : row.clips) {
      out << row.variant << ',' << row.seed << ',' << row.fingerprint << ',' << c.id << ',' << fmt(c.psnr) << ','
          << fmt(c.ssim) << ',' << fmt(c.input_psnr) << ',' << fmt(c.input_ssim) << '\n';
    }
    out << row.variant << ',' << row.seed << ',' << row.fingerprint << ",mean," << fmt(row.mean_psnr) << ','
        << fmt(row.mean_ssim) << ',' << fmt(row.mean_input_psnr) << ',' << fmt(row.mean_input_ssim) << '\n';
  }
  return out.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %6s %10s %8s %11s %9s\n", "variant", "seed", "psnr", "ssim", "input_psnr",
                "input_ssim");
  out << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-16s %6llu %10.4f %8.4f %11.4f %9.4f\n", row.variant.c_str(),
                  static_cast<unsigned long long>(row.seed), row.mean_psnr, row.mean_ssim, row.mean_input_psnr,
                  row.mean_input_ssim);
    out << line;
  }
  return out.str();
}

void write_report(const nlohmann::json& json, const std::string& csv, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  std::ofstream(dir / (stem + ".json")) << json.dump(2) << "\n";
  std::ofstream(dir / (stem + ".csv")) << csv;
}

std::vector<ClipPair> make_eval_pairs(const std::vector<VideoClip>& clean, double sigma_255, uint64_t noise_seed) {
  std::vector<ClipPair> pairs;
  for (size_t i = 0; i < clean.size(); ++i) {
    pairs.push_back(synthesize_awgn(clean[i], sigma_255, derive_seed(noise_seed, kStreamEvalNoise, i)));
  }
  return pairs;
}

namespace {

VariantRow score_rows(const std::string& name, const std::vector<ClipPair>& pairs,
                      const std::function<torch::Tensor(const ClipPair&)>& restore_clip) {
  require(!pairs.empty(), "evaluate: no clips");
  VariantRow row;
  row.variant = name;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto out = restore_clip(p);
    ClipScore s;
    s.id = p.clean.id.empty() ? "clip_" + std::to_string(i) : p.clean.id;
    s.psnr = psnr(out, p.clean.frames);
    s.ssim = ssim(out, p.clean.frames);
    s.input_psnr = psnr(p.degraded.frames, p.clean.frames);
    s.input_ssim = ssim(p.degraded.frames, p.clean.frames);
    row.mean_psnr += s.psnr;
    row.mean_ssim += s.ssim;
    row.mean_input_psnr += s.input_psnr;
    row.mean_input_ssim += s.input_ssim;
    row.clips.push_back(s);
  }
  const double n = static_cast<double>(pairs.size());
  row.mean_psnr /= n;
  row.mean_ssim /= n;
  row.mean_input_psnr /= n;
  row.mean_input_ssim /= n;
  return row;
}

}  // namespace

VariantRow evaluate(NcflModel& model, const std::vector<ClipPair>& pairs, const std::string& name) {
  auto row = score_rows(name, pairs, [&](const ClipPair& p) { return run_clip(p.degraded, model).first.frames; });
  row.seed = model->config().seed;
  row.fingerprint = config_fingerprint(model->config());
  return row;
}

VariantRow evaluate_median(const std::vector<ClipPair>& pairs, int k) {
  return score_rows("median" + std::to_string(k), pairs,
                    [&](const ClipPair& p) { return median_filter(p.degraded.frames, k); });
}

nlohmann::json RobustnessReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"sigma", sigma},
          {"noise_seeds", noise_seeds},
          {"warped_pairwise", opt(warped_pairwise)},
          {"refined_pairwise", opt(refined_pairwise)},
          {"warped_to_clean", warped_to_clean},
          {"refined_to_clean", refined_to_clean},
          {"warped_scale", warped_scale},
          {"refined_scale", refined_scale}};
}

std::string RobustnessReport::to_csv() const {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v, 8) : std::string(); };
  auto ratio = [](const std::optional<double>& v, double scale) {
    return v && scale > 0 ? fmt(*v / scale, 8) : std::string();
  };
  std::ostringstream out;
  out << "features,pairwise,to_clean,scale,pairwise_normalized,to_clean_normalized\n";
  out << "warped," << opt(warped_pairwise) << ',' << fmt(warped_to_clean, 8) << ',' << fmt(warped_scale, 8) << ','
      << ratio(warped_pairwise, warped_scale) << ',' << ratio(warped_to_clean, warped_scale) << '\n';
  out << "refined," << opt(refined_pairwise) << ',' << fmt(refined_to_clean, 8) << ',' << fmt(refined_scale, 8) << ','
      << ratio(refined_pairwise, refined_scale) << ',' << ratio(refined_to_clean, refined_scale) << '\n';
  return out.str();
}

RobustnessReport robustness_report(NcflModel& model, const VideoClip& clean, double sigma_255, int n_seeds,
                                   uint64_t seed) {
  clean.validate();
  require(n_seeds >= 1, "robustness_report: n_seeds must be at least 1");
  require(clean.length() >= 2, "robustness_report: clip needs at least two frames");
  require(sigma_255 >= 0, "robustness_report: sigma must be non-negative");

  RobustnessReport report;
  report.sigma = sigma_255;
  const auto reference = trace_features(model, clean.frames);
  std::vector<ClipFeatures> noisy;
  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t noise_seed = derive_seed(seed, kStreamRobustNoise, static_cast<uint64_t>(s));
    report.noise_seeds.push_back(noise_seed);
    noisy.push_back(trace_features(model, synthesize_awgn(clean, sigma_255, noise_seed).degraded.frames));
  }

  if (n_seeds >= 2) {
    double warped = 0, refined = 0;
    int pairs = 0;
    for (int i = 0; i < n_seeds; ++i) {
      for (int j = i + 1; j < n_seeds; ++j) {
        warped += mean_rms(noisy[i].warped, noisy[j].warped);
        refined += mean_rms(noisy[i].refined, noisy[j].refined);
        ++pairs;
      }
    }
    report.warped_pairwise = warped / pairs;
    report.refined_pairwise = refined / pairs;
  }
  for (const auto& f : noisy) {
    report.warped_to_clean += mean_rms(f.warped, reference.warped) / n_seeds;
    report.refined_to_clean += mean_rms(f.refined, reference.refined) / n_seeds;
  }
  for (size_t t = 0; t < reference.warped.size(); ++t) {
    report.warped_scale += reference.warped[t].square().mean().sqrt().item<double>() / reference.warped.size();
    report.refined_scale += reference.refined[t].square().mean().sqrt().item<double>() / reference.refined.size();
  }
  return report;
}

RobustnessReport robustness_report(const fs::path& checkpoint, const VideoClip& clean, double sigma_255, int n_seeds,
                                   uint64_t seed) {
  auto model = load_checkpoint(checkpoint);
  return robustness_report(model, clean, sigma_255, n_seeds, seed);
}

QmapExport export_qmaps(NcflModel& model, const VideoClip& clip, const fs::path& out_dir,
                        std::optional<int64_t> frame) {
  clip.validate();
  const int64_t t = frame.value_or(clip.length() - 1);
  require(t >= 0 && t < clip.length(), "export_qmaps: frame index out of range");
  ClipRun run;
  {
    torch::NoGradGuard guard;
    run = model->run(clip.frames.slice(0, 0, t + 1).unsqueeze(0), true, true);
  }
  const auto& prior = run.traces[t].prior;
  if (!prior) throw std::runtime_error("export_qmaps: model has no quantization prior (NCFL disabled or replaced)");
  auto q = prior->q[0].contiguous();

  QmapExport result;
  result.frame = t;
  fs::create_directories(out_dir);
  result.container = out_dir / "qmap.ncfl";
  write_tensor(q, result.container);
  for (int64_t c = 0; c < q.size(0); ++c) {
    auto ch = q[c];
    const double lo = ch.min().item<double>(), hi = ch.max().item<double>();
    auto norm = hi > lo ? (ch - lo) / (hi - lo) : torch::zeros_like(ch);
    char name[32];
    std::snprintf(name, sizeof name, "qmap_c%03lld.png", static_cast<long long>(c));
    write_png_gray(norm, out_dir / name);
    result.pngs.push_back(out_dir / name);
  }
  return result;
}

ModelConfig apply_variant(const ModelConfig& base, const std::string& variant) {
  ModelConfig c = base;
  if (variant == "full" || variant == "m_d") {
  } else if (variant == "no_mvr") {
    c.mvr = false;
    c.m_conv = false;
  } else if (variant == "no_ncfl") {
    c.ncfl = false;
    c.n_conv = false;
  } else if (variant == "no_fa") {
    c.fa = false;
  } else if (variant == "ncfl_noq") {
    c.quant_mode = QuantMode::none;
  } else if (variant == "ncfl_fixedq") {
    c.quant_mode = QuantMode::fixed;
    // Same as the adaptive step at initialization.
    if (!(c.fixed_step > 0)) c.fixed_step = 0.125;
  } else if (variant == "m_conv") {
    c.mvr = false;
    c.m_conv = true;
  } else if (variant == "n_conv") {
    c.ncfl = false;
    c.n_conv = true;
  } else if (variant == "baseline" || variant == "m_a") {
    c.mvr = c.ncfl = c.fa = c.m_conv = c.n_conv = false;
  } else if (variant == "m_b") {
    c.ncfl = c.fa = c.m_conv = c.n_conv = false;
    c.mvr = true;
  } else if (variant == "m_c") {
    c.fa = c.m_conv = c.n_conv = false;
    c.mvr = c.ncfl = true;
  } else if (variant == "uni") {
    c.direction = Direction::uni;
  } else if (variant == "bi") {
    c.direction = Direction::bi;
  } else if (variant == "unet") {
    c.restore_variant = RestoreVariant::unet;
  } else if (variant == "wnet") {
    c.restore_variant = RestoreVariant::wnet;
  } else if (variant.rfind("lambda=", 0) == 0) {
    c.lambda_ce = parse_number(variant.substr(7));
  } else {
    throw std::invalid_argument("unknown ablation variant '" + variant + "'");
  }
  c.validate();
  return c;
}

bool is_known_variant(const std::string& variant) {
  try {
    apply_variant(ModelConfig{}, variant);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

EvalReport ablate(const ModelConfig& config, const std::vector<std::string>& variants,
                  const AblationOptions& options) {
  if (variants.empty()) throw std::invalid_argument("ablate: empty variant list");
  std::vector<ModelConfig> configs;
  for (const auto& v : variants) configs.push_back(apply_variant(config, v));
  const auto seeds = options.seeds.empty() ? std::vector<uint64_t>{config.seed} : options.seeds;

  EvalReport report;
  report.sigma = config.eval_sigma;
  report.seeds = seeds;
  const auto pairs = make_eval_pairs(make_heldout_clips(config), config.eval_sigma, kEvalNoiseSeed);
  if (options.include_median) report.rows.push_back(evaluate_median(pairs, 3));

  for (size_t i = 0; i < variants.size(); ++i) {
    for (uint64_t seed : seeds) {
      auto cfg = configs[i];
      cfg.seed = seed;
      TrainOptions train_options;
      if (!options.out_dir.empty()) {
        train_options.out_dir = options.out_dir / sanitize(variants[i]) / ("seed_" + std::to_string(seed));
      }
      train_options.verbose = options.verbose;
      if (options.verbose) std::printf("== variant %s seed %llu\n", variants[i].c_str(), (unsigned long long)seed);
      auto result = train_two_stage(cfg, make_training_set(cfg), train_options);
      if (options.on_trained) options.on_trained(variants[i], seed, result);
      report.rows.push_back(evaluate(result.model, pairs, variants[i]));
    }
  }
  return report;
}

double median_psnr(const EvalReport& report, const std::string& variant) {
  std::vector<double> values;
  for (const auto& row : report.rows) {
    if (row.variant == variant) values.push_back(row.mean_psnr);
  }
  if (values.empty()) throw std::invalid_argument("median_psnr: no rows for variant '" + variant + "'");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace ncfl
