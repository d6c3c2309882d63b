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

// Acceptance checks. Prints one "criterion N: PASS|FAIL" line per requested criterion
// and exits non-zero when any of them fails.

#include "ncfl/bench.hpp"
#include "ncfl/entropy.hpp"
#include "ncfl/flow.hpp"
#include "ncfl/pipeline.hpp"
#include "ncfl/trainer.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ncfl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

torch::Tensor scalar(double v) { return torch::full({1}, v, torch::kFloat64); }

// 1. Quantizer grid membership, error bound and the tie case.
Verdict quantizer() {
  torch::manual_seed(101);
  const int64_t n = 100000;
  auto e = torch::rand({n}, torch::kFloat64) * 20 - 10;
  auto mu = torch::rand({n}, torch::kFloat64) * 4 - 2;
  auto sigma = torch::rand({n}, torch::kFloat64) * 3 + 0.01;
  auto q = torch::rand({n}, torch::kFloat64) * 1.99 + 0.01;
  auto e_hat = quantize({e, false}, {mu, sigma, q}).data;
  auto r = (e_hat - mu) / q;
  const double grid_err = (r - round_half_away(r)).abs().max().item<double>();
  const bool bounded = ((e_hat - e).abs() <= q / 2 + 1e-6).all().item<bool>();
  const double tie = quantize({scalar(3.7), false}, {scalar(0.2), scalar(1), scalar(1)}).data.item<double>();
  return {grid_err <= 1e-5 && bounded && tie == 4.2,
          format("grid err %.2e, |e_hat-e| <= q/2: %s, tie 3.7 -> %.17g", grid_err, bounded ? "yes" : "no", tie)};
}

// 2. Bin probabilities against closed-form CDF differences; truncated pmf mass.
Verdict likelihood() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> umu(-2, 2), us(0.05, 3), uq(0.05, 2);
  std::uniform_int_distribution<int> uk(-20, 20);
  double max_err = 0;
  for (int i = 0; i < 10000; ++i) {
    const double mu = umu(rng), s = us(rng), q = uq(rng), e_hat = mu + uk(rng) * q;
    const double expected = std::max(oracle::bin_mass(e_hat, mu, s, q), kMinBinMass);
    const double got = bin_probability({scalar(e_hat), true}, {scalar(mu), scalar(s), scalar(q)}).item<double>();
    max_err = std::max(max_err, std::abs(got - expected));
  }
  auto mass = [](double e_hat) {
    return bin_probability({scalar(e_hat), true}, {scalar(0), scalar(1), scalar(1)}).item<double>();
  };
  const double center = mass(0), tail = mass(10);
  double worst_sum = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double mu = umu(rng), s = us(rng) + 0.05, q = uq(rng) + 0.05;
    const auto big_k = static_cast<int64_t>(std::ceil(std::log(1e9) * s / q));
    auto grid = mu + torch::arange(-big_k, big_k + 1, torch::kFloat64) * q;
    auto pmf = laplace_cdf(grid + q / 2, scalar(mu), scalar(s)) - laplace_cdf(grid - q / 2, scalar(mu), scalar(s));
    worst_sum = std::max(worst_sum, std::abs(pmf.sum().item<double>() - 1));
  }
  const bool pass = max_err <= 1e-9 && std::abs(center - 0.393469) < 5e-7 && std::abs(tail - 2.366e-5) < 5e-9 &&
                    worst_sum <= 1e-6;
  return {pass, format("max |P - oracle| %.2e, P(0)=%.6f, P(10)=%.4e, |sum-1| %.2e", max_err, center, tail,
                       worst_sum)};
}

// 3. Mean cross-entropy of exact Laplace samples against the discretized entropy.
Verdict entropy_oracle() {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(303);
  const int64_t n = 1000000;
  auto u = torch::rand({n}, gen, torch::kFloat64) - 0.5;
  auto x = -torch::sign(u) * torch::log1p(-2 * u.abs());
  auto zeros = torch::zeros({n}, torch::kFloat64), ones = torch::ones({n}, torch::kFloat64);
  auto e_hat = quantize({x, false}, {zeros, ones, ones});
  const double ce = cross_entropy_bits(e_hat, {zeros, ones, ones}).item<double>();
  const double h = oracle::discretized_entropy(1.0, 1.0);
  const double rel = std::abs(ce - h) / h;
  return {rel <= 0.01, format("CE %.5f bits vs oracle %.5f bits (rel %.2e)", ce, h, rel)};
}

// 4. Autograd gradients of CE with respect to mu, sigma and q against central differences.
Verdict gradients() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ue(-3, 3), umu(-1, 1), us(0.2, 2), uq(0.2, 1.5);
  const double h = 1e-4;
  double worst = 0;
  int checked = 0;
  while (checked < 100) {
    const double e = ue(rng), mu = umu(rng), s = us(rng), q = uq(rng);
    const double r = (e - mu) / q;
    if (std::abs(r - std::floor(r) - 0.5) <= 0.05) continue;
    const double e_hat = oracle::quantize(e, mu, q);
    auto ce = [&](double m, double sg, double st) { return -std::log2(oracle::bin_mass(e_hat, m, sg, st)); };
    auto tmu = scalar(mu).requires_grad_(), ts = scalar(s).requires_grad_(), tq = scalar(q).requires_grad_();
    cross_entropy_bits({scalar(e_hat), true}, {tmu, ts, tq}).backward();
    const double fd[3] = {(ce(mu + h, s, q) - ce(mu - h, s, q)) / (2 * h),
                          (ce(mu, s + h, q) - ce(mu, s - h, q)) / (2 * h),
                          (ce(mu, s, q + h) - ce(mu, s, q - h)) / (2 * h)};
    const double an[3] = {tmu.grad().item<double>(), ts.grad().item<double>(), tq.grad().item<double>()};
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(an[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-8));
    ++checked;
  }
  return {worst < 1e-3, format("max relative error %.2e over %d points", worst, checked)};
}

// 5. Probability that two latents within distance d share a code.
Verdict collisions() {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(505);
  const int64_t n = 1000000;
  const double q = 0.7, mu = 0.1;
  bool pass = true;
  std::string detail;
  for (double ratio : {0.25, 0.5, 1.0}) {
    const double d = ratio * q;
    auto e = mu + (torch::rand({n}, gen, torch::kFloat64) - 0.5) * q;
    auto delta = (torch::rand({n}, gen, torch::kFloat64) * 2 - 1) * d;
    PriorParams p{torch::full({n}, mu, torch::kFloat64), torch::ones({n}, torch::kFloat64),
                  torch::full({n}, q, torch::kFloat64)};
    auto a = quantize({e, false}, p).data, b = quantize({e + delta, false}, p).data;
    const double rate = (a == b).to(torch::kFloat64).mean().item<double>();
    const double expected = 1 - d / (2 * q);
    pass = pass && std::abs(rate - expected) <= 0.01;
    detail += format("d/q=%.2f: %.4f vs %.4f; ", ratio, rate, expected);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// 6. Identity, integer and half-pixel warps.
Verdict warp_exactness() {
  const int64_t h = 24, w = 24, m = 3;
  auto ramp_x = torch::arange(w, torch::kFloat32).view({1, 1, 1, w}).expand({1, 1, h, w}).contiguous();
  auto ramp_y = torch::arange(h, torch::kFloat32).view({1, 1, h, 1}).expand({1, 1, h, w}).contiguous();
  auto flow = [&](double dx, double dy) {
    auto f = torch::empty({1, 2, h, w});
    f.select(1, 0).fill_(dx);
    f.select(1, 1).fill_(dy);
    return f;
  };
  auto inner = [&](const torch::Tensor& t) { return t.slice(2, m, h - m).slice(3, m, w - m); };
  torch::manual_seed(606);
  auto x = torch::randn({2, 7, h, w});
  const bool identity = torch::equal(warp(x, torch::zeros({2, 2, h, w})), x);
  double worst = 0;
  for (double s : {1.0, -2.0, 0.5, -1.5}) {
    worst = std::max(worst, (inner(warp(ramp_x, flow(s, 0))) - inner(ramp_x + s)).abs().max().item<double>());
    worst = std::max(worst, (inner(warp(ramp_y, flow(0, s))) - inner(ramp_y + s)).abs().max().item<double>());
  }
  return {identity && worst <= 1e-6, format("identity bit-equal: %s, max shift error %.2e", identity ? "yes" : "no",
                                            worst)};
}

// 10. Perturbing frame t+1 leaves the uni-directional output at t unchanged.
Verdict causality() {
  torch::manual_seed(1010);
  NcflModel model(preset_config("desk"));
  {
    torch::NoGradGuard guard;
    for (auto& p : model->parameters()) p.add_(torch::randn_like(p) * 0.05);
  }
  torch::NoGradGuard guard;
  const int64_t frames = 6;
  auto clip = torch::rand({1, frames, 3, 32, 32});
  auto base = model->run(clip).outputs;
  bool unchanged = true, responsive = true;
  for (int64_t t = 0; t + 1 < frames; ++t) {
    auto perturbed = clip.clone();
    perturbed.select(1, t + 1).add_(torch::randn({1, 3, 32, 32}) * 0.2);
    auto out = model->run(perturbed).outputs;
    for (int64_t s = 0; s <= t; ++s) unchanged = unchanged && torch::equal(out.select(1, s), base.select(1, s));
    responsive = responsive && !torch::equal(out.select(1, t + 1), base.select(1, t + 1));
  }
  return {unchanged && responsive, format("outputs up to t bit-unchanged: %s, frame t+1 changes: %s",
                                          unchanged ? "yes" : "no", responsive ? "yes" : "no")};
}

// Training criteria share trained models across 7, 8 and 9.
struct Run {
  NcflModel model{nullptr};
  std::vector<MetricsRecord> history;
  double seconds = 0;
  double test_psnr = 0;
  double input_psnr = 0;
};

class TrainingSuite {
 public:
  TrainingSuite(ModelConfig base, fs::path work, std::vector<uint64_t> seeds, bool verbose)
      : base_(std::move(base)), work_(std::move(work)), seeds_(std::move(seeds)), verbose_(verbose) {
    pairs_ = make_eval_pairs(make_heldout_clips(base_), base_.eval_sigma, kEvalNoiseSeed);
  }

  Run& get(const std::string& variant, uint64_t seed) {
    const auto key = variant + "/" + std::to_string(seed);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    auto config = apply_variant(base_, variant);
    config.seed = seed;
    TrainOptions options;
    options.out_dir = work_ / (variant + "_s" + std::to_string(seed));
    options.verbose = verbose_;
    std::printf("  training %s seed %llu ...\n", variant.c_str(), static_cast<unsigned long long>(seed));
    std::fflush(stdout);
    auto result = train_two_stage(config, make_training_set(config), options);
    Run run{result.model, result.history, result.seconds};
    auto row = evaluate(run.model, pairs_, variant);
    run.test_psnr = row.mean_psnr;
    run.input_psnr = row.mean_input_psnr;
    std::printf("  %s seed %llu: %.1f s, held-out PSNR %.3f dB (input %.3f dB)\n", variant.c_str(),
                static_cast<unsigned long long>(seed), run.seconds, run.test_psnr, run.input_psnr);
    std::fflush(stdout);
    return runs_.emplace(key, std::move(run)).first->second;
  }

  const ModelConfig& base() const { return base_; }
  const std::vector<uint64_t>& seeds() const { return seeds_; }
  const std::vector<ClipPair>& pairs() const { return pairs_; }
  const fs::path& work() const { return work_; }
  double train_seconds() const {
    double total = 0;
    for (const auto& [key, run] : runs_) total += run.seconds;
    return total;
  }

 private:
  ModelConfig base_;
  fs::path work_;
  std::vector<uint64_t> seeds_;
  bool verbose_;
  std::vector<ClipPair> pairs_;
  std::map<std::string, Run> runs_;
};

bool history_equal(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b, size_t n) {
  if (a.size() < n || b.size() < n) return false;
  for (size_t i = 0; i < n; ++i) {
    if (a[i].to_json() != b[i].to_json()) return false;
  }
  return true;
}

// 7. Desk training smoke test.
Verdict desk_training(TrainingSuite& suite) {
  const uint64_t seed = suite.seeds().front();
  auto& run = suite.get("full", seed);
  const double gain = run.test_psnr - run.input_psnr;
  bool finite = true;
  for (const auto& r : run.history) finite = finite && std::isfinite(r.loss) && std::isfinite(r.ce_bits);

  // Replay the opening of the same run; the schedule depends only on the config.
  const int64_t replay_iters = std::min<int64_t>(100, suite.base().total_iters);
  auto config = apply_variant(suite.base(), "full");
  config.seed = seed;
  TrainOptions options;
  options.stop_after = replay_iters;
  auto replay = train_two_stage(config, make_training_set(config), options);
  const bool replayed = history_equal(run.history, replay.history, static_cast<size_t>(replay_iters));

  const size_t k = std::min<size_t>(100, run.history.size() / 2);
  double head = 0, tail = 0;
  for (size_t i = 0; i < k; ++i) {
    head += run.history[i].l2 / k;
    tail += run.history[run.history.size() - 1 - i].l2 / k;
  }
  std::printf("  info: mean L2 over the first %zu iterations %.6f, last %zu %.6f\n", k, head, k, tail);
  auto median = evaluate_median(suite.pairs(), 3);
  std::printf("  info: median 3x3 held-out PSNR %.3f dB, model %.3f dB\n", median.mean_psnr, run.test_psnr);

  const bool fast = run.seconds < 20 * 60;
  return {gain >= 2.0 && finite && replayed && fast,
          format("held-out %.3f dB vs noisy %.3f dB (gain %.3f dB), finite losses: %s, replay of %lld "
                 "iterations identical: %s, training %.1f s",
                 run.test_psnr, run.input_psnr, gain, finite ? "yes" : "no", static_cast<long long>(replay_iters),
                 replayed ? "yes" : "no", run.seconds)};
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 8. Median-over-seeds ordering of full vs ncfl_noq vs the plain recurrent baseline.
Verdict ablation_direction(TrainingSuite& suite, Clock::time_point started) {
  EvalReport report;
  report.sigma = suite.base().eval_sigma;
  report.seeds = suite.seeds();
  std::map<std::string, double> medians;
  for (const std::string variant : {"full", "ncfl_noq", "m_a"}) {
    std::vector<double> values;
    for (auto seed : suite.seeds()) {
      auto& run = suite.get(variant, seed);
      values.push_back(run.test_psnr);
      VariantRow row;
      row.variant = variant;
      row.seed = seed;
      row.mean_psnr = run.test_psnr;
      row.mean_input_psnr = run.input_psnr;
      report.rows.push_back(row);
    }
    medians[variant] = median_of(values);
  }
  write_report(report.to_json(), report.to_csv(), suite.work(), "ablation");
  const double elapsed = seconds_since(started);
  const bool pass = medians["full"] >= medians["ncfl_noq"] && medians["full"] >= medians["m_a"] &&
                    elapsed < 2 * 3600;
  return {pass, format("median PSNR full %.3f, ncfl_noq %.3f, m_a %.3f dB; elapsed %.0f s", medians["full"],
                       medians["ncfl_noq"], medians["m_a"], elapsed)};
}

// 9. Refined features vary less across noise draws than warped features.
Verdict robustness(TrainingSuite& suite) {
  const auto clips = make_heldout_clips(suite.base());
  int wins = 0;
  std::string detail;
  for (auto seed : suite.seeds()) {
    auto& run = suite.get("full", seed);
    double warped = 0, refined = 0;
    for (size_t i = 0; i < clips.size(); ++i) {
      auto r = robustness_report(run.model, clips[i], suite.base().eval_sigma, 4, derive_seed(seed, 9, i));
      warped += *r.warped_pairwise / clips.size();
      refined += *r.refined_pairwise / clips.size();
    }
    wins += refined < warped;
    detail += format("seed %llu: refined %.4f vs warped %.4f; ", static_cast<unsigned long long>(seed), refined,
                     warped);
  }
  detail += format("%d of %zu seeds", wins, suite.seeds().size());
  return {wins >= 2, detail};
}

std::vector<int> parse_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string criteria_text = "1,2,3,4,5,6,7,8,9,10";
  std::string work = (fs::temp_directory_path() / "ncfl_acceptance").string();
  std::string config_spec = "desk";
  std::vector<uint64_t> seeds{0, 1, 2};
  bool verbose = false;
  app.add_option("--criteria", criteria_text, "comma-separated criterion numbers");
  app.add_option("--work", work, "directory for training logs and reports");
  app.add_option("--config", config_spec, "preset or config file for criteria 7-9");
  app.add_option("--seeds", seeds, "training seeds for criteria 7-9")->expected(3, 3);
  app.add_flag("--verbose", verbose, "print training progress");
  CLI11_PARSE(app, argc, argv);

  auto base = config_spec == "desk" || config_spec == "paper" ? preset_config(config_spec) : load_config(config_spec);
  base.eval_sigma = 25;
  std::unique_ptr<TrainingSuite> suite;
  const auto started = Clock::now();
  auto training = [&]() -> TrainingSuite& {
    if (!suite) suite = std::make_unique<TrainingSuite>(base, work, seeds, verbose);
    return *suite;
  };

  const std::map<int, std::function<Verdict()>> checks{
      {1, quantizer},
      {2, likelihood},
      {3, entropy_oracle},
      {4, gradients},
      {5, collisions},
      {6, warp_exactness},
      {7, [&] { return desk_training(training()); }},
      {8, [&] { return ablation_direction(training(), started); }},
      {9, [&] { return robustness(training()); }},
      {10, causality},
  };
  const std::map<int, double> budgets{{1, 10}, {2, 10}, {3, 60}, {4, 60}, {5, 60}, {6, 10}, {10, 10}};

  int failures = 0;
  for (int id : parse_list(criteria_text)) {
    auto it = checks.find(id);
    if (it == checks.end()) {
      std::printf("criterion %d: FAIL unknown criterion\n", id);
      ++failures;
      continue;
    }
    const auto start = Clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(start);
    auto budget = budgets.find(id);
    if (budget != budgets.end() && secs >= budget->second) {
      v.pass = false;
      v.detail += format(" (over the %.0f s budget)", budget->second);
    }
    std::printf("criterion %d: %s %s [%.2f s]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
