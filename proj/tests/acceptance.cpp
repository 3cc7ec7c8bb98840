// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedcod/fedcod.hpp"
#include "wire_fuzz.hpp"

using namespace fedcod;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fixture(const std::string& name) { return std::string(FEDCOD_FIXTURE_DIR) + "/" + name; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double mean_of(const VariantResult& v, double ClientRoundMetrics::*field) {
  double s = 0;
  for (const auto& r : v.rounds) s += r.mean(field);
  return s / static_cast<double>(v.rounds.size());
}

template <typename F>
double mean_round(const VariantResult& v, F f) {
  double s = 0;
  for (const auto& r : v.rounds) s += f(r);
  return s / static_cast<double>(v.rounds.size());
}

const VariantResult& find(const ExperimentResult& res, const std::string& label) {
  for (const auto& v : res.variants)
    if (v.variant.label == label) return v;
  throw std::runtime_error("variant " + label + " missing from result");
}

ExperimentConfig with_variants(ExperimentConfig cfg, std::vector<VariantSpec> variants) {
  cfg.variants = std::move(variants);
  return cfg;
}

// 1. Encode/decode roundtrip over randomized trials.
Verdict coding_roundtrip() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t ks[] = {1, 2, 4, 8, 16, 32};
  Rng rng(20240601);
  std::uniform_int_distribution<std::size_t> length(1, std::size_t{1} << 16);
  std::normal_distribution<float> value(0.0f, 1.0f);
  double worst = 0.0;
  int undecodable = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = ks[trial % 6];
    ModelVector model;
    model.elements.resize(length(rng));
    for (auto& x : model.elements) x = value(rng) * 10.0f;
    const auto parts = split(model, k);
    DecoderState dec(k);
    for (std::size_t draws = 0; !dec.complete() && draws < 8 * k; ++draws)
      dec.offer(encode(parts, random_coefficients(k, rng)));
    if (!dec.complete() && !dec.relax()) {
      ++undecodable;
      continue;
    }
    const auto got = dec.finish(model.size());
    double mag = 1.0, err = 0.0;
    for (float x : model.elements) mag = std::max(mag, std::abs(static_cast<double>(x)));
    for (std::size_t i = 0; i < model.size(); ++i)
      err = std::max(err, std::abs(static_cast<double>(got.elements[i]) - model.elements[i]));
    worst = std::max(worst, err / mag);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {undecodable == 0 && worst <= 1e-4 && secs < 30.0,
          "1000 trials, worst relative error " + fmt("%.3g", worst) + " (limit 1e-4), " + std::to_string(undecodable) +
              " undecodable, " + fmt("%.1f", secs) + " s (limit 30 s)"};
}

// 2. Aggregates decoded through coded aggregation equal the weighted average.
Verdict agr_correctness(const ExperimentConfig& global) {
  double worst = 0.0;
  int rounds = 0;
  std::string failure;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto cfg = with_variants(global, {VariantSpec::make(Variant::U2AGR), VariantSpec::make(Variant::U3AGR),
                                      VariantSpec::make(Variant::FedCod)});
    cfg.rounds = 1;
    cfg.seed = seed;
    try {
      for (const auto& v : run_experiment(cfg).variants)
        for (const auto& r : v.rounds) {
          worst = std::max(worst, r.aggregate_error);
          ++rounds;
        }
    } catch (const std::exception& e) {
      failure = e.what();
      break;
    }
  }
  return {failure.empty() && rounds == 150 && worst <= 1e-4,
          std::to_string(rounds) + " rounds (50 seeds x u2-agr/u3-agr/fedcod), worst relative error " +
              fmt("%.3g", worst) + " (limit 1e-4)" + (failure.empty() ? "" : ", error: " + failure)};
}

// 3. Wait mode never finishes the upload later than no-wait mode.
Verdict wait_not_slower(const ExperimentConfig& global) {
  int holds = 0;
  double worst = -1e9;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto cfg = with_variants(global, {VariantSpec::make(Variant::U3AGR), VariantSpec::make(Variant::U2AGR)});
    cfg.rounds = 1;
    cfg.seed = seed;
    const auto res = run_experiment(cfg);
    const double wait = res.variants[0].rounds[0].upload_completion;
    const double nowait = res.variants[1].rounds[0].upload_completion;
    worst = std::max(worst, wait - nowait);
    if (wait <= nowait) ++holds;
  }
  return {holds == 100, std::to_string(holds) + "/100 paired seeds with wait <= no-wait upload completion, largest gap " +
                            fmt("%+.4f", worst) + " s"};
}

// 4. Download acceleration on the heterogeneous fixture.
Verdict download_acceleration(const ExperimentResult& res) {
  const auto& base = find(res, "baseline");
  const double b_dl = mean_of(base, &ClientRoundMetrics::t_download);
  const double b_wait = mean_of(base, &ClientRoundMetrics::t_wait);
  const double d2 = mean_of(find(res, "d2-c"), &ClientRoundMetrics::t_download) / b_dl;
  const double d1 = mean_of(find(res, "d1-nc"), &ClientRoundMetrics::t_download) / b_dl;
  const double d1_wait = mean_of(find(res, "d1-nc"), &ClientRoundMetrics::t_wait) / b_wait;
  const bool ok_d2 = d2 <= 0.6;
  const bool ok_d1 = d1 >= 0.85 && d1 <= 1.15;
  const bool ok_wait = d1_wait <= 0.8;
  return {ok_d2 && ok_d1 && ok_wait,
          "d2-c download " + fmt("%.3f", d2) + "x baseline (limit 0.6) " + (ok_d2 ? "ok" : "FAILS") +
              "; d1-nc download " + fmt("%.3f", d1) + "x (band 0.85..1.15) " + (ok_d1 ? "ok" : "FAILS") +
              "; d1-nc wait " + fmt("%.3f", d1_wait) + "x (limit 0.8) " + (ok_wait ? "ok" : "FAILS")};
}

// 5. Server traffic ratios.
Verdict traffic_ratios(const ExperimentResult& res, const ExperimentConfig& cfg) {
  auto egress = [](const RoundMetrics& r) { return static_cast<double>(r.server_egress); };
  auto ingress = [](const RoundMetrics& r) { return static_cast<double>(r.server_ingress); };
  const double nominal = static_cast<double>(cfg.topology.clients().size() * cfg.model_length * sizeof(float));
  const double b_eg = mean_round(find(res, "baseline"), egress);
  const double b_in = mean_round(find(res, "baseline"), ingress);
  const double slack = b_eg / nominal - 1.0;
  const double d2 = mean_round(find(res, "d2-c"), egress) / b_eg;
  const double u3 = mean_round(find(res, "u3-agr"), ingress) / b_in;
  const double fc = mean_round(find(res, "fedcod"), ingress) / b_in;
  const bool ok = slack >= 0.0 && slack < 0.01 && d2 <= 0.5 && u3 <= 0.2 && fc <= 0.2;
  return {ok, "baseline egress n*model + " + fmt("%.4f", slack * 100) + "% headers (limit 1%); d2-c egress " +
                  fmt("%.3f", d2) + "x (limit 0.5); u3-agr ingress " + fmt("%.3f", u3) + "x, fedcod ingress " +
                  fmt("%.3f", fc) + "x (limit 0.2)"};
}

// 6. Adaptive redundancy on a constant network and after a fault.
Verdict adaptive_controller() {
  const auto stable = load_config(fixture("stable.json"));
  const auto res = run_experiment(
      with_variants(stable, {VariantSpec::make(Variant::FedCod), VariantSpec::make(Variant::FedCodAdaptive)}));
  const auto& traj = find(res, "fedcod-adaptive").trajectory;
  bool monotone = true, reached = false;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (i > 0 && traj[i].r > traj[i - 1].r) monotone = false;
    if (traj[i].r == traj[i].r_lb) reached = true;
  }
  auto inter = [](const VariantResult& v) {
    double s = 0;
    for (const auto& r : v.rounds) s += static_cast<double>(r.inter_client_bytes);
    return s;
  };
  const double saving = 1.0 - inter(find(res, "fedcod-adaptive")) / inter(find(res, "fedcod"));
  const bool ok_a = monotone && reached && saving >= 0.05;

  const auto fault_cfg = load_config(fixture("fault.json"));
  std::uint32_t f = 0;
  for (const auto& [key, link] : fault_cfg.topology.links)
    for (const auto& range : link.fault_rounds) f = f == 0 ? range.first : std::min(f, range.first);
  const auto fres = run_experiment(fault_cfg);
  const auto& fv = fres.variants.at(0);
  double pre = 0;
  for (std::uint32_t i = 1; i < f; ++i) pre += fv.rounds[i - 1].duration;
  pre /= static_cast<double>(f - 1);
  const int r_before = fv.trajectory[f - 1].r;
  const int r_after = fv.trajectory[f].r;
  const bool doubled = r_after >= 2 * r_before && r_after > r_before;
  // Recovered: from some round within three after the fault onward, every
  // round up to the third stays within 1.2x of the pre-fault mean.
  bool recovered = false;
  for (std::uint32_t j = f; j <= f + 3 && !recovered; ++j) {
    bool stays = true;
    for (std::uint32_t i = j; i <= f + 3; ++i) stays = stays && fv.rounds[i - 1].duration <= 1.2 * pre;
    recovered = stays;
  }
  double worst_after = 0;
  for (std::uint32_t i = f + 1; i <= f + 3; ++i) worst_after = std::max(worst_after, fv.rounds[i - 1].duration / pre);
  return {ok_a && doubled && recovered,
          "(a) r " + std::string(monotone ? "non-increasing" : "NOT monotone") + ", " +
              (reached ? "reaches r_lb" : "never reaches r_lb") + ", inter-client traffic " +
              fmt("%.1f", saving * 100) + "% below static (need >= 5%); (b) fault at round " + std::to_string(f) +
              ": r " + std::to_string(r_before) + " -> " + std::to_string(r_after) + ", rounds " +
              std::to_string(f + 1) + ".." + std::to_string(f + 3) + " at most " + fmt("%.3f", worst_after) +
              "x pre-fault (limit 1.2)"};
}

// 7. Download time against the partition count.
Verdict k_sweep(const ExperimentConfig& global, double baseline_download) {
  const std::size_t n = global.topology.clients().size();
  const std::vector<std::size_t> ks = {1, 2, 4, 6, 8, 10, 12, 16, 20, 24, 28, 32};
  std::vector<double> t;
  std::string curve;
  for (std::size_t k : ks) {
    auto cfg = with_variants(global, {VariantSpec::make(Variant::D2C)});
    cfg.k = k;
    t.push_back(mean_of(run_experiment(cfg).variants[0], &ClientRoundMetrics::t_download));
    curve += " k=" + std::to_string(k) + ":" + fmt("%.4f", t.back());
  }
  const double first = t[0] / baseline_download;
  bool decreasing = true;
  for (std::size_t i = 1; i < ks.size() && ks[i] <= n; ++i) decreasing = decreasing && t[i] < t[i - 1];
  // Threshold: the first k past which every later point stays within 2% of
  // its time, with at least two later points to show it.
  std::optional<std::size_t> threshold;
  for (std::size_t i = 0; i + 2 < ks.size() && !threshold; ++i) {
    bool flat = true;
    for (std::size_t j = i + 1; j < ks.size(); ++j) flat = flat && std::abs(t[j] / t[i] - 1.0) <= 0.02;
    if (flat) threshold = i;
  }
  const bool ok = std::abs(first - 1.0) <= 0.10 && decreasing && threshold.has_value();
  return {ok, "k=1 at " + fmt("%.3f", first) + "x baseline (band 0.9..1.1), " +
                  (decreasing ? "strictly decreasing" : "NOT strictly decreasing") + " through k=" +
                  std::to_string(n) + ", " +
                  (threshold ? "flat within 2% from k=" + std::to_string(ks[*threshold]) : "no 2% plateau") + ";" +
                  curve};
}

// 8. One faulty client uplink: coded variant completes, baseline stalls.
Verdict fault_tolerance(const ExperimentConfig& global, double nofault_round) {
  const auto cfg = load_config(fixture("faulty_link.json"));
  std::string faulty;
  for (const auto& [key, link] : cfg.topology.links)
    if (!link.fault_rounds.empty()) faulty = cfg.topology.node(link.src).name;
  double ratio = 0;
  std::string fedcod_error;
  try {
    const auto res = run_experiment(with_variants(cfg, {VariantSpec::make(Variant::FedCod)}));
    ratio = mean_round(res.variants[0], [](const RoundMetrics& r) { return r.duration; }) / nofault_round;
  } catch (const std::exception& e) {
    fedcod_error = e.what();
  }
  std::string stalled_on;
  try {
    run_experiment(with_variants(cfg, {VariantSpec::make(Variant::Baseline)}));
  } catch (const StalledRound& e) {
    stalled_on = e.client();
  }
  (void)global;
  const bool ok = fedcod_error.empty() && ratio <= 1.5 && !stalled_on.empty() && stalled_on == faulty;
  return {ok, "fault on " + faulty + "->server: fedcod " +
                  (fedcod_error.empty() ? "completed every round at " + fmt("%.3f", ratio) + "x no-fault round time"
                                        : "failed: " + fedcod_error) +
                  " (limit 1.5), baseline " + (stalled_on.empty() ? "did not stall" : "stalled on " + stalled_on)};
}

// 9. Reruns are byte-identical and every link's counters balance.
Verdict determinism(const ExperimentConfig& global, const ExperimentResult& first) {
  const auto second = run_experiment(global);
  const bool same = metrics_csv(first, global.topology) == metrics_csv(second, global.topology);
  std::size_t links = 0, mismatched = 0;
  for (const auto* res : {&first, &second})
    for (const auto& v : res->variants)
      for (const auto& r : v.rounds) {
        if (r.link_egress != r.link_ingress) ++mismatched;
        links += r.link_egress.size();
        std::uint64_t out = r.server_egress, in = r.server_ingress;
        for (const auto& c : r.clients) {
          out += c.egress_bytes;
          in += c.ingress_bytes;
        }
        if (out != in) ++mismatched;
      }
  return {same && mismatched == 0, std::string(same ? "rerun CSV byte-identical" : "rerun CSV DIFFERS") + ", " +
                                       std::to_string(links) + " link counters checked, " +
                                       std::to_string(mismatched) + " imbalanced"};
}

std::vector<std::uint8_t> parse_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

// 10. Wire codec identity and golden stability.
Verdict wire_codec() {
  std::mt19937_64 rng(7);
  int identical = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto f = fuzz::random_frame(rng);
    const auto bytes = frame_encode(f);
    if (frame_decode(bytes) == f && frame_encode(frame_decode(bytes)) == bytes) ++identical;
  }
  std::ifstream in(std::string(FEDCOD_GOLDEN_DIR) + "/frames.hex");
  std::string line;
  int golden = 0, stable = 0;
  std::map<std::string, std::vector<std::uint8_t>> named;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string name, hex, part;
    ss >> name;
    while (ss >> part) hex += part;
    const auto bytes = parse_hex(hex);
    named[name] = bytes;
    ++golden;
    if (frame_encode(frame_decode(bytes)) == bytes) ++stable;
  }
  const bool ack = frame_encode(control_frame(MsgType::DecodeAck, 1, 3)) == named["decode_ack_r1_o3"];
  return {identical == 1000 && golden > 0 && stable == golden && ack,
          std::to_string(identical) + "/1000 fuzzed frames identical, " + std::to_string(stable) + "/" +
              std::to_string(golden) + " golden frames byte-stable, " +
              (ack ? "freshly encoded control frame matches its golden bytes" : "control frame DIFFERS from golden")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << v.detail << std::endl;
  };

  const auto global = load_config(fixture("global.json"));
  const auto full = run_experiment(global);
  const double base_dl = mean_of(find(full, "baseline"), &ClientRoundMetrics::t_download);
  const double fedcod_round = mean_round(find(full, "fedcod"), [](const RoundMetrics& r) { return r.duration; });

  report(1, coding_roundtrip);
  report(2, [&] { return agr_correctness(global); });
  report(3, [&] { return wait_not_slower(global); });
  report(4, [&] { return download_acceleration(full); });
  report(5, [&] { return traffic_ratios(full, global); });
  report(6, adaptive_controller);
  report(7, [&] { return k_sweep(global, base_dl); });
  report(8, [&] { return fault_tolerance(global, fedcod_round); });
  report(9, [&] { return determinism(global, full); });
  report(10, wire_codec);
  std::cout << (10 - failed) << "/10 criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
