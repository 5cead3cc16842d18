// Copyright 2026 The mcfront Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "mcfront/error.hpp"
#include "mcfront/experiment.hpp"

namespace mcfront::experiment {

namespace {

using mcmodel::InitMode;
using mcmodel::Variant;

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Lookup of (seed, run, split, snr) -> row, with first-appearance orders.
struct Index {
  std::map<std::tuple<std::uint64_t, std::string, std::string, std::string>, const ResultRow*> rows;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> runs;
  std::vector<std::string> snrs;

  explicit Index(const std::vector<ResultRow>& all) {
    for (const auto& r : all) {
      rows[{r.seed, r.run, r.split, r.snr_db}] = &r;
      if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
      if (std::find(runs.begin(), runs.end(), r.run) == runs.end()) runs.push_back(r.run);
      if (r.split == "test" &&
          std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end())
        snrs.push_back(r.snr_db);
    }
    std::sort(seeds.begin(), seeds.end());
  }

  std::optional<double> error(std::uint64_t seed, const std::string& run,
                              const std::string& split = "test",
                              const std::string& snr = "all") const {
    auto it = rows.find({seed, run, split, snr});
    if (it == rows.end()) return std::nullopt;
    return it->second->frame_error;
  }

  bool has_run(const std::string& run) const {
    return std::find(runs.begin(), runs.end(), run) != runs.end();
  }
};

// Runs named esf_bf_m<M>, keyed by M.
std::map<int, std::string> sweep_runs(const Index& index) {
  static const std::regex pattern("esf_bf_m([0-9]+)");
  std::map<int, std::string> out;
  std::smatch m;
  for (const auto& run : index.runs)
    if (std::regex_match(run, m, pattern)) out[std::stoi(m[1].str())] = run;
  return out;
}

std::string seed_prefix(std::uint64_t seed) { return "seed " + std::to_string(seed) + ": "; }

}  // namespace

std::vector<Finding> check_findings(const std::vector<ResultRow>& rows,
                                    const ReportOptions& options) {
  const Index index(rows);
  std::vector<Finding> out;
  auto missing = [](const std::string& run) { return "missing run " + run; };

  {
    Finding f{6, !index.seeds.empty(), ""};
    const std::string esf = mc_tag(Variant::kEsf, InitMode::kBeamformer, options.mics);
    const std::string dsf = mc_tag(Variant::kDsf, InitMode::kBeamformer, options.mics);
    const std::string cat = mc_tag(Variant::kCat, InitMode::kBeamformer, options.mics);
    for (auto seed : index.seeds) {
      std::string detail = seed_prefix(seed);
      bool ok = true;
      const auto e = index.error(seed, esf), d = index.error(seed, dsf), c = index.error(seed, cat),
                 one = index.error(seed, options.single_channel),
                 base = index.error(seed, options.baseline);
      if (!e || !d || !c || !one || !base) {
        ok = false;
        detail += missing(!e ? esf : !d ? dsf : !c ? cat : !one ? options.single_channel
                                                                  : options.baseline);
      } else {
        const double best_other = std::min(*d, *c);
        const double red = *base > 0 ? mcmodel::relative_reduction(*e, *base) : 0.0;
        ok = *e < best_other && best_other < *one && red >= 0.10;
        detail += "esf " + fmt(*e, 4) + " dsf " + fmt(*d, 4) + " cat " + fmt(*c, 4) + " 1ch " +
                  fmt(*one, 4) + " " + options.baseline + " " + fmt(*base, 4) + ", esf vs " +
                  options.baseline + " " + fmt(100 * red, 1) + "%";
      }
      f.pass = f.pass && ok;
      f.detail += (f.detail.empty() ? "" : "; ") + detail + (ok ? "" : " (fail)");
    }
    out.push_back(f);
  }
  {
    Finding f{7, !index.seeds.empty(), ""};
    for (auto seed : index.seeds) {
      std::string detail = seed_prefix(seed);
      bool ok = true;
      for (Variant v : {Variant::kDsf, Variant::kEsf}) {
        const std::string bf = mc_tag(v, InitMode::kBeamformer, options.mics);
        const std::string rnd = mc_tag(v, InitMode::kRandom, options.mics);
        const auto b = index.error(seed, bf, "dev"), r = index.error(seed, rnd, "dev");
        if (!b || !r) {
          ok = false;
          detail += missing(!b ? bf : rnd) + " ";
          continue;
        }
        ok = ok && *b <= *r;
        detail += mcmodel::to_string(v) + " bf " + fmt(*b, 4) + " random " + fmt(*r, 4) + " ";
      }
      detail.pop_back();
      f.pass = f.pass && ok;
      f.detail += (f.detail.empty() ? "" : "; ") + detail + (ok ? "" : " (fail)");
    }
    out.push_back(f);
  }
  {
    Finding f{8, !index.seeds.empty(), ""};
    const auto sweep = sweep_runs(index);
    for (auto seed : index.seeds) {
      std::string detail = seed_prefix(seed);
      std::optional<double> e1, e2, e4;
      if (sweep.count(1)) e1 = index.error(seed, sweep.at(1));
      if (sweep.count(2)) e2 = index.error(seed, sweep.at(2));
      if (sweep.count(4)) e4 = index.error(seed, sweep.at(4));
      bool ok = e1 && e2 && e4;
      if (!ok) {
        detail += "missing one of esf_bf_m1/m2/m4";
      } else {
        ok = *e2 < *e1 && (*e2 - *e4) < (*e1 - *e2);
        detail += "M=1 " + fmt(*e1, 4) + " M=2 " + fmt(*e2, 4) + " M=4 " + fmt(*e4, 4);
      }
      f.pass = f.pass && ok;
      f.detail += (f.detail.empty() ? "" : "; ") + detail + (ok ? "" : " (fail)");
    }
    out.push_back(f);
  }
  return out;
}

std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          const std::vector<std::pair<std::string, double>>& bars) {
  const int bar_w = 48, gap = 16, left = 70, top = 40, plot_h = 220, bottom = 90;
  const int width = left + static_cast<int>(bars.size()) * (bar_w + gap) + gap;
  const int height = top + plot_h + bottom;
  double hi = 0.0, lo = 0.0;
  for (const auto& b : bars) {
    hi = std::max(hi, b.second);
    lo = std::min(lo, b.second);
  }
  if (hi == lo) hi = lo + 1.0;
  const double scale = plot_h / (hi - lo);
  const double zero_y = top + hi * scale;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(title) << "</text>\n";
  s << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 "
    << top + plot_h / 2 << ")\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << fmt(zero_y, 1) << "\" x2=\"" << width - gap
    << "\" y2=\"" << fmt(zero_y, 1) << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double v = bars[i].second;
    const int x = left + gap + static_cast<int>(i) * (bar_w + gap);
    const double y = v >= 0 ? zero_y - v * scale : zero_y;
    const double h = std::abs(v) * scale;
    s << "<rect x=\"" << x << "\" y=\"" << fmt(y, 1) << "\" width=\"" << bar_w << "\" height=\""
      << fmt(h, 1) << "\" fill=\"" << (v >= 0 ? "#4878a8" : "#c0504d") << "\"/>\n";
    s << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << fmt(v >= 0 ? y - 4 : y + h + 12, 1)
      << "\" text-anchor=\"middle\">" << fmt(v, 2) << "</text>\n";
    const int ly = top + plot_h + 16;
    s << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << ly << "\" text-anchor=\"end\" transform=\"rotate(-35 "
      << x + bar_w / 2 << ' ' << ly << ")\">" << xml_escape(bars[i].first) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

Report make_report(const std::vector<ResultRow>& rows, const ReportOptions& options) {
  const Index index(rows);
  if (!index.has_run(options.baseline))
    throw ValidationError("baseline run '" + options.baseline + "' not found in results");
  if (index.runs.size() < 2)
    throw ValidationError("report needs at least two evaluated runs");
  Report report;
  std::ostringstream summary;

  // Relative reductions against the baseline, per seed and for the mean.
  std::ostringstream red;
  red << "run,snr_db,seed,frame_error,baseline_error,reduction_pct\n";
  std::vector<std::pair<std::string, double>> overall_bars;
  summary << "test frame error and reduction vs " << options.baseline << " (mean over "
          << index.seeds.size() << " seeds)\n";
  for (const auto& run : index.runs) {
    for (const auto& snr : index.snrs) {
      double sum = 0.0, base_sum = 0.0;
      int n = 0;
      for (auto seed : index.seeds) {
        const auto e = index.error(seed, run, "test", snr);
        const auto b = index.error(seed, options.baseline, "test", snr);
        if (!e || !b) continue;
        red << run << ',' << snr << ',' << seed << ',' << fmt(*e, 6) << ',' << fmt(*b, 6) << ','
            << (*b > 0 ? fmt(100 * mcmodel::relative_reduction(*e, *b), 2) : "nan") << '\n';
        sum += *e;
        base_sum += *b;
        ++n;
      }
      if (n == 0) continue;
      const double mean = sum / n, base = base_sum / n;
      const double pct = base > 0 ? 100 * mcmodel::relative_reduction(mean, base) : 0.0;
      red << run << ',' << snr << ",mean," << fmt(mean, 6) << ',' << fmt(base, 6) << ','
          << fmt(pct, 2) << '\n';
      if (snr == "all") {
        summary << "  " << run << ": " << fmt(mean, 4) << " (" << fmt(pct, 1) << "%)\n";
        if (run != options.baseline) overall_bars.emplace_back(run, pct);
      }
    }
  }
  report.files["reduction.csv"] = red.str();
  report.files["reduction.svg"] = svg_bar_chart(
      "Relative frame-error reduction vs " + options.baseline, "reduction (%)", overall_bars);

  // Per-SNR chart of the reductions of the main ESF model.
  const std::string esf = mc_tag(Variant::kEsf, InitMode::kBeamformer, options.mics);
  if (index.has_run(esf)) {
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& snr : index.snrs) {
      if (snr == "all") continue;
      double sum = 0.0, base_sum = 0.0;
      int n = 0;
      for (auto seed : index.seeds) {
        const auto e = index.error(seed, esf, "test", snr);
        const auto b = index.error(seed, options.baseline, "test", snr);
        if (!e || !b) continue;
        sum += *e;
        base_sum += *b;
        ++n;
      }
      if (n > 0 && base_sum > 0)
        bars.emplace_back(snr + " dB", 100 * mcmodel::relative_reduction(sum / n, base_sum / n));
    }
    if (!bars.empty())
      report.files["reduction_by_snr.svg"] =
          svg_bar_chart(esf + " vs " + options.baseline + " by SNR", "reduction (%)", bars);
  }

  // Mic-count sweep.
  const auto sweep = sweep_runs(index);
  if (!sweep.empty()) {
    std::ostringstream csv;
    csv << "mics,seed,frame_error\n";
    std::vector<std::pair<std::string, double>> bars;
    summary << "mic-count sweep (" << "esf, bf init)\n";
    for (const auto& [m, run] : sweep) {
      double sum = 0.0;
      int n = 0;
      for (auto seed : index.seeds)
        if (const auto e = index.error(seed, run)) {
          csv << m << ',' << seed << ',' << fmt(*e, 6) << '\n';
          sum += *e;
          ++n;
        }
      if (n == 0) continue;
      csv << m << ",mean," << fmt(sum / n, 6) << '\n';
      bars.emplace_back("M=" + std::to_string(m), 100 * sum / n);
      summary << "  M=" << m << ": " << fmt(sum / n, 4) << '\n';
    }
    report.files["mic_sweep.csv"] = csv.str();
    report.files["mic_sweep.svg"] = svg_bar_chart("Frame error by microphone count",
                                                  "frame error (%)", bars);
  }

  // Init ablation on the final dev error.
  {
    std::ostringstream csv;
    csv << "variant,seed,bf_dev_error,random_dev_error,bf_test_error,random_test_error\n";
    std::vector<std::pair<std::string, double>> bars;
    bool any = false;
    for (Variant v : {Variant::kDsf, Variant::kEsf}) {
      const std::string bf = mc_tag(v, InitMode::kBeamformer, options.mics);
      const std::string rnd = mc_tag(v, InitMode::kRandom, options.mics);
      if (!index.has_run(bf) || !index.has_run(rnd)) continue;
      any = true;
      double sb = 0.0, sr = 0.0;
      int n = 0;
      for (auto seed : index.seeds) {
        const auto bd = index.error(seed, bf, "dev"), rd = index.error(seed, rnd, "dev");
        const auto bt = index.error(seed, bf), rt = index.error(seed, rnd);
        if (!bd || !rd || !bt || !rt) continue;
        csv << mcmodel::to_string(v) << ',' << seed << ',' << fmt(*bd, 6) << ',' << fmt(*rd, 6)
            << ',' << fmt(*bt, 6) << ',' << fmt(*rt, 6) << '\n';
        sb += *bd;
        sr += *rd;
        ++n;
      }
      if (n == 0) continue;
      bars.emplace_back(mcmodel::to_string(v) + " bf", 100 * sb / n);
      bars.emplace_back(mcmodel::to_string(v) + " random", 100 * sr / n);
    }
    if (any) {
      report.files["init_ablation.csv"] = csv.str();
      report.files["init_ablation.svg"] =
          svg_bar_chart("Final dev frame error by first-layer init", "frame error (%)", bars);
    }
  }

  std::ostringstream findings;
  findings << "criterion,pass,detail\n";
  summary << "findings\n";
  for (const auto& f : check_findings(rows, options)) {
    findings << f.criterion << ',' << (f.pass ? "pass" : "fail") << ",\"" << f.detail << "\"\n";
    summary << "  " << f.criterion << ' ' << (f.pass ? "PASS" : "FAIL") << ": " << f.detail << '\n';
  }
  report.files["findings.csv"] = findings.str();
  report.summary = summary.str();
  return report;
}

}  // namespace mcfront::experiment
