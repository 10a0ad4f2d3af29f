// Copyright 2026 The simt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "simt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "simt/errors.hpp"

namespace simt {

void DelaySchedule::validate() const {
  if (source_length < 1) throw InputError("delay schedule: |x| must be >= 1");
  if (delays.empty()) throw InputError("delay schedule: |y| must be >= 1");
  int previous = 0;
  for (std::size_t t = 0; t < delays.size(); ++t) {
    if (delays[t] < previous || delays[t] > source_length) {
      throw InputError("delay schedule: g(" + std::to_string(t + 1) + ") = " + std::to_string(delays[t]) +
                       " breaks monotonicity or exceeds |x| = " + std::to_string(source_length));
    }
    previous = delays[t];
  }
}

DelaySchedule DelaySchedule::wait_k(int k, int source_length, int target_length) {
  DelaySchedule s{source_length, {}};
  for (int t = 1; t <= target_length; ++t) {
    s.delays.push_back(static_cast<int>(std::min<long>(source_length, static_cast<long>(t) + k - 1)));
  }
  return s;
}

DelaySchedule DelaySchedule::full_sentence(int source_length, int target_length) {
  return DelaySchedule{source_length, std::vector<int>(static_cast<std::size_t>(target_length), source_length)};
}

DelaySchedule DelaySchedule::from_actions(std::string_view actions, int source_length) {
  DelaySchedule s{source_length, {}};
  int reads = 0;
  for (char a : actions) {
    if (a == 'R') {
      ++reads;
    } else if (a == 'W') {
      s.delays.push_back(std::min(reads, source_length));
    } else {
      throw InputError(std::string("action trace: unexpected character '") + a + "'");
    }
  }
  return s;
}

double average_lagging(const DelaySchedule& s) {
  s.validate();
  const double x = s.source_length;
  const double y = s.target_length();
  const auto it = std::find(s.delays.begin(), s.delays.end(), s.source_length);
  if (it == s.delays.end()) {
    throw IncompleteScheduleError("average lagging: g never reaches |x| = " + std::to_string(s.source_length));
  }
  const std::size_t tau = static_cast<std::size_t>(it - s.delays.begin()) + 1;
  double total = 0.0;
  for (std::size_t t = 1; t <= tau; ++t) {
    total += s.delays[t - 1] - static_cast<double>(t - 1) / (y / x);
  }
  return total / static_cast<double>(tau);
}

double average_lagging_lenient(const DelaySchedule& s) {
  return average_lagging_reference(s, s.target_length());
}

double average_lagging_reference(const DelaySchedule& s, int reference_length) {
  s.validate();
  if (reference_length < 1) throw InputError("average lagging: reference length must be >= 1");
  const auto it = std::find(s.delays.begin(), s.delays.end(), s.source_length);
  if (it != s.delays.end() && reference_length == s.target_length()) return average_lagging(s);
  const std::size_t tau =
      it == s.delays.end() ? s.delays.size() : static_cast<std::size_t>(it - s.delays.begin()) + 1;
  const double ratio = static_cast<double>(reference_length) / s.source_length;
  double total = 0.0;
  for (std::size_t t = 1; t <= tau; ++t) total += s.delays[t - 1] - static_cast<double>(t - 1) / ratio;
  return total / static_cast<double>(tau);
}

double consecutive_wait(const DelaySchedule& s) {
  s.validate();
  long total = 0;
  long runs = 0;
  int previous = 0;
  for (int g : s.delays) {
    total += g - previous;
    if (g - previous > 0) ++runs;
    previous = g;
  }
  if (runs == 0) throw InputError("consecutive wait: schedule never reads");
  return static_cast<double>(total) / static_cast<double>(runs);
}

double average_proportion(const DelaySchedule& s) {
  s.validate();
  double total = 0.0;
  for (int g : s.delays) total += g;
  return total / (static_cast<double>(s.source_length) * s.target_length());
}

double differentiable_average_lagging(const DelaySchedule& s) {
  s.validate();
  const double x = s.source_length;
  const double y = s.target_length();
  double smoothed = 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i <= s.delays.size(); ++i) {
    const double g = s.delays[i - 1];
    smoothed = i == 1 ? g : std::max(g, smoothed + x / y);
    total += smoothed - static_cast<double>(i - 1) / (x / y);
  }
  return total / y;
}

LatencyReport latency_metrics(const DelaySchedule& s) {
  return {average_lagging(s), consecutive_wait(s), average_proportion(s), differentiable_average_lagging(s)};
}

LatencyReport latency_metrics_lenient(const DelaySchedule& s) {
  return {average_lagging_lenient(s), consecutive_wait(s), average_proportion(s), differentiable_average_lagging(s)};
}

LatencyReport latency_from_actions(std::string_view actions, int source_length) {
  if (source_length < 1) throw InputError("latency: |x| must be >= 1");
  long writes = 0;
  for (char a : actions) {
    if (a == 'W') {
      ++writes;
    } else if (a != 'R') {
      throw InputError(std::string("action trace: unexpected character '") + a + "'");
    }
  }
  if (writes == 0) throw InputError("latency: trace has no WRITE");
  const double x = source_length;
  const double y = static_cast<double>(writes);

  long read = 0;          // tokens read so far, clamped to |x|
  long pending = 0;       // reads since the last write
  long t = 0;             // writes so far
  bool reached = false;
  long tau = 0;
  double lag_sum = 0.0;
  long read_total = 0;
  long runs = 0;
  double proportion_sum = 0.0;
  double smoothed = 0.0;
  double dal_sum = 0.0;
  for (char a : actions) {
    if (a == 'R') {
      if (read < source_length) {
        ++read;
        ++pending;
      }
      continue;
    }
    ++t;
    if (!reached) {
      lag_sum += static_cast<double>(read) - static_cast<double>(t - 1) * x / y;
      if (read == source_length) {
        reached = true;
        tau = t;
      }
    }
    read_total += pending;
    if (pending > 0) ++runs;
    pending = 0;
    proportion_sum += static_cast<double>(read);
    smoothed = t == 1 ? static_cast<double>(read) : std::max(static_cast<double>(read), smoothed + x / y);
    dal_sum += smoothed - static_cast<double>(t - 1) * y / x;
  }
  if (!reached) throw IncompleteScheduleError("average lagging: trace never reads the whole source");
  if (runs == 0) throw InputError("consecutive wait: trace never reads");
  LatencyReport r;
  r.al = lag_sum / static_cast<double>(tau);
  r.cw = static_cast<double>(read_total) / static_cast<double>(runs);
  r.ap = proportion_sum / (x * y);
  r.dal = dal_sum / y;
  return r;
}

LatencyReport mean_latency(const std::vector<LatencyReport>& reports) {
  LatencyReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.al += r.al;
    m.cw += r.cw;
    m.ap += r.ap;
    m.dal += r.dal;
  }
  const double n = static_cast<double>(reports.size());
  m.al /= n;
  m.cw /= n;
  m.ap /= n;
  m.dal /= n;
  return m;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const TokenList& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<TokenList>& hypotheses, const std::vector<TokenList>& references,
                   const BleuOptions& options) {
  if (hypotheses.empty()) throw UsageError("bleu: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw UsageError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                     std::to_string(references.size()) + " references");
  }
  const auto orders = static_cast<std::size_t>(options.max_order);
  std::vector<long> matches(orders, 0);
  std::vector<long> totals(orders, 0);
  long hyp_len = 0;
  long ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    hyp_len += static_cast<long>(hypotheses[s].size());
    ref_len += static_cast<long>(references[s].size());
    for (std::size_t n = 1; n <= orders; ++n) {
      const auto hyp = count_ngrams(hypotheses[s], n);
      const auto ref = count_ngrams(references[s], n);
      for (const auto& [gram, count] : hyp) {
        totals[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_precision = 0.0;
  for (std::size_t n = 0; n < orders; ++n) {
    double num = static_cast<double>(matches[n]);
    double den = static_cast<double>(totals[n]);
    if (options.add_one_smoothing && n > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_precision += std::log(num / den);
  }
  log_precision /= static_cast<double>(orders);
  const double brevity = hyp_len < ref_len ? 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len) : 0.0;
  return 100.0 * std::exp(log_precision + brevity);
}

double token_accuracy(const std::vector<TokenList>& hypotheses, const std::vector<TokenList>& references) {
  if (hypotheses.size() != references.size()) throw UsageError("accuracy: corpus sizes differ");
  long correct = 0;
  long total = 0;
  for (std::size_t s = 0; s < references.size(); ++s) {
    const auto& ref = references[s];
    const auto& hyp = hypotheses[s];
    total += static_cast<long>(ref.size());
    for (std::size_t i = 0; i < ref.size() && i < hyp.size(); ++i) {
      if (hyp[i] == ref[i]) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace simt
