#pragma once

// Code lengths and divergences used to interpret model scores:
// entropy and Shannon-Fano codes over finite alphabets, KL divergence in
// bits, and the expected excess log-loss of a fitted regression curve
// against the true curve (a Gaussian KL divergence integrated over x).

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "overfitlab/errors.hpp"
#include "overfitlab/numio.hpp"
#include "overfitlab/polyfit.hpp"

namespace overfitlab {

struct Distribution {
  std::vector<std::string> words;
  std::vector<double> probs;

  void validate(double sum_tolerance = 1e-12) const {
    if (words.empty() || words.size() != probs.size())
      throw config_error("distribution: empty or ragged");
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw config_error("distribution: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > sum_tolerance)
      throw config_error("distribution: probabilities sum to " + numio::format_double(sum));
    std::unordered_map<std::string, int> seen;
    for (const auto& w : words)
      if (++seen[w] > 1) throw config_error("distribution: duplicate word '" + w + "'");
  }
};

inline double entropy_bits(const Distribution& d) {
  d.validate();
  double h = 0.0;
  for (double p : d.probs)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

// Code length ceil(log2(1/p)) per word. A zero-probability word has no
// finite codeword, which is a caller error for this code.
inline std::vector<int> shannon_fano_lengths(const Distribution& d) {
  d.validate();
  std::vector<int> lengths(d.probs.size());
  for (std::size_t i = 0; i < d.probs.size(); ++i) {
    if (!(d.probs[i] > 0.0))
      throw std::domain_error("shannon_fano_lengths: word '" + d.words[i] +
                              "' has probability 0");
    lengths[i] = static_cast<int>(std::ceil(-std::log2(d.probs[i])));
  }
  return lengths;
}

// KL(p || q) in bits, matching words by name. Returns +infinity when p puts
// mass on a word q excludes; those words are reported through `offending`
// when the caller asks for them.
inline double kl_bits(const Distribution& p, const Distribution& q,
                      std::vector<std::string>* offending = nullptr) {
  p.validate();
  q.validate();
  std::unordered_map<std::string, double> qmap;
  for (std::size_t i = 0; i < q.words.size(); ++i) qmap[q.words[i]] = q.probs[i];
  if (qmap.size() != p.words.size())
    throw config_error("kl_bits: distributions must share one word set");
  double d = 0.0;
  bool infinite = false;
  for (std::size_t i = 0; i < p.words.size(); ++i) {
    auto it = qmap.find(p.words[i]);
    if (it == qmap.end())
      throw config_error("kl_bits: word '" + p.words[i] + "' missing from q");
    const double pi = p.probs[i], qi = it->second;
    if (pi <= 0.0) continue;
    if (qi <= 0.0) {
      infinite = true;
      if (offending) offending->push_back(p.words[i]);
      continue;
    }
    d += pi * std::log2(pi / qi);
  }
  return infinite ? std::numeric_limits<double>::infinity() : d;
}

// Differential entropy of N(mu, v) in bits; the largest possible for the
// given variance, which is what makes it a useful ceiling in tests.
inline double gaussian_entropy_bits(double variance) {
  if (!(variance > 0.0)) throw config_error("gaussian_entropy_bits: variance must be > 0");
  return 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * variance);
}

namespace detail {

struct SimpsonState {
  const std::function<double(double)>* f;
  double rel_tol;
  int max_depth;
};

inline double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const SimpsonState& st, double a, double b, double fa,
                               double fm, double fb, double whole, double scale,
                               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = (*st.f)(lm), frm = (*st.f)(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  const double delta = left + right - whole;
  if (depth >= st.max_depth || std::abs(delta) <= 15.0 * st.rel_tol * scale)
    return left + right + delta / 15.0;
  return adaptive_simpson(st, a, m, fa, flm, fm, left, scale, depth + 1) +
         adaptive_simpson(st, m, b, fm, frm, fb, right, scale, depth + 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol) {
  SimpsonState st{&f, rel_tol, 48};
  // Seed with a fixed coarse partition so narrow features are not missed by
  // the first Simpson estimate.
  const int panels = 64;
  double total = 0.0;
  double scale = 0.0;
  std::vector<double> fs(panels + 1);
  for (int i = 0; i <= panels; ++i)
    fs[i] = f(a + (b - a) * static_cast<double>(i) / panels);
  for (int i = 0; i < panels; ++i) {
    const double xa = a + (b - a) * static_cast<double>(i) / panels;
    const double xb = a + (b - a) * static_cast<double>(i + 1) / panels;
    scale += std::abs(simpson(fs[i], f(0.5 * (xa + xb)), fs[i + 1], xa, xb));
  }
  scale = std::max(scale, 1e-300);
  for (int i = 0; i < panels; ++i) {
    const double xa = a + (b - a) * static_cast<double>(i) / panels;
    const double xb = a + (b - a) * static_cast<double>(i + 1) / panels;
    const double fm = f(0.5 * (xa + xb));
    const double whole = simpson(fs[i], fm, fs[i + 1], xa, xb);
    total += adaptive_simpson(st, xa, xb, fs[i], fm, fs[i + 1], whole, scale, 0);
  }
  return total;
}

}  // namespace detail

// Expected excess code length (in nats) of n_future observations when the
// data come from y = g(x) + N(0, v) with x uniform on the model's support
// but are coded with the fitted curve: n_future * E_x[(g - f)^2] / (2v).
inline double kl_gaussian_regression(const std::function<double(double)>& true_curve,
                                     const PolyModel& model, double variance,
                                     double n_future) {
  if (!(variance > 0.0))
    throw config_error("kl_gaussian_regression: variance must be > 0");
  if (!(n_future > 0.0))
    throw config_error("kl_gaussian_regression: n_future must be > 0");
  const double a = model.support.a, b = model.support.b;
  auto sq = [&](double x) {
    const double d = true_curve(x) - model(x);
    return d * d;
  };
  const double mean_sq = detail::integrate(sq, a, b, 1e-8) / (b - a);
  return n_future * mean_sq / (2.0 * variance);
}

inline std::string distribution_to_csv(const Distribution& d) {
  std::string out = "word,p\n";
  for (std::size_t i = 0; i < d.words.size(); ++i) {
    out += d.words[i];
    out += ',';
    out += numio::format_double(d.probs[i]);
    out += '\n';
  }
  return out;
}

inline Distribution distribution_from_csv(const std::string& text) {
  Distribution d;
  bool header_seen = false;
  for (const auto& line : numio::split_lines(text)) {
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "word,p") throw config_error("distribution csv: expected header 'word,p'");
      header_seen = true;
      continue;
    }
    auto cells = numio::split(line);
    if (cells.size() != 2) throw config_error("distribution csv: expected two columns");
    d.words.emplace_back(cells[0]);
    d.probs.push_back(numio::parse_double(cells[1]));
  }
  d.validate(1e-9);
  return d;
}

}  // namespace overfitlab
