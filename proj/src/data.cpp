#include "tvae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tvae/distributions.hpp"
#include "tvae/elbo.hpp"
#include "tvae/errors.hpp"
#include "tvae/special.hpp"

namespace tvae {

std::size_t Dataset::num_classes() const {
  int hi = -1;
  for (int y : labels) hi = std::max(hi, y);
  return static_cast<std::size_t>(hi + 1);
}

void Dataset::validate() const {
  if (observations.size() != rows * cols) {
    throw ContractError("dataset '" + name + "': " + std::to_string(observations.size()) +
                        " values do not fill " + std::to_string(rows) + " x " + std::to_string(cols));
  }
  if (!labels.empty() && labels.size() != rows) {
    throw ContractError("dataset '" + name + "': label count differs from row count");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < kUnlabeled) throw ContractError("dataset '" + name + "': negative label at row " + std::to_string(i));
  }
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (!std::isfinite(observations[i])) {
      throw ContractError("dataset '" + name + "': non-finite value at row " + std::to_string(i / cols));
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.name = name;
  out.rows = indices.size();
  out.cols = cols;
  out.observations.reserve(indices.size() * cols);
  for (std::size_t i : indices) {
    if (i >= rows) throw ContractError("Dataset::subset: index out of range");
    out.observations.insert(out.observations.end(), observations.begin() + static_cast<std::ptrdiff_t>(i * cols),
                            observations.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
    if (has_labels()) out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset gen_pinwheel(Rng& rng, const PinwheelOptions& opts) {
  if (opts.arms < 2) throw ContractError("gen_pinwheel: need at least 2 arms");
  Dataset d;
  d.name = "pinwheel";
  d.cols = 2;
  d.rows = opts.arms * opts.points_per_arm;
  d.observations.reserve(d.rows * 2);
  d.labels.reserve(d.rows);
  for (std::size_t a = 0; a < opts.arms; ++a) {
    const double base = 2.0 * special::kPi * static_cast<double>(a) / static_cast<double>(opts.arms);
    for (std::size_t i = 0; i < opts.points_per_arm; ++i) {
      const double f0 = 1.0 + opts.radial_std * rng.normal();
      const double f1 = opts.tangential_std * rng.normal();
      const double angle = base + opts.rate * std::exp(f0);
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      d.observations.push_back(f0 * c + f1 * s);
      d.observations.push_back(-f0 * s + f1 * c);
      d.labels.push_back(static_cast<int>(a));
    }
  }
  return d;
}

Dataset gen_surrogate_attribution(Rng& rng, const SurrogateOptions& opts) {
  if (opts.classes == 0 || opts.observed_dim == 0 || opts.latent_dim == 0) {
    throw ContractError("gen_surrogate_attribution: K, L and latent dim must be positive");
  }
  if (opts.min_per_class > opts.max_per_class) throw ContractError("gen_surrogate_attribution: min_per_class > max_per_class");
  if (!(opts.nu_min > 0.0) || opts.nu_min > opts.nu_max) throw ContractError("gen_surrogate_attribution: bad dof range");
  const std::size_t k = opts.classes;
  const std::size_t dl = opts.latent_dim;
  const std::size_t l = opts.observed_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dl));

  std::vector<double> a(l * dl);
  std::vector<double> b(l * dl);
  for (auto& v : a) v = rng.normal() * inv_sqrt;
  for (auto& v : b) v = rng.normal() * inv_sqrt;

  std::vector<double> means(k * dl);
  for (auto& v : means) v = opts.separation * rng.normal();
  std::vector<std::vector<double>> chol(k);
  std::vector<double> nus(k);
  std::vector<std::size_t> counts(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> r(dl * dl);
    for (auto& v : r) v = rng.normal() * inv_sqrt;
    std::vector<double> cov(dl * dl, 0.0);
    for (std::size_t i = 0; i < dl; ++i)
      for (std::size_t j = 0; j < dl; ++j) {
        double acc = (i == j) ? 1.0 : 0.0;
        for (std::size_t e = 0; e < dl; ++e) acc += r[i * dl + e] * r[j * dl + e];
        cov[i * dl + j] = 0.25 * acc;
      }
    chol[c] = cholesky_factor(cov, dl);
    nus[c] = opts.nu_min + (opts.nu_max - opts.nu_min) * rng.uniform();
    counts[c] = opts.min_per_class + rng.below(opts.max_per_class - opts.min_per_class + 1);
  }

  Dataset d;
  d.name = "surrogate";
  d.cols = l;
  std::vector<double> eps(dl);
  std::vector<double> x(dl);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const double u = sample_gamma(rng, {0.5 * nus[c], 0.5 * nus[c]});
      const double s = 1.0 / std::sqrt(u);
      for (auto& e : eps) e = rng.normal();
      for (std::size_t r = 0; r < dl; ++r) {
        double acc = 0.0;
        for (std::size_t q = 0; q <= r; ++q) acc += chol[c][r * dl + q] * eps[q];
        x[r] = means[c * dl + r] + s * acc;
      }
      for (std::size_t j = 0; j < l; ++j) {
        double lin = 0.0;
        double nl = 0.0;
        for (std::size_t r = 0; r < dl; ++r) {
          lin += a[j * dl + r] * x[r];
          nl += b[j * dl + r] * x[r];
        }
        d.observations.push_back(lin + opts.nonlinearity * std::tanh(nl) + opts.noise_std * rng.normal());
      }
      d.labels.push_back(static_cast<int>(c));
      ++d.rows;
    }
  }
  return d;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header line");
  const auto header = split_commas(line);
  Dataset d;
  d.name = path.stem().string();
  bool labelled = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto h = trim(header[i]);
    if (h == "label" && i + 1 == header.size()) {
      labelled = true;
    } else if (h != "f" + std::to_string(i)) {
      throw FormatError(path.string() + ":1: expected column 'f" + std::to_string(i) + "', got '" +
                        std::string(h) + "'");
    }
  }
  d.cols = header.size() - (labelled ? 1 : 0);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (cells.size() != header.size()) {
      throw FormatError(where + "expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < d.cols; ++j) {
      const auto c = trim(cells[j]);
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw FormatError(where + "bad value '" + std::string(c) + "' in column f" + std::to_string(j));
      }
      d.observations.push_back(v);
    }
    if (labelled) {
      const auto c = trim(cells.back());
      int y = kUnlabeled;
      if (!c.empty()) {
        const auto res = std::from_chars(c.data(), c.data() + c.size(), y);
        if (res.ec != std::errc() || res.ptr != c.data() + c.size() || y < kUnlabeled) {
          throw FormatError(where + "bad label '" + std::string(c) + "'");
        }
      }
      d.labels.push_back(y);
    }
    ++d.rows;
  }
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < data.cols; ++j) out << (j ? "," : "") << 'f' << j;
  if (data.has_labels()) out << ",label";
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (std::size_t j = 0; j < data.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.observations[i * data.cols + j]);
      out << (j ? "," : "") << buf;
    }
    if (data.has_labels()) {
      out << ',';
      if (data.labels[i] != kUnlabeled) out << data.labels[i];
    }
    out << '\n';
  }
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

std::vector<std::size_t> SplitPlan::train_indices(std::size_t holdout_fold) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f == holdout_fold) continue;
    out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void SplitPlan::validate(std::size_t rows) const {
  std::vector<int> seen(rows, 0);
  auto mark = [&](const std::vector<std::size_t>& v) {
    for (std::size_t i : v) {
      if (i >= rows) throw ContractError("SplitPlan: index out of range");
      ++seen[i];
    }
  };
  for (const auto& f : folds) mark(f);
  mark(dev);
  mark(test);
  for (std::size_t i = 0; i < rows; ++i) {
    if (seen[i] != 1) throw ContractError("SplitPlan: row " + std::to_string(i) + " is assigned " +
                                          std::to_string(seen[i]) + " times");
  }
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

SplitPlan kfold_split(const Dataset& data, std::size_t folds, double label_fraction, Rng& rng) {
  if (folds == 0) throw ContractError("kfold_split: folds must be positive");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    throw ContractError("kfold_split: label_fraction must lie in (0, 1]");
  }
  if (data.rows < folds) throw ContractError("kfold_split: fewer rows than folds");
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < data.rows; ++i) strata[data.has_labels() ? data.labels[i] : 0].push_back(i);

  SplitPlan plan;
  plan.folds.resize(folds);
  plan.label_fraction = label_fraction;
  std::size_t deal = 0;
  bool dev_next = true;
  for (auto& [label, idx] : strata) {
    shuffle(idx, rng);
    const auto hold = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < hold; ++i) {
      (dev_next ? plan.dev : plan.test).push_back(idx[i]);
      dev_next = !dev_next;
    }
    std::vector<std::size_t> rest(idx.begin() + static_cast<std::ptrdiff_t>(hold), idx.end());
    for (std::size_t i : rest) plan.folds[deal++ % folds].push_back(i);
    if (data.has_labels() && label_fraction < 1.0 && label != kUnlabeled) {
      const auto keep = static_cast<std::size_t>(std::ceil(label_fraction * static_cast<double>(rest.size())));
      shuffle(rest, rng);
      plan.dropped_labels.insert(plan.dropped_labels.end(), rest.begin() + static_cast<std::ptrdiff_t>(keep),
                                 rest.end());
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  std::sort(plan.dev.begin(), plan.dev.end());
  std::sort(plan.test.begin(), plan.test.end());
  std::sort(plan.dropped_labels.begin(), plan.dropped_labels.end());
  plan.validate(data.rows);
  return plan;
}

Dataset apply_label_drop(const Dataset& data, const SplitPlan& plan, const std::vector<std::size_t>& indices) {
  Dataset out = data.subset(indices);
  if (!out.has_labels()) return out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (std::binary_search(plan.dropped_labels.begin(), plan.dropped_labels.end(), indices[i])) {
      out.labels[i] = kUnlabeled;
    }
  }
  return out;
}

}  // namespace tvae
