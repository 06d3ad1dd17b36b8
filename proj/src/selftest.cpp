#include "faitheval/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "faitheval/autodiff.hpp"
#include "faitheval/faithfulness.hpp"
#include "faitheval/integrated_gradients.hpp"
#include "faitheval/toy_model.hpp"

namespace faitheval {

namespace {

using Gradient = std::function<std::vector<double>(std::span<const double>)>;

Gradient maybe_broken(Gradient g, bool broken) {
  if (!broken) return g;
  return [g = std::move(g)](std::span<const double> x) {
    auto out = g(x);
    if (!out.empty()) out[0] = out[0] * 1.5 + 0.01;
    return out;
  };
}

std::vector<double> random_vector(toy::WeightRng& rng, std::size_t n, double bound) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(bound);
  return v;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

PropertyResult ig_linear_exactness(const SelftestOptions& o) {
  const std::vector<double> w = {2.0, -1.0, 0.5}, x = {1.0, 2.0, 3.0}, x0 = {0.0, 0.0, 0.0};
  Gradient grad = maybe_broken(
      [&](std::span<const double> p) {
        ad::Tape tape;
        auto leaves = tape.variables(p);
        return tape.gradient(ad::dot(leaves, w), leaves);
      },
      o.inject_gradient_bug);
  double worst = 0.0;
  for (std::size_t m : {1, 10, 100}) {
    const auto ig = integrated_gradients(grad, x, x0, m);
    for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(ig[i] - w[i] * x[i]));
  }
  return {"ig-linear-exactness", worst <= 1e-12, "max error " + fmt(worst), 0.0};
}

// Mean completeness residual over random MLPs must not grow with m. The
// per-instance relative residual at m=300 is reported alongside.
PropertyResult ig_completeness(const SelftestOptions& o) {
  const std::vector<std::size_t> steps = {10, 50, 300};
  std::vector<double> mean(steps.size(), 0.0);
  double worst_ratio = 0.0;
  std::size_t within = 0;
  toy::WeightRng rng(o.seed);
  const std::size_t instances = 100;
  for (std::size_t n = 0; n < instances; ++n) {
    const auto mlp = toy::TanhMlp::random(o.seed + 1 + n, {10, 8, 3});
    const std::size_t out = n % 3;
    const auto x = random_vector(rng, 10, 1.0);
    const std::vector<double> x0(10, 0.0);
    const double delta = mlp.value(x, out) - mlp.value(x0, out);
    Gradient grad = maybe_broken([&](std::span<const double> p) { return mlp.gradient(p, out); },
                                 o.inject_gradient_bug);
    for (std::size_t s = 0; s < steps.size(); ++s) {
      const auto ig = integrated_gradients(grad, x, x0, steps[s]);
      double total = 0.0;
      for (double v : ig) total += v;
      const double residual = std::abs(total - delta);
      mean[s] += residual / static_cast<double>(instances);
      if (steps[s] == 300) {
        worst_ratio = std::max(worst_ratio, residual / std::abs(delta));
        if (residual <= 1e-3 * std::abs(delta)) ++within;
      }
    }
  }
  const bool monotone = mean[1] <= mean[0] && mean[2] <= mean[1];
  return {"ig-completeness", monotone,
          "mean residuals m=10/50/300 " + fmt(mean[0]) + " / " + fmt(mean[1]) + " / " +
              fmt(mean[2]) + "; " + std::to_string(within) + "/" + std::to_string(instances) +
              " within 1e-3 relative at m=300 (worst " + fmt(worst_ratio) + ")",
          0.0};
}

PropertyResult autodiff_finite_difference(const SelftestOptions& o) {
  const double h = 1e-5;
  toy::WeightRng rng(o.seed ^ 0x5eedULL);
  std::size_t failures = 0, points = 0;
  double worst = 0.0;
  auto check = [&](const Gradient& grad, const std::function<double(std::span<const double>)>& f,
                   std::vector<double> x) {
    ++points;
    const auto g = grad(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double up = f(x);
      x[i] = keep - h;
      const double down = f(x);
      x[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(g[i] - fd);
      const double allowed = std::max(1e-4 * std::abs(fd), 1e-6);
      worst = std::max(worst, err / allowed);
      if (err > allowed) {
        ++failures;
        return;
      }
    }
  };

  for (std::size_t n = 0; n < 10; ++n) {
    const auto mlp = toy::TanhMlp::random(o.seed + 100 + n, {10, 8, 3});
    for (std::size_t p = 0; p < 90; ++p) {
      const std::size_t out = p % 3;
      check(maybe_broken([&](std::span<const double> x) { return mlp.gradient(x, out); },
                         o.inject_gradient_bug),
            [&](std::span<const double> x) { return mlp.value(x, out); },
            random_vector(rng, 10, 2.0));
    }
  }

  const auto model = toy::make_toy_model(o.seed, {}, toy::Ablation::Default);
  const std::vector<int> ids = {5, 9, 17, 3};
  ModelInput base{model.embed(ids), Matrix(2, model.dims().vis_dim)};
  for (std::size_t p = 0; p < 100; ++p) {
    const auto flat = random_vector(rng, base.size(), 1.0);
    if (p % 2 == 0) {
      const int c = static_cast<int>(p % 3);
      check(maybe_broken(
                [&](std::span<const double> x) {
                  return model.class_gradient(base.with_values(x), c).flatten();
                },
                o.inject_gradient_bug),
            [&](std::span<const double> x) {
              return model.class_logits(base.with_values(x))[static_cast<std::size_t>(c)];
            },
            flat);
    } else {
      TokenTarget t;
      t.step = 1;
      t.token = static_cast<int>(2 + p % 30);
      t.answer_class = static_cast<int>(p % 3);
      t.prefix = {7};
      check(maybe_broken(
                [&](std::span<const double> x) {
                  return model.explainer_gradient(base.with_values(x), t).flatten();
                },
                o.inject_gradient_bug),
            [&](std::span<const double> x) {
              return model.explainer_logits(base.with_values(x), t.answer_class,
                                            t.prefix)[static_cast<std::size_t>(t.token)];
            },
            flat);
    }
  }
  return {"autodiff-finite-difference", failures == 0,
          std::to_string(failures) + " of " + std::to_string(points) +
              " points outside tolerance, worst error/allowed " + fmt(worst),
          0.0};
}

PropertyResult cosine_scale_invariance(const SelftestOptions& o) {
  toy::WeightRng rng(o.seed ^ 0xc05ULL);
  double worst = 0.0;
  for (std::size_t n = 0; n < 1000; ++n) {
    const std::size_t dim = 1 + static_cast<std::size_t>(rng.unit() * 20.0);
    const auto a = random_vector(rng, dim, 1.0);
    const auto b = random_vector(rng, dim, 1.0);
    const double c = 10.0 * (1.0 - rng.unit());
    std::vector<double> cb(b);
    for (double& v : cb) v *= c;
    worst = std::max(worst, std::abs(cosine(a, cb) - cosine(a, b)));
  }
  return {"cosine-scale-invariance", worst <= 1e-9, "max deviation " + fmt(worst), 0.0};
}

// Brute force: every subset of the required size is enumerated and the one
// with the largest relevance sum is masked; probabilities come from the
// model's weights directly.
PropertyResult aopc_brute_force(const SelftestOptions& o) {
  const std::vector<double> bins = {0.25, 0.5, 1.0};
  double worst = 0.0;
  toy::WeightRng rng(o.seed ^ 0xa0cULL);
  for (std::size_t n = 0; n < 20; ++n) {
    const std::size_t words = 4, regions = 4, text_dim = 3, vis_dim = 2;
    auto linear = std::make_shared<toy::LinearModel>(
        toy::LinearModel::random(o.seed + 500 + n, 16, text_dim, words, regions, vis_dim, 3));
    toy::InProcessOracle oracle(linear);

    TaskExample ex;
    ex.id = "bf" + std::to_string(n);
    for (std::size_t w = 0; w < words; ++w) {
      ex.words.push_back("w" + std::to_string(w));
      ex.tokens.push_back({static_cast<int>(2 + (n + 3 * w) % 14), ex.words.back(), w});
    }
    ex.visual_features = Matrix(regions, vis_dim);
    for (double& v : ex.visual_features.data) v = rng.uniform(1.0);

    auto probs = [&](const std::vector<bool>& text_removed, const std::vector<bool>& region_removed) {
      std::vector<double> flat;
      for (std::size_t w = 0; w < words; ++w) {
        const int id = text_removed[w] ? 0 : ex.tokens[w].id;
        for (std::size_t k = 0; k < text_dim; ++k) {
          flat.push_back(linear->embedding()(static_cast<std::size_t>(id), k));
        }
      }
      for (std::size_t r = 0; r < regions; ++r) {
        for (std::size_t k = 0; k < vis_dim; ++k) {
          flat.push_back(region_removed[r] ? 0.0 : ex.visual_features(r, k));
        }
      }
      std::vector<long double> logits(3);
      for (std::size_t c = 0; c < 3; ++c) {
        long double acc = linear->bias()[c];
        for (std::size_t i = 0; i < flat.size(); ++i) acc += (long double)linear->weights()(i, c) * flat[i];
        logits[c] = acc;
      }
      const long double peak = *std::max_element(logits.begin(), logits.end());
      long double total = 0.0L;
      for (auto& l : logits) total += (l = std::exp(l - peak));
      std::vector<double> p(3);
      for (std::size_t c = 0; c < 3; ++c) p[c] = static_cast<double>(logits[c] / total);
      return p;
    };

    const std::vector<bool> none(4, false);
    const auto reference = probs(none, none);
    const auto j = static_cast<std::size_t>(
        std::max_element(reference.begin(), reference.end()) - reference.begin());

    for (Modality modality : {Modality::Language, Modality::Vision}) {
      const auto relevance = random_vector(rng, 4, 1.0);
      const auto attr = AttributionVector::dense(modality, relevance);
      double suff = 0.0, comp = 0.0;
      for (double k : bins) {
        const auto size = static_cast<std::size_t>(std::ceil(k * 4.0 - 1e-12));
        double best = -1e300;
        unsigned best_mask = 0;
        for (unsigned mask = 0; mask < 16; ++mask) {
          if (static_cast<std::size_t>(__builtin_popcount(mask)) != size) continue;
          double s = 0.0;
          for (unsigned b = 0; b < 4; ++b) {
            if (mask & (1u << b)) s += relevance[b];
          }
          if (s > best) {
            best = s;
            best_mask = mask;
          }
        }
        std::vector<bool> removed(4), kept_removed(4);
        for (unsigned b = 0; b < 4; ++b) {
          removed[b] = (best_mask >> b) & 1u;
          kept_removed[b] = !removed[b];
        }
        const bool text = modality == Modality::Language;
        comp += reference[j] - probs(text ? removed : none, text ? none : removed)[j];
        suff += reference[j] - probs(text ? kept_removed : none, text ? none : kept_removed)[j];
      }
      suff /= static_cast<double>(bins.size());
      comp /= static_cast<double>(bins.size());
      const int target = static_cast<int>(j);
      worst = std::max(worst, std::abs(nle_sufficiency(oracle, ex, attr, bins, target).value - suff));
      worst = std::max(worst,
                       std::abs(nle_comprehensiveness(oracle, ex, attr, bins, target).value - comp));
    }
  }
  return {"aopc-brute-force", worst <= 1e-9, "max deviation " + fmt(worst), 0.0};
}

}  // namespace

std::vector<PropertyResult> run_selftest(const SelftestOptions& options) {
  using Suite = PropertyResult (*)(const SelftestOptions&);
  const std::pair<const char*, Suite> suites[] = {
      {"ig-linear-exactness", ig_linear_exactness},
      {"ig-completeness", ig_completeness},
      {"autodiff-finite-difference", autodiff_finite_difference},
      {"cosine-scale-invariance", cosine_scale_invariance},
      {"aopc-brute-force", aopc_brute_force}};
  std::vector<PropertyResult> results;
  for (const auto& [name, suite] : suites) {
    const auto start = std::chrono::steady_clock::now();
    PropertyResult r;
    try {
      r = suite(options);
    } catch (const std::exception& e) {
      r.name = name;
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace faitheval
