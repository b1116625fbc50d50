#include "pnp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "pnp/csv.hpp"
#include "pnp/error.hpp"
#include "pnp/parallel.hpp"

namespace pnp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Deterministic uniform stream for scene layout.
struct LayoutRng {
  RngSeed seed;
  std::uint64_t counter = 0;
  double next() { return 1.0 - uniform_sample(seed, counter++); }
  double range(double lo, double hi) { return lo + (hi - lo) * next(); }
};

void paint_shapes(Image& img, LayoutRng& rng, int count, bool color) {
  const int w = img.width();
  const int h = img.height();
  for (int s = 0; s < count; ++s) {
    const bool disk = rng.next() < 0.5;
    const double cx = rng.range(0.1, 0.9) * w;
    const double cy = rng.range(0.1, 0.9) * h;
    const double rx = rng.range(0.08, 0.3) * w;
    const double ry = disk ? rx : rng.range(0.08, 0.3) * h;
    std::vector<double> value(img.channels());
    const double gray = rng.range(0.05, 0.95);
    for (double& v : value) v = color ? rng.range(0.05, 0.95) : gray;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        const bool inside = disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        for (int c = 0; c < img.channels(); ++c) img.at(c, y, x) = value[c];
      }
    }
  }
}

}  // namespace

Image synth_cartoon(int width, int height, int channels, RngSeed seed) {
  LayoutRng rng{seed};
  Image img(width, height, channels, rng.range(0.2, 0.4));
  paint_shapes(img, rng, 7, channels > 1);
  return img;
}

Image synth_gradients_edges(int width, int height, int channels, RngSeed seed) {
  LayoutRng rng{seed};
  Image img(width, height, channels);
  const double ax = rng.range(-0.4, 0.4);
  const double ay = rng.range(-0.4, 0.4);
  const double step_x = rng.range(0.3, 0.7) * width;
  const double step_y = rng.range(0.3, 0.7) * height;
  for (int c = 0; c < channels; ++c) {
    const double shift = channels > 1 ? 0.1 * c : 0.0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = 0.5 + shift + ax * (x / double(width) - 0.5) + ay * (y / double(height) - 0.5);
        if (x > step_x) v -= 0.25;
        if (y > step_y) v += 0.15;
        img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

Image synth_resolution_chart(int width, int height, int channels) {
  Image img(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v;
      if (y < height / 2) {
        // bars: period shrinks from 16 px to 2 px left to right
        const double period = 16.0 - 14.0 * x / std::max(1, width - 1);
        v = std::fmod(x, period) < period / 2 ? 0.85 : 0.15;
      } else {
        const double r = std::hypot(x - width / 2.0, y - 0.75 * height);
        v = 0.5 + 0.35 * std::cos(r * r * std::numbers::pi / (2.0 * std::max(width, height)));
      }
      for (int c = 0; c < channels; ++c) img.at(c, y, x) = v;
    }
  }
  return img;
}

Image synth_color_scene(int width, int height, RngSeed seed) {
  LayoutRng rng{seed};
  Image img(width, height, 3);
  for (int c = 0; c < 3; ++c) {
    const double base = rng.range(0.3, 0.6);
    const double gx = rng.range(-0.3, 0.3);
    const double gy = rng.range(-0.3, 0.3);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        img.at(c, y, x) = base + gx * (x / double(width) - 0.5) + gy * (y / double(height) - 0.5);
  }
  paint_shapes(img, rng, 8, true);
  return img;
}

Image synth_image(const std::string& kind, int width, int height, int channels, RngSeed seed) {
  if (kind == "cartoon") return synth_cartoon(width, height, channels, seed);
  if (kind == "gradients") return synth_gradients_edges(width, height, channels, seed);
  if (kind == "chart") return synth_resolution_chart(width, height, channels);
  if (kind == "color") {
    require(channels == 3, ErrorKind::InvalidArgument, "color scenes have 3 channels");
    return synth_color_scene(width, height, seed);
  }
  fail(ErrorKind::InvalidArgument, "unknown synthetic scene '" + kind + "' (cartoon, gradients, chart, color)");
}

ConvKernel parse_kernel_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string::size_type start = 0;
  const std::string::size_type first = spec.find(':');
  parts.push_back(spec.substr(0, first));
  if (parts[0] == "file") {
    require(first != std::string::npos, ErrorKind::InvalidArgument, "kernel spec 'file:' needs a path");
    return ConvKernel::from_file(spec.substr(first + 1));
  }
  start = first;
  while (start != std::string::npos) {
    const auto next = spec.find(':', start + 1);
    parts.push_back(spec.substr(start + 1, next == std::string::npos ? std::string::npos : next - start - 1));
    start = next;
  }
  auto num = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "bad kernel spec '" + spec + "'");
    }
  };
  const std::string& kind = parts[0];
  if (kind == "delta" && parts.size() == 1) return ConvKernel::delta();
  if (kind == "gaussian" && (parts.size() == 2 || parts.size() == 3))
    return ConvKernel::gaussian(num(1), parts.size() == 3 ? static_cast<int>(num(2)) : 0);
  if (kind == "box" && parts.size() == 2) return ConvKernel::box(static_cast<int>(num(1)));
  if (kind == "motion" && parts.size() == 3) return ConvKernel::motion(num(1), num(2));
  fail(ErrorKind::InvalidArgument,
       "bad kernel spec '" + spec + "' (delta, gaussian:<std>[:<size>], box:<n>, motion:<len>:<deg>, file:<path>)");
}

Problem build_deconv(const DeconvExperiment& e, const Image& clean, RngSeed seed, std::string name) {
  require(e.sigma >= 0.0 && std::isfinite(e.sigma), ErrorKind::InvalidArgument, "noise sigma must be >= 0");
  require(e.crop >= 0 && 2 * e.crop < std::min(clean.width(), clean.height()), ErrorKind::InvalidArgument,
          "crop " + std::to_string(e.crop) + " too large for " + to_string(clean.shape()));
  const ConvKernel k = parse_kernel_spec(e.kernel);
  const Image observed = add_gaussian_noise(conv_forward(k, clean), e.sigma, seed);
  Image degraded = clamp01(observed);
  return Problem{std::move(name), DataTerm(CircularConvOp{k}, observed, 1.0), clean, degraded, degraded, e.crop};
}

Problem build_demosaick(const DemosaickExperiment& e, const Image& clean, std::string name) {
  require(clean.channels() == 3, ErrorKind::ShapeMismatch, "demosaicking needs a 3-channel ground truth");
  require(clean.width() % 2 == 0 && clean.height() % 2 == 0, ErrorKind::ShapeMismatch,
          "demosaicking needs even dimensions, got " + to_string(clean.shape()));
  require(e.crop >= 0 && 2 * e.crop < std::min(clean.width(), clean.height()), ErrorKind::InvalidArgument,
          "crop too large");
  Image mosaic = bayer_forward(e.pattern, clean);
  Image start = bilinear_demosaick(mosaic, e.pattern);
  return Problem{std::move(name), DataTerm(BayerMaskOp{e.pattern}, mosaic, 1.0), clean, start, start, e.crop};
}

Image bilinear_demosaick(const Image& mosaic, const BayerPattern& pattern) {
  require(mosaic.channels() == 1, ErrorKind::ShapeMismatch, "bilinear_demosaick: needs a 1-channel mosaic");
  require(mosaic.width() % 2 == 0 && mosaic.height() % 2 == 0, ErrorKind::ShapeMismatch,
          "bilinear_demosaick: dimensions must be even");
  static constexpr double kWeights[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
  const int w = mosaic.width();
  const int h = mosaic.height();
  Image out(w, h, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (pattern.channel_at(y, x) == c) {
          out.at(c, y, x) = mosaic.at(0, y, x);
          continue;
        }
        double num = 0.0;
        double den = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= h || xx >= w || pattern.channel_at(yy, xx) != c) continue;
            num += kWeights[dy + 1][dx + 1] * mosaic.at(0, yy, xx);
            den += kWeights[dy + 1][dx + 1];
          }
        }
        out.at(c, y, x) = den > 0.0 ? num / den : 0.0;
      }
    }
  }
  return out;
}

double score(const Problem& p, const Image& u) { return psnr_cropped(clamp01(u), p.clean, p.crop); }

RunReport solve(const Problem& p, const SchemeConfig& cfg_template, double alpha, double beta_tv,
                double beta_cross, const RunOptions& opts) {
  SchemeConfig cfg = cfg_template;
  cfg.data = p.data.with_alpha(alpha);
  cfg.beta_tv = beta_tv;
  cfg.beta_cross = beta_cross;
  if (cfg.tau <= 0.0) cfg = with_default_steps(std::move(cfg));
  return run(cfg, p.u0, opts);
}

GridSearchResult grid_search(const GridSearchSpec& spec, const std::vector<Problem>& problems,
                             const SchemeConfig& cfg_template) {
  require(!spec.alphas.empty() && !spec.beta_tv.empty() && !spec.beta_cross.empty(), ErrorKind::InvalidArgument,
          "grid search needs non-empty alpha and beta grids");
  require(!problems.empty(), ErrorKind::InvalidArgument, "grid search needs at least one problem");

  GridSearchResult result;
  for (double a : spec.alphas)
    for (double bt : spec.beta_tv)
      for (double bc : spec.beta_cross) {
        GridCell cell;
        cell.alpha = a;
        cell.beta_tv = bt;
        cell.beta_cross = bc;
        cell.psnr.assign(problems.size(), kNegInf);
        result.cells.push_back(std::move(cell));
      }

  const std::size_t n_problems = problems.size();
  std::vector<double> scores(result.cells.size() * n_problems, kNegInf);
  parallel_for(scores.size(), [&](std::size_t task) {
    const GridCell& cell = result.cells[task / n_problems];
    const Problem& p = problems[task % n_problems];
    const RunReport rep = solve(p, cfg_template, cell.alpha, cell.beta_tv, cell.beta_cross);
    scores[task] = rep.stop == StopReason::NonFinite ? kNegInf : score(p, rep.u);
  });

  double best = kNegInf;
  bool have_best = false;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    GridCell& cell = result.cells[c];
    double sum = 0.0;
    for (std::size_t i = 0; i < n_problems; ++i) {
      cell.psnr[i] = scores[c * n_problems + i];
      if (!std::isfinite(cell.psnr[i]) && cell.psnr[i] < 0) cell.diverged = true;
      sum += cell.psnr[i];
    }
    cell.mean_psnr = cell.diverged ? kNegInf : sum / static_cast<double>(n_problems);
    if (!have_best || cell.mean_psnr > best) {
      best = cell.mean_psnr;
      result.best = c;
      have_best = true;
    }
  }
  return result;
}

std::string grid_search_csv(const GridSearchResult& r, const std::vector<Problem>& problems) {
  std::ostringstream out;
  out << "alpha,beta_tv,beta_cross,mean_psnr,diverged";
  for (const auto& p : problems) out << "," << p.name;
  out << "\n";
  for (const auto& cell : r.cells) {
    out << format_number(cell.alpha) << "," << format_number(cell.beta_tv) << "," << format_number(cell.beta_cross)
        << "," << format_number(cell.mean_psnr) << "," << (cell.diverged ? 1 : 0);
    for (double v : cell.psnr) out << "," << format_number(v);
    out << "\n";
  }
  return out.str();
}

AlphaSigmaResult sweep_alpha_sigma(const std::vector<double>& sigmas, const std::vector<double>& alphas,
                                   const std::function<double(double, double)>& score_fn) {
  require(!sigmas.empty() && !alphas.empty(), ErrorKind::InvalidArgument, "sweep needs sigmas and alphas");
  for (double s : sigmas) require(s > 0.0, ErrorKind::InvalidArgument, "sigmas must be positive");
  std::vector<double> scores(sigmas.size() * alphas.size(), kNegInf);
  parallel_for(scores.size(), [&](std::size_t task) {
    scores[task] = score_fn(sigmas[task / alphas.size()], alphas[task % alphas.size()]);
  });

  AlphaSigmaResult result;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    AlphaSigmaRow row{sigmas[i], alphas[0], scores[i * alphas.size()]};
    for (std::size_t j = 1; j < alphas.size(); ++j) {
      const double s = scores[i * alphas.size() + j];
      if (s > row.best_psnr) {
        row.best_psnr = s;
        row.best_alpha = alphas[j];
      }
    }
    result.rows.push_back(row);
  }

  double num = 0.0;
  double den = 0.0;
  double mean = 0.0;
  for (const auto& r : result.rows) {
    const double s2 = r.sigma * r.sigma;
    num += r.best_alpha * s2;
    den += s2 * s2;
    mean += r.best_alpha;
  }
  mean /= static_cast<double>(result.rows.size());
  result.fit_p = num / den;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& r : result.rows) {
    const double e = r.best_alpha - result.fit_p * r.sigma * r.sigma;
    ss_res += e * e;
    ss_tot += (r.best_alpha - mean) * (r.best_alpha - mean);
  }
  double scale = 0.0;
  for (const auto& r : result.rows) scale += r.best_alpha * r.best_alpha;
  // all best alphas equal (e.g. one sigma): R^2 is 1 iff the line through the origin hits them
  result.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res <= 1e-24 * scale ? 1.0 : 0.0);
  return result;
}

AlphaSigmaResult alpha_sigma_sweep(const std::vector<double>& sigmas, const Problem& problem,
                                   const std::vector<double>& alphas, const SchemeConfig& cfg_template) {
  TvProxParams inner;
  if (const auto* tv = std::get_if<TvProxDenoiser>(&cfg_template.denoiser.kind())) inner = tv->params;
  return sweep_alpha_sigma(sigmas, alphas, [&](double sigma, double alpha) {
    SchemeConfig cfg = cfg_template;
    cfg.denoiser = Denoiser::tv_prox(sigma * sigma, inner.inner_iters, inner.inner_tol);
    const RunReport rep = solve(problem, cfg, alpha, cfg_template.beta_tv, cfg_template.beta_cross);
    return rep.stop == StopReason::NonFinite ? kNegInf : score(problem, rep.u);
  });
}

std::string alpha_sigma_csv(const AlphaSigmaResult& r) {
  std::ostringstream out;
  out << "sigma,best_alpha,best_psnr\n";
  for (const auto& row : r.rows)
    out << format_number(row.sigma) << "," << format_number(row.best_alpha) << "," << format_number(row.best_psnr)
        << "\n";
  out << "fit_p," << format_number(r.fit_p) << "\n";
  out << "r_squared," << format_number(r.r_squared) << "\n";
  return out.str();
}

std::vector<double> PsnrTable::averages() const {
  std::vector<double> avg(columns.size(), 0.0);
  if (rows.empty()) return avg;
  for (const auto& row : rows)
    for (std::size_t j = 0; j < columns.size(); ++j) avg[j] += row.at(j);
  for (double& v : avg) v /= static_cast<double>(rows.size());
  return avg;
}

std::string PsnrTable::to_text() const {
  std::size_t name_w = 7;
  for (const auto& n : row_names) name_w = std::max(name_w, n.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w)) << "image";
  for (const auto& c : columns) out << "  " << std::right << std::setw(std::max<int>(9, c.size())) << c;
  out << "\n";
  auto emit = [&](const std::string& name, const std::vector<double>& vals) {
    out << std::left << std::setw(static_cast<int>(name_w)) << name;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << vals[j];
      out << "  " << std::right << std::setw(std::max<int>(9, columns[j].size())) << cell.str();
    }
    out << "\n";
  };
  for (std::size_t i = 0; i < rows.size(); ++i) emit(row_names[i], rows[i]);
  emit("average", averages());
  return out.str();
}

std::string PsnrTable::to_csv() const {
  std::ostringstream out;
  out << "image";
  for (const auto& c : columns) out << "," << c;
  out << "\n";
  auto emit = [&](const std::string& name, const std::vector<double>& vals) {
    out << name;
    for (double v : vals) out << "," << format_number(v);
    out << "\n";
  };
  for (std::size_t i = 0; i < rows.size(); ++i) emit(row_names[i], rows[i]);
  emit("average", averages());
  return out.str();
}

PsnrTable PsnrTable::from_csv(const std::string& csv) {
  const auto lines = parse_csv(csv);
  require(!lines.empty() && !lines[0].empty() && lines[0][0] == "image", ErrorKind::Format,
          "PSNR table CSV must start with an 'image' header");
  PsnrTable t;
  t.columns.assign(lines[0].begin() + 1, lines[0].end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& row = lines[i];
    require(row.size() == t.columns.size() + 1, ErrorKind::Format, "PSNR table CSV row has wrong field count");
    if (row[0] == "average") continue;
    t.row_names.push_back(row[0]);
    std::vector<double> vals;
    for (std::size_t j = 1; j < row.size(); ++j) vals.push_back(parse_number(row[j]));
    t.rows.push_back(std::move(vals));
  }
  return t;
}

PsnrTable psnr_table(const std::vector<Problem>& problems, const std::vector<Image>& results) {
  require(problems.size() == results.size(), ErrorKind::InvalidArgument, "psnr_table: one result per problem");
  PsnrTable t;
  const int channels = problems.empty() ? 1 : problems[0].clean.channels();
  t.columns = {"degraded", "restored"};
  static const char* kChannelNames[] = {"R", "G", "B"};
  if (channels == 3)
    for (const char* n : kChannelNames) t.columns.push_back(std::string("restored_") + n);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& p = problems[i];
    require(p.clean.channels() == channels, ErrorKind::ShapeMismatch, "psnr_table: mixed channel counts");
    const Image out = clamp01(results[i]);
    std::vector<double> row{psnr_cropped(clamp01(p.degraded), p.clean, p.crop), psnr_cropped(out, p.clean, p.crop)};
    if (channels == 3)
      for (int c = 0; c < 3; ++c) row.push_back(psnr_channel(out, p.clean, c, p.crop));
    t.row_names.push_back(p.name);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace pnp
