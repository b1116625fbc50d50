#include <doctest.h>

#include <cmath>
#include <limits>

#include "pnp/csv.hpp"
#include "pnp/error.hpp"
#include "pnp/harness.hpp"
#include "pnp/parallel.hpp"

using namespace pnp;

namespace {

bool bit_equal(const Image& a, const Image& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

SchemeConfig tmpl(Scheme s, const Problem& p, Denoiser g, int iters = 10) {
  SchemeConfig c(s, p.data, std::move(g));
  c.tau = 0.0;
  c.max_iters = iters;
  return c;
}

}  // namespace

TEST_CASE("synthetic scenes") {
  for (const std::string kind : {"cartoon", "gradients", "chart"}) {
    const Image a = synth_image(kind, 32, 24, 1, RngSeed{1});
    CHECK(a.shape() == Shape{32, 24, 1});
    CHECK(bit_equal(a, synth_image(kind, 32, 24, 1, RngSeed{1})));
    double lo = 1.0;
    double hi = 0.0;
    for (double v : a.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi - lo > 0.2);
  }
  CHECK(synth_image("color", 16, 16, 3, RngSeed{2}).channels() == 3);
  CHECK_THROWS_AS(synth_image("color", 16, 16, 1, RngSeed{2}), Error);
  CHECK_THROWS_AS(synth_image("clouds", 16, 16, 1, RngSeed{2}), Error);
}

TEST_CASE("kernel specs") {
  CHECK(parse_kernel_spec("delta").width() == 1);
  CHECK(parse_kernel_spec("gaussian:1.6").taps() == ConvKernel::gaussian(1.6).taps());
  CHECK(parse_kernel_spec("gaussian:1.0:7").width() == 7);
  CHECK(parse_kernel_spec("box:5").taps() == ConvKernel::box(5).taps());
  CHECK(parse_kernel_spec("motion:9:30").taps() == ConvKernel::motion(9, 30).taps());
  for (const char* bad : {"", "gaussian", "gaussian:x", "gaussian:1:2:3", "box", "motion:9", "delta:1", "file:"})
    CHECK_THROWS_AS(parse_kernel_spec(bad), Error);
}

TEST_CASE("deconvolution problems") {
  const Image clean = synth_image("cartoon", 32, 32, 1, RngSeed{3});
  const Problem exact = build_deconv({"delta", 0.0, 4}, clean, RngSeed{4});
  double gap = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) gap = std::max(gap, std::abs(exact.data.observation()[i] - clean[i]));
  CHECK(gap <= 1e-14);
  CHECK(score(exact, exact.u0) >= 250.0);

  const Problem a = build_deconv({}, clean, RngSeed{5});
  const Problem b = build_deconv({}, clean, RngSeed{5});
  const Problem c = build_deconv({}, clean, RngSeed{6});
  CHECK(bit_equal(a.data.observation(), b.data.observation()));
  CHECK_FALSE(bit_equal(a.data.observation(), c.data.observation()));
  CHECK(a.crop == 12);
  CHECK(a.data.alpha() == 1.0);
  // observation keeps out-of-range noise, degraded is clamped
  const Problem loud = build_deconv({"gaussian:1.6", 0.3, 2}, clean, RngSeed{7});
  double lo = 0.0;
  for (double v : loud.data.observation().data()) lo = std::min(lo, v);
  CHECK(lo < 0.0);
  for (double v : loud.degraded.data()) CHECK(v >= 0.0);

  CHECK_THROWS_AS(build_deconv({"delta", -1.0, 2}, clean, RngSeed{1}), Error);
  CHECK_THROWS_AS(build_deconv({"delta", 0.0, 16}, clean, RngSeed{1}), Error);
}

TEST_CASE("bilinear demosaick") {
  const BayerPattern p = BayerPattern::rggb();
  const Image flat(8, 6, 3, 0.3);
  {
    const Image tmp = bilinear_demosaick(bayer_forward(p, flat), p);
    for (double v : tmp.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
  }

  // exact on linear ramps away from the border
  Image ramp(10, 10, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) ramp.at(c, y, x) = 0.01 * (x + 2 * y) + 0.1 * c;
  const Image r = bilinear_demosaick(bayer_forward(p, ramp), p);
  for (int c = 0; c < 3; ++c)
    for (int y = 1; y < 9; ++y)
      for (int x = 1; x < 9; ++x) CHECK(r.at(c, y, x) == doctest::Approx(ramp.at(c, y, x)).epsilon(1e-12));

  // sampled positions are copied through
  const Image rnd = random_image({8, 8, 3}, RngSeed{8});
  const Image mosaic = bayer_forward(p, rnd);
  const Image out = bilinear_demosaick(mosaic, p);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(out.at(p.channel_at(y, x), y, x) == mosaic.at(0, y, x));
  CHECK(bit_equal(bayer_forward(p, out), mosaic));
}

TEST_CASE("demosaicking problems") {
  const Image gray3 = [] {
    const Image g = synth_image("cartoon", 16, 16, 1, RngSeed{9});
    Image x(16, 16, 3);
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < g.size(); ++i) x.plane(c)[i] = g[i];
    return x;
  }();
  const Problem p = build_demosaick({}, gray3);
  CHECK(p.crop == 5);
  CHECK(p.data.domain_shape() == Shape{16, 16, 3});
  CHECK(p.data.observation().channels() == 1);

  // huge alpha with an identity denoiser keeps the measured samples
  const RunReport r = solve(p, tmpl(Scheme::PDHG2, p, Denoiser::identity(), 5), 1e6);
  CHECK(r.u.all_finite());
  const Image back = bayer_forward(BayerPattern::rggb(), r.u);
  double worst = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i) worst = std::max(worst, std::abs(back[i] - p.data.observation()[i]));
  CHECK(worst <= 1e-5);

  CHECK_THROWS_AS(build_demosaick({}, Image(16, 16, 1)), Error);
  CHECK_THROWS_AS(build_demosaick({}, Image(15, 16, 3)), Error);
}

TEST_CASE("grid search") {
  const Image clean = synth_image("cartoon", 32, 32, 1, RngSeed{10});
  const std::vector<Problem> probs = {build_deconv({"gaussian:1.0", 0.02, 6}, clean, RngSeed{11}, "a"),
                                      build_deconv({"gaussian:1.0", 0.02, 6}, clean, RngSeed{12}, "b")};
  const SchemeConfig t = tmpl(Scheme::PDHG2, probs[0], Denoiser::gaussian(1.0));

  SUBCASE("single cell equals a direct solve") {
    const GridSearchResult r = grid_search({{16.0}}, probs, t);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.best == 0);
    const double direct = score(probs[1], solve(probs[1], t, 16.0).u);
    CHECK(r.cells[0].psnr[1] == direct);
    CHECK(r.cells[0].mean_psnr == doctest::Approx((r.cells[0].psnr[0] + direct) / 2).epsilon(1e-15));
  }

  SUBCASE("3x3 grid against re-runs; best is the argmax") {
    const GridSearchSpec spec{{4.0, 16.0, 64.0}, {0.0, 0.01, 0.05}, {0.0}};
    SchemeConfig st = t;
    st.scheme = Scheme::StackedPDHG;
    const GridSearchResult r = grid_search(spec, probs, st);
    REQUIRE(r.cells.size() == 9);
    double best = -1e300;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      const GridCell& cell = r.cells[c];
      CHECK(cell.alpha == spec.alphas[c / 3]);
      CHECK(cell.beta_tv == spec.beta_tv[c % 3]);
      for (std::size_t i = 0; i < probs.size(); ++i)
        CHECK(cell.psnr[i] == score(probs[i], solve(probs[i], st, cell.alpha, cell.beta_tv).u));
      if (cell.mean_psnr > best) {
        best = cell.mean_psnr;
        arg = c;
      }
    }
    CHECK(r.best == arg);

    const auto rows = parse_csv(grid_search_csv(r, probs));
    REQUIRE(rows.size() == 10);
    CHECK(rows[0] == CsvRow{"alpha", "beta_tv", "beta_cross", "mean_psnr", "diverged", "a", "b"});
    CHECK(parse_number(rows[1 + arg][3]) == r.best_cell().mean_psnr);
  }

  SUBCASE("a divergent cell never wins") {
    SchemeConfig pg = t;
    pg.scheme = Scheme::PG;
    pg.tau = 1.0;  // fixed step: alpha = 1e12 is far past 2/L
    pg.max_iters = 200;
    const GridSearchResult r = grid_search({{1e12, 8.0}}, probs, pg);
    CHECK(r.cells[0].diverged);
    CHECK(r.cells[0].mean_psnr == -std::numeric_limits<double>::infinity());
    CHECK(r.best == 1);
    CHECK(grid_search_csv(r, probs).find("-inf") != std::string::npos);
  }

  SUBCASE("ties go to the first cell") {
    const GridSearchResult r = grid_search({{8.0, 8.0}}, probs, t);
    CHECK(r.best == 0);
  }

  SUBCASE("thread count does not change the table") {
    const GridSearchSpec spec{{2.0, 8.0, 32.0}, {0.0}, {0.0}};
    set_num_threads(1);
    const std::string one = grid_search_csv(grid_search(spec, probs, t), probs);
    set_num_threads(8);
    const std::string eight = grid_search_csv(grid_search(spec, probs, t), probs);
    set_num_threads(1);
    CHECK(one == eight);
  }

  CHECK_THROWS_AS(grid_search({{}}, probs, t), Error);
  CHECK_THROWS_AS(grid_search({{1.0}}, {}, t), Error);
}

TEST_CASE("alpha-sigma sweep") {
  // synthetic score peaked at alpha = 3 sigma^2
  const std::vector<double> sigmas = {0.5, 1.0, 2.0, 4.0};
  std::vector<double> alphas;
  for (int i = -8; i <= 24; ++i) alphas.push_back(3.0 * std::pow(2.0, i / 2.0));
  const AlphaSigmaResult r =
      sweep_alpha_sigma(sigmas, alphas, [](double s, double a) { return -std::abs(std::log(a / (3.0 * s * s))); });
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].best_alpha == doctest::Approx(0.75));
  for (std::size_t i = 1; i < r.rows.size(); ++i)
    CHECK(r.rows[i].best_alpha == doctest::Approx(4.0 * r.rows[i - 1].best_alpha));
  CHECK(r.fit_p == doctest::Approx(3.0));
  CHECK(r.r_squared == doctest::Approx(1.0));

  const AlphaSigmaResult one = sweep_alpha_sigma({0.1}, {1.0, 2.0}, [](double, double a) { return a; });
  CHECK(one.rows[0].best_alpha == 2.0);
  CHECK(one.r_squared == 1.0);

  const auto rows = parse_csv(alpha_sigma_csv(r));
  CHECK(rows.front() == CsvRow{"sigma", "best_alpha", "best_psnr"});
  CHECK(rows[rows.size() - 2][0] == "fit_p");
  CHECK(rows.back()[0] == "r_squared");
  CHECK_THROWS_AS(sweep_alpha_sigma({}, {1.0}, [](double, double) { return 0.0; }), Error);
  CHECK_THROWS_AS(sweep_alpha_sigma({0.0}, {1.0}, [](double, double) { return 0.0; }), Error);
}

TEST_CASE("psnr tables") {
  PsnrTable t;
  t.columns = {"degraded", "restored"};
  t.row_names = {"x", "y"};
  t.rows = {{20.0, 30.0}, {22.0, 34.0}};
  const auto avg = t.averages();
  CHECK(avg[0] == 21.0);
  CHECK(avg[1] == 32.0);
  const std::string csv = t.to_csv();
  CHECK(csv == "image,degraded,restored\nx,20,30\ny,22,34\naverage,21,32\n");
  const PsnrTable back = PsnrTable::from_csv(csv);
  CHECK(back.rows == t.rows);
  CHECK(back.row_names == t.row_names);
  CHECK(back.to_csv() == csv);
  CHECK(t.to_text().find("average") != std::string::npos);
  CHECK_THROWS_AS(PsnrTable::from_csv("name,a\nx,1\n"), Error);

  const Image clean = synth_image("color", 16, 16, 3, RngSeed{13});
  const Problem p = build_demosaick({}, clean, "c");
  const PsnrTable ct = psnr_table({p}, {clean});
  CHECK(ct.columns.size() == 5);
  CHECK(std::isinf(ct.rows[0][1]));
  CHECK(ct.rows[0][0] == doctest::Approx(score(p, p.degraded)));
}
