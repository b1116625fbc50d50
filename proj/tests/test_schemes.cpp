#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "pnp/csv.hpp"
#include "pnp/error.hpp"
#include "pnp/harness.hpp"
#include "pnp/schemes.hpp"

using namespace pnp;

namespace {

bool bit_equal(const Image& a, const Image& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

double rel(const Image& a, const Image& b) { return norm(a - b) / std::max(norm(b), 1e-300); }

DataTerm blur_term(int n, double alpha, std::uint64_t seed, double kstd = 1.0) {
  const ConvKernel k = ConvKernel::gaussian(kstd);
  const Image clean = synth_image("cartoon", n, n, 1, RngSeed{seed});
  return DataTerm(CircularConvOp{k}, add_gaussian_noise(conv_forward(k, clean), 0.02, RngSeed{seed + 1}), alpha);
}

// u-iterates of a run, one per iteration
std::vector<Image> iterates(const SchemeConfig& cfg, const Image& u0) {
  std::vector<Image> out;
  RunOptions o;
  o.on_iteration = [&](const SchemeState& s) { out.push_back(s.u); };
  run(cfg, u0, o);
  return out;
}

double max_iterate_gap(const SchemeConfig& a, const SchemeConfig& b, const Image& u0) {
  const auto ia = iterates(a, u0);
  const auto ib = iterates(b, u0);
  REQUIRE(ia.size() == ib.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < ia.size(); ++k) worst = std::max(worst, rel(ia[k], ib[k]));
  return worst;
}

// Largest relative per-iteration move of u when started from fixed_point_state(u).
double drift(const SchemeConfig& cfg, const Image& u, int iters) {
  SchemeConfig c = cfg;
  c.max_iters = iters;
  c.tol = 0.0;
  double worst = 0.0;
  for (const auto& r : run(c, fixed_point_state(c, u)).history) worst = std::max(worst, r.rel_change);
  return worst;
}

// u with u = G(u - t grad H(u)), found by PG with step t
Image pg_fixed_point(const DataTerm& d, const Denoiser& g, double t) {
  SchemeConfig c(Scheme::PG, d, g);
  c.tau = t;
  c.max_iters = 20000;
  c.tol = 1e-15;
  return run(c, d.adjoint(d.observation())).u;
}

}  // namespace

TEST_CASE("scheme names") {
  for (Scheme s : {Scheme::PG, Scheme::ADMM, Scheme::PDHG1, Scheme::PDHG2, Scheme::StackedPDHG})
    CHECK(parse_scheme(scheme_name(s)) == s);
  CHECK_THROWS_AS(parse_scheme("fista"), Error);
}

TEST_CASE("pg with identity denoiser reaches the least-squares solution") {
  const Image f = random_image({9, 7, 1}, RngSeed{1});
  SchemeConfig cfg(Scheme::PG, DataTerm(IdentityOp{}, f, 2.0), Denoiser::identity());
  cfg = with_default_steps(cfg);
  CHECK(cfg.tau == doctest::Approx(0.5).epsilon(1e-9));
  const RunReport r = run(cfg, Image(f.shape()));
  CHECK(rel(r.u, f) <= 1e-8);
  CHECK(r.stop == StopReason::Tolerance);

  // well-conditioned blur against a dense least-squares solve
  const ConvKernel k(3, 3, {0.0, 0.1, 0.0, 0.1, 0.6, 0.1, 0.0, 0.1, 0.0});
  const Image fb = random_image({8, 8, 1}, RngSeed{2});
  SchemeConfig b(Scheme::PG, DataTerm(CircularConvOp{k}, fb, 1.0), Denoiser::identity());
  b = with_default_steps(b);
  b.max_iters = 5000;
  b.tol = 1e-15;
  const Eigen::MatrixXd A = oracle::dense([&](const Image& x) { return conv_forward(k, x); }, fb.shape());
  const Image ls = oracle::from_vec(fb.shape(), A.colPivHouseholderQr().solve(oracle::to_vec(fb)));
  CHECK(rel(run(b, Image(fb.shape())).u, ls) <= 1e-10);
}

TEST_CASE("pg with an exact tv prox decreases the objective") {
  const DataTerm d = blur_term(12, 1.0, 3);
  SchemeConfig cfg(Scheme::PG, d, Denoiser::tv_prox(0.02, 3000, 1e-13));
  cfg = with_default_steps(cfg);
  cfg.max_iters = 40;
  cfg.tol = 0.0;
  // G = prox of tau * (lambda/tau) TV, so the objective is H + (lambda/tau) TV
  const double mu = 0.02 / cfg.tau;
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  RunOptions o;
  o.on_iteration = [&](const SchemeState& s) {
    const double e = d.energy(s.u) + mu * total_variation(s.u);
    monotone = monotone && e <= prev + 1e-10;
    prev = e;
  };
  run(cfg, d.observation(), o);
  CHECK(monotone);
}

TEST_CASE("identity denoiser degenerates the pdhg variants") {
  const DataTerm d = blur_term(10, 3.0, 4);
  const Image u0 = d.observation();

  SchemeConfig p1 = with_default_steps(SchemeConfig(Scheme::PDHG1, d, Denoiser::identity()));
  p1.max_iters = 25;
  p1.tol = 0.0;
  bool zero = true;
  RunOptions o;
  o.on_iteration = [&](const SchemeState& s) {
    for (double v : s.y.data()) zero = zero && v == 0.0;
  };
  run(p1, u0, o);
  CHECK(zero);

  // PDHG2: y stays 0 and u is repeated prox of the data term
  SchemeConfig p2(Scheme::PDHG2, d, Denoiser::identity());
  p2.tau = 0.7;
  p2.max_iters = 10;
  p2.tol = 0.0;
  const auto it = iterates(p2, u0);
  Image u = u0;
  for (const auto& uk : it) {
    u = d.prox(0.7, u);
    CHECK(bit_equal(uk, u));
  }

  // stacked with zero betas is PDHG2, bit for bit
  SchemeConfig st = p2;
  st.scheme = Scheme::StackedPDHG;
  st.denoiser = Denoiser::nlm({});
  p2.denoiser = Denoiser::nlm({});
  const auto a = iterates(p2, u0);
  const auto b = iterates(st, u0);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(bit_equal(a[k], b[k]));
}

TEST_CASE("step-size rescaling leaves the iterates unchanged") {
  const DataTerm gray = blur_term(16, 4.0, 5);
  const Image clean = synth_image("color", 16, 16, 3, RngSeed{6});
  const DataTerm color(BayerMaskOp{}, bayer_forward(BayerPattern::rggb(), clean), 4.0);
  const std::vector<Denoiser> gs = {Denoiser::identity(), Denoiser::gaussian(1.0), Denoiser::tv_prox(0.05, 100, 0.0)};

  for (double gamma : {0.1, 1.0, 10.0}) {
    for (const auto& g : gs) {
      INFO("gamma " << gamma << " " << g.name());
      SchemeConfig p2(Scheme::PDHG2, gray, g);
      p2.gamma = gamma;
      p2.tau = 0.9 / gamma;
      p2.max_iters = 30;
      p2.tol = 0.0;
      const SchemeConfig unit = rescale_config(p2, 1.0);
      CHECK(unit.gamma == 1.0);
      CHECK(unit.tau == doctest::Approx(0.9));
      CHECK(unit.data.alpha() == doctest::Approx(4.0 / gamma));
      CHECK(max_iterate_gap(p2, unit, gray.observation()) <= 1e-12);

      SchemeConfig st(Scheme::StackedPDHG, color, g);
      st.gamma = gamma;
      st.beta_tv = 0.02;
      st.beta_cross = 0.01;
      st = with_default_steps(st);
      st.max_iters = 30;
      st.tol = 0.0;
      const SchemeConfig su = rescale_config(st, 1.0);
      CHECK(su.beta_tv == doctest::Approx(0.02 / gamma));
      CHECK(su.beta_cross == doctest::Approx(0.01 / gamma));
      const Image u0 = bilinear_demosaick(color.observation(), BayerPattern::rggb());
      CHECK(max_iterate_gap(st, su, u0) <= 1e-12);
    }
  }

  SchemeConfig same(Scheme::PDHG2, gray, Denoiser::identity());
  same.gamma = 2.0;
  const SchemeConfig back = rescale_config(same, 2.0);
  CHECK(back.tau == same.tau);
  CHECK(back.data.alpha() == same.data.alpha());
  CHECK_THROWS_AS(rescale_config(SchemeConfig(Scheme::PG, gray, Denoiser::identity()), 1.0), Error);
}

TEST_CASE("admm penalty also only rescales alpha") {
  const DataTerm d = blur_term(12, 2.0, 7);
  for (double gamma : {0.1, 10.0}) {
    SchemeConfig a(Scheme::ADMM, d, Denoiser::gaussian(1.0));
    a.gamma = gamma;
    a.max_iters = 30;
    a.tol = 0.0;
    SchemeConfig b = a;
    b.gamma = 1.0;
    b.data = d.with_alpha(d.alpha() / gamma);
    CHECK(max_iterate_gap(a, b, d.observation()) <= 1e-12);
  }
}

TEST_CASE("fixed-point residual") {
  const Image f = random_image({8, 8, 1}, RngSeed{8});
  const DataTerm id(IdentityOp{}, f, 1.0);
  SchemeConfig cfg(Scheme::ADMM, id, Denoiser::identity());
  CHECK(fixed_point_residual(cfg, f) <= 1e-10);

  const DataTerm d = blur_term(10, 1.0, 9);
  SchemeConfig g(Scheme::PDHG1, d, Denoiser::gaussian(1.0));
  CHECK(fixed_point_residual(g, random_image({10, 10, 1}, RngSeed{10})) > 1e-3);

  g.gamma = 4.0;
  g.tau = 0.1;
  CHECK(fixed_point_step(g) == 0.25);
  g.scheme = Scheme::PDHG2;
  CHECK(fixed_point_step(g) == 0.25);
  g.scheme = Scheme::PG;
  CHECK(fixed_point_step(g) == 0.1);
}

TEST_CASE("fixed points carry over between schemes") {
  const DataTerm d = blur_term(8, 1.0, 11);
  const Denoiser g = Denoiser::gaussian(1.0);
  const double t = 0.8;
  const Image u = pg_fixed_point(d, g, t);
  SchemeConfig pg(Scheme::PG, d, g);
  pg.tau = t;
  REQUIRE(fixed_point_residual(pg, u) <= 1e-12);

  for (Scheme s : {Scheme::ADMM, Scheme::PDHG1, Scheme::PDHG2, Scheme::StackedPDHG}) {
    INFO(scheme_name(s));
    SchemeConfig c(s, d, g);
    c.gamma = 1.0 / t;
    c = with_default_steps(c);
    CHECK(fixed_point_residual(c, u) <= 1e-12);
    CHECK(drift(c, u, 10) <= 1e-8);
  }

  // PDHG2 with tau != 1/gamma: the step that matters is 1/gamma, not tau
  SchemeConfig p2(Scheme::PDHG2, d, g);
  p2.gamma = 1.0 / t;
  p2.tau = 0.3 * t;
  CHECK(drift(p2, u, 10) <= 1e-8);
  const Image wrong = pg_fixed_point(d, g, p2.tau);
  CHECK(fixed_point_residual(p2, wrong, p2.tau) <= 1e-12);
  CHECK(drift(p2, wrong, 10) > 1e-6);
}

TEST_CASE("fixed points with a tv prox denoiser") {
  const DataTerm d = blur_term(8, 1.0, 12);
  const Denoiser g = Denoiser::tv_prox(0.01, 5000, 1e-15);
  const double t = 1.0;
  const Image u = pg_fixed_point(d, g, t);
  for (Scheme s : {Scheme::ADMM, Scheme::PDHG1, Scheme::PDHG2}) {
    INFO(scheme_name(s));
    SchemeConfig c(s, d, g);
    c.gamma = 1.0 / t;
    c = with_default_steps(c);
    CHECK(fixed_point_residual(c, u) <= 1e-10);
    CHECK(drift(c, u, 10) <= 1e-8);
  }
}

TEST_CASE("stable for 100 iterations with nonlinear denoisers") {
  const DataTerm d = blur_term(16, 32.0, 13);
  for (Scheme s : {Scheme::PG, Scheme::ADMM, Scheme::PDHG1, Scheme::PDHG2, Scheme::StackedPDHG}) {
    for (const Denoiser& g : {Denoiser::nlm({}), Denoiser::cnn(random_model(1, 4, 3, true, RngSeed{14}))}) {
      INFO(scheme_name(s) << " " << g.name());
      SchemeConfig c = with_default_steps(SchemeConfig(s, d, g));
      if (s == Scheme::StackedPDHG) c = with_default_steps([&] {
          SchemeConfig t = c;
          t.beta_tv = 0.01;
          return t;
        }());
      c.max_iters = 100;
      c.tol = 0.0;
      const RunReport r = run(c, d.observation());
      CHECK(r.stop == StopReason::MaxIters);
      CHECK(r.iterations == 100);
      CHECK(r.u.all_finite());
      CHECK_FALSE(r.step_condition_violated);
    }
  }
}

TEST_CASE("divergence is reported, not thrown") {
  const DataTerm d = blur_term(8, 1.0, 15);
  SchemeConfig c(Scheme::PG, d, Denoiser::identity());
  c.tau = 50.0;
  c.max_iters = 5000;
  c.tol = 0.0;
  // unnormalized box: ||A|| = 9, far past the step bound
  c.data = DataTerm(CircularConvOp{ConvKernel(3, 3, std::vector<double>(9, 1.0), false)}, d.observation(), 1.0);
  const RunReport r = run(c, d.observation());
  CHECK(r.stop == StopReason::NonFinite);
  CHECK(r.step_condition_violated);
  CHECK(r.iterations < 5000);
  CHECK(r.u.all_finite());

  SchemeConfig p(Scheme::PDHG1, d, Denoiser::identity());
  p.tau = 10.0;
  p.gamma = 10.0;
  p.max_iters = 1;
  CHECK(run(p, d.observation()).step_condition_violated);
  p.tau = 0.0;
  CHECK_THROWS_AS(run(p, d.observation()), Error);
  CHECK_THROWS_AS(run(with_default_steps(p), Image(3, 3, 1)), Error);
}

TEST_CASE("history") {
  const DataTerm d = blur_term(10, 8.0, 16);
  SchemeConfig c = with_default_steps(SchemeConfig(Scheme::PDHG2, d, Denoiser::gaussian(1.0)));
  c.max_iters = 5;
  c.tol = 0.0;
  RunOptions o;
  o.reference = d.observation();
  o.track_fixed_point_residual = true;
  const RunReport r = run(c, d.observation(), o);
  REQUIRE(r.history.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(r.history[k].k == k + 1);
  const auto rows = parse_csv(history_csv(r.history));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == CsvRow{"k", "rel_change", "data_energy", "fixed_point_residual", "psnr_vs_reference"});
  CHECK(parse_number(rows[3][2]) == r.history[2].data_energy);
  CHECK(parse_number(rows[5][3]) == r.history[4].fixed_point_residual);

  const RunReport bare = run(c, d.observation());
  const auto brows = parse_csv(history_csv(bare.history));
  CHECK(brows[1][3].empty());
  CHECK(brows[1][4].empty());
}
