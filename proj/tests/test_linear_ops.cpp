#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pnp/error.hpp"
#include "pnp/linear_ops.hpp"

using namespace pnp;

namespace {

ConvKernel random_kernel(int w, int h, std::uint64_t seed) {
  std::vector<double> taps;
  for (int i = 0; i < w * h; ++i) taps.push_back(uniform_sample(RngSeed{seed}, static_cast<std::uint64_t>(i)) - 0.3);
  return ConvKernel(w, h, taps, false);
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double adjoint_gap(const LinearOperator& op, const Shape& in, std::uint64_t seed) {
  const Image x = random_image(in, RngSeed{seed}, -1.0, 1.0);
  const Image y = random_image(output_shape(op, in), RngSeed{seed + 7777}, -1.0, 1.0);
  return std::abs(dot(apply(op, x), y) - dot(x, apply_adjoint(op, y))) / (norm(x) * norm(y));
}

}  // namespace

TEST_CASE("kernel construction") {
  CHECK_THROWS_AS(ConvKernel(2, 3, std::vector<double>(6, 1.0)), Error);
  CHECK_THROWS_AS(ConvKernel(3, 3, std::vector<double>(8, 1.0)), Error);
  const ConvKernel g = ConvKernel::gaussian(1.6);
  CHECK(g.width() == 11);
  double s = 0.0;
  for (double t : g.taps()) s += t;
  CHECK(std::abs(s - 1.0) <= 1e-12);
  const ConvKernel m = ConvKernel::motion(9, 30);
  s = 0.0;
  for (double t : m.taps()) s += t;
  CHECK(std::abs(s - 1.0) <= 1e-12);
  CHECK(m.width() % 2 == 1);
  CHECK(ConvKernel::box(5).tap(2, 2) == doctest::Approx(1.0 / 25));

  const auto path = std::filesystem::temp_directory_path() / "pnp_kernel.txt";
  random_kernel(3, 5, 4).save(path);
  const ConvKernel back = ConvKernel::from_file(path, false);
  CHECK(back.width() == 3);
  CHECK(back.height() == 5);
  CHECK(back.taps() == random_kernel(3, 5, 4).taps());
  std::ofstream(path) << "KERNEL 3 3\n1 2 3\n";
  CHECK_THROWS_AS(ConvKernel::from_file(path), Error);
}

TEST_CASE("conv_forward") {
  const Image x = random_image({8, 8, 2}, RngSeed{1});
  CHECK(max_abs_diff(conv_forward(ConvKernel::delta(), x), x) <= 1e-15);

  const Image c(9, 7, 1, 0.37);
  CHECK(max_abs_diff(conv_forward(ConvKernel::gaussian(1.0), c), c) <= 1e-14);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ConvKernel k = random_kernel(3, 3, 100 + seed);
    const Image r = random_image({8, 8, 1}, RngSeed{seed});
    CHECK(max_abs_diff(conv_forward(k, r), oracle::conv_loop(k, r)) <= 1e-10);
  }
  // non-square shapes and kernels, up to 16x16
  const ConvKernel k = random_kernel(5, 3, 9);
  const Image r = random_image({16, 11, 3}, RngSeed{9});
  CHECK(max_abs_diff(conv_forward(k, r), oracle::conv_loop(k, r)) <= 1e-10);

  CHECK_THROWS_AS(conv_forward(ConvKernel::box(9), Image(8, 8, 1)), Error);
}

TEST_CASE("conv_adjoint") {
  const Image x = random_image({12, 10, 1}, RngSeed{2});
  const ConvKernel g = ConvKernel::gaussian(1.2);
  CHECK(max_abs_diff(conv_adjoint(g, x), conv_forward(g, x)) <= 1e-14);
  CHECK(max_abs_diff(conv_adjoint(ConvKernel::delta(), x), x) <= 1e-15);
  const ConvKernel k = random_kernel(3, 5, 3);
  CHECK(max_abs_diff(conv_adjoint(k, x), oracle::conv_loop(k.flipped(), x)) <= 1e-10);
  CHECK(adjoint_gap(CircularConvOp{k}, {8, 8, 1}, 5) <= 1e-10);
}

TEST_CASE("bayer operators") {
  const BayerPattern p = BayerPattern::rggb();
  Image red(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) red.at(0, y, x) = 1.0;
  const Image m = bayer_forward(p, red);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(m.at(0, y, x) == ((y % 2 == 0 && x % 2 == 0) ? 1.0 : 0.0));

  const Image gray(6, 4, 3, 0.4);
  {
    const Image tmp = bayer_forward(p, gray);
    for (double v : tmp.data()) CHECK(v == 0.4);
  }

  const Image r = random_image({4, 4, 3}, RngSeed{3});
  const Image rm = bayer_forward(p, r);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(rm.at(0, y, x) == r.at(p.layout[y % 2][x % 2], y, x));

  const Image mosaic = random_image({6, 4, 1}, RngSeed{4});
  CHECK(max_abs_diff(bayer_forward(p, bayer_adjoint(p, mosaic)), mosaic) == 0.0);
  {
    const Image tmp = bayer_adjoint(p, Image(4, 4, 1));
    for (double v : tmp.data()) CHECK(v == 0.0);
  }
  const Image x3 = random_image({6, 4, 3}, RngSeed{5});
  CHECK(dot(bayer_forward(p, x3), mosaic) == dot(x3, bayer_adjoint(p, mosaic)));

  CHECK_THROWS_AS(bayer_forward(p, Image(4, 4, 1)), Error);
  CHECK_THROWS_AS(bayer_forward(p, Image(5, 4, 3)), Error);
  CHECK_THROWS_AS(bayer_adjoint(p, Image(4, 3, 1)), Error);

  const BayerPattern bggr = BayerPattern::parse("BGGR");
  CHECK(bggr.channel_at(0, 0) == kBlue);
  CHECK(bggr.channel_at(1, 1) == kRed);
  CHECK_THROWS_AS(BayerPattern::parse("RGBX"), Error);

  // 25% R, 50% G, 25% B
  int count[3] = {0, 0, 0};
  const Image mask = bayer_mask(p, 8, 8);
  for (int c = 0; c < 3; ++c)
    for (double v : mask.plane(c)) count[c] += v == 1.0;
  CHECK(count[0] == 16);
  CHECK(count[1] == 32);
  CHECK(count[2] == 16);
}

TEST_CASE("gradient") {
  {
    const Image tmp = grad_forward(Image(5, 4, 2, 0.7));
    for (double v : tmp.data()) CHECK(v == 0.0);
  }
  Image two(2, 1, 1);
  two[1] = 1.0;
  const Image g = grad_forward(two);
  REQUIRE(g.channels() == 2);
  CHECK(g.at(0, 0, 0) == 1.0);
  CHECK(g.at(0, 0, 1) == 0.0);
  CHECK(g.at(1, 0, 0) == 0.0);
  CHECK(g.at(1, 0, 1) == 0.0);

  {
    const Image tmp = grad_adjoint(Image(5, 5, 2));
    for (double v : tmp.data()) CHECK(v == 0.0);
  }
  CHECK(max_abs_diff(grad_adjoint(grad_forward(Image(5, 5, 1, 0.3))), Image(5, 5, 1)) == 0.0);
  CHECK_THROWS_AS(grad_adjoint(Image(4, 4, 3)), Error);
  CHECK(adjoint_gap(GradientOp{}, {5, 5, 1}, 6) <= 1e-12);
  CHECK(adjoint_gap(GradientOp{}, {7, 4, 3}, 7) <= 1e-12);
}

TEST_CASE("cross-channel gradient differences") {
  Image same(5, 5, 3);
  const Image base = random_image({5, 5, 1}, RngSeed{8});
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < base.size(); ++i) same.plane(c)[i] = base[i];
  {
    const Image tmp = channel_grad_diff_forward(same);
    for (double v : tmp.data()) CHECK(v == 0.0);
  }

  Image per_channel(5, 5, 3);
  for (int c = 0; c < 3; ++c)
    for (double& v : per_channel.plane(c)) v = 0.2 * c;
  {
    const Image tmp = channel_grad_diff_forward(per_channel);
    for (double v : tmp.data()) CHECK(v == 0.0);
  }

  const Image x = random_image({6, 5, 3}, RngSeed{9});
  const Image d = channel_grad_diff_forward(x);
  CHECK(d.channels() == 6);
  // pair 1 is (R,B): horizontal plane 2, vertical plane 3
  const Image gx = grad_forward(x);
  CHECK(d.at(2, 1, 1) == doctest::Approx(gx.at(0, 1, 1) - gx.at(4, 1, 1)));
  CHECK(d.at(3, 2, 3) == doctest::Approx(gx.at(1, 2, 3) - gx.at(5, 2, 3)));
  CHECK(adjoint_gap(ChannelGradDiffOp{}, {6, 5, 3}, 10) <= 1e-12);
  CHECK_THROWS_AS(channel_grad_diff_forward(Image(4, 4, 1)), Error);
}

TEST_CASE("operator norms") {
  CHECK(std::abs(operator_norm(IdentityOp{}, {8, 8, 1}) - 1.0) <= 1e-10);
  CHECK(std::abs(operator_norm(BayerMaskOp{}, {8, 8, 3}) - 1.0) <= 1e-10);
  CHECK(std::abs(operator_norm(CircularConvOp{ConvKernel::gaussian(1.0)}, {16, 16, 1}) - 1.0) <= 1e-8);

  PowerIterationOptions opts;
  opts.iters = 200;
  opts.rel_tol = 0.0;
  const double g16 = operator_norm(GradientOp{}, {16, 16, 1}, opts);
  CHECK(g16 <= std::sqrt(8.0));
  CHECK(g16 >= 0.98 * std::sqrt(8.0));

  // dense eigenvalue oracle on 8x8
  const Eigen::MatrixXd D = oracle::dense([](const Image& x) { return grad_forward(x); }, {8, 8, 1});
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D.transpose() * D);
  const double exact = std::sqrt(es.eigenvalues().maxCoeff());
  CHECK(std::abs(operator_norm(GradientOp{}, {8, 8, 1}, opts) - exact) <= 1e-6 * exact);

  // more iterations never lower the estimate
  double prev = 0.0;
  for (int it : {1, 2, 5, 10, 20, 50}) {
    PowerIterationOptions o;
    o.iters = it;
    o.rel_tol = 0.0;
    const double v = operator_norm(GradientOp{}, {12, 12, 1}, o);
    CHECK(v >= prev * (1.0 - 1e-14));
    prev = v;
  }

  CHECK(power_norm([](const Image& x) { return Image(x.shape()); }, {4, 4, 1}) == 0.0);
}

TEST_CASE("adjoint identity, randomized over operator kinds") {
  const std::vector<std::pair<LinearOperator, Shape>> ops = {
      {IdentityOp{}, {7, 5, 2}},
      {CircularConvOp{ConvKernel::motion(5, 20)}, {9, 8, 1}},
      {BayerMaskOp{}, {6, 6, 3}},
      {GradientOp{}, {6, 7, 2}},
      {ChannelGradDiffOp{}, {5, 6, 3}},
  };
  for (const auto& [op, shape] : ops) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) worst = std::max(worst, adjoint_gap(op, shape, 1000 + s));
    INFO(operator_name(op));
    CHECK(worst <= 1e-10);
  }
}
