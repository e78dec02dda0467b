#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "gbm/checkpoint.hpp"
#include "gbm/scorenet.hpp"

using namespace gbm;
namespace fs = std::filesystem;

namespace {

ScoreNetArchitecture small_arch(Eigen::Index d = 2, std::vector<Eigen::Index> hidden = {8, 6}) {
  ScoreNetArchitecture a;
  a.input_dim = d;
  a.time_frequencies = 3;
  a.n_steps = 100;
  a.hidden = std::move(hidden);
  return a;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gbm_unit_scorenet";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// L = sum(R o h) over a fixed batch; dL/dh = R.
double probe_loss(const ScoreNet<double>& net, const Eigen::ArrayXXd& x, const std::vector<long>& k,
                  const Eigen::MatrixXd& r) {
  return (net.forward_scaled(x, k).cwiseProduct(r)).sum();
}

}  // namespace

TEST_CASE("architecture bookkeeping") {
  const ScoreNetArchitecture a = small_arch();
  CHECK(a.embedding_width() == 6);
  CHECK(a.feature_width() == 8);
  CHECK(a.layer_count() == 3);
  CHECK(a.parameter_count() == 8 * 9 + 6 * 9 + 2 * 7);
  ScoreNetArchitecture bad = a;
  bad.hidden = {4, 0};
  CHECK_THROWS_AS(ScoreNet<double>{bad}, StructuralError);
  CHECK(time_frequency(0) == doctest::Approx(M_PI));
  CHECK(time_frequency(2) == doctest::Approx(2 * M_PI));
}

TEST_CASE("features are log x followed by sin/cos of k/N") {
  const ScoreNet<double> net(small_arch(1));
  const Eigen::ArrayXXd x = (Eigen::ArrayXXd(1, 2) << 2.0, 0.5).finished();
  const auto f = net.features(x, std::vector<long>{10, 50});
  CHECK(f(0, 0) == doctest::Approx(std::log(2.0)));
  CHECK(f(1, 1) == doctest::Approx(std::sin(M_PI * 0.5)));
  CHECK(f(2, 1) == doctest::Approx(std::cos(M_PI * 0.5)));
  CHECK(f(5, 0) == doctest::Approx(std::sin(2 * M_PI * 0.1)));
}

TEST_CASE("forward contract") {
  Rng rng(1);
  const ScoreNet<double> zero_out = ScoreNet<double>::initialized(small_arch(), rng);
  const Eigen::ArrayXXd x = rng.normal_array(2, 7).exp();
  CHECK(zero_out.forward(x, 3).abs().maxCoeff() == 0.0);

  const ScoreNet<double> net = ScoreNet<double>::initialized(small_arch(), rng, 1.0);
  const Eigen::ArrayXXd a = net.forward(x, 42), b = net.forward(x, 42);
  CHECK((a == b).all());
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 7);
  CHECK(a.abs().maxCoeff() > 0.0);
  CHECK(((net.forward_scaled(x, 42).array() / x) - a).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(net.forward(Eigen::ArrayXXd::Ones(3, 2), 1), StructuralError);
  CHECK_THROWS_AS(net.forward(x, std::vector<long>{1, 2}), StructuralError);
  CHECK_THROWS_AS(net.forward(-x, 1), DomainError);

  const NetworkScore field(net);
  CHECK((field(x, 42) == a).all());
  CHECK(field.kind() == ScoreKind::network);
}

TEST_CASE("float and double networks agree") {
  Rng rng(2);
  const ScoreNet<double> net = ScoreNet<double>::initialized(small_arch(), rng, 1.0);
  ScoreNet<float> f(net.architecture());
  f.set_parameters(net.parameters().cast<float>());
  const Eigen::ArrayXXd x = rng.normal_array(2, 5).exp();
  const Eigen::ArrayXXf y = f.forward(x.cast<float>(), 7);
  CHECK((y.cast<double>() - net.forward(x, 7)).abs().maxCoeff() < 1e-4);
}

TEST_CASE("backward matches central differences on random architectures") {
  Rng rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    ScoreNetArchitecture a;
    a.input_dim = rng.uniform_int(1, 3);
    a.time_frequencies = static_cast<int>(rng.uniform_int(0, 4));
    a.n_steps = 1000;
    const long layers = rng.uniform_int(1, 3);
    a.hidden.clear();
    for (long l = 0; l < layers; ++l) a.hidden.push_back(rng.uniform_int(4, 64));
    ScoreNet<double> net = ScoreNet<double>::initialized(a, rng, 1.0);
    // Nonzero biases so that every block is exercised.
    net.parameters_mut() += 0.1 * rng.normal_array(net.parameter_count(), 1).matrix();

    const Eigen::Index n = 5;
    const Eigen::ArrayXXd x = rng.normal_array(a.input_dim, n).exp();
    std::vector<long> k;
    for (Eigen::Index c = 0; c < n; ++c) k.push_back(rng.uniform_int(1, 999));
    const Eigen::MatrixXd r = rng.normal_array(a.input_dim, n).matrix();

    ScoreNet<double>::Cache cache;
    net.forward_scaled(x, k, &cache);
    const Eigen::VectorXd g = net.backward(r, cache);

    int bad = 0;
    for (int p = 0; p < 20; ++p) {
      const Eigen::Index i = rng.uniform_int(0, net.parameter_count() - 1);
      const double h = 1e-5;
      const double orig = net.parameters()(i);
      net.parameters_mut()(i) = orig + h;
      const double up = probe_loss(net, x, k, r);
      net.parameters_mut()(i) = orig - h;
      const double down = probe_loss(net, x, k, r);
      net.parameters_mut()(i) = orig;
      const double fd = (up - down) / (2 * h);
      if (std::abs(g(i) - fd) > 1e-4 * std::max(std::abs(fd), 1e-3)) ++bad;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("backward linearity and additivity") {
  Rng rng(4);
  const ScoreNet<double> net = ScoreNet<double>::initialized(small_arch(), rng, 1.0);
  const Eigen::ArrayXXd x1 = rng.normal_array(2, 1).exp();
  ScoreNet<double>::Cache c1, c2;
  net.forward_scaled(x1, 5, &c1);
  CHECK(net.backward(Eigen::MatrixXd::Zero(2, 1), c1).norm() == 0.0);

  const Eigen::MatrixXd r = rng.normal_array(2, 1).matrix();
  const Eigen::VectorXd single = net.backward(r, c1);
  Eigen::ArrayXXd x2(2, 2);
  x2 << x1, x1;
  net.forward_scaled(x2, 5, &c2);
  Eigen::MatrixXd r2(2, 2);
  r2 << r, r;
  CHECK((net.backward(r2, c2) - 2.0 * single).norm() < 1e-12 * single.norm());

  // Against the unscaled score: dL/ds = dL/dh o x.
  const Eigen::MatrixXd gs = (r.array() * x1).matrix();
  CHECK((net.backward_from_score_grad(gs, c1) - single).norm() < 1e-12 * single.norm());
}

TEST_CASE("stale or missing caches are rejected") {
  Rng rng(5);
  ScoreNet<double> net = ScoreNet<double>::initialized(small_arch(), rng, 1.0);
  const Eigen::ArrayXXd x = rng.normal_array(2, 3).exp();
  ScoreNet<double>::Cache cache;
  CHECK_THROWS_AS(net.backward(Eigen::MatrixXd::Ones(2, 3), cache), StructuralError);
  net.forward_scaled(x, 1, &cache);
  CHECK_NOTHROW(net.backward(Eigen::MatrixXd::Ones(2, 3), cache));
  CHECK_THROWS_AS(net.backward(Eigen::MatrixXd::Ones(2, 4), cache), StructuralError);
  net.parameters_mut()(0) += 1.0;
  CHECK_THROWS_AS(net.backward(Eigen::MatrixXd::Ones(2, 3), cache), StructuralError);
}

TEST_CASE("checkpoint round trip is bit-identical for float32 networks") {
  Rng rng(6);
  const ScoreNet<double> seed_net = ScoreNet<double>::initialized(small_arch(), rng, 1.0);
  ScoreNet<float> net(seed_net.architecture());
  net.set_parameters(seed_net.parameters().cast<float>());
  const fs::path p = temp_path("roundtrip.gbmnet");
  save_checkpoint(net, p, {{"iteration", 17}});
  const LoadedCheckpoint<float> back = load_checkpoint<float>(p);
  CHECK(back.net.architecture() == net.architecture());
  CHECK((back.net.parameters().array() == net.parameters().array()).all());
  CHECK(back.metadata.at("iteration") == 17);
  for (int i = 0; i < 100; ++i) {
    const Eigen::ArrayXXf x = rng.normal_array(2, 1).exp().cast<float>();
    const long k = rng.uniform_int(0, 99);
    CHECK((back.net.forward(x, k) == net.forward(x, k)).all());
  }
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));

  // A double network stores float32 values; loading as double reproduces them.
  save_checkpoint(seed_net, p);
  const LoadedCheckpoint<double> d = load_checkpoint<double>(p);
  CHECK((d.net.parameters().array() == seed_net.parameters().cast<float>().cast<double>().array()).all());
}

TEST_CASE("checkpoint load failures") {
  Rng rng(7);
  const ScoreNet<float> net = ScoreNet<float>::initialized(small_arch(), rng, 1.0);
  const fs::path good = temp_path("good.gbmnet");
  save_checkpoint(net, good);
  const std::vector<unsigned char> bytes = slurp(good);
  const auto nl = static_cast<std::size_t>(std::find(bytes.begin(), bytes.end(), '\n') - bytes.begin());
  const std::string header(bytes.begin(), bytes.begin() + static_cast<long>(nl));
  const fs::path bad = temp_path("bad.gbmnet");

  CHECK_THROWS_AS(load_checkpoint<float>(temp_path("missing.gbmnet")), LoadError);

  spit(bad, std::vector<unsigned char>(bytes.begin(), bytes.end() - 5));
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);

  spit(bad, std::vector<unsigned char>(bytes.begin(), bytes.begin() + 20));
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);

  auto flipped = bytes;
  flipped.back() ^= 0x40;
  spit(bad, flipped);
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);

  auto longer = bytes;
  longer.push_back(0);
  spit(bad, longer);
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);

  const auto rewrite = [&](const std::string& from, const std::string& to) {
    std::string h = header;
    const auto at = h.find(from);
    REQUIRE(at != std::string::npos);
    h.replace(at, from.size(), to);
    std::vector<unsigned char> out(h.begin(), h.end());
    out.insert(out.end(), bytes.begin() + static_cast<long>(nl), bytes.end());
    spit(bad, out);
  };
  rewrite("\"version\":1", "\"version\":2");
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);
  // Architecture no longer matches the block table and payload.
  rewrite("\"hidden\":[8,6]", "\"hidden\":[8,5]");
  CHECK_THROWS_AS(load_checkpoint<float>(bad), StructuralError);
  rewrite("\"format\":\"gbm-scorenet\"", "\"format\":\"other\"");
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);
  spit(bad, std::vector<unsigned char>{'{', 'x', '\n', 0, 0});
  CHECK_THROWS_AS(load_checkpoint<float>(bad), LoadError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
}
