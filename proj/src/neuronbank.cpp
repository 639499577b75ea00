#include "mtn/neuronbank.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "mtn/rng.hpp"

namespace mtn {

namespace {

void tanh_eval(double s, double& v, double& dv, double& d2v) {
  const double t = std::tanh(s);
  const double sech2 = 1.0 - t * t;
  v = t;
  dv = sech2;
  d2v = -2.0 * t * sech2;
}

const Activation kTanh{"tanh", &tanh_eval};

template <typename T>
void put(std::ostream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
void get(std::istream& is, T& x) {
  is.read(reinterpret_cast<char*>(&x), sizeof(T));
}

}  // namespace

const Activation& tanh_activation() { return kTanh; }

NeuronBank generate_bank(const BallCover& ball, Index M, std::uint64_t seed, int stream) {
  if (M < 1) throw ConfigError("generate_bank: M must be >= 1");
  const int d = ball.dim();

  NeuronBank bank;
  bank.directions.resize(d, M);
  bank.offsets.resize(M);
  bank.ball = ball;
  bank.seed = seed;
  bank.stream = stream;

  const rng::Stream bs = rng::Stream::root(seed).sub(static_cast<std::uint64_t>(stream));
  Vector a(d);
  for (Index m = 0; m < M; ++m) {
    rng::Counter c{bs.sub(static_cast<std::uint64_t>(m))};
    for (;;) {
      for (int i = 0; i < d; i += 2) {
        double g0, g1;
        c.gaussian(g0, g1);
        a[i] = g0;
        if (i + 1 < d) a[i + 1] = g1;
      }
      const double nrm = a.norm();
      if (nrm > 0.0) {  // zero draws have probability ~2^-53 per component
        bank.directions.col(m) = a / nrm;
        break;
      }
    }
    bank.offsets[m] = ball.radius * c.uniform();
  }
  return bank;
}

double density(const NeuronBank& bank, const Vector& x, double tau) {
  const Vector s = bank.directions.transpose() * (x - bank.ball.center) + bank.offsets;
  const Index hits = (s.array().abs() < tau).count();
  return double(hits) / double(bank.size());
}

BasisEvaluation basis_eval(const NeuronBank& bank, double gamma, const Matrix& points, int order,
                           const Activation& act) {
  if (gamma <= 0) throw ConfigError("basis_eval: gamma must be positive");
  if (order < 0 || order > 2) throw ConfigError("basis_eval: order must be 0, 1 or 2");
  const int d = bank.dim();
  const Index N = points.cols();
  const Index M = bank.size();

  BasisEvaluation out;
  out.dim = d;
  out.order = order;

  // s_{nm} = gamma * (a_m . (x_n - c) + r_m)
  Matrix S = ((points.colwise() - bank.ball.center).transpose() * bank.directions).rowwise() +
             bank.offsets.transpose();
  S *= gamma;

  Matrix V(N, M), D1, D2;
  if (order >= 1) D1.resize(N, M);
  if (order >= 2) D2.resize(N, M);
  for (Index m = 0; m < M; ++m)
    for (Index n = 0; n < N; ++n) {
      double v, dv, d2v;
      act.eval(S(n, m), v, dv, d2v);
      V(n, m) = v;
      if (order >= 1) D1(n, m) = dv;
      if (order >= 2) D2(n, m) = d2v;
    }

  out.values.resize(N, M + 1);
  out.values.col(0).setOnes();
  out.values.rightCols(M) = V;

  if (order >= 1) {
    out.gradients.assign(static_cast<std::size_t>(d), Matrix::Zero(N, M + 1));
    for (int i = 0; i < d; ++i)
      out.gradients[i].rightCols(M) =
          gamma * (D1.array().rowwise() * bank.directions.row(i).array()).matrix();
  }
  if (order >= 2) {
    out.hessians.assign(static_cast<std::size_t>(d * d), Matrix::Zero(N, M + 1));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out.hessians[i * d + j].rightCols(M) =
            gamma * gamma *
            (D2.array().rowwise() *
             (bank.directions.row(i).array() * bank.directions.row(j).array()))
                .matrix();
  }
  return out;
}

void write_bank(const NeuronBank& bank, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("write_bank: cannot open " + path);
  os.write("MTNBANK1", 8);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(bank.dim()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(bank.size()));
  put<std::uint64_t>(os, bank.seed);
  put<std::int32_t>(os, bank.stream);
  os.write(reinterpret_cast<const char*>(bank.ball.center.data()),
           std::streamsize(sizeof(double)) * bank.dim());
  put<double>(os, bank.ball.radius);
  os.write(reinterpret_cast<const char*>(bank.directions.data()),
           std::streamsize(sizeof(double)) * bank.directions.size());
  os.write(reinterpret_cast<const char*>(bank.offsets.data()),
           std::streamsize(sizeof(double)) * bank.offsets.size());
}

NeuronBank read_bank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("read_bank: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, "MTNBANK1", 8) != 0) throw Error("read_bank: bad magic in " + path);
  std::uint32_t d;
  std::uint64_t M, seed;
  std::int32_t stream;
  get(is, d);
  get(is, M);
  get(is, seed);
  get(is, stream);
  NeuronBank bank;
  bank.seed = seed;
  bank.stream = stream;
  bank.ball.center.resize(d);
  is.read(reinterpret_cast<char*>(bank.ball.center.data()), std::streamsize(sizeof(double)) * d);
  get(is, bank.ball.radius);
  bank.directions.resize(d, static_cast<Index>(M));
  bank.offsets.resize(static_cast<Index>(M));
  is.read(reinterpret_cast<char*>(bank.directions.data()),
          std::streamsize(sizeof(double)) * bank.directions.size());
  is.read(reinterpret_cast<char*>(bank.offsets.data()),
          std::streamsize(sizeof(double)) * bank.offsets.size());
  if (!is) throw Error("read_bank: truncated file " + path);
  return bank;
}

void write_bank_csv(const NeuronBank& bank, std::ostream& os) {
  const int d = bank.dim();
  for (int a = 0; a < d; ++a) os << "a" << a << ",";
  os << "r\n";
  os.precision(17);
  for (Index m = 0; m < bank.size(); ++m) {
    for (int a = 0; a < d; ++a) os << bank.directions(a, m) << ",";
    os << bank.offsets[m] << "\n";
  }
}

}  // namespace mtn
