#include <catch_amalgamated.hpp>

#include <cmath>

#include "gradflow/oracle.hpp"
#include "gradflow/verify.hpp"
#include "support.hpp"

using namespace gradflow;
using Catch::Approx;

namespace {

Eigen::VectorXd plane_wave(const Grid& g, int m) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.n(); ++i) {
    for (std::size_t j = 0; j < g.n(); ++j) v(i * g.n() + j) = std::cos(2.0 * M_PI * m * g.coord(i) / g.length());
  }
  return v;
}

struct Family_ {
  const char* name;
  ModelSpec spec;
  std::optional<ManufacturedCase> mcase;
};

std::vector<Family_> model_families() {
  ModelSpec ac;
  ac.eps2 = 1e-2;
  ModelSpec ch;
  ch.flow = FlowKind::Hm1;
  ch.eps2 = 4e-2;
  ch.mobility = 0.5;
  ModelSpec mbe;
  mbe.a_kind = OperatorKind::Bilaplacian;
  mbe.eps2 = 1e-2;
  mbe.potential = Potential::mbe_slope();
  ModelSpec mbe0 = mbe;
  mbe0.potential = Potential::mbe_no_slope();
  ModelSpec ac_dealiased = ac;
  ac_dealiased.dealias = true;
  return {{"ac", ac, std::nullopt},
          {"ch", ch, std::nullopt},
          {"mbe-slope", mbe, std::nullopt},
          {"mbe-noslope", mbe0, std::nullopt},
          {"ac-dealiased", ac_dealiased, std::nullopt},
          {"ac-forced", ac, ManufacturedCase::AcCaseA},
          {"ch-forced", ch, ManufacturedCase::ChCaseA}};
}

}  // namespace

TEST_CASE("assembled operators") {
  const Grid g4(4, 2.0);
  const Eigen::MatrixXd fd = oracle::assemble(g4, OperatorKind::NegLaplacian, oracle::Assembly::FdStencil).matrix;
  CHECK(fd.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd dft = oracle::assemble(g4, OperatorKind::NegLaplacian, oracle::Assembly::DftDiagonal).matrix;
  CHECK((dft - dft.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  const Grid g8(8, 2.0);
  const double h = g8.spacing();
  const Eigen::VectorXd w = plane_wave(g8, 1);
  const Eigen::MatrixXd fd8 = oracle::assemble(g8, OperatorKind::NegLaplacian, oracle::Assembly::FdStencil).matrix;
  const double lambda_fd = 4.0 / (h * h) * std::pow(std::sin(M_PI * h / 2.0), 2);
  CHECK((fd8 * w - lambda_fd * w).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd dft8 = oracle::assemble(g8, OperatorKind::NegLaplacian, oracle::Assembly::DftDiagonal).matrix;
  CHECK((dft8 * w - M_PI * M_PI * w).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd bi8 = oracle::assemble(g8, OperatorKind::Bilaplacian, oracle::Assembly::DftDiagonal).matrix;
  CHECK((bi8 * w - std::pow(M_PI, 4) * w).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(oracle::assemble(Grid(32, 1.0), OperatorKind::NegLaplacian, oracle::Assembly::DftDiagonal),
                  InvalidArgument);
}

TEST_CASE("dense operators match the FFT and stencil paths") {
  std::mt19937_64 rng(41);
  const Grid g(8, 2.0);
  const RealField f = gftest::noise(g, rng);
  const Eigen::VectorXd v = oracle::detail::to_vec(f);
  for (OperatorKind kind : {OperatorKind::NegLaplacian, OperatorKind::Bilaplacian}) {
    const Eigen::MatrixXd a = oracle::assemble(g, kind, oracle::Assembly::DftDiagonal).matrix;
    const RealField spectral = apply_operator(f, OperatorSpectrum::of(g, kind));
    CHECK((oracle::detail::to_field(g, a * v) - spectral).max_abs() < 1e-10 * spectral.max_abs());
  }
  const Eigen::MatrixXd s = oracle::assemble(g, OperatorKind::NegLaplacian, oracle::Assembly::FdStencil).matrix;
  CHECK((oracle::detail::to_field(g, s * v) + fd::laplacian_fd(f)).max_abs() < 1e-12 * 1e3);
}

TEST_CASE("dense energies match") {
  std::mt19937_64 rng(42);
  const Grid g(8, 2.0);
  for (const auto& fam : model_families()) {
    const Model m(fam.spec, g);
    const RealField phi = verify::random_smooth(g, rng, 0.7);
    CHECK(oracle::reference_energy(phi, m) == Approx(energy_total(phi, m)).epsilon(1e-12));
  }
  ModelSpec ac;
  ac.eps2 = 1e-2;
  const RealField phi = verify::random_smooth(g, rng, 0.7);
  CHECK(oracle::reference_energy(phi, Model(ac, g), oracle::Assembly::FdStencil) ==
        Approx(fd::energy_fd(phi, Model(ac, g))).epsilon(1e-12));
}

TEST_CASE("oracle fixed point") {
  const Grid g(8, 2.0);
  ModelSpec ac;
  ac.eps2 = 1e-2;
  ac.energy_shift = 1.0;
  const Model m(ac, g);
  for (Family fam : {Family::Sav, Family::Gsav, Family::Pssav}) {
    const SchemeKind kind{fam};
    const SimState s = init_state(RealField(g, 1.0), m, kind);
    const SimState r = oracle::reference_step(s, m, 0.1, kind);
    CHECK((r.phi - s.phi).max_abs() < 1e-14);
    CHECK(r.aux == Approx(s.aux).epsilon(1e-14));
  }
}

TEST_CASE("production steppers match the oracle") {
  std::mt19937_64 rng(43);
  const Grid g(8, 2.0);
  const SchemeKind kinds[] = {
      {Family::Sav, Order::First},          {Family::Sav, Order::Second},          {Family::Gsav, Order::First},
      {Family::Gsav, Order::Second},        {Family::Pssav, Order::First},         {Family::Pssav, Order::Second},
      {Family::Gsav, Order::Second, true},  {Family::Pssav, Order::First, true},   {Family::Pssav, Order::Second, true},
  };
  for (const auto& fam : model_families()) {
    for (const SchemeKind& kind : kinds) {
      if (fam.spec.potential.acts_on_gradient() && kind.family != Family::Pssav) continue;
      DYNAMIC_SECTION(fam.name << " " << to_string(kind)) {
        double worst = 0.0;
        for (int k = 0; k < 10; ++k) {
          ModelSpec spec = fam.spec;
          const RealField phi0 = verify::random_smooth(g, rng, 0.8, spec.flow == FlowKind::Hm1 ? 0.2 : 0.0);
          // The no-slope energy is unbounded below; leave room for it to fall.
          spec.energy_shift = default_energy_shift(phi0, Model(spec, g)) + 10.0;
          const Model m(spec, g);
          const Forcing force = fam.mcase ? Forcing([&, c = *fam.mcase](double t) { return forcing(c, m, t); })
                                          : Forcing{};
          SimState s = init_state(phi0, m, kind);
          for (int st = 0; st < 3; ++st) {
            const SimState ref = oracle::reference_step(s, m, 0.05, kind, force);
            const StepReport r = step(s, m, kind, 0.05, force);
            worst = std::max(worst, (r.state.phi - ref.phi).max_abs());
            worst = std::max(worst, std::abs(r.state.aux - ref.aux) / std::max(1.0, std::abs(ref.aux)));
            s = r.state;
          }
        }
        CHECK(worst <= 1e-10);
      }
    }
  }
}

TEST_CASE("FD stepper matches the stencil oracle") {
  std::mt19937_64 rng(44);
  const Grid g(8, 2.0);
  ModelSpec ac;
  ac.eps2 = 1e-2;
  ac.energy_shift = 4.0;
  const Model m(ac, g);
  for (double dt : {1e-3, 1.0, 100.0}) {
    SimState s = fd::init_state_fd(verify::random_smooth(g, rng, 0.8), m);
    for (int k = 0; k < 5; ++k) {
      const SimState ref = oracle::reference_step(s, m, dt, {}, {}, oracle::Assembly::FdStencil);
      const StepReport r = fd::step_pssav1_fd(s, m, dt);
      CHECK((r.state.phi - ref.phi).max_abs() <= 1e-10);
      CHECK(r.state.aux == Approx(ref.aux).epsilon(1e-10));
      s = r.state;
    }
  }
  ModelSpec ch = ac;
  ch.flow = FlowKind::Hm1;
  CHECK_THROWS_AS(oracle::DenseModel(Model(ch, g), oracle::Assembly::FdStencil), InvalidArgument);
}
