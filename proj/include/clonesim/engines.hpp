#pragma once

// Three independent ways of executing a circuit:
//
//  * transfer_matrix     Heisenberg picture. Every live quadrature and every
//                        register is a row of coefficients over the noise
//                        sources (inputs, vacuum ancillas, loss vacua,
//                        electronic noise). Feed-forward is row addition.
//  * propagate_moments   Schrödinger picture on joint first/second moments
//                        of the live modes plus classical registers.
//                        Measurements turn a quadrature into a register;
//                        feed-forward is a linear map on the joint moments.
//  * run_shot            One Monte-Carlo shot: outcomes are sampled, the
//                        remaining modes are conditioned (Schur complement),
//                        and feed-forward displaces by the sampled numbers.

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "clonesim/circuit.hpp"
#include "clonesim/gaussian.hpp"
#include "clonesim/measurement.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

/// Real linear map from stacked source quadratures (signal inputs ⊕ ancilla
/// vacua ⊕ loss vacua ⊕ electronic noise) to output quadratures.
struct QuadTransferMatrix {
  Mat map;
  std::vector<std::string> column_labels;   // "in.x", "v1.p", "enoise:ff_x", ...
  std::vector<std::string> ancilla_labels;  // "v1", "v2", "loss:ff_x", ...
  Mat source_cov;
  Vec source_mean;
  std::size_t n_signal_columns = 0;

  Vec output_mean() const { return map * source_mean; }
  Mat output_cov() const { return map * source_cov * map.transpose(); }

  Eigen::Index column(const std::string& label) const {
    const auto it = std::find(column_labels.begin(), column_labels.end(), label);
    if (it == column_labels.end()) throw ConfigError("transfer matrix has no column '" + label + "'");
    return static_cast<Eigen::Index>(it - column_labels.begin());
  }
  /// Coefficient of source column `label` in output row `row`; 0 for a
  /// source the circuit never created.
  double coefficient(Eigen::Index row, const std::string& label) const {
    const auto it = std::find(column_labels.begin(), column_labels.end(), label);
    return it == column_labels.end() ? 0.0 : map(row, it - column_labels.begin());
  }
};

namespace detail {

inline Eigen::Index count_sources(const circuit::Circuit& c) {
  Eigen::Index n = 2 * static_cast<Eigen::Index>(c.n_inputs());
  for (const auto& step : c.steps()) {
    std::visit(overloaded{
                   [&](const circuit::AddVacuum&) { n += 2; },
                   [&](const circuit::Loss&) { n += 2; },
                   [&](const circuit::Homodyne& h) {
                     if (h.detector.effective_efficiency() < 1.0) n += 2;
                     if (h.detector.electronic_noise > 0.0) n += 1;
                   },
                   [](const auto&) {},
               },
               step);
  }
  return n;
}

template <typename Map>
auto& lookup(Map& m, circuit::ModeId id) {
  auto it = m.find(id);
  if (it == m.end()) throw ConfigError("circuit references mode " + std::to_string(id) + " which is not live");
  return it->second;
}

}  // namespace detail

inline QuadTransferMatrix transfer_matrix(const circuit::Circuit& c, const GaussianState& input) {
  if (input.n_modes() != c.n_inputs()) throw ConfigError("transfer_matrix: input mode count mismatch");
  const Eigen::Index ncols = detail::count_sources(c);
  QuadTransferMatrix t;
  t.source_cov = Mat::Zero(ncols, ncols);
  t.source_mean = Vec::Zero(ncols);
  std::map<circuit::ModeId, Mat> rows;
  std::vector<Eigen::RowVectorXd> regs(c.n_registers(), Eigen::RowVectorXd::Zero(ncols));
  Eigen::Index col = 0;

  auto new_pair = [&](const std::string& label) {
    t.column_labels.push_back(label + ".x");
    t.column_labels.push_back(label + ".p");
    const Eigen::Index at = col;
    col += 2;
    return at;
  };
  auto add_vacuum_pair = [&](const std::string& label) {
    const Eigen::Index at = new_pair(label);
    t.ancilla_labels.push_back(label);
    t.source_cov.block<2, 2>(at, at) = Mat2::Identity();
    return at;
  };
  auto attenuate = [&](Mat& r, double eta, const std::string& label) {
    const Eigen::Index at = add_vacuum_pair("loss:" + label);
    r *= std::sqrt(eta);
    r(0, at) = std::sqrt(1.0 - eta);
    r(1, at + 1) = std::sqrt(1.0 - eta);
  };

  for (std::size_t i = 0; i < c.n_inputs(); ++i) {
    const Eigen::Index at = new_pair(c.input_labels()[i]);
    Mat r = Mat::Zero(2, ncols);
    r(0, at) = 1.0;
    r(1, at + 1) = 1.0;
    rows.emplace(c.input(i), std::move(r));
  }
  const Eigen::Index nin = 2 * static_cast<Eigen::Index>(c.n_inputs());
  t.source_cov.topLeftCorner(nin, nin) = input.cov();
  t.source_mean.head(nin) = input.mean();
  t.n_signal_columns = static_cast<std::size_t>(nin);

  for (const auto& step : c.steps()) {
    std::visit(overloaded{
                   [&](const circuit::AddVacuum& s) {
                     const Eigen::Index at = add_vacuum_pair(s.label);
                     Mat r = Mat::Zero(2, ncols);
                     r(0, at) = 1.0;
                     r(1, at + 1) = 1.0;
                     rows.emplace(s.id, std::move(r));
                   },
                   [&](const circuit::BeamSplitter& s) {
                     Mat& ra = detail::lookup(rows, s.a);
                     Mat& rb = detail::lookup(rows, s.b);
                     Mat stacked(4, ncols);
                     stacked << ra, rb;
                     stacked = (detail::beam_splitter_matrix(s.transmittance, s.phi) * stacked).eval();
                     ra = stacked.topRows(2);
                     rb = stacked.bottomRows(2);
                   },
                   [&](const circuit::PhaseShift& s) {
                     Mat& r = detail::lookup(rows, s.mode);
                     r = (detail::rotation(s.phi) * r).eval();
                   },
                   [&](const circuit::Loss& s) { attenuate(detail::lookup(rows, s.mode), s.efficiency, s.label); },
                   [&](const circuit::Homodyne& s) {
                     Mat& r = detail::lookup(rows, s.mode);
                     const double eta = s.detector.effective_efficiency();
                     if (eta < 1.0) attenuate(r, eta, s.label);
                     regs[s.reg] = std::cos(s.theta) * r.row(0) + std::sin(s.theta) * r.row(1);
                     if (s.detector.electronic_noise > 0.0) {
                       t.column_labels.push_back("enoise:" + s.label);
                       t.ancilla_labels.push_back("enoise:" + s.label);
                       t.source_cov(col, col) = s.detector.electronic_noise;
                       regs[s.reg](col) = 1.0;
                       ++col;
                     }
                     rows.erase(s.mode);
                   },
                   [&](const circuit::Feedforward& s) {
                     Mat& r = detail::lookup(rows, s.target);
                     r.row(0) += s.gain.x * regs[s.reg_x];
                     r.row(1) += s.gain.p * regs[s.reg_p];
                   },
               },
               step);
  }

  t.map = Mat(2 * static_cast<Eigen::Index>(c.outputs().size()), ncols);
  for (std::size_t k = 0; k < c.outputs().size(); ++k) {
    t.map.middleRows(2 * static_cast<Eigen::Index>(k), 2) = detail::lookup(rows, c.outputs()[k]);
  }
  return t;
}

/// Called after every step with the step index and the smallest eigenvalue
/// of cov + iJ over the live modes and registers.
using PhysicalityObserver = std::function<void(std::size_t step, double min_eigenvalue)>;

namespace detail {

// Joint moments of live modes (first 2L coordinates) and registers (after).
struct HybridMoments {
  std::vector<circuit::ModeId> live;
  Eigen::Index n_registers = 0;
  Vec mean;
  Mat cov;

  Eigen::Index position(circuit::ModeId id) const {
    const auto it = std::find(live.begin(), live.end(), id);
    if (it == live.end()) throw ConfigError("circuit references mode " + std::to_string(id) + " which is not live");
    return 2 * static_cast<Eigen::Index>(it - live.begin());
  }
  Eigen::Index register_position(circuit::RegId reg) const {
    return 2 * static_cast<Eigen::Index>(live.size()) + reg;
  }

  void insert_coordinates(Eigen::Index at, const Vec& m, const Mat& c) {
    const Eigen::Index n = mean.size();
    const Eigen::Index k = m.size();
    Vec nm(n + k);
    nm << mean.head(at), m, mean.tail(n - at);
    Mat nc = Mat::Zero(n + k, n + k);
    std::vector<Eigen::Index> old_idx;
    for (Eigen::Index i = 0; i < n; ++i) old_idx.push_back(i < at ? i : i + k);
    nc(old_idx, old_idx) = cov;
    nc.block(at, at, k, k) = c;
    mean = std::move(nm);
    cov = std::move(nc);
  }

  void remove_coordinates(const std::vector<Eigen::Index>& drop) {
    const auto keep = keep_indices(mean.size(), drop);
    mean = mean(keep).eval();
    cov = cov(keep, keep).eval();
  }
};

}  // namespace detail

/// Unconditional output moments (all measurement records averaged over).
inline GaussianState propagate_moments(const circuit::Circuit& c, const GaussianState& input,
                                       const PhysicalityObserver& observe = {}) {
  if (input.n_modes() != c.n_inputs()) throw ConfigError("propagate_moments: input mode count mismatch");
  detail::HybridMoments h;
  for (std::size_t i = 0; i < c.n_inputs(); ++i) h.live.push_back(c.input(i));
  h.mean = input.mean();
  h.cov = input.cov();

  std::size_t index = 0;
  for (const auto& step : c.steps()) {
    std::visit(overloaded{
                   [&](const circuit::AddVacuum& s) {
                     h.insert_coordinates(2 * static_cast<Eigen::Index>(h.live.size()), Vec::Zero(2),
                                          Mat::Identity(2, 2));
                     h.live.push_back(s.id);
                   },
                   [&](const circuit::BeamSplitter& s) {
                     const Eigen::Index a = h.position(s.a);
                     const Eigen::Index b = h.position(s.b);
                     detail::apply_local(h.mean, h.cov, {a, a + 1, b, b + 1},
                                         detail::beam_splitter_matrix(s.transmittance, s.phi));
                   },
                   [&](const circuit::PhaseShift& s) {
                     const Eigen::Index a = h.position(s.mode);
                     detail::apply_local(h.mean, h.cov, {a, a + 1}, detail::rotation(s.phi));
                   },
                   [&](const circuit::Loss& s) { detail::apply_loss(h.mean, h.cov, h.position(s.mode), s.efficiency); },
                   [&](const circuit::Homodyne& s) {
                     const Eigen::Index a = h.position(s.mode);
                     detail::apply_loss(h.mean, h.cov, a, s.detector.effective_efficiency());
                     // register = u·(x, p) of the mode + electronic noise
                     const Vec2 u = detail::quadrature_direction(s.theta);
                     const Eigen::Index n = h.mean.size();
                     Vec m(n + 1);
                     m << h.mean, u.dot(h.mean.segment<2>(a));
                     Mat cv(n + 1, n + 1);
                     cv.topLeftCorner(n, n) = h.cov;
                     const Vec cross = h.cov.middleCols(a, 2) * u;
                     cv.col(n).head(n) = cross;
                     cv.row(n).head(n) = cross.transpose();
                     cv(n, n) = u.dot(h.cov.block<2, 2>(a, a) * u) + s.detector.electronic_noise;
                     h.mean = std::move(m);
                     h.cov = std::move(cv);
                     ++h.n_registers;
                     h.remove_coordinates({a, a + 1});
                     h.live.erase(std::find(h.live.begin(), h.live.end(), s.mode));
                   },
                   [&](const circuit::Feedforward& s) {
                     const Eigen::Index t = h.position(s.target);
                     Mat a = Mat::Identity(h.mean.size(), h.mean.size());
                     a(t, h.register_position(s.reg_x)) += s.gain.x;
                     a(t + 1, h.register_position(s.reg_p)) += s.gain.p;
                     h.mean = (a * h.mean).eval();
                     h.cov = (a * h.cov * a.transpose()).eval();
                   },
               },
               step);
    if (observe) observe(index, min_physical_eigenvalue(h.cov, h.n_registers));
    ++index;
  }

  std::vector<Eigen::Index> idx;
  for (auto id : c.outputs()) {
    const Eigen::Index a = h.position(id);
    idx.push_back(a);
    idx.push_back(a + 1);
  }
  return GaussianState(h.mean(idx), h.cov(idx, idx));
}

struct ShotResult {
  GaussianState outputs;  // conditional on this shot's records
  std::vector<double> registers;
};

/// One sampled run. Physicality of the conditional state can be observed
/// per step as in propagate_moments (registers are plain numbers here).
inline ShotResult run_shot(const circuit::Circuit& c, const GaussianState& input, Rng& rng,
                           const PhysicalityObserver& observe = {}) {
  if (input.n_modes() != c.n_inputs()) throw ConfigError("run_shot: input mode count mismatch");
  std::vector<circuit::ModeId> live;
  for (std::size_t i = 0; i < c.n_inputs(); ++i) live.push_back(c.input(i));
  GaussianState state = input;
  std::vector<double> regs(c.n_registers(), 0.0);
  auto pos = [&](circuit::ModeId id) {
    const auto it = std::find(live.begin(), live.end(), id);
    if (it == live.end()) throw ConfigError("circuit references mode " + std::to_string(id) + " which is not live");
    return static_cast<std::size_t>(it - live.begin());
  };

  std::size_t index = 0;
  for (const auto& step : c.steps()) {
    std::visit(overloaded{
                   [&](const circuit::AddVacuum& s) {
                     state = tensor_vacuum(state, 1);
                     live.push_back(s.id);
                   },
                   [&](const circuit::BeamSplitter& s) {
                     state = beam_splitter(state, pos(s.a), pos(s.b), s.transmittance, s.phi);
                   },
                   [&](const circuit::PhaseShift& s) { state = phase_shift(state, pos(s.mode), s.phi); },
                   [&](const circuit::Loss& s) { state = loss_channel(state, pos(s.mode), s.efficiency); },
                   [&](const circuit::Homodyne& s) {
                     const std::size_t m = pos(s.mode);
                     auto [next, outcome] = homodyne(state, m, s.theta, s.detector, rng);
                     regs[s.reg] = outcome.raw[0];
                     state = std::move(next);
                     live.erase(live.begin() + static_cast<std::ptrdiff_t>(m));
                   },
                   [&](const circuit::Feedforward& s) {
                     state = displace(state, pos(s.target), s.gain.x * regs[s.reg_x], s.gain.p * regs[s.reg_p]);
                   },
               },
               step);
    if (observe) observe(index, state.n_modes() == 0 ? 0.0 : state.min_physical_eigenvalue());
    ++index;
  }

  std::vector<std::size_t> order;
  for (auto id : c.outputs()) order.push_back(pos(id));
  std::vector<Eigen::Index> idx;
  for (auto m : order) {
    idx.push_back(2 * static_cast<Eigen::Index>(m));
    idx.push_back(2 * static_cast<Eigen::Index>(m) + 1);
  }
  return {GaussianState(state.mean()(idx), state.cov()(idx, idx)), std::move(regs)};
}

}  // namespace clonesim
