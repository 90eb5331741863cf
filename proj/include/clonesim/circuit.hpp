#pragma once

// A small straight-line circuit description shared by every engine:
// modes are created, mixed, attenuated and measured; measurement records
// are fed forward as displacements.

#include <algorithm>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "clonesim/errors.hpp"
#include "clonesim/measurement.hpp"

namespace clonesim::circuit {

using ModeId = int;
using RegId = int;

struct AddVacuum {
  ModeId id;
  std::string label;
};
struct BeamSplitter {
  ModeId a, b;
  double transmittance;
  double phi = 0.0;
};
struct PhaseShift {
  ModeId mode;
  double phi;
};
struct Loss {
  ModeId mode;
  double efficiency;
  std::string label;
};
/// Measures cosθ·x + sinθ·p of `mode` through `detector` into register
/// `reg` and discards the mode.
struct Homodyne {
  ModeId mode;
  double theta;
  DetectorModel detector;
  RegId reg;
  std::string label;
};
/// x_target += gain.x·reg_x, p_target += gain.p·reg_p.
struct Feedforward {
  ModeId target;
  RegId reg_x, reg_p;
  FeedforwardGain gain;
  std::size_t stage;
};

using Step = std::variant<AddVacuum, BeamSplitter, PhaseShift, Loss, Homodyne, Feedforward>;

class Circuit {
 public:
  explicit Circuit(std::size_t n_inputs, std::vector<std::string> input_labels = {})
      : n_inputs_(n_inputs), next_mode_(static_cast<ModeId>(n_inputs)) {
    if (input_labels.empty()) {
      for (std::size_t i = 0; i < n_inputs; ++i) {
        input_labels.push_back(n_inputs == 1 ? "in" : "in" + std::to_string(i));
      }
    }
    if (input_labels.size() != n_inputs) throw ConfigError("circuit: one label per input required");
    input_labels_ = std::move(input_labels);
  }

  ModeId input(std::size_t i) const {
    if (i >= n_inputs_) throw std::out_of_range("circuit: input index");
    return static_cast<ModeId>(i);
  }

  ModeId add_vacuum(std::string label) {
    const ModeId id = next_mode_++;
    steps_.push_back(AddVacuum{id, std::move(label)});
    return id;
  }
  void beam_splitter(ModeId a, ModeId b, double transmittance, double phi = 0.0) {
    if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
      throw ConfigError("circuit: beam splitter transmittance must lie in [0, 1]");
    }
    steps_.push_back(BeamSplitter{a, b, transmittance, phi});
  }
  void phase_shift(ModeId mode, double phi) { steps_.push_back(PhaseShift{mode, phi}); }
  void loss(ModeId mode, double efficiency, std::string label) {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ConfigError("circuit: loss efficiency must lie in (0, 1]");
    if (efficiency < 1.0) steps_.push_back(Loss{mode, efficiency, std::move(label)});
  }
  RegId homodyne(ModeId mode, double theta, const DetectorModel& det, std::string label) {
    det.validate();
    const RegId reg = n_registers_++;
    steps_.push_back(Homodyne{mode, theta, det, reg, std::move(label)});
    return reg;
  }

  /// Dual homodyne on `mode` via a 50/50 split with vacuum ancilla
  /// `ancilla_label`; returns the (x, p) photocurrent registers.
  std::pair<RegId, RegId> dual_homodyne(ModeId mode, const DetectorModel& det, const std::string& ancilla_label,
                                        const std::string& label) {
    const ModeId aux = add_vacuum(ancilla_label);
    beam_splitter(aux, mode, 0.5);
    const RegId rx = homodyne(mode, 0.0, det, label + "_x");
    const RegId rp = homodyne(aux, std::numbers::pi / 2, det, label + "_p");
    return {rx, rp};
  }

  void feedforward(ModeId target, RegId reg_x, RegId reg_p, FeedforwardGain gain, std::size_t stage) {
    n_stages_ = std::max(n_stages_, stage + 1);
    steps_.push_back(Feedforward{target, reg_x, reg_p, gain, stage});
  }

  void set_outputs(std::vector<ModeId> outputs) { outputs_ = std::move(outputs); }

  /// Copy with the gains of feed-forward stage `stage` replaced.
  Circuit with_gain(std::size_t stage, FeedforwardGain gain) const {
    Circuit c = *this;
    for (auto& step : c.steps_) {
      if (auto* ff = std::get_if<Feedforward>(&step); ff && ff->stage == stage) ff->gain = gain;
    }
    return c;
  }

  std::size_t n_inputs() const { return n_inputs_; }
  const std::vector<std::string>& input_labels() const { return input_labels_; }
  std::size_t n_registers() const { return static_cast<std::size_t>(n_registers_); }
  std::size_t n_stages() const { return n_stages_; }
  const std::vector<Step>& steps() const { return steps_; }
  const std::vector<ModeId>& outputs() const { return outputs_; }

 private:
  std::size_t n_inputs_;
  std::vector<std::string> input_labels_;
  ModeId next_mode_;
  RegId n_registers_ = 0;
  std::size_t n_stages_ = 0;
  std::vector<Step> steps_;
  std::vector<ModeId> outputs_;
};

}  // namespace clonesim::circuit
