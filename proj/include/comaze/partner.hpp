#pragma once

#include "comaze/mlp.hpp"
#include "comaze/tray_physics.hpp"

#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

namespace comaze {

// Tele-operation gain from the handheld tray angle error to a rate command.
inline constexpr double kProportionalGain = 2.0;

// a = clamp(2 * (phi_human - phi), -1, 1)
double proportional_action(double phi_human, double phi);

enum class PartnerKind { live, oracle, noisy, lazy, null };

std::string to_string(PartnerKind kind);
PartnerKind partner_kind_from_string(const std::string& name);

struct PartnerSpec {
  PartnerKind kind = PartnerKind::oracle;
  double position_gain = 4.0;    // 1/m
  double velocity_gain = 1.0;    // s/m
  double noise_std = 0.3;
  double response_probability = 0.5;
  std::uint64_t seed = 0;
  // Free-form label recorded in trial logs; defaults to the kind name.
  std::string tag;

  std::string identity() const { return tag.empty() ? to_string(kind) : tag; }
  void validate() const;
};

// Spec with default parameters for the given kind.
inline PartnerSpec partner_spec(PartnerKind kind) {
  PartnerSpec s;
  s.kind = kind;
  return s;
}

struct PartnerCommand {
  double phi_human = 0.0;  // rad
  double timestamp = 0.0;  // s
};

// Single-slot mailbox holding the most recent live command. Written by the
// network side, read once per frame by the session loop.
class CommandMailbox {
 public:
  explicit CommandMailbox(double max_tilt = 0.10) : max_tilt_(max_tilt) {}

  // Clamps to the tilt range; non-finite angles are dropped (returns false).
  bool publish(double phi_human, double timestamp);
  std::optional<PartnerCommand> latest() const;
  void clear();
  double max_tilt() const { return max_tilt_; }

 private:
  double max_tilt_;
  mutable std::mutex mu_;
  std::optional<PartnerCommand> slot_;
};

// PD law on the partner's own axis towards the gap centre while the ball is
// on the start side, towards the goal afterwards.
double oracle_action(const TrayState& s, const TrayGeometry& geom, double position_gain = 4.0,
                     double velocity_gain = 1.0);

class PartnerUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fills the human seat. Scripted kinds draw their randomness from the rng
// passed to act(); the live kind reads the mailbox with zero-order hold.
class Partner {
 public:
  Partner(PartnerSpec spec, TrayGeometry geom, const CommandMailbox* mailbox = nullptr);

  double act(const TrayState& s, Rng& rng) const;

  const PartnerSpec& spec() const { return spec_; }
  std::string identity() const { return spec_.identity(); }

 private:
  PartnerSpec spec_;
  TrayGeometry geom_;
  const CommandMailbox* mailbox_;
};

}  // namespace comaze
