#include "comaze/partner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace comaze {

double proportional_action(double phi_human, double phi) {
  return std::clamp(kProportionalGain * (phi_human - phi), -1.0, 1.0);
}

std::string to_string(PartnerKind kind) {
  switch (kind) {
    case PartnerKind::live: return "live";
    case PartnerKind::oracle: return "oracle";
    case PartnerKind::noisy: return "noisy";
    case PartnerKind::lazy: return "lazy";
    case PartnerKind::null: return "null";
  }
  return "unknown";
}

PartnerKind partner_kind_from_string(const std::string& name) {
  for (PartnerKind k : {PartnerKind::live, PartnerKind::oracle, PartnerKind::noisy,
                        PartnerKind::lazy, PartnerKind::null}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown partner kind '" + name + "'");
}

void PartnerSpec::validate() const {
  if (!std::isfinite(position_gain) || !std::isfinite(velocity_gain) || !std::isfinite(noise_std) ||
      !std::isfinite(response_probability)) {
    throw std::invalid_argument("partner: parameters must be finite");
  }
  if (noise_std < 0.0) throw std::invalid_argument("partner: noise_std must be >= 0");
  if (response_probability < 0.0 || response_probability > 1.0) {
    throw std::invalid_argument("partner: response_probability must lie in [0, 1]");
  }
}

bool CommandMailbox::publish(double phi_human, double timestamp) {
  if (!std::isfinite(phi_human)) return false;
  std::lock_guard lock(mu_);
  slot_ = PartnerCommand{std::clamp(phi_human, -max_tilt_, max_tilt_), timestamp};
  return true;
}

std::optional<PartnerCommand> CommandMailbox::latest() const {
  std::lock_guard lock(mu_);
  return slot_;
}

void CommandMailbox::clear() {
  std::lock_guard lock(mu_);
  slot_.reset();
}

double oracle_action(const TrayState& s, const TrayGeometry& geom, double position_gain,
                     double velocity_gain) {
  const double waypoint_x = geom.on_start_side(s.position()) ? 0.0 : geom.goal_center.x;
  return std::clamp(position_gain * (waypoint_x - s.x) - velocity_gain * s.vx, -1.0, 1.0);
}

Partner::Partner(PartnerSpec spec, TrayGeometry geom, const CommandMailbox* mailbox)
    : spec_(std::move(spec)), geom_(geom), mailbox_(mailbox) {
  spec_.validate();
  if (spec_.kind == PartnerKind::live && mailbox_ == nullptr) {
    throw std::invalid_argument("partner: live partner needs a command mailbox");
  }
}

double Partner::act(const TrayState& s, Rng& rng) const {
  switch (spec_.kind) {
    case PartnerKind::null:
      return 0.0;
    case PartnerKind::oracle:
      return oracle_action(s, geom_, spec_.position_gain, spec_.velocity_gain);
    case PartnerKind::noisy: {
      std::normal_distribution<double> noise(0.0, 1.0);
      const double base = oracle_action(s, geom_, spec_.position_gain, spec_.velocity_gain);
      return std::clamp(base + spec_.noise_std * noise(rng), -1.0, 1.0);
    }
    case PartnerKind::lazy: {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      const bool responds = coin(rng) < spec_.response_probability;
      return responds ? oracle_action(s, geom_, spec_.position_gain, spec_.velocity_gain) : 0.0;
    }
    case PartnerKind::live: {
      const auto cmd = mailbox_->latest();
      if (!cmd) {
        spdlog::debug("live partner: no command received yet, holding level");
        return 0.0;
      }
      return proportional_action(cmd->phi_human, s.phi);
    }
  }
  return 0.0;
}

}  // namespace comaze
