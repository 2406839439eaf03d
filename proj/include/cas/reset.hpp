#ifndef CAS_RESET_HPP_
#define CAS_RESET_HPP_

#include <vector>

#include "cas/core.hpp"

namespace cas {

// Overlay piggybacked on every token. While a node is mid-wave its tokens
// carry only the overlay (bodies suppressed), so the channels hold nothing
// but reset traffic until the wave completes.
struct ResetOverlay {
  enum class Kind : std::uint8_t { None, Freeze, Resume } kind = Kind::None;
  Tag tag;

  friend bool operator==(const ResetOverlay& a, const ResetOverlay& b) {
    return a.kind == b.kind && (a.kind == Kind::None || a.tag == b.tag);
  }
};

// Coordinator-free two-phase echo wave. Freeze: disable the machines, run
// localReset(t), stamp Freeze(t) until every peer is known frozen with t.
// Resume: stamp Resume(t) until every peer is known resuming, then re-enable.
// Concurrent initiators merge on tag; a forged larger tag wins. Idle nodes
// echo Resume overlays so the last completer cannot strand a peer.
class ResetNode {
 public:
  enum class Phase : std::uint8_t { Idle, Freeze, Resume };

  ResetNode() = default;
  ResetNode(int id, int n) : id_(id), n_(n), ack_f_(n + 1), ack_r_(n + 1), last_seen_(n + 1) {}

  Phase phase() const { return phase_; }
  const Tag& tag() const { return tag_; }
  bool idle() const { return phase_ == Phase::Idle; }

  // What to stamp on a token departing toward peer j.
  ResetOverlay stamp(int j) const {
    switch (phase_) {
      case Phase::Freeze: return {ResetOverlay::Kind::Freeze, tag_};
      case Phase::Resume: return {ResetOverlay::Kind::Resume, tag_};
      case Phase::Idle:
        if (last_seen_[j].kind == ResetOverlay::Kind::Resume)
          return {ResetOverlay::Kind::Resume, last_seen_[j].tag};
        return {};
    }
    return {};
  }

  struct Effect {
    bool freeze_now = false;   // caller must disable machines + localReset(tag())
    bool resume_now = false;   // caller must re-enable machines
  };

  // A wave begins here (local globalReset call or a Freeze overlay). Larger
  // tags replace smaller mid-wave ones.
  Effect begin_wave(const Tag& t) {
    if (phase_ != Phase::Idle && !tag_less(tag_, t)) return {};
    phase_ = Phase::Freeze;
    tag_ = t;
    std::fill(ack_f_.begin(), ack_f_.end(), false);
    std::fill(ack_r_.begin(), ack_r_.end(), false);
    Effect e;
    e.freeze_now = true;
    return e;
  }

  Effect on_overlay(int j, const ResetOverlay& ov) {
    last_seen_.at(j) = ov;
    Effect e;
    switch (phase_) {
      case Phase::Idle:
        if (ov.kind == ResetOverlay::Kind::Freeze) {
          e = begin_wave(ov.tag);
          if (e.freeze_now) ack_f_[j] = true;
        }
        break;
      case Phase::Freeze:
        if (ov.kind == ResetOverlay::Kind::Freeze) {
          if (tag_less(tag_, ov.tag)) {
            e = begin_wave(ov.tag);
            ack_f_[j] = true;
          } else if (ov.tag == tag_) {
            ack_f_[j] = true;
          }
        } else if (ov.kind == ResetOverlay::Kind::Resume) {
          if (tag_less(tag_, ov.tag)) {
            // A forged larger wave already resuming: adopt it, count the peer.
            e = begin_wave(ov.tag);
          }
          if (ov.tag == tag_ || tag_less(tag_, ov.tag)) {
            ack_f_[j] = true;
            ack_r_[j] = true;
          }
        }
        if (all_peers(ack_f_)) {
          phase_ = Phase::Resume;
          if (all_peers(ack_r_)) {
            phase_ = Phase::Idle;
            e.resume_now = true;
          }
        }
        break;
      case Phase::Resume:
        if (ov.kind == ResetOverlay::Kind::Freeze && tag_less(tag_, ov.tag)) {
          e = begin_wave(ov.tag);
          ack_f_[j] = true;
          break;
        }
        if (ov.kind == ResetOverlay::Kind::Resume) {
          if (tag_less(tag_, ov.tag)) {
            e = begin_wave(ov.tag);
            ack_f_[j] = true;
            break;
          }
          if (ov.tag == tag_) ack_r_[j] = true;
        }
        if (all_peers(ack_r_)) {
          phase_ = Phase::Idle;
          e.resume_now = true;
        }
        break;
    }
    return e;
  }

  // Fault injection hooks.
  void force(Phase ph, const Tag& t) {
    phase_ = ph;
    tag_ = t;
    std::fill(ack_f_.begin(), ack_f_.end(), false);
    std::fill(ack_r_.begin(), ack_r_.end(), false);
  }

 private:
  bool all_peers(const std::vector<bool>& acks) const {
    for (int j = 1; j <= n_; ++j)
      if (j != id_ && !acks[j]) return false;
    return true;
  }

  int id_ = 0;
  int n_ = 0;
  Phase phase_ = Phase::Idle;
  Tag tag_;
  std::vector<bool> ack_f_, ack_r_;
  std::vector<ResetOverlay> last_seen_;
};

}  // namespace cas

#endif  // CAS_RESET_HPP_
