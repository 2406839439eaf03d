#ifndef CAS_COMM_HPP_
#define CAS_COMM_HPP_

#include <map>
#include <optional>
#include <vector>

#include "cas/core.hpp"
#include "cas/server.hpp"

namespace cas {

// One request/reply unit on the wire: (tag, word, phase) with ⊥ allowed in the
// first two slots. `kind` rides along so servers can tell readers from
// writers; it is not part of the phase/tag matching.
struct Message {
  std::optional<Tag> tag;
  std::optional<Word> word;
  Phase phase = Phase::Qry;
  ClientKind kind = ClientKind::Writer;

  friend bool operator==(const Message& a, const Message& b) {
    return a.tag == b.tag && a.word == b.word && a.phase == b.phase && a.kind == b.kind;
  }
  friend bool operator!=(const Message& a, const Message& b) { return !(a == b); }
};

// What the client parks in pingTx: one message for all servers, or (for the
// pre-write) a per-server word vector under a common tag and phase.
struct Request {
  std::optional<Tag> tag;
  std::optional<Word> word;                          // scalar form
  std::optional<std::vector<Word>> words;            // vector form, slot j-1 for server j
  Phase phase = Phase::Qry;
  ClientKind kind = ClientKind::Writer;
};

// load(j, pingTx): the coordinate actually sent to server j.
inline Message comm_load(int server, const Request& req) {
  Message m;
  m.tag = req.tag;
  m.phase = req.phase;
  m.kind = req.kind;
  m.word = req.words ? std::optional<Word>((*req.words).at(server - 1)) : req.word;
  return m;
}

// Client-side acceptance of a pong token (ping echo, pong): the echo must be
// exactly what we are sending to that server, and outside the query phase the
// acknowledgment must quote our tag.
inline bool comm_pong_matches(int server, const Request& ping_tx, const Message& ping_echo,
                              const std::optional<Message>& pong) {
  if (comm_load(server, ping_tx) != ping_echo) return false;
  if (!pong || !pong->tag) return true;
  if (ping_echo.phase == Phase::Qry) return true;
  return ping_echo.tag == pong->tag;
}

// Server-side acknowledgment: queries answer with the reply tag, every other
// phase echoes the request's tag and phase around the reply word.
inline Message comm_reply(const Message& ping_rx, std::optional<Tag> reply_tag,
                          std::optional<Word> reply_word) {
  Message pong;
  if (ping_rx.phase == Phase::Qry) {
    pong.tag = reply_tag;
    pong.word = std::nullopt;
    pong.phase = Phase::Qry;
  } else {
    pong.tag = ping_rx.tag;
    pong.word = reply_word;
    pong.phase = ping_rx.phase;
  }
  pong.kind = ping_rx.kind;
  return pong;
}

// Per-node communication buffers of the gossip and ping-pong services.
struct CommState {
  // Gossip (server side).
  TagTriple gossip_tx;
  std::vector<TagTriple> gossip_rx;  // most recent triple per peer, 1..N

  // Ping-pong, client side.
  std::optional<Request> ping_tx;
  std::vector<std::optional<Message>> pong_rx;  // acknowledgments per server, 1..N

  // Ping-pong, server side.
  std::vector<std::optional<Message>> ping_rx;  // latest request per client, 1..N
  std::vector<std::optional<Message>> pong_tx;  // parked reply per client, 1..N

  explicit CommState(int n = 0)
      : gossip_rx(n + 1), pong_rx(n + 1), ping_rx(n + 1), pong_tx(n + 1) {}

  void phase_init(const Request& r) {
    for (auto& p : pong_rx) p = std::nullopt;
    ping_tx = r;
  }
  void clear_client() {
    for (auto& p : pong_rx) p = std::nullopt;
    ping_tx = std::nullopt;
  }
  int ack_count() const {
    int c = 0;
    for (const auto& p : pong_rx) c += p.has_value();
    return c;
  }
  std::map<int, Message> aggregated() const {
    std::map<int, Message> out;
    for (int j = 1; j < static_cast<int>(pong_rx.size()); ++j)
      if (pong_rx[j]) out[j] = *pong_rx[j];
    return out;
  }
};

}  // namespace cas

#endif  // CAS_COMM_HPP_
