#ifndef CAS_CLIENT_HPP_
#define CAS_CLIENT_HPP_

#include <functional>
#include <map>

#include "cas/coding.hpp"
#include "cas/comm.hpp"
#include "cas/core.hpp"

namespace cas {

enum class OpKind : std::uint8_t { Write, Read };

// Largest tag quoted in a set of acknowledgments; t0 when none carries one.
inline Tag max_reply_tag(const std::map<int, Message>& replies) {
  Tag best = Tag::t0();
  for (const auto& [j, m] : replies)
    if (m.tag) best = tag_max(best, *m.tag);
  return best;
}

// The reader's decision after its finalize phase: gather the element-bearing
// replies, require at least k_threshold = k + 2e of them, and decode with up
// to e of those corrupted. ⊥ (= nullopt) otherwise.
struct ReadOutcome {
  std::optional<Word> value;
  int element_replies = 0;
};

inline ReadOutcome reader_decode(const std::map<int, Message>& replies, const QuorumConfig& q,
                                 const Gf& f) {
  ReadOutcome out;
  ShareVector sv = ShareVector::empty(q.n);
  for (const auto& [j, m] : replies)
    if (m.word) {
      sv.set(j, f.norm(*m.word));
      ++out.element_replies;
    }
  if (out.element_replies < k_threshold(q)) return out;
  out.value = rs_decode_secret(sv, q.k, f);
  return out;
}

// One client per node, at most one operation in flight, phases strictly
// sequential. The state machine is advanced by quorum returns from the comm
// layer; the next request to park in pingTx comes back as an action.
class ClientOp {
 public:
  struct Action {
    enum class What { Send, WriteDone, ReadDone } what = What::Send;
    Request request;               // What::Send
    std::optional<Word> read_value;  // What::ReadDone, nullopt = ⊥
    int element_replies = 0;
    Tag tag;  // the operation's tag once chosen
  };

  static ClientOp write(int node, Word value) {
    ClientOp op;
    op.node_ = node;
    op.kind_ = OpKind::Write;
    op.value_ = value;
    return op;
  }
  static ClientOp read(int node) {
    ClientOp op;
    op.node_ = node;
    op.kind_ = OpKind::Read;
    return op;
  }

  OpKind kind() const { return kind_; }
  Word value() const { return value_; }
  const Tag& tag() const { return tag_; }
  bool tag_chosen() const { return stage_ > 0; }
  const char* phase_name() const {
    static const char* w[] = {"qry", "pre", "fin", "FIN"};
    static const char* r[] = {"qry", "fin"};
    return kind_ == OpKind::Write ? w[stage_] : r[stage_];
  }

  Action start() const {
    Action a;
    a.request = Request{std::nullopt, std::nullopt, std::nullopt, Phase::Qry,
                        kind_ == OpKind::Write ? ClientKind::Writer : ClientKind::Reader};
    return a;
  }

  Action on_quorum(const std::map<int, Message>& replies, const QuorumConfig& q, const Gf& f,
                   const std::function<Word()>& draw) {
    Action a;
    if (kind_ == OpKind::Write) {
      switch (stage_) {
        case 0: {  // query done: mint the tag, pre-write the coded elements
          tag_ = tag_successor(max_reply_tag(replies), node_);
          auto [poly, shares] = share_secret(value_, q.k, q.n, f, draw);
          std::vector<Word> words(q.n);
          for (int j = 1; j <= q.n; ++j) words[j - 1] = *shares.shares[j - 1];
          stage_ = 1;
          a.request = Request{tag_, std::nullopt, std::move(words), Phase::Pre, ClientKind::Writer};
          a.tag = tag_;
          return a;
        }
        case 1:
          stage_ = 2;
          a.request = Request{tag_, std::nullopt, std::nullopt, Phase::Fin, ClientKind::Writer};
          a.tag = tag_;
          return a;
        case 2:
          stage_ = 3;
          a.request = Request{tag_, std::nullopt, std::nullopt, Phase::FINAL, ClientKind::Writer};
          a.tag = tag_;
          return a;
        default:
          a.what = Action::What::WriteDone;
          a.tag = tag_;
          return a;
      }
    }
    if (stage_ == 0) {  // reader query done: chase the max finalized tag
      tag_ = max_reply_tag(replies);
      stage_ = 1;
      a.request = Request{tag_, std::nullopt, std::nullopt, Phase::Fin, ClientKind::Reader};
      a.tag = tag_;
      return a;
    }
    ReadOutcome r = reader_decode(replies, q, f);
    a.what = Action::What::ReadDone;
    a.read_value = r.value;
    a.element_replies = r.element_replies;
    a.tag = tag_;
    return a;
  }

 private:
  int node_ = 0;
  OpKind kind_ = OpKind::Write;
  Word value_ = 0;
  int stage_ = 0;  // writer: query/pre/fin/FIN; reader: query/fin
  Tag tag_;
};

}  // namespace cas

#endif  // CAS_CLIENT_HPP_
