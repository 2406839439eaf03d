#include "cas/sim.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <variant>

#include "cas/coding.hpp"
#include "cas/comm.hpp"
#include "cas/server.hpp"

namespace cas {

namespace {

struct GossipBody {
  TagTriple triple;
};
struct PingBody {
  std::optional<Message> m;
};
struct PongBody {
  std::optional<Message> ping;
  std::optional<Message> pong;
};

struct TokenPayload {
  ResetOverlay overlay;
  bool body_valid = true;  // false while the sender is mid-reset (channel flushing)
  std::variant<GossipBody, PingBody, PongBody> body;
};

struct Channel {
  enum class Kind : std::uint8_t { Gossip, PingPong } kind = Kind::Gossip;
  int a = 0, b = 0;   // PingPong: a = client node, b = server node
  bool at_a = true;   // which side holds the token (a == b on self channels)
  std::optional<TokenPayload> preloaded;  // injected in-transit content

  int holder() const { return at_a ? a : b; }
  int other() const { return at_a ? b : a; }
};

struct Node {
  ServerState server;
  CommState comm;
  ResetNode reset;
  bool alive = true;

  bool has_client = false;
  bool client_dead = false;
  std::vector<ScriptOp> script;
  std::size_t script_next = 0;
  std::optional<ClientOp> op;
  int op_seq = 0;
};

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string storage_summary(const ServerState& s) {
  std::string out = "[";
  for (const auto& r : s.storage()) {
    if (out.size() > 1) out += ",";
    out += tag_str(r.tag) + ":" + phase_str(r.phase) + ":" + (r.word ? "w" : "-");
  }
  return out + "]";
}

std::string triple_str(const TagTriple& t) {
  return "pre=" + tag_str(t.pre) + " fin=" + tag_str(t.fin) + " FIN=" + tag_str(t.FIN);
}

class Simulator {
 public:
  explicit Simulator(const Scenario& sc)
      : sc_(sc),
        f_(sc.p),
        r_sched_(sc.seed ^ 0x9e3779b97f4a7c15ull),
        r_inject_(sc.seed ^ 0xbf58476d1ce4e5b9ull),
        r_shares_(sc.seed ^ 0x94d049bb133111ebull),
        r_malicious_(sc.seed ^ 0x2545f4914f6cdd1dull) {
    const int n = sc.quorum.n;
    auto defaults = default_object_shares(sc.v0, sc.quorum.k, n, f_);
    nodes_.resize(n + 1);
    for (int i = 1; i <= n; ++i) {
      ServerConfig cfg;
      cfg.quorum = sc.quorum;
      cfg.maxint = sc.maxint;
      cfg.delta = sc.delta;
      cfg.bounded = sc.bounded;
      cfg.default_share = *defaults.shares[i - 1];
      nodes_[i].server = ServerState(i, cfg);
      nodes_[i].comm = CommState(n);
      nodes_[i].reset = ResetNode(i, n);
      auto it = sc.scripts.find(i);
      if (it != sc.scripts.end()) {
        nodes_[i].has_client = true;
        nodes_[i].script = it->second;
      }
    }
    for (int i = 1; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j)
        channels_.push_back(Channel{Channel::Kind::Gossip, i, j, true, {}});
    for (int c = 1; c <= n; ++c) {
      if (!nodes_[c].has_client) continue;
      for (int s = 1; s <= n; ++s)
        channels_.push_back(Channel{Channel::Kind::PingPong, c, s, true, {}});
    }
    rt_phase_.assign(channels_.size(), 0);
    for (int m : sc.faults.malicious) malicious_.insert(m);
    sweep_ = static_cast<std::int64_t>(channels_.size()) + n;
    for (const auto& tf : sc.faults.timed) last_timed_at_ = std::max(last_timed_at_, tf.at);
  }

  Trace run(RunStats* stats) {
    inject();
    snapshot_initial_tags();

    std::int64_t quiesced_at = -1;
    while (step_ < sc_.budget) {
      apply_timed_faults();
      if (quiesced()) {
        if (quiesced_at < 0) quiesced_at = step_;
        if (step_ - quiesced_at >= 4 * sweep_) break;  // drain tail for gossip and trace
      } else {
        quiesced_at = -1;
      }
      int s = pick_step();
      if (s < 0) break;  // nothing enabled at all
      execute(s);
      ++step_;
      check_cycle_boundary();
    }
    if (!quiesced()) {
      trace_.incomplete = true;
      log(0, "note", "budget=exhausted");
    }
    if (stats) {
      stats->steps = step_;
      stats->cycles = cycle_;
      stats->ops_completed = ops_completed_;
      stats->ops_failed = ops_failed_;
      stats->resets_completed = resets_completed_;
      stats->max_storage = max_storage_;
    }
    return std::move(trace_);
  }

 private:
  int n() const { return sc_.quorum.n; }

  // ---- randomness helpers (raw engine draws only, for cross-build determinism)
  static std::uint64_t draw(std::mt19937_64& r) { return r(); }
  std::int64_t rnd(std::mt19937_64& r, std::int64_t m) {
    return m <= 0 ? 0 : static_cast<std::int64_t>(draw(r) % static_cast<std::uint64_t>(m));
  }

  // ---- fault injection --------------------------------------------------
  Tag random_tag(std::int64_t ceil) {
    return Tag::of(1 + rnd(r_inject_, ceil), 1 + static_cast<int>(rnd(r_inject_, n())));
  }
  TagTriple random_triple(std::int64_t ceil) {
    auto one = [&]() { return rnd(r_inject_, 4) == 0 ? Tag::t0() : random_tag(ceil); };
    return TagTriple{one(), one(), one()};
  }
  Message random_message(std::int64_t ceil) {
    Message m;
    if (rnd(r_inject_, 3) != 0) m.tag = random_tag(ceil);
    if (rnd(r_inject_, 2) != 0) m.word = rnd(r_inject_, f_.p());
    switch (rnd(r_inject_, 4)) {
      case 0: m.phase = Phase::Pre; break;
      case 1: m.phase = Phase::Fin; break;
      case 2: m.phase = Phase::FINAL; break;
      default: m.phase = Phase::Qry; break;
    }
    m.kind = rnd(r_inject_, 2) ? ClientKind::Reader : ClientKind::Writer;
    return m;
  }

  void inject() {
    const auto& fs = sc_.faults;
    if (fs.stuff) {
      auto [ceil, count] = *fs.stuff;
      for (int i = 1; i <= n(); ++i) {
        std::vector<Record> recs;
        std::set<std::pair<std::int64_t, int>> seen;
        int guard = 0;
        while (static_cast<int>(recs.size()) < count && ++guard < count * 50) {
          Tag t = random_tag(ceil);
          if (!seen.insert({t.z, t.owner}).second) continue;
          std::optional<Word> w;
          if (rnd(r_inject_, 2)) w = rnd(r_inject_, f_.p());
          Phase ph = rnd(r_inject_, 3) == 0 ? Phase::Pre : (rnd(r_inject_, 2) ? Phase::Fin : Phase::FINAL);
          recs.push_back(Record{t, w, ph});
        }
        nodes_[i].server.set_storage(std::move(recs));
        log(i, "fault", "kind=stuff n=" + std::to_string(count));
      }
    }
    if (fs.corrupt) {
      const std::int64_t ceil = std::max<std::int64_t>(1, fs.corrupt_tag_ceiling);
      for (int i = 1; i <= n(); ++i) {
        Node& nd = nodes_[i];
        std::vector<Record> recs;
        std::set<std::pair<std::int64_t, int>> seen;
        const int cnt = static_cast<int>(rnd(r_inject_, 5));
        for (int c = 0; c < cnt; ++c) {
          Tag t = random_tag(ceil);
          if (!seen.insert({t.z, t.owner}).second) continue;
          std::optional<Word> w;
          if (rnd(r_inject_, 2)) w = rnd(r_inject_, f_.p());
          Phase ph = rnd(r_inject_, 3) == 0 ? Phase::Pre : (rnd(r_inject_, 2) ? Phase::Fin : Phase::FINAL);
          recs.push_back(Record{t, w, ph});
        }
        nd.server.set_storage(std::move(recs));
        for (int j = 1; j <= n(); ++j) nd.server.set_view_slot(j, random_triple(ceil));
        nd.comm.gossip_tx = random_triple(ceil);
        if (rnd(r_inject_, 2)) {
          Request rq;
          Message m = random_message(ceil);
          rq.tag = m.tag;
          rq.word = m.word;
          rq.phase = m.phase;
          rq.kind = m.kind;
          nd.comm.ping_tx = rq;
        }
        for (int j = 1; j <= n(); ++j) {
          if (rnd(r_inject_, 3) == 0) nd.comm.pong_rx[j] = random_message(ceil);
          if (rnd(r_inject_, 3) == 0) nd.comm.ping_rx[j] = random_message(ceil);
          if (rnd(r_inject_, 3) == 0) nd.comm.pong_tx[j] = random_message(ceil);
        }
        if (fs.corrupt_reset && rnd(r_inject_, 3) == 0) {
          auto ph = rnd(r_inject_, 2) ? ResetNode::Phase::Freeze : ResetNode::Phase::Resume;
          nd.reset.force(ph, random_tag(ceil));
          nd.server.set_enabled(false);
        }
      }
      for (auto& ch : channels_) {
        if (rnd(r_inject_, 2) == 0) continue;
        TokenPayload tp;
        if (fs.corrupt_reset && rnd(r_inject_, 4) == 0) {
          tp.overlay.kind = rnd(r_inject_, 2) ? ResetOverlay::Kind::Freeze : ResetOverlay::Kind::Resume;
          tp.overlay.tag = random_tag(ceil);
        }
        if (ch.kind == Channel::Kind::Gossip) {
          tp.body = GossipBody{random_triple(ceil)};
        } else if (ch.at_a) {
          PingBody pb;
          if (rnd(r_inject_, 2)) pb.m = random_message(ceil);
          tp.body = pb;
        } else {
          PongBody pb;
          if (rnd(r_inject_, 2)) pb.ping = random_message(ceil);
          if (rnd(r_inject_, 2)) pb.pong = random_message(ceil);
          tp.body = pb;
        }
        ch.preloaded = tp;
      }
      log(0, "fault", "kind=corrupt ceil=" + std::to_string(ceil));
    }
    if (fs.plant_top) {
      Tag t = Tag::of(sc_.maxint, 1 + static_cast<int>(rnd(r_inject_, n())));
      std::optional<Word> w = rnd(r_inject_, f_.p());
      auto recs = nodes_[1].server.storage();
      std::erase_if(recs, [&](const Record& r) { return r.tag == t; });
      recs.push_back(Record{t, w, Phase::Fin});
      nodes_[1].server.set_storage(std::move(recs));
      log(1, "fault", "kind=planttop t=" + tag_str(t));
    }
    for (const auto& fr : sc_.faults.forced_reset) {
      nodes_[fr.node].reset.force(fr.phase, fr.tag);
      if (fr.phase != ResetNode::Phase::Idle) nodes_[fr.node].server.set_enabled(false);
      log(fr.node, "fault", std::string("kind=rstate ph=") +
                                (fr.phase == ResetNode::Phase::Freeze ? "freeze" : "resume") +
                                " t=" + tag_str(fr.tag));
    }
    for (int m : malicious_) log(m, "fault", "kind=malicious");
  }

  void collect_tags(std::vector<Tag>& out) const {
    auto add = [&](const Tag& t) {
      if (!t.bottom) out.push_back(t);
    };
    auto add_triple = [&](const TagTriple& tr) {
      add(tr.pre);
      add(tr.fin);
      add(tr.FIN);
    };
    auto add_msg = [&](const std::optional<Message>& m) {
      if (m && m->tag) add(*m->tag);
    };
    for (int i = 1; i <= n(); ++i) {
      const Node& nd = nodes_[i];
      for (const auto& r : nd.server.storage()) add(r.tag);
      for (const auto& tr : nd.server.view()) add_triple(tr);
      add_triple(nd.comm.gossip_tx);
      if (nd.comm.ping_tx && nd.comm.ping_tx->tag) add(*nd.comm.ping_tx->tag);
      for (const auto& m : nd.comm.pong_rx) add_msg(m);
      for (const auto& m : nd.comm.ping_rx) add_msg(m);
      for (const auto& m : nd.comm.pong_tx) add_msg(m);
      if (!nd.reset.idle()) add(nd.reset.tag());
      if (nd.op && nd.op->tag_chosen()) add(nd.op->tag());
    }
    for (const auto& ch : channels_) {
      if (!ch.preloaded) continue;
      if (ch.preloaded->overlay.kind != ResetOverlay::Kind::None) add(ch.preloaded->overlay.tag);
      if (const auto* g = std::get_if<GossipBody>(&ch.preloaded->body)) add_triple(g->triple);
      if (const auto* p = std::get_if<PingBody>(&ch.preloaded->body)) add_msg(p->m);
      if (const auto* q = std::get_if<PongBody>(&ch.preloaded->body)) {
        add_msg(q->ping);
        add_msg(q->pong);
      }
    }
  }

  void snapshot_initial_tags() {
    std::vector<Tag> tags;
    collect_tags(tags);
    for (const auto& t : tags) initial_tags_.insert({t.z, t.owner});
  }

  // Largest initial-state tag still present anywhere: the validity threshold
  // of a write starting now.
  Tag surviving_initial_max() const {
    std::vector<Tag> tags;
    collect_tags(tags);
    Tag best = Tag::t0();
    for (const auto& t : tags)
      if (initial_tags_.count({t.z, t.owner})) best = tag_max(best, t);
    return best;
  }

  // ---- scheduling --------------------------------------------------------
  // Step ids: [0, n) client-start slots (node id-1), [n, n+channels) traversals.
  int total_steps() const { return n() + static_cast<int>(channels_.size()); }

  bool client_start_enabled(int node) const {
    const Node& nd = nodes_[node];
    if (!nd.has_client || !nd.alive || nd.client_dead || nd.op) return false;
    if (!nd.reset.idle()) return false;
    if (nd.script_next >= nd.script.size()) return false;
    return nd.script[nd.script_next].after <= step_;
  }

  bool channel_enabled(const Channel& ch) const {
    return nodes_[ch.a].alive && nodes_[ch.b].alive;
  }

  bool step_enabled(int s) const {
    if (s < n()) return client_start_enabled(s + 1);
    return channel_enabled(channels_[s - n()]);
  }

  bool node_starved(int node) const {
    return std::find(sc_.starve.begin(), sc_.starve.end(), node) != sc_.starve.end();
  }

  bool fair_now() {
    if (sc_.sched == SchedKind::Fair) return true;
    if (sc_.sched == SchedKind::Unfair) return false;
    bool trigger = false;
    for (int i = 1; i <= n() && !trigger; ++i) {
      if (!nodes_[i].reset.idle()) trigger = true;
      if (nodes_[i].alive && sc_.bounded &&
          !tag_less(nodes_[i].server.max_phase_all(), nodes_[i].server.cfg().t_top()))
        trigger = true;
    }
    const std::int64_t window = sc_.fair_window > 0 ? sc_.fair_window : 10 * sweep_;
    if (trigger) fair_until_ = step_ + window;
    return step_ < fair_until_;
  }

  int pick_step() {
    const int total = total_steps();
    if (fair_now()) {
      for (int probe = 0; probe < total; ++probe) {
        cursor_ = (cursor_ + 1) % total;
        if (step_enabled(cursor_)) return cursor_;
      }
      return -1;
    }
    // Weighted-unfair: per-node weights drawn once; starved nodes take no steps.
    if (weights_.empty()) {
      weights_.assign(n() + 1, 1);
      for (int i = 1; i <= n(); ++i) weights_[i] = 1 + rnd(r_sched_, 8);
    }
    std::vector<int> ids;
    std::vector<std::int64_t> w;
    std::int64_t total_w = 0;
    for (int s = 0; s < total; ++s) {
      if (!step_enabled(s)) continue;
      int na, nb;
      if (s < n()) {
        na = nb = s + 1;
      } else {
        na = channels_[s - n()].a;
        nb = channels_[s - n()].b;
      }
      if (node_starved(na) || node_starved(nb)) continue;
      ids.push_back(s);
      w.push_back(weights_[na] * weights_[nb]);
      total_w += w.back();
    }
    if (ids.empty()) return -1;
    std::int64_t pickv = rnd(r_sched_, total_w);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (pickv < w[i]) return ids[i];
      pickv -= w[i];
    }
    return ids.back();
  }

  // ---- timed faults -------------------------------------------------------
  void apply_timed_faults() {
    for (const auto& tf : sc_.faults.timed) {
      if (tf.at != step_) continue;
      Node& nd = nodes_[tf.node];
      switch (tf.what) {
        case FaultScript::Timed::What::Crash:
          if (!nd.alive) break;
          nd.alive = false;
          if (nd.op) {
            log(tf.node, "fail",
                "reason=crash seq=" + std::to_string(nd.op_seq) +
                    (nd.op->tag_chosen() ? " t=" + tag_str(nd.op->tag()) : ""));
            nd.op.reset();
            ++ops_failed_;
          }
          if (nd.has_client) nd.client_dead = true;  // failed clients never resume
          log(tf.node, "fault", "kind=crash");
          break;
        case FaultScript::Timed::What::Resume:
          if (nd.alive) break;
          nd.alive = true;
          nd.server.set_storage({});  // resumed servers restart with empty storage
          for (int j = 1; j <= n(); ++j) nd.server.set_view_slot(j, TagTriple{});
          nd.server.set_enabled(true);
          nd.comm = CommState(n());
          nd.reset = ResetNode(tf.node, n());
          log(tf.node, "fault", "kind=resume");
          break;
        case FaultScript::Timed::What::Reset:
          log(tf.node, "reset", "ev=init t=" + tag_str(tf.tag));
          apply_reset_effect(tf.node, nodes_[tf.node].reset.begin_wave(tf.tag));
          break;
      }
    }
  }

  // ---- reset wave ---------------------------------------------------------
  void apply_reset_effect(int node, const ResetNode::Effect& eff) {
    Node& nd = nodes_[node];
    if (eff.freeze_now) {
      nd.server.set_enabled(false);
      nd.server.local_reset(nd.reset.tag());
      if (nd.op) {
        log(node, "fail",
            "reason=reset seq=" + std::to_string(nd.op_seq) +
                (nd.op->tag_chosen() ? " t=" + tag_str(nd.op->tag()) : ""));
        nd.op.reset();
        ++ops_failed_;
      }
      nd.comm.clear_client();
      for (int j = 1; j <= n(); ++j) {
        nd.comm.ping_rx[j] = std::nullopt;
        nd.comm.pong_tx[j] = std::nullopt;
      }
      nd.comm.gossip_tx = TagTriple{};
      log(node, "reset", "ev=frozen t=" + tag_str(nd.reset.tag()));
    }
    if (eff.resume_now) {
      nd.server.set_enabled(true);
      nd.comm.gossip_tx = nd.server.tag_tuple();
      log(node, "reset", "ev=resumed s=" + storage_summary(nd.server));
      bool all_idle = true;
      for (int i = 1; i <= n(); ++i)
        if (!nodes_[i].reset.idle()) all_idle = false;
      if (all_idle) {
        ++resets_completed_;
        log(0, "reset", "ev=done");
      }
    }
  }

  // ---- step execution -----------------------------------------------------
  void execute(int s) {
    if (s < n()) {
      start_client_op(s + 1);
      return;
    }
    traverse(channels_[s - n()], static_cast<std::size_t>(s - n()));
  }

  void start_client_op(int node) {
    Node& nd = nodes_[node];
    const ScriptOp& so = nd.script[nd.script_next++];
    ++nd.op_seq;
    if (so.kind == OpKind::Write) {
      nd.op = ClientOp::write(node, f_.norm(so.value));
      log(node, "inv",
          "op=write v=" + std::to_string(f_.norm(so.value)) + " vth=" +
              tag_str(surviving_initial_max()) + " seq=" + std::to_string(nd.op_seq));
    } else {
      nd.op = ClientOp::read(node);
      log(node, "inv", "op=read seq=" + std::to_string(nd.op_seq));
    }
    auto action = nd.op->start();
    nd.comm.phase_init(action.request);
    log(node, "qcall", std::string("phase=") + phase_str(action.request.phase) +
                           " seq=" + std::to_string(nd.op_seq));
  }

  TokenPayload departure(Channel& ch) {
    const int h = ch.holder();
    Node& nd = nodes_[h];
    TokenPayload tp;
    tp.overlay = nd.reset.stamp(ch.other());
    tp.body_valid = nd.reset.idle();
    if (ch.kind == Channel::Kind::Gossip) {
      tp.body = GossipBody{nd.comm.gossip_tx};
    } else if (ch.at_a) {  // client side -> server side
      PingBody pb;
      if (nd.comm.ping_tx) pb.m = comm_load(ch.b, *nd.comm.ping_tx);
      tp.body = pb;
    } else {  // server side -> client side
      PongBody pb;
      if (nd.comm.ping_rx[ch.a]) {
        pb.ping = nd.comm.ping_rx[ch.a];
        pb.pong = nd.comm.pong_tx[ch.a];
      }
      tp.body = pb;
    }
    return tp;
  }

  void traverse(Channel& ch, std::size_t idx) {
    const int from = ch.holder();
    const int to = ch.other();
    const bool to_server_side = ch.at_a;  // pingpong tokens alternate sides
    TokenPayload tp;
    if (ch.preloaded) {
      tp = *ch.preloaded;
      ch.preloaded.reset();
    } else {
      tp = departure(ch);
    }
    ch.at_a = !ch.at_a;
    if (rt_phase_[idx] < 2) ++rt_phase_[idx];
    if (sc_.verbose) log_token(from, to, tp);

    Node& dst = nodes_[to];
    apply_reset_effect(to, dst.reset.on_overlay(from, tp.overlay));
    if (!dst.reset.idle() || !tp.body_valid) return;

    if (ch.kind == Channel::Kind::Gossip) {
      arrive_gossip(to, from, std::get<GossipBody>(tp.body));
    } else if (to_server_side) {
      arrive_ping(to, ch.a, std::get<PingBody>(tp.body));
    } else {
      arrive_pong(to, ch.b, std::get<PongBody>(tp.body));
    }
  }

  void arrive_gossip(int me, int from, const GossipBody& gb) {
    Node& nd = nodes_[me];
    log(me, "grecv", "from=" + std::to_string(from) + " " + triple_str(gb.triple));
    auto out = nd.server.on_gossip(from, gb.triple);
    if (!out.handled) return;
    note_storage(me);
    if (out.reset_requested) {
      log(me, "reset", "ev=init t=" + tag_str(out.reset_tag));
      apply_reset_effect(me, nd.reset.begin_wave(out.reset_tag));
      return;
    }
    nd.comm.gossip_tx = out.emitted;
    log(me, "srv", "h=gossip from=" + std::to_string(from) + srv_suffix(me));
    log(me, "gsend", triple_str(out.emitted));
  }

  void arrive_ping(int me, int from, const PingBody& pb) {
    Node& nd = nodes_[me];
    nd.comm.ping_rx[from] = pb.m;
    nd.comm.pong_tx[from] = std::nullopt;  // a delivered request voids the previous reply
    if (!pb.m || !nd.server.enabled()) return;
    const Message& m = *pb.m;
    const std::string from_s = std::to_string(from);
    switch (m.phase) {
      case Phase::Qry: {
        auto reply_tag = nd.server.on_query(m.kind);
        if (reply_tag) {
          nd.comm.pong_tx[from] = comm_reply(m, *reply_tag, std::nullopt);
          log(me, "srv", "h=query from=" + from_s +
                             " kind=" + (m.kind == ClientKind::Reader ? "r" : "w") +
                             " reply=" + tag_str(*reply_tag) + srv_suffix(me));
        } else {
          log(me, "srv", "h=query from=" + from_s +
                             " kind=" + (m.kind == ClientKind::Reader ? "r" : "w") +
                             " reply=suspended" + srv_suffix(me));
        }
        break;
      }
      case Phase::Pre: {
        if (m.tag && m.word) nd.server.on_prewrite(*m.tag, *m.word);
        note_storage(me);
        nd.comm.pong_tx[from] = comm_reply(m, std::nullopt, std::nullopt);
        log(me, "srv", "h=prewrite from=" + from_s +
                           (m.tag ? " t=" + tag_str(*m.tag) : "") + srv_suffix(me));
        break;
      }
      case Phase::Fin:
      case Phase::FINAL: {
        std::optional<Word> word;
        if (m.tag) {
          auto rep = nd.server.on_finalize(*m.tag, m.phase, m.kind);
          if (rep.replied) word = rep.word;
        }
        note_storage(me);
        if (word && malicious_.count(me)) word = corrupt_word(*word);
        nd.comm.pong_tx[from] = comm_reply(m, std::nullopt, word);
        log(me, "srv", "h=fin from=" + from_s + (m.tag ? " t=" + tag_str(*m.tag) : "") +
                           " d=" + phase_str(m.phase) + " w=" + (word ? "1" : "0") +
                           srv_suffix(me));
        break;
      }
    }
  }

  // Malicious servers corrupt only the data field of element-bearing replies.
  Word corrupt_word(Word w) {
    return f_.norm(w + 1 + rnd(r_malicious_, f_.p() - 1));
  }

  void arrive_pong(int me, int from, const PongBody& pb) {
    Node& nd = nodes_[me];
    bool match;
    if (nd.comm.ping_tx) {
      match = pb.ping && comm_pong_matches(from, *nd.comm.ping_tx, *pb.ping, pb.pong);
    } else {
      match = !pb.ping;  // idle clients accept only the echo of ⊥
    }
    if (match) nd.comm.pong_rx[from] = pb.pong;
    // Quorum test runs on every pong arrival; a junk quorum just clears itself.
    if (nd.comm.ack_count() < quorum_size(sc_.quorum)) return;
    auto aggregated = nd.comm.aggregated();
    nd.comm.clear_client();
    if (!nd.op) return;  // stale buffers drained, nobody was waiting
    log(me, "qret", std::string("phase=") + nd.op->phase_name() +
                        " n=" + std::to_string(aggregated.size()) +
                        " seq=" + std::to_string(nd.op_seq));
    auto draw_fn = [this]() { return static_cast<Word>(rnd(r_shares_, f_.p())); };
    auto action = nd.op->on_quorum(aggregated, sc_.quorum, f_, draw_fn);
    switch (action.what) {
      case ClientOp::Action::What::Send:
        nd.comm.phase_init(action.request);
        log(me, "qcall", std::string("phase=") + phase_str(action.request.phase) +
                             " t=" + tag_str(action.tag) + " seq=" + std::to_string(nd.op_seq));
        break;
      case ClientOp::Action::What::WriteDone:
        log(me, "resp", "op=write t=" + tag_str(action.tag) +
                            " v=" + std::to_string(nd.op->value()) +
                            " seq=" + std::to_string(nd.op_seq));
        nd.op.reset();
        ++ops_completed_;
        break;
      case ClientOp::Action::What::ReadDone:
        log(me, "resp",
            "op=read t=" + tag_str(action.tag) + " v=" +
                (action.read_value ? std::to_string(*action.read_value) : "bot") +
                " elems=" + std::to_string(action.element_replies) +
                " seq=" + std::to_string(nd.op_seq));
        nd.op.reset();
        ++ops_completed_;
        break;
    }
  }

  // ---- cycle accounting ---------------------------------------------------
  void check_cycle_boundary() {
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      const Channel& ch = channels_[i];
      if (!nodes_[ch.a].alive || !nodes_[ch.b].alive) continue;  // crashed: excluded
      if (rt_phase_[i] < 2) return;
    }
    ++cycle_;
    std::fill(rt_phase_.begin(), rt_phase_.end(), 0);
  }

  bool quiesced() const {
    if (step_ <= last_timed_at_) return false;  // scripted faults still pending
    for (int i = 1; i <= n(); ++i) {
      const Node& nd = nodes_[i];
      if (!nd.reset.idle()) return false;
      if (!nd.has_client || nd.client_dead || !nd.alive) continue;
      if (nd.op || nd.script_next < nd.script.size()) return false;
    }
    return true;
  }

  // ---- trace --------------------------------------------------------------
  void log(int node, const char* kind, std::string payload) {
    trace_.events.push_back(TraceEvent{step_, cycle_, node, kind, std::move(payload)});
  }

  static std::string msg_str(const std::optional<Message>& m) {
    if (!m) return "bot";
    std::string s = m->tag ? tag_str(*m->tag) : "bot";
    s += "/" + (m->word ? std::to_string(*m->word) : "bot") + "/" + phase_str(m->phase);
    return s;
  }

  void log_token(int from, int to, const TokenPayload& tp) {
    std::string p = "from=" + std::to_string(from);
    if (tp.overlay.kind != ResetOverlay::Kind::None)
      p += std::string(" reset=") +
           (tp.overlay.kind == ResetOverlay::Kind::Freeze ? "freeze:" : "resume:") +
           tag_str(tp.overlay.tag);
    if (!tp.body_valid) {
      p += " body=flushed";
    } else if (const auto* g = std::get_if<GossipBody>(&tp.body)) {
      p += " gossip=" + tag_str(g->triple.pre) + "," + tag_str(g->triple.fin) + "," +
           tag_str(g->triple.FIN);
    } else if (const auto* pi = std::get_if<PingBody>(&tp.body)) {
      p += " ping=" + msg_str(pi->m);
    } else if (const auto* po = std::get_if<PongBody>(&tp.body)) {
      p += " echo=" + msg_str(po->ping) + " pong=" + msg_str(po->pong);
    }
    log(to, "tok", p);
  }

  void note_storage(int node) {
    max_storage_ = std::max(max_storage_, static_cast<int>(nodes_[node].server.storage().size()));
  }

  std::string srv_suffix(int node) {
    const auto& s = nodes_[node].server;
    std::string dump;
    for (const auto& r : s.storage())
      dump += tag_str(r.tag) + phase_str(r.phase) + (r.word ? "w" : "-");
    note_storage(node);
    std::ostringstream os;
    os << " ssize=" << s.storage().size() << " shash=" << std::hex << (fnv(dump) & 0xffffffu);
    return os.str();
  }

  const Scenario& sc_;
  Gf f_;
  std::mt19937_64 r_sched_, r_inject_, r_shares_, r_malicious_;
  std::vector<Node> nodes_;
  std::vector<Channel> channels_;
  std::vector<int> rt_phase_;  // per channel: traversals completed in this cycle window
  std::set<std::pair<std::int64_t, int>> initial_tags_;
  std::set<int> malicious_;
  std::vector<std::int64_t> weights_;
  Trace trace_;
  std::int64_t step_ = 0;
  std::int64_t cycle_ = 0;
  std::int64_t sweep_ = 1;
  std::int64_t fair_until_ = 0;
  std::int64_t last_timed_at_ = -1;
  int cursor_ = 0;
  int ops_completed_ = 0;
  int ops_failed_ = 0;
  int resets_completed_ = 0;
  int max_storage_ = 0;
};

}  // namespace

void Scenario::validate() const {
  quorum.validate();
  Gf check(p);  // throws unless prime
  if (quorum.n >= p) throw std::invalid_argument("scenario: need N < p");
  if (maxint < 1) throw std::invalid_argument("scenario: maxint must be positive");
  if (delta < 0) throw std::invalid_argument("scenario: delta must be nonnegative");
  if (static_cast<int>(faults.malicious.size()) > quorum.e)
    throw std::invalid_argument("scenario: more than e malicious servers");
  for (int m : faults.malicious)
    if (m < 1 || m > quorum.n) throw std::invalid_argument("scenario: malicious node out of range");
  for (const auto& [node, ops] : scripts) {
    (void)ops;
    if (node < 1 || node > quorum.n) throw std::invalid_argument("scenario: client node out of range");
  }
  // Crash intervals may not exceed f concurrently.
  std::vector<std::pair<std::int64_t, int>> deltas;
  for (const auto& tf : faults.timed) {
    if (tf.node < 1 || tf.node > quorum.n)
      throw std::invalid_argument("scenario: fault node out of range");
    if (tf.what == FaultScript::Timed::What::Crash) deltas.push_back({tf.at, 1});
    if (tf.what == FaultScript::Timed::What::Resume) deltas.push_back({tf.at, -1});
  }
  std::sort(deltas.begin(), deltas.end());
  int live = 0;
  for (auto& [at, d] : deltas) {
    (void)at;
    live += d;
    if (live > quorum.f) throw std::invalid_argument("scenario: more than f concurrent crashes");
  }
}

Trace run_scenario(const Scenario& sc, RunStats* stats) {
  sc.validate();
  Simulator sim(sc);
  return sim.run(stats);
}

std::string scenario_digest(const Scenario& sc) {
  std::ostringstream os;
  os << sc.quorum.n << "," << sc.quorum.f << "," << sc.quorum.e << "," << sc.quorum.k << ","
     << sc.p << "," << sc.maxint << "," << sc.delta << "," << sc.bounded << "," << sc.seed << ","
     << static_cast<int>(sc.sched);
  for (const auto& [node, ops] : sc.scripts) {
    os << ";" << node;
    for (const auto& op : ops)
      os << (op.kind == OpKind::Write ? "w" : "r") << op.value << "@" << op.after;
  }
  std::ostringstream out;
  out << std::hex << fnv(os.str());
  return out.str();
}

namespace {

bool parse_kv(const std::string& tok, std::string* k, std::string* v) {
  auto eq = tok.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  *k = tok.substr(0, eq);
  *v = tok.substr(eq + 1);
  return true;
}

}  // namespace

std::optional<Scenario> parse_scenario(std::istream& in, ScenarioParseError* err) {
  Scenario sc;
  auto fail = [&](int line, const std::string& msg) -> std::optional<Scenario> {
    if (err) *err = {msg, line};
    return std::nullopt;
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;

    if (tok[0] == "client") {
      if (tok.size() < 3) return fail(lineno, "client line: need node and op");
      int node;
      try {
        node = std::stoi(tok[1]);
      } catch (...) {
        return fail(lineno, "client line: bad node id");
      }
      ScriptOp op;
      std::size_t next = 3;
      if (tok[2] == "write") {
        if (tok.size() < 4) return fail(lineno, "client write: missing value");
        op.kind = OpKind::Write;
        try {
          op.value = std::stoll(tok[3]);
        } catch (...) {
          return fail(lineno, "client write: bad value");
        }
        next = 4;
      } else if (tok[2] == "read") {
        op.kind = OpKind::Read;
      } else {
        return fail(lineno, "client line: op must be write or read");
      }
      if (next < tok.size()) {
        if (tok[next] != "after" || next + 1 >= tok.size())
          return fail(lineno, "client line: trailing tokens (expected 'after STEP')");
        try {
          op.after = std::stoll(tok[next + 1]);
        } catch (...) {
          return fail(lineno, "client line: bad after step");
        }
      }
      sc.scripts[node].push_back(op);
      continue;
    }

    if (tok[0] == "fault") {
      if (tok.size() < 2) return fail(lineno, "fault line: missing kind");
      const std::string& kind = tok[1];
      try {
        if (kind == "crash" || kind == "resume") {
          if (tok.size() != 5 || tok[3] != "at") return fail(lineno, "fault: expected 'fault crash NODE at STEP'");
          FaultScript::Timed tf;
          tf.what = kind == "crash" ? FaultScript::Timed::What::Crash : FaultScript::Timed::What::Resume;
          tf.node = std::stoi(tok[2]);
          tf.at = std::stoll(tok[4]);
          sc.faults.timed.push_back(tf);
        } else if (kind == "reset") {
          if (tok.size() != 6 || tok[4] != "at") return fail(lineno, "fault: expected 'fault reset NODE TAG at STEP'");
          FaultScript::Timed tf;
          tf.what = FaultScript::Timed::What::Reset;
          tf.node = std::stoi(tok[2]);
          auto tag = tag_parse(tok[3]);
          if (!tag) return fail(lineno, "fault reset: bad tag");
          tf.tag = *tag;
          tf.at = std::stoll(tok[5]);
          sc.faults.timed.push_back(tf);
        } else if (kind == "malicious") {
          if (tok.size() != 3) return fail(lineno, "fault: expected 'fault malicious NODE'");
          sc.faults.malicious.push_back(std::stoi(tok[2]));
        } else if (kind == "corrupt") {
          if (tok.size() >= 3 && tok[2] == "planttop") {
            sc.faults.plant_top = true;
          } else if (tok.size() >= 4 && tok[2] == "tagceil") {
            sc.faults.corrupt = true;
            sc.faults.corrupt_tag_ceiling = std::stoll(tok[3]);
            if (tok.size() == 5 && tok[4] == "reset") sc.faults.corrupt_reset = true;
            else if (tok.size() > 4) return fail(lineno, "fault corrupt: trailing tokens");
          } else {
            return fail(lineno, "fault corrupt: expected 'tagceil Z [reset]' or 'planttop'");
          }
        } else if (kind == "stuff") {
          if (tok.size() != 4) return fail(lineno, "fault: expected 'fault stuff CEIL COUNT'");
          sc.faults.stuff = {std::stoll(tok[2]), std::stoi(tok[3])};
        } else if (kind == "rstate") {
          if (tok.size() != 5) return fail(lineno, "fault: expected 'fault rstate NODE freeze|resume TAG'");
          FaultScript::ForcedResetState fr;
          fr.node = std::stoi(tok[2]);
          if (tok[3] == "freeze") fr.phase = ResetNode::Phase::Freeze;
          else if (tok[3] == "resume") fr.phase = ResetNode::Phase::Resume;
          else return fail(lineno, "fault rstate: phase must be freeze or resume");
          auto tag = tag_parse(tok[4]);
          if (!tag) return fail(lineno, "fault rstate: bad tag");
          fr.tag = *tag;
          sc.faults.forced_reset.push_back(fr);
        } else {
          return fail(lineno, "fault line: unknown kind '" + kind + "'");
        }
      } catch (...) {
        return fail(lineno, "fault line: bad number");
      }
      continue;
    }

    // Header line: every token must be key=value.
    for (const auto& kv : tok) {
      std::string k, v;
      if (!parse_kv(kv, &k, &v)) return fail(lineno, "bad token '" + kv + "'");
      try {
        if (k == "n") sc.quorum.n = std::stoi(v);
        else if (k == "f") sc.quorum.f = std::stoi(v);
        else if (k == "e") sc.quorum.e = std::stoi(v);
        else if (k == "k") sc.quorum.k = std::stoi(v);
        else if (k == "p") sc.p = std::stoll(v);
        else if (k == "maxint") sc.maxint = std::stoll(v);
        else if (k == "delta") sc.delta = std::stoi(v);
        else if (k == "bounded") sc.bounded = std::stoi(v) != 0;
        else if (k == "v0") sc.v0 = std::stoll(v);
        else if (k == "seed") sc.seed = std::stoull(v);
        else if (k == "budget") sc.budget = std::stoll(v);
        else if (k == "verbose") sc.verbose = std::stoi(v) != 0;
        else if (k == "fairwindow") sc.fair_window = std::stoll(v);
        else if (k == "sched") {
          if (v == "fair") sc.sched = SchedKind::Fair;
          else if (v == "unfair") sc.sched = SchedKind::Unfair;
          else if (v == "seldom") sc.sched = SchedKind::Seldom;
          else return fail(lineno, "sched must be fair|unfair|seldom");
        } else if (k == "starve") {
          std::istringstream ss(v);
          std::string part;
          while (std::getline(ss, part, ',')) sc.starve.push_back(std::stoi(part));
        } else {
          return fail(lineno, "unknown header key '" + k + "'");
        }
      } catch (std::invalid_argument&) {
        return fail(lineno, "bad value for '" + k + "'");
      } catch (std::out_of_range&) {
        return fail(lineno, "value out of range for '" + k + "'");
      }
    }
  }
  try {
    sc.validate();
  } catch (const std::exception& ex) {
    return fail(0, ex.what());
  }
  return sc;
}

std::optional<Scenario> parse_scenario_file(const std::string& path, ScenarioParseError* err) {
  std::ifstream in(path);
  if (!in) {
    if (err) *err = {"cannot open " + path, 0};
    return std::nullopt;
  }
  return parse_scenario(in, err);
}

}  // namespace cas
