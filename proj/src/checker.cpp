#include "cas/checker.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace cas {

namespace {

std::optional<Tag> payload_tag(const std::string& payload, const char* key) {
  std::string v = payload_get(payload, key);
  if (v.empty()) return std::nullopt;
  return tag_parse(v);
}

std::string op_str(const OpRecord& o) {
  std::ostringstream os;
  os << (o.kind == OpKind::Write ? "write" : "read") << "(node=" << o.node << ",seq=" << o.seq
     << ",t=" << (o.tag ? tag_str(*o.tag) : "?")
     << ",v=" << (o.value ? std::to_string(*o.value) : "bot") << ")";
  return os.str();
}

}  // namespace

OpHistory OpHistory::from_trace(const Trace& t) {
  OpHistory h;
  std::map<std::pair<int, int>, std::size_t> index;  // (node, seq) -> ops slot
  std::optional<Tag> last_reset_tag;
  for (const auto& e : t.events) {
    if (e.kind == "inv") {
      OpRecord op;
      op.node = e.node;
      op.seq = std::stoi(payload_get(e.payload, "seq"));
      op.kind = payload_get(e.payload, "op") == "write" ? OpKind::Write : OpKind::Read;
      if (op.kind == OpKind::Write) {
        op.value = std::stoll(payload_get(e.payload, "v"));
        if (auto vt = payload_tag(e.payload, "vth")) op.valid_threshold = *vt;
      }
      op.invoke_step = e.step;
      op.invoke_cycle = e.cycle;
      index[{op.node, op.seq}] = h.ops.size();
      h.ops.push_back(op);
    } else if (e.kind == "qcall") {
      auto it = index.find({e.node, std::stoi(payload_get(e.payload, "seq"))});
      if (it == index.end()) continue;
      if (auto tg = payload_tag(e.payload, "t")) h.ops[it->second].tag = tg;
    } else if (e.kind == "resp") {
      auto it = index.find({e.node, std::stoi(payload_get(e.payload, "seq"))});
      if (it == index.end()) continue;
      OpRecord& op = h.ops[it->second];
      op.status = OpRecord::Status::Complete;
      op.response_step = e.step;
      op.response_cycle = e.cycle;
      if (auto tg = payload_tag(e.payload, "t")) op.tag = tg;
      if (op.kind == OpKind::Read) {
        std::string v = payload_get(e.payload, "v");
        op.value = v == "bot" ? std::optional<Word>() : std::optional<Word>(std::stoll(v));
        std::string el = payload_get(e.payload, "elems");
        if (!el.empty()) op.element_replies = std::stoi(el);
      }
    } else if (e.kind == "fail") {
      auto it = index.find({e.node, std::stoi(payload_get(e.payload, "seq"))});
      if (it == index.end()) continue;
      h.ops[it->second].status = OpRecord::Status::Failed;
      h.ops[it->second].response_step = e.step;
    } else if (e.kind == "reset") {
      std::string ev = payload_get(e.payload, "ev");
      if (ev == "init" || ev == "frozen") {
        // concurrent initiators merge on the larger tag
        if (auto tg = payload_tag(e.payload, "t"))
          last_reset_tag = last_reset_tag ? tag_max(*last_reset_tag, *tg) : *tg;
      } else if (ev == "done") {
        ResetEpoch ep;
        ep.done_step = e.step;
        if (last_reset_tag) ep.kept = *last_reset_tag;
        h.resets.push_back(ep);
        last_reset_tag.reset();
      }
    }
  }
  return h;
}

namespace {

// π1 ≺ π2 per the tag order: smaller tag first; a write precedes a read with
// the same tag.
bool prec(const OpRecord& a, const OpRecord& b) {
  if (tag_less(*a.tag, *b.tag)) return true;
  if (*a.tag == *b.tag) return a.kind == OpKind::Write && b.kind == OpKind::Read;
  return false;
}

}  // namespace

CheckResult check_atomicity(const OpHistory& h, const AtomicityOptions& opt) {
  CheckResult res;

  // A completed global reset renames the kept tag to (1, owner) and restarts
  // the counter space, so ≺ only orders operations within one reset epoch.
  // Complete operations never span a reset (every node's freeze aborts its
  // in-flight operation).
  const std::size_t epochs = h.resets.size() + 1;
  auto epoch_of = [&](std::int64_t step) {
    std::size_t e = 0;
    for (const auto& r : h.resets)
      if (step >= r.done_step) ++e;
    return e;
  };

  // Per-epoch value coupling. Every write counts, complete or not: a read may
  // legally return a crashed writer's value. A reset carries the kept tag's
  // value into the next epoch under its new name.
  std::vector<std::map<std::string, Word>> written(epochs);
  for (const auto& op : h.ops) {
    if (op.kind != OpKind::Write || !op.tag || !op.value) continue;
    // Tags are minted at query completion, so the end step places the write
    // in its epoch (an op started during a wave mints in the new epoch).
    auto& map = written[epoch_of(op.response_step >= 0 ? op.response_step : op.invoke_step)];
    auto [it, fresh] = map.try_emplace(tag_str(*op.tag), *op.value);
    if (!fresh && it->second != *op.value) {
      res.pass = false;
      res.detail = "two writes share tag " + tag_str(*op.tag);
      return res;
    }
  }
  for (std::size_t m = 1; m < epochs; ++m) {
    const Tag& kept = h.resets[m - 1].kept;
    if (kept.bottom) continue;
    auto it = written[m - 1].find(tag_str(kept));
    if (it == written[m - 1].end()) continue;
    written[m].emplace(tag_str(Tag::of(1, kept.owner)), it->second);
  }

  // Ordered operations: complete, in the suffix, with a tag; ⊥-reads excluded.
  std::vector<const OpRecord*> ordered;
  for (const auto& op : h.ops) {
    if (op.status != OpRecord::Status::Complete || op.invoke_step < opt.suffix_start_step)
      continue;
    if (!op.tag) continue;
    if (op.kind == OpKind::Read && !op.value) continue;
    ordered.push_back(&op);
  }

  // Condition 2: writes of one epoch are totally ordered, i.e. tags unique.
  std::vector<std::map<std::string, const OpRecord*>> wtags(epochs);
  for (const auto* op : ordered) {
    if (op->kind != OpKind::Write) continue;
    auto [it, fresh] = wtags[epoch_of(op->response_step)].try_emplace(tag_str(*op->tag), op);
    if (!fresh) {
      res.pass = false;
      res.detail = "duplicate write tag: " + op_str(*it->second) + " vs " + op_str(*op);
      return res;
    }
  }

  // Condition 1: within an epoch, the real-time order is never inverted by ≺.
  for (const auto* a : ordered) {
    for (const auto* b : ordered) {
      if (a == b || a->response_step >= b->invoke_step) continue;
      if (epoch_of(a->response_step) != epoch_of(b->response_step)) continue;
      if (prec(*b, *a)) {
        res.pass = false;
        res.detail = "real-time order violated: " + op_str(*a) + " finished before " + op_str(*b) +
                     " started, but the tag order puts " + op_str(*b) + " first";
        return res;
      }
    }
  }

  // Condition 3: a read returns the value coupled with its tag (v0 for t0).
  for (const auto* op : ordered) {
    if (op->kind != OpKind::Read) continue;
    if (op->tag->bottom) {
      if (*op->value != opt.v0) {
        res.pass = false;
        res.detail = "read of t0 returned " + std::to_string(*op->value) + " instead of v0";
        return res;
      }
      continue;
    }
    const auto& map = written[epoch_of(op->response_step)];
    auto it = map.find(tag_str(*op->tag));
    if (it == map.end()) {
      res.pass = false;
      res.detail = "read returned a value for tag " + tag_str(*op->tag) + " that no write minted";
      return res;
    }
    if (it->second != *op->value) {
      res.pass = false;
      res.detail = "read " + op_str(*op) + " disagrees with the write of tag " + tag_str(*op->tag);
      return res;
    }
  }

  // Cross-check against the independent oracle on small reset-free histories.
  if (h.resets.empty()) {
    auto oracle = linearizable_brute_force(h, opt.suffix_start_step, opt.v0, opt.oracle_limit);
    if (oracle && *oracle != res.pass) {
      res.pass = false;
      res.detail = res.detail.empty()
                       ? "tag checker passed but the linearization oracle found no witness order"
                       : res.detail + " (oracle disagrees)";
    }
  }
  return res;
}

std::optional<bool> linearizable_brute_force(const OpHistory& h, std::int64_t suffix_start_step,
                                             Word v0, std::size_t limit) {
  struct Item {
    const OpRecord* op;
    bool optional_write;  // failed/incomplete write: may take effect or not
  };
  std::vector<Item> items;
  for (const auto& op : h.ops) {
    if (op.status == OpRecord::Status::Complete && op.invoke_step >= suffix_start_step) {
      if (op.kind == OpKind::Read && !op.value) continue;  // ⊥-read constrains nothing
      items.push_back({&op, false});
    } else if (op.kind == OpKind::Write && op.tag && op.value) {
      items.push_back({&op, true});  // may have installed its value
    }
  }
  const std::size_t n = items.size();
  if (n > limit) return std::nullopt;
  if (n == 0) return true;

  // resp[i] finite only for complete ops; an op may be linearized once every
  // op that responded before its invoke has been placed (or dropped).
  std::vector<std::int64_t> inv(n), rsp(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv[i] = items[i].op->invoke_step;
    rsp[i] = items[i].optional_write ? std::numeric_limits<std::int64_t>::max()
                                     : items[i].op->response_step;
  }

  std::set<std::pair<std::uint32_t, int>> seen;  // (placed|dropped mask, last writer)
  // mask uses 2 bits logical: we fold "dropped" into placed for ordering, but a
  // dropped write must not affect the register: track placed-set and last write.
  std::function<bool(std::uint32_t, int)> dfs = [&](std::uint32_t done, int last) -> bool {
    if (!seen.insert({done, last}).second) return false;
    bool all_required = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!(done >> i & 1) && !items[i].optional_write) all_required = false;
    if (all_required) return true;

    for (std::size_t i = 0; i < n; ++i) {
      if (done >> i & 1) continue;
      bool enabled = true;
      for (std::size_t j = 0; j < n; ++j)
        if (!(done >> j & 1) && j != i && rsp[j] < inv[i]) enabled = false;
      if (!enabled) continue;
      const OpRecord* op = items[i].op;
      if (op->kind == OpKind::Read) {
        Word cur = last < 0 ? v0 : *items[last].op->value;
        if (*op->value != cur) continue;
        if (dfs(done | (1u << i), last)) return true;
      } else {
        if (dfs(done | (1u << i), static_cast<int>(i))) return true;
        if (items[i].optional_write) {
          // Drop it: mark placed without touching the register.
          if (dfs(done | (1u << i), last)) return true;
        }
      }
    }
    return false;
  };
  return dfs(0, -1);
}

CheckResult check_liveness(const OpHistory& h, SchedKind sched, int k,
                           std::int64_t suffix_start_step) {
  CheckResult res;
  if (sched != SchedKind::Fair) {
    res.skipped = true;
    res.detail = "liveness is only promised under fair schedules";
    return res;
  }
  for (const auto& op : h.ops) {
    if (op.status == OpRecord::Status::Incomplete) {
      res.pass = false;
      res.detail = "stuck operation: " + op_str(op);
      return res;
    }
    if (op.kind == OpKind::Read && op.status == OpRecord::Status::Complete &&
        op.invoke_step >= suffix_start_step && op.element_replies < k) {
      res.pass = false;
      res.detail = "read gathered only " + std::to_string(op.element_replies) +
                   " coded elements: " + op_str(op);
      return res;
    }
  }
  return res;
}

CheckResult check_storage_bound(const Trace& t, int n, int delta) {
  CheckResult res;
  const int bound = n + delta + 3;
  for (const auto& e : t.events) {
    if (e.kind != "srv") continue;
    std::string s = payload_get(e.payload, "ssize");
    if (s.empty()) continue;
    int size = std::stoi(s);
    if (size > bound) {
      res.pass = false;
      std::ostringstream os;
      os << "storage bound breached: node " << e.node << " holds " << size << " > " << bound
         << " records at step " << e.step;
      res.detail = os.str();
      return res;
    }
  }
  return res;
}

RecoveryResult measure_recovery(const OpHistory& h) {
  RecoveryResult r;
  for (const auto& op : h.ops) {
    if (op.kind != OpKind::Write || op.status != OpRecord::Status::Complete || !op.tag) continue;
    if (!tag_less(op.valid_threshold, *op.tag)) continue;  // not valid: stale tags still above it
    if (!r.found || op.response_step < r.step) {
      r.found = true;
      r.step = op.response_step;
      r.cycle = op.response_cycle;
      r.detail = "first complete-and-valid write: " + op_str(op);
    }
  }
  return r;
}

CheckResult check_recovery(const OpHistory& h, Word v0, RecoveryResult* out) {
  RecoveryResult r = measure_recovery(h);
  if (out) *out = r;
  CheckResult res;
  if (!r.found) {
    res.pass = false;
    res.detail = "no complete-and-valid write found";
    return res;
  }
  AtomicityOptions opt;
  opt.suffix_start_step = r.step;
  opt.v0 = v0;
  res = check_atomicity(h, opt);
  if (res.pass) {
    std::ostringstream os;
    os << "legal suffix from cycle " << r.cycle << " (step " << r.step << ")";
    res.detail = os.str();
  }
  return res;
}

CheckResult check_comm(const Trace& t, const QuorumConfig& q, std::int64_t after_cycle) {
  CheckResult res;
  const int qsize = quorum_size(q);

  // Authenticity: a delivered triple was gossiped by its purported sender.
  std::map<int, std::vector<std::pair<std::int64_t, std::string>>> sends;  // node -> (step, triple)
  for (const auto& e : t.events)
    if (e.kind == "gsend") sends[e.node].push_back({e.step, e.payload});
  for (const auto& e : t.events) {
    if (e.kind != "grecv" || e.cycle < after_cycle) continue;
    int from = std::stoi(payload_get(e.payload, "from"));
    std::string triple = e.payload.substr(e.payload.find("pre="));
    bool matched = false;
    for (const auto& [step, sent] : sends[from])
      if (step < e.step && sent == triple) {
        matched = true;
        break;
      }
    if (!matched) {
      res.pass = false;
      std::ostringstream os;
      os << "gossip delivered to node " << e.node << " at step " << e.step << " (" << triple
         << ") was never sent by node " << from;
      res.detail = os.str();
      return res;
    }
  }

  // Quorum returns: enough acknowledgments, backed by server handler events
  // between the request and the return.
  std::map<std::pair<int, int>, std::int64_t> qcall_step;  // (node, seq) -> latest qcall
  for (const auto& e : t.events) {
    if (e.kind == "qcall") {
      qcall_step[{e.node, std::stoi(payload_get(e.payload, "seq"))}] = e.step;
    } else if (e.kind == "qret" && e.cycle >= after_cycle) {
      int nacks = std::stoi(payload_get(e.payload, "n"));
      if (nacks < qsize) {
        res.pass = false;
        res.detail = "qrmAccess returned with only " + std::to_string(nacks) + " acknowledgments";
        return res;
      }
      auto it = qcall_step.find({e.node, std::stoi(payload_get(e.payload, "seq"))});
      if (it == qcall_step.end()) continue;
      std::string phase = payload_get(e.payload, "phase");
      const char* want = phase == "qry" ? "query" : (phase == "pre" ? "prewrite" : "fin");
      std::set<int> servers;
      for (const auto& se : t.events) {
        if (se.step <= it->second || se.step >= e.step) continue;
        if (se.kind != "srv" || payload_get(se.payload, "h") != want) continue;
        if (payload_get(se.payload, "from") != std::to_string(e.node)) continue;
        servers.insert(se.node);
      }
      if (static_cast<int>(servers.size()) < qsize) {
        res.pass = false;
        std::ostringstream os;
        os << "qrmAccess return at step " << e.step << " backed by only " << servers.size()
           << " server handler executions";
        res.detail = os.str();
        return res;
      }
    }
  }

  // Monotone gossip streams per server, component-wise.
  std::map<int, TagTriple> last;
  for (const auto& e : t.events) {
    if (e.kind != "gsend" || e.cycle < after_cycle) continue;
    TagTriple cur;
    auto pre = payload_tag(e.payload, "pre");
    auto fin = payload_tag(e.payload, "fin");
    auto FIN = payload_tag(e.payload, "FIN");
    if (!pre || !fin || !FIN) continue;
    cur = TagTriple{*pre, *fin, *FIN};
    auto it = last.find(e.node);
    if (it != last.end()) {
      if (tag_less(cur.pre, it->second.pre) || tag_less(cur.fin, it->second.fin) ||
          tag_less(cur.FIN, it->second.FIN)) {
        res.pass = false;
        std::ostringstream os;
        os << "gossiped tag stream of node " << e.node << " decreased at step " << e.step;
        res.detail = os.str();
        return res;
      }
    }
    last[e.node] = cur;
  }
  return res;
}

}  // namespace cas
