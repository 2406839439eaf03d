#include "cas/server.hpp"

#include <algorithm>
#include <map>

namespace cas {

namespace {

bool phase_finalized(Phase p) { return p == Phase::Fin || p == Phase::FINAL; }

}  // namespace

const Record* ServerState::find(const Tag& t) const {
  for (const auto& r : records_)
    if (r.tag == t) return &r;
  return nullptr;
}

Tag ServerState::max_phase_all() const {
  Tag best = Tag::t0();
  for (const auto& r : records_) best = tag_max(best, r.tag);
  return best;
}

Tag ServerState::max_phase_finalized() const {
  Tag best = Tag::t0();  // default record (t0, w_{t0,i}, 'fin')
  for (const auto& r : records_)
    if (phase_finalized(r.phase)) best = tag_max(best, r.tag);
  return best;
}

Tag ServerState::max_phase_FIN() const {
  Tag best = Tag::t0();
  for (const auto& r : records_)
    if (r.phase == Phase::FINAL) best = tag_max(best, r.tag);
  return best;
}

void ServerState::update_phase(const Tag& t, std::optional<Word> w, Phase u) {
  if (t.bottom || u == Phase::Qry) return;
  for (auto& r : records_) {
    if (r.tag != t) continue;
    r.phase = upgrade_phase(r.phase, u);
    if (!r.word && w) r.word = w;
    return;
  }
  records_.push_back(Record{t, w, u});
}

std::optional<Tag> ServerState::on_query(ClientKind kind) {
  if (!enabled_) return std::nullopt;
  if (kind == ClientKind::Reader) return max_phase_finalized();
  if (cfg_.bounded && !tag_less(max_phase_all(), cfg_.t_top())) return std::nullopt;  // suspended
  return max_phase_all();
}

bool ServerState::on_prewrite(const Tag& t, Word w) {
  if (!enabled_) return false;
  update_phase(t, w, Phase::Pre);
  if (cfg_.bounded) gc();
  return true;
}

ServerState::FinalizeReply ServerState::on_finalize(const Tag& t, Phase d, ClientKind kind) {
  if (!enabled_ || !(d == Phase::Fin || d == Phase::FINAL)) return {};
  update_phase(t, std::nullopt, d);
  FinalizeReply out;
  out.replied = true;
  if (kind == ClientKind::Reader) {
    if (t.bottom) {
      out.word = cfg_.default_share;
    } else if (const Record* r = find(t); r && r->word && phase_finalized(r->phase)) {
      out.word = r->word;
    }
  }
  if (cfg_.bounded) gc();
  return out;
}

ServerState::GossipOutcome ServerState::on_gossip(int from, const TagTriple& incoming) {
  GossipOutcome out;
  if (!enabled_) return out;
  out.handled = true;
  view_.at(from) = incoming;

  const int n = cfg_.quorum.n;
  Tag pre_max = max_phase_all();
  for (int k = 1; k <= n; ++k) {
    pre_max = tag_max(pre_max, view_[k].pre);
    pre_max = tag_max(pre_max, view_[k].fin);
    pre_max = tag_max(pre_max, view_[k].FIN);
  }
  view_[id_].pre = pre_max;
  update_phase(pre_max, std::nullopt, Phase::Pre);

  Tag fin_max = max_phase_finalized();
  for (int k = 1; k <= n; ++k) {
    fin_max = tag_max(fin_max, view_[k].fin);
    fin_max = tag_max(fin_max, view_[k].FIN);
  }
  view_[id_].fin = fin_max;
  update_phase(fin_max, std::nullopt, Phase::Fin);

  // A tag reported as finalized by a whole quorum of slots becomes FINALIZED.
  Tag FIN_max = max_phase_FIN();
  for (int k = 1; k <= n; ++k) FIN_max = tag_max(FIN_max, view_[k].FIN);
  std::map<std::pair<std::int64_t, int>, int> fin_counts;
  for (int k = 1; k <= n; ++k)
    if (!view_[k].fin.bottom) ++fin_counts[{view_[k].fin.z, view_[k].fin.owner}];
  const int qsize = quorum_size(cfg_.quorum);
  for (const auto& [zt, count] : fin_counts)
    if (count >= qsize) FIN_max = tag_max(FIN_max, Tag::of(zt.first, zt.second));
  view_[id_].FIN = FIN_max;
  update_phase(FIN_max, std::nullopt, Phase::FINAL);

  if (cfg_.bounded) {
    Tag reset_tag;
    if (overflow_condition(&reset_tag)) {
      out.reset_requested = true;
      out.reset_tag = reset_tag;
      return out;
    }
    gc();
  }
  out.emitted = tag_tuple();
  return out;
}

bool ServerState::overflow_condition(Tag* reset_tag) const {
  // (maxPhase(D) >= t_top) ∧ (every slot equals tagTuple()) ∧ fin-max == FIN-max
  if (tag_less(max_phase_all(), cfg_.t_top())) return false;
  const TagTriple mine = tag_tuple();
  if (mine.fin != mine.FIN) return false;
  for (int k = 1; k <= cfg_.quorum.n; ++k)
    if (view_[k] != mine) return false;
  *reset_tag = mine.fin;
  return true;
}

std::vector<Record> ServerState::relevant() const {
  if (records_.empty()) return {};

  // Owners' highest counters mark implicitly FINALIZED records below them.
  std::map<int, std::int64_t> owner_max;
  for (const auto& r : records_) {
    auto it = owner_max.find(r.tag.owner);
    if (it == owner_max.end() || it->second < r.tag.z) owner_max[r.tag.owner] = r.tag.z;
  }
  auto implicitly_final = [&](const Record& r) { return r.tag.z < owner_max[r.tag.owner]; };
  auto finalized_either = [&](const Record& r) {
    return r.phase == Phase::FINAL || implicitly_final(r);
  };

  Tag write_query = max_phase_all();
  Tag read_query = max_phase_finalized();

  std::vector<Tag> finalized_tags;
  for (const auto& r : records_)
    if (finalized_either(r)) finalized_tags.push_back(r.tag);
  std::sort(finalized_tags.begin(), finalized_tags.end(),
            [](const Tag& a, const Tag& b) { return tag_less(b, a); });
  const std::size_t keep_final = static_cast<std::size_t>(cfg_.delta) + 1;
  if (finalized_tags.size() > keep_final) finalized_tags.resize(keep_final);

  auto keep = [&](const Record& r) {
    if (r.tag == write_query || (!read_query.bottom && r.tag == read_query)) return true;
    if (!finalized_either(r)) return true;  // T_notYetFIN, one per owner
    for (const auto& t : finalized_tags)
      if (r.tag == t) return true;
    return false;
  };

  std::vector<Record> kept;
  for (const auto& r : records_)
    if (keep(r)) kept.push_back(r);
  return kept;
}

void ServerState::local_reset(const Tag& t) {
  std::vector<Record> next;
  if (!t.bottom) {
    const Record* src = find(t);
    if (!src) src = find(Tag::of(1, t.owner));  // already renamed by an earlier pass
    if (src) next.push_back(Record{Tag::of(1, t.owner), src->word, Phase::FINAL});
  }
  records_ = std::move(next);
  for (auto& slot : view_) slot = TagTriple{};
}

}  // namespace cas
