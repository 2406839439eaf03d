// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Tolerances and thresholds are fixed here, not configurable.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "cas/checker.hpp"
#include "cas/coding.hpp"
#include "cas/sim.hpp"
#include "doctest.h"

using namespace cas;

namespace {

struct Criterion {
  int number;
  const char* name;
  bool ok = true;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  ~Criterion() {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    std::cout << "ACCEPTANCE " << number << " " << name << ": " << (ok ? "PASS" : "FAIL") << " ("
              << ms << " ms)" << std::endl;
  }
  void expect(bool cond, const char* what) {
    if (!cond) {
      ok = false;
      std::cout << "  criterion " << number << " violated: " << what << std::endl;
    }
    CHECK_MESSAGE(cond, what);
  }
  long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 t0)
        .count();
  }
};

}  // namespace

TEST_CASE("1 mds round trip") {
  Criterion c{1, "mds-round-trip"};
  Gf f(257);
  const int n = 7;
  std::mt19937_64 rng(1);
  for (int k = 1; k <= 3; ++k) {
    // all k-subsets of 7 positions (fewer than the 200-sample cap)
    std::vector<std::vector<int>> subsets;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (__builtin_popcount(mask) != k) continue;
      std::vector<int> s;
      for (int j = 0; j < n; ++j)
        if (mask >> j & 1) s.push_back(j + 1);
      subsets.push_back(s);
    }
    for (int trial = 0; trial < 1000 && c.ok; ++trial) {
      Polynomial poly(k);
      for (auto& w : poly) w = rng() % 257;
      ShareVector full = rs_encode(poly, n, f);
      for (const auto& subset : subsets) {
        ShareVector sub = ShareVector::empty(n);
        for (int j : subset) sub.set(j, *full.shares[j - 1]);
        auto got = rs_decode(sub, k, f);
        c.expect(got && *got == poly, "projection onto k clean shares must invert exactly");
        if (!c.ok) break;
      }
    }
  }
  c.expect(c.elapsed_ms() < 10000, "runtime under 10 s");
}

TEST_CASE("2 robust decode") {
  Criterion c{2, "robust-decode"};
  Gf f(257);
  const int n = 7, k = 2;
  std::mt19937_64 rng(2);
  for (int errs = 0; c.ok && 2 * errs < n - k + 1; ++errs) {
    for (int ers = 0; c.ok && 2 * errs + ers < n - k + 1; ++ers) {
      for (int trial = 0; trial < 500; ++trial) {
        Polynomial poly{static_cast<Word>(rng() % 257), static_cast<Word>(rng() % 257)};
        ShareVector sv = rs_encode(poly, n, f);
        std::vector<int> pos(n);
        for (int i = 0; i < n; ++i) pos[i] = i + 1;
        for (int i = n - 1; i > 0; --i) std::swap(pos[i], pos[rng() % (i + 1)]);
        for (int i = 0; i < errs; ++i) {
          Word& w = *sv.shares[pos[i] - 1];
          w = f.add(w, 1 + rng() % 256);
        }
        for (int i = errs; i < errs + ers; ++i) sv.erase(pos[i]);
        auto got = rs_decode(sv, k, f);
        if (!(got && *got == poly)) {
          c.expect(false, "decode must be exact whenever 2e'+f' < N-k+1");
          break;
        }
      }
    }
  }
  c.expect(c.elapsed_ms() < 30000, "runtime under 30 s");
}

TEST_CASE("3 privacy census") {
  Criterion c{3, "privacy-census"};
  {
    Gf f(11);  // k=2: every single fixed share leaves all 11 secrets equally likely
    for (int idx = 1; idx <= 7 && c.ok; ++idx) {
      for (Word v = 0; v < 11 && c.ok; ++v) {
        auto counts = privacy_census({{idx, v}}, 2, f);
        for (Word s = 0; s < 11; ++s)
          if (counts[s] != 1) c.expect(false, "census must be uniform for p=11, k=2");
      }
    }
  }
  {
    Gf f(5);  // k=3: every pair of fixed shares
    for (int a = 1; a <= 4 && c.ok; ++a)
      for (int b = a + 1; b <= 4 && c.ok; ++b)
        for (Word va = 0; va < 5 && c.ok; ++va)
          for (Word vb = 0; vb < 5 && c.ok; ++vb) {
            auto counts = privacy_census({{a, va}, {b, vb}}, 3, f);
            for (Word s = 0; s < 5; ++s)
              if (counts[s] != 1) c.expect(false, "census must be uniform for p=5, k=3");
          }
  }
  c.expect(c.elapsed_ms() < 5000, "runtime under 5 s");
}

TEST_CASE("4 quorum intersection") {
  Criterion c{4, "quorum-intersection"};
  for (int n = 5; n <= 7; ++n) {
    for (int e = 0; 2 * e < n; ++e) {
      for (int k = 1; k + 2 * e <= n; ++k) {
        const int f = (n - k - 2 * e) / 2;
        if (k > n - 2 * (f + e)) continue;
        QuorumConfig cfg{n, f, e, k};
        const int q = quorum_size(cfg);
        c.expect(n - f >= q, "N-f servers must still form a quorum");
        for (unsigned a = 0; a < (1u << n) && c.ok; ++a) {
          if (__builtin_popcount(a) < q) continue;
          for (unsigned b = 0; b < (1u << n); ++b) {
            if (__builtin_popcount(b) < q) continue;
            if (__builtin_popcount(a & b) < k + 2 * e) {
              c.expect(false, "two quorums must share at least k+2e servers");
              break;
            }
          }
        }
      }
    }
  }
}

namespace {

Scenario adversity_scenario(std::uint64_t seed) {
  // 3 writers + 2 readers, 10 operations total, one crash/resume, one
  // malicious server.
  Scenario sc;
  sc.quorum = QuorumConfig{5, 1, 1, 1};
  sc.seed = seed;
  sc.sched = SchedKind::Fair;
  sc.scripts[1] = {{OpKind::Write, 10, 0}, {OpKind::Write, 13, 0}};
  sc.scripts[2] = {{OpKind::Write, 11, 50}, {OpKind::Write, 14, 0}};
  sc.scripts[3] = {{OpKind::Write, 12, 100}, {OpKind::Write, 15, 0}};
  sc.scripts[4] = {{OpKind::Read, 0, 30}, {OpKind::Read, 0, 1500}};
  sc.scripts[5] = {{OpKind::Read, 0, 80}, {OpKind::Read, 0, 2500}};
  sc.delta = 3;  // up to three writes overlap a read here
  sc.faults.malicious = {4};
  sc.faults.timed.push_back({FaultScript::Timed::What::Crash, 2, 700, Tag()});
  sc.faults.timed.push_back({FaultScript::Timed::What::Resume, 2, 2200, Tag()});
  return sc;
}

}  // namespace

TEST_CASE("5 and 6: atomicity under adversity, robust reads") {
  Criterion c5{5, "atomicity-under-adversity"};
  Criterion c6{6, "robust-reads"};
  int quiescent_reads = 0, quiescent_nonbot = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Scenario sc = adversity_scenario(seed);
    Trace t = run_scenario(sc);
    c5.expect(!t.incomplete, "every adversity run must finish its script");
    OpHistory h = OpHistory::from_trace(t);
    AtomicityOptions opt;
    auto res = check_atomicity(h, opt);  // includes the oracle cross-check (<= 10 ops)
    if (!res.pass) std::cout << "  seed " << seed << ": " << res.detail << std::endl;
    c5.expect(res.pass, "check_atomicity must pass on every trace");
    std::size_t nops = 0;
    for (const auto& op : h.ops)
      if (op.status == OpRecord::Status::Complete) ++nops;
    auto oracle = linearizable_brute_force(h, 0, 0, 10);
    c5.expect(nops <= 10 && oracle.has_value() && *oracle,
              "the brute-force linearization oracle must agree");

    // Criterion 6: value coupling of non-bottom reads, and the non-bottom
    // rate over quiescent reads (no write overlaps the read's lifetime).
    std::map<std::string, Word> writes;
    for (const auto& op : h.ops)
      if (op.kind == OpKind::Write && op.tag) writes[tag_str(*op.tag)] = *op.value;
    for (const auto& op : h.ops) {
      if (op.kind != OpKind::Read || op.status != OpRecord::Status::Complete) continue;
      if (op.value) {
        bool coupled = op.tag->bottom ? *op.value == 0
                                      : (writes.count(tag_str(*op.tag)) &&
                                         writes[tag_str(*op.tag)] == *op.value);
        c6.expect(coupled, "every non-bottom read equals the write with its tag");
      }
      bool quiescent = true;
      for (const auto& w : h.ops) {
        if (w.kind != OpKind::Write) continue;
        std::int64_t wend = w.response_step >= 0 ? w.response_step : t.events.back().step;
        if (w.invoke_step <= op.response_step && wend >= op.invoke_step) quiescent = false;
      }
      if (quiescent) {
        ++quiescent_reads;
        if (op.value) ++quiescent_nonbot;
      }
    }
  }
  c6.expect(quiescent_reads > 0, "the runs must contain quiescent reads");
  c6.expect(quiescent_nonbot * 100 >= quiescent_reads * 95,
            "at least 95% of quiescent reads return a value");
  c5.expect(c5.elapsed_ms() < 60000, "runtime under 60 s");
}

TEST_CASE("7 stabilization") {
  Criterion c{7, "stabilization"};
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Scenario sc;
    sc.quorum = QuorumConfig{5, 1, 1, 1};
    sc.seed = seed;
    sc.sched = SchedKind::Fair;
    sc.faults.corrupt = true;
    sc.faults.corrupt_tag_ceiling = 16;
    // Writers start once the corrupted maxima have mixed (about two cycles).
    sc.scripts[1] = {{OpKind::Write, 21, 150}, {OpKind::Write, 22, 0}};
    sc.scripts[3] = {{OpKind::Write, 23, 180}, {OpKind::Write, 24, 0}};
    sc.scripts[5] = {{OpKind::Read, 0, 400}, {OpKind::Read, 0, 0}};
    Trace t = run_scenario(sc);
    c.expect(!t.incomplete, "stabilization runs must finish");
    OpHistory h = OpHistory::from_trace(t);
    RecoveryResult rec;
    auto res = check_recovery(h, 0, &rec);
    if (!res.pass || !rec.found || rec.cycle > 8)
      std::cout << "  seed " << seed << ": " << res.detail << " cycle=" << rec.cycle << std::endl;
    c.expect(rec.found, "a complete-and-valid write must occur");
    c.expect(rec.cycle <= 8, "recovery within 8 asynchronous cycles");
    c.expect(res.pass, "atomicity must hold on the legal suffix");
  }
  c.expect(c.elapsed_ms() < 60000, "runtime under 60 s");
}

TEST_CASE("8 storage bound") {
  Criterion c{8, "storage-bound"};
  for (int delta : {0, 2}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Scenario sc;
      sc.quorum = QuorumConfig{5, 1, 1, 1};
      sc.seed = seed;
      sc.delta = delta;
      sc.sched = SchedKind::Fair;
      sc.faults.stuff = {{30, 100}};  // adversarially pre-stuffed storages
      sc.scripts[1] = {{OpKind::Write, 10, 0}, {OpKind::Write, 11, 0}};
      if (delta > 0) {
        sc.scripts[2] = {{OpKind::Write, 12, 100}, {OpKind::Write, 13, 0}};
        sc.scripts[3] = {{OpKind::Write, 14, 200}};
      }
      sc.scripts[4] = {{OpKind::Read, 0, 300}, {OpKind::Read, 0, 0}};
      Trace t = run_scenario(sc);
      c.expect(!t.incomplete, "storage-bound runs must finish");
      auto res = check_storage_bound(t, 5, delta);
      if (!res.pass) std::cout << "  delta " << delta << " seed " << seed << ": " << res.detail
                               << std::endl;
      c.expect(res.pass, "every snapshot after the first handler obeys N+delta+3");
    }
  }
}

namespace {

struct ResetInfo {
  std::int64_t init_cycle = -1, done_cycle = -1, done_step = -1;
  Tag kept;
  std::vector<std::string> resumed;  // storage summaries at resumption
};

std::vector<ResetInfo> reset_waves(const Trace& t) {
  std::vector<ResetInfo> out;
  ResetInfo cur;
  bool open = false;
  for (const auto& e : t.events) {
    if (e.kind != "reset") continue;
    std::string ev = payload_get(e.payload, "ev");
    if (ev == "init") {
      if (!open) {
        open = true;
        cur = ResetInfo{};
        cur.init_cycle = e.cycle;
        if (auto tg = tag_parse(payload_get(e.payload, "t"))) cur.kept = *tg;
      }
    } else if (ev == "resumed" && open) {
      cur.resumed.push_back(payload_get(e.payload, "s"));
    } else if (ev == "done" && open) {
      cur.done_cycle = e.cycle;
      cur.done_step = e.step;
      out.push_back(cur);
      open = false;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("9 overflow and reset") {
  Criterion c{9, "overflow-reset"};

  // Organic overflow: a writer walks the counter to z_max under the
  // seldom-fair scheduler; after the reset a read sees the kept version and
  // at least z_max more writes succeed.
  for (std::uint64_t seed : {3ull, 8ull, 21ull}) {
    Scenario sc;
    sc.quorum = QuorumConfig{5, 1, 1, 1};
    sc.maxint = 4;
    sc.bounded = true;
    sc.seed = seed;
    sc.sched = SchedKind::Seldom;
    sc.scripts[1] = {{OpKind::Write, 10, 0},
                     {OpKind::Write, 11, 0},
                     {OpKind::Write, 12, 0},
                     {OpKind::Write, 13, 0}};
    sc.scripts[3] = {{OpKind::Read, 0, 60000}};
    sc.scripts[2] = {{OpKind::Write, 20, 120000},
                     {OpKind::Write, 21, 0},
                     {OpKind::Write, 22, 0},
                     {OpKind::Write, 23, 0},
                     {OpKind::Write, 24, 0}};
    Trace t = run_scenario(sc);
    c.expect(!t.incomplete, "overflow runs must finish");
    auto waves = reset_waves(t);
    c.expect(!waves.empty(), "the counter cap must force a global reset");
    if (waves.empty()) continue;
    for (const auto& w : waves) {
      c.expect(w.done_cycle - w.init_cycle <= 4, "a reset completes within Psi=4 cycles");
      c.expect(w.resumed.size() == 5, "every node resumes");
    }
    const ResetInfo& w1 = waves[0];
    c.expect(!w1.kept.bottom, "the organic overflow keeps a finalized version");
    std::string expect_prefix = "[" + tag_str(Tag::of(1, w1.kept.owner)) + ":FIN";
    for (const auto& s : w1.resumed)
      c.expect(s.rfind(expect_prefix, 0) == 0 && s.find(',') == std::string::npos,
               "after the reset every storage is exactly the renamed record");

    OpHistory h = OpHistory::from_trace(t);
    // the read between the reset and the next writes returns the kept value
    std::map<std::string, Word> values;
    for (const auto& op : h.ops)
      if (op.kind == OpKind::Write && op.tag) values[tag_str(*op.tag)] = *op.value;
    bool read_checked = false;
    for (const auto& op : h.ops) {
      if (op.kind != OpKind::Read || op.status != OpRecord::Status::Complete) continue;
      if (op.invoke_step <= w1.done_step) continue;
      c.expect(op.tag == Tag::of(1, w1.kept.owner), "the read sees the renamed version");
      c.expect(values.count(tag_str(w1.kept)) && op.value == values[tag_str(w1.kept)],
               "the read returns the last finalized value");
      read_checked = true;
      break;
    }
    c.expect(read_checked, "a read lands between the reset and the next writes");

    int post_reset_writes = 0;
    for (const auto& op : h.ops)
      if (op.kind == OpKind::Write && op.status == OpRecord::Status::Complete &&
          op.invoke_step > w1.done_step)
        ++post_reset_writes;
    c.expect(post_reset_writes >= 4, "at least z_max further writes succeed");

    AtomicityOptions opt;
    auto res = check_atomicity(h, opt);
    if (!res.pass) std::cout << "  seed " << seed << ": " << res.detail << std::endl;
    c.expect(res.pass, "atomicity holds across reset epochs");
    c.expect(check_storage_bound(t, 5, 0).pass, "bounded mode keeps the storage bound");
  }

  // Planted counter cap: writer queries visibly suspend before the reset.
  {
    Scenario sc;
    sc.quorum = QuorumConfig{5, 1, 1, 1};
    sc.maxint = 4;
    sc.bounded = true;
    sc.seed = 3;
    sc.sched = SchedKind::Seldom;
    sc.faults.plant_top = true;
    sc.scripts[1] = {{OpKind::Write, 10, 0}, {OpKind::Write, 11, 0}, {OpKind::Write, 12, 0}};
    sc.scripts[2] = {{OpKind::Read, 0, 6000}};
    Trace t = run_scenario(sc);
    c.expect(!t.incomplete, "the planted run must finish");
    int suspended = 0;
    for (const auto& e : t.events)
      if (e.kind == "srv" && e.payload.find("reply=suspended") != std::string::npos) ++suspended;
    c.expect(suspended >= 1, "writer queries suspend once a tag at the cap exists");
    c.expect(!reset_waves(t).empty(), "the planted cap forces the reset");
    OpHistory h = OpHistory::from_trace(t);
    AtomicityOptions opt;
    c.expect(check_atomicity(h, opt).pass, "atomicity holds after the planted reset");
  }
}

TEST_CASE("10 comm stabilization") {
  Criterion c{10, "comm-stabilization"};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scenario sc;
    sc.quorum = QuorumConfig{5, 1, 1, 1};
    sc.seed = seed;
    sc.sched = SchedKind::Fair;
    sc.bounded = false;  // monotone streams rest on the no-removal lemma
    sc.faults.corrupt = true;
    sc.faults.corrupt_tag_ceiling = 12;
    sc.scripts[2] = {{OpKind::Write, 17, 300}, {OpKind::Write, 18, 0}};
    sc.scripts[4] = {{OpKind::Read, 0, 500}, {OpKind::Read, 0, 0}};
    Trace t = run_scenario(sc);
    c.expect(!t.incomplete, "comm runs must finish");
    auto res = check_comm(t, sc.quorum, 3);
    if (!res.pass) std::cout << "  seed " << seed << ": " << res.detail << std::endl;
    c.expect(res.pass, "after 3 cycles the gossip and quorum contracts hold");
  }
}
