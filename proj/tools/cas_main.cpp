#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cas/checker.hpp"
#include "cas/coding.hpp"
#include "cas/sim.hpp"

namespace {

using namespace cas;

struct SeedRange {
  std::uint64_t lo = 0, hi = 0;
  bool given = false;
};

bool parse_seed_range(const std::string& s, SeedRange* out) {
  auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      out->lo = out->hi = std::stoull(s);
    } else {
      out->lo = std::stoull(s.substr(0, dots));
      out->hi = std::stoull(s.substr(dots + 2));
    }
  } catch (...) {
    return false;
  }
  out->given = true;
  return out->lo <= out->hi;
}

int run_command(const std::string& scenario_path, const std::string& checks_csv,
                const std::string& seeds_arg, std::int64_t budget, const std::string& trace_path,
                int delta_override) {
  ScenarioParseError perr;
  auto parsed = parse_scenario_file(scenario_path, &perr);
  if (!parsed) {
    std::cerr << "parse error: " << scenario_path << ":" << perr.line << ": " << perr.message
              << "\n";
    return 2;
  }
  Scenario base = *parsed;
  if (budget > 0) base.budget = budget;
  if (delta_override >= 0) base.delta = delta_override;

  std::vector<std::string> checks;
  {
    std::istringstream cs(checks_csv);
    std::string c;
    while (std::getline(cs, c, ','))
      if (!c.empty()) checks.push_back(c);
  }
  for (const auto& c : checks) {
    if (c != "atomicity" && c != "liveness" && c != "storage" && c != "recovery" && c != "comm") {
      std::cerr << "unknown check '" << c << "' (use atomicity,liveness,storage,recovery,comm)\n";
      return 2;
    }
  }

  SeedRange seeds;
  if (!seeds_arg.empty() && !parse_seed_range(seeds_arg, &seeds)) {
    std::cerr << "bad --seeds range '" << seeds_arg << "' (use e.g. 1..50)\n";
    return 2;
  }
  if (!seeds.given) {
    seeds.lo = seeds.hi = base.seed;
    seeds.given = true;
  }

  bool all_pass = true;
  int runs = 0, failed_runs = 0;
  for (std::uint64_t seed = seeds.lo; seed <= seeds.hi; ++seed) {
    Scenario sc = base;
    sc.seed = seed;
    RunStats stats;
    Trace trace;
    try {
      trace = run_scenario(sc, &stats);
    } catch (const std::exception& ex) {
      std::cerr << "scenario invalid: " << ex.what() << "\n";
      return 2;
    }
    ++runs;
    if (!trace_path.empty()) {
      std::string path = trace_path;
      if (seeds.lo != seeds.hi) path += "." + std::to_string(seed);
      std::ofstream of(path);
      trace.write(of);
      std::cout << "TRACE " << path << "\n";
    }
    OpHistory hist = OpHistory::from_trace(trace);
    std::cout << "RUN seed=" << seed << " digest=" << scenario_digest(sc)
              << " steps=" << stats.steps << " cycles=" << stats.cycles
              << " ops=" << stats.ops_completed << " failed_ops=" << stats.ops_failed
              << " resets=" << stats.resets_completed << " max_storage=" << stats.max_storage
              << (trace.incomplete ? " INCOMPLETE" : "") << "\n";
    bool run_pass = !trace.incomplete;
    if (trace.incomplete) std::cout << "CHECK budget FAIL step budget exhausted\n";
    for (const auto& c : checks) {
      CheckResult r;
      if (c == "atomicity") {
        AtomicityOptions opt;
        opt.v0 = sc.v0;
        r = check_atomicity(hist, opt);
      } else if (c == "liveness") {
        r = check_liveness(hist, sc.sched, sc.quorum.k, 0);
      } else if (c == "storage") {
        r = check_storage_bound(trace, sc.quorum.n, sc.delta);
      } else if (c == "recovery") {
        RecoveryResult rec;
        r = check_recovery(hist, sc.v0, &rec);
        if (rec.found) r.detail += " recovery_cycles=" + std::to_string(rec.cycle);
      } else if (c == "comm") {
        r = check_comm(trace, sc.quorum, 3);
      }
      std::cout << "CHECK " << c << " " << (r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL"));
      if (!r.detail.empty()) std::cout << " " << r.detail;
      std::cout << "\n";
      if (!r.skipped && !r.pass) run_pass = false;
    }
    if (!run_pass) {
      all_pass = false;
      ++failed_runs;
    }
  }
  if (runs > 1)
    std::cout << "SUMMARY runs=" << runs << " failed=" << failed_runs << " "
              << (all_pass ? "PASS" : "FAIL") << "\n";
  return all_pass ? 0 : 1;
}

int codec_encode(std::int64_t p, int k, int n, Word secret, const std::vector<Word>& rand) {
  if (static_cast<int>(rand.size()) != k - 1) {
    std::cerr << "encode: need exactly k-1 --rand values\n";
    return 2;
  }
  try {
    Gf f(p);
    std::size_t next = 0;
    auto draw = [&]() { return rand[next++]; };
    auto [poly, shares] = share_secret(secret, k, n, f, draw);
    (void)poly;
    for (int j = 1; j <= n; ++j) std::cout << *shares.shares[j - 1] << (j == n ? "\n" : " ");
  } catch (const std::exception& ex) {
    std::cerr << "encode: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

int codec_decode(std::int64_t p, int k, int n, const std::vector<Word>& shares,
                 const std::vector<std::string>& corrupt, const std::vector<int>& erase) {
  try {
    Gf f(p);
    if (static_cast<int>(shares.size()) != n) {
      std::cerr << "decode: need exactly N share values\n";
      return 2;
    }
    ShareVector sv = ShareVector::empty(n);
    for (int j = 1; j <= n; ++j) sv.set(j, f.norm(shares[j - 1]));
    for (const auto& c : corrupt) {
      auto eq = c.find('=');
      if (eq == std::string::npos) {
        std::cerr << "decode: --corrupt wants i=v\n";
        return 2;
      }
      int i = std::stoi(c.substr(0, eq));
      if (i < 1 || i > n) {
        std::cerr << "decode: corrupt index out of range\n";
        return 2;
      }
      sv.set(i, f.norm(std::stoll(c.substr(eq + 1))));
    }
    for (int i : erase) {
      if (i < 1 || i > n) {
        std::cerr << "decode: erase index out of range\n";
        return 2;
      }
      sv.erase(i);
    }
    auto secret = rs_decode_secret(sv, k, f);
    if (!secret) {
      std::cerr << "decode: FAIL\n";
      return 1;
    }
    std::cout << *secret << "\n";
  } catch (const std::exception& ex) {
    std::cerr << "decode: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded atomic storage: simulator, checkers and codec"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario and check the trace");
  std::string scenario_path, checks = "atomicity,liveness,storage", seeds, trace_path;
  std::int64_t budget = 0;
  int delta_override = -1;
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--check", checks, "comma list: atomicity,liveness,storage,recovery,comm");
  run->add_option("--seeds", seeds, "seed range, e.g. 1..50");
  run->add_option("--budget", budget, "step budget override");
  run->add_option("--trace", trace_path, "write the trace here");
  run->add_option("--delta", delta_override, "delta override");

  auto* codec = app.add_subcommand("codec", "share/recover secrets on the command line");
  codec->require_subcommand(1);
  auto* enc = codec->add_subcommand("encode", "split a secret into N shares");
  std::int64_t p = 257;
  int k = 1, n = 5;
  Word secret = 0;
  std::vector<Word> rand_coeffs;
  enc->add_option("--p", p, "field modulus (prime)");
  enc->add_option("--k", k, "message length")->required();
  enc->add_option("--n", n, "share count")->required();
  enc->add_option("--secret", secret, "the secret")->required();
  enc->add_option("--rand", rand_coeffs, "k-1 blinding coefficients")->delimiter(',');

  auto* dec = codec->add_subcommand("decode", "recover a secret from shares");
  std::vector<Word> share_vals;
  std::vector<std::string> corrupt;
  std::vector<int> erase;
  dec->add_option("--p", p, "field modulus (prime)");
  dec->add_option("--k", k, "message length")->required();
  dec->add_option("--n", n, "share count")->required();
  dec->add_option("--shares", share_vals, "N share values")->delimiter(',')->required();
  dec->add_option("--corrupt", corrupt, "i=v, overwrite share i")->delimiter(',');
  dec->add_option("--erase", erase, "erase share i")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  if (run->parsed()) return run_command(scenario_path, checks, seeds, budget, trace_path, delta_override);
  if (enc->parsed()) return codec_encode(p, k, n, secret, rand_coeffs);
  if (dec->parsed()) return codec_decode(p, k, n, share_vals, corrupt, erase);
  return 2;
}
