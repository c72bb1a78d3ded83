#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "tenstream/aptera.hpp"
#include "tenstream/errors.hpp"
#include "tenstream/harness.hpp"
#include "tenstream/io.hpp"
#include "tenstream/octen.hpp"
#include "tenstream/onlinebtd.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/sambaten.hpp"
#include "tenstream/spade.hpp"

namespace fs = std::filesystem;

namespace tenstream::cli {

namespace {

std::string join(const std::vector<Index>& v, char sep = ' ') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

std::vector<Index> split_indices(const std::string& s, char sep) {
  std::vector<Index> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, sep);)
    if (!tok.empty()) out.push_back(std::stoll(tok));
  return out;
}

std::map<std::string, std::string> read_manifest(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.txt");
  if (!f) throw DataError("cannot open " + (fs::path(dir) / "manifest.txt").string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(f, line);) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("manifest line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("manifest is missing '" + key + "'");
  return it->second;
}

}  // namespace

void save_model(const SavedModel& m, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  std::ofstream man(d / "manifest.txt");
  if (!man) throw DataError("cannot write " + (d / "manifest.txt").string());
  man << "model=" << m.model << '\n';
  if (m.model == "cp") {
    man << "rank=" << m.cp.rank() << "\nlambda=lambda.csv\n";
    save_csv(m.cp.lambda, (d / "lambda.csv").string());
    for (int n = 0; n < m.cp.order(); ++n) {
      const std::string name = "mode" + std::to_string(n) + ".csv";
      man << "mode" << n << '=' << name << '\n';
      save_csv(m.cp.factors[n], (d / name).string());
    }
  } else if (m.model == "parafac2") {
    const Parafac2Factors& f = m.pf2;
    std::vector<Index> rows;
    Index total = 0;
    for (const auto& q : f.Q) {
      rows.push_back(q.rows());
      total += q.rows();
    }
    Matrix q(total, f.rank());
    Index off = 0;
    for (const auto& qk : f.Q) {
      q.middleRows(off, qk.rows()) = qk;
      off += qk.rows();
    }
    man << "rank=" << f.rank() << "\nH=H.csv\nV=V.csv\nW=W.csv\nQ=Q.csv\nq_rows=" << join(rows) << '\n';
    save_csv(f.H, (d / "H.csv").string());
    save_csv(f.V, (d / "V.csv").string());
    save_csv(f.W, (d / "W.csv").string());
    save_csv(q, (d / "Q.csv").string());
  } else if (m.model == "btd") {
    const BtdFactors& f = m.btd;
    man << "blocks=";
    for (Index r = 0; r < f.ranks.count(); ++r) {
      const auto& b = f.ranks.blocks[r];
      man << (r ? ";" : "") << b.L << ',' << b.M << ',' << b.N;
    }
    man << "\nA=A.csv\nB=B.csv\nC=C.csv\n";
    save_csv(f.A, (d / "A.csv").string());
    save_csv(f.B, (d / "B.csv").string());
    save_csv(f.C, (d / "C.csv").string());
    for (std::size_t r = 0; r < f.cores.size(); ++r) {
      const std::string name = "core" + std::to_string(r + 1) + ".csv";
      man << "core" << r + 1 << '=' << name << '\n';
      const auto& c = f.cores[r];
      save_csv(Eigen::Map<const Matrix>(c.data(), 1, c.size()), (d / name).string());
    }
  } else {
    throw InvalidArgument("unknown model '" + m.model + "'");
  }
  if (!man) throw DataError("write failed: " + (d / "manifest.txt").string());
}

SavedModel load_model(const std::string& dir) {
  const auto kv = read_manifest(dir);
  const fs::path d(dir);
  auto csv = [&](const std::string& key) { return load_csv((d / need(kv, key)).string()); };
  SavedModel m;
  m.model = need(kv, "model");
  if (m.model == "cp") {
    Matrix lambda = csv("lambda");
    if (lambda.cols() != 1) throw DataError("lambda must be a single column");
    m.cp.lambda = lambda.col(0);
    for (int n = 0; kv.count("mode" + std::to_string(n)); ++n) m.cp.factors.push_back(csv("mode" + std::to_string(n)));
    for (const auto& f : m.cp.factors)
      if (f.cols() != m.cp.rank()) throw DataError("factor width does not match lambda");
  } else if (m.model == "parafac2") {
    Parafac2Factors& f = m.pf2;
    f.H = csv("H");
    f.V = csv("V");
    f.W = csv("W");
    Matrix q = csv("Q");
    Index off = 0;
    for (Index r : split_indices(need(kv, "q_rows"), ' ')) {
      if (off + r > q.rows()) throw DataError("q_rows exceed Q.csv");
      f.Q.push_back(q.middleRows(off, r));
      off += r;
    }
    if (off != q.rows() || static_cast<Index>(f.Q.size()) != f.W.rows()) throw DataError("Q.csv does not match q_rows");
  } else if (m.model == "btd") {
    BtdFactors& f = m.btd;
    std::stringstream ss(need(kv, "blocks"));
    for (std::string b; std::getline(ss, b, ';');) {
      auto v = split_indices(b, ',');
      if (v.size() != 3) throw DataError("bad block '" + b + "'");
      f.ranks.blocks.push_back({v[0], v[1], v[2]});
    }
    f.ranks.validate();
    f.A = csv("A");
    f.B = csv("B");
    f.C = csv("C");
    for (Index r = 0; r < f.ranks.count(); ++r) {
      const auto& b = f.ranks.blocks[r];
      Matrix c = csv("core" + std::to_string(r + 1));
      if (c.size() != b.L * b.M * b.N) throw DataError("core size does not match its block ranks");
      f.cores.emplace_back(Shape{b.L, b.M, b.N}, std::vector<double>(c.data(), c.data() + c.size()));
    }
  } else {
    throw DataError("unknown model '" + m.model + "' in manifest");
  }
  return m;
}

namespace {

struct Report {
  std::ostream& out;
  void put(const std::string& k, const std::string& v) { out << k << '=' << v << '\n'; }
  void put(const std::string& k, double v) { put(k, format_double(v)); }
  void put(const std::string& k, Index v) { put(k, std::to_string(v)); }
  void put(const std::string& k, int v) { put(k, std::to_string(v)); }
  void put(const std::string& k, bool v) { put(k, std::string(v ? "true" : "false")); }
  void warnings(const std::vector<std::string>& w) {
    put("warnings", static_cast<Index>(w.size()));
    for (const auto& s : w) put("warning", s);
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Common {
  std::string input, out_dir, model = "cp", init = "random", metrics;
  Index rank = 1;
  std::vector<Index> block_ranks;
  double tol = 0;
  int max_iters = 0;
  std::uint64_t seed = 0;
  bool timing = false;
};

AlsOptions als_options(const Common& c) {
  AlsOptions o;
  if (c.tol > 0) o.tol = c.tol;
  if (c.max_iters > 0) o.max_iters = c.max_iters;
  o.seed = c.seed;
  o.init = c.init == "hosvd" ? InitMethod::Hosvd : InitMethod::Random;
  return o;
}

Parafac2Options pf2_options(const Common& c) {
  Parafac2Options o;
  static_cast<AlsOptions&>(o) = als_options(c);
  if (!(c.tol > 0)) o.tol = Parafac2Options{}.tol;
  return o;
}

BtdRanks btd_ranks(const Common& c) {
  if (c.block_ranks.size() != 3) throw InvalidArgument("--block-ranks needs L M N");
  return BtdRanks::uniform(c.rank, c.block_ranks[0], c.block_ranks[1], c.block_ranks[2]);
}

IrregularTensor load_slices(const std::string& path) {
  IrregularTensor t = load_irregular(path);
  if (t.squared_norm() == 0.0) throw DataError(path + ": tensor has no nonzero entries");
  return t;
}

DenseTensor load_dense(const std::string& path) {
  SparseTensor s = load_tensor(path);
  if (s.order() != 3) throw DataError(path + ": expected a 3-way tensor");
  if (s.nnz() == 0) throw DataError(path + ": tensor has no nonzero entries");
  return s.to_dense();
}

void add_common(CLI::App* sub, Common& c, bool needs_input = true) {
  auto* in = sub->add_option("-i,--input", c.input, "input tensor file");
  if (needs_input) in->required();
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--tol", c.tol, "convergence tolerance");
  sub->add_option("--max-iters", c.max_iters, "iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--init", c.init, "initialization")->check(CLI::IsMember({"random", "hosvd"}));
  sub->add_flag("--timing", c.timing, "add wall-clock seconds to the report");
}

int cmd_gen(const Common& c, const std::vector<Index>& dims, std::optional<double> snr, double density,
            bool on_factors, const std::string& out_path, const std::string& truth_dir, Report& rep) {
  GenSpec s;
  s.dims = dims;
  s.rank = c.rank;
  s.seed = c.seed;
  s.noise_snr_db = snr;
  s.density = density;
  s.noise_on_factors = on_factors;
  rep.put("model", c.model);
  if (c.model == "cp") {
    s.model = ModelKind::Cp;
    CpInstance inst = gen_cp(s);
    SparseTensor t = SparseTensor::from_dense(inst.tensor);
    save_tensor(t, out_path);
    rep.put("nnz", t.nnz());
    if (!truth_dir.empty()) save_model({"cp", inst.truth, {}, {}}, truth_dir);
  } else if (c.model == "parafac2") {
    s.model = ModelKind::Parafac2;
    Parafac2Instance inst = gen_parafac2(s);
    save_irregular(inst.tensor, out_path);
    rep.put("slices", inst.tensor.num_slices());
    if (!truth_dir.empty()) save_model({"parafac2", {}, inst.truth, {}}, truth_dir);
  } else {
    s.model = ModelKind::Btd;
    s.btd_ranks = btd_ranks(c);
    BtdInstance inst = gen_btd(s);
    SparseTensor t = SparseTensor::from_dense(inst.tensor);
    save_tensor(t, out_path);
    rep.put("nnz", t.nnz());
    if (!truth_dir.empty()) save_model({"btd", {}, {}, inst.truth}, truth_dir);
  }
  rep.put("shape", join(dims));
  rep.put("seed", std::to_string(c.seed));
  rep.put("output", out_path);
  return kOk;
}

int cmd_decompose(const Common& c, Report& rep) {
  const auto t0 = Clock::now();
  rep.put("model", c.model);
  rep.put("rank", c.rank);
  if (c.model == "cp") {
    DenseTensor t = load_dense(c.input);
    CpTrace tr;
    KruskalFactors k = cp_als(t, c.rank, als_options(c), &tr);
    DenseTensor m = reconstruct(k);
    rep.put("iterations", tr.iterations);
    rep.put("converged", tr.converged);
    rep.put("relerr", relative_error(t, m));
    rep.put("fitness", fitness(t, m));
    if (!c.out_dir.empty()) save_model({"cp", k, {}, {}}, c.out_dir);
  } else if (c.model == "parafac2") {
    IrregularTensor t = load_slices(c.input);
    Parafac2Trace tr;
    Parafac2Factors f = parafac2_als(t, c.rank, pf2_options(c), &tr);
    const double e = relative_error(t, f);
    rep.put("iterations", tr.iterations);
    rep.put("converged", tr.converged);
    rep.put("relerr", e);
    rep.put("fitness", 100.0 * (1 - e * e));
    rep.warnings(tr.warnings);
    if (!c.out_dir.empty()) save_model({"parafac2", {}, f, {}}, c.out_dir);
  } else {
    DenseTensor t = load_dense(c.input);
    BtdTrace tr;
    BtdFactors f = btd_als(t, btd_ranks(c), als_options(c), &tr);
    const double e = btd_relative_error(t, f);
    rep.put("iterations", tr.iterations);
    rep.put("converged", tr.converged);
    rep.put("relerr", e);
    rep.put("fitness", 100.0 * (1 - e * e));
    if (!c.out_dir.empty()) save_model({"btd", {}, {}, f}, c.out_dir);
  }
  if (c.timing) rep.put("seconds", seconds_since(t0));
  return kOk;
}

struct StreamArgs {
  std::string method = "sambaten";
  Index batch = 0;
  double init_frac = 0.1;
  Index s = 2;
  int r = 4;
  bool qc = false;
  Index q = 30, p = 20, shared = 5;
};

int cmd_stream(const Common& c, const StreamArgs& a, Report& rep) {
  if (a.batch < 1) throw InvalidArgument("--batch-size must be positive");
  if (!(a.init_frac > 0 && a.init_frac < 1)) throw InvalidArgument("--init-frac must lie in (0, 1)");
  std::vector<std::string> rows;
  auto split = [&](Index K) {
    const Index k0 = std::max<Index>(1, static_cast<Index>(std::llround(a.init_frac * static_cast<double>(K))));
    if (k0 >= K) throw InvalidArgument("--init-frac leaves no slices to stream");
    return k0;
  };
  std::vector<std::string> warnings;
  double final_err = 0;
  Index batches = 0, slices = 0;
  auto row = [&](Index b, Index k, double err, double secs) {
    std::string r = std::to_string(b) + "," + std::to_string(k) + "," + format_double(err);
    if (c.timing) r += "," + format_double(secs);
    rows.push_back(r);
    final_err = err;
    batches = b;
    slices = k;
  };

  if (a.method == "spade") {
    IrregularTensor t = load_slices(c.input);
    const Index K = t.num_slices(), k0 = split(K);
    auto first = [&](Index k) { return IrregularTensor{{t.slices.begin(), t.slices.begin() + k}}; };
    SpadeOptions so;
    so.seed = c.seed;
    auto t0 = Clock::now();
    SpadeState st = spade_init(first(k0), c.rank, pf2_options(c), so);
    row(0, k0, relative_error(first(k0), st.factors), seconds_since(t0));
    for (Index b = k0, n = 1; b < K; b += a.batch, ++n) {
      const Index e = std::min(K, b + a.batch);
      t0 = Clock::now();
      spade_update(st, {t.slices.begin() + b, t.slices.begin() + e});
      const double secs = seconds_since(t0);
      row(n, e, relative_error(first(e), st.factors), secs);
    }
    warnings = st.warnings;
    if (!c.out_dir.empty()) save_model({"parafac2", {}, st.factors, {}}, c.out_dir);
  } else {
    DenseTensor t = load_dense(c.input);
    const Index K = t.dim(2), k0 = split(K);
    if (a.method == "sambaten") {
      SambatenOptions so;
      so.s = a.s;
      so.r = a.r;
      so.seed = c.seed;
      so.als = als_options(c);
      auto t0 = Clock::now();
      SambatenState st = sambaten_init(t.slices(0, k0), c.rank, so);
      row(0, k0, relative_error(t.slices(0, k0), reconstruct(st.factors)), seconds_since(t0));
      for (Index b = k0, n = 1; b < K; b += a.batch, ++n) {
        const Index e = std::min(K, b + a.batch);
        t0 = Clock::now();
        if (a.qc)
          sambaten_update_qc(st, t.slices(b, e));
        else
          sambaten_update(st, t.slices(b, e));
        const double secs = seconds_since(t0);
        row(n, e, relative_error(t.slices(0, e), reconstruct(st.factors)), secs);
      }
      warnings = st.warnings;
      if (!c.out_dir.empty()) save_model({"cp", st.factors, {}, {}}, c.out_dir);
    } else if (a.method == "octen") {
      OctenOptions so;
      so.Q = a.q;
      so.p = a.p;
      so.shared = a.shared;
      so.seed = c.seed;
      so.als = als_options(c);
      so.expected_slices = K;
      auto t0 = Clock::now();
      OctenState st = octen_init(t.slices(0, k0), c.rank, so);
      row(0, k0, relative_error(t.slices(0, k0), reconstruct(st.factors)), seconds_since(t0));
      for (Index b = k0, n = 1; b < K; b += a.batch, ++n) {
        const Index e = std::min(K, b + a.batch);
        t0 = Clock::now();
        octen_update(st, t.slices(b, e));
        const double secs = seconds_since(t0);
        row(n, e, relative_error(t.slices(0, e), reconstruct(st.factors)), secs);
      }
      warnings = st.warnings;
      if (!c.out_dir.empty()) save_model({"cp", st.factors, {}, {}}, c.out_dir);
    } else {
      auto t0 = Clock::now();
      OnlineBtdState st = onlinebtd_init(t.slices(0, k0), btd_ranks(c), als_options(c));
      row(0, k0, btd_relative_error(t.slices(0, k0), st.factors), seconds_since(t0));
      for (Index b = k0, n = 1; b < K; b += a.batch, ++n) {
        const Index e = std::min(K, b + a.batch);
        t0 = Clock::now();
        onlinebtd_update(st, t.slices(b, e));
        const double secs = seconds_since(t0);
        row(n, e, btd_relative_error(t.slices(0, e), st.factors), secs);
      }
      warnings = st.warnings;
      if (!c.out_dir.empty()) save_model({"btd", {}, {}, st.factors}, c.out_dir);
    }
  }
  if (!c.metrics.empty()) {
    std::ofstream f(c.metrics);
    if (!f) throw DataError("cannot write " + c.metrics);
    f << "batch,slices,relerr" << (c.timing ? ",seconds" : "") << '\n';
    for (const auto& r : rows) f << r << '\n';
  }
  rep.put("method", a.method);
  rep.put("rank", c.rank);
  rep.put("batches", batches);
  rep.put("slices", slices);
  rep.put("relerr", final_err);
  rep.put("fitness", 100.0 * (1 - final_err * final_err));
  rep.warnings(warnings);
  return kOk;
}

int cmd_rank(const Common& c, const std::string& method, Index rmax, int experiments, Report& rep) {
  const auto t0 = Clock::now();
  rep.put("method", method);
  if (method == "aptera") {
    IrregularTensor t = load_slices(c.input);
    ApteraOptions o;
    o.pf2 = pf2_options(c);
    o.seed = c.seed;
    RankEstimate e = aptera(t, rmax, experiments, o);
    rep.put("rank", e.estimated_rank);
    rep.put("per_experiment", join(e.per_experiment));
    std::string pm;
    for (std::size_t i = 0; i < e.per_mode.size(); ++i)
      pm += (i ? ";" : "") + join({e.per_mode[i][0], e.per_mode[i][1], e.per_mode[i][2]}, ',');
    rep.put("per_mode", pm);
    rep.warnings(e.warnings);
  } else {
    DenseTensor t = load_dense(c.input);
    GetRankOptions o;
    o.als = als_options(c);
    GetRankReport r;
    const Index k = get_rank(t, rmax, experiments, o, &r);
    rep.put("rank", k);
    std::string scores;
    for (std::size_t i = 0; i < r.mean_scores.size(); ++i) scores += (i ? " " : "") + format_double(r.mean_scores[i]);
    rep.put("scores", scores);
  }
  if (c.timing) rep.put("seconds", seconds_since(t0));
  return kOk;
}

int cmd_eval(const Common& c, const std::string& metric, const std::string& factors, const std::string& reference,
             Report& rep) {
  SavedModel m = load_model(factors);
  rep.put("metric", metric);
  if (metric == "fms") {
    if (reference.empty()) throw InvalidArgument("fms needs --reference");
    SavedModel r = load_model(reference);
    if (m.model != "cp" || r.model != "cp") throw InvalidArgument("fms compares two cp models");
    rep.put("fms", fms(m.cp, r.cp));
    return kOk;
  }
  if (c.input.empty()) throw InvalidArgument(metric + " needs --input");
  double e = 0;
  if (m.model == "parafac2") {
    e = relative_error(load_slices(c.input), m.pf2);
  } else {
    DenseTensor t = load_dense(c.input);
    e = m.model == "cp" ? relative_error(t, reconstruct(m.cp)) : btd_relative_error(t, m.btd);
  }
  if (metric == "relerr")
    rep.put("relerr", e);
  else
    rep.put("fitness", 100.0 * (1 - e * e));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming tensor decompositions", "tenstream"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (default: TENSTREAM_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  Common c;
  std::vector<Index> dims;
  double snr = 0, density = 1.0;
  bool has_snr = false, on_factors = false;
  std::string out_path, truth_dir;
  auto* gen = app.add_subcommand("gen", "generate a synthetic tensor");
  gen->add_option("--model", c.model)->check(CLI::IsMember({"cp", "parafac2", "btd"}));
  gen->add_option("--dims", dims, "I J K (parafac2: I_max J K)")->required()->expected(3);
  gen->add_option("--rank", c.rank)->check(CLI::PositiveNumber);
  gen->add_option("--block-ranks", c.block_ranks, "L M N for every block")->expected(3);
  gen->add_option("--snr", snr, "noise level in dB")->each([&](const std::string&) { has_snr = true; });
  gen->add_option("--density", density);
  gen->add_flag("--noise-on-factors", on_factors, "btd: perturb A, B, C instead of the tensor");
  gen->add_option("--seed", c.seed);
  gen->add_option("-o,--output", out_path)->required();
  gen->add_option("--truth", truth_dir, "directory for the true factors");

  auto* dec = app.add_subcommand("decompose", "batch decomposition");
  add_common(dec, c);
  dec->add_option("--model", c.model)->check(CLI::IsMember({"cp", "parafac2", "btd"}));
  dec->add_option("--rank", c.rank)->required()->check(CLI::PositiveNumber);
  dec->add_option("--block-ranks", c.block_ranks)->expected(3);
  dec->add_option("-o,--output", c.out_dir, "directory for factor CSVs");

  StreamArgs sa;
  auto* str = app.add_subcommand("stream", "incremental decomposition over slice batches");
  add_common(str, c);
  str->add_option("--method", sa.method)->check(CLI::IsMember({"sambaten", "octen", "spade", "onlinebtd"}));
  str->add_option("--rank", c.rank)->required()->check(CLI::PositiveNumber);
  str->add_option("--block-ranks", c.block_ranks)->expected(3);
  str->add_option("--batch-size", sa.batch)->required();
  str->add_option("--init-frac", sa.init_frac);
  str->add_option("--sample-factor", sa.s, "sambaten: s");
  str->add_option("--repetitions", sa.r, "sambaten: r");
  str->add_flag("--qc", sa.qc, "sambaten: quality control");
  str->add_option("--q", sa.q, "octen: compressed size");
  str->add_option("--p", sa.p, "octen: replicas");
  str->add_option("--shared", sa.shared, "octen: shared anchor columns");
  str->add_option("--metrics", c.metrics, "per-batch CSV");
  str->add_option("-o,--output", c.out_dir, "directory for factor CSVs");

  std::string rank_method = "aptera";
  Index rmax = 0;
  int experiments = 10;
  auto* rnk = app.add_subcommand("rank", "rank estimation");
  add_common(rnk, c);
  rnk->add_option("--method", rank_method)->check(CLI::IsMember({"aptera", "getrank"}));
  rnk->add_option("--rmax", rmax);
  rnk->add_option("--experiments", experiments)->check(CLI::PositiveNumber);

  std::string metric = "relerr", factors, reference;
  auto* ev = app.add_subcommand("eval", "score saved factors");
  add_common(ev, c, false);
  ev->add_option("--metric", metric)->check(CLI::IsMember({"relerr", "fitness", "fms"}));
  ev->add_option("-f,--factors", factors)->required();
  ev->add_option("--reference", reference, "second factor directory for fms");

  for (auto* sub : {gen, dec, str, rnk, ev}) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const int saved_threads = thread_limit();
  if (threads > 0) set_thread_limit(threads);
  std::ostringstream buf;
  Report rep{buf};
  int code = kOk;
  try {
    if (*gen)
      code = cmd_gen(c, dims, has_snr ? std::optional<double>(snr) : std::nullopt, density, on_factors, out_path,
                     truth_dir, rep);
    else if (*dec)
      code = cmd_decompose(c, rep);
    else if (*str)
      code = cmd_stream(c, sa, rep);
    else if (*rnk)
      code = cmd_rank(c, rank_method, rmax, experiments, rep);
    else
      code = cmd_eval(c, metric, factors, reference, rep);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    code = kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    code = kData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    code = kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kData;
  }
  set_thread_limit(saved_threads);
  if (code == kOk) out << buf.str();
  return code;
}

}  // namespace tenstream::cli
