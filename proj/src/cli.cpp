#include "dimco/cli.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dimco/bound.hpp"
#include "dimco/io.hpp"
#include "dimco/quantizers.hpp"
#include "dimco/retrieval.hpp"
#include "dimco/trainer.hpp"

namespace dimco::cli {

namespace {

struct GenSynthOpts {
  SynthSpec spec;
  std::string out;
};

struct TrainOpts {
  std::string data, out, log, checkpoint_prefix;
  std::uint32_t k = 16, d = 4, bottleneck = 128;
  std::vector<std::uint32_t> hidden;
  std::string activation = "relu";
  TrainConfig cfg;
  std::optional<std::uint32_t> classes_per_batch, pairs, per_class_limit;
  std::uint32_t checkpoint_every = 0;
};

struct EncodeOpts {
  std::string model, data, out;
};

struct FewShotOpts {
  std::string model, data, out;
  EpisodeSpec spec;
};

struct RetrievalOpts {
  std::string model, db_data, query_data, out;
  std::vector<std::size_t> ks{1, 2, 4, 8};
};

struct KnnOpts {
  std::string db, query_data, query_codes, model, pq, sq, out;
  std::size_t neighbors = 200;
};

struct CorrelationOpts {
  std::string data, out;
  std::vector<std::string> models;
  CheckpointEvalConfig cfg;
};

struct CompressOpts {
  std::string method = "dimco", data, model, codebook, out;
  std::uint32_t k = 16, d = 4;
  double bits_in = 32.0;
};

struct BoundOpts {
  std::optional<double> support_size, vc_dim, tasks;
  std::optional<std::uint32_t> k, d;
  double labels = 2, m = 100, delta = 0.05, c_vc = 1.0, c_mi = 1.0;
};

struct BenchOpts {
  std::size_t n = 100000, queries = 100, top = 10;
  std::uint32_t k = 16, d = 16;
};

// Reports are buffered and either written atomically to --out or printed.
void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    io::write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }
}

std::ostringstream report() {
  std::ostringstream s;
  s << std::setprecision(9);
  return s;
}

void run_gen_synth(const GenSynthOpts& o, std::uint64_t seed, std::ostream& out) {
  SynthSpec spec = o.spec;
  spec.seed = seed;
  const SynthData synth = gen_synth(spec);
  io::write_embeddings(o.out, synth.data);
  auto r = report();
  r << "items\tdim\tclasses\n" << synth.data.size() << '\t' << synth.data.dim() << '\t' << spec.classes << '\n';
  out << r.str();
}

void run_train(TrainOpts o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const LabeledEmbeddings data = io::read_embeddings(o.data);
  EncoderConfig ec;
  ec.input_dim = static_cast<std::uint32_t>(data.dim());
  ec.hidden_dims = o.hidden;
  ec.bottleneck = o.bottleneck;
  ec.spec = {o.k, o.d};
  ec.activation = o.activation == "tanh" ? Activation::tanh : Activation::relu;
  ec.seed = seed;
  TrainConfig cfg = o.cfg;
  cfg.seed = seed;
  cfg.classes_per_batch = o.classes_per_batch.value_or(std::min<std::uint32_t>(10, data.class_count));
  cfg.ind_pairs_per_batch = o.pairs;
  cfg.per_class_limit = o.per_class_limit;

  auto log = report();
  write_train_log_header(log);
  const TrainResult res = train(data, ec, cfg, [&](const EpochRecord& rec, const EncoderParams& p) {
    write_train_log_record(log, rec);
    if (o.checkpoint_every > 0 && !o.checkpoint_prefix.empty() && rec.epoch % o.checkpoint_every == 0) {
      std::ostringstream name;
      name << o.checkpoint_prefix << std::setw(4) << std::setfill('0') << rec.epoch << ".dmdl";
      io::write_model(name.str(), p);
    }
  });
  emit(log.str(), o.log, out);
  if (res.diverged) throw TrainingError(res.diagnostic);
  io::write_model(o.out, res.params);
  if (!res.log.empty()) {
    err << "final mutual information " << res.log.back().report.mutual_information << " nats ("
        << res.log.back().report.mutual_information / std::numbers::ln2 << " bits)\n";
  }
}

void run_encode(const EncodeOpts& o, std::ostream& out) {
  const EncoderParams params = io::read_model(o.model);
  const LabeledEmbeddings data = io::read_embeddings(o.data);
  const CodeDatabase db = build_database(params, data);
  const io::Bytes bytes = io::encode_codes(db);
  io::write_file_atomic(o.out, bytes);
  auto r = report();
  r << "items\tbytes_per_code\tfile_bytes\n" << db.size() << '\t' << db.spec().bytes_per_code() << '\t' << bytes.size() << '\n';
  out << r.str();
}

void run_fewshot(FewShotOpts o, std::uint64_t seed, std::ostream& out) {
  const EncoderParams params = io::read_model(o.model);
  const LabeledEmbeddings data = io::read_embeddings(o.data);
  o.spec.seed = seed;
  const FewShotResult res = fewshot_episode(params, data, o.spec);
  auto r = report();
  r << "ways\tshots\tqueries_per_class\tepisodes\tmean_accuracy\tci95\n"
    << o.spec.ways << '\t' << o.spec.shots << '\t' << o.spec.queries_per_class << '\t' << o.spec.episodes << '\t'
    << res.mean_accuracy << '\t' << res.ci95 << '\n';
  emit(r.str(), o.out, out);
}

void run_retrieval(const RetrievalOpts& o, std::ostream& out) {
  const EncoderParams params = io::read_model(o.model);
  const LabeledEmbeddings db_data = io::read_embeddings(o.db_data);
  const bool same = o.query_data.empty();
  const LabeledEmbeddings query_data = same ? db_data : io::read_embeddings(o.query_data);
  const CodeDatabase db = build_database(params, db_data);
  const auto tables = log_prob_tables(encode_batch(params, query_data.data));
  const auto recall = recall_at(db, tables, query_data.labels, o.ks, same);
  auto r = report();
  r << "k\trecall\n";
  for (std::size_t i = 0; i < o.ks.size(); ++i) r << o.ks[i] << '\t' << recall[i] << '\n';
  emit(r.str(), o.out, out);
}

void run_knn(const KnnOpts& o, std::ostream& out) {
  const CodeDatabase db = io::read_codes(o.db);
  std::vector<ScoreTable> tables;
  std::vector<std::uint32_t> labels;
  std::string method;
  const int sources = !o.model.empty() + !o.pq.empty() + !o.sq.empty() + !o.query_codes.empty();
  if (sources != 1) throw ArgumentError("eval knn needs exactly one of --model, --pq, --sq, --query-codes");
  if (!o.query_codes.empty()) {
    method = "hamming";
    const CodeDatabase q = io::read_codes(o.query_codes);
    if (!q.has_labels) throw ArgumentError("query codes carry no labels");
    for (std::size_t i = 0; i < q.size(); ++i) tables.push_back(ScoreTable::hamming(q.spec(), q.packed.unpack(i)));
    labels = q.labels;
  } else {
    if (o.query_data.empty()) throw ArgumentError("eval knn needs --query-data with --model/--pq/--sq");
    const LabeledEmbeddings q = io::read_embeddings(o.query_data);
    labels = q.labels;
    if (!o.model.empty()) {
      method = "dimco";
      tables = log_prob_tables(encode_batch(io::read_model(o.model), q.data));
    } else if (!o.pq.empty()) {
      method = "pq";
      const PQCodebook cb = io::read_pq(o.pq);
      for (std::size_t i = 0; i < q.size(); ++i) tables.push_back(pq_query_table(cb, pq_encode(cb, q.data.row(i))));
    } else {
      method = "sq";
      const SQCodebook cb = io::read_sq(o.sq);
      for (std::size_t i = 0; i < q.size(); ++i) tables.push_back(sq_query_table(cb, sq_encode(cb, q.data.row(i))));
    }
  }
  const double acc = knn_top1(db, tables, labels, o.neighbors, false);
  auto r = report();
  r << "method\tneighbors\tqueries\ttop1\n" << method << '\t' << o.neighbors << '\t' << labels.size() << '\t' << acc << '\n';
  emit(r.str(), o.out, out);
}

void run_correlation(CorrelationOpts o, std::uint64_t seed, std::ostream& out) {
  const LabeledEmbeddings data = io::read_embeddings(o.data);
  o.cfg.seed = seed;
  std::vector<CheckpointMetrics> metrics;
  auto r = report();
  r << "checkpoint";
  for (const char* n : kCheckpointMetricNames) r << '\t' << n;
  r << '\n';
  for (const auto& path : o.models) {
    metrics.push_back(evaluate_checkpoint(io::read_model(path), data, o.cfg));
    r << path;
    for (double v : metrics.back().values) r << '\t' << v;
    r << '\n';
  }
  const CorrelationMatrix corr = metric_correlation(metrics);
  r << "metric";
  for (const char* n : kCheckpointMetricNames) r << '\t' << n;
  r << '\n';
  for (std::size_t i = 0; i < corr.size(); ++i) {
    r << kCheckpointMetricNames[i];
    for (const auto& v : corr[i]) {
      r << '\t';
      if (v) {
        r << *v;
      } else {
        r << "undefined";
      }
    }
    r << '\n';
  }
  emit(r.str(), o.out, out);
}

void run_compress(const CompressOpts& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const LabeledEmbeddings data = io::read_embeddings(o.data);
  CodeDatabase db;
  double distortion = std::nan("");
  if (o.method == "dimco") {
    if (o.model.empty()) throw ArgumentError("compress --method dimco needs --model");
    db = build_database(io::read_model(o.model), data);
  } else if (o.method == "pq") {
    const PQCodebook cb = pq_train(data.data, {o.k, o.d}, seed);
    for (const auto& w : cb.warnings) err << "warning: " << w << '\n';
    db = {PackedCodes(cb.spec), data.labels, true};
    for (std::size_t i = 0; i < data.size(); ++i) db.packed.push_back(pq_encode(cb, data.data.row(i)));
    distortion = pq_distortion(cb, data.data);
    if (!o.codebook.empty()) io::write_pq(o.codebook, cb);
  } else if (o.method == "sq") {
    const SQCodebook cb = sq_train(data.data, o.k);
    for (const auto& w : cb.warnings) err << "warning: " << w << '\n';
    db = {PackedCodes(cb.spec()), data.labels, true};
    for (std::size_t i = 0; i < data.size(); ++i) db.packed.push_back(sq_encode(cb, data.data.row(i)));
    distortion = sq_distortion(cb, data.data);
    if (!o.codebook.empty()) io::write_sq(o.codebook, cb);
  } else {
    throw ArgumentError("unknown compression method " + o.method);
  }
  io::write_codes(o.out, db);
  auto r = report();
  r << "method\tk\td\tbits_per_code\tcompression_rate\tdistortion\n"
    << o.method << '\t' << db.spec().k << '\t' << db.spec().d << '\t'
    << db.spec().d * std::log2(static_cast<double>(db.spec().k)) << '\t'
    << compression_rate(data.dim(), o.bits_in, db.spec()) << '\t' << distortion << '\n';
  out << r.str();
}

void run_bound(const BoundOpts& o, std::ostream& out) {
  BoundInputs in;
  if (o.support_size) {
    in.support_size = *o.support_size;
  } else if (o.k && o.d) {
    in.support_size = default_support_size({*o.k, *o.d});
  } else {
    throw ArgumentError("bound needs --support-size or both --k and --d");
  }
  in.label_count = o.labels;
  in.sample_size = o.m;
  in.delta = o.delta;
  in.vc_dim = o.vc_dim;
  in.task_count = o.tasks;
  auto r = report();
  const auto row = [&](const char* name, double v) { r << name << '\t' << v << '\t' << v / std::numbers::ln2 << '\n'; };
  r << "term\tnats\tbits\n";
  row("lemma1", lemma1_bound(in));
  if (in.vc_dim || in.task_count) {
    const GapTerms g = theorem1_gap(in, o.c_vc, o.c_mi);
    row("vc_term", g.vc_term);
    row("mi_term", g.mi_term);
    row("count_term", g.count_term);
    row("total", g.total);
  }
  out << r.str();
}

void run_bench(const BenchOpts& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const CodeSpec spec{o.k, o.d};
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Symbol> sym(0, spec.k - 1);
  CodeDatabase db{PackedCodes(spec), {}, false};
  Codeword w(spec.d);
  for (std::size_t i = 0; i < o.n; ++i) {
    for (auto& s : w) s = sym(rng);
    db.packed.push_back(w);
  }
  std::normal_distribution<double> logit(0.0, 2.0);
  std::vector<ScoreTable> tables;
  std::vector<double> l(spec.cells());
  for (std::size_t q = 0; q < o.queries; ++q) {
    for (double& v : l) v = logit(rng);
    tables.push_back(ScoreTable::log_probs(ProbMatrix::from_logits(spec, l)));
  }
  std::uint64_t checksum = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& t : tables) {
    for (const auto& h : query_topk(db, t, o.top)) checksum = checksum * 1000003u + h.index;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto r = report();
  r << "items\tk\td\tbytes_per_code\tqueries\ttop\tchecksum\n"
    << o.n << '\t' << spec.k << '\t' << spec.d << '\t' << spec.bytes_per_code() << '\t' << o.queries << '\t'
    << o.top << '\t' << checksum << '\n';
  out << r.str();
  // Timings vary run to run, so they stay off the report stream.
  err << "scan time " << secs << " s, " << (secs > 0 ? static_cast<double>(o.queries) / secs : 0.0)
      << " queries/s, " << (secs > 0 ? static_cast<double>(o.queries * o.n) / secs : 0.0) << " codes/s\n";
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete infomax codes: training, retrieval and evaluation"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  GenSynthOpts gs;
  auto* gen = app.add_subcommand("gen-synth", "Write a Gaussian-cluster dataset (DEMB)");
  gen->add_option("--classes", gs.spec.classes)->capture_default_str();
  gen->add_option("--per-class", gs.spec.per_class)->capture_default_str();
  gen->add_option("--dim", gs.spec.dim)->capture_default_str();
  gen->add_option("--spread", gs.spec.spread, "Cluster standard deviation")->capture_default_str();
  gen->add_option("--center-scale", gs.spec.center_scale)->capture_default_str();
  gen->add_option("--out", gs.out)->required();
  gen->add_option("--seed", seed);

  TrainOpts tr;
  auto* trn = app.add_subcommand("train", "Train an encoder by maximizing I(code; label)");
  trn->add_option("--data", tr.data)->required();
  trn->add_option("--k", tr.k)->capture_default_str();
  trn->add_option("--d", tr.d)->capture_default_str();
  trn->add_option("--hidden", tr.hidden, "Hidden layer widths (comma separated)")->delimiter(',');
  trn->add_option("--bottleneck", tr.bottleneck)->capture_default_str();
  trn->add_option("--activation", tr.activation)->check(CLI::IsMember({"relu", "tanh"}))->capture_default_str();
  trn->add_option("--lr", tr.cfg.lr)->capture_default_str();
  trn->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  trn->add_option("--classes-per-batch", tr.classes_per_batch, "Default: min(10, classes)");
  trn->add_option("--items-per-class", tr.cfg.items_per_class)->capture_default_str();
  trn->add_option("--lambda", tr.cfg.lambda)->capture_default_str();
  trn->add_option("--pairs", tr.pairs, "Regularizer pairs per batch (default d)");
  trn->add_option("--per-class-limit", tr.per_class_limit, "Train on at most this many examples per class");
  trn->add_option("--out", tr.out, "Model file (DMDL)")->required();
  trn->add_option("--log", tr.log, "Training log (default: stdout)");
  trn->add_option("--checkpoint-every", tr.checkpoint_every, "Save a model every N epochs");
  trn->add_option("--checkpoint-prefix", tr.checkpoint_prefix);
  trn->add_option("--seed", seed);

  EncodeOpts en;
  auto* enc = app.add_subcommand("encode", "Encode a dataset into a code database (DCOD)");
  enc->add_option("--model", en.model)->required();
  enc->add_option("--data", en.data)->required();
  enc->add_option("--out", en.out)->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a model or code database");
  eval->require_subcommand(1);

  FewShotOpts fs;
  auto* few = eval->add_subcommand("fewshot", "N-way K-shot episodes");
  few->add_option("--model", fs.model)->required();
  few->add_option("--data", fs.data)->required();
  few->add_option("--ways", fs.spec.ways)->capture_default_str();
  few->add_option("--shots", fs.spec.shots)->capture_default_str();
  few->add_option("--queries", fs.spec.queries_per_class, "Queries per class")->capture_default_str();
  few->add_option("--episodes", fs.spec.episodes)->capture_default_str();
  few->add_option("--out", fs.out);
  few->add_option("--seed", seed);

  RetrievalOpts rt;
  auto* ret = eval->add_subcommand("retrieval", "Recall@K");
  ret->add_option("--model", rt.model)->required();
  ret->add_option("--db-data", rt.db_data)->required();
  ret->add_option("--query-data", rt.query_data, "Default: query the database split itself");
  ret->add_option("--ks", rt.ks)->delimiter(',');
  ret->add_option("--out", rt.out);

  KnnOpts kn;
  auto* knn = eval->add_subcommand("knn", "k-nearest-neighbor top-1 accuracy over a code database");
  knn->add_option("--db", kn.db, "Support codes (DCOD)")->required();
  knn->add_option("--query-data", kn.query_data);
  knn->add_option("--query-codes", kn.query_codes, "Query codes (DCOD), scored by Hamming distance");
  knn->add_option("--model", kn.model, "DIMCO model for probabilistic queries");
  knn->add_option("--pq", kn.pq, "PQ codebook (DPQ1)");
  knn->add_option("--sq", kn.sq, "SQ codebook (DSQ1)");
  knn->add_option("--neighbors", kn.neighbors)->capture_default_str();
  knn->add_option("--out", kn.out);

  CorrelationOpts co;
  auto* cor = eval->add_subcommand("correlation", "Correlate I^ with few-shot accuracy and Recall@1 across checkpoints");
  cor->add_option("--data", co.data)->required();
  cor->add_option("--models", co.models)->required()->expected(3, 1 << 20);
  cor->add_option("--episodes", co.cfg.episodes)->capture_default_str();
  cor->add_option("--queries", co.cfg.queries_per_class)->capture_default_str();
  cor->add_option("--mi-batches", co.cfg.mi_batches)->capture_default_str();
  cor->add_option("--out", co.out);
  cor->add_option("--seed", seed);

  CompressOpts cp;
  auto* cmp = app.add_subcommand("compress", "Compress embeddings into k-way d-dimensional codes");
  cmp->add_option("--method", cp.method)->check(CLI::IsMember({"dimco", "pq", "sq"}))->capture_default_str();
  cmp->add_option("--data", cp.data)->required();
  cmp->add_option("--model", cp.model, "Trained model (dimco)");
  cmp->add_option("--k", cp.k)->capture_default_str();
  cmp->add_option("--d", cp.d, "Subspaces (pq); ignored by sq, which uses one symbol per coordinate")->capture_default_str();
  cmp->add_option("--bits-in", cp.bits_in, "Bits per input coordinate")->capture_default_str();
  cmp->add_option("--codebook", cp.codebook, "Where to write the PQ/SQ codebook");
  cmp->add_option("--out", cp.out)->required();
  cmp->add_option("--seed", seed);

  BoundOpts bo;
  auto* bnd = app.add_subcommand("bound", "Finite-sample MI deviation bound and generalization gap terms");
  bnd->add_option("--support-size", bo.support_size, "Number of distinct codes |X|");
  bnd->add_option("--k", bo.k, "With --d: support size k^d");
  bnd->add_option("--d", bo.d);
  bnd->add_option("--labels", bo.labels)->capture_default_str();
  bnd->add_option("--m", bo.m, "Sample size")->capture_default_str();
  bnd->add_option("--delta", bo.delta)->capture_default_str();
  bnd->add_option("--vc-dim", bo.vc_dim);
  bnd->add_option("--tasks", bo.tasks);
  bnd->add_option("--c-vc", bo.c_vc)->capture_default_str();
  bnd->add_option("--c-mi", bo.c_mi)->capture_default_str();

  BenchOpts be;
  auto* bch = app.add_subcommand("bench", "Time exact top-k scans over a random code database");
  bch->add_option("--n", be.n)->capture_default_str();
  bch->add_option("--k", be.k)->capture_default_str();
  bch->add_option("--d", be.d)->capture_default_str();
  bch->add_option("--queries", be.queries)->capture_default_str();
  bch->add_option("--top", be.top)->capture_default_str();
  bch->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      run_gen_synth(gs, seed, out);
    } else if (*trn) {
      run_train(tr, seed, out, err);
    } else if (*enc) {
      run_encode(en, out);
    } else if (*few) {
      run_fewshot(fs, seed, out);
    } else if (*ret) {
      run_retrieval(rt, out);
    } else if (*knn) {
      run_knn(kn, out);
    } else if (*cor) {
      run_correlation(co, seed, out);
    } else if (*cmp) {
      run_compress(cp, seed, out, err);
    } else if (*bnd) {
      run_bound(bo, out);
    } else if (*bch) {
      run_bench(be, seed, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace dimco::cli
