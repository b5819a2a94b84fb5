// Copyright 2026 The Encode Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "encode/cli.h"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "encode/datagen.h"
#include "encode/errors.h"
#include "encode/evalmetrics.h"
#include "encode/experiment.h"
#include "encode/inference.h"
#include "encode/interest.h"
#include "encode/projection.h"
#include "encode/serving.h"
#include "encode/store.h"

namespace encode::cli {
namespace {

std::atomic<bool> g_reload_requested{false};
std::atomic<bool> g_stop_requested{false};

extern "C" void on_sighup(int) { g_reload_requested = true; }
extern "C" void on_sigterm(int) { g_stop_requested = true; }

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw ConfigError(what + " must be an unsigned integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("ENCODE_SEED"); env != nullptr && *env != '\0') {
    return parse_u64(env, "ENCODE_SEED");
  }
  return flag;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "a,b,c" or "lo..hi" or "lo..hi:step".
std::vector<std::string> expand_values(const std::string& text) {
  const std::size_t dots = text.find("..");
  if (dots == std::string::npos) return split_list(text);
  const std::size_t colon = text.find(':', dots);
  const std::uint64_t lo = parse_u64(text.substr(0, dots), "range start");
  const std::uint64_t hi = parse_u64(text.substr(dots + 2, colon == std::string::npos ? colon : colon - dots - 2),
                                     "range end");
  const std::uint64_t step = colon == std::string::npos ? 1 : parse_u64(text.substr(colon + 1), "range step");
  if (step == 0 || lo > hi) throw ConfigError("bad range '" + text + "'");
  std::vector<std::string> out;
  for (std::uint64_t v = lo; v <= hi; v += step) out.push_back(std::to_string(v));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const std::string& v : expand_values(text)) out.push_back(parse_u64(v, what));
  if (out.empty()) throw ConfigError(what + " list is empty");
  return out;
}

void require_positive(double v, const std::string& name) {
  if (!(v > 0.0)) throw ConfigError(name + " must be positive");
}

// Options shared by commands that extract interests or run strategies.
struct StrategyFlags {
  std::size_t k = 30;
  std::size_t t = 15;
  double beta = 20.0;
  std::string clustering = "kmeans";
  std::string metric = "unified-sim";
  std::size_t top_k = kDefaultTopK;
  std::size_t hash_bits = kDefaultHashBits;
  std::size_t slice_width = kDefaultSliceWidth;
  std::size_t short_length = kDefaultShortLength;

  void add_extraction(CLI::App* app) {
    app->add_option("--K", k, "Number of interest clusters K (reference setting)");
    app->add_option("--T", t, "Clustering iterations T (reference setting)");
    app->add_option("--beta", beta, "Similarity scaling factor; sim = (1 - cosine distance) / beta (reference setting)");
    app->add_option("--clustering", clustering, "Clustering method: kmeans, random, agglomerative");
    app->add_option("--metric", metric, "Attention metric: unified-sim or scaled-dot (scaled-dot gives ENCODE-)");
  }
  void add_baselines(CLI::App* app) {
    app->add_option("--top-k", top_k, "Behaviors retrieved by SIM/ETA/TWIN (reference setting)");
    app->add_option("--hash-bits", hash_bits, "SimHash code length n (reference setting)");
    app->add_option("--slice-width", slice_width, "SDIM hash slice width");
    app->add_option("--short-length", short_length, "Real-time window M for short-sequence DIN (reference setting)");
  }

  ExtractionConfig extraction(std::uint64_t seed) const {
    if (k == 0 || t == 0) throw ConfigError("--K and --T must be positive");
    require_positive(beta, "--beta");
    return {.k = k,
            .max_iters = t,
            .beta = beta,
            .clustering = parse_clustering(clustering),
            .metric = parse_metric(metric),
            .seed = seed};
  }

  StrategyEnv env(ProjectionModel projection, std::uint64_t seed) const {
    if (top_k == 0 || hash_bits == 0 || slice_width == 0 || short_length == 0) {
      throw ConfigError("--top-k, --hash-bits, --slice-width and --short-length must be positive");
    }
    if (hash_bits % slice_width != 0) throw ConfigError("--slice-width must divide --hash-bits");
    StrategyEnv e = make_env(std::move(projection), extraction(seed), hash_bits, Rng(seed).split(7).seed());
    e.top_k = top_k;
    e.short_length = short_length;
    e.slice_width = slice_width;
    return e;
  }
};

struct HeadFlags {
  double lr = 1e-4;
  std::size_t batch = 1024;
  std::size_t epochs = 1;
  bool realtime = false;

  void add(CLI::App* app) {
    app->add_option("--head-lr", lr, "Scoring-head learning rate (reference setting)");
    app->add_option("--head-batch", batch, "Scoring-head batch size (reference setting)");
    app->add_option("--epochs", epochs, "Scoring-head epochs (reference setting)");
    app->add_flag("--realtime", realtime, "Add the mean of the last M behaviors as a head feature");
  }
  HeadTrainConfig config() const {
    require_positive(lr, "--head-lr");
    if (batch == 0) throw ConfigError("--head-batch must be positive");
    return {.learning_rate = lr, .batch_size = batch, .epochs = epochs};
  }
};

struct ProjFlags {
  std::size_t m = 4;
  std::string loss = "triplets-dynamic";
  std::string sampling = "within-sequence";
  std::size_t steps = 2000;
  double lr = 1e-4;
  std::size_t batch = 1024;
  double aux_weight = 0.1;
  double alpha = 0.2;
  std::size_t negatives = 5;
  std::size_t sequences_per_batch = 8;

  void add(CLI::App* app) {
    app->add_option("--m", m, "Reduced dimension m (reference setting)");
    app->add_option("--loss", loss, "none, mse, n-pair-mc, triplets-fixed, triplets-dynamic");
    app->add_option("--sampling", sampling, "within-neighbors, within-sequence, within-batch");
    app->add_option("--steps", steps, "Training steps");
    app->add_option("--lr", lr, "Adam learning rate (reference setting)");
    app->add_option("--batch", batch, "Anchors per step (reference setting)");
    app->add_option("--aux-weight", aux_weight, "Weight of the distance-preservation loss (reference setting)");
    app->add_option("--alpha", alpha, "Margin for triplets-fixed (reference setting)");
    app->add_option("--negatives", negatives, "Negatives per anchor for n-pair-mc (reference setting)");
    app->add_option("--sequences-per-batch", sequences_per_batch, "Sequences drawn per step");
  }

  TrainConfig config() const {
    const LossKind kind = parse_loss_kind(loss);
    LossSpec spec{.kind = kind};
    if (kind == LossKind::kTripletsFixed) spec.fixed_alpha = alpha;
    if (kind == LossKind::kNPairMc) spec.n_negatives = negatives;
    require_positive(lr, "--lr");
    if (batch == 0 || sequences_per_batch == 0 || negatives == 0) {
      throw ConfigError("--batch, --sequences-per-batch and --negatives must be positive");
    }
    if (alpha < 0.0) throw ConfigError("--alpha must be nonnegative");
    return {.loss = spec,
            .sampling = parse_sampling(sampling),
            .steps = steps,
            .learning_rate = lr,
            .batch_size = batch,
            .aux_weight = aux_weight,
            .sequences_per_batch = sequences_per_batch};
  }
};

std::vector<std::vector<Vec>> all_embeddings(const Dataset& dataset) {
  std::vector<std::vector<Vec>> out;
  out.reserve(dataset.sequences.size());
  for (const BehaviorSequence& s : dataset.sequences) out.push_back(sequence_embeddings(s, dataset.catalog));
  return out;
}

ProjectionModel train_from_flags(const Dataset& dataset, const ProjFlags& flags, std::uint64_t seed) {
  const TrainConfig config = flags.config();
  if (flags.m == 0 || flags.m > dataset.catalog.dim()) throw ConfigError("--m must be in [1, d]");
  const Rng root(seed);
  Rng init_rng = root.split(0);
  Rng train_rng = root.split(1);
  ProjectionModel model = init_projection(dataset.catalog.dim(), flags.m, init_rng);
  model.init_seed = seed;
  return train_projection(std::move(model), all_embeddings(dataset), config, train_rng);
}

ProjectionModel load_projection_for(const std::string& path, std::size_t d) {
  ProjectionModel model = read_projection(path);
  if (model.d() != d) {
    throw ConfigError("projection has d=" + std::to_string(model.d()) + " but the data has d=" + std::to_string(d));
  }
  return model;
}

ScoringHead load_head(const std::string& path, bool zero, std::size_t d) {
  if (path.empty() == !zero) throw ConfigError("give exactly one of --head or --zero-head");
  ScoringHead head = zero ? zero_head(d) : read_head(path);
  if (head.dim != d) throw ConfigError("head dimension does not match the data");
  return head;
}

// ---------------------------------------------------------------- commands

struct GenDataCmd {
  DatasetParams p;
  std::string from_log;
  std::string out = "dataset.jsonl";

  void add(CLI::App* app) {
    app->add_option("--users", p.n_users, "Number of users");
    app->add_option("--L", p.length, "Behaviors per user (reference setting)");
    app->add_option("--items", p.n_items, "Catalog size");
    app->add_option("--d", p.dim, "Embedding dimension d (reference setting)");
    app->add_option("--categories", p.n_categories, "Item categories");
    app->add_option("--interests", p.num_interests, "Planted interests G per user");
    app->add_option("--noise-kappa", p.noise_kappa, "Inverse noise scale of behavior draws");
    app->add_option("--min-separation", p.min_separation_deg, "Minimum angle between a user's planted interests (degrees)");
    app->add_option("--samples-pos", p.samples_pos, "Interest-near candidate samples per user");
    app->add_option("--samples-neg", p.samples_neg, "Uniform candidate samples per user");
    app->add_option("--gamma", p.label_model.gamma, "Label model slope");
    app->add_option("--bias", p.label_model.bias, "Label model bias");
    app->add_option("--test-fraction", p.label_model.test_fraction, "Fraction of samples in the test split");
    app->add_option("--parallel", p.parallelism, "Worker threads (output does not depend on it)");
    app->add_option("--from-log", from_log, "Ingest a user_id,item_id,timestamp,category CSV instead of generating");
    app->add_option("--out", out, "Output dataset (JSONL)");
  }

  int run(std::uint64_t seed, std::ostream& out_stream) {
    if (!from_log.empty()) {
      if (p.dim == 0) throw ConfigError("--d must be positive");
      if (p.length == 0) throw ConfigError("--L must be positive");
      Rng rng(seed);
      IngestedLog log = ingest_event_log(from_log, p.dim, rng, p.length);
      write_dataset(out, {.catalog = std::move(log.catalog), .sequences = std::move(log.sequences)});
      out_stream << "ingested " << from_log << " into " << out << '\n';
      return kExitOk;
    }
    if (p.n_users == 0) throw ConfigError("--users must be positive");
    if (p.length == 0) throw ConfigError("--L must be positive");
    if (p.n_items == 0 || p.dim == 0 || p.n_categories == 0 || p.num_interests == 0) {
      throw ConfigError("--items, --d, --categories and --interests must be positive");
    }
    require_positive(p.noise_kappa, "--noise-kappa");
    if (p.label_model.test_fraction < 0.0 || p.label_model.test_fraction > 1.0) {
      throw ConfigError("--test-fraction must be in [0, 1]");
    }
    p.seed = seed;
    const GeneratedData g = generate_dataset(p);
    write_dataset(out, g.dataset);
    out_stream << "wrote " << g.dataset.sequences.size() << " sequences, " << g.dataset.samples.size()
               << " samples to " << out << '\n';
    return kExitOk;
  }
};

struct TrainProjCmd {
  std::string data = "dataset.jsonl";
  std::string out = "projection.bin";
  std::string log_out;
  ProjFlags proj;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset (JSONL)");
    proj.add(app);
    app->add_option("--out", out, "Output projection");
    app->add_option("--log-out", log_out, "Optional CSV of the per-step training loss");
  }

  int run(std::uint64_t seed, std::ostream& out_stream) {
    const Dataset dataset = read_dataset(data);
    const ProjectionModel model = train_from_flags(dataset, proj, seed);
    write_projection(out, model);
    if (!log_out.empty()) {
      std::string text = "step,loss\n";
      for (const TrainingLogEntry& e : model.log) {
        std::ostringstream line;
        line.precision(9);
        line << e.step << ',' << e.loss << '\n';
        text += line.str();
      }
      write_text(log_out, text);
    }
    out_stream << "wrote " << model.d() << "x" << model.m() << " projection to " << out << " after "
               << model.log.size() << " steps\n";
    return kExitOk;
  }
};

struct ExtractCmd {
  std::string data = "dataset.jsonl";
  std::string proj = "projection.bin";
  std::string out = "store.bin";
  std::size_t parallel = 1;
  StrategyFlags flags;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset (JSONL)");
    app->add_option("--proj", proj, "Projection");
    flags.add_extraction(app);
    app->add_option("--parallel", parallel, "Worker threads (output does not depend on it)");
    app->add_option("--out", out, "Output interest store");
  }

  int run(std::uint64_t seed, std::ostream& out_stream, std::ostream& err) {
    const Dataset dataset = read_dataset(data);
    const ProjectionModel projection = load_projection_for(proj, dataset.catalog.dim());
    const BatchExtraction batch =
        batch_extract(dataset.sequences, dataset.catalog, projection, flags.extraction(seed), parallel);
    for (const ExtractionFailure& f : batch.failures) err << "user " << f.user_id << ": " << f.message << '\n';
    if (batch.sets.empty()) {
      err << "no user could be extracted\n";
      return kExitFailure;
    }
    write_store(out, batch.sets, batch.config_hash);
    out_stream << "wrote " << batch.sets.size() << " interest sets to " << out;
    if (!batch.failures.empty()) out_stream << " (" << batch.failures.size() << " users failed)";
    out_stream << '\n';
    return kExitOk;
  }
};

struct TrainHeadCmd {
  std::string data = "dataset.jsonl";
  std::string proj = "projection.bin";
  std::string strategy = "encode";
  std::string out = "head.bin";
  std::size_t parallel = 1;
  StrategyFlags flags;
  HeadFlags head;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset (JSONL)");
    app->add_option("--proj", proj, "Projection");
    app->add_option("--strategy", strategy, "Strategy providing the interest vector");
    flags.add_extraction(app);
    flags.add_baselines(app);
    head.add(app);
    app->add_option("--parallel", parallel, "Worker threads");
    app->add_option("--out", out, "Output scoring head");
  }

  int run(std::uint64_t seed, std::ostream& out_stream) {
    const Dataset dataset = read_dataset(data);
    const HeadTrainConfig config = head.config();
    const StrategyEnv env = flags.env(load_projection_for(proj, dataset.catalog.dim()), seed);
    const std::vector<HeadExample> examples =
        head_examples(dataset, env, parse_strategy(strategy), head.realtime, Split::kTrain, parallel);
    if (examples.empty()) throw ConfigError("the dataset has no training samples");
    Rng rng = Rng(seed).split(2);
    std::vector<double> losses;
    const ScoringHead trained =
        train_head(zero_head(dataset.catalog.dim(), head.realtime), examples, config, rng, &losses);
    write_head(out, trained);
    out_stream << "trained head on " << examples.size() << " samples";
    if (!losses.empty()) out_stream << ", last loss " << losses.back();
    out_stream << ", wrote " << out << '\n';
    return kExitOk;
  }
};

struct ServeFlags {
  std::string store = "store.bin";
  std::string data = "dataset.jsonl";
  std::string head;
  bool zero = false;
  double beta = 20.0;
  std::string metric = "unified-sim";

  void add(CLI::App* app) {
    app->add_option("--store", store, "Interest store");
    app->add_option("--data", data, "Dataset providing the item catalog");
    app->add_option("--head", head, "Scoring head");
    app->add_flag("--zero-head", zero, "Score with an all-zero head instead of --head");
    app->add_option("--beta", beta, "Similarity scaling factor (reference setting)");
    app->add_option("--metric", metric, "Attention metric: unified-sim or scaled-dot");
  }

  std::unique_ptr<Server> make_server() const {
    require_positive(beta, "--beta");
    Dataset dataset = read_dataset(data);
    const std::size_t d = dataset.catalog.dim();
    ServingModel model{.catalog = std::move(dataset.catalog),
                       .head = load_head(head, zero, d),
                       .beta = beta,
                       .metric = parse_metric(metric)};
    return std::make_unique<Server>(std::move(model), Snapshot::open(store), store);
  }
};

struct ScoreCmd {
  ServeFlags serve;
  std::string requests;
  std::string out;

  void add(CLI::App* app) {
    serve.add(app);
    app->add_option("--requests", requests, "Request file, one JSON object per line")->required();
    app->add_option("--out", out, "Response file (default: standard output)");
  }

  int run(std::ostream& out_stream) {
    const std::unique_ptr<Server> server = serve.make_server();
    std::ifstream in(requests);
    if (!in) throw IoError("cannot open " + requests);
    std::ostringstream responses;
    serve_stream(*server, in, responses);
    if (out.empty()) {
      out_stream << responses.str();
    } else {
      write_text(out, responses.str());
    }
    return kExitOk;
  }
};

struct ServeCmd {
  ServeFlags serve;
  std::optional<std::uint16_t> port;
  std::string host = "127.0.0.1";

  void add(CLI::App* app) {
    serve.add(app);
    app->add_option("--port", port, "Listen on TCP instead of reading standard input (0 picks a port)");
    app->add_option("--host", host, "TCP listen address");
  }

  int run(std::istream& in, std::ostream& out, std::ostream& err) {
    const std::unique_ptr<Server> server = serve.make_server();
    std::signal(SIGHUP, on_sighup);
    const ReloadWatcher watcher(*server, g_reload_requested, &err);
    if (!port) {
      serve_stream(*server, in, out);
      return kExitOk;
    }
    TcpServer tcp(*server, *port, host);
    std::signal(SIGINT, on_sigterm);
    std::signal(SIGTERM, on_sigterm);
    err << "listening on " << host << ":" << tcp.port() << std::endl;
    const std::jthread stopper([&tcp](std::stop_token stop) {
      while (!stop.stop_requested() && !g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(50));
      tcp.stop();
    });
    tcp.run();
    return kExitOk;
  }
};

struct BenchCmd {
  std::string strategies = "encode,din_l";
  std::string lengths = "1000,4000,16000";
  std::string proj;
  std::size_t d = 32;
  std::size_t m = 4;
  BenchConfig config;
  std::string out = "bench.csv";
  StrategyFlags flags;

  void add(CLI::App* app) {
    app->add_option("--strategies", strategies, "Comma-separated strategies");
    app->add_option("--L", lengths, "Comma-separated sequence lengths");
    app->add_option("--repetitions", config.repetitions, "Timed batches per (strategy, L)");
    app->add_option("--warmup", config.warmup, "Untimed batches before measuring");
    app->add_option("--batch", config.batch, "Targets per timed batch");
    app->add_option("--items", config.n_items, "Catalog size of the synthetic user");
    app->add_option("--proj", proj, "Projection (default: a random d x m projection)");
    app->add_option("--d", d, "Embedding dimension when no projection is given (reference setting)");
    app->add_option("--m", m, "Reduced dimension when no projection is given (reference setting)");
    flags.add_extraction(app);
    flags.add_baselines(app);
    app->add_option("--out", out, "Output CSV");
  }

  int run(std::uint64_t seed, std::ostream& out_stream) {
    const std::vector<StrategyKind> kinds = parse_strategy_list(strategies);
    config.lengths = parse_sizes(lengths, "--L");
    config.seed = seed;
    ProjectionModel projection;
    if (proj.empty()) {
      if (m == 0 || m > d) throw ConfigError("--m must be in [1, --d]");
      Rng rng = Rng(seed).split(0);
      projection = init_projection(d, m, rng);
    } else {
      projection = read_projection(proj);
    }
    const std::vector<BenchRecord> records = run_bench(flags.env(std::move(projection), seed), kinds, config);
    write_text(out, format_bench_csv(records));
    out_stream << format_bench_csv(records);
    return kExitOk;
  }
};

struct EvaluateCmd {
  std::string data = "dataset.jsonl";
  std::string proj = "projection.bin";
  std::string strategies = "encode,encode_minus,din_l,din_short,avg_pooling,sim_hard,eta,eta_encode,eta_ta,twin,sdim";
  std::string out_dir = ".";
  std::size_t max_pairs = 0;
  std::size_t parallel = 1;
  StrategyFlags flags;
  HeadFlags head;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset (JSONL)");
    app->add_option("--proj", proj, "Projection");
    app->add_option("--strategies", strategies, "Comma-separated strategies");
    flags.add_extraction(app);
    flags.add_baselines(app);
    head.add(app);
    app->add_option("--max-pairs", max_pairs, "Cap on (user, target) pairs for the relevance indicator (0 = all)");
    app->add_option("--parallel", parallel, "Worker threads (output does not depend on it)");
    app->add_option("--out-dir", out_dir, "Directory for ri_report.csv and auc_report.csv");
  }

  int run(std::uint64_t seed, std::ostream& out_stream) {
    const Dataset dataset = read_dataset(data);
    const std::vector<StrategyKind> kinds = parse_strategy_list(strategies);
    const HeadProtocol protocol{.train = head.config(), .realtime_feature = head.realtime, .shuffle_seed = seed};
    const StrategyEnv env = flags.env(load_projection_for(proj, dataset.catalog.dim()), seed);
    const std::vector<RiRecord> ri = evaluate_ri(dataset, env, kinds, seed, max_pairs, parallel);
    const std::vector<AucRecord> auc = evaluate_auc(dataset, env, kinds, protocol, seed, parallel);
    std::filesystem::create_directories(out_dir);
    write_text(std::filesystem::path(out_dir) / "ri_report.csv", format_ri_csv(ri));
    write_text(std::filesystem::path(out_dir) / "auc_report.csv", format_auc_csv(auc));
    out_stream << format_ri_csv(ri) << format_auc_csv(auc);
    return kExitOk;
  }
};

inline constexpr std::string_view kAblationHeader = "sweep,value,strategy,seed,pairs,ri,oracle_entropy,auc,gauc";

struct AblateCmd {
  std::string data = "dataset.jsonl";
  std::string sweep;
  std::optional<std::string> values;
  std::string strategies = "encode";
  std::string out = "ablation.csv";
  std::size_t max_pairs = 0;
  std::size_t parallel = 1;
  ProjFlags proj;
  StrategyFlags flags;
  HeadFlags head;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset (JSONL)");
    app->add_option("--sweep", sweep, "Parameter to sweep: loss, sampling, clustering, K, m, beta")->required();
    app->add_option("--values", values,
                    "Values as a comma list or lo..hi[:step] (defaults: every loss/sampling/clustering; "
                    "K 10..50:10; m 2..16:2; beta 1,5,10,20,40)");
    app->add_option("--strategies", strategies, "Strategies evaluated at every value");
    proj.add(app);
    flags.add_extraction(app);
    flags.add_baselines(app);
    head.add(app);
    app->add_option("--max-pairs", max_pairs, "Cap on (user, target) pairs for the relevance indicator (0 = all)");
    app->add_option("--parallel", parallel, "Worker threads");
    app->add_option("--out", out, "Output CSV");
  }

  std::vector<std::string> sweep_values() const {
    if (values) {
      std::vector<std::string> v = expand_values(*values);
      if (v.empty()) throw ConfigError("--values is empty");
      return v;
    }
    if (sweep == "loss") return {"none", "mse", "n-pair-mc", "triplets-fixed", "triplets-dynamic"};
    if (sweep == "sampling") return {"within-neighbors", "within-sequence", "within-batch"};
    if (sweep == "clustering") return {"kmeans", "random", "agglomerative"};
    if (sweep == "K") return expand_values("10..50:10");
    if (sweep == "m") return expand_values("2..16:2");
    if (sweep == "beta") return {"1", "5", "10", "20", "40"};
    throw ConfigError("unknown sweep '" + sweep + "'");
  }

  int run(std::uint64_t seed, std::ostream& out_stream) {
    const std::vector<std::string> grid = sweep_values();
    const std::vector<StrategyKind> kinds = parse_strategy_list(strategies);
    const bool retrains = sweep == "loss" || sweep == "sampling" || sweep == "m";
    const Dataset dataset = read_dataset(data);
    const HeadProtocol protocol{.train = head.config(), .realtime_feature = head.realtime, .shuffle_seed = seed};
    std::optional<ProjectionModel> shared;
    if (!retrains) shared = train_from_flags(dataset, proj, seed);

    std::string text(kAblationHeader);
    text += '\n';
    for (const std::string& value : grid) {
      ProjFlags p = proj;
      StrategyFlags f = flags;
      if (sweep == "loss") p.loss = value;
      else if (sweep == "sampling") p.sampling = value;
      else if (sweep == "m") p.m = parse_u64(value, "m");
      else if (sweep == "clustering") f.clustering = value;
      else if (sweep == "K") f.k = parse_u64(value, "K");
      else if (sweep == "beta") f.beta = std::stod(value);
      const StrategyEnv env = f.env(retrains ? train_from_flags(dataset, p, seed) : *shared, seed);
      const std::vector<RiRecord> ri = evaluate_ri(dataset, env, kinds, seed, max_pairs, parallel);
      const std::vector<AucRecord> auc = evaluate_auc(dataset, env, kinds, protocol, seed, parallel);
      for (std::size_t i = 0; i < kinds.size(); ++i) {
        std::ostringstream row;
        row.precision(9);
        row << sweep << ',' << value << ',' << ri[i].strategy << ',' << seed << ',' << ri[i].pairs << ','
            << ri[i].ri << ',' << ri[i].oracle_entropy << ',' << auc[i].auc << ',' << auc[i].gauc << '\n';
        text += row.str();
      }
    }
    write_text(out, text);
    out_stream << text;
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offline multi-interest extraction and online target attention for long behavior sequences"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  std::uint64_t seed_flag = 0;
  app.add_option("--seed", seed_flag, "Random seed (ENCODE_SEED overrides)");

  GenDataCmd gen;
  TrainProjCmd train_proj;
  ExtractCmd extract;
  TrainHeadCmd train_head_cmd;
  ScoreCmd score_cmd;
  ServeCmd serve;
  BenchCmd bench;
  EvaluateCmd evaluate;
  AblateCmd ablate;
  CLI::App* gen_app = app.add_subcommand("gen-data", "Generate a synthetic planted-interest dataset");
  CLI::App* proj_app = app.add_subcommand("train-proj", "Train the dimensionality-reducing projection");
  CLI::App* extract_app = app.add_subcommand("extract", "Extract every user's interests into a store");
  CLI::App* head_app = app.add_subcommand("train-head", "Train the logistic scoring head for one strategy");
  CLI::App* score_app = app.add_subcommand("score", "Answer a file of scoring requests");
  CLI::App* serve_app = app.add_subcommand("serve", "Serve scoring requests from stdin or TCP");
  CLI::App* bench_app = app.add_subcommand("bench", "Time the online stage across sequence lengths");
  CLI::App* eval_app = app.add_subcommand("evaluate", "Relevance indicator and AUC reports per strategy");
  CLI::App* ablate_app = app.add_subcommand("ablate", "Sweep one setting and report relevance and AUC");
  for (CLI::App* sub : {gen_app, proj_app, extract_app, head_app, score_app, serve_app, bench_app, eval_app, ablate_app}) {
    sub->add_option("--seed", seed_flag, "Random seed (ENCODE_SEED overrides)");
  }
  gen.add(gen_app);
  train_proj.add(proj_app);
  extract.add(extract_app);
  train_head_cmd.add(head_app);
  score_cmd.add(score_app);
  serve.add(serve_app);
  bench.add(bench_app);
  evaluate.add(eval_app);
  ablate.add(ablate_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::uint64_t seed = effective_seed(seed_flag);
    if (gen_app->parsed()) return gen.run(seed, out);
    if (proj_app->parsed()) return train_proj.run(seed, out);
    if (extract_app->parsed()) return extract.run(seed, out, err);
    if (head_app->parsed()) return train_head_cmd.run(seed, out);
    if (score_app->parsed()) return score_cmd.run(out);
    if (serve_app->parsed()) return serve.run(in, out, err);
    if (bench_app->parsed()) return bench.run(seed, out);
    if (eval_app->parsed()) return evaluate.run(seed, out);
    if (ablate_app->parsed()) return ablate.run(seed, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace encode::cli
