#include "mlctr/cli.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "mlctr/checkpoint.hpp"
#include "mlctr/errors.hpp"
#include "mlctr/synth.hpp"
#include "mlctr/training.hpp"

namespace mlctr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + ": bad number '" + s + "'");
  }
}

long long to_int(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + ": bad integer '" + s + "'");
  }
}

bool to_bool(const std::string& s, const char* what) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError(std::string(what) + ": bad boolean '" + s + "'");
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out.flush()) throw IoError("write failed for " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

SplitSpec make_split_spec(const RunConfig& cfg) {
  const std::vector<double> f = parse_double_list(cfg.split, "--split");
  if (f.size() != 3)
    throw ConfigError("--split needs exactly three fractions, got " +
                      std::to_string(f.size()));
  SplitSpec s;
  s.train_frac = f[0];
  s.val_frac = f[1];
  s.test_frac = f[2];
  s.seed = cfg.seed;
  s.validate();
  return s;
}

ModelSpec make_model_spec(const RunConfig& cfg) {
  ModelSpec spec;
  spec.rank = cfg.rank;
  spec.layers = cfg.layers;
  spec.hidden = cfg.hidden;
  spec.activation = Activation::parse(cfg.activation);
  if (cfg.readout == "dot")
    spec.readout = ReadoutKind::dot;
  else if (cfg.readout == "mlp")
    spec.readout = ReadoutKind::mlp;
  else
    throw ConfigError("unknown readout '" + cfg.readout + "'");
  spec.mlp_hidden = cfg.mlp_hidden;
  spec.lambda = cfg.lambda;
  spec.seed = cfg.seed;
  spec.freeze_base = cfg.freeze_base;
  spec.validate();
  return spec;
}

TrainConfig make_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.batch_size = cfg.batch_size;
  t.max_epochs = cfg.max_epochs;
  t.patience = cfg.patience;
  t.seed = cfg.seed;
  t.deterministic = cfg.deterministic;
  t.validate();
  return t;
}

std::string model_label(const ModelSpec& spec, bool coupled) {
  if (coupled) return "coupled";
  if (spec.readout == ReadoutKind::mlp) return "mlctr-mlp";
  if (spec.layers == 0) return "cp";
  return "mlctr";
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_rmse,seconds_elapsed\n";
  for (const EpochStats& st : history)
    out << st.epoch << ',' << fmt17(st.train_loss) << ',' << fmt17(st.val_rmse)
        << ',' << fmt17(st.seconds) << '\n';
  return out.str();
}

std::string metrics_header() {
  return "dataset,model,rank,rmse,mae,mape,n_total,n_mape\n";
}

std::string metrics_row(const std::string& dataset, const std::string& model,
                        int rank, const MetricsReport& r) {
  std::ostringstream out;
  out << dataset << ',' << model << ',' << rank << ',' << fmt17(r.rmse) << ','
      << fmt17(r.mae) << ',' << fmt17(r.mape) << ',' << r.n_total << ','
      << r.n_mape << '\n';
  return out.str();
}

std::string describe(const SparseTensor3& t) {
  std::ostringstream out;
  out << t.dims[0] << 'x' << t.dims[1] << 'x' << t.dims[2] << ", "
      << t.entries.size() << " observed (sparsity " << fmt17(sparsity(t)) << ")";
  return out.str();
}

struct PreparedTensor {
  Split parts;
  Standardizer st;
  std::array<std::int64_t, 3> dims;
};

PreparedTensor prepare(const SparseTensor3& raw, const SplitSpec& split_spec) {
  auto [std_t, st] = standardize(raw);
  PreparedTensor p;
  p.st = st;
  p.dims = raw.dims;
  p.parts = split(std_t, split_spec);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config file / manifest

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(csv);
  while (std::getline(in, cur, ',')) out.push_back(trim(cur));
  if (!csv.empty() && csv.back() == ',') out.push_back("");
  return out;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
  std::vector<double> out;
  for (const std::string& tok : split_csv(csv)) out.push_back(to_double(tok, what));
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  for (const std::string& tok : split_csv(csv))
    out.push_back(static_cast<int>(to_int(tok, what)));
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

std::vector<std::int64_t> parse_dims_list(const std::string& csv, const char* what) {
  std::vector<std::int64_t> out;
  for (const std::string& tok : split_csv(csv)) out.push_back(to_int(tok, what));
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

namespace {

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "command") return;  // informational; the subcommand wins
  if (key == "x") cfg.x_path = value;
  else if (key == "y") cfg.y_path = value;
  else if (key == "rank") cfg.rank = static_cast<int>(to_int(value, "rank"));
  else if (key == "layers") cfg.layers = static_cast<int>(to_int(value, "layers"));
  else if (key == "hidden") cfg.hidden = static_cast<int>(to_int(value, "hidden"));
  else if (key == "activation") cfg.activation = value;
  else if (key == "readout") cfg.readout = value;
  else if (key == "mlp_hidden") cfg.mlp_hidden = static_cast<int>(to_int(value, "mlp_hidden"));
  else if (key == "lambda") cfg.lambda = to_double(value, "lambda");
  else if (key == "freeze_base") cfg.freeze_base = to_bool(value, "freeze_base");
  else if (key == "lr") cfg.lr = to_double(value, "lr");
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_int(value, "batch_size"));
  else if (key == "max_epochs") cfg.max_epochs = static_cast<int>(to_int(value, "max_epochs"));
  else if (key == "patience") cfg.patience = static_cast<int>(to_int(value, "patience"));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(value, "seed"));
  else if (key == "split") cfg.split = value;
  else if (key == "deterministic") cfg.deterministic = to_bool(value, "deterministic");
  else if (key == "out") cfg.out_dir = value;
  else if (key == "checkpoint") cfg.checkpoint_path = value;
  else if (key == "queries") cfg.queries_path = value;
  else if (key == "ranks") cfg.ranks = value;
  else if (key == "sparsities") cfg.sparsities = value;
  else if (key == "variants") cfg.variants = value;
  else if (key == "y_sparsity") cfg.y_sparsity = to_double(value, "y_sparsity");
  else if (key == "jobs") cfg.jobs = static_cast<int>(to_int(value, "jobs"));
  else if (key == "dims") cfg.dims = value;
  else if (key == "true_rank") cfg.true_rank = static_cast<int>(to_int(value, "true_rank"));
  else if (key == "noise") cfg.noise = to_double(value, "noise");
  else if (key == "nonlinearity") cfg.nonlinearity = value;
  else if (key == "coupled") cfg.coupled = to_bool(value, "coupled");
  else throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key=value");
    apply_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

std::string manifest_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "command=" << cfg.command << '\n'
      << "x=" << cfg.x_path << '\n'
      << "y=" << cfg.y_path << '\n'
      << "rank=" << cfg.rank << '\n'
      << "layers=" << cfg.layers << '\n'
      << "hidden=" << cfg.hidden << '\n'
      << "activation=" << cfg.activation << '\n'
      << "readout=" << cfg.readout << '\n'
      << "mlp_hidden=" << cfg.mlp_hidden << '\n'
      << "lambda=" << fmt17(cfg.lambda) << '\n'
      << "freeze_base=" << (cfg.freeze_base ? 1 : 0) << '\n'
      << "lr=" << fmt17(cfg.lr) << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "max_epochs=" << cfg.max_epochs << '\n'
      << "patience=" << cfg.patience << '\n'
      << "seed=" << cfg.seed << '\n'
      << "split=" << cfg.split << '\n'
      << "deterministic=" << (cfg.deterministic ? 1 : 0) << '\n'
      << "out=" << cfg.out_dir << '\n'
      << "checkpoint=" << cfg.checkpoint_path << '\n'
      << "queries=" << cfg.queries_path << '\n'
      << "ranks=" << cfg.ranks << '\n'
      << "sparsities=" << cfg.sparsities << '\n'
      << "variants=" << cfg.variants << '\n'
      << "y_sparsity=" << fmt17(cfg.y_sparsity) << '\n'
      << "jobs=" << cfg.jobs << '\n'
      << "dims=" << cfg.dims << '\n'
      << "true_rank=" << cfg.true_rank << '\n'
      << "noise=" << fmt17(cfg.noise) << '\n'
      << "nonlinearity=" << cfg.nonlinearity << '\n'
      << "coupled=" << (cfg.coupled ? 1 : 0) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// train

namespace {

template <class Model>
int finish_train(const RunConfig& cfg, const Model& model,
                 std::vector<Sample> train_stream,
                 const std::vector<Sample>& val_stream,
                 const std::vector<Sample>& x_test,
                 const std::vector<Sample>& y_test, const Standardizer& st_x,
                 const Standardizer& st_y, bool coupled) {
  const TrainConfig tcfg = make_train_config(cfg);
  const auto result = train(model, std::move(train_stream), val_stream, tcfg);

  std::printf("epochs: %zu run, best %d (val rmse %.6g)\n", result.history.size(),
              result.best_epoch, result.best_val_rmse);

  const std::string label = model_label(model.spec, coupled);
  std::string metrics = metrics_header();
  const MetricsReport rx = evaluate(result.best, TensorTag::X, x_test, st_x);
  metrics += metrics_row("x", label, model.spec.rank, rx);
  std::printf("x test: rmse %.6g mae %.6g mape %.4g%% (n %lld)\n", rx.rmse, rx.mae,
              rx.mape, static_cast<long long>(rx.n_total));
  if (!y_test.empty()) {
    const MetricsReport ry = evaluate(result.best, TensorTag::Y, y_test, st_y);
    metrics += metrics_row("y", label, model.spec.rank, ry);
    std::printf("y test: rmse %.6g mae %.6g mape %.4g%% (n %lld)\n", ry.rmse,
                ry.mae, ry.mape, static_cast<long long>(ry.n_total));
  }

  ensure_dir(cfg.out_dir);
  Checkpoint cp;
  cp.model = result.best;
  cp.std_x = st_x;
  cp.std_y = st_y;
  save_checkpoint(cp, join_path(cfg.out_dir, "checkpoint.txt"));
  write_file(join_path(cfg.out_dir, "history.csv"), history_csv(result.history));
  write_file(join_path(cfg.out_dir, "metrics.csv"), metrics);
  write_file(join_path(cfg.out_dir, "manifest.txt"), manifest_text(cfg));
  std::printf("artifacts: %s/{checkpoint.txt,history.csv,metrics.csv,manifest.txt}\n",
              cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int run_train(const RunConfig& cfg) {
  if (cfg.x_path.empty()) throw ConfigError("train needs --x <file>");
  const bool coupled = !cfg.y_path.empty();
  SplitSpec split_spec = make_split_spec(cfg);
  const ModelSpec mspec = make_model_spec(cfg);

  const SparseTensor3 x_raw = load_coo(cfg.x_path);
  std::printf("x: %s %s\n", cfg.x_path.c_str(), describe(x_raw).c_str());
  const PreparedTensor x = prepare(x_raw, split_spec);

  std::vector<Sample> train_stream = to_samples(x.parts.train, TensorTag::X);
  std::vector<Sample> val_stream = to_samples(x.parts.val, TensorTag::X);
  const std::vector<Sample> x_test = to_samples(x.parts.test, TensorTag::X);

  if (!coupled) {
    std::printf("split: train %zu / val %zu / test %zu\n", train_stream.size(),
                val_stream.size(), x_test.size());
    const SingleModel model = make_single_model(x.dims, mspec);
    std::printf("model: %s rank %d layers %d\n",
                model_label(mspec, false).c_str(), mspec.rank, mspec.layers);
    return finish_train(cfg, model, std::move(train_stream), val_stream, x_test,
                        {}, x.st, Standardizer{}, false);
  }

  const SparseTensor3 y_raw = load_coo(cfg.y_path);
  std::printf("y: %s %s\n", cfg.y_path.c_str(), describe(y_raw).c_str());
  if (y_raw.dims[0] != x_raw.dims[0] || y_raw.dims[1] != x_raw.dims[1])
    throw ConfigError("coupled tensors must share modes 1 and 2");

  // The side tensor gets its own permutation stream.
  SplitSpec y_split = split_spec;
  y_split.seed = split_spec.seed + 1;
  const PreparedTensor y = prepare(y_raw, y_split);

  for (const Sample& s : to_samples(y.parts.train, TensorTag::Y))
    train_stream.push_back(s);
  for (const Sample& s : to_samples(y.parts.val, TensorTag::Y))
    val_stream.push_back(s);
  const std::vector<Sample> y_test = to_samples(y.parts.test, TensorTag::Y);

  std::printf("split: train %zu / val %zu / test %zu (x+y)\n", train_stream.size(),
              val_stream.size(), x_test.size() + y_test.size());

  const CoupledModel model = make_coupled_model(
      {x.dims[0], x.dims[1], x.dims[2], y.dims[2]}, mspec);
  std::printf("model: %s rank %d layers %d\n", model_label(mspec, true).c_str(),
              mspec.rank, mspec.layers);
  return finish_train(cfg, model, std::move(train_stream), val_stream, x_test,
                      y_test, x.st, y.st, true);
}

// ---------------------------------------------------------------------------
// evaluate

int run_evaluate(const RunConfig& cfg) {
  if (cfg.checkpoint_path.empty()) throw ConfigError("evaluate needs --checkpoint");
  if (cfg.x_path.empty()) throw ConfigError("evaluate needs --x <file>");
  const Checkpoint cp = load_checkpoint(cfg.checkpoint_path);
  if (!cp.coupled() && !cfg.y_path.empty())
    throw ConfigError("checkpoint has no second tensor; drop --y");

  const SplitSpec split_spec = make_split_spec(cfg);
  SparseTensor3 x = load_coo(cfg.x_path);
  for (auto& e : x.entries) e.value = cp.std_x.transform(e.value);
  const Split xs = split(x, split_spec);
  const std::vector<Sample> x_test = to_samples(xs.test, TensorTag::X);

  std::string metrics = metrics_header();
  auto eval_x = [&](const auto& model) {
    const MetricsReport r =
        evaluate(model, TensorTag::X, x_test, cp.std_x);
    metrics += metrics_row("x", model_label(model.spec, cp.coupled()),
                           model.spec.rank, r);
    std::printf("x test: rmse %.6g mae %.6g mape %.4g%% (n %lld)\n", r.rmse,
                r.mae, r.mape, static_cast<long long>(r.n_total));
  };
  std::visit(eval_x, cp.model);

  if (!cfg.y_path.empty()) {
    SparseTensor3 y = load_coo(cfg.y_path);
    for (auto& e : y.entries) e.value = cp.std_y.transform(e.value);
    SplitSpec y_split = split_spec;
    y_split.seed = split_spec.seed + 1;
    const Split ys = split(y, y_split);
    const std::vector<Sample> y_test = to_samples(ys.test, TensorTag::Y);
    const auto& model = std::get<CoupledModel>(cp.model);
    const MetricsReport r = evaluate(model, TensorTag::Y, y_test, cp.std_y);
    metrics += metrics_row("y", model_label(model.spec, true), model.spec.rank, r);
    std::printf("y test: rmse %.6g mae %.6g mape %.4g%% (n %lld)\n", r.rmse,
                r.mae, r.mape, static_cast<long long>(r.n_total));
  }

  ensure_dir(cfg.out_dir);
  write_file(join_path(cfg.out_dir, "metrics.csv"), metrics);
  return 0;
}

// ---------------------------------------------------------------------------
// impute

namespace {

struct Query {
  TensorTag tag;
  Triple cell;
};

std::vector<Query> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Query> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string first;
    ls >> first;
    Query q;
    long long i, j, k;
    if (first == "x" || first == "y") {
      q.tag = first == "x" ? TensorTag::X : TensorTag::Y;
      if (!(ls >> i >> j >> k))
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": expected 'x|y i j k'");
    } else {
      q.tag = TensorTag::X;
      try {
        i = to_int(first, "query index");
      } catch (const ConfigError&) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": expected 'x|y i j k' or 'i j k'");
      }
      if (!(ls >> j >> k))
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": expected 'i j k'");
    }
    std::string extra;
    if (ls >> extra)
      throw ParseError(path + ":" + std::to_string(line_no) + ": trailing tokens");
    q.cell = {static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
              static_cast<std::int32_t>(k)};
    out.push_back(q);
  }
  if (out.empty()) throw ParseError(path + ": no queries");
  return out;
}

}  // namespace

int run_impute(const RunConfig& cfg) {
  if (cfg.checkpoint_path.empty()) throw ConfigError("impute needs --checkpoint");
  if (cfg.queries_path.empty()) throw ConfigError("impute needs --queries <file>");
  const Checkpoint cp = load_checkpoint(cfg.checkpoint_path);
  const std::vector<Query> queries = load_queries(cfg.queries_path);

  std::ostringstream out;
  out << "tensor,i,j,k,value\n";
  for (const Query& q : queries) {
    if (q.tag == TensorTag::Y && !cp.coupled())
      throw ConfigError("checkpoint has no second tensor; query asks for y");
    const Standardizer& st = q.tag == TensorTag::X ? cp.std_x : cp.std_y;
    const std::array<Triple, 1> one{q.cell};
    const double v = std::visit(
        [&](const auto& model) { return impute(model, q.tag, one, st)[0]; },
        cp.model);
    out << (q.tag == TensorTag::X ? 'x' : 'y') << ',' << q.cell.i << ','
        << q.cell.j << ',' << q.cell.k << ',' << fmt17(v) << '\n';
  }

  ensure_dir(cfg.out_dir);
  const std::string path = join_path(cfg.out_dir, "predictions.csv");
  write_file(path, out.str());
  std::printf("wrote %zu predictions to %s\n", queries.size(), path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// export-embeddings

namespace {

std::string embeddings_csv(const EmbeddingNetwork& net) {
  const Eigen::MatrixXd emb = net.forward_all();
  std::ostringstream out;
  out << "entity";
  for (Eigen::Index c = 0; c < emb.cols(); ++c) out << ",c" << c;
  out << '\n';
  for (Eigen::Index r = 0; r < emb.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < emb.cols(); ++c) out << ',' << fmt17(emb(r, c));
    out << '\n';
  }
  return out.str();
}

}  // namespace

int run_export(const RunConfig& cfg) {
  if (cfg.checkpoint_path.empty())
    throw ConfigError("export-embeddings needs --checkpoint");
  const Checkpoint cp = load_checkpoint(cfg.checkpoint_path);
  ensure_dir(cfg.out_dir);

  int files = 0;
  auto dump = [&](const char* name, const EmbeddingNetwork& net) {
    write_file(join_path(cfg.out_dir, std::string("embeddings_") + name + ".csv"),
               embeddings_csv(net));
    ++files;
  };
  if (const auto* single = std::get_if<SingleModel>(&cp.model)) {
    dump("u", single->u);
    dump("v", single->v);
    dump("t", single->t);
  } else {
    const auto& coupled = std::get<CoupledModel>(cp.model);
    dump("u", coupled.u);
    dump("v", coupled.v);
    dump("t", coupled.t);
    dump("w", coupled.w);
  }
  std::printf("wrote %d embedding tables to %s\n", files, cfg.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

int effective_jobs(int requested) {
  int jobs = std::max(1, requested);
  if (const char* env = std::getenv("MLCTR_THREADS")) {
    try {
      const int cap = static_cast<int>(to_int(env, "MLCTR_THREADS"));
      if (cap > 0) jobs = std::min(jobs, cap);
    } catch (const ConfigError&) {
      throw ConfigError(std::string("MLCTR_THREADS: bad integer '") + env + "'");
    }
  }
  return jobs;
}

namespace {

struct SweepCell {
  std::string variant;
  int rank = 0;
  double sparsity = 0;
  std::string sparsity_token;
};

struct SweepRow {
  bool ok = false;
  MetricsReport metrics;
  int epochs = 0;
  double seconds = 0;
  std::string error;
};

SweepRow run_sweep_cell(const RunConfig& cfg, const SweepCell& cell,
                        const SparseTensor3& x_raw, const SparseTensor3* y_raw) {
  SweepRow row;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    RunConfig local = cfg;
    local.rank = cell.rank;
    if (cell.variant == "cp") {
      local.layers = 0;
      local.readout = "dot";
    } else if (cell.variant == "mlctr") {
      local.readout = "dot";
    } else if (cell.variant == "mlctr-mlp") {
      local.readout = "mlp";
    } else if (cell.variant != "coupled") {
      throw ConfigError("unknown sweep variant '" + cell.variant + "'");
    }
    const ModelSpec mspec = make_model_spec(local);
    const TrainConfig tcfg = make_train_config(local);
    const SplitSpec split_spec = make_split_spec(local);

    const SparseTensor3 x_masked = mask(x_raw, cell.sparsity, cfg.seed);
    const PreparedTensor x = prepare(x_masked, split_spec);
    std::vector<Sample> train_stream = to_samples(x.parts.train, TensorTag::X);
    std::vector<Sample> val_stream = to_samples(x.parts.val, TensorTag::X);
    const std::vector<Sample> x_test = to_samples(x.parts.test, TensorTag::X);

    if (cell.variant == "coupled") {
      if (y_raw == nullptr)
        throw ConfigError("sweep variant 'coupled' needs --y <file>");
      const SparseTensor3 y_masked = mask(*y_raw, cfg.y_sparsity, cfg.seed + 1);
      SplitSpec y_split = split_spec;
      y_split.seed = split_spec.seed + 1;
      const PreparedTensor y = prepare(y_masked, y_split);
      for (const Sample& s : to_samples(y.parts.train, TensorTag::Y))
        train_stream.push_back(s);
      for (const Sample& s : to_samples(y.parts.val, TensorTag::Y))
        val_stream.push_back(s);
      const CoupledModel model = make_coupled_model(
          {x.dims[0], x.dims[1], x.dims[2], y.dims[2]}, mspec);
      const auto res = train(model, std::move(train_stream), val_stream, tcfg);
      row.metrics = evaluate(res.best, TensorTag::X, x_test, x.st);
      row.epochs = static_cast<int>(res.history.size());
    } else {
      const SingleModel model = make_single_model(x.dims, mspec);
      const auto res = train(model, std::move(train_stream), val_stream, tcfg);
      row.metrics = evaluate(res.best, TensorTag::X, x_test, x.st);
      row.epochs = static_cast<int>(res.history.size());
    }
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.seconds =
      cfg.deterministic
          ? 0.0
          : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
  return row;
}

}  // namespace

int run_sweep(const RunConfig& cfg) {
  if (cfg.x_path.empty()) throw ConfigError("sweep needs --x <file>");
  const std::vector<std::string> variants = split_csv(cfg.variants);
  const std::vector<int> ranks = parse_int_list(cfg.ranks, "--ranks");
  const std::vector<std::string> sparsity_tokens = split_csv(cfg.sparsities);
  if (variants.empty() || sparsity_tokens.empty())
    throw ConfigError("sweep needs non-empty variants and sparsities");
  for (const std::string& v : variants) {
    if (v != "cp" && v != "mlctr" && v != "mlctr-mlp" && v != "coupled")
      throw ConfigError("unknown sweep variant '" + v + "'");
    if (v == "coupled" && cfg.y_path.empty())
      throw ConfigError("sweep variant 'coupled' needs --y <file>");
  }

  const SparseTensor3 x_raw = load_coo(cfg.x_path);
  std::printf("x: %s %s\n", cfg.x_path.c_str(), describe(x_raw).c_str());
  SparseTensor3 y_store;
  const SparseTensor3* y_raw = nullptr;
  if (!cfg.y_path.empty()) {
    y_store = load_coo(cfg.y_path);
    if (y_store.dims[0] != x_raw.dims[0] || y_store.dims[1] != x_raw.dims[1])
      throw ConfigError("coupled tensors must share modes 1 and 2");
    std::printf("y: %s %s\n", cfg.y_path.c_str(), describe(y_store).c_str());
    y_raw = &y_store;
  }

  std::vector<SweepCell> cells;
  for (const std::string& variant : variants)
    for (const int rank : ranks)
      for (const std::string& tok : sparsity_tokens)
        cells.push_back({variant, rank, to_double(tok, "--sparsities"), tok});

  const int jobs = effective_jobs(cfg.jobs);
  std::printf("sweep: %zu cells, %d worker%s\n", cells.size(), jobs,
              jobs == 1 ? "" : "s");

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t q = next.fetch_add(1);
      if (q >= cells.size()) break;
      rows[q] = run_sweep_cell(cfg, cells[q], x_raw, y_raw);
      const std::lock_guard<std::mutex> lock(io_mutex);
      const SweepCell& c = cells[q];
      if (rows[q].ok)
        std::printf("  %s rank %d sparsity %s: rmse %.6g (%d epochs)\n",
                    c.variant.c_str(), c.rank, c.sparsity_token.c_str(),
                    rows[q].metrics.rmse, rows[q].epochs);
      else
        std::printf("  %s rank %d sparsity %s: FAILED (%s)\n", c.variant.c_str(),
                    c.rank, c.sparsity_token.c_str(), rows[q].error.c_str());
    }
  };
  std::vector<std::thread> pool;
  for (int q = 1; q < jobs; ++q) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  std::ostringstream out;
  out << "variant,rank,sparsity,status,rmse,mae,mape,epochs,seconds\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t q = 0; q < cells.size(); ++q) {
    const SweepCell& c = cells[q];
    const SweepRow& r = rows[q];
    out << c.variant << ',' << c.rank << ',' << c.sparsity_token << ','
        << (r.ok ? "ok" : "failed") << ',' << fmt17(r.ok ? r.metrics.rmse : nan)
        << ',' << fmt17(r.ok ? r.metrics.mae : nan) << ','
        << fmt17(r.ok ? r.metrics.mape : nan) << ',' << r.epochs << ','
        << fmt17(r.seconds) << '\n';
  }
  ensure_dir(cfg.out_dir);
  write_file(join_path(cfg.out_dir, "results.csv"), out.str());
  write_file(join_path(cfg.out_dir, "manifest.txt"), manifest_text(cfg));
  std::printf("artifacts: %s/{results.csv,manifest.txt}\n", cfg.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// synth

int run_synth(const RunConfig& cfg) {
  const std::vector<std::int64_t> dims = parse_dims_list(cfg.dims, "--dims");
  if (dims.size() != (cfg.coupled ? 4u : 3u))
    throw ConfigError(cfg.coupled ? "--coupled needs --dims d1,d2,d3,d4"
                                  : "--dims needs d1,d2,d3");

  SynthSpec spec;
  spec.dims = {dims[0], dims[1], dims[2], cfg.coupled ? dims[3] : 0};
  spec.true_rank = cfg.true_rank;
  spec.noise_std = cfg.noise;
  if (cfg.nonlinearity == "none")
    spec.nonlinearity = SynthNonlinearity::none;
  else if (cfg.nonlinearity == "tanh")
    spec.nonlinearity = SynthNonlinearity::tanh_warp;
  else
    throw ConfigError("unknown nonlinearity '" + cfg.nonlinearity + "'");
  spec.coupled = cfg.coupled;
  spec.seed = cfg.seed;

  const SynthData data = generate(spec);
  ensure_dir(cfg.out_dir);

  std::vector<std::string> written;
  auto emit = [&](const SparseTensor3& t, const std::string& name) {
    save_coo(t, join_path(cfg.out_dir, name));
    written.push_back(name);
  };
  emit(data.x, "x_full.coo");
  if (spec.coupled) emit(data.y, "y_full.coo");

  if (!trim(cfg.sparsities).empty()) {
    for (const std::string& tok : split_csv(cfg.sparsities)) {
      const double s = to_double(tok, "--sparsities");
      emit(mask(data.x, s, cfg.seed), "x_s" + tok + ".coo");
      if (spec.coupled) emit(mask(data.y, s, cfg.seed + 1), "y_s" + tok + ".coo");
    }
  }

  std::ostringstream meta;
  meta << "dims=" << cfg.dims << '\n'
       << "true_rank=" << spec.true_rank << '\n'
       << "noise=" << fmt17(spec.noise_std) << '\n'
       << "nonlinearity=" << cfg.nonlinearity << '\n'
       << "coupled=" << (spec.coupled ? 1 : 0) << '\n'
       << "seed=" << spec.seed << '\n'
       << "checksum_u=" << matrix_checksum(data.u) << '\n'
       << "checksum_v=" << matrix_checksum(data.v) << '\n'
       << "checksum_t=" << matrix_checksum(data.t) << '\n';
  if (spec.coupled) meta << "checksum_w=" << matrix_checksum(data.w) << '\n';
  for (const std::string& name : written) meta << "file=" << name << '\n';
  write_file(join_path(cfg.out_dir, "synth_meta.txt"), meta.str());
  write_file(join_path(cfg.out_dir, "manifest.txt"), manifest_text(cfg));

  std::printf("wrote %zu tensors + synth_meta.txt to %s\n", written.size(),
              cfg.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

int run_command(const RunConfig& cfg) {
  if (cfg.command == "train") return run_train(cfg);
  if (cfg.command == "evaluate") return run_evaluate(cfg);
  if (cfg.command == "impute") return run_impute(cfg);
  if (cfg.command == "export-embeddings") return run_export(cfg);
  if (cfg.command == "sweep") return run_sweep(cfg);
  if (cfg.command == "synth") return run_synth(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace mlctr
