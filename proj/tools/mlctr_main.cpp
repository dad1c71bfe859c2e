#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "mlctr/cli.hpp"
#include "mlctr/errors.hpp"

namespace {

// --config is applied before flag parsing so explicit flags win.  The file
// uses the manifest key=value format, so a previous run's manifest.txt
// reproduces that run.
void apply_config_args(mlctr::RunConfig& cfg, int argc, char** argv) {
  for (int q = 1; q < argc; ++q) {
    const std::string arg = argv[q];
    if (arg == "--config" && q + 1 < argc)
      mlctr::apply_config_file(cfg, argv[++q]);
    else if (arg.rfind("--config=", 0) == 0)
      mlctr::apply_config_file(cfg, arg.substr(9));
  }
}

void add_model_flags(CLI::App* sub, mlctr::RunConfig& cfg) {
  sub->add_option("--rank", cfg.rank, "embedding rank r");
  sub->add_option("--layers", cfg.layers, "residual layers per network (0 = flat)");
  sub->add_option("--hidden", cfg.hidden, "inner width of each residual layer");
  sub->add_option("--activation", cfg.activation,
                  "relu | elu | elu:<alpha> | sigmoid | identity");
  sub->add_option("--readout", cfg.readout, "dot | mlp");
  sub->add_option("--mlp-hidden", cfg.mlp_hidden,
                  "mlp readout width (0 = 2*rank)");
  sub->add_option("--lambda", cfg.lambda, "weight of the second tensor's loss");
  sub->add_flag("--freeze-base", cfg.freeze_base,
                "zero the base tables and keep them fixed");
}

void add_train_flags(CLI::App* sub, mlctr::RunConfig& cfg) {
  sub->add_option("--lr", cfg.lr, "learning rate");
  sub->add_option("--batch-size", cfg.batch_size, "mini-batch size");
  sub->add_option("--max-epochs", cfg.max_epochs, "epoch cap");
  sub->add_option("--patience", cfg.patience,
                  "epochs without validation improvement before stopping");
  sub->add_option("--split", cfg.split, "train,val,test fractions");
  sub->add_flag("--deterministic", cfg.deterministic,
                "zero wall-clock fields so reruns are byte-identical");
}

void add_io_flags(CLI::App* sub, mlctr::RunConfig& cfg) {
  sub->add_option("--seed", cfg.seed, "seed for init, splits and shuffles");
  sub->add_option("--out", cfg.out_dir, "output directory");
  std::string ignored;
  sub->add_option("--config", ignored,
                  "key=value file applied before flags (e.g. a manifest.txt)");
}

}  // namespace

int main(int argc, char** argv) {
  mlctr::RunConfig cfg;

  CLI::App app{"coupled sparse tensor completion with layered embeddings"};
  app.require_subcommand(1);

  CLI::App* train = app.add_subcommand("train", "fit a model on one or two tensors");
  train->add_option("--x", cfg.x_path, "main tensor (COO text)");
  train->add_option("--y", cfg.y_path, "side tensor sharing modes 1 and 2");
  add_model_flags(train, cfg);
  add_train_flags(train, cfg);
  add_io_flags(train, cfg);

  CLI::App* evaluate = app.add_subcommand("evaluate",
                                          "score a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint file");
  evaluate->add_option("--x", cfg.x_path, "main tensor (COO text)");
  evaluate->add_option("--y", cfg.y_path, "side tensor (coupled checkpoints)");
  evaluate->add_option("--split", cfg.split, "train,val,test fractions");
  add_io_flags(evaluate, cfg);

  CLI::App* impute = app.add_subcommand("impute", "predict unobserved cells");
  impute->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint file");
  impute->add_option("--queries", cfg.queries_path,
                     "file of cells: 'x|y i j k' or 'i j k' per line");
  add_io_flags(impute, cfg);

  CLI::App* exp = app.add_subcommand("export-embeddings",
                                     "dump output embeddings as CSV");
  exp->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint file");
  add_io_flags(exp, cfg);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "grid over variants, ranks and sparsity levels");
  sweep->add_option("--x", cfg.x_path, "fully observed tensor to mask");
  sweep->add_option("--y", cfg.y_path, "side tensor for the coupled variant");
  sweep->add_option("--ranks", cfg.ranks, "comma list of ranks");
  sweep->add_option("--sparsities", cfg.sparsities, "comma list of sparsities");
  sweep->add_option("--variants", cfg.variants,
                    "comma list of cp | mlctr | mlctr-mlp | coupled");
  sweep->add_option("--y-sparsity", cfg.y_sparsity,
                    "mask level for the side tensor");
  sweep->add_option("--jobs", cfg.jobs,
                    "parallel workers (capped by MLCTR_THREADS)");
  add_model_flags(sweep, cfg);
  add_train_flags(sweep, cfg);
  add_io_flags(sweep, cfg);

  CLI::App* synth = app.add_subcommand("synth",
                                       "generate low-rank ground-truth tensors");
  synth->add_option("--dims", cfg.dims, "d1,d2,d3 or d1,d2,d3,d4 with --coupled");
  synth->add_option("--true-rank", cfg.true_rank, "rank of the ground truth");
  synth->add_option("--noise", cfg.noise, "additive Gaussian noise level");
  synth->add_option("--nonlinearity", cfg.nonlinearity, "none | tanh");
  synth->add_flag("--coupled", cfg.coupled, "also generate a side tensor");
  synth->add_option("--sparsities", cfg.sparsities,
                    "comma list of masked copies to write");
  add_io_flags(synth, cfg);

  try {
    apply_config_args(cfg, argc, argv);
  } catch (const mlctr::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const mlctr::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();
    return mlctr::run_command(cfg);
  } catch (const mlctr::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const mlctr::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const mlctr::DivergenceError& e) {
    std::fprintf(stderr, "error: training diverged: %s\n", e.what());
    return 4;
  } catch (const mlctr::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const mlctr::BoundsError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const mlctr::DuplicateError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
