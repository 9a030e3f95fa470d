// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the library exclusively through the
// C interface in rotunroll.h.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rotunroll.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

struct DatasetDeleter {
  void operator()(ru_dataset* d) const { ru_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(ru_model* m) const { ru_model_free(m); }
};
using DatasetPtr = std::unique_ptr<ru_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<ru_model, ModelDeleter>;

[[noreturn]] void fail(int code, const std::string& context) {
  std::fprintf(stderr, "error: %s: %s\n", context.c_str(), ru_last_error());
  std::exit(code);
}

int exit_code_for(ru_status s, int default_code) {
  switch (s) {
    case RU_ERR_INVALID_ARGUMENT:
    case RU_ERR_USAGE:
      return kExitUsage;
    default:
      return default_code;
  }
}

std::string data_dir_default() {
  const char* env = std::getenv("ROTUNROLL_DATA_DIR");
  return env ? env : ".";
}

// Loads the named dataset split from data_dir. MNIST/rot-MNIST accept
// either the native container (<name>-<split>.ds) or raw IDX pairs.
DatasetPtr load_split(const std::string& dataset, const std::string& data_dir,
                      const std::string& split) {
  ru_dataset* ds = nullptr;
  if (dataset == "cifar10") {
    std::vector<std::string> names;
    if (split == "train")
      names = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
               "data_batch_4.bin", "data_batch_5.bin"};
    else
      names = {"test_batch.bin"};
    std::vector<std::string> paths;
    std::vector<const char*> cpaths;
    for (const auto& n : names) paths.push_back(data_dir + "/cifar-10-batches-bin/" + n);
    for (const auto& p : paths) cpaths.push_back(p.c_str());
    const ru_status s = ru_dataset_load_cifar10(cpaths.data(), cpaths.size(), &ds);
    if (s != RU_OK) fail(exit_code_for(s, kExitData), "loading " + dataset + " " + split);
    return DatasetPtr(ds);
  }

  const std::string container = data_dir + "/" + dataset + "-" + split + ".ds";
  if (ru_dataset_load(container.c_str(), &ds) == RU_OK) return DatasetPtr(ds);

  const std::string stem =
      data_dir + "/" + (split == "train" ? "train" : "t10k");
  const ru_status s = ru_dataset_load_idx((stem + "-images-idx3-ubyte").c_str(),
                                          (stem + "-labels-idx1-ubyte").c_str(), &ds);
  if (s != RU_OK)
    fail(exit_code_for(s, kExitData),
         "loading " + dataset + " " + split + " (tried " + container + " and " + stem +
             "-*-ubyte)");
  DatasetPtr base(ds);
  if (dataset != "rot-mnist") return base;

  // rot-MNIST from raw MNIST: deterministic per-split rotation seeds.
  ru_dataset* rotated = nullptr;
  const uint64_t seed = split == "train" ? 1001 : 1002;
  const ru_status rs = ru_dataset_rotate(base.get(), seed, &rotated);
  if (rs != RU_OK) fail(exit_code_for(rs, kExitData), "rotating " + split);
  return DatasetPtr(rotated);
}

DatasetPtr maybe_take(DatasetPtr ds, std::size_t limit, const char* what) {
  if (limit == 0 || limit >= ru_dataset_size(ds.get())) return ds;
  ru_dataset* sub = nullptr;
  const ru_status s = ru_dataset_take(ds.get(), limit, &sub);
  if (s != RU_OK) fail(exit_code_for(s, kExitData), std::string("subsetting ") + what);
  return DatasetPtr(sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-tied unrolled sparse-coding networks"};
  app.require_subcommand(1);

  std::string model = "r90";
  std::string dataset = "mnist";
  std::string eval_dataset;
  std::string data_dir = data_dir_default();
  std::string out_path;
  std::string checkpoint_path;
  std::string metrics_path;
  std::string config_path;
  int epochs = 30;
  int batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double target_acc = 0.0;
  std::size_t limit = 0;
  int layer = 0;

  auto add_data_dir = [&](CLI::App* cmd) {
    cmd->add_option("--data-dir", data_dir,
                    "Dataset directory (default: $ROTUNROLL_DATA_DIR or .)");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--model", model,
                        "baseline|r90|r60|dense-baseline|dense-r90|dense-r60");
  train_cmd->add_option("--dataset", dataset, "mnist|rot-mnist|cifar10");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--batch-size", batch_size);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--target-acc", target_acc, "Stop once test accuracy reaches this");
  train_cmd->add_option("--limit", limit, "Use only the first N training examples");
  train_cmd->add_option("--out", out_path, "Checkpoint output path");
  train_cmd->add_option("--metrics", metrics_path, "Per-epoch CSV output path");
  train_cmd->set_config("--config", "", "Config file (key = value; flags override)");
  add_data_dir(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--dataset", dataset, "mnist|rot-mnist|cifar10");
  eval_cmd->add_option("--limit", limit, "Use only the first N examples");
  add_data_dir(eval_cmd);

  CLI::App* gen_cmd = app.add_subcommand(
      "gen-rotmnist", "Write a randomly rotated copy of an MNIST split");
  gen_cmd->add_option("--split", dataset, "train|test")->required();
  gen_cmd->add_option("--seed", seed);
  gen_cmd->add_option("--out", out_path, "Output container path")->required();
  add_data_dir(gen_cmd);

  CLI::App* count_cmd = app.add_subcommand("param-count", "Print parameter counts");
  count_cmd->add_option("--model", model);
  count_cmd->add_option("--dataset", dataset);

  CLI::App* export_cmd =
      app.add_subcommand("export-filters", "Write a layer's filters as a PGM/PPM grid");
  export_cmd->add_option("--checkpoint", checkpoint_path)->required();
  export_cmd->add_option("--layer", layer);
  export_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (train_cmd->parsed()) {
    DatasetPtr train_data =
        maybe_take(load_split(dataset, data_dir, "train"), limit, "train split");
    DatasetPtr test_data = load_split(dataset, data_dir, "test");

    ru_train_options opts{};
    opts.model = model.c_str();
    opts.dataset = dataset.c_str();
    opts.epochs = epochs;
    opts.batch_size = batch_size;
    opts.learning_rate = lr;
    opts.seed = seed;
    opts.optimizer = "adam";
    opts.target_test_acc = target_acc;
    opts.metrics_csv_path = metrics_path.empty() ? nullptr : metrics_path.c_str();
    opts.verbose = 1;

    ru_model* raw = nullptr;
    const ru_status s = ru_model_train(&opts, train_data.get(), test_data.get(), &raw);
    if (s != RU_OK) fail(exit_code_for(s, 1), "training");
    ModelPtr trained(raw);
    if (!out_path.empty()) {
      const ru_status ss = ru_model_save(trained.get(), out_path.c_str());
      if (ss != RU_OK) fail(exit_code_for(ss, kExitCheckpoint), "saving checkpoint");
    }
    return kExitOk;
  }

  if (eval_cmd->parsed()) {
    ru_model* raw = nullptr;
    const ru_status s = ru_model_load(checkpoint_path.c_str(), &raw);
    if (s != RU_OK) fail(exit_code_for(s, kExitCheckpoint), "loading checkpoint");
    ModelPtr loaded(raw);
    DatasetPtr data = maybe_take(load_split(dataset, data_dir, "test"), limit, "eval split");
    double acc = 0, loss = 0, sparsity = 0;
    const ru_status es = ru_model_evaluate(loaded.get(), data.get(), &acc, &loss, &sparsity);
    if (es != RU_OK) fail(exit_code_for(es, 1), "evaluating");
    std::printf("accuracy %.4f\nmean_loss %.4f\nsparsity %.4f\n", acc, loss, sparsity);
    return kExitOk;
  }

  if (gen_cmd->parsed()) {
    const std::string split = dataset;  // --split reuses the slot
    if (split != "train" && split != "test") {
      std::fprintf(stderr, "error: --split must be train or test\n");
      return kExitUsage;
    }
    DatasetPtr rotated = load_split("rot-mnist", data_dir, split);
    // load_split already rotates with fixed per-split seeds; honor --seed
    // by re-rotating the raw split when one is given.
    if (seed != 0) {
      DatasetPtr base = load_split("mnist", data_dir, split);
      ru_dataset* re = nullptr;
      const ru_status rs = ru_dataset_rotate(base.get(), seed, &re);
      if (rs != RU_OK) fail(exit_code_for(rs, kExitData), "rotating");
      rotated.reset(re);
    }
    const ru_status ws = ru_dataset_save(rotated.get(), out_path.c_str());
    if (ws != RU_OK) fail(exit_code_for(ws, 1), "writing " + out_path);
    std::printf("wrote %zu examples to %s\n", ru_dataset_size(rotated.get()),
                out_path.c_str());
    return kExitOk;
  }

  if (count_cmd->parsed()) {
    size_t filters = 0, bn = 0, head = 0, total = 0;
    const ru_status s =
        ru_param_counts_for(model.c_str(), dataset.c_str(), &filters, &bn, &head, &total);
    if (s != RU_OK) fail(exit_code_for(s, kExitUsage), "counting parameters");
    std::printf("model %s dataset %s\nfilters %zu\nbatchnorm %zu\nhead %zu\ntotal %zu\n",
                model.c_str(), dataset.c_str(), filters, bn, head, total);
    return kExitOk;
  }

  if (export_cmd->parsed()) {
    ru_model* raw = nullptr;
    const ru_status s = ru_model_load(checkpoint_path.c_str(), &raw);
    if (s != RU_OK) fail(exit_code_for(s, kExitCheckpoint), "loading checkpoint");
    ModelPtr loaded(raw);
    const ru_status es = ru_model_export_filters(loaded.get(), layer, out_path.c_str());
    if (es != RU_OK) fail(exit_code_for(es, 1), "exporting filters");
    std::printf("wrote %s\n", out_path.c_str());
    return kExitOk;
  }

  return kExitUsage;
}
