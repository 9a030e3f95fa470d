// SPDX-License-Identifier: Apache-2.0
#include "rotunroll.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rotunroll/data.hpp"
#include "rotunroll/errors.hpp"
#include "rotunroll/train.hpp"

extern "C" void openblas_set_num_threads(int);

namespace {

using namespace rotunroll;

thread_local std::string g_last_error;

// GEMM determinism: identical results regardless of machine thread count.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
} const g_blas_init;

template <typename Fn>
ru_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const ParseError& e) {
    g_last_error = e.what();
    return RU_ERR_PARSE;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return RU_ERR_IO;
  } catch (const DimensionError& e) {
    g_last_error = e.what();
    return RU_ERR_DIMENSION;
  } catch (const TrainingDiverged& e) {
    g_last_error = e.what();
    return RU_ERR_DIVERGED;
  } catch (const UsageError& e) {
    g_last_error = e.what();
    return RU_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RU_ERR_INTERNAL;
  }
}

ru_status invalid(const char* msg) {
  g_last_error = msg;
  return RU_ERR_INVALID_ARGUMENT;
}

// Name-string lookups report RU_ERR_INVALID_ARGUMENT, matching the header's
// contract for bad enum strings.
template <typename Parse>
bool parse_name(Parse&& parse, const char* name, decltype(parse(name))& out) {
  try {
    out = parse(name);
    return true;
  } catch (const rotunroll::UsageError& e) {
    g_last_error = e.what();
    return false;
  }
}

}  // namespace

struct ru_dataset {
  rotunroll::Dataset data;
};

struct ru_model {
  rotunroll::TrainConfig config;
  rotunroll::UnrolledNetwork net;
  int epochs_completed = 0;
};

extern "C" {

const char* ru_last_error(void) { return g_last_error.c_str(); }

/* ----------------------------------------------------------- datasets */

ru_status ru_dataset_load_idx(const char* images_path, const char* labels_path,
                              ru_dataset** out) {
  if (!images_path || !labels_path || !out) return invalid("NULL argument");
  return guarded([&] {
    *out = new ru_dataset{load_mnist_idx(images_path, labels_path)};
    return RU_OK;
  });
}

ru_status ru_dataset_load_cifar10(const char* const* batch_paths, size_t num_batches,
                                  ru_dataset** out) {
  if (!batch_paths || !out || num_batches == 0) return invalid("NULL argument");
  return guarded([&] {
    std::vector<std::string> paths;
    for (size_t i = 0; i < num_batches; ++i) {
      if (!batch_paths[i]) throw UsageError("NULL batch path");
      paths.emplace_back(batch_paths[i]);
    }
    *out = new ru_dataset{load_cifar10(paths)};
    return RU_OK;
  });
}

ru_status ru_dataset_load(const char* path, ru_dataset** out) {
  if (!path || !out) return invalid("NULL argument");
  return guarded([&] {
    *out = new ru_dataset{load_dataset_container(path)};
    return RU_OK;
  });
}

ru_status ru_dataset_save(const ru_dataset* ds, const char* path) {
  if (!ds || !path) return invalid("NULL argument");
  return guarded([&] {
    save_dataset(ds->data, path);
    return RU_OK;
  });
}

ru_status ru_dataset_rotate(const ru_dataset* ds, uint64_t seed, ru_dataset** out) {
  if (!ds || !out) return invalid("NULL argument");
  return guarded([&] {
    *out = new ru_dataset{generate_rot_mnist(ds->data, seed)};
    return RU_OK;
  });
}

ru_status ru_dataset_take(const ru_dataset* ds, size_t n, ru_dataset** out) {
  if (!ds || !out) return invalid("NULL argument");
  return guarded([&] {
    *out = new ru_dataset{take(ds->data, std::min(n, ds->data.size()))};
    return RU_OK;
  });
}

size_t ru_dataset_size(const ru_dataset* ds) { return ds ? ds->data.size() : 0; }

void ru_dataset_free(ru_dataset* ds) { delete ds; }

/* ------------------------------------------------------------- models */

ru_status ru_model_train(const ru_train_options* opts, const ru_dataset* train_data,
                         const ru_dataset* test_data, ru_model** out) {
  if (!opts || !train_data || !test_data || !out) return invalid("NULL argument");
  if (!opts->model || !opts->dataset) return invalid("model and dataset are required");
  TrainConfig cfg;
  if (!parse_name(parse_model, opts->model, cfg.model)) return RU_ERR_INVALID_ARGUMENT;
  if (!parse_name(parse_dataset, opts->dataset, cfg.dataset)) return RU_ERR_INVALID_ARGUMENT;
  if (opts->optimizer && !parse_name(parse_optimizer, opts->optimizer, cfg.optimizer))
    return RU_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    cfg.epochs = opts->epochs;
    cfg.batch_size = opts->batch_size;
    cfg.learning_rate = opts->learning_rate;
    cfg.seed = opts->seed;
    if (opts->target_test_acc > 0.0) cfg.target_test_acc = opts->target_test_acc;

    const bool verbose = opts->verbose != 0;
    TrainResult result =
        train(cfg, train_data->data, test_data->data, [&](const EpochMetrics& em) {
          if (verbose)
            std::fprintf(stderr,
                         "epoch %d: train_loss=%.4f train_acc=%.4f test_acc=%.4f "
                         "sparsity=%.3f stability=%.3f\n",
                         em.epoch, em.train_loss, em.train_acc, em.test_acc, em.sparsity,
                         em.stability_margin);
        });
    if (opts->metrics_csv_path) write_metrics_csv(result.log, opts->metrics_csv_path);

    auto* model = new ru_model;
    model->config = cfg;
    model->net = std::move(result.net);
    model->epochs_completed = static_cast<int>(result.log.size());
    *out = model;
    return RU_OK;
  });
}

ru_status ru_model_evaluate(ru_model* model, const ru_dataset* data, double* accuracy,
                            double* mean_loss, double* mean_sparsity) {
  if (!model || !data) return invalid("NULL argument");
  return guarded([&] {
    const EvalResult ev = evaluate(model->net, data->data);
    if (accuracy) *accuracy = ev.accuracy;
    if (mean_loss) *mean_loss = ev.mean_loss;
    if (mean_sparsity) *mean_sparsity = ev.mean_sparsity;
    return RU_OK;
  });
}

ru_status ru_model_save(const ru_model* model, const char* path) {
  if (!model || !path) return invalid("NULL argument");
  return guarded([&] {
    Checkpoint ckpt;
    ckpt.config = model->config;
    ckpt.net = model->net;
    ckpt.epoch = model->epochs_completed;
    save_checkpoint(ckpt, path);
    return RU_OK;
  });
}

ru_status ru_model_load(const char* path, ru_model** out) {
  if (!path || !out) return invalid("NULL argument");
  return guarded([&] {
    Checkpoint ckpt = load_checkpoint(path);
    auto* model = new ru_model;
    model->config = ckpt.config;
    model->net = std::move(ckpt.net);
    model->epochs_completed = ckpt.epoch;
    *out = model;
    return RU_OK;
  });
}

ru_status ru_model_param_counts(const ru_model* model, size_t* filters, size_t* batchnorm,
                                size_t* head, size_t* total) {
  if (!model) return invalid("NULL argument");
  return guarded([&] {
    const ParamCounts c = model->net.count_parameters();
    if (filters) *filters = c.filters;
    if (batchnorm) *batchnorm = c.batchnorm;
    if (head) *head = c.head;
    if (total) *total = c.total;
    return RU_OK;
  });
}

ru_status ru_param_counts_for(const char* model, const char* dataset, size_t* filters,
                              size_t* batchnorm, size_t* head, size_t* total) {
  if (!model || !dataset) return invalid("NULL argument");
  ModelKind mk;
  DatasetKind dk;
  if (!parse_name(parse_model, model, mk)) return RU_ERR_INVALID_ARGUMENT;
  if (!parse_name(parse_dataset, dataset, dk)) return RU_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    const NetworkConfig cfg = network_config_for(mk, dk);
    std::mt19937_64 rng(0);
    const ParamCounts c = UnrolledNetwork(cfg, rng).count_parameters();
    if (filters) *filters = c.filters;
    if (batchnorm) *batchnorm = c.batchnorm;
    if (head) *head = c.head;
    if (total) *total = c.total;
    return RU_OK;
  });
}

ru_status ru_model_export_filters(const ru_model* model, int layer, const char* path) {
  if (!model || !path) return invalid("NULL argument");
  return guarded([&] {
    const NetworkConfig& cfg = model->net.config();
    if (layer < 0 || layer >= cfg.solver.num_layers)
      throw UsageError("layer index out of range");
    FilterBank bank = model->net.layer_bank(layer);  // copy; expansion mutates
    const Tensor& filters = bank.expand();           // [m*k, cin, h, w]
    const std::size_t m = cfg.m;
    const std::size_t k = static_cast<std::size_t>(cfg.k);
    const std::size_t cin = filters.dim(1), fh = filters.dim(2), fw = filters.dim(3);
    const std::size_t pad = 1;
    const std::size_t grid_h = m * fh + (m + 1) * pad;
    const std::size_t grid_w = k * fw + (k + 1) * pad;
    const bool color = cin == 3;
    const std::size_t channels = color ? 3 : 1;
    std::vector<unsigned char> canvas(grid_h * grid_w * channels, 0);

    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double* tile = filters.data() + ((i * k + j) * cin) * fh * fw;
        const std::size_t n = cin * fh * fw;
        double lo = tile[0], hi = tile[0];
        for (std::size_t t = 1; t < n; ++t) {
          lo = std::min(lo, tile[t]);
          hi = std::max(hi, tile[t]);
        }
        const std::size_t r0 = pad + i * (fh + pad), c0 = pad + j * (fw + pad);
        for (std::size_t r = 0; r < fh; ++r) {
          for (std::size_t c = 0; c < fw; ++c) {
            for (std::size_t ch = 0; ch < channels; ++ch) {
              // flat filters render as mid-gray instead of dividing by zero
              const double v =
                  hi > lo ? (tile[(ch % cin) * fh * fw + r * fw + c] - lo) / (hi - lo)
                          : 0.5;
              canvas[((r0 + r) * grid_w + (c0 + c)) * channels + ch] =
                  static_cast<unsigned char>(std::lround(v * 255.0));
            }
          }
        }
      }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(std::string("cannot open image for writing: ") + path);
    f << (color ? "P6\n" : "P5\n") << grid_w << ' ' << grid_h << "\n255\n";
    f.write(reinterpret_cast<const char*>(canvas.data()),
            static_cast<std::streamsize>(canvas.size()));
    if (!f) throw IoError(std::string("failed writing image: ") + path);
    return RU_OK;
  });
}

void ru_model_free(ru_model* model) { delete model; }

} /* extern "C" */
