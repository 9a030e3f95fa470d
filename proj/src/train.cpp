// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <malloc.h>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "rotunroll/errors.hpp"

namespace rotunroll {

namespace {

// ---------------------------------------------------------------- enums

template <typename T>
T parse_named(const std::string& name,
              const std::vector<std::pair<std::string, T>>& table,
              const char* what) {
  for (const auto& [key, value] : table)
    if (key == name) return value;
  std::ostringstream msg;
  msg << "unknown " << what << " '" << name << "'; expected one of:";
  for (const auto& [key, value] : table) msg << ' ' << key;
  throw UsageError(msg.str());
}

const std::vector<std::pair<std::string, ModelKind>> kModels = {
    {"baseline", ModelKind::Baseline},
    {"r90", ModelKind::R90},
    {"r60", ModelKind::R60},
    {"dense-baseline", ModelKind::DenseBaseline},
    {"dense-r90", ModelKind::DenseR90},
    {"dense-r60", ModelKind::DenseR60},
};

const std::vector<std::pair<std::string, DatasetKind>> kDatasets = {
    {"mnist", DatasetKind::Mnist},
    {"rot-mnist", DatasetKind::RotMnist},
    {"cifar10", DatasetKind::Cifar10},
};

const std::vector<std::pair<std::string, OptimizerKind>> kOptimizers = {
    {"adam", OptimizerKind::Adam},
    {"sgd", OptimizerKind::SgdMomentum},
};

template <typename T>
std::string name_of(T value, const std::vector<std::pair<std::string, T>>& table) {
  for (const auto& [key, v] : table)
    if (v == value) return key;
  throw UsageError("unnamed enum value");
}

}  // namespace

ModelKind parse_model(const std::string& name) { return parse_named(name, kModels, "model"); }
DatasetKind parse_dataset(const std::string& name) {
  return parse_named(name, kDatasets, "dataset");
}
OptimizerKind parse_optimizer(const std::string& name) {
  return parse_named(name, kOptimizers, "optimizer");
}
std::string to_string(ModelKind m) { return name_of(m, kModels); }
std::string to_string(DatasetKind d) { return name_of(d, kDatasets); }
std::string to_string(OptimizerKind o) { return name_of(o, kOptimizers); }

// ------------------------------------------------------------- geometry

NetworkConfig network_config_for(ModelKind model, DatasetKind dataset) {
  NetworkConfig cfg;
  if (dataset == DatasetKind::Cifar10) {
    cfg.cin = 3;
    cfg.image_h = cfg.image_w = 32;
    cfg.filter_h = cfg.filter_w = 8;
  } else {
    cfg.cin = 1;
    cfg.image_h = cfg.image_w = 28;
    cfg.filter_h = cfg.filter_w = 7;
  }
  switch (model) {
    case ModelKind::Baseline: cfg.m = 60; cfg.k = 1; break;
    case ModelKind::R90: cfg.m = 15; cfg.k = 4; break;
    case ModelKind::R60: cfg.m = 10; cfg.k = 6; break;
    case ModelKind::DenseBaseline: cfg.m = 256; cfg.k = 1; break;
    case ModelKind::DenseR90: cfg.m = 64; cfg.k = 4; break;
    // 256/6 is not an integer; 43 orbits (258 atoms) is the nearest match.
    case ModelKind::DenseR60: cfg.m = 43; cfg.k = 6; break;
  }
  if (model == ModelKind::DenseBaseline || model == ModelKind::DenseR90 ||
      model == ModelKind::DenseR60) {
    cfg.mode = NetMode::Dense;
    cfg.filter_h = cfg.image_h;
    cfg.filter_w = cfg.image_w;
  }
  // Rescaled inputs keep alpha * W^T x above the fixed threshold (see
  // NetworkConfig::input_gain) without flooding it: at byte scale (255)
  // nearly every code entry clears lambda and sparsity collapses, while
  // at 100 the data term sits near the threshold so codes stay sparse.
  cfg.input_gain = 100.0;
  return cfg;
}

// ------------------------------------------------------------ optimizer

namespace {

// Flat view over every learnable tensor in the network, in the same
// order Gradients lays them out.
std::vector<Tensor*> learnable_params(UnrolledNetwork& net) {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < net.num_banks(); ++i) out.push_back(&net.bank(i).mutable_basis());
  for (std::size_t i = 0; i < net.num_bn(); ++i) {
    out.push_back(&net.bn(i).gamma);
    out.push_back(&net.bn(i).beta);
  }
  out.push_back(&net.head().weight);
  out.push_back(&net.head().bias);
  return out;
}

std::vector<const Tensor*> gradient_list(const Gradients& g) {
  std::vector<const Tensor*> out;
  for (const auto& t : g.basis) out.push_back(&t);
  for (std::size_t i = 0; i < g.bn_gamma.size(); ++i) {
    out.push_back(&g.bn_gamma[i]);
    out.push_back(&g.bn_beta[i]);
  }
  out.push_back(&g.head_weight);
  out.push_back(&g.head_bias);
  return out;
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size())
      throw DimensionError("parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const Tensor* g : grads) {
        m_.push_back(Tensor::zeros(g->shape()));
        if (kind_ == OptimizerKind::Adam) v_.push_back(Tensor::zeros(g->shape()));
      }
    }
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = *grads[i];
      if (!p.same_shape(g)) throw DimensionError("gradient shape mismatch");
      if (kind_ == OptimizerKind::Adam) {
        const double bc1 = 1.0 - std::pow(kBeta1, t_);
        const double bc2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t j = 0; j < p.size(); ++j) {
          m_[i][j] = kBeta1 * m_[i][j] + (1.0 - kBeta1) * g[j];
          v_[i][j] = kBeta2 * v_[i][j] + (1.0 - kBeta2) * g[j] * g[j];
          p[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + kEps);
        }
      } else {
        for (std::size_t j = 0; j < p.size(); ++j) {
          m_[i][j] = kMomentum * m_[i][j] + g[j];
          p[j] -= lr_ * m_[i][j];
        }
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  static constexpr double kMomentum = 0.9;

  OptimizerKind kind_;
  double lr_;
  long long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Projects every basis atom back to unit L2 norm. Keeps the fixed
// threshold meaningful throughout training (unconstrained atoms grow
// until almost nothing is thresholded away) and caps the step size
// condition alpha * sigma_max(W^T W).
void renormalize_basis(UnrolledNetwork& net) {
  for (std::size_t b = 0; b < net.num_banks(); ++b) {
    Tensor& basis = net.bank(b).mutable_basis();
    const std::size_t atoms = basis.dim(0);
    const std::size_t span = basis.size() / std::max<std::size_t>(atoms, 1);
    for (std::size_t i = 0; i < atoms; ++i) {
      double* atom = basis.data() + i * span;
      double sq = 0.0;
      for (std::size_t j = 0; j < span; ++j) sq += atom[j] * atom[j];
      const double norm = std::sqrt(sq);
      if (norm < 1e-12) continue;
      for (std::size_t j = 0; j < span; ++j) atom[j] /= norm;
    }
    net.bank(b).expand();  // refresh the cached dictionary
  }
}

// --------------------------------------------------------------- batches

Tensor gather_batch(const Dataset& data, const std::vector<std::size_t>& order,
                    std::size_t start, std::size_t count, std::vector<int>* labels) {
  const std::size_t px = data.channels() * data.height() * data.width();
  Tensor batch({count, data.channels(), data.height(), data.width()});
  if (labels) labels->resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = order[start + i];
    std::memcpy(batch.data() + i * px, data.images.data() + src * px, px * sizeof(double));
    if (labels) (*labels)[i] = data.labels[src];
  }
  return batch;
}

// Argmax with ties resolved to the lowest class index.
int argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t classes = logits.dim(1);
  const double* p = logits.data() + row * classes;
  int best = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (p[c] > p[best]) best = static_cast<int>(c);
  return best;
}

double batch_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = logits.data() + i * classes;
    double mx = p[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, p[c]);
    double lse = 0.0;
    for (std::size_t c = 0; c < classes; ++c) lse += std::exp(p[c] - mx);
    total += std::log(lse) - (p[labels[i]] - mx);
  }
  return total / static_cast<double>(n);
}

double zero_fraction(const Tensor& t) {
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] == 0.0) ++zeros;
  return t.empty() ? 0.0 : static_cast<double>(zeros) / static_cast<double>(t.size());
}

std::string describe_param_norms(UnrolledNetwork& net) {
  std::ostringstream msg;
  const auto params = learnable_params(net);
  for (std::size_t i = 0; i < params.size(); ++i)
    msg << (i ? ", " : "") << "p" << i << " |max|=" << max_abs(*params[i]);
  return msg.str();
}

}  // namespace

// ---------------------------------------------------------------- train

TrainResult train(const TrainConfig& cfg, const Dataset& train_data,
                  const Dataset& test_data,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
#if defined(__GLIBC__)
  // Activation tensors run to tens of megabytes; keep them on the heap so
  // every batch does not pay mmap/munmap page-zeroing for each allocation.
  static const int malloc_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return 0;
  }();
  (void)malloc_tuned;
#endif
  if (cfg.batch_size <= 0) throw UsageError("batch_size must be positive");
  if (cfg.epochs < 0) throw UsageError("epochs must be >= 0");
  if (train_data.size() == 0) throw UsageError("training dataset is empty");

  std::mt19937_64 rng(cfg.seed);
  TrainResult result{UnrolledNetwork(network_config_for(cfg.model, cfg.dataset), rng), {}};
  UnrolledNetwork& net = result.net;
  renormalize_basis(net);  // unit-norm atoms from the first step onward

  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  const std::size_t n = train_data.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates, driven by the same engine as initialization so the
    // whole run is a function of (seed, data).
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng() % (i + 1)]);

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, batch_index = 0;
    std::vector<int> labels;
    for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
      const std::size_t count = std::min(bs, n - start);
      const Tensor batch = gather_batch(train_data, order, start, count, &labels);
      LossGrads lg = net.loss_and_grads(batch, labels);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "loss became non-finite at epoch " << epoch << ", batch " << batch_index
            << " (" << describe_param_norms(net) << ")";
        throw TrainingDiverged(msg.str());
      }
      opt.step(learnable_params(net), gradient_list(lg.grads));
      renormalize_basis(net);
      loss_sum += lg.loss * static_cast<double>(count);
      for (std::size_t i = 0; i < count; ++i)
        if (argmax_row(lg.logits, i) == labels[i]) ++correct;
      seen += count;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(seen);
    em.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    if (test_data.size() > 0) {
      const EvalResult ev = evaluate(net, test_data);
      em.test_acc = ev.accuracy;
      em.sparsity = ev.mean_sparsity;
    }
    em.stability_margin = stability_margin(net);
    result.log.push_back(em);
    if (on_epoch) on_epoch(em);
    if (cfg.target_test_acc && em.test_acc >= *cfg.target_test_acc) break;
  }
  return result;
}

EvalResult evaluate(UnrolledNetwork& net, const Dataset& data, int batch_size) {
  if (data.size() == 0) throw UsageError("cannot evaluate on an empty dataset");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double loss_sum = 0.0, zero_sum = 0.0;
  std::size_t correct = 0;
  std::vector<int> labels;
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t count = std::min(bs, n - start);
    const Tensor batch = gather_batch(data, order, start, count, &labels);
    ForwardResult fr = net.forward(batch, /*training=*/false);
    loss_sum += batch_cross_entropy(fr.logits, labels) * static_cast<double>(count);
    zero_sum += zero_fraction(fr.codes.back()) * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i)
      if (argmax_row(fr.logits, i) == labels[i]) ++correct;
  }
  EvalResult out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  out.mean_loss = loss_sum / static_cast<double>(n);
  out.mean_sparsity = zero_sum / static_cast<double>(n);
  return out;
}

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open metrics file: " + path);
  f << "epoch,train_loss,train_acc,test_acc,sparsity,stability_margin\n";
  f.precision(10);
  for (const auto& em : log)
    f << em.epoch << ',' << em.train_loss << ',' << em.train_acc << ',' << em.test_acc
      << ',' << em.sparsity << ',' << em.stability_margin << '\n';
  if (!f) throw IoError("failed writing metrics file: " + path);
}

// ------------------------------------------------------------ stability

double stability_margin(const UnrolledNetwork& net, int iters) {
  const NetworkConfig& cfg = net.config();
  if (cfg.solver.num_layers == 0) return 0.0;
  const auto geom = [&](const FilterBank& bank) {
    ConvDictionary dict(bank.expanded(), net.padding());
    const std::vector<std::size_t> code_dim =
        dict.code_shape({cfg.cin, cfg.image_h, cfg.image_w});
    // apply = W (synthesize), adjoint = W^T (analyze); power iteration
    // then estimates sigma_max(W^T W).
    const SigmaMaxResult r = power_iteration_sigma_max(
        [&](const Tensor& z) { return dict.synthesize(z); },
        [&](const Tensor& x) { return dict.analyze(x); }, code_dim, iters,
        /*seed=*/1);
    return r.value;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < net.num_banks(); ++i) worst = std::max(worst, geom(net.bank(i)));
  return cfg.solver.alpha * worst;
}

// ----------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'R', 'U', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ParseError("checkpoint truncated", static_cast<long long>(is.tellg()));
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto len = get<std::uint64_t>(is);
  if (len > (1ull << 30)) throw ParseError("unreasonable string length in checkpoint");
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw ParseError("checkpoint truncated", static_cast<long long>(is.tellg()));
  return s;
}

void put_tensor(std::ostream& os, const Tensor& t) {
  put<std::uint64_t>(os, t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) put<std::uint64_t>(os, t.dim(i));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor get_tensor(std::istream& is) {
  const auto rank = get<std::uint64_t>(is);
  if (rank > 8) throw ParseError("unreasonable tensor rank in checkpoint");
  std::vector<std::size_t> shape(rank);
  std::size_t total = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(get<std::uint64_t>(is));
    total *= d;
  }
  if (total > (1ull << 28)) throw ParseError("unreasonable tensor size in checkpoint");
  std::vector<double> data(total);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (!is) throw ParseError("checkpoint truncated", static_cast<long long>(is.tellg()));
  return Tensor(std::move(shape), std::move(data));
}

void put_net_config(std::ostream& os, const NetworkConfig& c) {
  put<std::uint32_t>(os, c.mode == NetMode::Dense ? 1u : 0u);
  put<std::uint64_t>(os, c.m);
  put<std::int32_t>(os, c.k);
  put<std::uint64_t>(os, c.cin);
  put<std::uint64_t>(os, c.filter_h);
  put<std::uint64_t>(os, c.filter_w);
  put<std::uint64_t>(os, c.image_h);
  put<std::uint64_t>(os, c.image_w);
  put<std::uint64_t>(os, c.classes);
  put<double>(os, c.solver.lambda);
  put<double>(os, c.solver.alpha);
  put<std::int32_t>(os, c.solver.num_layers);
  put<std::uint32_t>(os, c.solver.acceleration == SolverConfig::Accel::Fista ? 1u : 0u);
  put<std::uint8_t>(os, c.tied ? 1 : 0);
  put<std::uint8_t>(os, c.bn_in_recurrence ? 1 : 0);
  put<double>(os, c.input_gain);
}

NetworkConfig get_net_config(std::istream& is) {
  NetworkConfig c;
  c.mode = get<std::uint32_t>(is) ? NetMode::Dense : NetMode::Convolutional;
  c.m = get<std::uint64_t>(is);
  c.k = get<std::int32_t>(is);
  c.cin = get<std::uint64_t>(is);
  c.filter_h = get<std::uint64_t>(is);
  c.filter_w = get<std::uint64_t>(is);
  c.image_h = get<std::uint64_t>(is);
  c.image_w = get<std::uint64_t>(is);
  c.classes = get<std::uint64_t>(is);
  c.solver.lambda = get<double>(is);
  c.solver.alpha = get<double>(is);
  c.solver.num_layers = get<std::int32_t>(is);
  c.solver.acceleration =
      get<std::uint32_t>(is) ? SolverConfig::Accel::Fista : SolverConfig::Accel::Ista;
  c.tied = get<std::uint8_t>(is) != 0;
  c.bn_in_recurrence = get<std::uint8_t>(is) != 0;
  c.input_gain = get<double>(is);
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);

  const TrainConfig& tc = ckpt.config;
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tc.model));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tc.dataset));
  put<std::int32_t>(os, tc.epochs);
  put<std::int32_t>(os, tc.batch_size);
  put<double>(os, tc.learning_rate);
  put<std::uint64_t>(os, tc.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tc.optimizer));
  put<std::uint8_t>(os, tc.eval_dataset ? 1 : 0);
  put<std::uint32_t>(os, tc.eval_dataset ? static_cast<std::uint32_t>(*tc.eval_dataset) : 0u);
  put<std::uint8_t>(os, tc.target_test_acc ? 1 : 0);
  put<double>(os, tc.target_test_acc.value_or(0.0));

  put<std::int32_t>(os, ckpt.epoch);
  put_string(os, ckpt.rng_state);

  const UnrolledNetwork& net = ckpt.net;
  put_net_config(os, net.config());
  put<std::uint64_t>(os, net.num_banks());
  for (std::size_t i = 0; i < net.num_banks(); ++i) put_tensor(os, net.bank(i).basis());
  put<std::uint64_t>(os, net.num_bn());
  for (std::size_t i = 0; i < net.num_bn(); ++i) {
    const BatchNormState& bn = net.bn(i);
    put_tensor(os, bn.gamma);
    put_tensor(os, bn.beta);
    put_tensor(os, bn.running_mean);
    put_tensor(os, bn.running_var);
    put<double>(os, bn.eps);
    put<double>(os, bn.momentum);
    put<std::int64_t>(os, bn.batches_seen);
  }
  put_tensor(os, net.head().weight);
  put_tensor(os, net.head().bias);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError("not a checkpoint file (bad magic)", 0);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw ParseError("unsupported checkpoint version", 8);

  Checkpoint ckpt;
  TrainConfig& tc = ckpt.config;
  const auto model_raw = get<std::uint32_t>(is);
  const auto dataset_raw = get<std::uint32_t>(is);
  if (model_raw > 5 || dataset_raw > 2)
    throw ParseError("checkpoint enum value out of range", 12);
  tc.model = static_cast<ModelKind>(model_raw);
  tc.dataset = static_cast<DatasetKind>(dataset_raw);
  tc.epochs = get<std::int32_t>(is);
  tc.batch_size = get<std::int32_t>(is);
  tc.learning_rate = get<double>(is);
  tc.seed = get<std::uint64_t>(is);
  const auto opt_raw = get<std::uint32_t>(is);
  if (opt_raw > 1) throw ParseError("checkpoint optimizer value out of range");
  tc.optimizer = static_cast<OptimizerKind>(opt_raw);
  const bool has_eval = get<std::uint8_t>(is) != 0;
  const auto eval_raw = get<std::uint32_t>(is);
  if (has_eval) {
    if (eval_raw > 2) throw ParseError("checkpoint eval dataset out of range");
    tc.eval_dataset = static_cast<DatasetKind>(eval_raw);
  }
  const bool has_target = get<std::uint8_t>(is) != 0;
  const double target = get<double>(is);
  if (has_target) tc.target_test_acc = target;

  ckpt.epoch = get<std::int32_t>(is);
  ckpt.rng_state = get_string(is);

  const NetworkConfig cfg = get_net_config(is);
  const auto n_banks = get<std::uint64_t>(is);
  if (n_banks > 1024) throw ParseError("unreasonable bank count in checkpoint");
  std::vector<FilterBank> banks;
  banks.reserve(n_banks);
  for (std::uint64_t i = 0; i < n_banks; ++i) {
    Tensor basis = get_tensor(is);
    if (basis.rank() != 4) throw ParseError("bank basis must be rank 4");
    banks.emplace_back(std::move(basis), CyclicGroup::make(cfg.k, cfg.filter_h, cfg.filter_w));
    banks.back().expand();
  }
  const auto n_bn = get<std::uint64_t>(is);
  if (n_bn > 1024) throw ParseError("unreasonable batch-norm count in checkpoint");
  std::vector<BatchNormState> bn_states;
  bn_states.reserve(n_bn);
  for (std::uint64_t i = 0; i < n_bn; ++i) {
    BatchNormState bn;
    bn.gamma = get_tensor(is);
    bn.beta = get_tensor(is);
    bn.running_mean = get_tensor(is);
    bn.running_var = get_tensor(is);
    bn.eps = get<double>(is);
    bn.momentum = get<double>(is);
    bn.batches_seen = get<std::int64_t>(is);
    bn_states.push_back(std::move(bn));
  }
  ClassifierHead head;
  head.weight = get_tensor(is);
  head.bias = get_tensor(is);

  ckpt.net = UnrolledNetwork(cfg, std::move(banks), std::move(bn_states), std::move(head));
  return ckpt;
}

}  // namespace rotunroll
