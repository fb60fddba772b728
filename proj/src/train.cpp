// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/train.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "csdn/io.hpp"
#include "csdn/ops.hpp"

namespace csdn {

template <typename T>
ad::Var<T> completion_loss(ad::Var<T> coarse, ad::Var<T> out, ad::Var<T> gt, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("loss: alpha must be non-negative");
  const auto c0 = ad::chamfer(coarse, gt, ChamferVariant::kL2);
  const auto c1 = ad::chamfer(out, gt, ChamferVariant::kL2);
  return ad::add(c0, ad::scale(c1, static_cast<T>(alpha)));
}

double alpha_at(std::size_t iter, const TrainConfig& cfg) {
  if (iter >= cfg.alpha_ramp_iters) return cfg.alpha_end;
  const double t = static_cast<double>(iter) / static_cast<double>(cfg.alpha_ramp_iters);
  return cfg.alpha_start + (cfg.alpha_end - cfg.alpha_start) * t;
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  const auto steps = static_cast<double>(epoch / cfg.lr_decay_every);
  return cfg.learning_rate * std::pow(cfg.lr_decay, steps);
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ParamStore<T>& p) {
  AdamState s;
  for (const auto& e : p.entries()) {
    s.m.emplace_back(e.value.shape());
    s.v.emplace_back(e.value.shape());
  }
  return s;
}

template <typename T>
void adam_step(ParamStore<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr) {
  auto& entries = params.entries();
  if (grads.size() != entries.size() || state.m.size() != entries.size() ||
      state.v.size() != entries.size()) {
    throw ShapeError("adam: " + std::to_string(entries.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients and " +
                     std::to_string(state.m.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& shape = entries[i].value.shape();
    if (grads[i].shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape) {
      throw ShapeError("adam: shape mismatch for '" + entries[i].name + "'");
    }
    if (!all_finite<T>(grads[i].data())) {
      throw NumericError("adam: non-finite gradient for parameter '" + entries[i].name + "'");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto p = entries[i].value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * gj;
      const double vj = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + kAdamEps);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_text(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

template <typename T>
void put_values(std::string& out, std::span<const T> values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (T v : values) put<Bits>(out, std::bit_cast<Bits>(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  std::string text() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(source_ + ": checkpoint byte " + std::to_string(pos_) + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size() || pos_ + n < pos_) fail("truncated file");
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

template <typename T>
constexpr std::uint8_t dtype_code() {
  return sizeof(T) == 4 ? 0 : 1;
}

struct TableEntry {
  std::string name;
  std::uint8_t dtype;
  Shape shape;
  std::uint64_t offset;
};

}  // namespace

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt) {
  std::vector<std::pair<std::string, const Tensor<T>*>> tensors;
  const auto& entries = ckpt.params.entries();
  for (const auto& e : entries) tensors.emplace_back(e.name, &e.value);
  for (std::size_t i = 0; i < ckpt.adam.m.size(); ++i) tensors.emplace_back("adam_m/" + entries[i].name, &ckpt.adam.m[i]);
  for (std::size_t i = 0; i < ckpt.adam.v.size(); ++i) tensors.emplace_back("adam_v/" + entries[i].name, &ckpt.adam.v[i]);

  KeyValueText state;
  state.set("epoch", std::to_string(ckpt.epoch));
  state.set("iter", std::to_string(ckpt.iter));
  state.set("adam_step", std::to_string(ckpt.adam.step));
  state.set("rng", ckpt.rng_state);

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_text(out, to_text(ckpt.config).str());
  put_text(out, state.str());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, dtype_code<T>());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) put<std::uint64_t>(out, d);
    put<std::uint64_t>(out, offset);
    offset += t->numel() * sizeof(T);
  }
  for (const auto& [name, t] : tensors) put_values<T>(out, t->data());
  return out;
}

namespace {

struct Header {
  RunConfig config;
  KeyValueText state;
  std::vector<TableEntry> table;
  std::size_t payload = 0;
};

Header read_header(Reader& r, const std::string& bytes, const std::string& source) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    r.fail("not a checkpoint (bad magic)");
  }
  r.seek(sizeof(kCheckpointMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Header h;
  const std::string cfg_text = r.text();
  h.config = from_text(KeyValueText::parse(cfg_text, source + " [config]"), source + " [config]");
  h.state = KeyValueText::parse(r.text(), source + " [state]");
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    TableEntry e;
    e.name = r.raw(r.get<std::uint32_t>());
    e.dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("tensor '" + e.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.get<std::uint64_t>());
    e.offset = r.get<std::uint64_t>();
    h.table.push_back(std::move(e));
  }
  h.payload = r.pos();
  return h;
}

std::uint64_t state_uint(const KeyValueText& kv, const std::string& key, const std::string& source) {
  std::uint64_t v;
  if (!kv.contains(key) || !parse_uint(kv.get(key), v)) {
    throw std::runtime_error(source + ": checkpoint state lacks a valid '" + key + "'");
  }
  return v;
}

}  // namespace

template <typename T>
Checkpoint<T> decode_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  Header h = read_header(r, bytes, source);
  Checkpoint<T> ckpt;
  ckpt.config = h.config;
  ckpt.epoch = state_uint(h.state, "epoch", source);
  ckpt.iter = state_uint(h.state, "iter", source);
  ckpt.adam.step = state_uint(h.state, "adam_step", source);
  if (!h.state.contains("rng")) throw std::runtime_error(source + ": checkpoint state lacks 'rng'");
  ckpt.rng_state = h.state.get("rng");

  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::unordered_map<std::string, Tensor<T>> moments;
  for (const auto& e : h.table) {
    if (e.dtype != dtype_code<T>()) {
      r.fail("tensor '" + e.name + "' is stored as " + (e.dtype == 0 ? "f32" : "f64") +
             ", requested " + (sizeof(T) == 4 ? "f32" : "f64"));
    }
    Tensor<T> t(e.shape);
    r.seek(h.payload + e.offset);
    for (auto& v : t.data()) v = std::bit_cast<T>(r.get<Bits>());
    if (e.name.rfind("adam_m/", 0) == 0 || e.name.rfind("adam_v/", 0) == 0) {
      moments.emplace(e.name, std::move(t));
    } else {
      ckpt.params.add(e.name, std::move(t));
    }
  }
  for (const auto& e : ckpt.params.entries()) {
    auto m = moments.find("adam_m/" + e.name);
    auto v = moments.find("adam_v/" + e.name);
    if (m == moments.end() || v == moments.end()) {
      throw std::runtime_error(source + ": checkpoint lacks optimizer moments for '" + e.name + "'");
    }
    ckpt.adam.m.push_back(std::move(m->second));
    ckpt.adam.v.push_back(std::move(v->second));
  }
  return ckpt;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
  const auto tmp = path.string() + ".tmp";
  write_file(tmp, encode_checkpoint(ckpt));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error(path.string() + ": cannot write checkpoint: " + ec.message());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(read_file(path), path.string());
}

RunConfig checkpoint_config(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes, path.string());
  return read_header(r, bytes, path.string()).config;
}

std::string repro_header(const RunConfig& cfg) {
  return "# csdn " CSDN_VERSION " config=" + hex64(config_hash(cfg)) +
         " seed=" + std::to_string(cfg.train.seed) + " variant=" +
         std::string(to_string(cfg.model.variant)) + " preset=" + std::string(to_string(cfg.preset));
}

void check_scale(const ModelConfig& cfg, const std::vector<ObjectRecord>& objects) {
  if (objects.empty()) return;
  const ObjectRecord& o = objects.front();
  std::string diff;
  auto expect = [&](const char* name, std::size_t want, std::size_t got) {
    if (want == got) return;
    diff += std::string(diff.empty() ? "" : "; ") + name + ": config " + std::to_string(want) +
            ", dataset " + std::to_string(got);
  };
  expect("input_points", cfg.input_points, o.views.empty() ? 0 : o.views.front().partial.size());
  expect("gt_points", cfg.gt_points, o.gt.size());
  expect("image_size", cfg.image_size, o.views.empty() ? 0 : o.views.front().image.width);
  if (!diff.empty()) throw std::invalid_argument("scale mismatch (" + o.id + "): " + diff);
}

std::size_t worker_count(const TrainConfig& cfg) {
  if (cfg.deterministic) return 1;
  std::size_t n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CSDN_THREADS")) {
    std::uint64_t cap;
    if (parse_uint(env, cap) && cap > 0) n = std::min<std::size_t>(n, cap);
  }
  return n;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

template <typename T>
std::vector<Tensor<T>> zero_grads(const ParamStore<T>& p) {
  std::vector<Tensor<T>> g;
  for (const auto& e : p.entries()) g.emplace_back(e.value.shape());
  return g;
}

const char* kMetricsColumns = "epoch,iter,alpha,lr,cd_coarse,cd_out,fscore";

}  // namespace

template <typename T>
Trainer<T>::Trainer(RunConfig cfg, std::vector<ObjectRecord> objects, TrainOptions opts)
    : cfg_(std::move(cfg)),
      objects_(std::move(objects)),
      opts_(std::move(opts)),
      model_(cfg_.model, cfg_.train.seed),
      adam_(AdamState<T>::zeros_like(model_.params())),
      rng_(derive_seed(cfg_.train.seed, 2)) {
  cfg_.train.validate();
  if (objects_.empty()) throw std::invalid_argument("train: dataset is empty");
  for (const auto& o : objects_) {
    if (o.views.empty()) throw std::invalid_argument("train: object '" + o.id + "' has no views");
  }
  if (!opts_.out_dir.empty()) {
    std::filesystem::create_directories(opts_.out_dir);
    write_file(opts_.out_dir / "metrics.csv",
               repro_header(cfg_) + "\n" + kMetricsColumns + "\n");
  }
}

template <typename T>
Trainer<T>::Trainer(RunConfig cfg, std::vector<ObjectRecord> objects, Checkpoint<T> resume,
                    TrainOptions opts)
    : cfg_(std::move(cfg)),
      objects_(std::move(objects)),
      opts_(std::move(opts)),
      model_(cfg_.model, std::move(resume.params)),
      adam_(std::move(resume.adam)),
      rng_(0),
      epoch_(resume.epoch),
      iter_(resume.iter) {
  cfg_.train.validate();
  if (objects_.empty()) throw std::invalid_argument("train: dataset is empty");
  rng_.set_state(resume.rng_state);
  if (!opts_.out_dir.empty()) {
    std::filesystem::create_directories(opts_.out_dir);
    const auto path = opts_.out_dir / "metrics.csv";
    if (!std::filesystem::exists(path)) {
      write_file(path, repro_header(cfg_) + "\n" + kMetricsColumns + "\n");
    }
  }
}

template <typename T>
bool Trainer<T>::done() const {
  return epoch_ >= cfg_.train.epochs ||
         (cfg_.train.max_iters != 0 && iter_ >= cfg_.train.max_iters);
}

template <typename T>
typename Trainer<T>::SampleResult Trainer<T>::process(const Sample& s, double alpha,
                                                      std::vector<Tensor<T>>& grads) const {
  const auto& params = model_.params();
  ad::Graph<T> g;
  const auto o = model_.forward(g, s.view->partial.template to_tensor<T>(),
                                s.view->image.template to_tensor<T>(), s.view->camera);
  const auto gt = g.constant(s.object->gt.template to_tensor<T>());
  const bool coarse_only = !traits(cfg_.model.variant).refine;
  const auto loss = coarse_only ? ad::chamfer(o.coarse, gt, ChamferVariant::kL2)
                                : completion_loss(o.coarse, o.out(), gt, alpha);
  SampleResult r;
  r.loss = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(r.loss)) return r;
  g.backward(loss);

  std::unordered_map<const Tensor<T>*, std::size_t> index;
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) index.emplace(&entries[i].value, i);
  for (auto& t : grads) t.fill(T{0});
  for (const auto& [ptr, var] : g.params()) grads[index.at(ptr)] = var.grad();

  const auto out = o.out().value().data();
  const auto coarse = o.coarse.value().data();
  const auto gts = s.object->gt.xyz();
  std::vector<T> gt_t(gts.begin(), gts.end());
  r.cd_coarse = chamfer<T>(coarse, gt_t, cfg_.train.report_chamfer);
  r.cd_out = chamfer<T>(out, gt_t, cfg_.train.report_chamfer);
  r.fscore = f_score<T>(out, gt_t, cfg_.train.fscore_tau);
  return r;
}

template <typename T>
EpochMetrics Trainer<T>::run_epoch() {
  const auto& tc = cfg_.train;
  const double lr = lr_at(epoch_, tc);
  std::vector<std::size_t> order(objects_.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);
  std::vector<Sample> samples;
  for (auto i : order) {
    const auto& o = objects_[i];
    samples.push_back({&o, &o.views[rng_.below(o.views.size())]});
  }

  const std::size_t workers = worker_count(tc);
  std::vector<std::vector<Tensor<T>>> grads;
  std::vector<SampleResult> results;
  EpochMetrics m;
  m.epoch = epoch_ + 1;
  m.lr = lr;
  std::size_t seen = 0;
  for (std::size_t begin = 0, batch = 0; begin < samples.size(); begin += tc.batch_size, ++batch) {
    if (tc.max_iters != 0 && iter_ >= tc.max_iters) break;
    const std::size_t count = std::min(tc.batch_size, samples.size() - begin);
    const double alpha = alpha_at(iter_, tc);
    while (grads.size() < count) grads.push_back(zero_grads(model_.params()));
    results.assign(count, {});
    std::vector<std::exception_ptr> errors(count);
    auto work = [&](std::size_t w) {
      for (std::size_t j = w; j < count; j += workers) {
        try {
          results[j] = process(samples[begin + j], alpha, grads[j]);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      }
    };
    if (workers <= 1 || count == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t j = 0; j < count; ++j) {
      if (!std::isfinite(results[j].loss)) {
        const Sample& s = samples[begin + j];
        throw NumericError("training halted: non-finite loss in epoch " + std::to_string(epoch_ + 1) +
                           " batch " + std::to_string(batch) + " (object " + s.object->id +
                           ", view " + std::to_string(s.view->id) + ")");
      }
    }
    auto& total = grads[0];
    for (std::size_t j = 1; j < count; ++j) {
      for (std::size_t i = 0; i < total.size(); ++i) {
        auto dst = total[i].data();
        auto src = grads[j][i].data();
        for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
      }
    }
    const T inv = static_cast<T>(1.0 / static_cast<double>(count));
    for (auto& t : total)
      for (auto& v : t.data()) v *= inv;
    adam_step(model_.params(), total, adam_, lr);
    ++iter_;
    m.alpha = alpha;
    for (const auto& r : results) {
      m.cd_coarse += r.cd_coarse;
      m.cd_out += r.cd_out;
      m.fscore += r.fscore;
    }
    seen += count;
  }
  if (seen) {
    m.cd_coarse /= static_cast<double>(seen);
    m.cd_out /= static_cast<double>(seen);
    m.fscore /= static_cast<double>(seen);
  }
  ++epoch_;
  m.iter = iter_;
  append_metrics(m);
  if (opts_.on_epoch) opts_.on_epoch(m);
  if (tc.checkpoint_every != 0 && epoch_ % tc.checkpoint_every == 0) write_checkpoint("latest.ckpt");
  return m;
}

template <typename T>
void Trainer<T>::run() {
  while (!done()) run_epoch();
  write_checkpoint("final.ckpt");
}

template <typename T>
Checkpoint<T> Trainer<T>::checkpoint() const {
  Checkpoint<T> c;
  c.config = cfg_;
  c.epoch = epoch_;
  c.iter = iter_;
  c.rng_state = rng_.state();
  c.params = model_.params().template cast<T>();
  c.adam = adam_;
  return c;
}

template <typename T>
void Trainer<T>::write_checkpoint(const std::string& name) const {
  if (opts_.out_dir.empty()) return;
  save_checkpoint(opts_.out_dir / name, checkpoint());
}

template <typename T>
void Trainer<T>::append_metrics(const EpochMetrics& m) const {
  if (opts_.out_dir.empty()) return;
  const auto path = opts_.out_dir / "metrics.csv";
  std::ofstream os(path, std::ios::app | std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot append metrics");
  os << m.epoch << ',' << m.iter << ',' << format_number(m.alpha) << ',' << format_number(m.lr)
     << ',' << format_number(m.cd_coarse) << ',' << format_number(m.cd_out) << ','
     << format_number(m.fscore) << '\n';
  if (!os) throw std::runtime_error(path.string() + ": cannot append metrics");
}

template <typename T>
Completion<T> complete(const CsdnModel<T>& model, const PointCloud& partial, const Image& image,
                       const Camera& camera) {
  ad::Graph<T> g;
  const auto o = model.forward(g, partial.to_tensor<T>(), image.to_tensor<T>(), camera);
  return {PointCloud::from_tensor(o.coarse.value()), PointCloud::from_tensor(o.out().value())};
}

template <typename T>
SetLoss mean_chamfer(const CsdnModel<T>& model, const std::vector<Sample>& samples,
                     ChamferVariant variant) {
  SetLoss s;
  for (const auto& sample : samples) {
    const auto c = complete(model, sample.view->partial, sample.view->image, sample.view->camera);
    s.cd_coarse += chamfer<float>(c.coarse.xyz(), sample.object->gt.xyz(), variant);
    s.cd_out += chamfer<float>(c.out.xyz(), sample.object->gt.xyz(), variant);
  }
  if (!samples.empty()) {
    s.cd_coarse /= static_cast<double>(samples.size());
    s.cd_out /= static_cast<double>(samples.size());
  }
  return s;
}

#define CSDN_INSTANTIATE(T)                                                                  \
  template ad::Var<T> completion_loss(ad::Var<T>, ad::Var<T>, ad::Var<T>, double);           \
  template struct AdamState<T>;                                                              \
  template void adam_step(ParamStore<T>&, const std::vector<Tensor<T>>&, AdamState<T>&,      \
                          double);                                                           \
  template std::string encode_checkpoint(const Checkpoint<T>&);                              \
  template Checkpoint<T> decode_checkpoint(const std::string&, const std::string&);          \
  template void save_checkpoint(const std::filesystem::path&, const Checkpoint<T>&);         \
  template Checkpoint<T> load_checkpoint(const std::filesystem::path&);                      \
  template class Trainer<T>;                                                                 \
  template Completion<T> complete(const CsdnModel<T>&, const PointCloud&, const Image&,      \
                                  const Camera&);                                            \
  template SetLoss mean_chamfer(const CsdnModel<T>&, const std::vector<Sample>&, ChamferVariant);
CSDN_INSTANTIATE(float)
CSDN_INSTANTIATE(double)
#undef CSDN_INSTANTIATE

}  // namespace csdn
