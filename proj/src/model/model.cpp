#include "fedmm/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "fedmm/error.hpp"
#include "fedmm/rng.hpp"

namespace fedmm::model {

void validate(const ModelConfig& cfg) {
  if (cfg.modality_dims.empty()) throw ValidationError("model: no modalities");
  for (auto d : cfg.modality_dims) {
    if (d < 1) throw ValidationError("model: modality dims must be positive");
  }
  if (cfg.hidden < 1) throw ValidationError("model: hidden width must be positive");
  if (cfg.class_count < 1) throw ValidationError("model: class_count must be positive");
  if (cfg.rank < 1) throw ValidationError("model: adapter rank must be positive");
  if (!(cfg.alpha_lora > 0.0)) throw ValidationError("model: alpha_lora must be positive");
}

std::vector<LayerSpec> build_layout(const ModelConfig& cfg) {
  validate(cfg);
  std::vector<LayerSpec> layers;
  const std::size_t enc = cfg.encoder_depth;
  std::size_t fused = 0;
  for (std::size_t m = 0; m < cfg.modality_count(); ++m) {
    std::size_t width = cfg.modality_dims[m] + 1;  // features + presence bit
    for (std::size_t l = 0; l < enc; ++l) {
      layers.push_back({"encoder." + std::to_string(m) + "." + std::to_string(l),
                        LayerRole::encoder, m, width, cfg.hidden, l});
      width = cfg.hidden;
    }
    fused += width;
  }
  std::size_t width = fused;
  for (std::size_t l = 0; l < cfg.trunk_depth; ++l) {
    layers.push_back({"trunk." + std::to_string(l), LayerRole::trunk, 0, width, cfg.hidden, enc + l});
    width = cfg.hidden;
  }
  layers.push_back({"head", LayerRole::head, 0, width, static_cast<std::size_t>(cfg.class_count),
                    enc + cfg.trunk_depth});
  return layers;
}

Batch Batch::rows(std::span<const std::size_t> index) const {
  Batch out;
  const auto n = static_cast<Eigen::Index>(index.size());
  out.features.reserve(features.size());
  for (const auto& f : features) {
    Matrix sub(n, f.cols());
    for (Eigen::Index i = 0; i < n; ++i) sub.row(i) = f.row(static_cast<Eigen::Index>(index[i]));
    out.features.push_back(std::move(sub));
  }
  out.presence.resize(n, presence.cols());
  out.labels.reserve(index.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.presence.row(i) = presence.row(static_cast<Eigen::Index>(index[i]));
    out.labels.push_back(labels[index[i]]);
  }
  return out;
}

namespace {

Batch allocate_batch(const data::DatasetManifest& manifest, std::size_t n) {
  Batch batch;
  for (const auto& mod : manifest.modalities) {
    batch.features.push_back(Matrix::Zero(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(mod.dim)));
  }
  batch.presence = Matrix::Zero(static_cast<Eigen::Index>(n),
                                static_cast<Eigen::Index>(manifest.modality_count()));
  batch.labels.reserve(n);
  return batch;
}

void fill_row(Batch& batch, Eigen::Index row, const data::Sample& s,
              const data::PresenceMask& mask) {
  for (std::size_t m = 0; m < s.features.size(); ++m) {
    if (!mask.test(m) || !s.features[m]) continue;
    const auto& v = *s.features[m];
    for (std::size_t j = 0; j < v.size(); ++j) batch.features[m](row, static_cast<Eigen::Index>(j)) = v[j];
    batch.presence(row, static_cast<Eigen::Index>(m)) = 1.0;
  }
  batch.labels.push_back(s.label);
}

}  // namespace

Batch make_batch(const data::DatasetManifest& manifest) {
  Batch batch = allocate_batch(manifest, manifest.samples.size());
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const auto& s = manifest.samples[i];
    fill_row(batch, static_cast<Eigen::Index>(i), s, s.presence());
  }
  return batch;
}

Batch make_batch(const data::DatasetManifest& manifest, const partition::ClientSlot& slot) {
  const auto index = manifest.id_index();
  Batch batch = allocate_batch(manifest, slot.size());
  for (std::size_t i = 0; i < slot.size(); ++i) {
    const auto& a = slot.samples[i];
    auto it = index.find(a.sample_id);
    if (it == index.end()) throw ValidationError("make_batch: dangling sample id " + a.sample_id);
    fill_row(batch, static_cast<Eigen::Index>(i), manifest.samples[it->second], a.mask);
  }
  return batch;
}

std::pair<BaseWeights, AdapterDelta> init_model(const ModelConfig& cfg) {
  BaseWeights base;
  base.config = cfg;
  base.layers = build_layout(cfg);
  for (const auto& l : base.layers) {
    if (cfg.rank > std::min(l.fan_in, l.fan_out)) {
      throw ValidationError("model: adapter rank " + std::to_string(cfg.rank) +
                            " exceeds the fan dimensions of layer " + l.name);
    }
  }
  AdapterDelta delta;
  delta.scale = cfg.alpha_lora / static_cast<double>(cfg.rank);
  const auto r = static_cast<Eigen::Index>(cfg.rank);
  for (std::size_t i = 0; i < base.layers.size(); ++i) {
    const auto& l = base.layers[i];
    const auto out = static_cast<Eigen::Index>(l.fan_out);
    const auto in = static_cast<Eigen::Index>(l.fan_in);
    Rng wrng(derive_seed(cfg.seed, "model.base", i));
    const double stddev = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
    Matrix w(out, in);
    for (Eigen::Index a = 0; a < out; ++a)
      for (Eigen::Index b = 0; b < in; ++b) w(a, b) = stddev * wrng.normal();
    base.weight.push_back(std::move(w));
    base.bias.push_back(Vector::Zero(out));

    Rng arng(derive_seed(cfg.seed, "model.adapter", i));
    Matrix a_mat(r, in);
    for (Eigen::Index a = 0; a < r; ++a)
      for (Eigen::Index b = 0; b < in; ++b) a_mat(a, b) = 0.02 * arng.normal();
    delta.layers.push_back({l.name, l.depth, Matrix::Zero(out, r), std::move(a_mat)});
  }
  return {std::move(base), std::move(delta)};
}

namespace {

struct Tape {
  std::vector<Matrix> input;   // per layer
  std::vector<Matrix> output;  // per layer, post-activation
  std::vector<Matrix> effective;
  std::vector<Eigen::Index> fused_width;  // per modality block width
  Matrix logits;
};

void check_shapes(const BaseWeights& base, const AdapterDelta& delta, const Batch& batch) {
  const auto& cfg = base.config;
  if (delta.layers.size() != base.layers.size()) throw ValidationError("forward: adapter layer count mismatch");
  for (std::size_t i = 0; i < base.layers.size(); ++i) {
    const auto& l = base.layers[i];
    const auto& a = delta.layers[i];
    if (a.B.rows() != static_cast<Eigen::Index>(l.fan_out) || a.A.cols() != static_cast<Eigen::Index>(l.fan_in) ||
        a.B.cols() != a.A.rows()) {
      throw ValidationError("forward: adapter shape mismatch in layer " + l.name);
    }
  }
  if (batch.features.size() != cfg.modality_count()) throw ValidationError("forward: modality count mismatch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  for (std::size_t m = 0; m < batch.features.size(); ++m) {
    if (batch.features[m].rows() != n || batch.features[m].cols() != static_cast<Eigen::Index>(cfg.modality_dims[m])) {
      throw ValidationError("forward: feature block " + std::to_string(m) + " has wrong shape");
    }
  }
  if (batch.presence.rows() != n || batch.presence.cols() != static_cast<Eigen::Index>(cfg.modality_count())) {
    throw ValidationError("forward: presence block has wrong shape");
  }
}

Matrix affine(const Matrix& in, const Matrix& w, const Vector& b) {
  Matrix z = in * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

Tape run_forward(const BaseWeights& base, const AdapterDelta& delta, const Batch& batch) {
  check_shapes(base, delta, batch);
  const auto& cfg = base.config;
  const auto n = static_cast<Eigen::Index>(batch.size());
  Tape tape;
  const std::size_t layer_count = base.layers.size();
  tape.input.resize(layer_count);
  tape.output.resize(layer_count);
  tape.effective.reserve(layer_count);
  for (std::size_t i = 0; i < layer_count; ++i) {
    tape.effective.push_back(base.weight[i] + compose_delta(delta, i));
  }

  std::vector<Matrix> encoded;
  std::size_t layer = 0;
  for (std::size_t m = 0; m < cfg.modality_count(); ++m) {
    const auto dim = static_cast<Eigen::Index>(cfg.modality_dims[m]);
    Matrix h(n, dim + 1);
    h.leftCols(dim) = batch.features[m];
    h.col(dim) = batch.presence.col(static_cast<Eigen::Index>(m));
    for (std::size_t l = 0; l < cfg.encoder_depth; ++l, ++layer) {
      tape.input[layer] = h;
      h = affine(h, tape.effective[layer], base.bias[layer]).array().tanh().matrix();
      tape.output[layer] = h;
    }
    tape.fused_width.push_back(h.cols());
    encoded.push_back(std::move(h));
  }
  Eigen::Index fused_cols = 0;
  for (auto w : tape.fused_width) fused_cols += w;
  Matrix h(n, fused_cols);
  Eigen::Index col = 0;
  for (const auto& e : encoded) {
    h.middleCols(col, e.cols()) = e;
    col += e.cols();
  }
  for (std::size_t l = 0; l < cfg.trunk_depth; ++l, ++layer) {
    tape.input[layer] = h;
    h = affine(h, tape.effective[layer], base.bias[layer]).array().tanh().matrix();
    tape.output[layer] = h;
  }
  tape.input[layer] = h;
  tape.logits = affine(h, tape.effective[layer], base.bias[layer]);
  tape.output[layer] = tape.logits;
  return tape;
}

void accumulate_adapter_grad(const AdapterDelta& delta, std::size_t layer, const Matrix& grad_w,
                             AdapterDelta& grad) {
  const auto& a = delta.layers[layer];
  grad.layers[layer].B = delta.scale * grad_w * a.A.transpose();
  grad.layers[layer].A = delta.scale * a.B.transpose() * grad_w;
}

}  // namespace

Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix forward(const BaseWeights& base, const AdapterDelta& delta, const Batch& batch) {
  return run_forward(base, delta, batch).logits;
}

LossGrad loss_and_grad(const BaseWeights& base, const AdapterDelta& delta, const Batch& batch,
                       const client::RegContext* reg) {
  if (batch.size() == 0) throw ValidationError("loss_and_grad: empty batch");
  const auto& cfg = base.config;
  Tape tape = run_forward(base, delta, batch);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto classes = tape.logits.cols();

  LossGrad out;
  out.grad = delta.zeros_like();
  Matrix dz = softmax(tape.logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) throw ValidationError("loss_and_grad: label out of range");
    const auto row = tape.logits.row(i);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss += lse - row(y);
    dz(i, y) -= 1.0;
  }
  dz /= static_cast<double>(n);
  out.data_loss = loss / static_cast<double>(n);

  // Head, then trunk in reverse.
  std::size_t layer = base.layers.size() - 1;
  accumulate_adapter_grad(delta, layer, dz.transpose() * tape.input[layer], out.grad);
  Matrix dh = dz * tape.effective[layer];
  for (std::size_t l = cfg.trunk_depth; l-- > 0;) {
    --layer;
    dz = dh.array() * (1.0 - tape.output[layer].array().square());
    accumulate_adapter_grad(delta, layer, dz.transpose() * tape.input[layer], out.grad);
    dh = dz * tape.effective[layer];
  }
  if (cfg.encoder_depth > 0) {
    Eigen::Index col = 0;
    for (std::size_t m = 0; m < cfg.modality_count(); ++m) {
      Matrix dm = dh.middleCols(col, tape.fused_width[m]);
      col += tape.fused_width[m];
      for (std::size_t l = cfg.encoder_depth; l-- > 0;) {
        const std::size_t idx = m * cfg.encoder_depth + l;
        dz = dm.array() * (1.0 - tape.output[idx].array().square());
        accumulate_adapter_grad(delta, idx, dz.transpose() * tape.input[idx], out.grad);
        if (l > 0) dm = dz * tape.effective[idx];
      }
    }
  }

  out.loss = out.data_loss;
  if (reg != nullptr) {
    auto r = client::reg_value_and_grad(delta, *reg);
    out.reg_value = r.value;
    out.loss += r.value;
    for (std::size_t l = 0; l < out.grad.layers.size(); ++l) {
      out.grad.layers[l].B += r.grad.layers[l].B;
      out.grad.layers[l].A += r.grad.layers[l].A;
    }
  }
  return out;
}

}  // namespace fedmm::model
