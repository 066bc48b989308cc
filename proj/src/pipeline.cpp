// Copyright 2026 cp3 contributors
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

#include "cp3/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "cp3/config.hpp"
#include "cp3/ioi.hpp"

namespace cp3 {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw ValidationError("train: learning rate must be positive");
  if (!(decay_factor > 0.0) || decay_factor > 1.0)
    throw ValidationError("train: decay factor must lie in (0, 1]");
  if (decay_every < 1) throw ValidationError("train: decay_every must be >= 1");
  if (epochs < 0) throw ValidationError("train: negative epoch count");
  if (batch_size < 1) throw ValidationError("train: batch size must be >= 1");
  if (!(gamma > 0.0) || gamma >= 1.0)
    throw ValidationError("train: gamma must lie in (0, 1)");
}

double lr_at(const TrainConfig& cfg, long epoch) {
  if (epoch < 0) throw ValidationError("lr_at: negative epoch");
  return cfg.learning_rate *
         std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

void adam_step(AdamState& state, const std::map<std::string, Mat*>& params,
               const std::map<std::string, Mat>& grads, double lr) {
  for (const auto& [name, g] : grads) {
    const auto it = params.find(name);
    if (it == params.end())
      throw ValidationError("adam: gradient for unknown parameter '" + name +
                            "'");
    const Mat& p = *it->second;
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ValidationError("adam: gradient shape mismatch for '" + name +
                            "'");
    if (!g.allFinite())
      throw std::runtime_error("adam: non-finite gradient for '" + name +
                               "' at step " + std::to_string(state.step + 1) +
                               "; aborting");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Mat& p = *params.at(name);
    Mat& m = state.m[name];
    Mat& v = state.v[name];
    if (m.size() == 0) m = Mat::Zero(p.rows(), p.cols());
    if (v.size() == 0) v = Mat::Zero(p.rows(), p.cols());
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m / c1;
    const Mat v_hat = v / c2;
    p -= lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                                  Mat::Constant(p.rows(), p.cols(), state.eps));
  }
}

PretrainVariant pretrain_variant_from_string(const std::string& s) {
  if (s == "mirrored-to-complete") return PretrainVariant::kMirroredToC;
  if (s == "jittered-to-complete") return PretrainVariant::kJitteredToC;
  if (s == "partial-to-complete") return PretrainVariant::kIToC;
  if (s == "partial-to-partial") return PretrainVariant::kIToI;
  if (s == "crop-to-complete") return PretrainVariant::kIoiToC;
  if (s == "hybrid-parallel") return PretrainVariant::kHybridParallel;
  if (s == "crop-to-partial") return PretrainVariant::kIoiToI;
  throw ValidationError("unknown pretrain variant '" + s + "'");
}

std::string to_string(PretrainVariant v) {
  switch (v) {
    case PretrainVariant::kMirroredToC: return "mirrored-to-complete";
    case PretrainVariant::kJitteredToC: return "jittered-to-complete";
    case PretrainVariant::kIToC: return "partial-to-complete";
    case PretrainVariant::kIToI: return "partial-to-partial";
    case PretrainVariant::kIoiToC: return "crop-to-complete";
    case PretrainVariant::kHybridParallel: return "hybrid-parallel";
    case PretrainVariant::kIoiToI: return "crop-to-partial";
  }
  return "?";
}

std::vector<TrainSample> load_samples(const Dataset& ds,
                                      const std::string& split) {
  std::vector<TrainSample> out;
  for (const DatasetEntry& e : ds.entries) {
    if (e.split != split) continue;
    TrainSample s;
    s.partial = load_xyz((ds.root / e.partial_path).string());
    s.complete = load_xyz((ds.root / e.complete_path).string());
    s.category = e.category;
    out.push_back(std::move(s));
  }
  if (out.empty())
    throw ValidationError("dataset has no '" + split + "' entries");
  return out;
}

std::pair<PointCloud, PointCloud> pretrain_pair(PretrainVariant variant,
                                                const TrainSample& sample,
                                                double gamma, Rng& rng,
                                                long batch_index) {
  const PointCloud& partial = sample.partial;
  auto need_complete = [&sample]() -> const PointCloud& {
    if (sample.complete.size() < 1)
      throw ValidationError("pretrain variant needs complete clouds");
    return sample.complete;
  };
  switch (variant) {
    case PretrainVariant::kMirroredToC: {
      PointCloud in = partial;
      const Index axis = static_cast<Index>(rng.uniform_int(3));
      in.points.col(axis) = -in.points.col(axis);
      return {std::move(in), need_complete()};
    }
    case PretrainVariant::kJitteredToC: {
      PointCloud in = partial;
      for (Index r = 0; r < in.points.rows(); ++r)
        for (Index c = 0; c < 3; ++c) in.points(r, c) += 0.01 * rng.normal();
      return {std::move(in), need_complete()};
    }
    case PretrainVariant::kIToC:
      return {partial, need_complete()};
    case PretrainVariant::kIToI:
      return {partial, partial};
    case PretrainVariant::kIoiToC: {
      PretrainPair p = make_pretrain_pair(partial, gamma, rng);
      return {std::move(p.input), need_complete()};
    }
    case PretrainVariant::kIoiToI: {
      PretrainPair p = make_pretrain_pair(partial, gamma, rng);
      return {std::move(p.input), std::move(p.target)};
    }
    case PretrainVariant::kHybridParallel: {
      PretrainPair first = make_pretrain_pair(partial, gamma, rng);
      if (batch_index % 2 == 0)
        return {std::move(first.input), std::move(first.target)};
      PretrainPair second = make_pretrain_pair(first.input, gamma, rng);
      return {std::move(second.input), std::move(second.target)};
    }
  }
  throw ValidationError("bad pretrain variant");
}

namespace {

using PairMaker =
    std::function<std::pair<PointCloud, PointCloud>(const TrainSample&, Rng&,
                                                    long)>;

GenTrainResult train_generator(const TrainConfig& cfg,
                               const std::vector<TrainSample>& data,
                               GenParams init, const PairMaker& make_pair,
                               const char* stage) {
  cfg.validate();
  init.validate();
  if (data.empty())
    throw ValidationError(std::string(stage) + ": empty dataset");

  GenTrainResult res{std::move(init), {}};
  std::map<std::string, Mat*> params;
  visit_params(res.gen, "gen",
               [&params](const std::string& n, Mat& m) { params[n] = &m; });
  AdamState state;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long batch_index = 0;

  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::uint64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.batch_size),
                   order.size() - start);
      std::map<std::string, Mat> grad_sum;
      for (std::size_t i = start; i < start + count; ++i) {
        const auto [input, target] =
            make_pair(data[order[i]], rng, batch_index);
        Graph g;
        NodeRef coords = g.constant(Tensor{Mat(input.points)});
        EncodeNodes enc = encode_node(g, res.gen, "gen", coords);
        NodeRef coarse = decode_coarse_node(g, res.gen, "gen", enc.global);
        NodeRef loss =
            cd_l2_node(g, coarse, g.constant(Tensor{Mat(target.points)}));
        g.mark_output("loss", loss);
        loss_sum += g.value(loss).scalar_value();
        for (auto& [name, grad] : g.gradients("loss")) {
          auto [it, fresh] = grad_sum.try_emplace(name, std::move(grad.values));
          if (!fresh) it->second += grad.values;
        }
      }
      for (auto& [name, grad] : grad_sum)
        grad /= static_cast<double>(count);
      adam_step(state, params, grad_sum, lr);
      ++batch_index;
    }
    res.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  return res;
}

}  // namespace

GenTrainResult pretrain_generation(const TrainConfig& cfg,
                                   PretrainVariant variant,
                                   const std::vector<TrainSample>& data,
                                   GenParams init) {
  return train_generator(
      cfg, data, std::move(init),
      [variant, &cfg](const TrainSample& s, Rng& rng, long batch) {
        return pretrain_pair(variant, s, cfg.gamma, rng, batch);
      },
      "pretrain");
}

GenTrainResult finetune_generation(const TrainConfig& cfg,
                                   const std::vector<TrainSample>& data,
                                   GenParams init) {
  return train_generator(
      cfg, data, std::move(init),
      [](const TrainSample& s, Rng&, long) {
        if (s.complete.size() < 1)
          throw ValidationError("finetune: sample without complete cloud");
        return std::make_pair(s.partial, s.complete);
      },
      "finetune");
}

ScrTrainResult train_refinement(const TrainConfig& cfg,
                                const std::vector<TrainSample>& data,
                                const GenParams& gen, ScrNet init) {
  cfg.validate();
  gen.validate();
  init.validate();
  if (data.empty()) throw ValidationError("refine: empty dataset");

  ScrTrainResult res{std::move(init), {}};
  ScrNet& net = res.net;

  // The generator is frozen, so its outputs and the per-unit targets are
  // fixed; compute them once.
  struct Prep {
    PointCloud coarse;
    Tensor pointwise;
    Tensor global;
    Tensor cond;
    std::vector<Mat> targets;  // one per unit
  };
  std::vector<Prep> preps;
  preps.reserve(data.size());
  Rng target_rng(Seed{cfg.seed.value ^ 0x9E3779B97F4A7C15ull});
  for (const TrainSample& sample : data) {
    Prep prep;
    EncodeResult enc = encode(gen, sample.partial);
    prep.coarse = decode_coarse(gen, enc.global);
    prep.coarse.category = sample.category;
    // Features per coarse point, from the same frozen encoder.
    prep.pointwise = std::move(encode(gen, prep.coarse).pointwise);
    prep.global = std::move(enc.global);
    const CategoryLabel label = CategoryLabel::of(sample.category, net.c_cate);
    prep.cond = resolve_condition(net, label, prep.global, LabelMode::kCorrect,
                                  nullptr);
    Index resolution = prep.coarse.size();
    for (const RefinementUnit& unit : net.units) {
      resolution *= unit.u;
      if (resolution > sample.complete.size())
        throw ValidationError(
            "refine: unit resolution " + std::to_string(resolution) +
            " exceeds ground truth size " +
            std::to_string(sample.complete.size()));
      if (resolution == sample.complete.size())
        prep.targets.emplace_back(sample.complete.points);
      else
        prep.targets.emplace_back(
            farthest_point_sample(sample.complete, resolution,
                                  Seed{target_rng.next_u64()})
                .points);
    }
    preps.push_back(std::move(prep));
  }

  std::map<std::string, Mat*> params;
  visit_params(net, "scr",
               [&params](const std::string& n, Mat& m) { params[n] = &m; });
  AdamState state;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::uint64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.batch_size),
                   order.size() - start);
      std::map<std::string, Mat> grad_sum;
      for (std::size_t i = start; i < start + count; ++i) {
        const Prep& prep = preps[order[i]];
        Graph g;
        ScrBuild build = scr_node(g, net, "scr", prep.coarse, prep.pointwise,
                                  prep.global, prep.cond);
        NodeRef loss{-1};
        for (std::size_t unit = 0; unit < build.clouds.size(); ++unit) {
          NodeRef term = cd_l2_node(g, build.clouds[unit],
                                    g.constant(Tensor{prep.targets[unit]}));
          loss = (unit == 0) ? term : g.add(loss, term);
        }
        g.mark_output("loss", loss);
        loss_sum += g.value(loss).scalar_value();
        for (auto& [name, grad] : g.gradients("loss")) {
          auto [it, fresh] = grad_sum.try_emplace(name, std::move(grad.values));
          if (!fresh) it->second += grad.values;
        }
      }
      for (auto& [name, grad] : grad_sum)
        grad /= static_cast<double>(count);
      adam_step(state, params, grad_sum, lr);
    }
    res.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  return res;
}

MetricReport evaluate(const GenParams& gen, const ScrNet* net,
                      const std::vector<TrainSample>& data, LabelMode mode,
                      Seed seed, double tau) {
  gen.validate();
  if (net) net->validate();
  if (data.empty()) throw ValidationError("evaluate: empty dataset");
  MetricReport report;
  Rng rng(seed);
  for (const TrainSample& sample : data) {
    EncodeResult enc = encode(gen, sample.partial);
    PointCloud pred = decode_coarse(gen, enc.global);
    pred.category = sample.category;
    if (net) {
      const CategoryLabel label =
          CategoryLabel::of(sample.category, net->c_cate);
      // Per-point features must align with the coarse rows, so the frozen
      // encoder runs on the coarse cloud; the global stays the partial's.
      std::vector<PointCloud> clouds =
          scr_forward(*net, pred, encode(gen, pred).pointwise, enc.global,
                      label, mode, &rng);
      pred = std::move(clouds.back());
    }
    const UnitSphereTransform frame = unit_sphere_transform(sample.complete);
    const PointCloud p = frame.apply(pred);
    const PointCloud gt = frame.apply(sample.complete);
    const PointCloud in = frame.apply(sample.partial);
    report.add(sample.category, chamfer_l1(p, gt), chamfer_l2(p, gt),
               fscore(p, gt, tau));
    report.add_fidelity(sample.category, fidelity(in, p));
  }
  report.finalize();
  return report;
}

// ---------------------------------------------------------------------------
// Model serialization

namespace {

std::string hexdouble(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void put_mlp(Checkpoint& ckpt, const std::string& prefix, const MlpParams& p) {
  std::string relu;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    ckpt.tensors[prefix + ".w" + std::to_string(i)] = p.layers[i].W;
    ckpt.tensors[prefix + ".b" + std::to_string(i)] = p.layers[i].b;
    if (i) relu += ",";
    relu += p.layers[i].relu ? "1" : "0";
  }
  ckpt.config[prefix + ".relu"] = relu;
}

MlpParams take_mlp(const Checkpoint& ckpt, const std::string& prefix) {
  const auto relu_it = ckpt.config.find(prefix + ".relu");
  if (relu_it == ckpt.config.end())
    throw ValidationError("checkpoint: missing MLP block '" + prefix + "'");
  std::vector<bool> relu;
  for (char c : relu_it->second) {
    if (c == '1')
      relu.push_back(true);
    else if (c == '0')
      relu.push_back(false);
    else if (c != ',')
      throw ValidationError("checkpoint: bad relu mask for '" + prefix + "'");
  }
  MlpParams p;
  for (std::size_t i = 0; i < relu.size(); ++i) {
    const auto w = ckpt.tensors.find(prefix + ".w" + std::to_string(i));
    const auto b = ckpt.tensors.find(prefix + ".b" + std::to_string(i));
    if (w == ckpt.tensors.end() || b == ckpt.tensors.end())
      throw ValidationError("checkpoint: missing layer " + std::to_string(i) +
                            " of '" + prefix + "'");
    p.layers.push_back(MlpLayer{w->second, b->second, relu[i]});
  }
  p.validate(prefix.c_str());
  return p;
}

void put_attention(Checkpoint& ckpt, const std::string& prefix,
                   const AttentionParams& p) {
  ckpt.tensors[prefix + ".wq"] = p.Wq;
  ckpt.tensors[prefix + ".wk"] = p.Wk;
  ckpt.tensors[prefix + ".wv"] = p.Wv;
  put_mlp(ckpt, prefix + ".pos", p.pos_mlp);
  put_mlp(ckpt, prefix + ".att", p.logits_mlp);
  put_mlp(ckpt, prefix + ".out", p.out_mlp);
  ckpt.config[prefix + ".k"] = std::to_string(p.k);
}

AttentionParams take_attention(const Checkpoint& ckpt,
                               const std::string& prefix) {
  AttentionParams p;
  auto tensor = [&ckpt, &prefix](const std::string& suffix) -> const Mat& {
    const auto it = ckpt.tensors.find(prefix + suffix);
    if (it == ckpt.tensors.end())
      throw ValidationError("checkpoint: missing tensor '" + prefix + suffix +
                            "'");
    return it->second;
  };
  p.Wq = tensor(".wq");
  p.Wk = tensor(".wk");
  p.Wv = tensor(".wv");
  p.pos_mlp = take_mlp(ckpt, prefix + ".pos");
  p.logits_mlp = take_mlp(ckpt, prefix + ".att");
  p.out_mlp = take_mlp(ckpt, prefix + ".out");
  p.k = cfg_int(ckpt.config, prefix + ".k", 0);
  p.validate();
  return p;
}

}  // namespace

Checkpoint generator_checkpoint(const GenParams& gen) {
  gen.validate();
  Checkpoint ckpt;
  ckpt.config["model"] = "generator";
  ckpt.config["m"] = std::to_string(gen.m);
  put_mlp(ckpt, "gen.enc", gen.encoder);
  put_mlp(ckpt, "gen.dec", gen.decoder);
  return ckpt;
}

GenParams generator_from_checkpoint(const Checkpoint& ckpt) {
  if (cfg_str(ckpt.config, "model", "") != "generator")
    throw ValidationError("checkpoint does not hold a generator");
  GenParams gen;
  gen.m = cfg_int(ckpt.config, "m", 0);
  gen.encoder = take_mlp(ckpt, "gen.enc");
  gen.decoder = take_mlp(ckpt, "gen.dec");
  gen.validate();
  return gen;
}

Checkpoint scr_checkpoint(const ScrNet& net) {
  net.validate();
  Checkpoint ckpt;
  ckpt.config["model"] = "scr";
  ckpt.config["c_cate"] = std::to_string(net.c_cate);
  ckpt.config["modulation"] = to_string(net.modulation);
  ckpt.config["semantics"] = to_string(net.semantics);
  ckpt.config["units"] = std::to_string(net.units.size());
  put_mlp(ckpt, "scr.k1", net.k1_proj);
  for (std::size_t i = 0; i < net.units.size(); ++i) {
    const RefinementUnit& unit = net.units[i];
    const std::string prefix = "scr.u" + std::to_string(i);
    ckpt.config[prefix + ".u"] = std::to_string(unit.u);
    std::string ks;
    for (std::size_t s = 0; s < unit.k_list.size(); ++s) {
      if (s) ks += ",";
      ks += std::to_string(unit.k_list[s]);
    }
    ckpt.config[prefix + ".k_list"] = ks;
    ckpt.config[prefix + ".use_sgm"] = unit.use_sgm ? "true" : "false";
    if (unit.use_sgm && net.modulation == Modulation::kSgm) {
      ckpt.tensors[prefix + ".sgm.A"] = unit.sgm.A;
      put_mlp(ckpt, prefix + ".sgm.scale", unit.sgm.scale_mlp);
      ckpt.config[prefix + ".sgm.eps"] = hexdouble(unit.sgm.eps);
    } else if (unit.use_sgm && net.modulation == Modulation::kAffination) {
      put_mlp(ckpt, prefix + ".aff.sigma", unit.affination.sigma);
      put_mlp(ckpt, prefix + ".aff.alpha", unit.affination.alpha_mlp);
      put_mlp(ckpt, prefix + ".aff.beta", unit.affination.beta_mlp);
    }
    put_mlp(ckpt, prefix + ".q", unit.q_mlp);
    for (std::size_t s = 0; s < unit.attn.size(); ++s)
      put_attention(ckpt, prefix + ".attn" + std::to_string(s), unit.attn[s]);
    put_mlp(ckpt, prefix + ".split", unit.split_mlp);
    put_mlp(ckpt, prefix + ".fuse", unit.fuse_mlp);
    put_mlp(ckpt, prefix + ".delta", unit.delta_head);
  }
  return ckpt;
}

ScrNet scr_from_checkpoint(const Checkpoint& ckpt) {
  if (cfg_str(ckpt.config, "model", "") != "scr")
    throw ValidationError("checkpoint does not hold a refinement net");
  ScrNet net;
  net.c_cate = cfg_int(ckpt.config, "c_cate", 0);
  net.modulation =
      modulation_from_string(cfg_str(ckpt.config, "modulation", ""));
  net.semantics = semantics_from_string(cfg_str(ckpt.config, "semantics", ""));
  net.k1_proj = take_mlp(ckpt, "scr.k1");
  const long units = cfg_int(ckpt.config, "units", 0);
  for (long i = 0; i < units; ++i) {
    const std::string prefix = "scr.u" + std::to_string(i);
    RefinementUnit unit;
    unit.u = cfg_int(ckpt.config, prefix + ".u", 0);
    unit.k_list = cfg_index_list(ckpt.config, prefix + ".k_list", {});
    unit.use_sgm = cfg_bool(ckpt.config, prefix + ".use_sgm", false);
    if (unit.use_sgm && net.modulation == Modulation::kSgm) {
      const auto a = ckpt.tensors.find(prefix + ".sgm.A");
      if (a == ckpt.tensors.end())
        throw ValidationError("checkpoint: missing tensor '" + prefix +
                              ".sgm.A'");
      unit.sgm.A = a->second;
      unit.sgm.scale_mlp = take_mlp(ckpt, prefix + ".sgm.scale");
      unit.sgm.eps = cfg_double(ckpt.config, prefix + ".sgm.eps", 1e-8);
    } else if (unit.use_sgm && net.modulation == Modulation::kAffination) {
      unit.affination.sigma = take_mlp(ckpt, prefix + ".aff.sigma");
      unit.affination.alpha_mlp = take_mlp(ckpt, prefix + ".aff.alpha");
      unit.affination.beta_mlp = take_mlp(ckpt, prefix + ".aff.beta");
    }
    unit.q_mlp = take_mlp(ckpt, prefix + ".q");
    for (std::size_t s = 0; s < unit.k_list.size(); ++s)
      unit.attn.push_back(
          take_attention(ckpt, prefix + ".attn" + std::to_string(s)));
    unit.split_mlp = take_mlp(ckpt, prefix + ".split");
    unit.fuse_mlp = take_mlp(ckpt, prefix + ".fuse");
    unit.delta_head = take_mlp(ckpt, prefix + ".delta");
    net.units.push_back(std::move(unit));
  }
  net.validate();
  return net;
}

}  // namespace cp3
