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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cp3/config.hpp"
#include "cp3/ioi.hpp"
#include "cp3/pipeline.hpp"

namespace {

using namespace cp3;

const std::vector<std::string> kKnownKeys = {
    "lr",          "decay_factor", "decay_every",   "epochs",
    "batch_size",  "gamma",        "seed",          "tau",
    "gen.c_pw",    "gen.hidden",   "gen.m",         "scr.c",
    "scr.multipliers", "scr.k_list", "scr.modulation", "scr.semantics",
    "scr.sgm_first_only", "scr.c_cate",
};

ConfigMap read_config(const std::string& path) {
  if (path.empty()) return {};
  ConfigMap cfg = parse_config_file(path);
  require_known_keys(cfg, kKnownKeys);
  return cfg;
}

TrainConfig train_config_from(const ConfigMap& cfg,
                              const std::optional<std::uint64_t>& seed_flag) {
  TrainConfig t;
  t.learning_rate = cfg_double(cfg, "lr", 1e-4);
  t.decay_factor = cfg_double(cfg, "decay_factor", 0.7);
  t.decay_every = cfg_int(cfg, "decay_every", 40);
  t.epochs = cfg_int(cfg, "epochs", 10);
  t.batch_size = cfg_int(cfg, "batch_size", 8);
  t.gamma = cfg_double(cfg, "gamma", 0.9);
  t.seed = Seed{static_cast<std::uint64_t>(cfg_int(cfg, "seed", 1))};
  if (seed_flag) t.seed = Seed{*seed_flag};
  t.validate();
  return t;
}

// Fresh-parameter draws come from a stream salted away from the shuffle and
// crop stream so both stay reproducible from one seed.
Rng init_rng(Seed seed) { return Rng(Seed{seed.value ^ 0x517CC1B727220A95ull}); }

GenParams fresh_generator(const ConfigMap& cfg, Seed seed) {
  Rng rng = init_rng(seed);
  return make_generator(cfg_int(cfg, "gen.c_pw", 32),
                        cfg_int(cfg, "gen.hidden", 64),
                        cfg_int(cfg, "gen.m", 256), rng);
}

int max_category(const std::vector<TrainSample>& samples) {
  int m = 0;
  for (const TrainSample& s : samples) m = std::max(m, s.category);
  return m;
}

ScrNet fresh_scr(const ConfigMap& cfg, const GenParams& gen, Index c_cate_data,
                 Seed seed) {
  ScrConfig sc;
  sc.c = cfg_int(cfg, "scr.c", 32);
  sc.global_width = gen.global_width();
  sc.pointwise_width = gen.pointwise_width();
  sc.c_cate = cfg_int(cfg, "scr.c_cate", c_cate_data);
  sc.multipliers = cfg_index_list(cfg, "scr.multipliers", {1, 2});
  sc.k_list = cfg_index_list(cfg, "scr.k_list", {12, 24});
  sc.modulation = modulation_from_string(cfg_str(cfg, "scr.modulation", "sgm"));
  sc.semantics = semantics_from_string(cfg_str(cfg, "scr.semantics", "category"));
  sc.sgm_first_only = cfg_bool(cfg, "scr.sgm_first_only", true);
  Rng rng = init_rng(Seed{seed.value ^ 0xD6E8FEB86659FD93ull});
  return make_scr(sc, rng);
}

void print_trace(const char* stage, const std::vector<double>& trace) {
  for (std::size_t e = 0; e < trace.size(); ++e)
    std::printf("%s epoch %zu: loss %.6g\n", stage, e, trace[e]);
}

int run_gradcheck() {
  struct Case {
    std::string name;
    double tolerance;
    GradCheckResult result;
  };
  std::vector<Case> cases;
  Rng rng(Seed{20260822});

  {  // category-conditioned filter applied to features, quadratic readout
    SgmParams sgm = make_sgm(4, 6, 5, rng);
    Mat k(8, 6);
    for (Index r = 0; r < k.rows(); ++r)
      for (Index c = 0; c < k.cols(); ++c) k(r, c) = rng.normal();
    Graph g;
    NodeRef cond = g.input("cond", Tensor{CategoryLabel::of(1, 4).one_hot});
    NodeRef kin = g.input("k", Tensor{k});
    NodeRef w = build_filter_node(g, sgm, "sgm", cond);
    NodeRef khat = sgm_apply_node(g, kin, w);
    g.mark_output("loss", g.sum_all(g.mul(khat, khat)));
    cases.push_back({"sgm_filter", 1e-5, gradcheck(g, "loss", 1e-5)});
  }
  {  // affination modulation
    AffinationParams aff = make_affination(4, 6, rng);
    Mat k(8, 6);
    for (Index r = 0; r < k.rows(); ++r)
      for (Index c = 0; c < k.cols(); ++c) k(r, c) = rng.normal();
    Graph g;
    NodeRef cond = g.input("cond", Tensor{CategoryLabel::of(2, 4).one_hot});
    NodeRef kin = g.input("k", Tensor{k});
    NodeRef khat = affination_node(g, aff, "aff", kin, cond);
    g.mark_output("loss", g.sum_all(g.mul(khat, khat)));
    cases.push_back({"affination", 1e-5, gradcheck(g, "loss")});
  }
  {  // neighborhood attention, N=16 k=4
    const Index n = 16, c = 6;
    AttentionParams attn = make_attention(c, c, c, 4, rng);
    Mat coords(n, 3), q(n, c), kf(n, c);
    for (Index r = 0; r < n; ++r) {
      for (Index j = 0; j < 3; ++j) coords(r, j) = rng.normal();
      for (Index j = 0; j < c; ++j) q(r, j) = 0.5 * rng.normal();
      for (Index j = 0; j < c; ++j) kf(r, j) = 0.5 * rng.normal();
    }
    Graph g;
    NodeRef pr = g.input("p", Tensor{coords});
    NodeRef qr = g.input("q", Tensor{q});
    NodeRef kr = g.input("kf", Tensor{kf});
    NodeRef h = vector_attention(g, attn, "attn", pr, qr, kr);
    g.mark_output("loss", g.sum_all(g.mul(h, h)));
    cases.push_back({"vector_attention", 1e-5, gradcheck(g, "loss", 1e-5)});
  }
  {  // point-wise splitting through a purely linear path
    const Index n = 5, w = 4, u = 3;
    MlpParams split = make_mlp({w, u * w}, rng);
    Mat h(n, w);
    for (Index r = 0; r < n; ++r)
      for (Index j = 0; j < w; ++j) h(r, j) = rng.normal();
    Graph g;
    NodeRef hr = g.input("h", Tensor{h});
    NodeRef out = pointwise_split_node(g, split, "split", hr, u);
    g.mark_output("loss", g.sum_all(g.mul(out, out)));
    cases.push_back({"pointwise_split", 1e-6, gradcheck(g, "loss")});
  }
  {  // two refinement units end to end against a chamfer loss
    ScrConfig sc;
    sc.c = 8;
    sc.global_width = 8;
    sc.pointwise_width = 8;
    sc.c_cate = 2;
    sc.multipliers = {1, 2};
    sc.k_list = {4};
    ScrNet net = make_scr(sc, rng);
    // Fresh delta heads leave upsampled copies coincident, parking the
    // chamfer min on an exact tie; audit at a generic point instead.
    visit_params(net, "scr", [&rng](const std::string& name, Mat& value) {
      if (name.find(".delta.") == std::string::npos) return;
      for (Index r = 0; r < value.rows(); ++r)
        for (Index c = 0; c < value.cols(); ++c)
          value(r, c) = 0.3 * rng.normal();
    });
    const Index n = 16;
    PointCloud coarse;
    coarse.points.resize(n, 3);
    Mat pw(n, 8), glob(1, 8), target(2 * n, 3);
    for (Index r = 0; r < n; ++r) {
      for (Index j = 0; j < 3; ++j) coarse.points(r, j) = rng.normal();
      for (Index j = 0; j < 8; ++j) pw(r, j) = 0.5 * rng.normal();
    }
    for (Index j = 0; j < 8; ++j) glob(0, j) = 0.5 * rng.normal();
    for (Index r = 0; r < 2 * n; ++r)
      for (Index j = 0; j < 3; ++j) target(r, j) = rng.normal();
    Graph g;
    ScrBuild build =
        scr_node(g, net, "scr", coarse, Tensor{pw}, Tensor{glob},
                 Tensor{CategoryLabel::of(0, 2).one_hot});
    g.mark_output("loss",
                  cd_l2_node(g, build.clouds.back(), g.constant(Tensor{target})));
    cases.push_back({"scr_two_units", 1e-4, gradcheck(g, "loss", 3e-5)});
  }

  bool ok = true;
  for (const Case& c : cases) {
    const bool pass = c.result.max_rel_error <= c.tolerance;
    ok = ok && pass;
    std::printf("%-18s max_rel_error %.3e (tol %.0e, checked %ld, skipped %ld) %s\n",
                c.name.c_str(), c.result.max_rel_error, c.tolerance,
                c.result.checked, c.result.skipped, pass ? "PASS" : "FAIL");
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coarse-to-fine point cloud completion pipeline"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--seed", seed_flag,
                 "override the config seed for any subcommand")
      ->expected(1);

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "write a synthetic dataset");
  std::string gd_out;
  long gd_per_category = 50;
  long gd_n_full = 256;
  double gd_train_frac = 0.8;
  gen_data->add_option("--out", gd_out, "output directory")->required();
  gen_data->add_option("--per-category", gd_per_category, "shapes per category");
  gen_data->add_option("--n-full", gd_n_full, "points per complete cloud");
  gen_data->add_option("--train-frac", gd_train_frac, "train split fraction");
  gen_data->callback([&] {
    const Seed seed{seed_flag.value_or(1)};
    const auto specs = default_dataset_specs(gd_n_full, gd_per_category, seed);
    const auto manifest = build_dataset(specs, gd_train_frac, seed, gd_out);
    std::printf("wrote %zu pairs, manifest %s\n", specs.size(),
                manifest.string().c_str());
  });

  // ioi-sample
  auto* ioi = app.add_subcommand("ioi-sample",
                                 "crop a cloud with the self-supervised task");
  std::string ioi_in, ioi_kept, ioi_dropped;
  double ioi_gamma = 0.9;
  ioi->add_option("--in", ioi_in, "input XYZ file")->required();
  ioi->add_option("--out-kept", ioi_kept, "kept-points XYZ file")->required();
  ioi->add_option("--out-dropped", ioi_dropped, "dropped-points XYZ file")
      ->required();
  ioi->add_option("--gamma", ioi_gamma, "crop-rate ceiling");
  ioi->callback([&] {
    const PointCloud cloud = load_xyz(ioi_in);
    Rng rng(Seed{seed_flag.value_or(1)});
    const CropPlane plane = sample_crop_plane(rng);
    const double r = rng.uniform(0.0, ioi_gamma);
    const CropResult crop = ioi_crop(cloud, r, plane);
    save_xyz(crop.kept, ioi_kept);
    save_xyz(crop.dropped, ioi_dropped);
    std::printf("rate %.4f theta %.4f phi %.4f kept %lld dropped %lld\n", r,
                plane.theta, plane.phi,
                static_cast<long long>(crop.kept.size()),
                static_cast<long long>(crop.dropped.size()));
  });

  // pretrain
  auto* pre = app.add_subcommand("pretrain",
                                 "self-supervised generator pretraining");
  std::string pre_data, pre_out, pre_config, pre_variant = "crop-to-partial";
  pre->add_option("--data", pre_data, "dataset manifest")->required();
  pre->add_option("--out", pre_out, "output checkpoint")->required();
  pre->add_option("--config", pre_config, "flat key = value config file");
  pre->add_option("--variant", pre_variant, "pretext task variant");
  pre->callback([&] {
    const ConfigMap cfg = read_config(pre_config);
    const TrainConfig tc = train_config_from(cfg, seed_flag);
    const auto samples = load_samples(load_manifest(pre_data), "train");
    GenParams init = fresh_generator(cfg, tc.seed);
    GenTrainResult res = pretrain_generation(
        tc, pretrain_variant_from_string(pre_variant), samples,
        std::move(init));
    print_trace("pretrain", res.epoch_loss);
    save_checkpoint(generator_checkpoint(res.gen), pre_out);
    std::printf("saved %s\n", pre_out.c_str());
  });

  // finetune
  auto* fin = app.add_subcommand("finetune",
                                 "train the generator on pairs");
  std::string fin_data, fin_out, fin_config, fin_init;
  fin->add_option("--data", fin_data, "dataset manifest")->required();
  fin->add_option("--out", fin_out, "output checkpoint")->required();
  fin->add_option("--config", fin_config, "flat key = value config file");
  fin->add_option("--init", fin_init, "initial generator checkpoint");
  fin->callback([&] {
    const ConfigMap cfg = read_config(fin_config);
    const TrainConfig tc = train_config_from(cfg, seed_flag);
    const auto samples = load_samples(load_manifest(fin_data), "train");
    GenParams init = fin_init.empty()
                         ? fresh_generator(cfg, tc.seed)
                         : generator_from_checkpoint(load_checkpoint(fin_init));
    GenTrainResult res = finetune_generation(tc, samples, std::move(init));
    print_trace("finetune", res.epoch_loss);
    save_checkpoint(generator_checkpoint(res.gen), fin_out);
    std::printf("saved %s\n", fin_out.c_str());
  });

  // refine
  auto* ref = app.add_subcommand("refine",
                                 "train refinement against a frozen generator");
  std::string ref_data, ref_gen, ref_out, ref_config;
  ref->add_option("--data", ref_data, "dataset manifest")->required();
  ref->add_option("--gen", ref_gen, "generator checkpoint")->required();
  ref->add_option("--out", ref_out, "output refinement checkpoint")->required();
  ref->add_option("--config", ref_config, "flat key = value config file");
  ref->callback([&] {
    const ConfigMap cfg = read_config(ref_config);
    const TrainConfig tc = train_config_from(cfg, seed_flag);
    const auto samples = load_samples(load_manifest(ref_data), "train");
    const GenParams gen = generator_from_checkpoint(load_checkpoint(ref_gen));
    ScrNet init = fresh_scr(cfg, gen, max_category(samples) + 1, tc.seed);
    ScrTrainResult res = train_refinement(tc, samples, gen, std::move(init));
    print_trace("refine", res.epoch_loss);
    save_checkpoint(scr_checkpoint(res.net), ref_out);
    std::printf("saved %s\n", ref_out.c_str());
  });

  // eval
  auto* ev = app.add_subcommand("eval", "score a model on a dataset split");
  std::string ev_data, ev_gen, ev_scr, ev_split = "val", ev_mode = "correct";
  std::string ev_csv;
  double ev_tau = 0.01;
  ev->add_option("--data", ev_data, "dataset manifest")->required();
  ev->add_option("--gen", ev_gen, "generator checkpoint")->required();
  ev->add_option("--scr", ev_scr, "refinement checkpoint (coarse-only if absent)");
  ev->add_option("--split", ev_split, "manifest split to score");
  ev->add_option("--label-mode", ev_mode, "correct | random");
  ev->add_option("--csv", ev_csv, "also write the report as CSV");
  ev->add_option("--tau", ev_tau, "f-score distance threshold");
  ev->callback([&] {
    const auto samples = load_samples(load_manifest(ev_data), ev_split);
    const GenParams gen = generator_from_checkpoint(load_checkpoint(ev_gen));
    ScrNet net;
    const bool with_net = !ev_scr.empty();
    if (with_net) net = scr_from_checkpoint(load_checkpoint(ev_scr));
    LabelMode mode;
    if (ev_mode == "correct")
      mode = LabelMode::kCorrect;
    else if (ev_mode == "random")
      mode = LabelMode::kRandom;
    else
      throw ValidationError("bad --label-mode '" + ev_mode + "'");
    const MetricReport report =
        evaluate(gen, with_net ? &net : nullptr, samples, mode,
                 Seed{seed_flag.value_or(1)}, ev_tau);
    std::fputs(report.to_table().c_str(), stdout);
    if (!ev_csv.empty()) {
      std::ofstream csv(ev_csv);
      if (!csv) throw std::runtime_error("cannot write " + ev_csv);
      csv << report.to_csv();
    }
  });

  // gradcheck
  int gradcheck_rc = 0;
  auto* gc = app.add_subcommand(
      "gradcheck", "finite-difference audit of the trainable blocks");
  gc->callback([&] { gradcheck_rc = run_gradcheck(); });

  // export-plot
  auto* ex = app.add_subcommand(
      "export-plot", "write partial/coarse/refined XYZ triplets");
  std::string ex_data, ex_gen, ex_scr, ex_out, ex_split = "val";
  long ex_count = 4;
  ex->add_option("--data", ex_data, "dataset manifest")->required();
  ex->add_option("--gen", ex_gen, "generator checkpoint")->required();
  ex->add_option("--scr", ex_scr, "refinement checkpoint");
  ex->add_option("--out", ex_out, "output directory")->required();
  ex->add_option("--split", ex_split, "manifest split");
  ex->add_option("--count", ex_count, "clouds to export");
  ex->callback([&] {
    const auto samples = load_samples(load_manifest(ex_data), ex_split);
    const GenParams gen = generator_from_checkpoint(load_checkpoint(ex_gen));
    ScrNet net;
    const bool with_net = !ex_scr.empty();
    if (with_net) net = scr_from_checkpoint(load_checkpoint(ex_scr));
    std::filesystem::create_directories(ex_out);
    Rng rng(Seed{seed_flag.value_or(1)});
    const std::size_t n =
        std::min(static_cast<std::size_t>(ex_count), samples.size());
    for (std::size_t i = 0; i < n; ++i) {
      const TrainSample& s = samples[i];
      EncodeResult enc = encode(gen, s.partial);
      PointCloud coarse = decode_coarse(gen, enc.global);
      coarse.category = s.category;
      const std::string stem =
          ex_out + "/sample" + std::to_string(i) + "_c" +
          std::to_string(s.category);
      save_xyz(s.partial, stem + "_partial.xyz");
      save_xyz(coarse, stem + "_coarse.xyz");
      if (with_net) {
        const CategoryLabel label = CategoryLabel::of(s.category, net.c_cate);
        auto clouds = scr_forward(net, coarse, encode(gen, coarse).pointwise,
                                  enc.global, label, LabelMode::kCorrect, &rng);
        save_xyz(clouds.back(), stem + "_refined.xyz");
      }
    }
    std::printf("exported %zu clouds to %s\n", n, ex_out.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const cp3::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return gradcheck_rc;
}
