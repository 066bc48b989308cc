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

#ifndef CP3_PIPELINE_HPP_
#define CP3_PIPELINE_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cp3/checkpoint.hpp"
#include "cp3/metrics.hpp"
#include "cp3/scr.hpp"
#include "cp3/synthdata.hpp"

namespace cp3 {

// The three-stage training protocol: self-supervised pretraining of the
// generator on partial clouds alone, fine-tuning it on (partial, complete)
// pairs, then training the refinement stack against a frozen generator.

struct TrainConfig {
  double learning_rate = 1e-4;
  double decay_factor = 0.7;
  long decay_every = 40;
  long epochs = 0;
  long batch_size = 8;
  double gamma = 0.9;  // crop-rate ceiling for the self-supervised task
  Seed seed;

  void validate() const;
};

// Piecewise-constant schedule: learning_rate * decay_factor^(epoch / every).
double lr_at(const TrainConfig& cfg, long epoch);

struct AdamState {
  std::map<std::string, Mat> m;
  std::map<std::string, Mat> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over named tensors. Every gradient must be finite and
// match its parameter's shape; unknown names are an error. Parameters
// without a gradient entry stay untouched.
void adam_step(AdamState& state, const std::map<std::string, Mat*>& params,
               const std::map<std::string, Mat>& grads, double lr);

enum class PretrainVariant {
  kMirroredToC,
  kJitteredToC,
  kIToC,
  kIToI,
  kIoiToC,
  kHybridParallel,
  kIoiToI,  // default
};

PretrainVariant pretrain_variant_from_string(const std::string& s);
std::string to_string(PretrainVariant v);

struct TrainSample {
  PointCloud partial;
  PointCloud complete;
  int category = 0;
};

// Materialize one split ("train" / "val") from a manifest on disk.
std::vector<TrainSample> load_samples(const Dataset& ds,
                                      const std::string& split);

// The (input, target) pair a pretraining variant trains on for one sample.
// Hybrid alternates by batch index: even batches train crop(I) -> I, odd
// batches train crop(crop(I)) -> crop(I).
std::pair<PointCloud, PointCloud> pretrain_pair(PretrainVariant variant,
                                                const TrainSample& sample,
                                                double gamma, Rng& rng,
                                                long batch_index);

struct GenTrainResult {
  GenParams gen;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

struct ScrTrainResult {
  ScrNet net;
  std::vector<double> epoch_loss;
};

GenTrainResult pretrain_generation(const TrainConfig& cfg,
                                   PretrainVariant variant,
                                   const std::vector<TrainSample>& data,
                                   GenParams init);

GenTrainResult finetune_generation(const TrainConfig& cfg,
                                   const std::vector<TrainSample>& data,
                                   GenParams init);

// Trains the refinement stack; the generator is only evaluated, never
// differentiated, so its parameters are bitwise untouched. Per-unit targets
// are farthest-point subsets of the ground truth at each unit's resolution.
ScrTrainResult train_refinement(const TrainConfig& cfg,
                                const std::vector<TrainSample>& data,
                                const GenParams& gen, ScrNet init);

// Per-category metric report over a dataset. With net == nullptr the coarse
// generator output is scored directly. Predictions and ground truth are
// placed in the ground truth's unit-sphere frame before measuring; fidelity
// is measured against the (identically transformed) input partial.
MetricReport evaluate(const GenParams& gen, const ScrNet* net,
                      const std::vector<TrainSample>& data, LabelMode mode,
                      Seed seed, double tau = 0.01);

// Model serialization on the shared checkpoint container.
Checkpoint generator_checkpoint(const GenParams& gen);
GenParams generator_from_checkpoint(const Checkpoint& ckpt);
Checkpoint scr_checkpoint(const ScrNet& net);
ScrNet scr_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cp3

#endif  // CP3_PIPELINE_HPP_
