/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "georoute/artifacts.hpp"
#include "georoute/experiment.hpp"
#include "georoute/synthbench.hpp"
#include "georoute/trainer.hpp"

namespace georoute {
namespace {

std::vector<double> values(const Array& a) { return {a.data().begin(), a.data().end()}; }

BatchRequest request(std::size_t sequences, std::uint64_t index, std::vector<double> mix = {},
                     std::vector<std::size_t> layers = {}) {
  return {sequences, index, std::move(mix), std::move(layers)};
}

SceneSpec small_scene() {
  SceneSpec s;
  s.total_depth = 8;
  s.num_tokens = 6;
  s.raw_width = 5;
  s.query_width = 6;
  s.num_tasks = 2;
  s.planted_layers = {3, 6};
  s.seed = 11;
  return s;
}

TEST(Scene, Validation) {
  SceneSpec s = small_scene();
  EXPECT_NO_THROW(s.validate());
  s.num_tasks = 7;
  s.planted_layers = {0, 1, 2, 3, 4, 5, 6};
  EXPECT_THROW(s.validate(), PreconditionError);  // more tasks than query width
  s = small_scene();
  s.planted_layers = {3, 8};
  EXPECT_THROW(s.validate(), PreconditionError);
  s = small_scene();
  s.planted_layers = {3};
  EXPECT_THROW(s.validate(), PreconditionError);
  s = small_scene();
  s.attenuation_tau = 0.0;
  EXPECT_THROW(s.validate(), PreconditionError);
  s = small_scene();
  s.raw_width = 2;
  EXPECT_THROW(s.validate(), PreconditionError);
}

TEST(Scene, AmplitudeAndGain) {
  SceneSpec s;
  EXPECT_EQ(signal_amplitude(s, 22, 3), 1.0);
  EXPECT_DOUBLE_EQ(signal_amplitude(s, 21, 3), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(signal_amplitude(s, 23, 3), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(signal_amplitude(s, 13, 1), std::exp(-3.0));
  s.attenuation_tau = 2.0;
  EXPECT_DOUBLE_EQ(signal_amplitude(s, 20, 3), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(layer_gain(s, 0), 1.0);
  EXPECT_DOUBLE_EQ(layer_gain(s, 12), 1.5);
}

TEST(Generator, ShapesAndDeterminism) {
  SceneSpec s = small_scene();
  SyntheticBatch a = generate_batch(s, request(3, 5));
  SyntheticBatch b = generate_batch(s, request(3, 5));
  EXPECT_EQ(a.num_rows(), 18u);
  EXPECT_EQ(a.seq_len, 6u);
  EXPECT_EQ(a.num_sequences, 3u);
  EXPECT_EQ(a.raw_layers.size(), 8u);
  EXPECT_EQ(a.queries.shape(), (Shape{18, 6}));
  EXPECT_EQ(a.targets.shape(), (Shape{18, 1}));
  EXPECT_EQ(a.raw_layers[4].values.shape(), (Shape{18, 5}));
  EXPECT_EQ(a.task_of_token, b.task_of_token);
  EXPECT_EQ(values(a.queries), values(b.queries));
  EXPECT_EQ(values(a.targets), values(b.targets));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(values(a.raw_layers[i].values), values(b.raw_layers[i].values));

  SyntheticBatch c = generate_batch(s, request(3, 6));
  EXPECT_NE(values(a.targets), values(c.targets));
  s.seed = 12;
  EXPECT_NE(values(a.targets), values(generate_batch(s, request(3, 5)).targets));
}

TEST(Generator, LayerSubsetMatchesFullBatch) {
  SceneSpec s = small_scene();
  SyntheticBatch full = generate_batch(s, request(2, 9));
  SyntheticBatch subset = generate_batch(s, request(2, 9, {}, {6, 1}));
  ASSERT_EQ(subset.raw_layers.size(), 2u);
  EXPECT_EQ(subset.raw_layers[0].layer_index, 6u);
  EXPECT_EQ(values(subset.raw_layers[0].values), values(full.raw_layers[6].values));
  EXPECT_EQ(values(subset.raw_layers[1].values), values(full.raw_layers[1].values));
  EXPECT_EQ(values(subset.targets), values(full.targets));
  EXPECT_THROW(generate_batch(s, request(2, 9, {}, {8})), PreconditionError);
}

TEST(Generator, TaskMix) {
  SceneSpec s = small_scene();
  SyntheticBatch b = generate_batch(s, request(20, 0, {0.0, 1.0}));
  for (std::size_t t : b.task_of_token) EXPECT_EQ(t, 1u);
  EXPECT_THROW(generate_batch(s, request(1, 0, {1.0})), PreconditionError);
  EXPECT_THROW(generate_batch(s, request(0, 0)), PreconditionError);
}

TEST(Generator, NoiselessPlantedLayerCarriesTargetExactly) {
  SceneSpec s = small_scene();
  s.noise_sigma = 0.0;
  SyntheticBatch b = generate_batch(s, request(4, 1));
  for (std::size_t r = 0; r < b.num_rows(); ++r) {
    const std::size_t t = b.task_of_token[r];
    const double target = b.targets.data()[r];
    EXPECT_NEAR(read_signal_channel(s, b.raw_layers[s.planted_layers[t]], r), target, 1e-12);
  }
}

TEST(Generator, NoiselessQueriesAreOneHotTasks) {
  SceneSpec s = small_scene();
  s.noise_sigma = 0.0;
  SyntheticBatch b = generate_batch(s, request(2, 3));
  for (std::size_t r = 0; r < b.num_rows(); ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(b.queries(r, c), c == b.task_of_token[r] ? 1.0 : 0.0);
}

TEST(Generator, ChannelStatisticsMatchOracle) {
  // Reading layer i for task t gives error (a - 1)·s + (1 - a)·z + noise with
  // independent unit-variance s and z, so its mean square is
  // 2(1 - a)² + sigma²/2.
  SceneSpec s;
  s.noise_sigma = 0.05;
  SyntheticBatch b = generate_batch(s, request(256, 3, {}, {22}));
  std::vector<double> sse(4, 0.0), count(4, 0.0);
  double target_sq = 0.0;
  for (std::size_t r = 0; r < b.num_rows(); ++r) {
    const double err = read_signal_channel(s, b.raw_layers[0], r) - b.targets.data()[r];
    sse[b.task_of_token[r]] += err * err;
    count[b.task_of_token[r]] += 1.0;
    target_sq += b.targets.data()[r] * b.targets.data()[r];
  }
  ASSERT_GE(b.num_rows(), 10000u);
  EXPECT_NEAR(target_sq / b.num_rows(), 1.0, 0.03);
  for (std::size_t t = 0; t < 4; ++t) {
    const double a = signal_amplitude(s, 22, t);
    const double expected = 2.0 * (1.0 - a) * (1.0 - a) + s.noise_sigma * s.noise_sigma / 2.0;
    EXPECT_NEAR(sse[t] / count[t], expected, 0.05 * expected) << "task " << t;
    EXPECT_NEAR(count[t] / b.num_rows(), 0.25, 0.02);
  }
}

BackboneConfig small_backbone(std::size_t blocks) {
  BackboneConfig c;
  c.blocks = blocks;
  c.width = 6;
  c.hidden = 5;
  c.num_tasks = 2;
  return c;
}

TEST(Backbone, NoBlocksIsLinearHeadPerTask) {
  std::mt19937_64 rng(1);
  ToyBackbone bb = ToyBackbone::init(small_backbone(0), rng);
  for (double& v : bb.head_b.mutable_data()) v = std::normal_distribution<double>(0.0, 1.0)(rng);
  Array x = Array::normal({4, 6}, 1.0, rng);
  std::vector<std::size_t> tasks{0, 1, 1, 0};
  auto pred = values(backbone_forward(bb, x, tasks, 2));
  for (std::size_t r = 0; r < 4; ++r) {
    double expected = bb.head_b.data()[tasks[r]];
    for (std::size_t c = 0; c < 6; ++c) expected += x(r, c) * bb.head_w(c, tasks[r]);
    EXPECT_NEAR(pred[r], expected, 1e-12);
  }
  // With no blocks the injection sees the raw tokens.
  auto doubled = values(backbone_forward(bb, x, tasks, 2, [](const Array& h) { return scale(h, 2.0); }));
  auto twice = values(backbone_forward(bb, scale(x, 2.0), tasks, 2));
  EXPECT_EQ(doubled, twice);
}

TEST(Backbone, InjectionPoint) {
  std::mt19937_64 rng(2);
  for (std::size_t at = 0; at <= 3; ++at) {
    BackboneConfig c = small_backbone(3);
    c.injection_index = at;
    ToyBackbone bb = ToyBackbone::init(c, rng);
    Array x = Array::normal({6, 6}, 1.0, rng);
    std::vector<std::size_t> tasks{0, 1, 0, 1, 1, 0};
    auto plain = values(backbone_forward(bb, x, tasks, 3));
    auto identity = values(backbone_forward(bb, x, tasks, 3, [](const Array& h) { return h; }));
    EXPECT_EQ(plain, identity);
    std::size_t seen = 0;
    backbone_forward(bb, x, tasks, 3, [&](const Array& h) {
      ++seen;
      if (at == 0) {
        EXPECT_EQ(values(h), values(x));
      }
      return h;
    });
    EXPECT_EQ(seen, 1u);
  }
  BackboneConfig bad = small_backbone(2);
  bad.injection_index = 3;
  EXPECT_THROW(ToyBackbone::init(bad, rng), PreconditionError);
}

TEST(Backbone, SequencesDoNotInteract) {
  std::mt19937_64 rng(3);
  ToyBackbone bb = ToyBackbone::init(small_backbone(2), rng);
  for (auto& np : bb.named_parameters())
    for (double& v : np.array.mutable_data()) v = std::normal_distribution<double>(0.0, 0.5)(rng);
  Array x = Array::normal({6, 6}, 1.0, rng);
  std::vector<std::size_t> tasks{0, 1, 0, 1, 1, 0};
  auto base = values(backbone_forward(bb, x, tasks, 3));
  std::vector<double> changed = values(x);
  for (std::size_t i = 18; i < 36; ++i) changed[i] += 1.0;
  auto after = values(backbone_forward(bb, Array::from({6, 6}, changed), tasks, 3));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(after[r], base[r]);
  bool context_used = false;
  for (std::size_t r = 3; r < 6; ++r) context_used |= after[r] != base[r];
  EXPECT_TRUE(context_used);
}

TEST(Model, InitIsolatesBackboneFromFusionVariant) {
  FusionConfig f;
  f.total_depth = 8;
  f.m = 4;
  f.single_layer = 6;
  f.raw_width = 5;
  f.width = 6;
  BackboneConfig b = small_backbone(2);
  ToyModel dyn = init_model(f, b, 9);
  f.variant = Variant::Mean;
  ToyModel mean = init_model(f, b, 9);
  auto pd = dyn.backbone.named_parameters(), pm = mean.backbone.named_parameters();
  ASSERT_EQ(pd.size(), pm.size());
  for (std::size_t i = 0; i < pd.size(); ++i) EXPECT_EQ(values(pd[i].array), values(pm[i].array));
  b.width = 7;
  EXPECT_THROW(init_model(f, b, 9), PreconditionError);
}

TEST(Model, ZeroInitFusionMatchesTwoDOnly) {
  SceneSpec s = small_scene();
  FusionConfig f;
  f.total_depth = 8;
  f.m = 4;
  f.single_layer = 6;
  f.raw_width = 5;
  f.width = 6;
  BackboneConfig b = small_backbone(2);
  b.injection_index = 1;
  SyntheticBatch batch = generate_batch(s, request(2, 0));
  ToyModel dyn = init_model(f, b, 4);
  f.variant = Variant::TwoDOnly;
  ToyModel plain = init_model(f, b, 4);
  ModelOutput a = model_forward(dyn, batch), c = model_forward(plain, batch);
  EXPECT_EQ(values(a.predictions), values(c.predictions));
  EXPECT_TRUE(a.plan.has_value());
  EXPECT_FALSE(c.plan.has_value());
  EXPECT_EQ(a.plan->weights.dim(0), batch.num_rows());
}

TEST(Metrics, Examples) {
  SyntheticBatch batch;
  batch.num_tasks = 3;
  batch.task_of_token = {0, 0, 1, 1};
  batch.targets = Array::from({4, 1}, {1, 1, 0, 0});
  TaskMetrics m = task_metrics(Array::from({4, 1}, {1, 1, 1, 1}), batch);
  ASSERT_EQ(m.per_task_mse.size(), 3u);
  EXPECT_EQ(*m.per_task_mse[0], 0.0);
  EXPECT_EQ(*m.per_task_mse[1], 1.0);
  EXPECT_FALSE(m.per_task_mse[2].has_value());
  EXPECT_EQ(m.aggregate, 0.5);
  EXPECT_THROW(task_metrics(Array::from({3, 1}, {1, 1, 1}), batch), ShapeError);
}

TEST(Metrics, AggregateWeighsTasksEqually) {
  SyntheticBatch batch;
  batch.num_tasks = 2;
  batch.task_of_token = {0, 0, 0, 1};
  batch.targets = Array::from({4, 1}, {0, 0, 0, 0});
  TaskMetrics m = task_metrics(Array::from({4, 1}, {2, 2, 2, 0}), batch);
  EXPECT_EQ(m.aggregate, 2.0);
}

TEST(Metrics, PoolsAcrossBatches) {
  SyntheticBatch a, b;
  a.num_tasks = b.num_tasks = 1;
  a.task_of_token = {0};
  b.task_of_token = {0, 0, 0};
  a.targets = Array::from({1, 1}, {0});
  b.targets = Array::from({3, 1}, {0, 0, 0});
  std::vector<Array> preds{Array::from({1, 1}, {2}), Array::from({3, 1}, {0, 0, 0})};
  std::vector<SyntheticBatch> batches{a, b};
  EXPECT_EQ(task_metrics(preds, batches).aggregate, 1.0);
}

TEST(Metrics, ZeroPredictorMonteCarlo) {
  SceneSpec s;
  SyntheticBatch b = generate_batch(s, request(200, 17, {}, {0}));
  ASSERT_GE(b.num_rows(), 10000u);
  TaskMetrics m = task_metrics(Array::zeros({b.num_rows(), 1}), b);
  for (const auto& v : m.per_task_mse) EXPECT_NEAR(*v, 1.0, 0.06);
  EXPECT_NEAR(m.aggregate, 1.0, 0.03);
}

SparseRoutingPlan one_hot_plan(const std::vector<std::size_t>& slot, std::size_t m) {
  std::vector<double> w(slot.size() * m, 0.0);
  for (std::size_t r = 0; r < slot.size(); ++r) w[r * m + slot[r]] = 1.0;
  SparseRoutingPlan plan;
  plan.weights = Array::from({slot.size(), m}, w);
  return plan;
}

TEST(Recovery, OracleAndRandomRouters) {
  SceneSpec s;
  const auto layers = select_layers(24, 12, SelectionStrategy::LatterHalf);
  SyntheticBatch b = generate_batch(s, request(100, 0, {}, {0}));
  std::vector<std::size_t> oracle, random;
  std::mt19937_64 rng(5);
  for (std::size_t t : b.task_of_token) {
    oracle.push_back(s.planted_layers[t] - 12);
    random.push_back(rng() % 12);
  }
  std::vector<SparseRoutingPlan> plans{one_hot_plan(oracle, 12)};
  std::vector<std::vector<std::size_t>> tasks{b.task_of_token};
  EXPECT_EQ(layer_preference_recovery(plans, tasks, layers, s, Variant::Dynamic), 1.0);
  plans = {one_hot_plan(random, 12)};
  EXPECT_NEAR(layer_preference_recovery(plans, tasks, layers, s, Variant::Dynamic), 1.0 / 12.0, 0.02);
  EXPECT_THROW(layer_preference_recovery(plans, tasks, layers, s, Variant::Mean), PreconditionError);
}

TEST(Recovery, PlantedLayerOutsideBankUsesNearestCandidate) {
  SceneSpec s;
  const auto layers = select_layers(24, 12, SelectionStrategy::FormerHalf);  // 0..11
  SyntheticBatch b = generate_batch(s, request(4, 0, {}, {0}));
  std::vector<SparseRoutingPlan> plans{one_hot_plan(std::vector<std::size_t>(b.num_rows(), 11), 12)};
  std::vector<std::vector<std::size_t>> tasks{b.task_of_token};
  EXPECT_EQ(layer_preference_recovery(plans, tasks, layers, s, Variant::Dynamic), 1.0);
}

TEST(OracleRouter, HeadsAloneSolveNoiselessTask) {
  // A hand-set router sends every token to its task's planted layer with
  // weight 1; only w_out and the task heads are trained.
  SceneSpec scene;
  scene.noise_sigma = 0.0;
  scene.num_tokens = 32;
  FusionConfig f;
  f.k = 1;
  BackboneConfig b;
  b.blocks = 0;
  ToyModel model = init_model(f, b, 3);
  Mlp& router = *model.fusion.router;
  for (double& v : router.w1.mutable_data()) v = 0.0;
  for (double& v : router.w2.mutable_data()) v = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    router.w1.mutable_data()[t * router.w1.dim(1) + t] = 1.0;
    router.w2.mutable_data()[t * router.w2.dim(1) + (scene.planted_layers[t] - 12)] = 10.0;
  }

  TrainConfig tc;
  tc.adam.weight_decay = 0.0;
  tc.frozen = [](const std::string& name) {
    return name != "fusion.w_out" && name != "backbone.head_w" && name != "backbone.head_b";
  };
  ScheduleSpec sched{1500, 0.03, 1e-2, 0.0};
  const auto params = model.named_parameters();
  train_loop(
      params,
      [&](std::size_t step) {
        SyntheticBatch batch = generate_batch(scene, request(4, step));
        return mse_loss(model_forward(model, batch).predictions, batch.targets);
      },
      tc, sched);

  std::vector<SyntheticBatch> held_out;
  for (std::uint64_t i = 0; i < 4; ++i) held_out.push_back(generate_batch(scene, request(8, 100000 + i)));
  EvalResult eval = evaluate(model, held_out);
  EXPECT_LT(eval.metrics.aggregate, 1e-3);
  std::vector<std::vector<std::size_t>> tasks;
  for (const auto& batch : held_out) tasks.push_back(batch.task_of_token);
  EXPECT_EQ(layer_preference_recovery(eval.plans, tasks, model.fusion.source_layers, scene, Variant::Dynamic), 1.0);
}

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.total_depth = 12;
  c.num_tokens = 16;
  c.raw_width = 6;
  c.width = 8;
  c.num_tasks = 2;
  c.planted_layers = {7, 10};
  c.m = 6;
  c.single_layer = 0;
  c.backbone_blocks = 1;
  c.backbone_hidden = 8;
  c.steps = 150;
  c.batch_size = 4;
  c.eval_batches = 4;
  c.lr_peak = 1e-2;
  return c;
}

TEST(Ablation, TwoDOnlySitsAtTargetVariance) {
  ExperimentConfig c = small_experiment();
  c.variant = Variant::TwoDOnly;
  CellResult r = run_cell({"TwoDOnly", c});
  EXPECT_NEAR(r.metrics.aggregate, 1.0, 0.15);
  EXPECT_TRUE(r.routing_summary.empty());
}

TEST(Ablation, DistantSingleLayerLosesToDynamic) {
  ExperimentConfig c = small_experiment();
  c.noise_sigma = 0.0;
  c.attenuation_tau = 4.0;
  const std::vector<Variant> grid{Variant::Single, Variant::Dynamic};
  AblationResults r = run_ablation(variant_grid(c, grid));
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].name, "Single");
  EXPECT_EQ(r.rows[0].source_layers, (std::vector<std::size_t>{0}));
  EXPECT_GT(r.rows[0].metrics.aggregate, r.rows[1].metrics.aggregate);
  EXPECT_EQ(r.rows[1].routing_summary.size(), 6u);
}

TEST(Ablation, RepeatedGridGivesIdenticalTable) {
  ExperimentConfig c = small_experiment();
  c.steps = 20;
  const std::vector<Variant> grid{Variant::Mean, Variant::Dynamic};
  const auto cells = variant_grid(c, grid);
  EXPECT_EQ(results_table_csv(run_ablation(cells)), results_table_csv(run_ablation(cells)));
}

TEST(Ablation, CellsShareInitializationAndData) {
  ExperimentConfig c = small_experiment();
  const std::vector<Variant> grid{Variant::TwoDOnly, Variant::Dynamic};
  const auto cells = variant_grid(c, grid);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].config.variant, Variant::TwoDOnly);
  EXPECT_EQ(cells[1].name, "Dynamic");
  EXPECT_EQ(cells[0].config.seed, cells[1].config.seed);
  ToyModel a = init_model(cells[0].config.fusion(), cells[0].config.backbone(), c.seed);
  ToyModel b = init_model(cells[1].config.fusion(), cells[1].config.backbone(), c.seed);
  auto pa = a.backbone.named_parameters(), pb = b.backbone.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(values(pa[i].array), values(pb[i].array));
  EXPECT_EQ(values(training_batch(cells[0].config, 3).targets), values(training_batch(cells[1].config, 3).targets));
}

AblationResults four_rows(double dynamic, double mean, double single, double two_d) {
  AblationResults r;
  r.num_tasks = 1;
  for (auto [name, v] : std::vector<std::pair<std::string, double>>{
           {"TwoDOnly", two_d}, {"Single", single}, {"Mean", mean}, {"Dynamic", dynamic}}) {
    CellResult c;
    c.name = name;
    c.metrics.per_task_mse = {v};
    c.metrics.aggregate = v;
    r.rows.push_back(c);
  }
  return r;
}

TEST(Ablation, OrderingVerdict) {
  EXPECT_DOUBLE_EQ(relative_gap(0.9, 1.0), 0.1);
  EXPECT_LT(relative_gap(1.1, 1.0), 0.0);
  EXPECT_TRUE(ordering_verdict(four_rows(0.1, 0.5, 0.7, 1.0)).holds);
  EXPECT_FALSE(ordering_verdict(four_rows(0.1, 0.69, 0.7, 1.0)).holds);
  EXPECT_FALSE(ordering_verdict(four_rows(0.6, 0.5, 0.7, 1.0)).holds);
  EXPECT_TRUE(ordering_verdict(four_rows(0.1, 0.69, 0.7, 1.0), 0.01).holds);
  AblationResults partial = four_rows(0.1, 0.5, 0.7, 1.0);
  partial.rows.pop_back();
  EXPECT_FALSE(ordering_verdict(partial).applicable);
}

}  // namespace
}  // namespace georoute
