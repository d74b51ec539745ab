// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpcgen/data/dataset.hpp"
#include "bpcgen/data/phantom.hpp"
#include "bpcgen/data/pgm.hpp"
#include "bpcgen/error.hpp"
#include "bpcgen/metrics/chamfer.hpp"
#include "bpcgen/nn/adam.hpp"
#include "bpcgen/ply.hpp"
#include "bpcgen/run_config.hpp"
#include "bpcgen/train/checkpoint.hpp"
#include "bpcgen/train/losses.hpp"

namespace bpcgen {

/// Encoder-ready inputs paired with target clouds.
struct TrainingSet {
  std::vector<std::string> ids;
  std::vector<Mat<float>> inputs;
  std::vector<Points3> targets;

  std::size_t size() const { return ids.size(); }
};

/// The three networks of a run, initialized from independent streams of the run seed.
struct Models {
  Encoder<float> encoder;
  TreeGenerator<float> generator;
  PointCritic<float> critic;

  static Models init(const RunConfig& cfg) {
    std::mt19937_64 enc_rng(mix_seed(cfg.train.seed, 1));
    std::mt19937_64 gen_rng(mix_seed(cfg.train.seed, 2));
    std::mt19937_64 critic_rng(mix_seed(cfg.train.seed, 3));
    return {Encoder<float>(cfg.encoder, enc_rng), TreeGenerator<float>(cfg.generator, gen_rng),
            PointCritic<float>(cfg.critic, critic_rng)};
  }

  void append_to(Checkpoint& ck) const {
    append_blobs(encoder.params(), "", ck);
    append_blobs(generator.params(), "", ck);
    append_blobs(critic.params(), "", ck);
  }

  static Models from_checkpoint(const Checkpoint& ck) {
    Models m = init(ck.config);
    restore_blobs(m.encoder.params(), "", ck);
    restore_blobs(m.generator.params(), "", ck);
    restore_blobs(m.critic.params(), "", ck);
    return m;
  }

  /// Deterministic reconstruction at z = posterior mean.
  Points3 reconstruct(const Mat<float>& input) const {
    const GaussianPosterior<float> post = encoder.forward(input);
    return generator.forward(post.mean).cast<double>();
  }
};

/// Loads one split of a manifest: the configured slice plane per subject and its cloud.
inline TrainingSet load_split(const DatasetManifest& manifest, Split split, const RunConfig& cfg,
                              const Encoder<float>& encoder) {
  TrainingSet set;
  const std::string plane = to_string(cfg.slice_plane);
  for (const SubjectEntry* e : manifest.split(split)) {
    const auto it = e->slice_paths.find(plane);
    if (it == e->slice_paths.end())
      throw InvalidInput("subject '" + e->id + "' has no " + plane + " slice");
    const SliceImage img = read_pgm16(manifest.resolve(it->second), cfg.slice_plane);
    const PointCloud cloud = read_ply(manifest.resolve(e->cloud_path));
    if (cloud.count() != cfg.generator.point_count)
      throw InvalidInput("subject '" + e->id + "': cloud has " + std::to_string(cloud.count()) +
                         " points but the generator emits " + std::to_string(cfg.generator.point_count));
    set.ids.push_back(e->id);
    set.inputs.push_back(encoder.prepare_input(img));
    set.targets.push_back(cloud.points);
  }
  return set;
}

/// Adversarial training loop. Every random draw derives from (seed, epoch, batch), so a run
/// resumed from a checkpoint follows the same trajectory as an uninterrupted one.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg) : cfg_(std::move(cfg)), models_(Models::init(cfg_)) {
    cfg_.validate();
    make_optimizers();
  }

  /// Restores parameters, optimizer state and history.
  static Trainer resume(const Checkpoint& ck) {
    Trainer t(ck.config);
    t.models_ = Models::from_checkpoint(ck);
    restore_adam(t.opt_enc_, "encoder", ck);
    restore_adam(t.opt_gen_, "generator", ck);
    restore_adam(t.opt_critic_, "critic", ck);
    t.epoch_ = ck.epoch;
    t.history_ = ck.history;
    const auto it = ck.counters.find("step");
    t.step_ = it == ck.counters.end() ? 0 : it->second;
    return t;
  }

  void set_data(TrainingSet train, TrainingSet probe) {
    if (train.size() == 0) throw InvalidInput("trainer: training split is empty");
    if (probe.size() == 0) throw InvalidInput("trainer: held-out probe split is empty");
    train_ = std::move(train);
    probe_ = std::move(probe);
  }

  /// Loads train and test splits of `manifest` as training data and probe.
  void load_data(const DatasetManifest& manifest) {
    set_data(load_split(manifest, Split::train, cfg_, models_.encoder),
             load_split(manifest, Split::test, cfg_, models_.encoder));
  }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.config = cfg_;
    ck.epoch = epoch_;
    ck.history = history_;
    ck.counters["step"] = step_;
    models_.append_to(ck);
    append_adam(opt_enc_, "encoder", ck);
    append_adam(opt_gen_, "generator", ck);
    append_adam(opt_critic_, "critic", ck);
    return ck;
  }

  /// Mean CD between probe targets and reconstructions at z = mean.
  double probe_cd() const {
    double s = 0;
    for (std::size_t i = 0; i < probe_.size(); ++i) {
      Mat<float> d;
      const GaussianPosterior<float> post = models_.encoder.forward(probe_.inputs[i]);
      s += chamfer_with_gradient(models_.generator.forward(post.mean), probe_.targets[i], d);
    }
    return s / static_cast<double>(probe_.size());
  }

  /// Runs one full pass over the training split and appends its log record.
  /// A non-finite loss or parameter throws NumericFailure naming the epoch and batch.
  const LogRecord& run_epoch() {
    if (epoch_ >= cfg_.train.epochs) throw InvalidInput("trainer: all configured epochs are done");
    if (train_.size() == 0) throw InvalidInput("trainer: no training data loaded");
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig& tc = cfg_.train;
    const std::uint64_t epoch_seed = mix_seed(mix_seed(tc.seed, 0x7a11), static_cast<std::uint64_t>(epoch_));
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const float lambda1 = static_cast<float>(tc.lambda1);
    const float lambda_gp = static_cast<float>(tc.lambda_gp);
    const double lambda2 = lambda2_at(epoch_, tc);
    const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
    const std::size_t n_batches = (order.size() + bs - 1) / bs;
    double sum_d = 0, sum_eg = 0, sum_kl = 0;
    long long n_d = 0;

    for (std::size_t b = 0; b < n_batches; ++b) {
      current_batch_ = static_cast<int>(b);
      std::mt19937_64 rng(mix_seed(epoch_seed, b + 1));
      std::normal_distribution<float> normal(0.0f, 1.0f);
      std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
      auto noise = [&]() {
        Mat<float> n(1, cfg_.encoder.latent_dim);
        for (Index k = 0; k < n.size(); ++k) n(0, k) = normal(rng);
        return n;
      };

      std::vector<Mat<float>> inputs;
      std::vector<Points3> targets;
      for (std::size_t i = b * bs; i < std::min(order.size(), (b + 1) * bs); ++i) {
        inputs.push_back(train_.inputs[order[i]]);
        targets.push_back(train_.targets[order[i]]);
      }

      guard([&] {
        if (!tc.adversarial) return;
        std::vector<Mat<float>> reals;
        for (const auto& t : targets) reals.push_back(t.cast<float>());
        for (int k = 0; k < tc.critic_steps_per_gen_step; ++k) {
          std::vector<Mat<float>> fakes;
          std::vector<float> us;
          for (const auto& in : inputs) {
            fakes.push_back(models_.generator.forward(reparameterize(models_.encoder.forward(in), noise())));
            us.push_back(uniform(rng));
          }
          auto d = loss_d(models_.critic, reals, fakes, us, lambda_gp);
          opt_critic_.step(models_.critic.params(), d.grad);
          check_params(models_.critic.params(), "critic");
          sum_d += static_cast<double>(d.loss);
          ++n_d;
        }
      });

      guard([&] {
        std::vector<Mat<float>> noises;
        for (std::size_t i = 0; i < inputs.size(); ++i) noises.push_back(noise());
        const PointCritic<float>* critic = tc.adversarial ? &models_.critic : nullptr;
        auto eg = loss_eg(models_.encoder, models_.generator, critic, inputs, targets, noises, lambda1,
                          static_cast<float>(lambda2));
        opt_enc_.step(models_.encoder.params(), eg.encoder_grad);
        opt_gen_.step(models_.generator.params(), eg.generator_grad);
        check_params(models_.encoder.params(), "encoder");
        check_params(models_.generator.params(), "generator");
        sum_eg += static_cast<double>(eg.loss);
        sum_kl += static_cast<double>(eg.kl);
        ++step_;
      });
    }

    LogRecord r;
    r.epoch = epoch_ + 1;
    r.step = step_;
    r.loss_d = n_d > 0 ? sum_d / static_cast<double>(n_d) : 0.0;
    r.loss_eg = sum_eg / static_cast<double>(n_batches);
    r.kl = sum_kl / static_cast<double>(n_batches);
    r.cd = probe_cd();
    r.lambda2 = lambda2;
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ++epoch_;
    history_.push_back(r);
    return history_.back();
  }

  /// Trains until `stop_epoch` epochs are complete (all configured epochs by default).
  /// Writes train_log.jsonl, periodic checkpoint_XXXX.ckpt files and final.ckpt under
  /// `out_dir`; on numeric failure writes emergency.ckpt before rethrowing.
  void train(const std::filesystem::path& out_dir, int stop_epoch = -1,
             const std::function<void(const LogRecord&)>& on_epoch = {}) {
    const int last = stop_epoch < 0 ? cfg_.train.epochs : std::min(stop_epoch, cfg_.train.epochs);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw IoError("cannot write training log in '" + out_dir.string() + "'");
    for (const auto& r : history_) log << nlohmann::json(r).dump() << '\n';
    while (epoch_ < last) {
      try {
        run_epoch();
      } catch (const NumericFailure&) {
        save_checkpoint(checkpoint(), out_dir / "emergency.ckpt");
        throw;
      }
      log << nlohmann::json(history_.back()).dump() << '\n' << std::flush;
      if (on_epoch) on_epoch(history_.back());
      if (epoch_ % cfg_.train.checkpoint_every == 0 && epoch_ < cfg_.train.epochs) {
        char name[40];
        std::snprintf(name, sizeof name, "checkpoint_%04d.ckpt", epoch_);
        save_checkpoint(checkpoint(), out_dir / name);
      }
    }
    save_checkpoint(checkpoint(), out_dir / (epoch_ == cfg_.train.epochs ? "final.ckpt" : "latest.ckpt"));
  }

  const RunConfig& config() const { return cfg_; }
  const Models& models() const { return models_; }
  Models& models() { return models_; }
  int epoch() const { return epoch_; }
  long long step() const { return step_; }
  const std::vector<LogRecord>& history() const { return history_; }

 private:
  void make_optimizers() {
    const nn::AdamConfig ac{cfg_.train.learning_rate, cfg_.train.adam_beta1, cfg_.train.adam_beta2, 1e-8};
    opt_enc_ = nn::Adam<float>(ac, models_.encoder.params());
    opt_gen_ = nn::Adam<float>(ac, models_.generator.params());
    opt_critic_ = nn::Adam<float>(ac, models_.critic.params());
  }

  template <class P>
  void check_params(const P& p, const char* which) const {
    if (!nn::all_finite(p)) throw NumericFailure(std::string(which) + " parameters became non-finite");
  }

  /// Rethrows numeric failures with epoch/batch coordinates attached.
  template <class F>
  void guard(F&& f) {
    try {
      f();
    } catch (const NumericFailure& e) {
      throw NumericFailure("epoch " + std::to_string(epoch_ + 1) + ", batch " + std::to_string(current_batch_ + 1) +
                           ": " + e.what());
    }
  }

  RunConfig cfg_;
  Models models_;
  nn::Adam<float> opt_enc_, opt_gen_, opt_critic_;
  TrainingSet train_, probe_;
  int epoch_ = 0;
  int current_batch_ = 0;
  long long step_ = 0;
  std::vector<LogRecord> history_;
};

}  // namespace bpcgen
