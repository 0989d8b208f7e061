#include "depix/stn_trainer.hpp"

#include <cmath>
#include <ostream>
#include <set>

#include "json.hpp"

namespace depix {

PairSampler::PairSampler(std::vector<int> clip_lengths, int max_gap)
    : clip_lengths_(std::move(clip_lengths)), max_gap_(max_gap) {
  if (clip_lengths_.empty()) throw DataError("PairSampler: empty manifest");
  for (int len : clip_lengths_) {
    if (len < 2) throw DataError("PairSampler: clips must hold at least 2 frames");
  }
  if (max_gap_ < 1) throw ConfigError("PairSampler: max_gap must be >= 1");
}

PairSampler::Pair PairSampler::sample(std::mt19937_64& rng) const {
  std::uniform_int_distribution<size_t> pick_clip(0, clip_lengths_.size() - 1);
  Pair p;
  p.clip = static_cast<int>(pick_clip(rng));
  const int len = clip_lengths_[static_cast<size_t>(p.clip)];
  std::uniform_int_distribution<int> pick_a(0, len - 1);
  p.a = pick_a(rng);
  // only gaps that fit the clip around a are admissible
  const int gap_cap = std::min(max_gap_, std::max(p.a, len - 1 - p.a));
  std::uniform_int_distribution<int> pick_gap(1, gap_cap);
  const int gap = pick_gap(rng);
  const bool can_fwd = p.a + gap < len;
  const bool can_back = p.a - gap >= 0;
  const bool forward = can_fwd && (!can_back || (rng() & 1u) != 0);
  p.b = forward ? p.a + gap : p.a - gap;
  return p;
}

namespace {

struct PairBatchGrads {
  double recon_sum = 0.0;
  double id_sum = 0.0;
};

// Runs the differentiable chain for one sample and accumulates the residual
// gradient: L = lr*l1(I_A, warp(I_B, up(identity+res))) + li*l1_id(identity+res)
PairBatchGrads pair_losses_and_grad(const Frame& target, const Frame& source,
                                    const Tensor& residual, int sample, double lambda_recon,
                                    double lambda_id, double inv_batch, Tensor* grad_residual) {
  const int grid_res = residual.h;
  const int img_res = target.height;
  WarpGrid grid = identity_grid(grid_res);
  for (int gy = 0; gy < grid_res; ++gy) {
    for (int gx = 0; gx < grid_res; ++gx) {
      grid.x(gy, gx) += residual.at(sample, 0, gy, gx);
      grid.y(gy, gx) += residual.at(sample, 1, gy, gx);
    }
  }
  const WarpGrid full = upsample_grid(grid, img_res);
  const Frame warped = warp(source, full);

  PairBatchGrads out;
  out.recon_sum = l1_mean(target.rgb, warped.rgb);
  out.id_sum = stn_identity_loss(grid);
  if (!grad_residual) return out;

  // d recon / d warped
  Frame dwarped(img_res, img_res);
  l1_mean_grad(warped.rgb, target.rgb, dwarped.rgb);
  WarpGrid dfull;
  warp_backward(source, full, dwarped, nullptr, &dfull);
  const WarpGrid dgrid = upsample_grid_backward(dfull, grid_res);
  const WarpGrid did = stn_identity_loss_grad(grid);
  for (int gy = 0; gy < grid_res; ++gy) {
    for (int gx = 0; gx < grid_res; ++gx) {
      grad_residual->at(sample, 0, gy, gx) = static_cast<float>(
          inv_batch * (lambda_recon * dgrid.x(gy, gx) + lambda_id * did.x(gy, gx)));
      grad_residual->at(sample, 1, gy, gx) = static_cast<float>(
          inv_batch * (lambda_recon * dgrid.y(gy, gx) + lambda_id * did.y(gy, gx)));
    }
  }
  return out;
}

}  // namespace

StnTrainResult train_stn(const std::vector<ClipFrames>& clips, const StnNetConfig& net_cfg,
                         const StnTrainConfig& cfg, const std::filesystem::path& out_ckpt,
                         std::ostream* jsonl, std::ostream* human) {
  if (clips.empty()) throw DataError("train_stn: empty manifest");
  net_cfg.validate();
  for (const auto& c : clips) {
    if (c.lr_size != net_cfg.input_resolution) {
      throw ContractError("train_stn: clip '" + c.clip_id + "' LR resolution " +
                          std::to_string(c.lr_size) + " != net input " +
                          std::to_string(net_cfg.input_resolution));
    }
  }

  std::vector<int> lengths;
  for (const auto& c : clips) lengths.push_back(c.size());
  PairSampler sampler(lengths, cfg.max_gap);
  std::mt19937_64 rng(cfg.seed);

  // held-out validation pairs, excluded from training batches
  std::vector<PairSampler::Pair> val_pairs;
  std::set<std::tuple<int, int, int>> val_keys;
  for (int i = 0; i < cfg.val_pairs; ++i) {
    const auto p = sampler.sample(rng);
    val_pairs.push_back(p);
    val_keys.insert({p.clip, p.a, p.b});
  }
  double identity_baseline = 0.0;
  for (const auto& p : val_pairs) {
    identity_baseline +=
        l1_mean(clips[p.clip].lr[p.a].rgb, clips[p.clip].lr[p.b].rgb);
  }
  identity_baseline /= static_cast<double>(val_pairs.size());

  StnNet net(net_cfg, cfg.seed);
  nn::Adam opt(net.params(), {.lr = cfg.lr, .beta1 = 0.9, .beta2 = 0.999});

  auto validate = [&](StnNet& n) {
    double acc = 0.0;
    for (const auto& p : val_pairs) {
      const Frame& a = clips[p.clip].lr[p.a];
      const Frame& b = clips[p.clip].lr[p.b];
      acc += stn_reconstruction_loss(a, b, n.predict_grid(a, b));
    }
    return acc / static_cast<double>(val_pairs.size());
  };

  const int res = net_cfg.input_resolution;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_params;
  int evals_since_best = 0;
  int step = 0;
  const double inv_batch = 1.0 / cfg.batch_size;

  for (step = 1; step <= cfg.steps; ++step) {
    std::vector<PairSampler::Pair> batch;
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      auto p = sampler.sample(rng);
      // prefer non-validation pairs, but give up after a bounded number of
      // draws so tiny fixtures (where val covers every pair) cannot stall
      for (int attempt = 0; attempt < 20 && val_keys.count({p.clip, p.a, p.b}); ++attempt) {
        p = sampler.sample(rng);
      }
      batch.push_back(p);
    }
    Tensor x(cfg.batch_size, 6, res, res);
    for (int n = 0; n < cfg.batch_size; ++n) {
      frame_into_tensor(clips[batch[n].clip].lr[batch[n].a], x, n, 0);
      frame_into_tensor(clips[batch[n].clip].lr[batch[n].b], x, n, 3);
    }
    const Tensor residual = net.forward(x);
    Tensor grad_residual(cfg.batch_size, 2, residual.h, residual.w);
    double recon = 0.0, id_reg = 0.0;
    for (int n = 0; n < cfg.batch_size; ++n) {
      const auto losses = pair_losses_and_grad(
          clips[batch[n].clip].lr[batch[n].a], clips[batch[n].clip].lr[batch[n].b], residual, n,
          cfg.lambda_recon, cfg.lambda_id, inv_batch, &grad_residual);
      recon += losses.recon_sum;
      id_reg += losses.id_sum;
    }
    recon *= inv_batch;
    id_reg *= inv_batch;
    const StnLossReport report =
        StnLossReport::make(recon, id_reg, cfg.lambda_recon, cfg.lambda_id);
    if (!std::isfinite(report.total)) {
      throw NumericError("train_stn: non-finite loss at step " + std::to_string(step) +
                         " (recon=" + std::to_string(recon) + ", id=" + std::to_string(id_reg) +
                         ")");
    }

    opt.zero_grad();
    net.backward(grad_residual);
    opt.step();

    if (jsonl && (step % cfg.log_every == 0 || step == 1)) {
      nlohmann::ordered_json j{{"step", step},
                               {"recon", report.recon},
                               {"identity_reg", report.identity_reg},
                               {"total", report.total}};
      *jsonl << j.dump() << "\n";
    }
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const double val = validate(net);
      if (jsonl) {
        nlohmann::ordered_json j{{"step", step},
                                 {"val_recon", val},
                                 {"val_identity_baseline", identity_baseline}};
        *jsonl << j.dump() << "\n";
      }
      if (human) {
        *human << "[train-stn] step " << step << " recon " << report.recon << " val " << val
               << " (identity baseline " << identity_baseline << ")\n";
      }
      if (val < best_val) {
        best_val = val;
        best_params.clear();
        for (nn::Param* p : net.params()) best_params.push_back(p->w);
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg.patience) {
        break;
      }
    }
  }

  if (!best_params.empty()) {
    auto params = net.params();
    for (size_t i = 0; i < params.size(); ++i) params[i]->w = best_params[i];
  }
  if (human && best_val >= identity_baseline) {
    *human << "[train-stn] warning: best validation recon " << best_val
           << " does not beat the identity-warp baseline " << identity_baseline
           << "; the aligner is not helping yet\n";
  }
  save_checkpoint(out_ckpt, "stn", nlohmann::json(net_cfg), net.params(),
                  {{"val_recon", best_val},
                   {"identity_baseline", identity_baseline},
                   {"steps", std::min(step, cfg.steps)}});

  StnTrainResult result;
  result.best_val_recon = best_val;
  result.identity_baseline = identity_baseline;
  result.steps_run = std::min(step, cfg.steps);
  return result;
}

}  // namespace depix
