#include "depix/depix_trainer.hpp"

#include <cmath>
#include <ostream>

#include "json.hpp"

namespace depix {

TrainClip load_train_clip(const std::filesystem::path& root, const ClipManifest& manifest) {
  if (manifest.gt_dir.empty() || manifest.pix_dir.empty()) {
    throw DataError("load_train_clip: clip " + manifest.clip_id +
                    " lacks generated ground-truth/pixelated frames");
  }
  TrainClip clip;
  clip.frames = load_clip_frames(root, manifest);
  clip.gt.reserve(manifest.frame_count);
  clip.pixelated.reserve(manifest.frame_count);
  for (int i = 0; i < manifest.frame_count; ++i) {
    clip.gt.push_back(load_png(frame_path(root, manifest.gt_dir, i)));
    clip.pixelated.push_back(load_png(frame_path(root, manifest.pix_dir, i)));
  }
  return clip;
}

namespace {

struct SampleRef {
  int clip = 0;
  int frame = 0;
};

Tensor gather_stacks(const std::vector<TrainClip>& clips, const std::vector<SampleRef>& refs,
                     const SupportWindowSpec& window, StnNet* aligner, StackCache* cache) {
  const int hr = clips.front().frames.hr_size;
  Tensor x(static_cast<int>(refs.size()), window.stack_channels(), hr, hr);
  for (size_t n = 0; n < refs.size(); ++n) {
    const TrainClip& clip = clips[static_cast<size_t>(refs[n].clip)];
    Tensor channels;
    const bool hit = cache && cache->load(clip.frames.clip_id, refs[n].frame, window, &channels);
    if (!hit) {
      channels = build_stack(clip.frames, refs[n].frame, window, aligner).channels;
      if (cache) cache->store(clip.frames.clip_id, refs[n].frame, window, channels);
    }
    std::copy(channels.v.begin(), channels.v.end(), x.sample(static_cast<int>(n)));
  }
  return x;
}

Tensor gather_frames(const std::vector<TrainClip>& clips, const std::vector<SampleRef>& refs,
                     bool ground_truth) {
  const int hr = clips.front().frames.hr_size;
  Tensor x(static_cast<int>(refs.size()), 3, hr, hr);
  for (size_t n = 0; n < refs.size(); ++n) {
    const TrainClip& clip = clips[static_cast<size_t>(refs[n].clip)];
    const Frame& f = ground_truth ? clip.gt[refs[n].frame] : clip.pixelated[refs[n].frame];
    frame_into_tensor(f, x, static_cast<int>(n), 0);
  }
  return x;
}

}  // namespace

DepixTrainResult train_depix(const std::vector<TrainClip>& train_clips,
                             const std::vector<TrainClip>& held_out, StnNet* aligner,
                             const DepixNetConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                             const DepixTrainConfig& cfg, const std::filesystem::path& out_dir,
                             std::ostream* jsonl, std::ostream* human) {
  if (train_clips.empty()) throw DataError("train_depix: no training clips");
  gen_cfg.validate();
  disc_cfg.validate();
  cfg.window.validate();
  if (gen_cfg.input_channels != cfg.window.stack_channels()) {
    throw ConfigError("train_depix: generator expects " + std::to_string(gen_cfg.input_channels) +
                      " channels but the window builds " +
                      std::to_string(cfg.window.stack_channels()));
  }
  StnNet* stacker_aligner = cfg.use_stn ? aligner : nullptr;
  if (cfg.use_stn && !aligner) {
    throw ConfigError("train_depix: use_stn set but no aligner provided");
  }

  std::filesystem::create_directories(out_dir);
  FeatureExtractor vgg19 = make_extractor_vgg19(cfg.vgg19_asset, human);
  FeatureExtractor vggface = make_extractor_vggface(cfg.vggface_asset, human);
  std::vector<FeatureExtractor*> extractors{&vgg19, &vggface};

  std::unique_ptr<StackCache> cache;
  if (!cfg.stack_cache_dir.empty()) {
    cache = std::make_unique<StackCache>(cfg.stack_cache_dir,
                                         cfg.use_stn ? cfg.aligner_digest : 0);
  }

  DepixNet gen(gen_cfg, cfg.seed);
  PatchDiscriminator disc(disc_cfg, cfg.seed + 1);
  nn::Adam gen_opt(gen.params(), {.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});
  nn::Adam disc_opt(disc.params(), {.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});
  const bool adversarial = cfg.lambda_adv != 0.0;

  std::vector<SampleRef> all_frames;
  for (size_t k = 0; k < train_clips.size(); ++k) {
    for (int i = 0; i < train_clips[k].frames.size(); ++i) {
      all_frames.push_back({static_cast<int>(k), i});
    }
  }
  const int epoch_steps =
      std::max(1, static_cast<int>((all_frames.size() + cfg.batch_size - 1) / cfg.batch_size));
  std::mt19937_64 rng(cfg.seed);

  auto save_nets = [&]() {
    save_checkpoint(out_dir / "generator.ckpt", "depix", nlohmann::json(gen_cfg), gen.params(),
                    {{"w", cfg.window.w}, {"d", cfg.window.d}});
    if (adversarial) {
      save_checkpoint(out_dir / "discriminator.ckpt", "disc", nlohmann::json(disc_cfg),
                      disc.params());
    }
  };

  auto eval_clips = [&](const std::vector<TrainClip>& clips, int max_frames, double* recon_out,
                        double* psnr_out) {
    double recon = 0.0, psnr_acc = 0.0;
    int count = 0;
    for (const auto& clip : clips) {
      for (int i = 0; i < clip.frames.size() && count < max_frames; ++i, ++count) {
        Tensor channels;
        const bool hit =
            cache && cache->load(clip.frames.clip_id, i, cfg.window, &channels);
        if (!hit) {
          channels = build_stack(clip.frames, i, cfg.window, stacker_aligner).channels;
          if (cache) cache->store(clip.frames.clip_id, i, cfg.window, channels);
        }
        const Frame pred = gen.infer(channels);
        recon += reconstruction_loss(pred, clip.gt[i]);
        psnr_acc += psnr(pred, clip.gt[i]);
      }
      if (count >= max_frames) break;
    }
    *recon_out = count ? recon / count : 0.0;
    *psnr_out = count ? psnr_acc / count : 0.0;
    return count;
  };

  int step = 0;
  for (step = 1; step <= cfg.steps; ++step) {
    std::vector<SampleRef> batch(static_cast<size_t>(cfg.batch_size));
    std::uniform_int_distribution<size_t> pick(0, all_frames.size() - 1);
    for (auto& ref : batch) ref = all_frames[pick(rng)];

    const Tensor stacks = gather_stacks(train_clips, batch, cfg.window, stacker_aligner,
                                        cache.get());
    const Tensor gt = gather_frames(train_clips, batch, true);
    const Tensor pix = gather_frames(train_clips, batch, false);

    const Tensor pred = gen.forward(stacks);

    DepixLossReport report;
    report.lambda_r = cfg.lambda_r;
    report.lambda_p = cfg.lambda_p;
    report.lambda_adv = cfg.lambda_adv;

    if (adversarial) {
      // --- discriminator step (prediction detached: no gradient into G)
      disc_opt.zero_grad();
      const Tensor real_logits = disc.forward(nn::concat_channels(pix, gt));
      const double loss_real = bce_with_logits_mean(real_logits, 1.f);
      disc.backward(bce_with_logits_grad(real_logits, 1.f) /* *0.5 below */, true);
      const Tensor fake_logits = disc.forward(nn::concat_channels(pix, pred));
      const double loss_fake = bce_with_logits_mean(fake_logits, 0.f);
      disc.backward(bce_with_logits_grad(fake_logits, 0.f), true);
      // halve accumulated gradients to match the 1/2(real+fake) objective
      for (nn::Param* p : disc.params()) {
        for (auto& g : p->g) g *= 0.5f;
      }
      report.adv_disc = 0.5 * (loss_real + loss_fake);
      disc_opt.step();
    }

    // --- generator step
    gen_opt.zero_grad();
    Tensor grad_pred(pred.n, pred.c, pred.h, pred.w);
    report.recon = l1_mean(pred.v, gt.v);
    {
      std::vector<float> g(pred.size());
      l1_mean_grad(pred.v, gt.v, g);
      for (size_t i = 0; i < g.size(); ++i) grad_pred.v[i] += cfg.lambda_r * g[i];
    }
    if (cfg.lambda_p != 0.0) {
      Tensor perc_grad(pred.n, pred.c, pred.h, pred.w);
      report.perceptual = perceptual_loss_tensor(pred, gt, extractors, &perc_grad);
      for (size_t i = 0; i < grad_pred.v.size(); ++i) {
        grad_pred.v[i] += static_cast<float>(cfg.lambda_p * perc_grad.v[i]);
      }
    }
    if (adversarial) {
      const Tensor fake_logits = disc.forward(nn::concat_channels(pix, pred));
      report.adv_gen = bce_with_logits_mean(fake_logits, 1.f);
      const Tensor dinput =
          disc.backward(bce_with_logits_grad(fake_logits, 1.f), /*accumulate=*/false);
      Tensor dpix, dpred;
      nn::split_channels(dinput, 3, &dpix, &dpred);
      for (size_t i = 0; i < grad_pred.v.size(); ++i) {
        grad_pred.v[i] += static_cast<float>(cfg.lambda_adv * dpred.v[i]);
      }
    }
    gen.backward(grad_pred);
    gen_opt.step();

    const double total = report.generator_total();
    if (!std::isfinite(total) || !std::isfinite(report.adv_disc)) {
      throw NumericError("train_depix: non-finite loss at step " + std::to_string(step) +
                         "; last epoch checkpoint retained in " + out_dir.string());
    }

    if (jsonl && (step % cfg.log_every == 0 || step == 1)) {
      nlohmann::ordered_json j{{"step", step},         {"recon", report.recon},
                               {"perceptual", report.perceptual},
                               {"adv_gen", report.adv_gen},
                               {"adv_disc", report.adv_disc},
                               {"total", total}};
      *jsonl << j.dump() << "\n";
    }

    if (step % epoch_steps == 0 || step == cfg.steps) {
      save_nets();
      double val_recon = 0.0, val_psnr = 0.0;
      if (!held_out.empty() &&
          eval_clips(held_out, cfg.eval_frames, &val_recon, &val_psnr) > 0) {
        if (jsonl) {
          nlohmann::ordered_json j{
              {"step", step}, {"val_recon", val_recon}, {"val_psnr", val_psnr}};
          *jsonl << j.dump() << "\n";
        }
        if (human) {
          *human << "[train-depix] step " << step << " recon " << report.recon << " val_recon "
                 << val_recon << " val_psnr " << val_psnr << "\n";
        }
      } else if (human) {
        *human << "[train-depix] step " << step << " recon " << report.recon << " total " << total
               << "\n";
      }
    }
  }

  save_nets();
  DepixTrainResult result;
  result.steps_run = cfg.steps;
  eval_clips(train_clips, cfg.eval_frames, &result.train_recon, &result.train_psnr);
  return result;
}

}  // namespace depix
