// Renders deterministic synthetic clips (a moving soft-disc "head" over a
// textured background) as prepare-data sources. Used by the test fixtures and
// handy for trying the pipeline without real footage.

#include <iostream>

#include "CLI11.hpp"
#include "depix/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic clip generator"};
  std::string out;
  int clips = 1;
  depix::SyntheticClipSpec spec;
  app.add_option("--out", out, "Directory to create (one subdirectory per clip)")->required();
  app.add_option("--clips", clips, "Number of clips")->capture_default_str();
  app.add_option("--frames", spec.frames, "Frames per clip")->capture_default_str();
  app.add_option("--resolution", spec.resolution, "Rendered resolution")->capture_default_str();
  app.add_option("--seed", spec.seed, "Base seed; clip k uses seed+k")->capture_default_str();
  app.add_option("--motion", spec.motion_amplitude, "Motion amplitude in px")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  for (int k = 0; k < clips; ++k) {
    depix::SyntheticClipSpec s = spec;
    s.seed = spec.seed + static_cast<uint64_t>(k);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%03d", k);
    depix::write_synthetic_clip(s, std::filesystem::path(out) / name);
    std::cerr << "[synth] wrote " << name << " (" << s.frames << " frames at " << s.resolution
              << "px)\n";
  }
  return 0;
}
