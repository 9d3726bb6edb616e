#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sketchstack/core.hpp"

namespace sketchstack {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thresholds for the rule-based relation classifiers, in scene units.
struct ClassifierConfig {
  double eps = 0.02;        // face/level coincidence tolerance
  double touch_eps = 0.02;  // touching vs sparse spacing boundary
  double gap = 0.30;        // max lateral gap for left-of / front-of
  double d_near = 0.25;     // near-along-* band upper bound
  double alpha = 0.5;       // min depth-overlap fraction
  double beta = 0.5;        // min width-overlap fraction (front-of)
  double grid_reg_tol = 0.10;  // relative spacing/size deviation for grids
};

// Pose/dims normalization for model inputs: divide by workspace half-extents.
struct NormScale {
  double sx = 1.5, sy = 1.0, sz = 2.5;
};

struct ArchConfig {
  int latent = 128;       // shape/pose encoder output width
  int hidden = 128;       // MLP backbone width
  int time_emb = 128;     // sinusoidal embedding size
  int time_hidden = 512;  // intermediate width of the time encoder
  int token_dim = 128;    // variadic token width
  int attn_blocks = 2;
  int heads = 4;
  int max_slots = 8;
  bool slot_pos = true;  // additive slot position encoding
};

struct OptConfig {
  int steps = 20000;
  int batch = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct ScheduleConfig {
  int T = 200;
  double offset = 0.008;
};

struct SamplerOptions {
  int inner_iters = 5;  // M
  enum class NoiseMode { Diffusion, Ula };
  NoiseMode noise_mode = NoiseMode::Diffusion;
  double edge_weight = 1.0;  // uniform w_r default
  std::uint64_t seed = 0;
};

struct GroundingOptions {
  int max_iters = 5;
  int repair_candidates = 3;  // K
  std::uint64_t seed = 0;
  bool ablation = false;  // re-sample only, never insert hidden blocks
};

struct DatagenConfig {
  int max_attempts = 200;
  int samples_per_relation = 5000;
  double blur_sigma = 0.9;
  int dilate_px = 2;
  int stroke_px = 1;
  int px_per_unit = 100;  // raster resolution
  int canvas_margin_px = 12;
};

struct StabilityConfig {
  double contact_tol = 0.02;      // shared with ClassifierConfig::eps
  double stability_margin = 0.005;
  double gravity = 9.81;
  double residual_tol = 1e-7;
};

struct Config {
  Workspace workspace;
  ClassifierConfig classifier;
  NormScale norm;
  ArchConfig arch;
  OptConfig opt;
  ScheduleConfig schedule;
  SamplerOptions sampler;
  GroundingOptions grounding;
  DatagenConfig datagen;
  StabilityConfig stability;
  double pen_tol = 1e-4;
};

// "paper" preset: Appendix-scale model sizes and schedule length.
inline Config paper_preset() {
  Config c;
  c.arch.latent = 256;
  c.arch.hidden = 256;
  c.arch.token_dim = 256;
  c.schedule.T = 1500;
  return c;
}

// "desk" preset: the defaults above (hidden widths 128, T = 200).
inline Config desk_preset() { return Config{}; }

inline json config_to_json(const Config& c) {
  json j;
  j["workspace"] = workspace_to_json(c.workspace);
  j["classifier"] = {{"eps", c.classifier.eps},
                     {"touch_eps", c.classifier.touch_eps},
                     {"gap", c.classifier.gap},
                     {"d_near", c.classifier.d_near},
                     {"alpha", c.classifier.alpha},
                     {"beta", c.classifier.beta},
                     {"grid_reg_tol", c.classifier.grid_reg_tol}};
  j["norm"] = {{"sx", c.norm.sx}, {"sy", c.norm.sy}, {"sz", c.norm.sz}};
  j["arch"] = {{"latent", c.arch.latent},
               {"hidden", c.arch.hidden},
               {"time_emb", c.arch.time_emb},
               {"time_hidden", c.arch.time_hidden},
               {"token_dim", c.arch.token_dim},
               {"attn_blocks", c.arch.attn_blocks},
               {"heads", c.arch.heads},
               {"max_slots", c.arch.max_slots},
               {"slot_pos", c.arch.slot_pos}};
  j["opt"] = {{"steps", c.opt.steps},
              {"batch", c.opt.batch},
              {"lr", c.opt.lr},
              {"beta1", c.opt.beta1},
              {"beta2", c.opt.beta2},
              {"adam_eps", c.opt.adam_eps}};
  j["schedule"] = {{"T", c.schedule.T}, {"offset", c.schedule.offset}};
  j["sampler"] = {{"inner_iters", c.sampler.inner_iters},
                  {"noise_mode", c.sampler.noise_mode ==
                                         SamplerOptions::NoiseMode::Ula
                                     ? "ula"
                                     : "diffusion"},
                  {"edge_weight", c.sampler.edge_weight},
                  {"seed", c.sampler.seed}};
  j["grounding"] = {{"max_iters", c.grounding.max_iters},
                    {"repair_candidates", c.grounding.repair_candidates},
                    {"seed", c.grounding.seed},
                    {"ablation", c.grounding.ablation}};
  j["datagen"] = {{"max_attempts", c.datagen.max_attempts},
                  {"samples_per_relation", c.datagen.samples_per_relation},
                  {"blur_sigma", c.datagen.blur_sigma},
                  {"dilate_px", c.datagen.dilate_px},
                  {"stroke_px", c.datagen.stroke_px},
                  {"px_per_unit", c.datagen.px_per_unit},
                  {"canvas_margin_px", c.datagen.canvas_margin_px}};
  j["stability"] = {{"contact_tol", c.stability.contact_tol},
                    {"stability_margin", c.stability.stability_margin},
                    {"gravity", c.stability.gravity},
                    {"residual_tol", c.stability.residual_tol}};
  j["pen_tol"] = c.pen_tol;
  return j;
}

inline Config config_from_json(const json& j) {
  Config c;
  if (j.contains("workspace")) c.workspace = workspace_from_json(j["workspace"]);
  if (j.contains("classifier")) {
    const json& k = j["classifier"];
    c.classifier.eps = k.value("eps", c.classifier.eps);
    c.classifier.touch_eps = k.value("touch_eps", c.classifier.touch_eps);
    c.classifier.gap = k.value("gap", c.classifier.gap);
    c.classifier.d_near = k.value("d_near", c.classifier.d_near);
    c.classifier.alpha = k.value("alpha", c.classifier.alpha);
    c.classifier.beta = k.value("beta", c.classifier.beta);
    c.classifier.grid_reg_tol = k.value("grid_reg_tol", c.classifier.grid_reg_tol);
  }
  if (j.contains("norm")) {
    c.norm.sx = j["norm"].value("sx", c.norm.sx);
    c.norm.sy = j["norm"].value("sy", c.norm.sy);
    c.norm.sz = j["norm"].value("sz", c.norm.sz);
  }
  if (j.contains("arch")) {
    const json& k = j["arch"];
    c.arch.latent = k.value("latent", c.arch.latent);
    c.arch.hidden = k.value("hidden", c.arch.hidden);
    c.arch.time_emb = k.value("time_emb", c.arch.time_emb);
    c.arch.time_hidden = k.value("time_hidden", c.arch.time_hidden);
    c.arch.token_dim = k.value("token_dim", c.arch.token_dim);
    c.arch.attn_blocks = k.value("attn_blocks", c.arch.attn_blocks);
    c.arch.heads = k.value("heads", c.arch.heads);
    c.arch.max_slots = k.value("max_slots", c.arch.max_slots);
    c.arch.slot_pos = k.value("slot_pos", c.arch.slot_pos);
  }
  if (j.contains("opt")) {
    const json& k = j["opt"];
    c.opt.steps = k.value("steps", c.opt.steps);
    c.opt.batch = k.value("batch", c.opt.batch);
    c.opt.lr = k.value("lr", c.opt.lr);
    c.opt.beta1 = k.value("beta1", c.opt.beta1);
    c.opt.beta2 = k.value("beta2", c.opt.beta2);
    c.opt.adam_eps = k.value("adam_eps", c.opt.adam_eps);
  }
  if (j.contains("schedule")) {
    c.schedule.T = j["schedule"].value("T", c.schedule.T);
    c.schedule.offset = j["schedule"].value("offset", c.schedule.offset);
  }
  if (j.contains("sampler")) {
    const json& k = j["sampler"];
    c.sampler.inner_iters = k.value("inner_iters", c.sampler.inner_iters);
    c.sampler.noise_mode = k.value("noise_mode", "diffusion") == std::string("ula")
                               ? SamplerOptions::NoiseMode::Ula
                               : SamplerOptions::NoiseMode::Diffusion;
    c.sampler.edge_weight = k.value("edge_weight", c.sampler.edge_weight);
    c.sampler.seed = k.value("seed", c.sampler.seed);
  }
  if (j.contains("grounding")) {
    const json& k = j["grounding"];
    c.grounding.max_iters = k.value("max_iters", c.grounding.max_iters);
    c.grounding.repair_candidates =
        k.value("repair_candidates", c.grounding.repair_candidates);
    c.grounding.seed = k.value("seed", c.grounding.seed);
    c.grounding.ablation = k.value("ablation", c.grounding.ablation);
  }
  if (j.contains("datagen")) {
    const json& k = j["datagen"];
    c.datagen.max_attempts = k.value("max_attempts", c.datagen.max_attempts);
    c.datagen.samples_per_relation =
        k.value("samples_per_relation", c.datagen.samples_per_relation);
    c.datagen.blur_sigma = k.value("blur_sigma", c.datagen.blur_sigma);
    c.datagen.dilate_px = k.value("dilate_px", c.datagen.dilate_px);
    c.datagen.stroke_px = k.value("stroke_px", c.datagen.stroke_px);
    c.datagen.px_per_unit = k.value("px_per_unit", c.datagen.px_per_unit);
    c.datagen.canvas_margin_px =
        k.value("canvas_margin_px", c.datagen.canvas_margin_px);
  }
  if (j.contains("stability")) {
    const json& k = j["stability"];
    c.stability.contact_tol = k.value("contact_tol", c.stability.contact_tol);
    c.stability.stability_margin =
        k.value("stability_margin", c.stability.stability_margin);
    c.stability.gravity = k.value("gravity", c.stability.gravity);
    c.stability.residual_tol = k.value("residual_tol", c.stability.residual_tol);
  }
  c.pen_tol = j.value("pen_tol", c.pen_tol);
  return c;
}

// Stable 64-bit FNV-1a over the canonical JSON dump; embedded in artifacts so
// outputs can be traced back to the exact configuration.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const Config& c) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(c).dump())));
  return std::string(buf);
}

}  // namespace sketchstack
