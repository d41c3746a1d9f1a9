// Command-line surface for the texture-inpainting resynthesis pipeline:
// synthetic dataset generation, two-stage training, inference, garment
// transfer, evaluation and the gradient self-check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "retex/checkpoint.hpp"
#include "retex/config.hpp"
#include "retex/dataset.hpp"
#include "retex/gradcheck.hpp"
#include "retex/pipeline.hpp"
#include "retex/png_io.hpp"
#include "retex/synth.hpp"
#include "retex/uvm_io.hpp"

namespace fs = std::filesystem;
using namespace retex;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config JSON");
    cmd->add_option("--set", overrides,
                    "dotted-path config override, e.g. stage1.steps=200");
  }

  PipelineConfig load() const {
    PipelineConfig config;
    if (!config_path.empty()) {
      config = config_from_json_file(config_path);
    } else {
      config.resolve();
    }
    for (const auto& o : overrides) apply_override(config, o);
    return config;
  }
};

PipelineConfig config_for_checkpoint(const ConfigArgs& args,
                                     const std::string& ckpt) {
  if (!args.config_path.empty()) return args.load();
  const std::string sidecar = ckpt + ".json";
  if (!fs::exists(sidecar)) {
    throw std::runtime_error("no config: pass --config or keep " + sidecar);
  }
  PipelineConfig config = config_from_json_file(sidecar);
  for (const auto& o : args.overrides) apply_override(config, o);
  return config;
}

Tensor<float> coord_texture_to_image(const CoordTexture& ct, int img_w,
                                     int img_h) {
  const int64_t plane = int64_t(ct.width) * ct.height;
  std::vector<float> data(3 * plane, 0.f);
  for (int64_t i = 0; i < plane; ++i) {
    if (ct.known[i] == 0.f) continue;
    data[i] = ct.x[i] / float(img_w - 1);
    data[plane + i] = ct.y[i] / float(img_h - 1);
    data[2 * plane + i] = 1.f;
  }
  return Tensor<float>::from_data({1, 3, ct.height, ct.width},
                                  std::move(data));
}

void dump_intermediates(const InferenceOutputs& out, const fs::path& dir,
                        int img_w, int img_h) {
  fs::create_directories(dir);
  if (out.texture.c.width > 0) {
    write_png((dir / "c.png").string(),
              coord_texture_to_image(out.texture.c, img_w, img_h));
  }
  if (out.texture.c_rgb.has_value()) {
    write_png((dir / "c_rgb.png").string(),
              color_texture_to_tensor<float>(out.texture.c_rgb->texture));
  }
  if (out.texture.d.has_value()) {
    write_png((dir / "d.png").string(),
              coord_texture_to_image(*out.texture.d, img_w, img_h));
  }
  if (out.texture.texture.has_value()) {
    write_png((dir / "t.png").string(),
              color_texture_to_tensor<float>(*out.texture.texture));
  }
  if (out.warped.has_value()) {
    write_png((dir / "w.png").string(),
              color_texture_to_tensor<float>(out.warped->rgb));
    if (out.warped->coords.width > 0) {
      write_png((dir / "e.png").string(),
                coord_texture_to_image(out.warped->coords, img_w, img_h));
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{
      "coordinate-based texture inpainting and pose-guided resynthesis"};
  app.require_subcommand(1);

  // --- gen-synthetic ---
  auto* gen = app.add_subcommand(
      "gen-synthetic", "write a synthetic quadruplet dataset directory");
  ConfigArgs gen_cfg;
  gen_cfg.attach(gen);
  std::string gen_out = "dataset";
  int gen_ids = 16;
  int gen_poses = 2;
  uint64_t gen_seed = 7777;
  bool gen_seed_set = false;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--ids", gen_ids, "number of subjects");
  gen->add_option("--poses", gen_poses, "poses per subject");
  gen->add_option("--seed", gen_seed, "scene stream seed")
      ->each([&](const std::string&) { gen_seed_set = true; });
  gen->callback([&] {
    PipelineConfig config = gen_cfg.load();
    if (gen_seed_set) config.data_seed = gen_seed;
    fs::create_directories(gen_out);
    for (int id = 0; id < gen_ids; ++id) {
      const uint64_t seed = mix_seed(config.data_seed, uint64_t(id));
      char name[64];
      for (int pose = 0; pose < gen_poses; ++pose) {
        const SceneView view = render_pose(
            seed, config.scene, pose * config.scene.rotation_diff_deg);
        std::snprintf(name, sizeof(name), "%04d_%d", id, pose);
        write_png((fs::path(gen_out) / (std::string(name) + ".png")).string(),
                  view.image);
        write_uvm((fs::path(gen_out) / (std::string(name) + ".uvm")).string(),
                  view.map);
      }
      std::snprintf(name, sizeof(name), "%04d_tex.png", id);
      write_png((fs::path(gen_out) / name).string(),
                color_texture_to_tensor<float>(scene_texture(seed, config.scene)));
    }
    std::cout << "wrote " << gen_ids << " subjects x " << gen_poses
              << " poses to " << gen_out << "\n";
  });

  // --- train-inpainter ---
  auto* t1 = app.add_subcommand("train-inpainter",
                                "stage 1: train the texture inpainter f");
  ConfigArgs t1_cfg;
  t1_cfg.attach(t1);
  uint64_t t1_seed = 0;
  std::string t1_out;
  t1->add_option("--seed", t1_seed, "training seed")->required();
  t1->add_option("--out", t1_out, "output directory (overrides config)");
  t1->callback([&] {
    PipelineConfig config = t1_cfg.load();
    config.seed = t1_seed;
    if (!t1_out.empty()) config.out_dir = t1_out;
    config.resolve();
    const TrainResult result = train_stage1(config);
    std::cout << "stage1 done: " << result.checkpoint.string()
              << " (final loss " << result.final_total << ")\n";
  });

  // --- train-refiner ---
  auto* t2 = app.add_subcommand(
      "train-refiner", "stage 2: train refiner g + discriminator, f frozen");
  ConfigArgs t2_cfg;
  t2_cfg.attach(t2);
  uint64_t t2_seed = 0;
  std::string t2_out;
  t2->add_option("--seed", t2_seed, "training seed")->required();
  t2->add_option("--out", t2_out, "output directory (overrides config)");
  t2->callback([&] {
    PipelineConfig config = t2_cfg.load();
    config.seed = t2_seed;
    if (!t2_out.empty()) config.out_dir = t2_out;
    config.resolve();
    const TrainResult result = train_stage2(config);
    std::cout << "stage2 done: " << result.checkpoint.string()
              << " (final loss " << result.final_total << ")\n";
  });

  // --- infer ---
  auto* inf = app.add_subcommand("infer",
                                 "resynthesize a target view from S, M_S, M_N");
  ConfigArgs inf_cfg;
  inf_cfg.attach(inf);
  std::string inf_src, inf_src_uvm, inf_tgt_uvm, inf_inpainter, inf_refiner;
  std::string inf_out = "out.png";
  std::string inf_dump;
  inf->add_option("--source", inf_src, "source image PNG")->required();
  inf->add_option("--source-uvm", inf_src_uvm, "source UVM1 map")->required();
  inf->add_option("--target-uvm", inf_tgt_uvm, "target UVM1 map")->required();
  inf->add_option("--inpainter", inf_inpainter, "stage-1 checkpoint");
  inf->add_option("--refiner", inf_refiner, "stage-2 checkpoint")->required();
  inf->add_option("--out", inf_out, "output PNG");
  inf->add_option("--dump-intermediates", inf_dump,
                  "directory for C, D, T, W, E images");
  inf->callback([&] {
    PipelineConfig config = config_for_checkpoint(inf_cfg, inf_refiner);
    config.resolve();
    std::unique_ptr<Inpainter<float>> f;
    if (config.ablation != AblationMode::kNoTextures) {
      if (inf_inpainter.empty()) {
        throw std::runtime_error("this mode needs --inpainter");
      }
      f = load_inpainter(config, inf_inpainter);
    }
    auto g = load_refiner(config, inf_refiner);
    const Tensor<float> source = read_png(inf_src);
    const UvMap m_s = read_uvm(inf_src_uvm);
    const UvMap m_n = read_uvm(inf_tgt_uvm);
    std::optional<IdentityCond> identity;
    if (config.garment_transfer) {
      // Self-conditioning: at plain inference the identity comes from the
      // source subject itself.
      identity = IdentityCond{
          source, identity_mask_from_map(m_s, config.scene.identity_band_v)};
    }
    const InferenceOutputs out =
        run_pipeline(config, f.get(), *g, source, m_s, m_n, identity);
    write_png(inf_out, out.output);
    if (!inf_dump.empty()) {
      dump_intermediates(out, inf_dump, source.extent(3), source.extent(2));
    }
    std::cout << "wrote " << inf_out << "\n";
  });

  // --- transfer ---
  auto* tr = app.add_subcommand(
      "transfer", "garment transfer: clothing from A onto person B");
  ConfigArgs tr_cfg;
  tr_cfg.attach(tr);
  std::string tr_person, tr_person_uvm, tr_cloth, tr_cloth_uvm;
  std::string tr_inpainter, tr_refiner, tr_out = "tryon.png";
  tr->add_option("--person", tr_person, "person image (identity + pose)")
      ->required();
  tr->add_option("--person-uvm", tr_person_uvm)->required();
  tr->add_option("--cloth", tr_cloth, "clothing source image")->required();
  tr->add_option("--cloth-uvm", tr_cloth_uvm)->required();
  tr->add_option("--inpainter", tr_inpainter, "stage-1 checkpoint")
      ->required();
  tr->add_option("--refiner", tr_refiner, "stage-2 checkpoint (garment mode)")
      ->required();
  tr->add_option("--out", tr_out, "output PNG");
  tr->callback([&] {
    PipelineConfig config = config_for_checkpoint(tr_cfg, tr_refiner);
    config.resolve();
    if (!config.garment_transfer) {
      throw std::runtime_error(
          "refiner checkpoint was not trained with garment_transfer");
    }
    auto f = load_inpainter(config, tr_inpainter);
    auto g = load_refiner(config, tr_refiner);
    const Tensor<float> person = read_png(tr_person);
    const UvMap person_map = read_uvm(tr_person_uvm);
    const Tensor<float> cloth = read_png(tr_cloth);
    const UvMap cloth_map = read_uvm(tr_cloth_uvm);
    const std::vector<float> mask =
        identity_mask_from_map(person_map, config.scene.identity_band_v);
    if (std::all_of(mask.begin(), mask.end(),
                    [](float m) { return m == 0.f; })) {
      throw std::runtime_error("person map carries no identity patch pixels");
    }
    const InferenceOutputs out =
        run_pipeline(config, f.get(), *g, cloth, cloth_map, person_map,
                     IdentityCond{person, mask});
    write_png(tr_out, out.output);
    std::cout << "wrote " << tr_out << "\n";
  });

  // --- eval ---
  auto* ev = app.add_subcommand(
      "eval", "SSIM/L1 report over held-out scenes or a dataset directory");
  ConfigArgs ev_cfg;
  ev_cfg.attach(ev);
  std::string ev_inpainter, ev_refiner, ev_dataset, ev_csv = "eval.csv";
  ev->add_option("--inpainter", ev_inpainter, "stage-1 checkpoint");
  ev->add_option("--refiner", ev_refiner, "stage-2 checkpoint")->required();
  ev->add_option("--dataset", ev_dataset,
                 "dataset directory (default: synthetic held-out stream)");
  ev->add_option("--csv", ev_csv, "per-pair CSV report");
  ev->callback([&] {
    PipelineConfig config = config_for_checkpoint(ev_cfg, ev_refiner);
    config.resolve();
    std::unique_ptr<Inpainter<float>> f;
    if (config.ablation != AblationMode::kNoTextures) {
      if (ev_inpainter.empty()) {
        throw std::runtime_error("this mode needs --inpainter");
      }
      f = load_inpainter(config, ev_inpainter);
    }
    auto g = load_refiner(config, ev_refiner);
    const EvalSummary summary =
        ev_dataset.empty()
            ? evaluate_synthetic(config, f.get(), *g, ev_csv)
            : evaluate_dataset(config, f.get(), *g, ev_dataset, ev_csv);
    std::cout << "pairs=" << summary.pairs << " ssim=" << summary.mean_ssim
              << " l1=" << summary.mean_l1;
    if (summary.mean_tex_l1.has_value()) {
      std::cout << " tex_l1=" << *summary.mean_tex_l1;
    }
    std::cout << " csv=" << ev_csv << "\n";
  });

  // --- gradcheck ---
  auto* gc = app.add_subcommand(
      "gradcheck", "finite-difference check of every differentiable op");
  uint64_t gc_seed = 2024;
  bool gc_verbose = false;
  gc->add_option("--seed", gc_seed, "suite seed");
  gc->add_flag("--verbose", gc_verbose, "print every case");
  gc->callback([&] {
    const std::vector<GradCheckResult> results = run_gradient_suite(gc_seed);
    int failures = 0;
    for (const auto& r : results) {
      if (!r.pass) ++failures;
      if (gc_verbose || !r.pass) {
        std::printf("%-32s %s  max_rel_err=%.3e  tol=%.0e  (%d checks)\n",
                    r.name.c_str(), r.pass ? "ok" : "FAIL", r.max_rel_err,
                    r.tolerance, r.checks);
      }
    }
    std::printf("gradcheck: %zu cases, %d failures\n", results.size(),
                failures);
    if (failures > 0) {
      throw std::runtime_error(std::to_string(failures) +
                               " gradient checks failed");
    }
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
