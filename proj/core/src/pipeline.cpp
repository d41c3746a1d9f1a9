#include "retex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "retex/checkpoint.hpp"
#include "retex/conv.hpp"
#include "retex/dataset.hpp"
#include "retex/ops.hpp"
#include "retex/png_io.hpp"
#include "retex/rng.hpp"
#include "retex/ssim.hpp"
#include "retex/uvm_io.hpp"

namespace retex {

namespace fs = std::filesystem;

uint64_t scene_seed(const PipelineConfig& config, int64_t index) {
  return mix_seed(config.data_seed, uint64_t(index));
}

namespace {

// Distinct stream tags for the independent RNG consumers of one run.
constexpr uint64_t kInitInpainter = 0x01;
constexpr uint64_t kInitRefiner = 0x02;
constexpr uint64_t kInitDiscriminator = 0x03;
constexpr uint64_t kOrderStage1 = 0x11;
constexpr uint64_t kOrderStage2 = 0x12;

double mean_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(double(a[i]) - b[i]);
  return a.empty() ? 0.0 : acc / double(a.size());
}

class CsvLog {
 public:
  CsvLog() = default;
  void open(const fs::path& path, const std::vector<std::string>& columns) {
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open log " + path.string());
    out_ << "step";
    for (const auto& c : columns) out_ << "," << c;
    out_ << "\n";
  }
  void row(int step, const std::vector<double>& values) {
    out_ << step;
    for (double v : values) out_ << "," << v;
    out_ << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

[[noreturn]] void abort_nan(const std::string& stage, int step,
                            const std::vector<std::pair<std::string, double>>&
                                terms) {
  std::ostringstream msg;
  msg << stage << ": non-finite loss at step " << step << " (";
  for (size_t i = 0; i < terms.size(); ++i) {
    if (i) msg << ", ";
    msg << terms[i].first << "=" << terms[i].second;
  }
  msg << ")";
  throw std::runtime_error(msg.str());
}

struct StackBuilder {
  int h = 0, w = 0;
  std::vector<float> data;
  std::vector<std::string> roles;

  StackBuilder(int height, int width) : h(height), w(width) {}
  int64_t plane() const { return int64_t(h) * w; }

  void add_plane(const std::string& role, const float* src) {
    data.insert(data.end(), src, src + plane());
    roles.push_back(role);
  }
  void add_image(const std::string& role, const Tensor<float>& image) {
    const char* ch = "rgb";
    for (int c = 0; c < 3; ++c) {
      add_plane(role + "." + ch[c], image.value().data() + c * plane());
    }
  }
  void add_uvmap(const std::string& role, const UvMap& map) {
    std::vector<float> u(plane()), v(plane());
    for (int64_t i = 0; i < plane(); ++i) {
      const bool ok = map.valid[i] != 0.f;
      u[i] = ok ? map.u[i] : 0.f;
      v[i] = ok ? map.v[i] : 0.f;
    }
    add_plane(role + ".u", u.data());
    add_plane(role + ".v", v.data());
    add_plane(role + ".valid", map.valid.data());
  }
  // Image-frame warp field, coordinates normalized by the source extents,
  // sentinel kept at unknown pixels.
  void add_warpfield(const std::string& role, const CoordTexture& e,
                     int src_w, int src_h) {
    std::vector<float> x(plane()), y(plane());
    for (int64_t i = 0; i < plane(); ++i) {
      const bool ok = e.known[i] != 0.f;
      x[i] = ok ? e.x[i] / float(src_w - 1) : CoordTexture::kUnknown;
      y[i] = ok ? e.y[i] / float(src_h - 1) : CoordTexture::kUnknown;
    }
    add_plane(role + ".x", x.data());
    add_plane(role + ".y", y.data());
    add_plane(role + ".known", e.known.data());
  }
  void add_meshgrid() {
    std::vector<float> x(plane()), y(plane());
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        x[int64_t(py) * w + px] = float(px) / float(w - 1);
        y[int64_t(py) * w + px] = float(py) / float(h - 1);
      }
    }
    add_plane("mesh.x", x.data());
    add_plane("mesh.y", y.data());
  }
  void add_identity(const IdentityCond& identity) {
    const char* ch = "rgb";
    for (int c = 0; c < 3; ++c) {
      std::vector<float> masked(plane());
      const float* src = identity.image.value().data() + c * plane();
      for (int64_t i = 0; i < plane(); ++i) masked[i] = src[i] * identity.mask[i];
      add_plane(std::string("idcond.") + ch[c], masked.data());
    }
    add_plane("idcond.mask", identity.mask.data());
  }

  Tensor<float> build() const {
    Shape shape = {1, int(roles.size()), h, w};
    return Tensor<float>::from_data(shape, data);
  }
};

std::vector<DeformField<float>> make_fields(const CoordTexture& e, int levels,
                                            int src_w, int src_h) {
  (void)src_w;
  (void)src_h;
  std::vector<DeformField<float>> fields;
  for (int i = 0; i < levels; ++i) {
    const CoordTexture level =
        i == 0 ? e : downsample_warpfield(e, 1 << i);
    auto [coords, mask] = coord_texture_to_tensors<float>(level);
    // Unknown entries hold the sentinel; the sampler clamps them and the
    // mask zeroes their contribution.
    fields.push_back({coords, mask});
  }
  return fields;
}

std::pair<TextureEstimate, std::optional<WarpedMaps>> texture_and_warp(
    const Tensor<float>& source, const UvMap& m_s, const UvMap& m_n,
    const Inpainter<float>* inpainter, AblationMode mode, int tex_size) {
  if (mode == AblationMode::kNoTextures) return {TextureEstimate{}, {}};
  if (inpainter == nullptr) {
    throw std::invalid_argument("pipeline: this mode needs the inpainter");
  }
  NoGradGuard no_grad;
  TextureEstimate est = estimate_texture(source, m_s, *inpainter, mode, tex_size);
  WarpedMaps warped;
  if (mode == AblationMode::kRgbInpainting) {
    warped.rgb = warp_texture(*est.texture, m_n);
  } else {
    warped = warp_to_target(*est.texture, *est.d, m_n);
  }
  return {std::move(est), std::move(warped)};
}

}  // namespace

TextureEstimate estimate_texture(const Tensor<float>& source, const UvMap& m_s,
                                 const Inpainter<float>& inpainter,
                                 AblationMode mode, int tex_size) {
  NoGradGuard no_grad;
  const int img_h = source.extent(2), img_w = source.extent(3);
  TextureEstimate est;
  if (mode == AblationMode::kRgbInpainting) {
    est.c_rgb = splat_colors(source, m_s, tex_size, tex_size);
    Tensor<float> pred =
        inpainter.forward(color_splat_to_input<float>(*est.c_rgb));
    est.texture = tensor_to_color_texture(pred);
    return est;
  }
  est.c = splat_coordinates(m_s, tex_size, tex_size);
  Tensor<float> d = inpainter.forward(
      coord_texture_to_input<float>(est.c, img_w, img_h), img_w, img_h);
  est.d = tensor_to_coord_texture(d);
  est.texture = texture_from_coords(source, *est.d);
  return est;
}

RefinerInputs build_refiner_inputs(const Tensor<float>& source,
                                   const UvMap& m_s, const UvMap& m_n,
                                   const TextureEstimate* estimate,
                                   const std::optional<WarpedMaps>& warped,
                                   AblationMode mode,
                                   const std::optional<IdentityCond>& identity,
                                   int levels) {
  const int img_h = source.extent(2), img_w = source.extent(3);
  RefinerInputs inputs;
  StackBuilder target(img_h, img_w);
  const bool textures = mode != AblationMode::kNoTextures;
  if (textures) {
    if (estimate == nullptr || !warped.has_value()) {
      throw std::invalid_argument("refiner inputs: texture/warp missing");
    }
    target.add_image("W", color_texture_to_tensor<float>(warped->rgb));
  }
  if (mode == AblationMode::kFull || mode == AblationMode::kNoDeform) {
    target.add_warpfield("E", warped->coords, img_w, img_h);
  }
  target.add_uvmap("MN", m_n);
  if (mode != AblationMode::kFull) {
    // Single-encoder modes fold the source-aligned maps into one stack.
    target.add_image("S", source);
    target.add_uvmap("MS", m_s);
  }
  target.add_meshgrid();
  if (identity.has_value()) target.add_identity(*identity);
  inputs.target_stack = target.build();
  inputs.target_roles = target.roles;

  if (mode == AblationMode::kFull) {
    StackBuilder src(img_h, img_w);
    src.add_image("S", source);
    src.add_uvmap("MS", m_s);
    src.add_meshgrid();
    inputs.source_stack = src.build();
    inputs.source_roles = src.roles;
    inputs.fields = make_fields(warped->coords, levels, img_w, img_h);
  }
  return inputs;
}

Tensor<float> discriminator_stack(const Tensor<float>& image,
                                  const UvMap& m_n) {
  StackBuilder cond(image.extent(2), image.extent(3));
  cond.add_uvmap("MN", m_n);
  cond.add_meshgrid();
  return concat_channels(image, cond.build());
}

InferenceOutputs run_pipeline(const PipelineConfig& config,
                              const Inpainter<float>* inpainter,
                              const Refiner<float>& refiner,
                              const Tensor<float>& source, const UvMap& m_s,
                              const UvMap& m_n,
                              const std::optional<IdentityCond>& identity) {
  NoGradGuard no_grad;
  auto [est, warped] = texture_and_warp(source, m_s, m_n, inpainter,
                                        config.ablation,
                                        config.scene.texture_size);
  RefinerInputs inputs =
      build_refiner_inputs(source, m_s, m_n, &est, warped, config.ablation,
                           identity, refiner.config().levels());
  InferenceOutputs out;
  out.output = refiner.forward(inputs.target_stack, inputs.source_stack,
                               inputs.fields);
  out.texture = std::move(est);
  out.warped = std::move(warped);
  out.target_roles = std::move(inputs.target_roles);
  out.source_roles = std::move(inputs.source_roles);
  return out;
}

// ---------------------------------------------------------------------------

fs::path inpainter_ckpt_path(const PipelineConfig& config) {
  return fs::path(config.out_dir) / "inpainter.ckpt";
}

fs::path refiner_ckpt_path(const PipelineConfig& config) {
  return fs::path(config.out_dir) / "refiner.ckpt";
}

namespace {

// Normalized coordinate term shared by the pair and identity stage-1 tasks.
Tensor<float> coord_consistency_term(const Tensor<float>& d,
                                     const CoordTexture& c, int img_w,
                                     int img_h) {
  auto [cc, cm] = coord_texture_to_tensors<float>(c);
  const std::vector<double> norm = {1.0 / img_w, 1.0 / img_h};
  Tensor<float> diff = abs(sub(affine_channels(d, norm, {0.0, 0.0}),
                               affine_channels(cc, norm, {0.0, 0.0})));
  double known = 0.0;
  for (float k : c.known) known += k;
  return scale(sum(mul_mask(diff, cm)), 1.0 / std::max(known, 1.0));
}

void save_with_config(const PipelineConfig& config, const fs::path& path,
                      const std::vector<CheckpointEntry>& entries) {
  save_checkpoint(path.string(), entries);
  config_to_json_file(config, path.string() + ".json");
}

}  // namespace

TrainResult train_stage1(const PipelineConfig& config) {
  if (config.ablation == AblationMode::kNoTextures) {
    throw std::invalid_argument(
        "train_stage1: no_textures skips texture estimation entirely");
  }
  if (!config.dataset_dir.empty()) {
    throw std::invalid_argument(
        "train_stage1: directory datasets are handled by gen-synthetic + "
        "synthetic streams in this build");
  }
  fs::create_directories(config.out_dir);
  const bool rgb = config.ablation == AblationMode::kRgbInpainting;
  const bool identity_task = config.stage1_task == Stage1Task::kIdentity;
  const int img = config.scene.image_size;
  const int tex = config.scene.texture_size;

  Inpainter<float> f(config.inpainter, mix_seed(config.seed, kInitInpainter));
  std::vector<Tensor<float>> params = f.params().tensors();
  AdamState<float> state;
  Rng order(mix_seed(config.seed, kOrderStage1));

  std::vector<std::string> columns;
  if (identity_task) {
    columns = {"identity_coord_l1", "total"};
  } else if (rgb) {
    columns = {"stage1_rgb_in_l1", "stage1_rgb_out_l1", "total"};
  } else {
    columns = {"stage1_coord_l1", "stage1_color_l1", "total"};
  }
  TrainResult result;
  result.log_csv = fs::path(config.out_dir) /
                   (identity_task ? "stage1_identity_log.csv" : "stage1_log.csv");
  CsvLog log;
  log.open(result.log_csv, columns);

  const Stage1Weights weights{config.loss.stage1_coord,
                              config.loss.stage1_color};
  for (int step = 1; step <= config.stage1.steps; ++step) {
    Tensor<float> total;
    std::vector<double> acc(columns.size() - 1, 0.0);
    for (int b = 0; b < config.stage1.batch; ++b) {
      const int64_t idx = order.uniform_int(0, config.train_pairs - 1);
      const uint64_t seed = scene_seed(config, idx);
      Tensor<float> loss_b;
      if (identity_task) {
        const CoordTexture c = full_coord_map(seed, config.scene);
        Tensor<float> d =
            f.forward(coord_texture_to_input<float>(c, img, img), img, img);
        loss_b = coord_consistency_term(d, c, img, img);
        acc[0] += loss_b.item();
      } else if (rgb) {
        const SceneSample sample = generate_pair(seed, config.scene);
        const ColorSplat cs =
            splat_colors(sample.source_image, sample.source_map, tex, tex);
        Tensor<float> pred = f.forward(color_splat_to_input<float>(cs));
        const ColorSplat tgt =
            splat_colors(sample.target_image, sample.target_map, tex, tex);
        LossReport<float> rep =
            stage1_rgb_loss(cs, pred, tgt.texture, tgt.known, weights);
        loss_b = rep.total;
        acc[0] += rep.term("stage1_rgb_in_l1");
        acc[1] += rep.term("stage1_rgb_out_l1");
      } else {
        const SceneSample sample = generate_pair(seed, config.scene);
        const CoordTexture c =
            splat_coordinates(sample.source_map, tex, tex);
        Tensor<float> d =
            f.forward(coord_texture_to_input<float>(c, img, img), img, img);
        Tensor<float> t = sample_bilinear(sample.source_image, d);
        const ColorSplat tgt =
            splat_colors(sample.target_image, sample.target_map, tex, tex);
        LossReport<float> rep = stage1_loss(c, d, t, tgt.texture, tgt.known,
                                            img, img, weights);
        loss_b = rep.total;
        acc[0] += rep.term("stage1_coord_l1");
        acc[1] += rep.term("stage1_color_l1");
      }
      total = total.defined() ? add(total, loss_b) : loss_b;
    }
    total = scale(total, 1.0 / config.stage1.batch);
    const double total_value = total.item();
    if (!std::isfinite(total_value)) {
      std::vector<std::pair<std::string, double>> terms;
      for (size_t i = 0; i + 1 < columns.size(); ++i) {
        terms.emplace_back(columns[i], acc[i] / config.stage1.batch);
      }
      abort_nan("train_stage1", step, terms);
    }
    total.backward();
    adam_step(params, state, config.optim_stage1);
    f.params().zero_grads();

    if (step % config.stage1.log_every == 0 || step == config.stage1.steps) {
      std::vector<double> row;
      for (double a : acc) row.push_back(a / config.stage1.batch);
      row.push_back(total_value);
      log.row(step, row);
    }
    if (config.stage1.checkpoint_every > 0 &&
        step % config.stage1.checkpoint_every == 0) {
      save_with_config(config,
                       fs::path(config.out_dir) /
                           ("inpainter_step" + std::to_string(step) + ".ckpt"),
                       table_to_entries(f.params(), "f."));
    }
    result.final_total = total_value;
  }
  result.steps = config.stage1.steps;
  result.checkpoint = inpainter_ckpt_path(config);
  save_with_config(config, result.checkpoint, table_to_entries(f.params(), "f."));
  return result;
}

std::unique_ptr<Inpainter<float>> load_inpainter(const PipelineConfig& config,
                                                 const fs::path& ckpt) {
  if (!fs::exists(ckpt)) {
    throw std::runtime_error("missing stage-1 checkpoint: " + ckpt.string());
  }
  auto f = std::make_unique<Inpainter<float>>(
      config.inpainter, mix_seed(config.seed, kInitInpainter));
  load_into_table(load_checkpoint(ckpt.string()), f->params(), "f.");
  return f;
}

std::unique_ptr<Refiner<float>> load_refiner(const PipelineConfig& config,
                                             const fs::path& ckpt) {
  if (!fs::exists(ckpt)) {
    throw std::runtime_error("missing stage-2 checkpoint: " + ckpt.string());
  }
  auto g = std::make_unique<Refiner<float>>(
      config.refiner, mix_seed(config.seed, kInitRefiner));
  load_into_table(load_checkpoint(ckpt.string()), g->params(), "g.");
  return g;
}

TrainResult train_stage2(const PipelineConfig& config) {
  fs::create_directories(config.out_dir);
  const bool textures = config.ablation != AblationMode::kNoTextures;
  std::unique_ptr<Inpainter<float>> f;
  if (textures) {
    f = load_inpainter(config, inpainter_ckpt_path(config));
    f->params().freeze();
  }
  Refiner<float> g(config.refiner, mix_seed(config.seed, kInitRefiner));
  Discriminator<float> dnet(config.discriminator,
                            mix_seed(config.seed, kInitDiscriminator));
  FeatureExtractor<float> features(config.loss.feature_seed);
  std::vector<Tensor<float>> g_params = g.params().tensors();
  std::vector<Tensor<float>> d_params = dnet.params().tensors();
  AdamState<float> g_state, d_state;
  Rng order(mix_seed(config.seed, kOrderStage2));
  const bool adversarial = config.loss.adv > 0.0;

  std::vector<std::string> columns = {"nn_loss", "perceptual", "style"};
  if (adversarial) {
    columns.push_back("adv_g");
    columns.push_back("adv_d");
  }
  columns.push_back("total");
  TrainResult result;
  result.log_csv = fs::path(config.out_dir) / "stage2_log.csv";
  CsvLog log;
  log.open(result.log_csv, columns);

  for (int step = 1; step <= config.stage2.steps; ++step) {
    Tensor<float> g_total, d_total;
    std::vector<double> acc(columns.size() - 1, 0.0);
    for (int b = 0; b < config.stage2.batch; ++b) {
      const int64_t idx = order.uniform_int(0, config.train_pairs - 1);
      const SceneSample sample =
          generate_pair(scene_seed(config, idx), config.scene);
      auto [est, warped] =
          texture_and_warp(sample.source_image, sample.source_map,
                           sample.target_map, f.get(), config.ablation,
                           config.scene.texture_size);
      std::optional<IdentityCond> identity;
      if (config.garment_transfer) {
        identity = IdentityCond{sample.target_image,
                                sample.identity_mask_target};
      }
      RefinerInputs inputs = build_refiner_inputs(
          sample.source_image, sample.source_map, sample.target_map,
          textures ? &est : nullptr, warped, config.ablation, identity,
          config.refiner.levels());
      Tensor<float> nhat =
          g.forward(inputs.target_stack, inputs.source_stack, inputs.fields);

      Tensor<float> nn = nn_loss(nhat, sample.target_image,
                                 config.loss.nn_window);
      Tensor<float> perc = feature_loss(nhat, sample.target_image, features);
      Tensor<float> sty = style_loss(nhat, sample.target_image, features);
      Tensor<float> g_loss = add(
          add(scale(nn, config.loss.nn), scale(perc, config.loss.feature)),
          scale(sty, config.loss.style));
      acc[0] += nn.item();
      acc[1] += perc.item();
      acc[2] += sty.item();
      if (adversarial) {
        GanLossResult<float> gan = gan_losses(
            dnet, discriminator_stack(sample.target_image, sample.target_map),
            discriminator_stack(nhat, sample.target_map));
        g_loss = add(g_loss, scale(gan.g_term, config.loss.adv));
        acc[3] += gan.g_term.item();
        acc[4] += gan.d_term.item();
        d_total = d_total.defined() ? add(d_total, gan.d_term) : gan.d_term;
      }
      g_total = g_total.defined() ? add(g_total, g_loss) : g_loss;
    }
    g_total = scale(g_total, 1.0 / config.stage2.batch);
    const double g_value = g_total.item();
    if (!std::isfinite(g_value)) {
      std::vector<std::pair<std::string, double>> terms;
      for (size_t i = 0; i + 1 < columns.size(); ++i) {
        terms.emplace_back(columns[i], acc[i] / config.stage2.batch);
      }
      abort_nan("train_stage2", step, terms);
    }
    g_total.backward();
    adam_step(g_params, g_state, config.optim_stage2);
    g.params().zero_grads();
    // The generator pass pushed gradients into the discriminator too;
    // they belong to the generator objective, not the critic update.
    dnet.params().zero_grads();

    if (adversarial) {
      d_total = scale(d_total, 1.0 / config.stage2.batch);
      const double d_value = d_total.item();
      if (!std::isfinite(d_value)) {
        abort_nan("train_stage2(d)", step, {{"adv_d", d_value}});
      }
      d_total.backward();
      adam_step(d_params, d_state, config.optim_disc);
      dnet.params().zero_grads();
    }

    if (step % config.stage2.log_every == 0 || step == config.stage2.steps) {
      std::vector<double> row;
      for (double a : acc) row.push_back(a / config.stage2.batch);
      row.push_back(g_value);
      log.row(step, row);
    }
    if (config.stage2.checkpoint_every > 0 &&
        step % config.stage2.checkpoint_every == 0) {
      std::vector<CheckpointEntry> entries = table_to_entries(g.params(), "g.");
      std::vector<CheckpointEntry> d_entries =
          table_to_entries(dnet.params(), "d.");
      entries.insert(entries.end(), d_entries.begin(), d_entries.end());
      save_with_config(config,
                       fs::path(config.out_dir) /
                           ("refiner_step" + std::to_string(step) + ".ckpt"),
                       entries);
    }
    result.final_total = g_value;
  }
  result.steps = config.stage2.steps;
  result.checkpoint = refiner_ckpt_path(config);
  std::vector<CheckpointEntry> entries = table_to_entries(g.params(), "g.");
  std::vector<CheckpointEntry> d_entries = table_to_entries(dnet.params(), "d.");
  entries.insert(entries.end(), d_entries.begin(), d_entries.end());
  save_with_config(config, result.checkpoint, entries);
  return result;
}

// ---------------------------------------------------------------------------

EvalSummary evaluate_synthetic(const PipelineConfig& config,
                               const Inpainter<float>* inpainter,
                               const Refiner<float>& refiner,
                               const fs::path& csv_path) {
  NoGradGuard no_grad;
  EvalSummary summary;
  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path);
    csv << "index,ssim,l1,tex_l1\n";
  }
  double tex_acc = 0.0;
  int tex_count = 0;
  for (int i = 0; i < config.heldout_pairs; ++i) {
    const uint64_t seed = scene_seed(config, config.train_pairs + i);
    const SceneSample sample = generate_pair(seed, config.scene);
    std::optional<IdentityCond> identity;
    if (config.garment_transfer) {
      identity =
          IdentityCond{sample.target_image, sample.identity_mask_target};
    }
    InferenceOutputs out =
        run_pipeline(config, inpainter, refiner, sample.source_image,
                     sample.source_map, sample.target_map, identity);
    const double s = ssim(out.output, sample.target_image);
    const double l1 =
        mean_abs_diff(out.output.value(), sample.target_image.value());
    double tex_l1 = std::nan("");
    if (out.texture.texture.has_value()) {
      tex_l1 = mean_abs_diff(out.texture.texture->rgb, sample.gt_texture.rgb);
      tex_acc += tex_l1;
      ++tex_count;
    }
    summary.mean_ssim += s;
    summary.mean_l1 += l1;
    ++summary.pairs;
    if (csv.is_open()) {
      csv << i << "," << s << "," << l1 << "," << tex_l1 << "\n";
    }
  }
  if (summary.pairs > 0) {
    summary.mean_ssim /= summary.pairs;
    summary.mean_l1 /= summary.pairs;
  }
  if (tex_count > 0) summary.mean_tex_l1 = tex_acc / tex_count;
  return summary;
}

EvalSummary evaluate_dataset(const PipelineConfig& config,
                             const Inpainter<float>* inpainter,
                             const Refiner<float>& refiner,
                             const fs::path& dir, const fs::path& csv_path) {
  NoGradGuard no_grad;
  EvalSummary summary;
  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path);
    csv << "source,target,ssim,l1,tex_l1\n";
  }
  double tex_acc = 0.0;
  int tex_count = 0;
  for (const PairRecord& pair : dataset_index(dir)) {
    const Tensor<float> source = read_png(pair.source.image.string());
    const UvMap m_s = read_uvm(pair.source.uvm.string());
    const Tensor<float> target = read_png(pair.target.image.string());
    const UvMap m_n = read_uvm(pair.target.uvm.string());
    std::optional<IdentityCond> identity;
    if (config.garment_transfer) {
      identity = IdentityCond{
          target, identity_mask_from_map(m_n, config.scene.identity_band_v)};
    }
    InferenceOutputs out = run_pipeline(config, inpainter, refiner, source,
                                        m_s, m_n, identity);
    const double s = ssim(out.output, target);
    const double l1 = mean_abs_diff(out.output.value(), target.value());
    double tex_l1 = std::nan("");
    if (out.texture.texture.has_value() && pair.gt_texture.has_value()) {
      const Tensor<float> gt = read_png(pair.gt_texture->string());
      if (gt.extent(2) == out.texture.texture->height &&
          gt.extent(3) == out.texture.texture->width) {
        tex_l1 = mean_abs_diff(out.texture.texture->rgb, gt.value());
        tex_acc += tex_l1;
        ++tex_count;
      }
    }
    summary.mean_ssim += s;
    summary.mean_l1 += l1;
    ++summary.pairs;
    if (csv.is_open()) {
      csv << pair.source.id << "_" << pair.source.pose << ","
          << pair.target.id << "_" << pair.target.pose << "," << s << "," << l1
          << "," << tex_l1 << "\n";
    }
  }
  if (summary.pairs > 0) {
    summary.mean_ssim /= summary.pairs;
    summary.mean_l1 /= summary.pairs;
  }
  if (tex_count > 0) summary.mean_tex_l1 = tex_acc / tex_count;
  return summary;
}

double eval_identity_completion(const PipelineConfig& config,
                                const Inpainter<float>& inpainter, int count) {
  NoGradGuard no_grad;
  const int img = config.scene.image_size;
  double acc = 0.0;
  for (int i = 0; i < count; ++i) {
    const uint64_t seed = scene_seed(config, config.train_pairs + i);
    const CoordTexture c = full_coord_map(seed, config.scene);
    Tensor<float> d = inpainter.forward(
        coord_texture_to_input<float>(c, img, img), img, img);
    const auto& v = d.value();
    const int64_t plane = int64_t(c.width) * c.height;
    double err = 0.0;
    for (int64_t j = 0; j < plane; ++j) {
      err += std::fabs(double(v[j]) - c.x[j]) +
             std::fabs(double(v[plane + j]) - c.y[j]);
    }
    acc += err / double(2 * plane);
  }
  return count > 0 ? acc / count : 0.0;
}

}  // namespace retex
