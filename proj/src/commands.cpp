// SPDX-License-Identifier: Apache-2.0
#include "semsplat/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "semsplat/error.hpp"
#include "semsplat/io.hpp"
#include "semsplat/log.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/rasterizer.hpp"

namespace semsplat {
namespace {

std::string view_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", index);
  return buf;
}

std::string numbered(const char* prefix, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d%s", prefix, index, ext);
  return buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

std::string join_vec(const Vec3& v) {
  return format_exact(v.x()) + " " + format_exact(v.y()) + " " + format_exact(v.z());
}

Vec3 parse_vec(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  Vec3 v;
  if (!(is >> v.x() >> v.y() >> v.z())) throw DataError("meta.txt: malformed " + key);
  return v;
}

std::vector<int> parse_ints(const std::string& text) {
  std::istringstream is(text);
  std::vector<int> out;
  int v;
  while (is >> v) out.push_back(v);
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> all_view_ids(const fs::path& dataset) {
  std::vector<int> ids;
  for (const auto& e : fs::directory_iterator(dataset)) {
    const std::string name = e.path().filename().string();
    int idx = -1;
    if (std::sscanf(name.c_str(), "view_%d", &idx) == 1 && name == view_stem(idx) + ".cam") ids.push_back(idx);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Camera load_view_camera(const fs::path& dataset, int id) {
  const fs::path p = dataset / (view_stem(id) + ".cam");
  if (!fs::exists(p)) throw DataError("unknown view id " + std::to_string(id) + " in " + dataset.string());
  return read_camera(p);
}

std::vector<Camera> load_cameras(const fs::path& dataset, const std::vector<int>& ids) {
  std::vector<Camera> cams;
  for (int id : ids) cams.push_back(load_view_camera(dataset, id));
  return cams;
}

}  // namespace

DatasetMeta read_dataset_meta(const fs::path& dataset) {
  if (!fs::is_directory(dataset)) throw DataError("dataset directory " + dataset.string() + " does not exist");
  DatasetMeta m;
  const fs::path meta_path = dataset / "meta.txt";
  if (fs::exists(meta_path)) {
    std::map<std::string, std::string> kv;
    try {
      kv = read_key_value_file(meta_path);
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
    const auto get = [&](const std::string& k) -> const std::string& {
      auto it = kv.find(k);
      if (it == kv.end()) throw DataError("meta.txt: missing key " + k);
      return it->second;
    };
    try {
      m.class_count = std::stoi(get("class_count"));
      m.width = std::stoi(get("width"));
      m.height = std::stoi(get("height"));
      m.seed = std::stoull(get("seed"));
      const int boxes = std::stoi(get("box_count"));
      for (int k = 0; k < boxes; ++k) {
        const auto vals = parse_ints(get("box_" + std::to_string(k) + "_class"));
        Box b{parse_vec(get("box_" + std::to_string(k) + "_lo"), "box lo"),
              parse_vec(get("box_" + std::to_string(k) + "_hi"), "box hi"), vals.empty() ? 0 : vals[0]};
        m.boxes.push_back(b);
      }
    } catch (const std::logic_error& e) {
      throw DataError(std::string("meta.txt: ") + e.what());
    }
    m.bounds_lo = parse_vec(get("bounds_lo"), "bounds_lo");
    m.bounds_hi = parse_vec(get("bounds_hi"), "bounds_hi");
  } else {
    // Bare prior bundles: bounds from the point cloud, classes from the logits.
    const PointCloud cloud = read_ply_points(dataset / "points.ply");
    if (cloud.points.empty()) throw DataError("points.ply is empty");
    m.bounds_lo = m.bounds_hi = cloud.points.front();
    for (const auto& p : cloud.points) {
      m.bounds_lo = m.bounds_lo.cwiseMin(p);
      m.bounds_hi = m.bounds_hi.cwiseMax(p);
    }
  }
  const fs::path split_path = dataset / "split.txt";
  if (fs::exists(split_path)) {
    const auto kv = read_key_value_file(split_path);
    if (auto it = kv.find("train"); it != kv.end()) m.train_views = parse_ints(it->second);
    if (auto it = kv.find("test"); it != kv.end()) m.test_views = parse_ints(it->second);
  } else {
    m.train_views = all_view_ids(dataset);
  }
  if (m.train_views.empty()) throw DataError(dataset.string() + ": no training views");
  return m;
}

TrainConfig resolve_config(const std::optional<fs::path>& config_file, const std::map<std::string, std::string>& overrides,
                           std::optional<std::uint64_t> seed) {
  TrainConfig cfg;
  if (config_file) cfg.apply(read_key_value_file(*config_file));
  cfg.apply(overrides);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

void cmd_synth(const fs::path& out, const SynthParams& params) {
  SynthParams p = params;
  if (p.class_count <= 0) p.class_count = kFirstBoxClass + p.box_count;
  if (p.views < 1 || p.width < 2 || p.height < 2) throw ConfigError("synth: need >= 1 view and >= 2x2 pixels");
  if (p.test_every < 2) throw ConfigError("synth: test_every must be >= 2");
  make_dir(out);
  SyntheticScene room;
  try {
    room = generate_room(p.seed, p.box_count, p.class_count);
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  // Cameras are defined at 640x480 and rescaled to the requested grid.
  std::vector<Camera> cams = default_camera_rig(room, p.views, 640, 480);
  std::vector<int> train, test;
  for (int i = 0; i < p.views; ++i) {
    const Camera cam = (p.width == 640 && p.height == 480) ? cams[std::size_t(i)] : cams[std::size_t(i)].resized(p.width, p.height);
    const ViewSupervision exact = raycast_view(room, cam, p.threads);
    const Image logits = make_teacher_logits(exact.labels, p.class_count);
    const Image prior = perturb_depth(exact.depth, exact.labels, p.seed * 1000003ULL + std::uint64_t(i) + 1);
    write_view(out, i, exact, logits, prior);
    ((i % p.test_every) == p.test_every - 1 ? test : train).push_back(i);
  }
  write_ply(out / "gt_mesh.ply", room.mesh());
  write_ply(out / "points.ply", init_point_cloud(room, p.points, -1.0, p.seed + 17));

  std::map<std::string, std::string> meta = {
      {"class_count", std::to_string(p.class_count)},
      {"width", std::to_string(p.width)},
      {"height", std::to_string(p.height)},
      {"seed", std::to_string(p.seed)},
      {"box_count", std::to_string(room.boxes.size())},
      {"bounds_lo", join_vec(room.room_lo)},
      {"bounds_hi", join_vec(room.room_hi)},
  };
  for (std::size_t k = 0; k < room.boxes.size(); ++k) {
    meta["box_" + std::to_string(k) + "_lo"] = join_vec(room.boxes[k].lo);
    meta["box_" + std::to_string(k) + "_hi"] = join_vec(room.boxes[k].hi);
    meta["box_" + std::to_string(k) + "_class"] = std::to_string(room.boxes[k].class_id);
  }
  write_key_value_file(out / "meta.txt", meta);
  write_key_value_file(out / "split.txt", {{"train", join_ints(train)}, {"test", join_ints(test)}});
}

GaussianScene init_scene_from_points(const PointCloud& cloud, int class_count, int threads) {
  GaussianScene scene(class_count);
  const std::vector<double> spacing = mean_knn_distance(cloud.points, 3, threads);
  const bool has_classes = cloud.classes.size() == cloud.size();
  const bool has_colors = cloud.colors.size() == cloud.size();
  scene.primitives.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    GaussianPrimitive p;
    p.position = cloud.points[i];
    p.log_scale = Vec3::Constant(std::log(std::max(spacing[i], 1e-4)));
    p.opacity_logit = logit(0.1);
    const Vec3 c = has_colors ? cloud.colors[i] : Vec3::Constant(0.5);
    for (int k = 0; k < 3; ++k) p.color_logit[k] = logit(std::clamp(c[k], 0.01, 0.99));
    p.semantic.assign(std::size_t(class_count), 0.0);
    if (has_classes) {
      const int cls = cloud.classes[i];
      if (cls < 0 || cls >= class_count) throw DataError("points.ply: class " + std::to_string(cls) + " out of range");
      p.semantic[std::size_t(cls)] = 2.0;
    }
    scene.primitives.push_back(std::move(p));
  }
  return scene;
}

TrainConfig apply_ablation_flags(TrainConfig cfg, bool disable_sem, bool disable_depth, bool disable_normal) {
  if (disable_sem) cfg.lambda_sem = 0.0;
  if (disable_depth) cfg.omega_d = 0.0;
  if (disable_normal) {
    cfg.omega_ng = 0.0;
    cfg.omega_nb = 0.0;
  }
  return cfg;
}

TrainArtifacts cmd_train(const TrainParams& params) {
  const DatasetMeta meta = read_dataset_meta(params.dataset);
  TrainConfig cfg = apply_ablation_flags(params.config, params.disable_sem, params.disable_depth, params.disable_normal);
  cfg.validate();
  const auto loaded = load_prior_bundle(params.dataset, meta.class_count, int(cfg.edge_mask_dilation));
  const int class_count = loaded.front().priors.teacher_logits.channels;

  std::vector<TrainView> views;
  std::vector<Camera> cams;
  for (int id : meta.train_views) {
    auto it = std::find_if(loaded.begin(), loaded.end(), [&](const DatasetView& v) { return v.index == id; });
    if (it == loaded.end()) throw DataError("split.txt lists missing view " + std::to_string(id));
    views.push_back({it->camera, it->image, it->priors});
    cams.push_back(it->camera);
  }
  const double extent = camera_extent(cams);
  if (!(cfg.spatial_lr_scale > 0)) cfg.spatial_lr_scale = extent;

  const GaussianScene init = init_scene_from_points(read_ply_points(params.dataset / "points.ply"), class_count,
                                                    params.threads);
  make_dir(params.out);
  write_key_value_file(params.out / "config.resolved", cfg.to_map());

  TrainOptions opts;
  opts.threads = params.threads;
  opts.extent = extent;
  const fs::path ckpt_dir = params.out / "checkpoints";
  opts.on_checkpoint = [&](std::int64_t it, const GaussianScene& scene, const OptimizerState& state) {
    make_dir(ckpt_dir);
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%06lld", static_cast<long long>(it));
    write_checkpoint(ckpt_dir / (std::string(name) + ".agsc"), scene);
    write_optimizer_state(ckpt_dir / (std::string(name) + ".agos"), state, scene.class_count);
  };
  opts.on_iteration = [&](const TrainLogRow& row) {
    if (row.iteration % 500 == 0) {
      std::fprintf(stderr, "iter %lld  total %.5f  rgb %.5f  primitives %zu\n", static_cast<long long>(row.iteration),
                   row.total, row.l_rgb, row.primitives);
    }
  };
  if (cfg.eval_interval > 0 && !meta.test_views.empty()) {
    opts.on_eval = [&](std::int64_t it, const GaussianScene& scene) {
      EvalRow row;
      row.iteration = it;
      for (int id : meta.test_views) {
        const Camera cam = load_view_camera(params.dataset, id);
        const Image gt = read_png(params.dataset / (view_stem(id) + ".png"));
        const Image rgb = render(scene, cam, {params.threads}).rgb;
        row.psnr += psnr(gt, rgb);
        row.ssim += ssim(rgb, gt).value;
      }
      row.psnr /= double(meta.test_views.size());
      row.ssim /= double(meta.test_views.size());
      return row;
    };
  }

  TrainArtifacts art;
  art.resolved = cfg;
  art.result = train(init, views, cfg, opts);
  art.checkpoint = params.out / "scene.agsc";
  art.log = params.out / "train_log.csv";
  write_checkpoint(art.checkpoint, art.result.scene);
  write_optimizer_state(params.out / "optimizer.agos", art.result.state, art.result.scene.class_count);
  art.result.log.write_csv(art.log);
  art.result.log.write_eval_csv(params.out / "eval_log.csv");
  art.result.log.write_timing_csv(params.out / "timing.csv");
  return art;
}

void render_views(const GaussianScene& scene, const fs::path& dataset, const std::vector<int>& requested,
                  const fs::path& out, int threads) {
  const std::vector<int> ids = requested.empty() ? all_view_ids(dataset) : requested;
  const std::vector<Camera> cams = load_cameras(dataset, ids);
  make_dir(out);
  const auto palette = scene.class_palette.size() == std::size_t(scene.class_count) ? scene.class_palette
                                                                                     : make_class_palette(scene.class_count);
  for (std::size_t v = 0; v < ids.size(); ++v) {
    const RenderOutput r = render(scene, cams[v], {threads});
    write_png(out / numbered("render", ids[v], ".png"), r.rgb);
    write_pfm(out / numbered("depth", ids[v], ".pfm"), r.depth);
    write_semf(out / numbered("logits", ids[v], ".semf"), r.semantic_logits);
    Image labels(r.rgb.width, r.rgb.height, 3);
    const LabelMap argmax = argmax_labels(r.semantic_logits);
    for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
      if (r.accum_alpha.data[p] <= 0.0) continue;
      const Rgb8 c = palette[std::size_t(argmax.labels[p])];
      labels.data[p * 3] = c.r / 255.0;
      labels.data[p * 3 + 1] = c.g / 255.0;
      labels.data[p * 3 + 2] = c.b / 255.0;
    }
    write_png(out / numbered("labels", ids[v], ".png"), labels);
  }
}

void cmd_render(const RenderParams& params) {
  render_views(read_checkpoint(params.checkpoint), params.dataset, params.views, params.out, params.threads);
}

Image fusion_depth(const GaussianScene& scene, const Camera& cam, int threads) {
  const RenderOutput r = render(scene, cam, {threads});
  Image d(cam.width, cam.height, 1);
  for (std::size_t p = 0; p < d.data.size(); ++p) {
    const double a = r.accum_alpha.data[p];
    if (a >= 0.5) d.data[p] = r.depth.data[p] / a;
  }
  return d;
}

TriangleMesh fuse_depth_maps(const std::vector<Camera>& cams, const std::vector<Image>& depths, const Vec3& lo,
                             const Vec3& hi, double voxel, int threads) {
  TsdfVolume vol = TsdfVolume::covering(lo, hi, voxel);
  for (std::size_t i = 0; i < cams.size(); ++i) tsdf_integrate(vol, depths[i], cams[i], threads);
  return marching_cubes(vol);
}

TriangleMesh extract_mesh(const GaussianScene& scene, const fs::path& dataset, const MeshParams& params) {
  const DatasetMeta meta = read_dataset_meta(dataset);
  const std::vector<Camera> cams = load_cameras(dataset, meta.train_views);
  std::vector<Image> depths;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    if (params.oracle_depth) {
      depths.push_back(read_pfm(dataset / (view_stem(meta.train_views[i]) + ".gt.pfm")));
    } else {
      depths.push_back(fusion_depth(scene, cams[i], params.threads));
    }
  }
  return fuse_depth_maps(cams, depths, meta.bounds_lo, meta.bounds_hi, params.voxel_size, params.threads);
}

EvalResult evaluate_scene(const GaussianScene& scene, const EvalParams& params) {
  const DatasetMeta meta = read_dataset_meta(params.dataset);
  EvalResult res;
  for (int id : meta.test_views) {
    const Camera cam = load_view_camera(params.dataset, id);
    const Image gt = read_png(params.dataset / (view_stem(id) + ".png"));
    const Image rgb = render(scene, cam, {params.threads}).rgb;
    res.views.push_back({id, psnr(gt, rgb), ssim(rgb, gt).value});
  }
  for (const auto& v : res.views) {
    res.mean_psnr += v.psnr / double(res.views.size());
    res.mean_ssim += v.ssim / double(res.views.size());
  }
  const fs::path gt_path = params.dataset / "gt_mesh.ply";
  if (!fs::exists(gt_path)) return res;

  const TriangleMesh pred = extract_mesh(scene, params.dataset, {params.voxel_size, params.oracle_depth, params.threads});
  std::vector<Vec3> gt_points = sample_surface(read_ply_mesh(gt_path), params.samples, params.seed);
  // Keep only ground truth the training views could observe.
  std::vector<Camera> cams;
  std::vector<Image> exact;
  for (int id : meta.train_views) {
    const fs::path p = params.dataset / (view_stem(id) + ".gt.pfm");
    if (!fs::exists(p)) continue;
    cams.push_back(load_view_camera(params.dataset, id));
    exact.push_back(read_pfm(p));
  }
  if (!cams.empty()) gt_points = visible_points(gt_points, cams, exact, params.threshold);
  GeometryReport g;
  g.threshold = params.threshold;
  if (pred.empty() || gt_points.empty()) {
    warn("evaluation: empty predicted or ground-truth surface; geometry scores set to worst case");
    g.accuracy = g.completeness = std::numeric_limits<double>::infinity();
  } else {
    g = geometry_metrics(sample_surface(pred, params.samples, params.seed + 1), gt_points, params.threshold,
                         params.threads);
  }
  res.geometry = g;
  return res;
}

EvalResult cmd_eval(const EvalParams& params) {
  const EvalResult res = evaluate_scene(read_checkpoint(params.checkpoint), params);
  make_dir(params.out);
  std::ofstream csv(params.out / "eval.csv");
  if (!csv) throw DataError("cannot write " + (params.out / "eval.csv").string());
  csv << "view,psnr,ssim,lpips\n";
  for (const auto& v : res.views) csv << v.view << ',' << format_exact(v.psnr) << ',' << format_exact(v.ssim) << ",n/a\n";
  csv << "mean," << format_exact(res.mean_psnr) << ',' << format_exact(res.mean_ssim) << ",n/a\n";
  if (res.geometry) {
    std::ofstream txt(params.out / "geometry.txt");
    txt << res.geometry->to_text() << "voxel_size = " << format_exact(params.voxel_size)
        << "\ntruncation_voxels = " << format_exact(kTruncationVoxels) << '\n';
    std::ofstream g(params.out / "geometry.csv");
    g << GeometryReport::csv_header() << '\n' << res.geometry->csv_row() << '\n';
  }
  return res;
}

GaussianScene cmd_edit(const EditParams& params) {
  const GaussianScene scene = read_checkpoint(params.checkpoint);
  GaussianScene edited = edit_scene(scene, params.mode, params.classes, params.color);
  make_dir(params.out);
  write_checkpoint(params.out / "edited.agsc", edited);
  if (params.dataset) render_views(edited, *params.dataset, params.views, params.out, params.threads);
  return edited;
}

std::string ablation_table_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,psnr,ssim,lpips," << GeometryReport::csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.name << ',' << format_exact(r.eval.mean_psnr) << ',' << format_exact(r.eval.mean_ssim) << ",n/a,"
       << (r.eval.geometry ? r.eval.geometry->csv_row() : "n/a,n/a,n/a,n/a,n/a,n/a") << '\n';
  }
  return os.str();
}

std::vector<AblationRow> cmd_ablate(const AblationParams& params) {
  struct Rung {
    const char* name;
    bool sem, depth, normal;
  };
  const Rung rungs[] = {{"base", false, false, false},
                        {"+sem", true, false, false},
                        {"+depth", true, true, false},
                        {"+normals", true, true, true}};
  make_dir(params.out);
  std::vector<AblationRow> rows;
  for (const Rung& r : rungs) {
    const std::string dir_name = r.name[0] == '+' ? std::string("plus_") + (r.name + 1) : std::string(r.name);
    TrainParams tp{params.dataset, params.out / dir_name, params.config, !r.sem, !r.depth, !r.normal, params.threads};
    std::fprintf(stderr, "ablation rung %s\n", r.name);
    const TrainArtifacts art = cmd_train(tp);
    EvalParams ep = params.eval;
    ep.dataset = params.dataset;
    ep.checkpoint = art.checkpoint;
    ep.out = tp.out;
    ep.threads = params.threads;
    rows.push_back({r.name, art.checkpoint, cmd_eval(ep)});
  }
  std::ofstream(params.out / "ablation.csv") << ablation_table_csv(rows);
  return rows;
}

namespace {

EditMode parse_mode(const std::string& s) {
  if (s == "extract") return EditMode::extract;
  if (s == "delete" || s == "remove") return EditMode::remove;
  if (s == "highlight") return EditMode::highlight;
  throw ConfigError("unknown edit mode '" + s + "' (extract, delete, highlight)");
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Semantic Gaussian splatting: synthesize, train, render, evaluate, edit"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int threads = 1;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key = value file overlaying the training defaults");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--set", sets, "config override key=value (repeatable)");

  SynthParams synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic room dataset");
  c_synth->add_option("--boxes", synth.box_count, "number of boxes");
  c_synth->add_option("--classes", synth.class_count, "semantic class count");
  c_synth->add_option("--width", synth.width);
  c_synth->add_option("--height", synth.height);
  c_synth->add_option("--views", synth.views);
  c_synth->add_option("--points", synth.points, "initial point cloud size");

  std::string dataset, checkpoint;
  std::optional<std::int64_t> total_iters;
  bool no_sem = false, no_depth = false, no_normal = false;
  auto* c_train = app.add_subcommand("train", "optimize a scene on a dataset");
  c_train->add_option("--dataset", dataset)->required();
  c_train->add_option("--total-iters", total_iters);
  c_train->add_flag("--disable-sem", no_sem);
  c_train->add_flag("--disable-depth", no_depth);
  c_train->add_flag("--disable-normal", no_normal);

  std::vector<int> views;
  auto* c_render = app.add_subcommand("render", "render views of a checkpoint");
  c_render->add_option("--checkpoint", checkpoint)->required();
  c_render->add_option("--dataset", dataset)->required();
  c_render->add_option("--views", views, "view ids (default: all)");

  EvalParams eval;
  auto* c_eval = app.add_subcommand("eval", "held-out image metrics and mesh geometry metrics");
  c_eval->add_option("--checkpoint", checkpoint)->required();
  c_eval->add_option("--dataset", dataset)->required();
  c_eval->add_option("--threshold", eval.threshold, "F-score distance threshold");
  c_eval->add_option("--voxel", eval.voxel_size);
  c_eval->add_option("--samples", eval.samples);
  c_eval->add_flag("--oracle-depth", eval.oracle_depth, "fuse the dataset's exact depth");

  MeshParams mesh;
  bool ascii = false;
  auto* c_mesh = app.add_subcommand("extract-mesh", "TSDF-fuse training-view depth and write mesh.ply");
  c_mesh->add_option("--checkpoint", checkpoint)->required();
  c_mesh->add_option("--dataset", dataset)->required();
  c_mesh->add_option("--voxel", mesh.voxel_size);
  c_mesh->add_flag("--oracle-depth", mesh.oracle_depth);
  c_mesh->add_flag("--ascii", ascii);

  std::string mode = "extract";
  std::vector<int> classes;
  std::vector<double> color;
  auto* c_edit = app.add_subcommand("edit", "extract, delete or highlight semantic classes");
  c_edit->add_option("--checkpoint", checkpoint)->required();
  c_edit->add_option("--mode", mode, "extract | delete | highlight");
  c_edit->add_option("--classes", classes)->required();
  c_edit->add_option("--color", color, "highlight color r g b in [0, 1]")->expected(3);
  c_edit->add_option("--dataset", dataset, "re-render the edited scene on this dataset");
  c_edit->add_option("--views", views);

  auto* c_ablate = app.add_subcommand("ablate", "cumulative loss ablation (base, +sem, +depth, +normals)");
  c_ablate->add_option("--dataset", dataset)->required();
  c_ablate->add_option("--total-iters", total_iters);
  c_ablate->add_option("--samples", eval.samples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto overrides = parse_overrides(sets);
    if (total_iters) overrides["total_iters"] = std::to_string(*total_iters);
    const std::optional<fs::path> cfg_file = config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path);

    if (*c_synth) {
      synth.seed = seed.value_or(0);
      synth.threads = threads;
      cmd_synth(out, synth);
      std::printf("dataset: %s\n", out.c_str());
    } else if (*c_train) {
      const TrainArtifacts art =
          cmd_train({dataset, out, resolve_config(cfg_file, overrides, seed), no_sem, no_depth, no_normal, threads});
      std::printf("checkpoint: %s\nlog: %s\n", art.checkpoint.c_str(), art.log.c_str());
    } else if (*c_render) {
      cmd_render({checkpoint, dataset, out, views, threads});
    } else if (*c_eval) {
      eval.checkpoint = checkpoint;
      eval.dataset = dataset;
      eval.out = out;
      eval.threads = threads;
      eval.seed = seed.value_or(0);
      const EvalResult r = cmd_eval(eval);
      std::printf("psnr %.4f  ssim %.4f\n", r.mean_psnr, r.mean_ssim);
      if (r.geometry) std::printf("%s", r.geometry->to_text().c_str());
    } else if (*c_mesh) {
      mesh.threads = threads;
      const TriangleMesh m = extract_mesh(read_checkpoint(checkpoint), dataset, mesh);
      make_dir(out);
      write_ply(fs::path(out) / "mesh.ply", m, ascii ? PlyFormat::ascii : PlyFormat::binary_little_endian);
      std::printf("mesh: %s (%zu triangles)\n", (fs::path(out) / "mesh.ply").c_str(), m.triangles.size());
    } else if (*c_edit) {
      EditParams ep;
      ep.checkpoint = checkpoint;
      ep.out = out;
      if (!dataset.empty()) ep.dataset = fs::path(dataset);
      ep.mode = parse_mode(mode);
      ep.classes = std::set<int>(classes.begin(), classes.end());
      if (!color.empty()) ep.color = Vec3(color[0], color[1], color[2]);
      ep.views = views;
      ep.threads = threads;
      try {
        const GaussianScene edited = cmd_edit(ep);
        std::printf("edited: %s (%zu primitives)\n", (fs::path(out) / "edited.agsc").c_str(), edited.size());
      } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
      }
    } else if (*c_ablate) {
      AblationParams ap;
      ap.dataset = dataset;
      ap.out = out;
      ap.config = resolve_config(cfg_file, overrides, seed);
      ap.eval = eval;
      ap.eval.seed = ap.config.seed;
      ap.threads = threads;
      const auto rows = cmd_ablate(ap);
      std::printf("%s", ablation_table_csv(rows).c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace semsplat
