// Copyright 2026 The depthgroup Authors
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

#include "depthgroup/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "depthgroup/artifacts.hpp"
#include "depthgroup/contrastive.hpp"
#include "depthgroup/evaluation.hpp"
#include "depthgroup/grouping.hpp"
#include "depthgroup/io.hpp"
#include "depthgroup/log.hpp"
#include "depthgroup/sampling.hpp"
#include "depthgroup/scene.hpp"

namespace depthgroup::cli {
namespace {

using nlohmann::json;

struct Common {
  std::string manifest;
  std::string cache;
  bool force = false;
  int jobs = 1;
};

struct Context {
  Manifest manifest;
  fs::path cache;
  bool force = false;
  int jobs = 1;
  std::ostream* out = nullptr;

  fs::path stage_dir(const std::string& stage) const { return cache / stage; }
};

Context make_context(const Common& c, std::ostream& out) {
  Context ctx;
  ctx.manifest = load_manifest(c.manifest);
  if (!c.cache.empty()) {
    ctx.cache = c.cache;
  } else if (const char* env = std::getenv("DEPTHGROUP_CACHE"); env && *env) {
    ctx.cache = env;
  } else {
    ctx.cache = ctx.manifest.path.parent_path() / "depthgroup_cache";
  }
  if (c.jobs < 1) throw InputError("--jobs must be >= 1");
  ctx.force = c.force;
  ctx.jobs = c.jobs;
  ctx.out = &out;
  return ctx;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("manifest", c.manifest, "Dataset manifest (JSON)")->required();
  sub->add_option("--cache", c.cache, "Derived-artifact root (default: $DEPTHGROUP_CACHE or next to the manifest)");
  sub->add_flag("--force", c.force, "Run even when upstream artifacts are stale");
  sub->add_option("--jobs", c.jobs, "Frame/batch-level worker threads")->capture_default_str();
}

/// Fills options the user did not pass from the manifest's config snapshot for `stage`.
template <typename T>
void config_default(const Context& ctx, CLI::App* sub, const std::string& stage, const std::string& name, T& value) {
  if (sub->get_option("--" + name)->count() > 0) return;
  const json& cfg = ctx.manifest.config;
  if (!cfg.contains(stage) || !cfg.at(stage).contains(name)) return;
  try {
    value = cfg.at(stage).at(name).get<T>();
  } catch (const json::exception& e) {
    throw InputError("manifest config " + stage + "." + name + ": " + e.what());
  }
}

std::optional<std::uint64_t> resolve_seed(const Context& ctx, CLI::App* sub, std::uint64_t flag_value) {
  if (sub->get_option("--seed")->count() > 0) return flag_value;
  return ctx.manifest.seed;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  for (int w = 0; w < std::min(jobs, n); ++w) {
    workers.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string current_hash(const Context& ctx, const std::string& name);

/// Throws unless `stage` exists and every upstream it recorded still matches.
void verify_fresh(const Context& ctx, const std::string& stage) {
  const auto stamp = read_stamp(ctx.stage_dir(stage));
  if (!stamp) throw InputError("stage '" + stage + "' has no artifacts under " + ctx.cache.string() + "; run it first");
  for (const auto& [name, recorded] : stamp->upstream) {
    if (current_hash(ctx, name) == recorded) continue;
    const std::string msg = "'" + stage + "' artifacts are stale with respect to '" + name + "'";
    if (!ctx.force) throw StaleArtifactError(msg + "; rerun the stage or pass --force");
    log::warn(msg + " (continuing because of --force)");
  }
}

std::string current_hash(const Context& ctx, const std::string& name) {
  if (name == "frames") return ctx.manifest.content_hash();
  verify_fresh(ctx, name);
  return read_stamp(ctx.stage_dir(name))->hash();
}

fs::path reset_stage(const Context& ctx, const std::string& stage) {
  const fs::path dir = ctx.stage_dir(stage);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string batch_name(int b) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "batch_%03d", b);
  return buf;
}

std::vector<fs::path> batch_dirs(const fs::path& stage_dir) {
  std::vector<fs::path> out;
  for (int b = 0; fs::exists(stage_dir / batch_name(b)); ++b) out.push_back(stage_dir / batch_name(b));
  return out;
}

RegionMap load_regions(const Context& ctx, const std::string& frame_id, const DepthGrid& depth) {
  return region_map_from_labels(io::read_label_png(ctx.stage_dir("group") / frame_id / "regions.png"), depth);
}

std::string file_hash(const fs::path& p) { return hex64(fnv1a64(io::read_text(p))); }

Rgb palette(int id) {
  const std::uint64_t h = fnv1a64(std::to_string(id));
  return {static_cast<std::uint8_t>(64 + (h & 0x7f)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
}

/// Blends label colours over the image and darkens label boundaries.
RgbImage overlay(const RgbImage& rgb, const LabelGrid& labels, bool blend) {
  RgbImage out = rgb;
  for (int r = 0; r < rgb.rows(); ++r)
    for (int c = 0; c < rgb.cols(); ++c) {
      const int l = labels(r, c);
      const bool edge = (r + 1 < rgb.rows() && labels(r + 1, c) != l) || (c + 1 < rgb.cols() && labels(r, c + 1) != l);
      if (edge) {
        out(r, c) = {0, 0, 0};
      } else if (blend) {
        const Rgb p = palette(l);
        for (int ch = 0; ch < 3; ++ch) out(r, c)[ch] = static_cast<std::uint8_t>((rgb(r, c)[ch] + p[ch]) / 2);
      }
    }
  return out;
}

// ---------------------------------------------------------------------------------------------

struct GroupArgs {
  Common common;
  int superpixels = 10000;
  double w_ocln = 48.0, w_sup = 200.0, bias = -4.0, t_e = 0.9;
  std::uint64_t seed = 0;
};

void run_group(GroupArgs& a, CLI::App* sub, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  config_default(ctx, sub, "group", "superpixels", a.superpixels);
  config_default(ctx, sub, "group", "w-ocln", a.w_ocln);
  config_default(ctx, sub, "group", "w-sup", a.w_sup);
  config_default(ctx, sub, "group", "bias", a.bias);
  config_default(ctx, sub, "group", "t-e", a.t_e);
  GroupingConfig cfg;
  cfg.slic.target_count = a.superpixels;
  cfg.graph = {a.w_ocln, a.w_sup, a.bias};
  cfg.graph.validate();
  cfg.t_e = a.t_e;
  cfg.seed = resolve_seed(ctx, sub, a.seed).value_or(0);
  if (cfg.slic.target_count < 1) throw InputError("--superpixels must be >= 1");
  if (!(cfg.t_e >= 0.0 && cfg.t_e <= 1.0)) throw InputError("--t-e must lie in [0, 1]");

  Stamp stamp;
  stamp.stage = "group";
  stamp.params = {{"superpixels", a.superpixels}, {"w_ocln", a.w_ocln}, {"w_sup", a.w_sup},
                  {"bias", a.bias},               {"t_e", a.t_e},       {"seed", cfg.seed}};
  stamp.upstream["frames"] = ctx.manifest.content_hash();
  const fs::path dir = reset_stage(ctx, "group");
  const int n = static_cast<int>(ctx.manifest.frames.size());
  std::vector<std::string> lines(n);
  parallel_for(n, ctx.jobs, [&](int i) {
    const DepthFrame frame = ctx.manifest.load_frame(i);
    const GroupingResult r = group_frame(frame, cfg);
    const fs::path fdir = dir / frame.frame_id;
    io::write_label_png(fdir / "regions.png", r.regions.labels);
    io::write_label_png(fdir / "superpixels.png", r.superpixels.labels);
    io::write_text(fdir / "regions.json", region_table_to_json(r.regions));
    lines[i] = frame.frame_id + ": " + std::to_string(r.superpixels.count) + " superpixels, " +
               std::to_string(r.regions.regions.size()) + " regions";
  });
  write_stamp(dir, stamp);
  for (const auto& l : lines) out << l << "\n";
}

struct SynthArgs {
  Common common;
  int m = 8;
  double e1 = 1.0, e2 = 2.0;
  int h_t = 16, min_h = 16, min_w = 6, batches = 1;
  bool image_augment = false;
  std::uint64_t seed = 0;
};

void run_synthesize(SynthArgs& a, CLI::App* sub, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  config_default(ctx, sub, "synthesize", "m", a.m);
  config_default(ctx, sub, "synthesize", "e1", a.e1);
  config_default(ctx, sub, "synthesize", "e2", a.e2);
  config_default(ctx, sub, "synthesize", "h-t", a.h_t);
  config_default(ctx, sub, "synthesize", "min-h", a.min_h);
  config_default(ctx, sub, "synthesize", "min-w", a.min_w);
  config_default(ctx, sub, "synthesize", "batches", a.batches);
  const auto seed = resolve_seed(ctx, sub, a.seed);
  if (!seed) throw InputError("synthesize needs --seed (or a manifest seed)");
  if (a.batches < 1) throw InputError("--batches must be >= 1");
  PasteConfig cfg;
  cfg.num_images = a.m;
  cfg.expectations = {a.e1, a.e2};
  cfg.height_threshold = a.h_t;
  cfg.min_height = a.min_h;
  cfg.min_width = a.min_w;
  cfg.image_augment = a.image_augment;
  cfg.validate();
  const int num_frames = static_cast<int>(ctx.manifest.frames.size());
  if (a.m > num_frames) {
    throw InputError("--m " + std::to_string(a.m) + " exceeds the " + std::to_string(num_frames) + " manifest frames");
  }

  Stamp stamp;
  stamp.stage = "synthesize";
  stamp.params = {{"m", a.m},         {"e1", a.e1},         {"e2", a.e2},         {"h_t", a.h_t},
                  {"min_h", a.min_h}, {"min_w", a.min_w},   {"batches", a.batches}, {"seed", *seed},
                  {"image_augment", a.image_augment}};
  stamp.upstream["group"] = current_hash(ctx, "group");
  const fs::path dir = reset_stage(ctx, "synthesize");
  std::vector<std::string> lines(a.batches);
  parallel_for(a.batches, ctx.jobs, [&](int b) {
    std::mt19937_64 rng(*seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(b));
    std::vector<int> order(num_frames);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<DepthFrame> frames;
    std::vector<RegionMap> regions;
    for (int k = 0; k < a.m; ++k) {
      frames.push_back(ctx.manifest.load_frame(order[k]));
      regions.push_back(load_regions(ctx, frames.back().frame_id, frames.back().depth));
    }
    const SyntheticSample s = synthesize(frames, regions, cfg, rng());
    save_sample(dir / batch_name(b), s);
    lines[b] = batch_name(b) + ": " + std::to_string(s.images.size()) + " images, " +
               std::to_string(s.records.size()) + " pastes";
  });
  write_stamp(dir, stamp);
  for (const auto& l : lines) out << l << "\n";
}

struct SampleArgs {
  Common common;
  int budget = 288000;
  std::string kind = "both";
  std::string lambda_split = "equal";
  int stride = 1;
  std::uint64_t seed = 0;
};

void run_sample(SampleArgs& a, CLI::App* sub, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  config_default(ctx, sub, "sample", "budget", a.budget);
  config_default(ctx, sub, "sample", "kind", a.kind);
  config_default(ctx, sub, "sample", "stride", a.stride);
  const auto seed = resolve_seed(ctx, sub, a.seed);
  if (!seed) throw InputError("sample needs --seed (or a manifest seed)");
  if (a.budget < 1) throw InputError("--budget must be >= 1");
  if (a.kind != "pixel" && a.kind != "region" && a.kind != "both") throw InputError("--kind must be pixel, region or both");
  double split = 0.5;
  if (a.lambda_split != "equal") {
    try {
      split = std::stod(a.lambda_split);
    } catch (const std::exception&) {
      throw InputError("--lambda-split must be 'equal' or a number in [0, 1]");
    }
    if (!(split >= 0.0 && split <= 1.0)) throw InputError("--lambda-split must lie in [0, 1]");
  }
  int pixel_budget = a.kind == "pixel" ? a.budget : 0, region_budget = a.kind == "region" ? a.budget : 0;
  if (a.kind == "both") {
    pixel_budget = static_cast<int>(std::lround(a.budget * split));
    region_budget = a.budget - pixel_budget;
  }

  Stamp stamp;
  stamp.stage = "sample";
  stamp.params = {{"budget", a.budget}, {"kind", a.kind}, {"pixel_budget", pixel_budget},
                  {"region_budget", region_budget}, {"stride", a.stride}, {"seed", *seed}};
  stamp.upstream["synthesize"] = current_hash(ctx, "synthesize");
  const auto batches = batch_dirs(ctx.stage_dir("synthesize"));
  const fs::path dir = reset_stage(ctx, "sample");
  std::vector<std::string> lines(batches.size());
  parallel_for(static_cast<int>(batches.size()), ctx.jobs, [&](int b) {
    const SyntheticSample s = load_sample(batches[b]);
    const fs::path bdir = dir / batch_name(b);
    fs::create_directories(bdir);
    std::string line = batch_name(b) + ":";
    const std::uint64_t bseed = *seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(b);
    auto emit = [&](const GroupIndex& raw, const std::string& name) {
      const GroupIndex g = downsample(raw, a.stride);
      io::write_text(bdir / (name + ".json"), group_index_to_json(g));
      write_group_table(bdir / (name + ".bin"), g);
      line += " " + name + " " + std::to_string(g.groups.size()) + " groups / " + std::to_string(g.num_coords()) +
              " coords";
    };
    if (pixel_budget > 0) emit(pixel_groups(s, pixel_budget, bseed), "pixel");
    if (region_budget > 0) emit(region_groups(s, region_budget, bseed ^ 0x5bd1e995ULL), "region");
    lines[b] = line;
  });
  write_stamp(dir, stamp);
  for (const auto& l : lines) out << l << "\n";
}

struct LossArgs {
  Common common;
  std::string features, groups, region_features, region_groups, prototypes;
  double tau = 0.1, lambda = 0.5, eps = 0.05;
  int k = 1000, iters = 3;
  bool converge = false;
};

GroupIndex read_groups(const std::string& path, GroupKind kind) {
  if (fs::path(path).extension() == ".json") return group_index_from_json(io::read_text(path));
  return read_group_table(path, kind);
}

void run_loss(LossArgs& a, CLI::App* sub, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  config_default(ctx, sub, "loss", "tau", a.tau);
  config_default(ctx, sub, "loss", "k", a.k);
  config_default(ctx, sub, "loss", "lambda", a.lambda);
  if (a.region_features.empty() != a.region_groups.empty()) {
    throw InputError("--region-features and --region-groups go together");
  }
  const RowMatrix<float> c = read_feature_file(a.prototypes);
  if (c.rows() != a.k) {
    throw InputError("prototype file holds " + std::to_string(c.rows()) + " prototypes, --k is " + std::to_string(a.k));
  }
  SinkhornConfig sk;
  sk.eps = a.eps;
  sk.iters = a.iters;
  sk.until_converged = a.converge;

  const fs::path dir = reset_stage(ctx, "loss");
  auto evaluate = [&](const std::string& fpath, const std::string& gpath, GroupKind kind, const std::string& name) {
    const RowMatrix<float> z = read_feature_file(fpath);
    const GroupIndex g = read_groups(gpath, kind);
    if (static_cast<std::size_t>(z.rows()) != g.num_coords()) {
      throw InputError(name + ": " + std::to_string(z.rows()) + " feature rows but " + std::to_string(g.num_coords()) +
                       " group coordinates");
    }
    LossResult<float> r = loss_gradient<float>(z, c, row_groups(g), a.tau, sk);
    write_feature_file(dir / ("dz_" + name + ".dgfs"), r.dz);
    return r;
  };
  json report;
  const auto px = evaluate(a.features, a.groups, GroupKind::kPixel, "pixel");
  auto diag = [](const SinkhornDiagnostics& d) {
    return json{{"iterations", d.iterations}, {"row_error", d.row_error}, {"col_error", d.col_error},
                {"converged", d.converged}};
  };
  report["pixel_loss"] = px.loss;
  report["sinkhorn"]["pixel"] = diag(px.sinkhorn);
  RowMatrix<float> dc = px.dc;
  if (!a.region_features.empty()) {
    const auto rg = evaluate(a.region_features, a.region_groups, GroupKind::kRegion, "region");
    report["region_loss"] = rg.loss;
    report["sinkhorn"]["region"] = diag(rg.sinkhorn);
    report["lambda"] = a.lambda;
    report["loss"] = combined_loss(px.loss, rg.loss, a.lambda);
    dc = static_cast<float>(a.lambda) * px.dc + static_cast<float>(1.0 - a.lambda) * rg.dc;
  } else {
    report["loss"] = px.loss;
  }
  write_feature_file(dir / "dc.dgfs", dc);
  Stamp stamp;
  stamp.stage = "loss";
  stamp.params = {{"tau", a.tau}, {"k", a.k}, {"lambda", a.lambda}, {"eps", a.eps}, {"iters", a.iters},
                  {"converge", a.converge}, {"prototypes", file_hash(a.prototypes)},
                  {"features", file_hash(a.features)}, {"groups", file_hash(a.groups)}};
  write_stamp(dir, stamp);
  io::write_text(dir / "loss.json", report.dump(1) + "\n");
  out << report.dump(1) << "\n";
}

struct ClusterArgs {
  Common common;
  std::string prototypes;
  int classes = 19;
};

void run_cluster(ClusterArgs& a, CLI::App* sub, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  config_default(ctx, sub, "cluster", "classes", a.classes);
  const RowMatrix<double> c = read_feature_file(a.prototypes).cast<double>();
  check_unit_rows(c, "prototypes");
  const std::vector<int> mapping = agglomerate(c, a.classes);
  const fs::path dir = reset_stage(ctx, "cluster");
  const std::string text = class_mapping_to_json(mapping);
  io::write_text(dir / "classes.json", text);
  Stamp stamp;
  stamp.stage = "cluster";
  stamp.params = {{"classes", a.classes}, {"prototypes", file_hash(a.prototypes)}};
  write_stamp(dir, stamp);
  out << text;
}

struct EvalRegionArgs {
  Common common;
  std::optional<int> background, ignore;
};

void run_eval_regions(EvalRegionArgs& a, CLI::App*, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  Stamp stamp;
  stamp.stage = "eval-regions";
  stamp.params = {{"background", a.background ? json(*a.background) : json(nullptr)},
                  {"ignore", a.ignore ? json(*a.ignore) : json(nullptr)}};
  stamp.upstream["group"] = current_hash(ctx, "group");
  std::vector<LabelGrid> proposals, gts;
  json masks = json::array();
  for (const auto& f : ctx.manifest.frames) {
    if (!f.gt_instances) throw InputError("frame '" + f.frame_id + "' has no gt_instances");
    const LabelGrid inst = io::read_label_png(*f.gt_instances);
    proposals.push_back(io::read_label_png(ctx.stage_dir("group") / f.frame_id / "regions.png"));
    if (!proposals.back().same_shape(inst)) throw InputError("frame '" + f.frame_id + "': gt size mismatch");
    gts.push_back(split_connected_components(inst, a.background, a.ignore));
    std::vector<int> label, area;
    for (std::size_t k = 0; k < inst.size(); ++k) {
      const int comp = gts.back()[k];
      if (comp < 0) continue;
      if (comp >= static_cast<int>(label.size())) {
        label.resize(comp + 1, 0);
        area.resize(comp + 1, 0);
        label[comp] = inst[k];
      }
      ++area[comp];
    }
    for (std::size_t c = 0; c < label.size(); ++c)
      masks.push_back({{"frame_id", f.frame_id}, {"instance", label[c]}, {"area", area[c]}});
  }
  const RegionScores s = region_scores(proposals, gts);
  for (std::size_t m = 0; m < masks.size(); ++m) {
    masks[m]["gt_query_iou"] = s.gt_query_iou[m];
    masks[m]["bilateral_iou"] = s.bilateral_iou[m];
  }
  json report = json::parse(region_scores_to_json(s));
  report.erase("gt_query_iou");
  report.erase("bilateral_iou");
  report["masks"] = std::move(masks);
  const fs::path dir = reset_stage(ctx, "eval-regions");
  io::write_text(dir / "metrics.json", report.dump(1) + "\n");
  write_stamp(dir, stamp);
  out << "gt_query_miou " << s.gt_query_miou << "\nbilateral_miou " << s.bilateral_miou << "\n";
}

struct EvalSegArgs {
  Common common;
  std::string pred_dir;
  int classes = 19;
  int ignore = 255;
};

void run_eval_seg(EvalSegArgs& a, CLI::App* sub, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  config_default(ctx, sub, "eval-seg", "classes", a.classes);
  std::vector<LabelGrid> pred, gt;
  std::uint64_t h = fnv1a64("pred");
  for (const auto& f : ctx.manifest.frames) {
    if (!f.gt_semantic) throw InputError("frame '" + f.frame_id + "' has no gt_semantic");
    const fs::path p = fs::path(a.pred_dir) / (f.frame_id + ".png");
    h = fnv1a64(io::read_text(p), h);
    pred.push_back(io::read_label_png(p));
    gt.push_back(io::read_label_png(*f.gt_semantic));
  }
  const MatchedMetrics m = matched_metrics(pred, gt, a.classes, a.ignore);
  const fs::path dir = reset_stage(ctx, "eval-seg");
  const std::string text = matched_metrics_to_json(m);
  io::write_text(dir / "metrics.json", text);
  Stamp stamp;
  stamp.stage = "eval-seg";
  stamp.params = {{"classes", a.classes}, {"ignore", a.ignore}, {"predictions", hex64(h)}};
  stamp.upstream["frames"] = ctx.manifest.content_hash();
  write_stamp(dir, stamp);
  out << "accuracy " << m.accuracy << "\nmiou " << m.miou << "\n";
}

struct VizArgs {
  Common common;
  std::string what = "regions";
  std::string features;
  int height = 0, width = 0;
};

void run_viz(VizArgs& a, CLI::App*, std::ostream& out) {
  Context ctx = make_context(a.common, out);
  const fs::path dir = ctx.stage_dir("viz") / a.what;
  if (a.what == "regions") {
    verify_fresh(ctx, "group");
    fs::create_directories(dir);
    for (std::size_t i = 0; i < ctx.manifest.frames.size(); ++i) {
      const DepthFrame f = ctx.manifest.load_frame(i);
      const LabelGrid labels = io::read_label_png(ctx.stage_dir("group") / f.frame_id / "regions.png");
      io::write_rgb(dir / (f.frame_id + ".png"), overlay(f.rgb, labels, true));
    }
  } else if (a.what == "samples") {
    verify_fresh(ctx, "synthesize");
    fs::create_directories(dir);
    const auto batches = batch_dirs(ctx.stage_dir("synthesize"));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const SyntheticSample s = load_sample(batches[b]);
      for (std::size_t i = 0; i < s.images.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_image_%03zu.png", batch_name(static_cast<int>(b)).c_str(), i);
        io::write_rgb(dir / name, overlay(s.images[i], s.instance_id_maps[i], false));
      }
    }
  } else if (a.what == "features") {
    if (a.features.empty() || a.height < 1 || a.width < 1) {
      throw InputError("viz --what features needs --features, --height and --width");
    }
    fs::create_directories(dir);
    const RowMatrix<double> z = read_feature_file(a.features).cast<double>();
    io::write_rgb(dir / (fs::path(a.features).stem().string() + ".png"), pca_rgb(z, a.height, a.width));
  } else {
    throw InputError("--what must be regions, samples or features");
  }
  out << "wrote " << dir.string() << "\n";
}

struct SceneArgs {
  std::string manifest;
  int frames = 2, rows = 160, cols = 256;
  std::uint64_t seed = 0;
};

void run_make_scene(SceneArgs& a, std::ostream& out) {
  if (a.frames < 1) throw InputError("--frames must be >= 1");
  const fs::path manifest_path = a.manifest;
  const fs::path dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  Manifest m;
  m.seed = a.seed;
  const int superpixels = std::max(1, a.rows * a.cols / 16);
  m.config = {{"group", {{"superpixels", superpixels}}}};
  for (int i = 0; i < a.frames; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03d", i);
    const std::uint64_t fseed = a.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
    const Scene s = render_scene(random_scene_config(fseed, a.rows, a.cols), id, fseed);
    FrameEntry f;
    f.frame_id = id;
    f.rgb = dir / "frames" / (std::string(id) + "_rgb.png");
    f.depth = dir / "frames" / (std::string(id) + "_depth.png");
    f.gt_instances = dir / "frames" / (std::string(id) + "_instances.png");
    f.gt_semantic = dir / "frames" / (std::string(id) + "_semantic.png");
    io::write_rgb(f.rgb, s.frame.rgb);
    io::write_depth_png(f.depth, s.frame.depth, io::kDefaultDepthScale, s.frame.intrinsics);
    io::write_label_png(*f.gt_instances, s.instances);
    LabelGrid semantic = s.instances;
    for (auto& v : semantic.values()) v = std::min(v, 2);
    io::write_label_png(*f.gt_semantic, semantic);
    m.frames.push_back(std::move(f));
  }
  write_manifest(manifest_path, m);
  out << "wrote " << a.frames << " frames and " << manifest_path.string() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-region grouping, copy-paste synthesis and contrastive utilities"};
  app.require_subcommand(1);

  GroupArgs ga;
  auto* group = app.add_subcommand("group", "Frames -> superpixels -> boundary graph -> depth regions");
  add_common(group, ga.common);
  group->add_option("--superpixels", ga.superpixels)->capture_default_str();
  group->add_option("--w-ocln", ga.w_ocln)->capture_default_str();
  group->add_option("--w-sup", ga.w_sup)->capture_default_str();
  group->add_option("--bias", ga.bias)->capture_default_str();
  group->add_option("--t-e", ga.t_e)->capture_default_str();
  group->add_option("--seed", ga.seed);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synthesize", "Copy-paste synthesis over grouped frames");
  add_common(synth, sa.common);
  synth->add_option("--m", sa.m, "Source frames per batch")->capture_default_str();
  synth->add_option("--e1", sa.e1)->capture_default_str();
  synth->add_option("--e2", sa.e2)->capture_default_str();
  synth->add_option("--h-t", sa.h_t, "Vertical placement tolerance (pixels)")->capture_default_str();
  synth->add_option("--min-h", sa.min_h)->capture_default_str();
  synth->add_option("--min-w", sa.min_w)->capture_default_str();
  synth->add_option("--batches", sa.batches)->capture_default_str();
  synth->add_flag("--image-augment", sa.image_augment, "Whole-image resized crop, flip, colour jitter and blur");
  synth->add_option("--seed", sa.seed);

  SampleArgs pa;
  auto* sample = app.add_subcommand("sample", "Positive-sample groups from synthesized batches");
  add_common(sample, pa.common);
  sample->add_option("--budget", pa.budget, "Coordinates per batch")->capture_default_str();
  sample->add_option("--kind", pa.kind, "pixel, region or both")->capture_default_str();
  sample->add_option("--lambda-split", pa.lambda_split, "Pixel share of the budget: 'equal' or a fraction")
      ->capture_default_str();
  sample->add_option("--stride", pa.stride, "Feature-map stride applied at export")->capture_default_str();
  sample->add_option("--seed", pa.seed);

  LossArgs la;
  auto* loss = app.add_subcommand("loss", "Swapped-prediction loss, gradients and Sinkhorn diagnostics");
  add_common(loss, la.common);
  loss->add_option("--features", la.features, "Pixel-group features (DGFS)")->required();
  loss->add_option("--groups", la.groups, "Pixel group table (.bin) or index (.json)")->required();
  loss->add_option("--region-features", la.region_features);
  loss->add_option("--region-groups", la.region_groups);
  loss->add_option("--prototypes", la.prototypes)->required();
  loss->add_option("--tau", la.tau)->capture_default_str();
  loss->add_option("--k", la.k)->capture_default_str();
  loss->add_option("--lambda", la.lambda)->capture_default_str();
  loss->add_option("--eps", la.eps, "Sinkhorn regularization")->capture_default_str();
  loss->add_option("--sinkhorn-iters", la.iters)->capture_default_str();
  loss->add_flag("--converge", la.converge, "Run Sinkhorn to convergence");

  ClusterArgs ca;
  auto* cluster = app.add_subcommand("cluster", "Agglomerate prototypes into classes");
  add_common(cluster, ca.common);
  cluster->add_option("--prototypes", ca.prototypes)->required();
  cluster->add_option("--classes", ca.classes)->capture_default_str();

  EvalRegionArgs ea;
  auto* eval_regions = app.add_subcommand("eval-regions", "GT-query and bilateral-match mIoU of grouped regions");
  add_common(eval_regions, ea.common);
  eval_regions->add_option("--background-label", ea.background, "Instance value that is not a mask");
  eval_regions->add_option("--ignore-label", ea.ignore, "Instance value excluded from all areas");

  EvalSegArgs es;
  auto* eval_seg = app.add_subcommand("eval-seg", "Hungarian-matched accuracy and mIoU");
  add_common(eval_seg, es.common);
  eval_seg->add_option("--pred-dir", es.pred_dir, "Directory of <frame_id>.png label images")->required();
  eval_seg->add_option("--classes", es.classes)->capture_default_str();
  eval_seg->add_option("--ignore", es.ignore)->capture_default_str();

  VizArgs va;
  auto* viz = app.add_subcommand("viz", "Region overlays, sample overlays or PCA feature images");
  add_common(viz, va.common);
  viz->add_option("--what", va.what, "regions, samples or features")->capture_default_str();
  viz->add_option("--features", va.features);
  viz->add_option("--height", va.height);
  viz->add_option("--width", va.width);

  SceneArgs sc;
  auto* scene = app.add_subcommand("make-scene", "Write a procedural ground/wall/box dataset and its manifest");
  scene->add_option("manifest", sc.manifest, "Manifest path to create")->required();
  scene->add_option("--frames", sc.frames)->capture_default_str();
  scene->add_option("--rows", sc.rows)->capture_default_str();
  scene->add_option("--cols", sc.cols)->capture_default_str();
  scene->add_option("--seed", sc.seed)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (group->parsed()) run_group(ga, group, out);
    if (synth->parsed()) run_synthesize(sa, synth, out);
    if (sample->parsed()) run_sample(pa, sample, out);
    if (loss->parsed()) run_loss(la, loss, out);
    if (cluster->parsed()) run_cluster(ca, cluster, out);
    if (eval_regions->parsed()) run_eval_regions(ea, eval_regions, out);
    if (eval_seg->parsed()) run_eval_seg(es, eval_seg, out);
    if (viz->parsed()) run_viz(va, viz, out);
    if (scene->parsed()) run_make_scene(sc, out);
  } catch (const StaleArtifactError& e) {
    err << "stale: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace depthgroup::cli
