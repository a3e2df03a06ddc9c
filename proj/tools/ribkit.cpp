// ribkit command-line front end. Logs and the resolved configuration go to
// stderr; data goes to files only.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ribkit/ribkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ribkit;

namespace {

void print_config(const std::string& command, const json& cfg) {
  json out = {{"command", command}, {"threads", threads()}, {"config", cfg}};
  std::cerr << "config: " << out.dump() << "\n";
}

std::optional<Centerline> maybe_centerline(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return io::read_centerline(path);
}

WindowConfig parse_window(const std::string& text) {
  const auto colon = text.find(':', 1);
  if (colon == std::string::npos) throw UsageError("--window expects LO:HI, got '" + text + "'");
  WindowConfig w;
  try {
    std::size_t a = 0, b = 0;
    w.lo = std::stod(text.substr(0, colon), &a);
    w.hi = std::stod(text.substr(colon + 1), &b);
    if (a != colon || b != text.size() - colon - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--window expects LO:HI numbers, got '" + text + "'");
  }
  w.validate();
  return w;
}

unsigned resolve_threads(int flag) {
  if (flag >= 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("RIBKIT_THREADS")) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(env, &used);
      if (used == std::string(env).size() && v >= 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("RIBKIT_THREADS must be a non-negative integer, got '") + env +
                     "'");
  }
  return 0;
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string in, out, window = "-450:1050";
  double spacing = 2.0;
};

void cmd_preprocess(const PreprocessArgs& a) {
  const WindowConfig w = parse_window(a.window);
  const Spacing target = Spacing::isotropic(a.spacing);
  print_config("preprocess", {{"in", a.in}, {"out", a.out}, {"spacing", a.spacing},
                              {"window", {w.lo, w.hi}}});
  const Volume vol = nifti::read_volume(a.in);
  const Volume out = normalize_bone_window(resample_linear(vol, target), w);
  nifti::write(out, a.out);
  log::info("preprocess: " + to_string(vol.dims()) + " -> " + to_string(out.dims()));
}

// ---- refine ----

struct RefineArgs {
  std::string pred, out, centerline;
  std::size_t min_voxels = 64;
  double probable_fraction = 1.0 / 3.0;
};

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void cmd_refine(const RefineArgs& a) {
  RefineConfig cfg;
  cfg.min_voxels = a.min_voxels;
  cfg.probable_fraction = a.probable_fraction;
  cfg.validate();
  print_config("refine", {{"pred", a.pred}, {"out", a.out}, {"centerline", a.centerline},
                          {"min_voxels", cfg.min_voxels},
                          {"probable_fraction", cfg.probable_fraction},
                          {"connectivity", static_cast<int>(cfg.connectivity)}});
  const LabelVolume pred = nifti::read_labels(a.pred);
  const auto line = maybe_centerline(a.centerline);
  const RefineResult r = refine(pred, cfg, default_midline(pred.dims(), pred.spacing(), line));
  for (const auto& s : r.sides) {
    std::string msg = std::string(to_string(s.side)) + ": " + std::to_string(s.components) +
                      " components, " + std::to_string(s.removed_small) + " removed, " +
                      std::to_string(s.protected_count) + " protected";
    if (s.assignment) {
      msg += ", start " + std::to_string(s.assignment->start) + " score " +
             std::to_string(s.assignment->score) + ", sequence";
      for (const auto& t : s.assignment->types) msg += " [" + join(t) + "]";
    }
    log::info(msg);
  }
  nifti::write(r.labels, a.out);
}

// ---- eval ----

struct EvalArgs {
  std::string pred, gt, centerline, batch, report, csv, id;
  double cut_mm = 30.0;
};

io::CaseReports evaluate_one(const std::string& id, const std::string& pred_path,
                             const std::string& gt_path, const std::string& line_path,
                             double cut_mm) {
  const LabelVolume pred = nifti::read_labels(pred_path);
  const LabelVolume gt = nifti::read_labels(gt_path);
  io::CaseReports c{id, evaluate_case(pred, gt, std::nullopt, cut_mm, id), std::nullopt};
  if (const auto line = maybe_centerline(line_path))
    c.cut = evaluate_case(pred, gt, line, cut_mm, id);
  return c;
}

std::string strip_suffix(const std::string& name, const std::string& suffix) {
  if (name.size() > suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
    return name.substr(0, name.size() - suffix.size());
  return {};
}

void cmd_eval(const EvalArgs& a) {
  if (a.report.empty() && a.csv.empty()) throw UsageError("eval needs --report and/or --csv");
  if (!(a.cut_mm > 0.0)) throw UsageError("--cut-mm must be positive");
  print_config("eval", {{"pred", a.pred}, {"gt", a.gt}, {"centerline", a.centerline},
                        {"batch", a.batch}, {"cut_mm", a.cut_mm}, {"report", a.report},
                        {"csv", a.csv}, {"recall_threshold", 0.7}});
  io::EvaluationReport report;
  if (!a.batch.empty()) {
    if (!a.pred.empty() || !a.gt.empty() || !a.centerline.empty())
      throw UsageError("--batch cannot be combined with --pred, --gt or --centerline");
    if (!fs::is_directory(a.batch)) throw IoError("'" + a.batch + "' is not a directory");
    struct Job {
      std::string id, pred, gt, line;
    };
    std::vector<Job> jobs;
    for (const auto& entry : fs::directory_iterator(a.batch)) {
      const std::string name = entry.path().filename().string();
      for (const std::string ext : {".nii.gz", ".nii"}) {
        const std::string id = strip_suffix(name, "_pred" + ext);
        if (id.empty()) continue;
        const fs::path gt = fs::path(a.batch) / (id + "_gt" + ext);
        if (!fs::exists(gt)) throw IoError("no ground truth '" + gt.string() + "' for case " + id);
        const fs::path line = fs::path(a.batch) / (id + "_centerline.csv");
        jobs.push_back({id, entry.path().string(), gt.string(),
                        fs::exists(line) ? line.string() : std::string()});
      }
    }
    if (jobs.empty()) throw IoError("no '<id>_pred.nii.gz' files in '" + a.batch + "'");
    std::sort(jobs.begin(), jobs.end(), [](const Job& x, const Job& y) { return x.id < y.id; });
    report.cases.resize(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
      report.cases[i] = evaluate_one(jobs[i].id, jobs[i].pred, jobs[i].gt, jobs[i].line, a.cut_mm);
    });
  } else {
    if (a.pred.empty() || a.gt.empty()) throw UsageError("eval needs --pred and --gt, or --batch");
    std::string id = a.id;
    if (id.empty()) {
      id = fs::path(a.pred).filename().string();
      for (const std::string ext : {".nii.gz", ".nii"})
        if (const auto s = strip_suffix(id, ext); !s.empty()) {
          id = s;
          break;
        }
    }
    report.cases.push_back(evaluate_one(id, a.pred, a.gt, a.centerline, a.cut_mm));
  }
  for (const auto& c : report.cases) {
    std::string msg = c.id + ": A " + io::format_percent(c.raw.accuracy.all.percent()) +
                      " dice_avg " + io::format_dice(c.raw.dice_avg);
    if (c.cut) msg += " | cut A " + io::format_percent(c.cut->accuracy.all.percent());
    log::info(msg);
  }
  if (!a.report.empty()) io::write_report(report, a.report, io::ReportFormat::json);
  if (!a.csv.empty()) io::write_report(report, a.csv, io::ReportFormat::csv);
}

// ---- infer ----

struct InferArgs {
  std::string in, predictor, out, centerline;
  double threshold = 0.25, patch_mm = 320.0;
};

std::unique_ptr<Predictor> make_predictor(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  if (colon == std::string::npos || arg.empty())
    throw UsageError("--predictor expects oracle:LABELS, subprocess:CMD or constant:P");
  if (kind == "oracle") return std::make_unique<OraclePredictor>(nifti::read_labels(arg));
  if (kind == "subprocess") return std::make_unique<SubprocessPredictor>(arg);
  if (kind == "constant") {
    double p = 0;
    try {
      std::size_t used = 0;
      p = std::stod(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw UsageError("constant predictor needs a probability, got '" + arg + "'");
    }
    if (!(p > 0.0 && p < 1.0)) throw UsageError("constant predictor probability must be in (0, 1)");
    return std::make_unique<ConstantPredictor>(p);
  }
  throw UsageError("unknown predictor kind '" + kind + "'");
}

void cmd_infer(const InferArgs& a) {
  DecodeConfig dc;
  dc.binary_threshold = a.threshold;
  try {
    dc.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (!(a.patch_mm > 0.0)) throw UsageError("--patch-mm must be positive");
  const Volume vol = nifti::read_volume(a.in);
  const PatchPlan plan = plan_patches(vol.dims().nz, vol.spacing().dz, a.patch_mm);
  json windows = json::array();
  for (const auto& w : plan.windows) windows.push_back({w.begin, w.end});
  print_config("infer", {{"in", a.in}, {"predictor", a.predictor}, {"out", a.out},
                         {"centerline", a.centerline}, {"threshold", dc.binary_threshold},
                         {"patch_mm", a.patch_mm}, {"patch_slices", plan.patch_voxels},
                         {"stride", plan.stride}, {"windows", windows}});
  const auto predictor = make_predictor(a.predictor);
  const auto line = maybe_centerline(a.centerline);
  const HeadOutput probs = run_inference(vol, *predictor, plan);
  const LabelVolume labels = decode(probs.binary, probs.classes, dc,
                                    default_midline(vol.dims(), vol.spacing(), line));
  nifti::write(labels, a.out);
}

// ---- phantom ----

struct PhantomArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> corrupt;
  int rib_pairs = 12;
};

void cmd_phantom(const PhantomArgs& a) {
  phantom::PhantomConfig cfg;
  cfg.seed = a.seed;
  cfg.rib_pairs = a.rib_pairs;
  for (const auto& c : a.corrupt) cfg.corruptions.push_back(phantom::parse_corruption(c));
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  print_config("phantom", {{"out_dir", a.out_dir}, {"seed", cfg.seed},
                           {"rib_pairs", cfg.rib_pairs}, {"corrupt", a.corrupt},
                           {"dims", {cfg.dims.nx, cfg.dims.ny, cfg.dims.nz}},
                           {"spacing_mm", cfg.spacing_mm}, {"rib_radius_mm", cfg.rib_radius_mm},
                           {"rib_gap_mm", cfg.rib_gap_mm},
                           {"spine_radius_mm", cfg.spine_radius_mm}});
  const phantom::Phantom p = phantom::generate(cfg);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create '" + a.out_dir + "': " + ec.message());
  const fs::path dir(a.out_dir);
  nifti::write(p.intensity, (dir / "intensity.nii.gz").string());
  nifti::write(p.labels, (dir / "labels.nii.gz").string());
  io::write_centerline(p.centerline, (dir / "centerline.csv").string());
  for (std::size_t i = 0; i < p.variants.size(); ++i) {
    const std::string name = "variant_" + std::to_string(i + 1) + ".nii.gz";
    nifti::write(p.variants[i], (dir / name).string());
    log::info(name + ": " + phantom::to_string(cfg.corruptions[i]));
  }
}

// ---- losscheck ----

struct LosscheckArgs {
  std::size_t size = 4;
  int trials = 20;
  std::uint64_t seed = 0;
  std::string report, break_gradient;
};

void cmd_losscheck(const LosscheckArgs& a) {
  if (a.size < 1 || a.trials < 1) throw UsageError("--size and --trials must be >= 1");
  losses::GradcheckOptions opt;
  opt.size = a.size;
  opt.trials = a.trials;
  opt.seed = a.seed;
  opt.break_gradient = a.break_gradient;
  print_config("losscheck", {{"size", opt.size}, {"trials", opt.trials}, {"seed", opt.seed},
                             {"step", opt.step}, {"tolerance", opt.tolerance},
                             {"alpha", opt.config.alpha}, {"gamma", opt.config.focal_gamma}});
  const losses::GradcheckReport r = losses::run_gradcheck(opt);
  json out = json::array();
  for (const auto& c : r.losses) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", c.max_rel_error);
    log::info(c.name + ": max rel error " + buf + (c.passed ? "" : " FAILED"));
    out.push_back({{"loss", c.name}, {"max_rel_error", c.max_rel_error}, {"passed", c.passed}});
  }
  if (!a.report.empty()) {
    std::ofstream f(a.report, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + a.report + "'");
    f << json{{"passed", r.passed()}, {"losses", out}}.dump(2) << "\n";
  }
  if (!r.passed()) {
    std::string msg = "gradient check failed:";
    for (const auto& c : r.losses)
      if (!c.passed) msg += " " + c.name + " at " + losses::describe_worst(c, r.size) + ";";
    throw VerificationError(msg);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ribkit: rib mask refinement, evaluation and inference tools"};
  app.require_subcommand(1);
  int thread_flag = -1;
  std::string log_level = "info";
  app.add_option("--threads", thread_flag, "Worker threads, 0 = all cores (env RIBKIT_THREADS)");
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Resample to isotropic spacing and window");
  c_pre->add_option("--in", pre.in, "Input NIfTI")->required();
  c_pre->add_option("--out", pre.out, "Output NIfTI")->required();
  c_pre->add_option("--spacing", pre.spacing, "Target spacing in mm")->capture_default_str();
  c_pre->add_option("--window", pre.window, "Bone window LO:HI in HU")->capture_default_str();

  RefineArgs ref;
  auto* c_ref = app.add_subcommand("refine", "Restore consistent rib numbering in a prediction");
  c_ref->add_option("--pred", ref.pred, "Predicted label NIfTI")->required();
  c_ref->add_option("--out", ref.out, "Output label NIfTI")->required();
  c_ref->add_option("--centerline", ref.centerline, "Spine centerline CSV (sets the midline)");
  c_ref->add_option("--min-voxels", ref.min_voxels, "Smallest kept component")
      ->capture_default_str();
  c_ref->add_option("--probable-fraction", ref.probable_fraction,
                    "Share of a component a type needs to count as probable")
      ->capture_default_str();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Score predictions against ground truth");
  c_ev->add_option("--pred", ev.pred, "Predicted label NIfTI");
  c_ev->add_option("--gt", ev.gt, "Ground-truth label NIfTI");
  c_ev->add_option("--centerline", ev.centerline, "Spine centerline CSV (adds cut-mode scores)");
  c_ev->add_option("--id", ev.id, "Case id for the report (default: prediction file stem)");
  c_ev->add_option("--batch", ev.batch, "Directory of <id>_pred / <id>_gt pairs");
  c_ev->add_option("--cut-mm", ev.cut_mm, "Spine cut radius in mm")->capture_default_str();
  c_ev->add_option("--report", ev.report, "JSON report path");
  c_ev->add_option("--csv", ev.csv, "CSV report path");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Sliding-window inference with a predictor");
  c_inf->add_option("--in", inf.in, "Input intensity NIfTI")->required();
  c_inf->add_option("--predictor", inf.predictor,
                    "oracle:LABELS.nii.gz, subprocess:COMMAND or constant:P")
      ->required();
  c_inf->add_option("--out", inf.out, "Output label NIfTI")->required();
  c_inf->add_option("--centerline", inf.centerline, "Spine centerline CSV (sets the midline)");
  c_inf->add_option("--threshold", inf.threshold, "Binary foreground threshold")
      ->capture_default_str();
  c_inf->add_option("--patch-mm", inf.patch_mm, "Patch height in mm")->capture_default_str();

  PhantomArgs ph;
  auto* c_ph = app.add_subcommand("phantom", "Write a synthetic ribcage phantom");
  c_ph->add_option("--out-dir", ph.out_dir, "Output directory")->required();
  c_ph->add_option("--seed", ph.seed, "Random seed")->capture_default_str();
  c_ph->add_option("--rib-pairs", ph.rib_pairs, "Rib pairs, 1..13")->capture_default_str();
  c_ph->add_option("--corrupt", ph.corrupt,
                   "Corrupted variant: shift:A-B:D, merge:K, break:L[:MM[:POS]], drop:L, "
                   "noise:RATE");

  LosscheckArgs lc;
  auto* c_lc = app.add_subcommand("losscheck", "Finite-difference check of the loss gradients");
  c_lc->add_option("--size", lc.size, "Field edge length in voxels")->capture_default_str();
  c_lc->add_option("--trials", lc.trials, "Random fields per loss")->capture_default_str();
  c_lc->add_option("--seed", lc.seed, "Random seed")->capture_default_str();
  c_lc->add_option("--report", lc.report, "JSON report path");
  c_lc->add_option("--break-gradient", lc.break_gradient)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto level = log::parse_level(log_level);
    if (!level) throw UsageError("unknown --log-level '" + log_level + "'");
    log::set_level(*level);
    set_threads(resolve_threads(thread_flag));

    if (c_pre->parsed()) cmd_preprocess(pre);
    if (c_ref->parsed()) cmd_refine(ref);
    if (c_ev->parsed()) cmd_eval(ev);
    if (c_inf->parsed()) cmd_infer(inf);
    if (c_ph->parsed()) cmd_phantom(ph);
    if (c_lc->parsed()) cmd_losscheck(lc);
  } catch (const Error& e) {
    log::error(e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    log::error(e.what());
    return 1;
  }
  return 0;
}
