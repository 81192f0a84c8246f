#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sista/sista.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(sista_status st, const std::string& what) {
  if (st != SISTA_OK)
    throw Failure(what + ": " + sista_status_name(st) + ": " + sista_last_error());
}

template <typename H, void (*Free)(H*)>
struct Handle {
  H* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~Handle() { Free(p); }
  H** out() { return &p; }
  H* get() const { return p; }
};
using Image = Handle<sista_image, sista_image_free>;
using Meas = Handle<sista_measurements, sista_measurements_free>;
using Recon = Handle<sista_recon, sista_recon_free>;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
enum Stream : std::uint64_t { kPatterns = 1, kNoise = 2, kInit = 3, kInput = 4 };

double parse_ratio(const std::string& text) {
  std::string t = text;
  bool percent = false;
  if (!t.empty() && t.back() == '%') {
    percent = true;
    t.pop_back();
  }
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != t.size()) throw Failure("bad ratio '" + text + "'");
  if (percent) v /= 100.0;
  if (!(v > 0) || v > 1) throw Failure("ratio '" + text + "' must lie in (0, 1]");
  return v;
}

std::string ratio_label(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", r * 100);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Failure("config " + path.string() + ": " + e.what());
  }
}

Image load_scene(const std::string& scene, std::size_t builtin_size) {
  Image img;
  if (scene.rfind("builtin:", 0) == 0) {
    check(sista_image_builtin(scene.c_str() + 8, builtin_size, img.out()), "scene " + scene);
  } else {
    if (!fs::exists(scene)) throw Failure("scene not found: " + scene);
    check(sista_image_read_pgm(scene.c_str(), img.out()), "scene " + scene);
  }
  return img;
}

std::string scene_name(const std::string& scene) {
  if (scene.rfind("builtin:", 0) == 0) return scene.substr(8);
  return fs::path(scene).stem().string();
}

// Flags override the config file; the merged object is what runs and what
// is echoed to config.json.
struct Experiment {
  json cfg = json::object();

  template <typename V>
  V get(const char* key, V fallback) const {
    return cfg.contains(key) && !cfg.at(key).is_null() ? cfg.at(key).get<V>() : fallback;
  }
};

struct Common {
  std::string config_path;
  std::string method;
  std::string ratio;
  std::size_t n_meas = 0;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string out;
  bool pseudo_gt = false;
  std::optional<std::size_t> snapshot_every;
  std::string precision;
  bool montage = false;
};

Experiment resolve(const Common& c) {
  Experiment e;
  if (!c.config_path.empty()) {
    e.cfg = read_json(c.config_path);
    if (!e.cfg.is_object()) throw Failure("config must be a JSON object");
  }
  if (!c.method.empty()) e.cfg["method"] = c.method;
  if (!c.ratio.empty()) {
    e.cfg["ratio"] = parse_ratio(c.ratio);
    e.cfg.erase("n_meas");
  }
  if (c.n_meas > 0) {
    e.cfg["n_meas"] = c.n_meas;
    e.cfg.erase("ratio");
  }
  if (c.seed) e.cfg["seed"] = *c.seed;
  if (!c.precision.empty()) e.cfg["sista"]["precision"] = c.precision;
  if (c.snapshot_every) e.cfg["sista"]["snapshot_every"] = *c.snapshot_every;
  if (e.cfg.contains("ratio") && e.cfg.contains("n_meas") && !e.cfg["ratio"].is_null() &&
      !e.cfg["n_meas"].is_null())
    throw Failure("give exactly one of ratio / n_meas");
  if (!e.cfg.contains("seed")) e.cfg["seed"] = 1;
  return e;
}

std::string method_config(const Experiment& e, const std::string& method) {
  // A config.json written by a previous run carries the fully resolved
  // settings; reuse them verbatim.
  if (e.cfg.contains("resolved") && e.cfg["resolved"].value("method", "") == method) {
    json s = e.cfg["resolved"].at("settings");
    if (e.cfg.contains(method)) s.merge_patch(e.cfg[method]);
    return s.dump();
  }
  const std::uint64_t seed = e.get<std::uint64_t>("seed", 1);
  if (method == "sista") {
    json s = e.cfg.contains("sista") ? e.cfg["sista"] : json::object();
    if (!s.contains("init_seed")) s["init_seed"] = derive_seed(seed, kInit);
    if (!s.contains("input_seed")) s["input_seed"] = derive_seed(seed, kInput);
    return s.dump();
  }
  if (method == "ista") return (e.cfg.contains("ista") ? e.cfg["ista"] : json::object()).dump();
  return "{}";
}

Meas simulate(const Experiment& e, const sista_image* scene) {
  const std::size_t h = sista_image_height(scene), w = sista_image_width(scene);
  std::size_t n = e.get<std::size_t>("n_meas", 0);
  if (n == 0) {
    if (!e.cfg.contains("ratio")) throw Failure("give --ratio or --n-meas");
    check(sista_measurements_for_ratio(e.cfg["ratio"].get<double>(), h, w, &n), "ratio");
  }
  const std::uint64_t seed = e.get<std::uint64_t>("seed", 1);
  sista_noise noise{0, 0, derive_seed(seed, kNoise)};
  if (e.cfg.contains("noise")) {
    const json& nz = e.cfg["noise"];
    noise.gaussian_sigma = nz.value("gaussian_sigma", 0.0);
    noise.poisson_scale = nz.value("poisson_scale", 0.0);
  }
  Meas m;
  const std::string kind = e.get<std::string>("pattern", "bernoulli");
  check(sista_simulate(scene, kind.c_str(), n, derive_seed(seed, kPatterns), &noise, m.out()),
        "simulate");
  return m;
}

// Writes the reconstruction artifacts; on failure every file created here is
// removed again.
struct OutputSet {
  std::vector<fs::path> created;
  bool committed = false;
  ~OutputSet() {
    if (committed) return;
    std::error_code ec;
    for (const auto& p : created) fs::remove(p, ec);
  }
  fs::path add(const fs::path& p) {
    created.push_back(p);
    return p;
  }
};

Recon reconstruct_into(const sista_measurements* m, const Experiment& e, const fs::path& dir,
                       json echo) {
  const std::string method = e.get<std::string>("method", "sista");
  Recon r;
  check(sista_reconstruct(m, method.c_str(), method_config(e, method).c_str(), r.out()),
        "reconstruct (" + method + ")");
  fs::create_directories(dir);
  OutputSet out;
  Image recon;
  check(sista_recon_image(r.get(), "recon", recon.out()), "recon image");
  check(sista_image_write_pgm(recon.get(), out.add(dir / "recon.pgm").c_str()), "write");
  if (method == "sista") {
    Image of;
    check(sista_recon_image(r.get(), "fidelity", of.out()), "fidelity image");
    check(sista_image_write_pgm(of.get(), out.add(dir / "of.pgm").c_str()), "write");
    check(sista_recon_save_checkpoint(r.get(), out.add(dir / "model.ssta").c_str(),
                                      echo.dump().c_str()),
          "checkpoint");
    for (std::size_t i = 0; i < sista_recon_snapshot_count(r.get()); ++i) {
      std::size_t it = 0;
      Image snap;
      check(sista_recon_snapshot(r.get(), i, &it, snap.out()), "snapshot");
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%06zu.pgm", it);
      check(sista_image_write_pgm(snap.get(), out.add(dir / name).c_str()), "write");
    }
  }
  if (method != "dgi") write_text(out.add(dir / "train.csv"), sista_recon_csv(r.get()));
  echo["resolved"] = json::parse(sista_recon_config(r.get()));
  write_text(out.add(dir / "config.json"), echo.dump(2) + "\n");
  out.committed = true;
  return r;
}

int cmd_simulate(const Common& c, const std::string& scene_arg) {
  Experiment e = resolve(c);
  if (!scene_arg.empty()) e.cfg["scene"] = scene_arg;
  const std::string scene = e.get<std::string>("scene", "builtin:glyph");
  e.cfg["scene"] = scene;
  const Image img = load_scene(scene, e.get<std::size_t>("size", 64));
  const Meas m = simulate(e, img.get());
  const fs::path out = c.out.empty() ? fs::path("measurements.spim") : fs::path(c.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  check(sista_measurements_save(m.get(), out.c_str()), "save");
  e.cfg["n_meas"] = sista_measurements_count(m.get());
  e.cfg["pattern"] = sista_measurements_kind(m.get());
  e.cfg["pattern_seed"] = sista_measurements_pattern_seed(m.get());
  fs::path sidecar = out;
  sidecar.replace_extension(".json");
  write_text(sidecar, e.cfg.dump(2) + "\n");
  std::cout << "wrote " << out.string() << " (" << sista_measurements_count(m.get())
            << " measurements, " << sista_measurements_height(m.get()) << "x"
            << sista_measurements_width(m.get()) << ")\n";
  return 0;
}

int cmd_reconstruct(const Common& c, const std::string& input) {
  Experiment e = resolve(c);
  if (input.empty()) throw Failure("reconstruct needs an SPIM input");
  Meas m;
  check(sista_measurements_load(input.c_str(), m.out()), "load " + input);
  const fs::path dir = c.out.empty() ? fs::path("out") : fs::path(c.out);
  json echo = e.cfg;
  echo.erase("resolved");
  echo["input"] = fs::absolute(input).string();
  const Recon r = reconstruct_into(m.get(), e, dir, echo);
  std::cout << e.get<std::string>("method", "sista") << ": wrote " << dir.string() << " in "
            << sista_recon_wall_seconds(r.get()) << " s\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& recon_path, const std::string& ref_path,
             const std::string& mask_path, bool want_cnr, const std::string& scene,
             double ratio) {
  if (recon_path.empty()) throw Failure("eval needs --recon");
  if (want_cnr && mask_path.empty()) throw Failure("--cnr requires --mask");
  if (ref_path.empty() && !c.pseudo_gt) throw Failure("eval needs --ref or --pseudo-gt");
  Image recon, ref;
  check(sista_image_read_pgm(recon_path.c_str(), recon.out()), "read " + recon_path);
  if (c.pseudo_gt) {
    check(sista_pseudo_gt(recon.get(), ref.out()), "pseudo-gt");
  } else {
    check(sista_image_read_pgm(ref_path.c_str(), ref.out()), "read " + ref_path);
  }
  sista_metric_row row{};
  int identical = 0;
  check(sista_psnr(recon.get(), ref.get(), &row.psnr_db, &identical), "psnr");
  check(sista_ssim(recon.get(), ref.get(), &row.ssim), "ssim");
  if (want_cnr) {
    Image mask;
    check(sista_image_read_pgm(mask_path.c_str(), mask.out()), "read " + mask_path);
    check(sista_cnr(recon.get(), mask.get(), -1, &row.cnr), "cnr");
    row.has_cnr = 1;
  }
  const std::string method = c.method.empty() ? "unknown" : c.method;
  const std::string scene_label = scene.empty() ? fs::path(recon_path).stem().string() : scene;
  row.scene = scene_label.c_str();
  row.method = method.c_str();
  row.ratio = ratio;
  row.seed = c.seed.value_or(0);
  row.against = c.pseudo_gt ? "pseudo-gt" : "ground-truth";
  if (!c.out.empty()) check(sista_metric_append(c.out.c_str(), &row), "append " + c.out);
  std::cout << "psnr " << (identical ? std::string("inf") : std::to_string(row.psnr_db))
            << " dB, ssim " << row.ssim;
  if (row.has_cnr) std::cout << ", cnr " << row.cnr;
  std::cout << " (against " << row.against << ")\n";
  return 0;
}

struct Cell {
  std::string scene;
  double ratio = 0;
  std::string method;  // dgi, ista, sista
  std::string tag;     // ablation tag for sista cells
  std::uint64_t seed = 1;
  fs::path dir;
  // results
  bool ok = false;
  std::string error;
  double psnr = 0, ssim = 0;
  bool identical = false;
};

void run_cell(const Experiment& base, Cell& cell, std::size_t builtin_size) {
  Experiment e = base;
  e.cfg["scene"] = cell.scene;
  e.cfg["ratio"] = cell.ratio;
  e.cfg.erase("n_meas");
  e.cfg["method"] = cell.method;
  e.cfg["seed"] = cell.seed;
  if (!cell.tag.empty()) e.cfg["sista"]["ablation"] = cell.tag;
  const Image scene = load_scene(cell.scene, builtin_size);
  const Meas m = simulate(e, scene.get());
  json echo = e.cfg;
  echo.erase("resolved");
  const Recon r = reconstruct_into(m.get(), e, cell.dir, echo);
  Image recon;
  check(sista_recon_image(r.get(), "recon", recon.out()), "recon image");
  int identical = 0;
  check(sista_psnr(recon.get(), scene.get(), &cell.psnr, &identical), "psnr");
  cell.identical = identical != 0;
  check(sista_ssim(recon.get(), scene.get(), &cell.ssim), "ssim");
}

void run_pool(const Experiment& base, std::vector<Cell>& cells, std::size_t jobs,
              std::size_t builtin_size) {
  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      Cell& cell = cells[i];
      try {
        run_cell(base, cell, builtin_size);
        cell.ok = true;
      } catch (const std::exception& ex) {
        cell.error = ex.what();
      }
      std::lock_guard<std::mutex> lock(log);
      std::cerr << "[" << (i + 1) << "/" << cells.size() << "] " << scene_name(cell.scene) << " "
                << cell.method << (cell.tag.empty() ? "" : "-" + cell.tag) << " "
                << ratio_label(cell.ratio) << " seed " << cell.seed << ": "
                << (cell.ok ? "psnr " + std::to_string(cell.psnr) : "FAILED " + cell.error)
                << "\n";
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < std::max<std::size_t>(1, jobs); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

void append_rows(const fs::path& csv, const std::vector<Cell>& cells) {
  for (const Cell& cell : cells) {
    if (!cell.ok) continue;
    const std::string scene = scene_name(cell.scene);
    const std::string method = cell.tag.empty() ? cell.method : cell.method + "-" + cell.tag;
    sista_metric_row row{};
    row.scene = scene.c_str();
    row.method = method.c_str();
    row.ratio = cell.ratio;
    row.psnr_db = cell.identical ? INFINITY : cell.psnr;
    row.ssim = cell.ssim;
    row.seed = cell.seed;
    row.against = "ground-truth";
    check(sista_metric_append(csv.c_str(), &row), "append " + csv.string());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_sweep(const Common& c, const std::string& scene_arg, const std::string& ratios_arg,
              const std::string& methods_arg, const std::string& seeds_arg) {
  Experiment e = resolve(c);
  if (!scene_arg.empty()) e.cfg["scene"] = scene_arg;
  std::vector<double> ratios;
  for (const auto& r : split_list(ratios_arg.empty() ? "1%,2%,3%,4%,5%,6%,7%,8%,9%,10%"
                                                     : ratios_arg))
    ratios.push_back(parse_ratio(r));
  if (ratios.empty()) throw Failure("sweep needs at least one ratio");
  const auto methods = split_list(methods_arg.empty() ? "dgi,ista,sista" : methods_arg);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(seeds_arg)) seeds.push_back(std::stoull(s));
  if (seeds.empty()) seeds.push_back(e.get<std::uint64_t>("seed", 1));
  const std::string scene = e.get<std::string>("scene", "builtin:glyph");
  e.cfg["scene"] = scene;
  const fs::path dir = c.out.empty() ? fs::path("sweep") : fs::path(c.out);
  fs::create_directories(dir);

  std::vector<Cell> cells;
  for (std::uint64_t seed : seeds)
    for (double r : ratios)
      for (const auto& m : methods) {
        if (m != "dgi" && m != "ista" && m != "sista") throw Failure("unknown method '" + m + "'");
        Cell cell;
        cell.scene = scene;
        cell.ratio = r;
        cell.method = m;
        cell.seed = seed;
        char name[96];
        std::snprintf(name, sizeof name, "%s_r%05.2f_s%llu", m.c_str(), r * 100,
                      static_cast<unsigned long long>(seed));
        cell.dir = dir / "cells" / name;
        cells.push_back(cell);
      }
  json echo = e.cfg;
  echo["ratios"] = ratios;
  echo["methods"] = methods;
  echo["seeds"] = seeds;
  write_text(dir / "config.json", echo.dump(2) + "\n");
  run_pool(e, cells, c.jobs, e.get<std::size_t>("size", 64));
  const fs::path csv = dir / "sweep.csv";
  fs::remove(csv);
  append_rows(csv, cells);

  if (c.montage) {
    std::vector<Image> imgs;
    std::vector<const sista_image*> ptrs;
    for (const Cell& cell : cells) {
      if (!cell.ok) continue;
      Image img;
      check(sista_image_read_pgm((cell.dir / "recon.pgm").c_str(), img.out()), "montage");
      ptrs.push_back(img.get());
      imgs.push_back(std::move(img));
    }
    if (!ptrs.empty()) {
      Image grid;
      check(sista_image_montage(ptrs.data(), ptrs.size(), methods.size(), grid.out()),
            "montage");
      check(sista_image_write_pgm(grid.get(), (dir / "montage.pgm").c_str()), "montage");
    }
  }
  std::size_t failed = 0;
  for (const Cell& cell : cells) failed += cell.ok ? 0 : 1;
  std::cout << "sweep: " << cells.size() - failed << "/" << cells.size() << " cells ok, "
            << csv.string() << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_ablate(const Common& c, const std::string& tags_arg, const std::string& scenes_arg) {
  Experiment e = resolve(c);
  e.cfg["method"] = "sista";
  if (!e.cfg.contains("ratio") && !e.cfg.contains("n_meas")) e.cfg["ratio"] = 0.1;
  if (!e.cfg.contains("ratio")) throw Failure("ablate uses --ratio, not --n-meas");
  std::vector<std::string> tags{"full"};
  for (const auto& t : split_list(tags_arg.empty() ? "a,b,c,d,e,f,g" : tags_arg))
    if (t != "full") tags.push_back(t);
  const auto scenes = split_list(scenes_arg.empty() ? "builtin:glyph,builtin:texture"
                                                    : scenes_arg);
  const fs::path dir = c.out.empty() ? fs::path("ablate") : fs::path(c.out);
  fs::create_directories(dir);
  const std::uint64_t seed = e.get<std::uint64_t>("seed", 1);
  std::vector<Cell> cells;
  for (const auto& s : scenes)
    for (const auto& t : tags) {
      Cell cell;
      cell.scene = s;
      cell.ratio = e.cfg["ratio"].get<double>();
      cell.method = "sista";
      cell.tag = t;
      cell.seed = seed;
      cell.dir = dir / "cells" / (scene_name(s) + "_" + t);
      cells.push_back(cell);
    }
  // Validate tags before spending time on training.
  for (const auto& t : tags) {
    if (t != "full" && (t.size() != 1 || t[0] < 'a' || t[0] > 'g'))
      throw Failure("unknown ablation tag '" + t + "' (valid: full, a, b, c, d, e, f, g)");
  }
  json echo = e.cfg;
  echo["tags"] = tags;
  echo["scenes"] = scenes;
  write_text(dir / "config.json", echo.dump(2) + "\n");
  run_pool(e, cells, c.jobs, e.get<std::size_t>("size", 64));
  const fs::path csv = dir / "ablation.csv";
  fs::remove(csv);
  append_rows(csv, cells);

  std::ostringstream table;
  table << "variant";
  for (const auto& s : scenes) table << "," << scene_name(s);
  table << "\n";
  for (std::size_t t = 0; t < tags.size(); ++t) {
    table << tags[t];
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const Cell& cell = cells[s * tags.size() + t];
      char buf[32];
      if (cell.ok) std::snprintf(buf, sizeof buf, ",%.6f", cell.psnr);
      table << (cell.ok ? buf : ",");
    }
    table << "\n";
  }
  write_text(dir / "table.csv", table.str());
  std::cout << table.str();
  std::size_t failed = 0;
  for (const Cell& cell : cells) failed += cell.ok ? 0 : 1;
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-pixel imaging simulation and reconstruction"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    sub->add_option("--method", common.method, "dgi, ista or sista");
    sub->add_option("--ratio", common.ratio, "sampling ratio, e.g. 2.93% or 0.0293");
    sub->add_option("--n-meas", common.n_meas, "number of measurements");
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--jobs", common.jobs, "worker threads for sweep/ablate")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", common.out, "output path");
    sub->add_option("--snapshot-every", common.snapshot_every,
                    "write O_P every k iterations (sista)");
    sub->add_option("--precision", common.precision, "f32 or f64 (sista)")
        ->check(CLI::IsMember({"f32", "f64"}));
  };

  std::string scene, input, recon, ref, mask, eval_scene, ratios, methods, seeds, tags, scenes;
  double eval_ratio = 0;
  bool want_cnr = false;

  auto* sim = app.add_subcommand("simulate", "simulate measurements of a scene");
  add_common(sim);
  sim->add_option("--scene", scene, "PGM path or builtin:<glyph|texture|stripes>");

  auto* rec = app.add_subcommand("reconstruct", "reconstruct an image from an SPIM file");
  add_common(rec);
  rec->add_option("input", input, "SPIM file")->required();

  auto* ev = app.add_subcommand("eval", "score a reconstruction");
  add_common(ev);
  ev->add_option("--recon", recon, "reconstruction PGM")->required();
  ev->add_option("--ref", ref, "reference PGM");
  ev->add_flag("--pseudo-gt", common.pseudo_gt, "score against a pseudo ground truth");
  ev->add_flag("--cnr", want_cnr, "also report CNR");
  ev->add_option("--mask", mask, "PGM whose Otsu threshold defines the CNR masks");
  ev->add_option("--scene", eval_scene, "scene label for the CSV row");
  ev->add_option("--sampling", eval_ratio, "ratio label for the CSV row");

  auto* sw = app.add_subcommand("sweep", "ratio x method grid");
  add_common(sw);
  sw->add_option("--scene", scene, "PGM path or builtin:<name>");
  sw->add_option("--ratios", ratios, "comma-separated ratios (default 1%..10%)");
  sw->add_option("--methods", methods, "comma-separated methods (default dgi,ista,sista)");
  sw->add_option("--seeds", seeds, "comma-separated master seeds");
  sw->add_flag("--montage", common.montage, "write montage.pgm");

  auto* ab = app.add_subcommand("ablate", "full model plus ablation variants");
  add_common(ab);
  ab->add_option("--tags", tags, "comma-separated tags from a..g (default all)");
  ab->add_option("--scenes", scenes, "comma-separated scenes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(common, scene);
    if (*rec) return cmd_reconstruct(common, input);
    if (*ev) {
      if (!eval_ratio && !common.ratio.empty()) eval_ratio = parse_ratio(common.ratio);
      return cmd_eval(common, recon, ref, mask, want_cnr, eval_scene, eval_ratio);
    }
    if (*sw) return cmd_sweep(common, scene, ratios, methods, seeds);
    if (*ab) return cmd_ablate(common, tags, scenes);
  } catch (const std::exception& e) {
    std::cerr << "spi: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
