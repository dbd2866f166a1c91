#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stylemix/checkpoint.hpp"
#include "stylemix/errors.hpp"
#include "stylemix/http_server.hpp"
#include "stylemix/image_io.hpp"
#include "stylemix/studio.hpp"
#include "stylemix/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stylemix;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct CliFailure {
  int code;
  std::string message;
};

struct Common {
  std::string project;
  std::string checkpoint;
  std::string out = ".";
  std::uint64_t generator_seed = 0;
  int workers = 2;
};

// Owns the studio and, when no project directory was given, a scratch project.
class Session {
 public:
  explicit Session(const Common& c) {
    std::string dir = c.project;
    if (dir.empty())
      if (const char* env = std::getenv("STUDIO_PROJECT_DIR")) dir = env;
    if (dir.empty()) {
      std::random_device rd;
      scratch_ = fs::temp_directory_path() / ("stylemix-cli-" + std::to_string(rd()) + std::to_string(rd()));
      create_project(scratch_, c);
      dir = scratch_.string();
    } else if (!c.checkpoint.empty()) {
      const auto bytes = read_file_bytes(c.checkpoint);
      const auto manifest = ProjectManifest::from_json(read_text(fs::path(dir) / "manifest.json"));
      if (sha256_hex(bytes) != manifest.checkpoint_sha256)
        throw ValidationError("--checkpoint does not match the project checkpoint");
    }
    studio_ = std::make_unique<Studio>(StudioOptions{dir, c.workers, 256});
  }

  ~Session() {
    studio_.reset();
    if (!scratch_.empty()) {
      std::error_code ec;
      fs::remove_all(scratch_, ec);
    }
  }

  static void create_project(const fs::path& dir, const Common& c) {
    if (!c.checkpoint.empty()) {
      const auto ck = load_checkpoint_with_aux(c.checkpoint);
      Project::create(dir, ck.generator, ck.aux);
      return;
    }
    auto cfg = GeneratorConfig::desk();
    cfg.rng_seed = c.generator_seed;
    Project::create(dir, Generator(cfg));
  }

  Studio& studio() { return *studio_; }

  json call(const std::string& path, const json& body) { return call_raw(path, body.dump()); }

  json call_raw(const std::string& path, const std::string& body) {
    const auto r = studio_->handle("POST", path, body);
    return check(r);
  }

  // Submits an async request and blocks until the job reaches a terminal state.
  json run_job(const std::string& path, const json& body) {
    const auto id = call(path, body).at("job_id").get<std::string>();
    const auto job = studio_->wait_for_job(id, std::chrono::hours(24));
    if (!job) throw CliFailure{kExitRuntime, "job " + id + " did not finish"};
    const auto j = json::parse(job->to_json());
    if (job->state == JobState::failed) throw CliFailure{kExitRuntime, "job failed: " + job->error.value_or("")};
    return j;
  }

  std::string upload_png(const fs::path& file, bool mask) {
    const auto bytes = read_file_bytes(file);
    const auto r = call_raw(mask ? "/v1/masks" : "/v1/images", std::string(bytes.begin(), bytes.end()));
    return r.at(mask ? "mask_uri" : "image_uri").get<std::string>();
  }

  std::string import_checkpoint(const fs::path& file) {
    const auto bytes = read_file_bytes(file);
    decode_checkpoint(bytes);
    return studio_->project().put_asset("checkpoints", "smck", bytes);
  }

  void export_asset(const std::string& uri, const fs::path& dest) {
    fs::create_directories(dest.parent_path().empty() ? fs::path(".") : dest.parent_path());
    write_file_bytes(dest, studio_->project().get_asset(uri));
    std::cout << dest.string() << "\n";
  }

 private:
  static std::string read_text(const fs::path& p) {
    const auto b = read_file_bytes(p);
    return std::string(b.begin(), b.end());
  }

  static json check(const StudioResponse& r) {
    if (r.status >= 200 && r.status < 300) return json::parse(r.body);
    std::string msg = r.body;
    try {
      msg = json::parse(r.body).at("error").get<std::string>();
    } catch (const std::exception&) {
    }
    throw CliFailure{r.status == 400 ? kExitValidation : kExitRuntime, msg};
  }

  fs::path scratch_;
  std::unique_ptr<Studio> studio_;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

// Style ids for two samples: explicit ids, otherwise seeds `seed` and `seed + 1`.
std::pair<std::string, std::string> style_pair(Session& s, const std::string& a, const std::string& b,
                                               std::uint64_t seed, double truncation) {
  if (!a.empty() && !b.empty()) return {a, b};
  const auto r = s.call("/v1/sample", json{{"seed", seed}, {"count", 2}, {"truncation", truncation}});
  return {a.empty() ? r["style_ids"][0].get<std::string>() : a, b.empty() ? r["style_ids"][1].get<std::string>() : b};
}

fs::path out_file(const Common& c, const std::string& name) { return fs::path(c.out) / name; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stylemix: spatial manipulation toolkit for a style-based generator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--project", common.project, "Project directory (default: $STUDIO_PROJECT_DIR or a scratch project)");
    sub->add_option("--checkpoint", common.checkpoint, "Generator checkpoint (.smck)");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--generator-seed", common.generator_seed, "Initialization seed of the built-in toy generator");
  };

  auto* init = app.add_subcommand("init", "Create a project directory");
  add_common(init);

  std::uint64_t seed = 0;
  int count = 1;
  double truncation = 1.0;
  auto* sample = app.add_subcommand("sample", "Sample styles and write their renders");
  add_common(sample);
  sample->add_option("--seed", seed);
  sample->add_option("--count", count)->capture_default_str();
  sample->add_option("--truncation", truncation)->capture_default_str();

  std::string style_id;
  auto* render = app.add_subcommand("render", "Render a stored style");
  add_common(render);
  render->add_option("--style-id", style_id)->required();

  std::string style_a, style_b, mask_file, layers, mode, checkpoint_b;
  std::optional<double> alpha;
  auto* blend = app.add_subcommand("blend", "Blend two styles with a mask or constant alpha");
  add_common(blend);
  blend->add_option("--style-a", style_a);
  blend->add_option("--style-b", style_b);
  blend->add_option("--seed", seed, "Sample A at seed and B at seed+1 when ids are not given");
  blend->add_option("--truncation", truncation);
  blend->add_option("--alpha", alpha, "Constant alpha in [0,1]");
  blend->add_option("--mask", mask_file, "8-bit grayscale PNG at output resolution");
  blend->add_option("--layers", layers, "Comma-separated layer indices (default: all)");
  blend->add_option("--mode", mode, "two_image | cross_generator | constant");
  blend->add_option("--checkpoint-b", checkpoint_b, "Second generator for cross_generator mode");

  int n = 3;
  double smoothing_sigma = 0.0, overlap_frac = 0.5;
  std::string axis = "horizontal";
  auto* panorama = app.add_subcommand("panorama", "Knit a panorama from sampled latents");
  add_common(panorama);
  panorama->add_option("--n", n)->capture_default_str();
  panorama->add_option("--seed", seed);
  panorama->add_option("--smoothing-sigma", smoothing_sigma)->capture_default_str();
  panorama->add_option("--axis", axis)->capture_default_str();
  panorama->add_option("--overlap-frac", overlap_frac)->capture_default_str();

  std::string image_file, perceptual;
  int steps = 500;
  std::optional<double> step_size, prior_weight;
  auto* inv = app.add_subcommand("invert", "Invert an image into sigma space");
  add_common(inv);
  inv->add_option("--image", image_file, "Target PNG at output resolution")->required();
  inv->add_option("--steps", steps)->capture_default_str();
  inv->add_option("--seed", seed);
  inv->add_option("--step-size", step_size);
  inv->add_option("--prior-weight", prior_weight);
  inv->add_option("--perceptual", perceptual, "Perceptual loss provider");

  std::string src, ref, box = "0,0,0,0";
  int feather = 0;
  std::optional<int> layer_cut, pose_k_dims;
  double alpha_exponent = 1.0;
  auto* transfer = app.add_subcommand("transfer", "Transfer a boxed attribute from a reference");
  add_common(transfer);
  transfer->add_option("--src", src);
  transfer->add_option("--ref", ref);
  transfer->add_option("--seed", seed, "Sample src at seed and ref at seed+1 when ids are not given");
  transfer->add_option("--box", box, "x0,y0,x1,y1")->capture_default_str();
  transfer->add_option("--feather", feather)->capture_default_str();
  transfer->add_option("--layer-cut", layer_cut);
  transfer->add_option("--alpha-exponent", alpha_exponent)->capture_default_str();
  transfer->add_option("--pose-k-dims", pose_k_dims);

  int ft_steps = 10, batch_size = 2, toy_count = 8;
  double learning_rate = 2e-3;
  std::string images_dir, trainable_layers;
  bool unfreeze_mapping = false, unfreeze_affine = false;
  auto* finetune = app.add_subcommand("finetune", "Finetune synthesis layers with mapping and affine frozen");
  add_common(finetune);
  finetune->add_option("--steps", ft_steps)->capture_default_str();
  finetune->add_option("--seed", seed);
  finetune->add_option("--batch-size", batch_size)->capture_default_str();
  finetune->add_option("--learning-rate", learning_rate)->capture_default_str();
  finetune->add_option("--images", images_dir, "Directory of PNG training images (default: toy dataset)");
  finetune->add_option("--toy-count", toy_count)->capture_default_str();
  finetune->add_option("--trainable-layers", trainable_layers, "Comma-separated layer indices");
  finetune->add_flag("--unfreeze-mapping", unfreeze_mapping);
  finetune->add_flag("--unfreeze-affine", unfreeze_affine);

  std::string recipe_file;
  auto* vary = app.add_subcommand("vary", "Single-image variations from a JSON recipe");
  add_common(vary);
  vary->add_option("--recipe", recipe_file)->required();
  vary->add_option("--seed", seed);
  vary->add_option("--truncation", truncation);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the HTTP job service");
  add_common(serve);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 binds an ephemeral port")->capture_default_str();
  serve->add_option("--workers", common.workers)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (init->parsed()) {
      if (common.project.empty()) throw ValidationError("init requires --project");
      Session::create_project(common.project, common);
      std::cout << Project::open(common.project).hash() << "\n";
      return 0;
    }

    Session s(common);
    if (sample->parsed()) {
      const auto r = s.call("/v1/sample", json{{"seed", seed}, {"count", count}, {"truncation", truncation}});
      for (std::size_t i = 0; i < r["image_uris"].size(); ++i) {
        s.export_asset(r["image_uris"][i], out_file(common, "sample_" + std::to_string(seed + i) + ".png"));
        s.export_asset("styles/" + r["style_ids"][i].get<std::string>() + ".json", out_file(common, "style_" + std::to_string(seed + i) + ".json"));
      }
    } else if (render->parsed()) {
      const auto r = s.call("/v1/render", json{{"style_id", style_id}});
      s.export_asset(r["image_uri"], out_file(common, "render.png"));
    } else if (blend->parsed()) {
      json body;
      const bool cross = mode == "cross_generator";
      if (cross) {
        if (checkpoint_b.empty()) throw ValidationError("cross_generator mode requires --checkpoint-b");
        body["style_a"] = !style_a.empty() ? style_a
                                           : s.call("/v1/sample", json{{"seed", seed}, {"truncation", truncation}})
                                                 .at("style_ids")[0].get<std::string>();
        body["checkpoint_b"] = s.import_checkpoint(checkpoint_b);
      } else {
        const auto [a, b] = style_pair(s, style_a, style_b, seed, truncation);
        body["style_a"] = a;
        body["style_b"] = b;
      }
      if (!mode.empty()) body["mode"] = mode;
      if (alpha) body["constant_alpha"] = *alpha;
      if (!mask_file.empty()) body["mask_uri"] = s.upload_png(mask_file, true);
      if (!layers.empty()) body["layer_set"] = parse_int_list(layers);
      const auto job = s.run_job("/v1/blend", body);
      s.export_asset(job["result_uri"], out_file(common, "blend.png"));
    } else if (panorama->parsed()) {
      const auto job = s.run_job("/v1/panorama", json{{"n", n},
                                                      {"seed", seed},
                                                      {"smoothing_sigma", smoothing_sigma},
                                                      {"axis", axis},
                                                      {"overlap_frac", overlap_frac}});
      s.export_asset(job["result_uri"], out_file(common, "panorama.png"));
      s.export_asset(job["artifacts"]["plan_uri"], out_file(common, "panorama_plan.json"));
    } else if (inv->parsed()) {
      json config{{"steps", steps}, {"seed", seed}};
      if (step_size) config["step_size"] = *step_size;
      if (prior_weight) config["prior_weight"] = *prior_weight;
      if (!perceptual.empty()) config["perceptual"] = perceptual;
      const auto job = s.run_job("/v1/invert", json{{"image_uri", s.upload_png(image_file, false)}, {"config", config}});
      s.export_asset(job["result_uri"], out_file(common, "inversion.png"));
      s.export_asset(job["artifacts"]["trace_uri"], out_file(common, "inversion_trace.csv"));
      s.export_asset(job["artifacts"]["sigma_uri"], out_file(common, "inversion_sigma.json"));
      std::cout << "best_step " << job["artifacts"]["best_step"].get<std::string>() << " final_mse "
                << job["artifacts"]["final_mse"].get<std::string>() << "\n";
    } else if (transfer->parsed()) {
      const auto [a, b] = style_pair(s, src, ref, seed, 1.0);
      json body{{"src", a}, {"ref", b}, {"box", parse_int_list(box)}, {"feather", feather}, {"alpha_exponent", alpha_exponent}};
      if (layer_cut) body["layer_cut"] = *layer_cut;
      if (pose_k_dims) body["pose_k_dims"] = *pose_k_dims;
      const auto job = s.run_job("/v1/transfer", body);
      s.export_asset(job["result_uri"], out_file(common, "transfer.png"));
      s.export_asset(job["artifacts"]["mask_uri"], out_file(common, "transfer_mask.png"));
    } else if (finetune->parsed()) {
      json freeze{{"mapping", !unfreeze_mapping}, {"affine", !unfreeze_affine}};
      if (!trainable_layers.empty()) freeze["trainable_layers"] = parse_int_list(trainable_layers);
      json body{{"steps", ft_steps},   {"seed", seed},     {"batch_size", batch_size},
                {"learning_rate", learning_rate}, {"freeze", freeze}};
      if (images_dir.empty()) {
        body["toy_dataset"] = json{{"count", toy_count}, {"seed", seed}};
      } else {
        std::vector<fs::path> files;
        if (!fs::is_directory(images_dir)) throw ValidationError("--images is not a directory");
        for (const auto& e : fs::directory_iterator(images_dir))
          if (e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        json uris = json::array();
        for (const auto& f : files) uris.push_back(s.upload_png(f, false));
        body["image_uris"] = uris;
      }
      const auto job = s.run_job("/v1/finetune", body);
      s.export_asset(job["result_uri"], out_file(common, "finetuned.smck"));
      s.export_asset(job["artifacts"]["trace_uri"], out_file(common, "finetune_trace.csv"));
    } else if (vary->parsed()) {
      const auto bytes = read_file_bytes(recipe_file);
      const auto recipe = recipe_from_json(std::string(bytes.begin(), bytes.end()));
      const auto& g = s.studio().generator();
      const auto img = single_image_variations(g, g.map_latent(g.sample_latent(seed), truncation), recipe);
      const auto dest = out_file(common, "variation.png");
      fs::create_directories(dest.parent_path());
      write_png(dest, img);
      std::cout << dest.string() << "\n";
    } else if (serve->parsed()) {
      StudioServer server(s.studio());
      const int bound = server.bind(host, port);
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      server.listen();
    }
    return 0;
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
