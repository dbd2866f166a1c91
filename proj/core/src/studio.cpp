#include "stylemix/studio.hpp"

#include <openssl/evp.h>

#include <array>
#include <boost/uuid/uuid.hpp>
#include <boost/uuid/uuid_generators.hpp>
#include <boost/uuid/uuid_io.hpp>
#include <fstream>
#include <regex>

#include "json.hpp"
#include "stylemix/blend.hpp"
#include "stylemix/checkpoint.hpp"
#include "stylemix/finetune.hpp"
#include "stylemix/image_io.hpp"
#include "stylemix/inversion.hpp"
#include "stylemix/panorama.hpp"
#include "stylemix/transfer.hpp"

namespace stylemix {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

StudioResponse json_response(int status, const json& j) { return StudioResponse{status, "application/json", j.dump()}; }

StudioResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  auto j = json::parse(body);
  if (!j.is_object()) throw DomainError("request body must be a JSON object");
  return j;
}

// Typed field readers that report the field name in validation errors.
template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw DomainError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DomainError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? field<T>(j, key) : fallback;
}

std::string content_type_for(const std::string& uri) {
  if (uri.ends_with(".png")) return "image/png";
  if (uri.ends_with(".json")) return "application/json";
  if (uri.ends_with(".csv")) return "text/csv";
  return "application/octet-stream";
}

const std::regex& asset_uri_pattern() {
  static const std::regex re(R"(^(checkpoints|images|masks|styles|plans|jobs)/([0-9a-f]{64})\.(png|json|csv|smck)$)");
  return re;
}

std::string style_to_json(const StyleStack& s) {
  json j;
  j["rows"] = json::array();
  for (const auto& r : s.rows()) j["rows"].push_back(r.values);
  return j.dump();
}

StyleStack style_from_json(const json& j, const Generator& gen) {
  std::vector<StyleVector> rows;
  if (j.contains("w")) {
    rows.assign(gen.num_layers(), StyleVector{field<std::vector<double>>(j, "w")});
  } else {
    for (const auto& r : field<json>(j, "rows")) rows.push_back(StyleVector{r.get<std::vector<double>>()});
  }
  if (static_cast<int>(rows.size()) != gen.num_layers()) throw DomainError("style needs one row per layer");
  for (const auto& r : rows)
    if (static_cast<int>(r.values.size()) != gen.config().latent_dim) throw DomainError("style row has the wrong width");
  return StyleStack(std::move(rows));
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string ProjectManifest::to_json() const {
  json j;
  j["format_version"] = format_version;
  j["checkpoint"] = checkpoint;
  j["checkpoint_sha256"] = checkpoint_sha256;
  j["config"] = json::parse(config_json);
  return j.dump(2);
}

ProjectManifest ProjectManifest::from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    ProjectManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.checkpoint = j.at("checkpoint").get<std::string>();
    m.checkpoint_sha256 = j.at("checkpoint_sha256").get<std::string>();
    m.config_json = j.at("config").dump();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed project manifest: ") + e.what());
  }
}

const std::vector<std::string>& Project::directories() {
  static const std::vector<std::string> dirs{"checkpoints", "images", "masks", "styles", "plans", "jobs"};
  return dirs;
}

Project::Project(std::filesystem::path root, ProjectManifest manifest)
    : root_(std::move(root)), manifest_(std::move(manifest)) {}

Project Project::create(const std::filesystem::path& root, const Generator& gen, const ParameterSet& aux) {
  if (std::filesystem::exists(root / "manifest.json")) throw IoError("project already exists at " + root.string());
  for (const auto& d : directories()) std::filesystem::create_directories(root / d);
  const auto bytes = encode_checkpoint(gen, aux);
  Project p(root, {});
  p.manifest_.checkpoint = p.put_asset("checkpoints", "smck", bytes);
  p.manifest_.checkpoint_sha256 = sha256_hex(bytes);
  p.manifest_.config_json = config_to_json(gen.config());
  const auto text = p.manifest_.to_json();
  write_file_bytes(root / "manifest.json", as_bytes(text));
  return p;
}

Project Project::open(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  if (!std::filesystem::exists(path)) throw IoError("no project manifest at " + path.string());
  const auto bytes = read_file_bytes(path);
  Project p(root, ProjectManifest::from_json(std::string(bytes.begin(), bytes.end())));
  for (const auto& d : directories()) std::filesystem::create_directories(root / d);
  p.verify();
  return p;
}

void Project::verify() const {
  const auto path = root_ / manifest_.checkpoint;
  if (!std::filesystem::exists(path)) throw HashMismatchError("project checkpoint is missing");
  if (sha256_hex(read_file_bytes(path)) != manifest_.checkpoint_sha256)
    throw HashMismatchError("checkpoint does not match the manifest hash");
}

std::string Project::put_asset(const std::string& directory, const std::string& extension,
                               std::span<const std::uint8_t> bytes) const {
  const std::string uri = directory + "/" + sha256_hex(bytes) + "." + extension;
  const auto path = root_ / uri;
  if (!std::filesystem::exists(path)) {
    // Write then rename so concurrent readers never see a partial asset.
    const auto tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    write_file_bytes(tmp, bytes);
    std::filesystem::rename(tmp, path);
  }
  return uri;
}

std::string Project::put_text_asset(const std::string& directory, const std::string& extension,
                                    const std::string& text) const {
  return put_asset(directory, extension, as_bytes(text));
}

std::filesystem::path Project::asset_path(const std::string& uri) const {
  if (!std::regex_match(uri, asset_uri_pattern())) throw NotFoundError("asset '" + uri + "'");
  return root_ / uri;
}

std::vector<std::uint8_t> Project::get_asset(const std::string& uri) const {
  const auto path = asset_path(uri);
  if (!std::filesystem::exists(path)) throw NotFoundError("asset '" + uri + "'");
  return read_file_bytes(path);
}

std::string to_string(JobKind k) {
  switch (k) {
    case JobKind::render: return "render";
    case JobKind::blend: return "blend";
    case JobKind::invert: return "invert";
    case JobKind::panorama: return "panorama";
    case JobKind::transfer: return "transfer";
    case JobKind::finetune: return "finetune";
  }
  return "?";
}

std::string to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

std::string Job::to_json() const {
  json j;
  j["id"] = id;
  j["kind"] = to_string(kind);
  j["state"] = to_string(state);
  j["request"] = json::parse(request_json);
  j["result_uri"] = result_uri ? json(*result_uri) : json(nullptr);
  j["artifacts"] = artifacts;
  j["error"] = error ? json(*error) : json(nullptr);
  j["timings"] = timings_ms;
  return j.dump();
}

JobQueue::JobQueue(int workers, Observer on_change) : observer_(std::move(on_change)) {
  if (workers < 1) throw ConfigError("job queue needs at least one worker");
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void JobQueue::notify(const Job& job) {
  if (observer_) observer_(job);
}

std::string JobQueue::submit(JobKind kind, std::string request_json, Work work) {
  static thread_local boost::uuids::random_generator uuid_gen;
  Job job;
  job.id = boost::uuids::to_string(uuid_gen());
  job.kind = kind;
  job.request_json = std::move(request_json);
  {
    std::lock_guard lock(mu_);
    entries_.emplace(job.id, Entry{job, std::move(work), Clock::now()});
    order_.push_back(job.id);
    pending_.push_back(job.id);
  }
  notify(job);
  cv_.notify_one();
  return job.id;
}

void JobQueue::worker_loop() {
  for (;;) {
    std::string id;
    Work work;
    Job snapshot;
    Clock::time_point start;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !pending_.empty(); });
      if (stopping_ && pending_.empty()) return;
      id = pending_.front();
      pending_.pop_front();
      auto& e = entries_.at(id);
      e.job.state = JobState::running;
      e.job.timings_ms["queued"] = ms_since(e.submitted);
      work = std::move(e.work);
      snapshot = e.job;
      start = Clock::now();
    }
    notify(snapshot);

    JobOutput out;
    std::optional<std::string> error;
    try {
      out = work();
    } catch (const std::exception& ex) {
      error = ex.what();
    }

    {
      std::lock_guard lock(mu_);
      auto& job = entries_.at(id).job;
      job.timings_ms["running"] = ms_since(start);
      for (const auto& [phase, ms] : out.phase_ms) job.timings_ms[phase] = ms;
      if (error) {
        job.state = JobState::failed;
        job.error = error;
      } else {
        job.state = JobState::done;
        job.result_uri = out.result_uri;
        job.artifacts = out.artifacts;
      }
      snapshot = job;
    }
    notify(snapshot);
    done_cv_.notify_all();
  }
}

std::optional<Job> JobQueue::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.job;
}

std::vector<Job> JobQueue::list() const {
  std::lock_guard lock(mu_);
  std::vector<Job> out;
  for (const auto& id : order_) out.push_back(entries_.at(id).job);
  return out;
}

std::optional<Job> JobQueue::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  done_cv_.wait_for(lock, timeout, [&] {
    const auto s = it->second.job.state;
    return s == JobState::done || s == JobState::failed;
  });
  return it->second.job;
}

Studio::Studio(StudioOptions options)
    : options_(std::move(options)), project_(Project::open(options_.project_dir)) {
  auto contents = decode_checkpoint(project_.get_asset(project_.manifest().checkpoint));
  generator_ = std::make_shared<const Generator>(std::move(contents.generator));
  checkpoint_sigma_ = sigma_gaussian_from_aux(contents.aux);
  generators_[project_.manifest().checkpoint] = generator_;
  queue_ = std::make_unique<JobQueue>(options_.workers, [this](const Job& j) { persist_job(j); });
}

Studio::~Studio() { queue_.reset(); }

void Studio::persist_job(const Job& job) const {
  const auto path = project_.root() / "jobs" / (job.id + ".json");
  const auto tmp = path.string() + ".tmp";
  write_file_bytes(tmp, as_bytes(job.to_json()));
  std::filesystem::rename(tmp, path);
}

std::optional<Job> Studio::wait_for_job(const std::string& id, std::chrono::milliseconds timeout) const {
  return queue_->wait(id, timeout);
}

std::shared_ptr<const Generator> Studio::generator_for(const std::string& checkpoint_uri) {
  std::lock_guard lock(cache_mu_);
  auto it = generators_.find(checkpoint_uri);
  if (it != generators_.end()) return it->second;
  if (!checkpoint_uri.starts_with("checkpoints/")) throw DomainError("checkpoint URI must name a checkpoints/ asset");
  auto gen = std::make_shared<const Generator>(decode_checkpoint(project_.get_asset(checkpoint_uri)).generator);
  generators_[checkpoint_uri] = gen;
  return gen;
}

const SigmaGaussian& Studio::sigma_gaussian() {
  if (checkpoint_sigma_) return *checkpoint_sigma_;
  std::lock_guard lock(cache_mu_);
  if (!fitted_sigma_) fitted_sigma_ = fit_sigma_gaussian(*generator_, options_.sigma_fit_samples, 0);
  return *fitted_sigma_;
}

StyleStack Studio::load_style(const std::string& id) const {
  const auto bytes = project_.get_asset("styles/" + id + ".json");
  return style_from_json(json::parse(bytes.begin(), bytes.end()), *generator_);
}

std::string Studio::store_style(const StyleStack& s) const {
  const auto uri = project_.put_text_asset("styles", "json", style_to_json(s));
  return uri.substr(7, 64);
}

std::string Studio::store_image(const Image& img) const { return project_.put_asset("images", "png", encode_png_rgb(img)); }

StudioResponse Studio::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    return dispatch(method, path, body);
  } catch (const json::exception& e) {
    return error_response(400, std::string("invalid JSON: ") + e.what());
  } catch (const ValidationError& e) {
    return error_response(400, e.what());
  } catch (const NotFoundError& e) {
    return error_response(404, e.what());
  } catch (const HashMismatchError& e) {
    return error_response(409, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

StudioResponse Studio::dispatch(const std::string& method, const std::string& path, const std::string& body) {
  if (method == "GET") {
    if (path == "/v1/health") return json_response(200, json{{"status", "ok"}});
    if (path == "/v1/project") return StudioResponse{200, "application/json", project_.manifest().to_json()};
    if (path == "/v1/jobs") {
      json arr = json::array();
      for (const auto& j : queue_->list()) arr.push_back(json::parse(j.to_json()));
      return json_response(200, arr);
    }
    if (path.starts_with("/v1/jobs/")) return job_response(path.substr(9));
    if (path.starts_with("/v1/assets/")) {
      const auto uri = path.substr(11);
      const auto bytes = project_.get_asset(uri);
      return StudioResponse{200, content_type_for(uri), std::string(bytes.begin(), bytes.end())};
    }
    throw NotFoundError("route GET " + path);
  }
  if (method != "POST") throw NotFoundError("route " + method + " " + path);

  // Masks and images arrive as raw PNG bodies; everything else is JSON.
  if (path == "/v1/masks") return post_png(body, true);
  if (path == "/v1/images") return post_png(body, false);

  static const std::map<std::string, StudioResponse (Studio::*)(const std::string&)> routes{
      {"/v1/sample", &Studio::post_sample},     {"/v1/render", &Studio::post_render},
      {"/v1/styles", &Studio::post_styles},     {"/v1/blend", &Studio::post_blend},
      {"/v1/invert", &Studio::post_invert},     {"/v1/panorama", &Studio::post_panorama},
      {"/v1/transfer", &Studio::post_transfer}, {"/v1/finetune", &Studio::post_finetune},
  };
  auto it = routes.find(path);
  if (it == routes.end()) throw NotFoundError("route POST " + path);
  const auto j = parse_body(body);
  if (j.contains("project_hash") && field<std::string>(j, "project_hash") != project_.hash())
    throw HashMismatchError("request targets project " + j.at("project_hash").get<std::string>());
  project_.verify();
  return (this->*(it->second))(body);
}

StudioResponse Studio::job_response(const std::string& id) const {
  const auto job = queue_->get(id);
  if (!job) throw NotFoundError("job '" + id + "'");
  return StudioResponse{200, "application/json", job->to_json()};
}

namespace {

StudioResponse accepted(const std::string& id) { return json_response(202, json{{"job_id", id}, {"state", "queued"}}); }

// Request JSON as persisted with the job: the original body plus the project hash.
std::string persisted_request(const json& j, const std::string& hash) {
  json r = j;
  r["project_hash"] = hash;
  return r.dump();
}

}  // namespace

StudioResponse Studio::post_sample(const std::string& body) {
  const auto j = parse_body(body);
  const auto seed = field<std::uint64_t>(j, "seed");
  const double truncation = field_or<double>(j, "truncation", 1.0);
  const int count = field_or<int>(j, "count", 1);
  if (count < 1 || count > 64) throw RangeError("count must lie in [1, 64]");
  if (!(truncation >= 0.0 && truncation <= 1.0)) throw RangeError("truncation must lie in [0, 1]");
  json ids = json::array();
  json uris = json::array();
  for (int i = 0; i < count; ++i) {
    const auto w = generator_->map_latent(generator_->sample_latent(seed + static_cast<std::uint64_t>(i)), truncation);
    const auto stack = expand_to_stack(w, generator_->num_layers());
    ids.push_back(store_style(stack));
    uris.push_back(store_image(generator_->synthesize(stack).image));
  }
  return json_response(200, json{{"style_ids", ids}, {"image_uris", uris}});
}

StudioResponse Studio::post_render(const std::string& body) {
  const auto j = parse_body(body);
  const auto style = load_style(field<std::string>(j, "style_id"));
  const auto checkpoint = field_or<std::string>(j, "checkpoint", project_.manifest().checkpoint);
  auto gen = generator_for(checkpoint);
  if (field_or<bool>(j, "async", false)) {
    return accepted(queue_->submit(JobKind::render, persisted_request(j, project_.hash()), [this, gen, style] {
      return JobOutput{store_image(gen->synthesize(style).image), {}, {}};
    }));
  }
  return json_response(200, json{{"image_uri", store_image(gen->synthesize(style).image)}});
}

StudioResponse Studio::post_styles(const std::string& body) {
  const auto j = parse_body(body);
  return json_response(200, json{{"style_id", store_style(style_from_json(j, *generator_))}});
}

StudioResponse Studio::post_png(const std::string& body, bool mask) {
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()), body.size());
  const int res = generator_->output_resolution();
  const auto decode = [&](auto fn) {
    try {
      return fn(bytes);
    } catch (const IoError& e) {
      throw DomainError(std::string("upload is not a valid PNG: ") + e.what());
    }
  };
  if (mask) {
    const Plane p = decode([](auto b) { return decode_png_gray(b); });
    if (p.height != res || p.width != res) throw DomainError("mask must be " + std::to_string(res) + "x" + std::to_string(res));
    return json_response(200, json{{"mask_uri", project_.put_asset("masks", "png", encode_png_gray(p))}});
  }
  const Image img = decode([](auto b) { return decode_png_rgb(b); });
  return json_response(200, json{{"image_uri", project_.put_asset("images", "png", encode_png_rgb(img))}});
}

StudioResponse Studio::post_blend(const std::string& body) {
  const auto j = parse_body(body);
  const int layers = generator_->num_layers();
  const auto style_a = load_style(field<std::string>(j, "style_a"));
  const std::string mode_name = field_or<std::string>(j, "mode", j.contains("constant_alpha") ? "constant" : "two_image");
  const BlendMode mode = blend_mode_from_string(mode_name);
  const bool cross = mode == BlendMode::cross_generator || j.contains("checkpoint_b");

  BlendSpec spec;
  if (j.contains("layer_set")) {
    for (int l : field<std::vector<int>>(j, "layer_set")) spec.layer_set.insert(l);
  } else {
    spec.layer_set = all_layers(layers);
  }
  if (j.contains("constant_alpha")) {
    spec.mode = BlendMode::constant;
    spec.constant_alpha = field<double>(j, "constant_alpha");
  } else {
    if (mode == BlendMode::constant) throw DomainError("constant mode requires constant_alpha");
    const auto bytes = project_.get_asset(field<std::string>(j, "mask_uri"));
    const Plane p = decode_png_gray(bytes);
    spec.mode = mode;
    spec.mask = AlphaMask(p);
  }
  spec.validate(layers);

  std::shared_ptr<const Generator> gen_b = generator_;
  StyleStack style_b = style_a;
  if (cross) {
    gen_b = generator_for(field<std::string>(j, "checkpoint_b"));
  } else {
    style_b = load_style(field<std::string>(j, "style_b"));
  }
  auto gen_a = generator_;
  return accepted(queue_->submit(JobKind::blend, persisted_request(j, project_.hash()),
                                 [this, gen_a, gen_b, style_a, style_b, spec, cross] {
                                   const auto t0 = Clock::now();
                                   const Image img = cross
                                                         ? render_cross_generator_blend(*gen_a, *gen_b, style_a, spec)
                                                         : render_two_image_blend(*gen_a, style_a, style_b, spec);
                                   JobOutput out;
                                   out.phase_ms["render"] = ms_since(t0);
                                   out.result_uri = store_image(img);
                                   return out;
                                 }));
}

StudioResponse Studio::post_invert(const std::string& body) {
  const auto j = parse_body(body);
  const auto target_bytes = project_.get_asset(field<std::string>(j, "image_uri"));
  const Image target = decode_png_rgb(target_bytes);
  const int res = generator_->output_resolution();
  if (target.height() != res || target.width() != res) throw DomainError("target must match the output resolution");
  InversionConfig cfg;
  const json c = field_or<json>(j, "config", json::object());
  cfg.steps = field_or<int>(c, "steps", cfg.steps);
  cfg.step_size = field_or<double>(c, "step_size", cfg.step_size);
  cfg.prior_weight = field_or<double>(c, "prior_weight", cfg.prior_weight);
  cfg.perceptual_weight = field_or<double>(c, "perceptual_weight", cfg.perceptual_weight);
  cfg.mse_weight = field_or<double>(c, "mse_weight", cfg.mse_weight);
  cfg.seed = field_or<std::uint64_t>(c, "seed", cfg.seed);
  cfg.validate();
  auto perceptual = std::shared_ptr<PerceptualLoss>(make_perceptual_loss(field_or<std::string>(c, "perceptual", "")));
  return accepted(queue_->submit(JobKind::invert, persisted_request(j, project_.hash()), [this, target, cfg, perceptual] {
    const auto t0 = Clock::now();
    const auto& g = sigma_gaussian();
    JobOutput out;
    out.phase_ms["prior"] = ms_since(t0);
    const auto t1 = Clock::now();
    const auto res = invert(*generator_, target, g, cfg, *perceptual);
    out.phase_ms["optimize"] = ms_since(t1);
    out.result_uri = store_image(res.final_image);
    out.artifacts["trace_uri"] = project_.put_text_asset("jobs", "csv", loss_trace_csv(res.loss_trace));
    json sigma = res.sigma.per_layer;
    out.artifacts["sigma_uri"] = project_.put_text_asset("plans", "json", json{{"sigma", sigma}}.dump());
    out.artifacts["best_step"] = std::to_string(res.best_step);
    out.artifacts["final_mse"] = std::to_string(res.loss_trace.at(res.best_step).mse);
    return out;
  }));
}

StudioResponse Studio::post_panorama(const std::string& body) {
  const auto j = parse_body(body);
  const double sigma = field_or<double>(j, "smoothing_sigma", 0.0);
  if (sigma < 0.0) throw RangeError("smoothing_sigma must be non-negative");
  const auto axis = panorama_axis_from_string(field_or<std::string>(j, "axis", "horizontal"));
  const double overlap = field_or<double>(j, "overlap_frac", 0.5);
  std::vector<StyleVector> latents;
  if (j.contains("style_ids")) {
    for (const auto& id : field<std::vector<std::string>>(j, "style_ids")) latents.push_back(load_style(id).row(0));
  } else {
    const int n = field<int>(j, "n");
    if (n < 2 || n > 256) throw RangeError("n must lie in [2, 256]");
    latents = sample_panorama_latents(*generator_, n, field_or<std::uint64_t>(j, "seed", 0));
  }
  if (latents.size() < 2) throw DomainError("a panorama needs at least two latents");
  if (sigma > 0.0) latents = smooth_latents(latents, sigma);
  auto plan = make_panorama_plan(*generator_, latents, sigma, overlap, axis);
  plan.validate(*generator_);
  return accepted(queue_->submit(JobKind::panorama, persisted_request(j, project_.hash()), [this, plan] {
    const auto t0 = Clock::now();
    const auto spans = build_spans(*generator_, plan);
    JobOutput out;
    out.phase_ms["spans"] = ms_since(t0);
    const auto t1 = Clock::now();
    const Image img = knit_spans(*generator_, plan, spans);
    out.phase_ms["knit"] = ms_since(t1);
    out.result_uri = store_image(img);
    out.artifacts["plan_uri"] = project_.put_text_asset("plans", "json", panorama_plan_to_json(plan));
    return out;
  }));
}

StudioResponse Studio::post_transfer(const std::string& body) {
  const auto j = parse_body(body);
  TransferRequest req;
  req.src_styles = load_style(field<std::string>(j, "src"));
  req.ref_styles = load_style(field<std::string>(j, "ref"));
  const auto box = field<std::vector<int>>(j, "box");
  if (box.size() != 4) throw DomainError("box must be [x0, y0, x1, y1]");
  req.box = Box{box[0], box[1], box[2], box[3]};
  req.feather = field_or<int>(j, "feather", 0);
  if (j.contains("layer_cut")) req.layer_cut = field<int>(j, "layer_cut");
  req.alpha_exponent = field_or<double>(j, "alpha_exponent", 1.0);
  if (j.contains("pose_k_dims")) req.pose_k_dims = field<int>(j, "pose_k_dims");
  req.validate(*generator_);
  return accepted(queue_->submit(JobKind::transfer, persisted_request(j, project_.hash()), [this, req] {
    const auto t0 = Clock::now();
    const Image img = transfer_attributes(*generator_, req);
    JobOutput out;
    out.phase_ms["render"] = ms_since(t0);
    out.result_uri = store_image(img);
    out.artifacts["mask_uri"] = project_.put_asset("masks", "png", encode_png_gray(transfer_mask(*generator_, req).plane()));
    return out;
  }));
}

StudioResponse Studio::post_finetune(const std::string& body) {
  const auto j = parse_body(body);
  FinetuneConfig cfg;
  cfg.steps = field_or<int>(j, "steps", cfg.steps);
  cfg.seed = field_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.batch_size = field_or<int>(j, "batch_size", cfg.batch_size);
  cfg.learning_rate = field_or<double>(j, "learning_rate", cfg.learning_rate);
  cfg.validate();
  FreezeSpec spec;
  const json f = field_or<json>(j, "freeze", json::object());
  spec.freeze_mapping = field_or<bool>(f, "mapping", true);
  spec.freeze_affine = field_or<bool>(f, "affine", true);
  if (f.contains("trainable_layers")) {
    const auto v = field<std::vector<int>>(f, "trainable_layers");
    spec.trainable_layer_set = std::set<int>(v.begin(), v.end());
  }
  spec.validate(*generator_);
  const int res = generator_->output_resolution();
  std::vector<Image> images;
  if (j.contains("image_uris")) {
    for (const auto& uri : field<std::vector<std::string>>(j, "image_uris")) {
      Image img = decode_png_rgb(project_.get_asset(uri));
      if (img.height() != res || img.width() != res) throw DomainError("dataset images must match the output resolution");
      images.push_back(std::move(img));
    }
  } else {
    const json toy = field_or<json>(j, "toy_dataset", json::object());
    images = toy_image_dataset(field_or<int>(toy, "count", 8), res, field_or<std::uint64_t>(toy, "seed", 0));
  }
  if (images.empty()) throw DomainError("finetune dataset is empty");
  return accepted(queue_->submit(JobKind::finetune, persisted_request(j, project_.hash()), [this, images, spec, cfg] {
    const auto t0 = Clock::now();
    // finetune_frozen trains its own clone; the shared generator is never written.
    auto res = finetune_frozen(*generator_, images, spec, cfg);
    JobOutput out;
    out.phase_ms["train"] = ms_since(t0);
    out.result_uri = project_.put_asset("checkpoints", "smck", encode_checkpoint(res.generator));
    out.artifacts["trace_uri"] = project_.put_text_asset("jobs", "csv", finetune_trace_csv(res.trace));
    {
      std::lock_guard lock(cache_mu_);
      generators_.emplace(out.result_uri, std::make_shared<const Generator>(std::move(res.generator)));
    }
    return out;
  }));
}

}  // namespace stylemix
