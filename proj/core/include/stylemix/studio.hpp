#pragma once

// Project persistence, job queue and HTTP request handling for the studio
// service. The transport lives in http_server.hpp; everything here is
// callable in-process.
//
// Project layout:
//   manifest.json            {"format_version", "checkpoint", "checkpoint_sha256", "config"}
//   checkpoints/<sha>.smck   generator checkpoints (the project's own and finetuned ones)
//   images/<sha>.png         RGB renders and uploaded targets
//   masks/<sha>.png          8-bit grayscale alpha masks at output resolution
//   styles/<sha>.json        W+ style stacks {"rows": [[...], ...]}
//   plans/<sha>.json         panorama plans
//   jobs/<uuid>.json         job records; jobs/<sha>.csv loss traces
//
// Asset URIs are "<directory>/<sha256>.<ext>" relative to the project root.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stylemix/errors.hpp"
#include "stylemix/generator.hpp"
#include "stylemix/latent_tools.hpp"

namespace stylemix {

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what) : Error("not found: " + what) {}
};

/// The project's checkpoint no longer hashes to the manifest value, or a
/// request named a different project hash.
class HashMismatchError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);

struct ProjectManifest {
  int format_version = 1;
  std::string checkpoint;          // asset URI of the project checkpoint
  std::string checkpoint_sha256;
  std::string config_json;

  std::string to_json() const;
  static ProjectManifest from_json(const std::string& text);
};

class Project {
 public:
  /// Writes the layout, the checkpoint and the manifest. Throws IoError if a
  /// manifest already exists.
  static Project create(const std::filesystem::path& root, const Generator& gen, const ParameterSet& aux = {});
  /// Reads the manifest; throws IoError when missing and HashMismatchError
  /// when the checkpoint bytes do not match it.
  static Project open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const ProjectManifest& manifest() const { return manifest_; }
  const std::string& hash() const { return manifest_.checkpoint_sha256; }

  /// Re-hashes the checkpoint on disk and throws HashMismatchError on drift.
  void verify() const;

  /// Stores bytes under `directory` by content hash; returns the URI.
  std::string put_asset(const std::string& directory, const std::string& extension,
                        std::span<const std::uint8_t> bytes) const;
  std::string put_text_asset(const std::string& directory, const std::string& extension, const std::string& text) const;
  /// Throws NotFoundError for unknown or malformed URIs.
  std::vector<std::uint8_t> get_asset(const std::string& uri) const;
  std::filesystem::path asset_path(const std::string& uri) const;

  static const std::vector<std::string>& directories();

 private:
  Project(std::filesystem::path root, ProjectManifest manifest);
  std::filesystem::path root_;
  ProjectManifest manifest_;
};

enum class JobKind { render, blend, invert, panorama, transfer, finetune };
enum class JobState { queued, running, done, failed };

std::string to_string(JobKind k);
std::string to_string(JobState s);

struct Job {
  std::string id;
  JobKind kind = JobKind::render;
  JobState state = JobState::queued;
  std::string request_json;
  std::optional<std::string> result_uri;
  std::map<std::string, std::string> artifacts;
  std::optional<std::string> error;
  std::map<std::string, double> timings_ms;

  std::string to_json() const;
};

struct JobOutput {
  std::string result_uri;
  std::map<std::string, std::string> artifacts;
  std::map<std::string, double> phase_ms;
};

/// FIFO queue drained by a fixed pool of worker threads.
class JobQueue {
 public:
  using Work = std::function<JobOutput()>;
  using Observer = std::function<void(const Job&)>;

  explicit JobQueue(int workers, Observer on_change = {});
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  std::string submit(JobKind kind, std::string request_json, Work work);
  std::optional<Job> get(const std::string& id) const;
  std::vector<Job> list() const;
  /// Blocks until the job is done or failed, or the timeout passes.
  std::optional<Job> wait(const std::string& id, std::chrono::milliseconds timeout) const;

 private:
  struct Entry {
    Job job;
    Work work;
    std::chrono::steady_clock::time_point submitted;
  };
  void worker_loop();
  void notify(const Job& job);

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  mutable std::condition_variable done_cv_;
  std::deque<std::string> pending_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
  std::vector<std::thread> threads_;
  Observer observer_;
  bool stopping_ = false;
};

struct StudioOptions {
  std::filesystem::path project_dir;
  int workers = 2;
  /// Samples for the sigma Gaussian when the checkpoint carries none.
  int sigma_fit_samples = 256;
};

struct StudioResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Request router and pipeline runner over one project.
class Studio {
 public:
  explicit Studio(StudioOptions options);
  ~Studio();

  StudioResponse handle(const std::string& method, const std::string& path, const std::string& body);

  const Project& project() const { return project_; }
  const Generator& generator() const { return *generator_; }
  std::optional<Job> wait_for_job(const std::string& id, std::chrono::milliseconds timeout) const;

 private:
  StudioResponse dispatch(const std::string& method, const std::string& path, const std::string& body);
  std::shared_ptr<const Generator> generator_for(const std::string& checkpoint_uri);
  const SigmaGaussian& sigma_gaussian();
  void persist_job(const Job& job) const;

  StudioResponse post_sample(const std::string& body);
  StudioResponse post_render(const std::string& body);
  StudioResponse post_styles(const std::string& body);
  StudioResponse post_png(const std::string& body, bool mask);
  StudioResponse post_blend(const std::string& body);
  StudioResponse post_invert(const std::string& body);
  StudioResponse post_panorama(const std::string& body);
  StudioResponse post_transfer(const std::string& body);
  StudioResponse post_finetune(const std::string& body);
  StudioResponse job_response(const std::string& id) const;

  StyleStack load_style(const std::string& id) const;
  std::string store_style(const StyleStack& s) const;
  std::string store_image(const Image& img) const;

  StudioOptions options_;
  Project project_;
  std::shared_ptr<const Generator> generator_;
  std::optional<SigmaGaussian> checkpoint_sigma_;
  std::mutex cache_mu_;
  std::map<std::string, std::shared_ptr<const Generator>> generators_;
  std::optional<SigmaGaussian> fitted_sigma_;
  std::unique_ptr<JobQueue> queue_;
};

}  // namespace stylemix
