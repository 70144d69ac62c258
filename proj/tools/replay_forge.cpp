// replay_forge: continual-learning replay tooling for 3D lesion segmentation
// pipelines. Subcommands cover scoring, buffer management, modality handling,
// text-conditioned bottleneck refinement, metrics, and a synthetic corpus
// generator for self-contained runs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "replay_forge/buffer.hpp"
#include "replay_forge/dctg.hpp"
#include "replay_forge/dctg_io.hpp"
#include "replay_forge/documents.hpp"
#include "replay_forge/manifest.hpp"
#include "replay_forge/metrics.hpp"
#include "replay_forge/modality.hpp"
#include "replay_forge/scoring.hpp"
#include "replay_forge/stream.hpp"
#include "replay_forge/synth.hpp"
#include "replay_forge/vol1.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInvariant = 3;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) rforge::raise(rforge::Errc::IoFailure, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    rforge::raise(rforge::Errc::CorruptState, path.string() + ": " + e.what());
  }
  return doc;
}

void write_json_file(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) rforge::raise(rforge::Errc::IoFailure, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("REPLAY_FORGE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// ---- score -----------------------------------------------------------------

int cmd_score(const fs::path& manifest_path, const std::optional<fs::path>& config_path,
              const fs::path& out_path, int threads) {
  rforge::ScoringConfig config;
  if (config_path) config = rforge::scoring_config_from_json(read_json_file(*config_path));

  auto manifest = rforge::load_manifest(manifest_path);
  const auto violations = rforge::validate_manifest(manifest);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "manifest violation: " << v << '\n';
    return kExitValidation;
  }

  std::vector<rforge::ProbabilityVolume> probs;
  std::vector<rforge::LabelMask> gts;
  std::vector<rforge::DatasetSample> samples;
  probs.reserve(manifest.samples.size());
  gts.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    probs.push_back(rforge::read_probability_volume(manifest.resolve(s.prob_path)));
    gts.push_back(rforge::read_label_mask(manifest.resolve(s.gt_path)));
  }
  for (std::size_t i = 0; i < manifest.samples.size(); ++i)
    samples.push_back({manifest.samples[i].sample_id, &probs[i], &gts[i]});

  auto scores = rforge::score_dataset(samples, config, threads);
  std::vector<rforge::ScoredCandidate> candidates;
  std::int64_t excluded = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    rforge::ScoredCandidate c;
    c.scores = scores[i];
    c.prob_path = manifest.resolve(manifest.samples[i].prob_path).lexically_normal().generic_string();
    c.gt_path = manifest.resolve(manifest.samples[i].gt_path).lexically_normal().generic_string();
    c.modalities = manifest.modalities;
    if (c.scores.excluded) ++excluded;
    candidates.push_back(std::move(c));
  }

  auto doc = rforge::scores_doc(manifest.name, manifest.lesion_type, config, candidates);
  rforge::require_valid(rforge::schema::validate_scores_doc(doc), "scores document");
  write_json_file(out_path, doc);
  std::cout << "scored " << scores.size() << " samples (" << excluded << " excluded) -> "
            << out_path.string() << '\n';
  return 0;
}

// ---- buffer-update -----------------------------------------------------------

int cmd_buffer_update(const fs::path& scores_path, const std::optional<fs::path>& state_path,
                      std::int64_t beta, std::optional<std::int64_t> n, const fs::path& out_path) {
  auto parsed = rforge::parse_scores_doc(read_json_file(scores_path));

  rforge::GlobalBuffer buffer;
  if (state_path) {
    buffer = rforge::load_state(read_json_file(*state_path));
    if (beta > 0 && beta != buffer.beta)
      rforge::raise(rforge::Errc::SchemaMismatch,
                    "beta " + std::to_string(beta) + " conflicts with state beta " +
                        std::to_string(buffer.beta));
  } else {
    if (beta < 1) rforge::raise(rforge::Errc::EmptyInput, "--beta must be >= 1");
    buffer.beta = beta;
  }

  const std::int64_t episode =
      buffer.partitions.empty() ? 0 : buffer.partitions.back().episode + 1;
  const std::int64_t take = n.value_or(buffer.beta);
  const auto before_total = buffer.total_entries();

  auto partition = rforge::select_partition(parsed.candidates, episode, take);
  const auto selected = partition.size();
  const auto rep = partition.count(rforge::Category::representative);
  const auto diff = partition.count(rforge::Category::difficult);
  buffer = rforge::update_global(std::move(buffer), std::move(partition));
  const auto evicted = before_total + selected - buffer.total_entries();

  auto state = rforge::save_state(buffer);
  rforge::require_valid(rforge::schema::validate_buffer_state_doc(state), "buffer state");
  write_json_file(out_path, state);

  std::cout << "episode " << episode << " (" << parsed.episode << "): selected " << rep << "+"
            << diff << " (rep+diff), evicted " << evicted << ", buffer "
            << buffer.total_entries() << "/" << buffer.beta << " sizes [";
  for (std::size_t i = 0; i < buffer.partitions.size(); ++i)
    std::cout << (i ? " " : "") << buffer.partitions[i].size();
  std::cout << "] -> " << out_path.string() << '\n';
  return 0;
}

// ---- metrics / eval ----------------------------------------------------------

int cmd_metrics(const fs::path& results_path, const fs::path& out_path) {
  auto results = rforge::results_from_json(read_json_file(results_path));
  auto doc = rforge::metrics_report(results);
  rforge::require_valid(rforge::schema::validate_metrics_doc(doc), "metrics document");
  write_json_file(out_path, doc);
  std::cout << "avg=" << doc["avg"].get<double>() << " ilm=" << doc["ilm"].get<double>()
            << " bwt=";
  if (doc["bwt"].is_null())
    std::cout << "n/a";
  else
    std::cout << doc["bwt"].get<double>();
  std::cout << " -> " << out_path.string() << '\n';
  return 0;
}

rforge::LabelMask load_prediction(const fs::path& path, double threshold) {
  auto any = rforge::read_vol1_file(path);
  if (auto* f = std::get_if<rforge::TensorF>(&any)) {
    if (f->shape.size() != 3)
      rforge::raise(rforge::Errc::ShapeMismatch, path.string() + ": expected 3-D");
    rforge::LabelMask mask({static_cast<int>(f->shape[0]), static_cast<int>(f->shape[1]),
                            static_cast<int>(f->shape[2])},
                           (f->data > static_cast<float>(threshold)).cast<std::uint8_t>());
    return mask;
  }
  auto& u = std::get<rforge::TensorU8>(any);
  if (u.shape.size() != 3)
    rforge::raise(rforge::Errc::ShapeMismatch, path.string() + ": expected 3-D");
  rforge::LabelMask mask({static_cast<int>(u.shape[0]), static_cast<int>(u.shape[1]),
                          static_cast<int>(u.shape[2])},
                         (u.data != 0).cast<std::uint8_t>());
  return mask;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, const fs::path& out_path,
             double threshold) {
  auto list_vol1 = [](const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir))
      rforge::raise(rforge::Errc::IoFailure, dir.string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".vol1")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto preds = list_vol1(pred_dir);
  const auto gts = list_vol1(gt_dir);
  if (preds.size() != gts.size())
    rforge::raise(rforge::Errc::LengthMismatch, std::to_string(preds.size()) +
                                                    " predictions vs " +
                                                    std::to_string(gts.size()) + " labels");
  if (preds.empty()) rforge::raise(rforge::Errc::Empty, "no .vol1 files to evaluate");

  json per_sample = json::array();
  std::vector<rforge::LabelMask> pred_masks, gt_masks;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].filename() != gts[i].filename())
      rforge::raise(rforge::Errc::LengthMismatch,
                    "file sets differ: " + preds[i].filename().string() + " vs " +
                        gts[i].filename().string());
    pred_masks.push_back(load_prediction(preds[i], threshold));
    gt_masks.push_back(rforge::read_label_mask(gts[i]));
  }
  for (std::size_t i = 0; i < preds.size(); ++i)
    per_sample.push_back({{"id", preds[i].stem().string()},
                          {"dsc", rforge::dice(pred_masks[i], gt_masks[i])}});
  const double mean = rforge::episode_dsc(pred_masks, gt_masks);

  json doc{{"version", 1},
           {"mean_dsc", mean},
           {"n_samples", preds.size()},
           {"per_sample", per_sample}};
  write_json_file(out_path, doc);
  std::cout << "mean DSC " << mean << " over " << preds.size() << " samples -> "
            << out_path.string() << '\n';
  return 0;
}

// ---- modality commands ---------------------------------------------------------

int cmd_inflate(const fs::path& weights_path, int k_max, const fs::path& out_path) {
  auto any = rforge::read_vol1_file(weights_path);
  auto* w = std::get_if<rforge::TensorF>(&any);
  if (!w) rforge::raise(rforge::Errc::BadDtype, "weights must be an f32 tensor");
  const auto old_k = w->shape.size() == 5 ? w->shape[1] : 0;
  auto grown = rforge::inflate_weights(*w, k_max);
  rforge::write_vol1_file(out_path, grown);
  std::cout << "inflated input channels " << old_k << " -> " << k_max << " -> "
            << out_path.string() << '\n';
  return 0;
}

int cmd_assemble(const fs::path& manifest_path, const std::string& sample_id,
                 const fs::path& layout_path, const fs::path& out_path) {
  auto manifest = rforge::load_manifest(manifest_path);
  auto layout = rforge::layout_from_json(read_json_file(layout_path));
  const rforge::ManifestSample* sample = nullptr;
  for (const auto& s : manifest.samples)
    if (s.sample_id == sample_id) sample = &s;
  if (!sample)
    rforge::raise(rforge::Errc::MissingField,
                  "sample " + sample_id + " not present in " + manifest_path.string());

  std::vector<rforge::ProbabilityVolume> storage;
  storage.reserve(sample->volumes.size());
  std::map<std::string, const rforge::Volume<float>*> channels;
  for (const auto& [modality, rel] : sample->volumes) {
    storage.push_back(rforge::read_probability_volume(manifest.resolve(rel)));
    channels[modality] = &storage.back();
  }
  auto tensor = rforge::assemble_input(channels, layout);
  rforge::write_vol1_file(out_path, tensor);
  std::cout << "assembled [" << tensor.shape[0] << ", " << tensor.shape[1] << ", "
            << tensor.shape[2] << ", " << tensor.shape[3] << "] -> " << out_path.string() << '\n';
  return 0;
}

int cmd_rmd(const std::string& modalities_csv, std::uint64_t seed, const std::string& sample_id,
            std::uint64_t epoch) {
  const auto names = split_csv(modalities_csv);
  auto kept = rforge::rmd_mask(names, seed, sample_id, epoch);
  for (std::size_t i = 0; i < kept.size(); ++i) std::cout << (i ? "," : "") << kept[i];
  std::cout << '\n';
  return 0;
}

int cmd_dctg(const fs::path& features_path, const fs::path& text_path, const fs::path& params_dir,
             const fs::path& out_path) {
  auto any = rforge::read_vol1_file(features_path);
  auto* f = std::get_if<rforge::TensorF>(&any);
  if (!f) rforge::raise(rforge::Errc::BadDtype, "features must be an f32 tensor");
  auto features = rforge::tokens_from_tensor<double>(*f);
  auto text = rforge::load_text_embedding<double>(text_path);
  auto params = rforge::load_dctg_params<double>(params_dir);
  auto refined = rforge::dctg_forward<double>(features, text, params);
  rforge::write_vol1_file(out_path, rforge::tensor_from_tokens(refined));
  std::cout << "refined bottleneck [" << f->shape[0] << ", " << f->shape[1] << ", " << f->shape[2]
            << ", " << f->shape[3] << "] -> " << out_path.string() << '\n';
  return 0;
}

// ---- synth / run-stream / dump ----------------------------------------------

int cmd_synth(int episodes, int samples, int dims, std::uint64_t seed, const fs::path& out_dir) {
  rforge::SynthConfig cfg;
  cfg.episodes = episodes;
  cfg.samples_per_episode = samples;
  cfg.dims = dims;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  auto manifests = rforge::generate_corpus(cfg);
  for (const auto& m : manifests) std::cout << m.string() << '\n';
  return 0;
}

int cmd_run_stream(const fs::path& config_path, int threads_flag) {
  auto cfg = rforge::load_stream_config(config_path);
  if (threads_flag > 0)
    cfg.threads = threads_flag;
  else if (cfg.threads <= 1)
    cfg.threads = resolve_threads(0);
  auto result = rforge::run_stream(cfg);
  std::cout << result.summary;
  std::cout << "outputs: " << cfg.out_dir.string() << '\n';
  return 0;
}

int cmd_dump(const fs::path& path) {
  const auto bytes = rforge::read_file_bytes(path);
  const auto header = rforge::read_vol1_header(bytes);
  auto any = rforge::read_vol1(bytes);
  std::cout << "dtype: " << (header.dtype == rforge::Vol1Dtype::f32 ? "f32" : "u8") << '\n';
  std::cout << "shape: [";
  for (std::size_t i = 0; i < header.dims.size(); ++i)
    std::cout << (i ? ", " : "") << header.dims[i];
  std::cout << "]\n";
  if (auto* f = std::get_if<rforge::TensorF>(&any)) {
    std::cout << "elements: " << f->size() << ", nonzero: " << (f->data != 0.0f).count()
              << ", min: " << f->data.minCoeff() << ", max: " << f->data.maxCoeff()
              << ", mean: " << f->data.cast<double>().mean() << '\n';
    if (f->shape.size() == 5) {
      // weight layout: report zero/nonzero per input channel
      const std::size_t kernel =
          static_cast<std::size_t>(f->shape[2]) * f->shape[3] * f->shape[4];
      for (std::uint32_t c = 0; c < f->shape[1]; ++c) {
        std::int64_t nonzero = 0;
        for (std::uint32_t o = 0; o < f->shape[0]; ++o) {
          const auto base = (static_cast<std::size_t>(o) * f->shape[1] + c) * kernel;
          for (std::size_t k = 0; k < kernel; ++k)
            if (f->data[static_cast<Eigen::Index>(base + k)] != 0.0f) ++nonzero;
        }
        std::cout << "input channel " << c << ": nonzero " << nonzero << '\n';
      }
    }
  } else {
    auto& u = std::get<rforge::TensorU8>(any);
    std::cout << "elements: " << u.size() << ", nonzero: " << (u.data != 0).count() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-learning replay tooling for 3D lesion segmentation"};
  app.require_subcommand(1);

  // score
  auto* score = app.add_subcommand("score", "score an episode manifest");
  fs::path score_manifest, score_out;
  std::string score_config;
  int score_threads = 0;
  score->add_option("--manifest", score_manifest, "episode manifest JSON")->required();
  score->add_option("--config", score_config, "scoring config JSON");
  score->add_option("--out", score_out, "output scores JSON")->required();
  score->add_option("--threads", score_threads, "worker threads (env REPLAY_FORGE_THREADS)");

  // buffer-update
  auto* update = app.add_subcommand("buffer-update", "insert an episode partition into the buffer");
  fs::path update_scores, update_out;
  std::string update_state;
  std::int64_t update_beta = 0;
  std::int64_t update_n = 0;
  update->add_option("--scores", update_scores, "scores JSON from `score`")->required();
  update->add_option("--state", update_state, "existing buffer state JSON");
  update->add_option("--beta", update_beta, "buffer capacity (new buffers)");
  update->add_option("--n", update_n, "partition candidate count (default beta)");
  update->add_option("--out", update_out, "output buffer state JSON")->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics", "AVG/ILM/BWT from a result matrix");
  fs::path metrics_results, metrics_out;
  metrics->add_option("--results", metrics_results, "results JSON")->required();
  metrics->add_option("--out", metrics_out, "output metrics JSON")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "mean DSC of predictions against labels");
  fs::path eval_pred, eval_gt, eval_out;
  double eval_threshold = 0.5;
  eval->add_option("--pred-dir", eval_pred, "directory of prediction volumes")->required();
  eval->add_option("--gt-dir", eval_gt, "directory of label masks")->required();
  eval->add_option("--out", eval_out, "output JSON")->required();
  eval->add_option("--threshold", eval_threshold, "binarization threshold for f32 predictions");

  // inflate
  auto* inflate = app.add_subcommand("inflate", "grow input-convolution channels");
  fs::path inflate_weights, inflate_out;
  int inflate_kmax = 0;
  inflate->add_option("--weights", inflate_weights, "5-D f32 weight tensor")->required();
  inflate->add_option("--k-max", inflate_kmax, "target input channel count")->required();
  inflate->add_option("--out", inflate_out, "output weight tensor")->required();

  // assemble
  auto* assemble = app.add_subcommand("assemble", "build the multi-channel input for a sample");
  fs::path assemble_manifest, assemble_layout, assemble_out;
  std::string assemble_sample;
  assemble->add_option("--manifest", assemble_manifest, "episode manifest JSON")->required();
  assemble->add_option("--sample", assemble_sample, "sample id")->required();
  assemble->add_option("--layout", assemble_layout, "channel layout JSON")->required();
  assemble->add_option("--out", assemble_out, "output 4-D tensor")->required();

  // rmd
  auto* rmd = app.add_subcommand("rmd", "random modality drop for one sample/epoch");
  std::string rmd_modalities, rmd_sample;
  std::uint64_t rmd_seed = 0, rmd_epoch = 0;
  rmd->add_option("--modalities", rmd_modalities, "comma-separated available modalities")
      ->required();
  rmd->add_option("--seed", rmd_seed, "stream seed")->required();
  rmd->add_option("--sample-id", rmd_sample, "sample id")->required();
  rmd->add_option("--epoch", rmd_epoch, "epoch");

  // dctg
  auto* dctg = app.add_subcommand("dctg", "text-conditioned bottleneck refinement");
  fs::path dctg_features, dctg_text, dctg_params, dctg_out;
  dctg->add_option("--features", dctg_features, "4-D f32 bottleneck tensor")->required();
  dctg->add_option("--text", dctg_text, "2-D f32 text embedding tensor")->required();
  dctg->add_option("--params", dctg_params, "parameter directory")->required();
  dctg->add_option("--out", dctg_out, "output 4-D tensor")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic lesion corpus");
  int synth_episodes = 3, synth_samples = 20, synth_dims = 32;
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  synth->add_option("--episodes", synth_episodes, "episode count");
  synth->add_option("--samples", synth_samples, "samples per episode");
  synth->add_option("--dims", synth_dims, "cubic volume edge (>= 8)");
  synth->add_option("--seed", synth_seed, "corpus seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // run-stream
  auto* stream = app.add_subcommand("run-stream", "run the full episode stream");
  fs::path stream_config;
  int stream_threads = 0;
  stream->add_option("--config", stream_config, "stream config JSON")->required();
  stream->add_option("--threads", stream_threads, "worker threads (env REPLAY_FORGE_THREADS)");

  // dump
  auto* dump = app.add_subcommand("dump", "inspect a VOL1 tensor");
  fs::path dump_file;
  dump->add_option("--file", dump_file, "VOL1 file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (score->parsed())
      return cmd_score(score_manifest,
                       score_config.empty() ? std::nullopt
                                            : std::optional<fs::path>(score_config),
                       score_out, resolve_threads(score_threads));
    if (update->parsed())
      return cmd_buffer_update(update_scores,
                               update_state.empty() ? std::nullopt
                                                    : std::optional<fs::path>(update_state),
                               update_beta,
                               update_n > 0 ? std::optional<std::int64_t>(update_n)
                                            : std::nullopt,
                               update_out);
    if (metrics->parsed()) return cmd_metrics(metrics_results, metrics_out);
    if (eval->parsed()) return cmd_eval(eval_pred, eval_gt, eval_out, eval_threshold);
    if (inflate->parsed()) return cmd_inflate(inflate_weights, inflate_kmax, inflate_out);
    if (assemble->parsed())
      return cmd_assemble(assemble_manifest, assemble_sample, assemble_layout, assemble_out);
    if (rmd->parsed()) return cmd_rmd(rmd_modalities, rmd_seed, rmd_sample, rmd_epoch);
    if (dctg->parsed()) return cmd_dctg(dctg_features, dctg_text, dctg_params, dctg_out);
    if (synth->parsed())
      return cmd_synth(synth_episodes, synth_samples, synth_dims, synth_seed, synth_out);
    if (stream->parsed()) return cmd_run_stream(stream_config, stream_threads);
    if (dump->parsed()) return cmd_dump(dump_file);
  } catch (const rforge::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == rforge::Errc::InvariantViolation ? kExitInvariant : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
