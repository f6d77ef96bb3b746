#include "stml/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "stml/checkpoint.hpp"
#include "stml/config.hpp"
#include "stml/csv.hpp"
#include "stml/data.hpp"
#include "stml/error.hpp"
#include "stml/eval.hpp"
#include "stml/trainer.hpp"

namespace fs = std::filesystem;

namespace stml {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string metrics_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + format_double(m.loss.rc_f) + "," + format_double(m.loss.rc_g) + "," +
         format_double(m.loss.kl) + "," + format_double(m.loss.total) + "," + format_double(m.recall1_test) + "," +
         format_double(m.aurocs.w) + "," + format_double(m.aurocs.wp) + "," + format_double(m.aurocs.wc) + "," +
         format_double(m.lr) + "\n";
}

std::string roc_csv(const RocReport& report) {
  std::string out = "fpr,tpr\n";
  for (const auto& [fpr, tpr] : report.curve) out += format_double(fpr) + "," + format_double(tpr) + "\n";
  return out;
}

std::string epoch_dir_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
  return buf;
}

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablate;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::vector<std::size_t> ks{1, 2, 4, 8};
  std::size_t top_n = 3;
};

struct RocArgs {
  std::string checkpoint;
  std::string teacher;
  std::string data;
  std::string config;
  std::string out;
  std::string split = "train";
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& args) {
  const KeyValueConfig cfg = KeyValueConfig::load(args.config);
  cfg.reject_unknown(all_config_keys());
  GeneratorSpec spec = generator_spec_from(cfg);
  if (args.seed) spec.seed = *args.seed;
  const LabeledDataset data = generate(spec);
  save_dataset(data, args.out);

  std::map<int, std::size_t> counts;
  for (int label : data.labels) ++counts[label];
  std::cout << "N=" << data.size() << " classes=" << counts.size() << " train=" << data.indices(Split::train).size()
            << " test=" << data.indices(Split::test).size() << "\n";
  for (const auto& [label, count] : counts) std::cout << "class " << label << ": " << count << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& args) {
  const std::string started = utc_now();
  KeyValueConfig cfg = KeyValueConfig::load(args.config);
  cfg.reject_unknown(all_config_keys());
  RunConfig config = run_config_from(cfg);
  if (args.seed) config.seed = *args.seed;
  for (const std::string& flag : args.ablate) config.ablate.enable(flag);
  config.validate();
  const std::size_t checkpoint_every = static_cast<std::size_t>(parse_integer(cfg.get("output.checkpoint_every"), 0));

  const LabeledDataset data = load_dataset(args.data);
  const fs::path out(args.out);
  fs::create_directories(out / "checkpoints");

  const std::string hash = config_hash(config);
  std::vector<std::string> outputs;
  auto save_pair = [&](const ModelParams& teacher, const ModelParams& student, std::size_t epoch, const fs::path& dir) {
    fs::create_directories(dir);
    const CheckpointInfo info{hash, config.seed, epoch};
    outputs.push_back(fs::relative(save_checkpoint(student, info, dir / "student"), out).string());
    outputs.push_back(fs::relative(save_checkpoint(teacher, info, dir / "teacher"), out).string());
  };

  {
    const auto [teacher0, student0] = initial_models(config);
    save_pair(teacher0, student0, 0, out / "checkpoints" / epoch_dir_name(0));
  }

  std::string metrics = std::string(metrics_header()) + "\n";
  auto on_epoch = [&](const EpochMetrics& m, const ModelParams& teacher, const ModelParams& student) {
    metrics += metrics_row(m);
    std::cout << "epoch " << m.epoch << " loss=" << format_double(m.loss.total)
              << " recall@1=" << format_double(m.recall1_test) << "\n";
    if (checkpoint_every > 0 && m.epoch % checkpoint_every == 0 && m.epoch != config.epochs)
      save_pair(teacher, student, m.epoch, out / "checkpoints" / epoch_dir_name(m.epoch));
  };

  TrainResult result;
  try {
    result = train(data, config, on_epoch);
  } catch (const NumericalError& e) {
    write_file_atomic(out / "metrics.csv", metrics);
    write_file_atomic(out / "diagnostic.txt", std::string("numerical failure: ") + e.what() + "\n" +
                                                  format_run_config(config));
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  if (config.epochs > 0) save_pair(result.teacher, result.student, config.epochs, out / "checkpoints" / epoch_dir_name(config.epochs));
  {
    const CheckpointInfo info{hash, config.seed, config.epochs};
    outputs.push_back(fs::relative(save_checkpoint(result.student, info, out / "student"), out).string());
    outputs.push_back(fs::relative(save_checkpoint(result.teacher, info, out / "teacher"), out).string());
  }
  write_file_atomic(out / "metrics.csv", metrics);
  outputs.push_back("metrics.csv");

  std::string manifest = format_run_config(config);
  manifest += "output.checkpoint_every=" + std::to_string(checkpoint_every) + "\n";
  manifest += "run.seed=" + std::to_string(config.seed) + "\n";
  manifest += std::string("run.prng=") + Rng::kAlgorithm + "\n";
  manifest += std::string("run.version=") + kVersion + "\n";
  manifest += "run.config_hash=" + hash + "\n";
  manifest += "run.initial_recall1=" + format_double(result.initial_recall1) + "\n";
  manifest += "run.start=" + started + "\n";
  manifest += "run.end=" + utc_now() + "\n";
  std::string listing;
  for (const std::string& o : outputs) listing += (listing.empty() ? "" : ",") + o;
  manifest += "run.outputs=" + listing + "\n";
  write_file_atomic(out / "manifest.txt", manifest);
  return kExitOk;
}

ModelParams load_student(const std::string& path, const LabeledDataset& data) {
  const LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.params.role != ModelRole::student) throw ConfigError(path + ": checkpoint role is not student");
  if (ckpt.params.dims.d_in != data.dim())
    throw ConfigError(path + ": checkpoint d_in " + std::to_string(ckpt.params.dims.d_in) + " does not match data width " +
                      std::to_string(data.dim()));
  return ckpt.params;
}

int cmd_eval(const EvalArgs& args) {
  const LabeledDataset data = load_dataset(args.data);
  const ModelParams student = load_student(args.checkpoint, data);
  const LabeledDataset test = data.subset(Split::test);
  const Matrix f = embed_f(student, test.inputs).data;
  const RetrievalReport report = recall_at_k(f, test.labels, args.ks);
  const NeighborDump dump = neighbor_dump(f, test.labels, args.top_n);

  std::string recall_csv = "k,recall\n";
  for (const auto& [k, r] : report.recall_at) recall_csv += std::to_string(k) + "," + format_double(r) + "\n";
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_file_atomic(fs::path(args.out) / "recall.csv", recall_csv);
    write_file_atomic(fs::path(args.out) / "neighbors.csv", format_neighbor_dump(dump));
  }
  std::cout << recall_csv;
  if (!dump.note.empty()) std::cout << "note: " << dump.note << "\n";
  return kExitOk;
}

int cmd_roc(const RocArgs& args) {
  const KeyValueConfig cfg = KeyValueConfig::load(args.config);
  cfg.reject_unknown(all_config_keys());
  RunConfig config = run_config_from(cfg);
  if (args.seed) config.seed = *args.seed;
  const LabeledDataset data = load_dataset(args.data);
  const ModelParams student = load_student(args.checkpoint, data);
  ModelParams teacher = teacher_view(student);
  if (!args.teacher.empty()) {
    teacher = load_checkpoint(args.teacher).params;
    if (teacher.dims != student.dims) throw ConfigError("teacher and student checkpoints have different shapes");
  }
  if (args.split != "train" && args.split != "test") throw ConfigError("--split must be train or test");
  const LabeledDataset pool = data.subset(args.split == "train" ? Split::train : Split::test);

  Rng rng(config.seed);
  const Matrix space = embed_f(student, pool.inputs).data;
  const EpochPlan plan = build_epoch_plan(space, config, 1, rng);
  const LabeledDataset probe = pool.subset(plan.batches.front());
  const SimilarityResult sims = similarity_pipeline(forward_teacher(teacher, probe.inputs), config.context_k, config.sigma);

  const RocReport w = matrix_auroc(sims.w.values, probe.labels);
  const RocReport wp = matrix_auroc(sims.wp.values, probe.labels);
  const RocReport wc = matrix_auroc(sims.wc.values, probe.labels);
  std::string summary = "matrix,auroc\nw," + format_double(w.auroc) + "\nwp," + format_double(wp.auroc) + "\nwc," +
                        format_double(wc.auroc) + "\n";
  if (!args.out.empty()) {
    const fs::path out(args.out);
    fs::create_directories(out);
    write_file_atomic(out / "roc_w.csv", roc_csv(w));
    write_file_atomic(out / "roc_wp.csv", roc_csv(wp));
    write_file_atomic(out / "roc_wc.csv", roc_csv(wc));
    write_file_atomic(out / "auroc.csv", summary);
  }
  std::cout << summary;
  return kExitOk;
}

}  // namespace

const char* metrics_header() {
  return "epoch,loss_rc_f,loss_rc_g,loss_kl,loss_total,recall1_test,auroc_w,auroc_wp,auroc_wc,lr";
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Self-taught metric learning on vector data"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Generate the synthetic benchmark dataset");
  generate_cmd->add_option("--config", gen.config, "Config file (data.* keys)")->required();
  generate_cmd->add_option("--out", gen.out, "Output dataset CSV")->required();
  generate_cmd->add_option("--seed", gen.seed, "Override data.seed");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train teacher/student models");
  train_cmd->add_option("--config", tr.config, "Config file (model.*, train.*, output.* keys)")->required();
  train_cmd->add_option("--data", tr.data, "Dataset CSV")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--seed", tr.seed, "Override train.seed");
  train_cmd->add_option("--ablate", tr.ablate, "Enable an ablation flag (repeatable)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@k and neighbor dump on the test split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Student checkpoint manifest")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset CSV")->required();
  eval_cmd->add_option("--out", ev.out, "Directory for recall.csv and neighbors.csv");
  eval_cmd->add_option("--ks", ev.ks, "Recall cutoffs")->delimiter(',');
  eval_cmd->add_option("--top-n", ev.top_n, "Neighbors per query in the dump");

  RocArgs roc;
  auto* roc_cmd = app.add_subcommand("roc", "ROC of w, w^P, w^C against class equivalence on one probe batch");
  roc_cmd->add_option("--checkpoint", roc.checkpoint, "Student checkpoint manifest")->required();
  roc_cmd->add_option("--teacher", roc.teacher, "Teacher checkpoint manifest (default: the student's g head)");
  roc_cmd->add_option("--data", roc.data, "Dataset CSV")->required();
  roc_cmd->add_option("--config", roc.config, "Config file for the batch and similarity settings")->required();
  roc_cmd->add_option("--out", roc.out, "Directory for ROC CSVs");
  roc_cmd->add_option("--split", roc.split, "Split to draw the probe batch from (train|test)");
  roc_cmd->add_option("--seed", roc.seed, "Override train.seed for probe sampling");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*generate_cmd) return cmd_generate(gen);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*roc_cmd) return cmd_roc(roc);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace stml
