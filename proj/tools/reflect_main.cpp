// Subcommand front-end: generate, self-gen, eval, classify, metrics, analyze,
// validate-judge. Every stage dumps its effective config and a manifest next
// to its outputs, and stages re-running on identical inputs produce
// byte-identical artifacts.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "reflect/analytics.hpp"
#include "reflect/config.hpp"
#include "reflect/corpus.hpp"
#include "reflect/pipelines.hpp"
#include "reflect/scoring.hpp"
#include "reflect/textutil.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace reflect;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPipeline = 2;

struct StageIo {
  std::string stage;
  fs::path out_dir;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::int64_t> counts;
  std::string status = "ok";

  std::string path(const std::string& name) const {
    return (out_dir / name).string();
  }
  std::string emit(const std::string& name, const std::string& content) {
    std::string p = path(name);
    write_file(p, content);
    outputs.push_back(p);
    return p;
  }
};

void write_stage_manifest(StageIo& io, const RunConfig& config) {
  write_file(io.path(io.stage + "_config.json"), config.dump());
  json j;
  j["stage"] = io.stage;
  j["status"] = io.status;
  j["inputs"] = io.inputs;
  j["outputs"] = io.outputs;
  json counts;
  for (const auto& [key, value] : io.counts) counts[key] = value;
  j["counts"] = counts;
  j["config_digest"] = config.digest();
  write_file(io.path(io.stage + "_manifest.json"), j.dump(2) + "\n");
}

RunConfig load_config_or_defaults(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  return RunConfig::load(config_path);
}

void warn_on_digest_mismatch(const std::string& dataset_path, const RunConfig& config) {
  std::string manifest = manifest_path_for(dataset_path);
  if (!fs::exists(manifest)) return;
  try {
    auto m = load_manifest(manifest);
    if (m.config_digest != config.digest()) {
      std::cerr << "warning: config digest " << config.digest()
                << " differs from dataset manifest digest " << m.config_digest
                << " (" << manifest << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "warning: unreadable manifest " << manifest << ": " << e.what()
              << "\n";
  }
}

std::string combined_digest(const RunConfig& config, const std::string& extra) {
  return hex64(fnv1a64(config.dump() + extra));
}

// ---------------------------------------------------------------- generate

int run_generate(const std::string& task, const std::string& in_path,
                 const std::string& out_dir, RunConfig config,
                 const std::string& embeddings_path) {
  TaskKind kind = task_kind_from_string(task);
  StageIo io{"generate", out_dir};
  fs::create_directories(io.out_dir);
  io.inputs.push_back(in_path);

  std::vector<AdversarialInstance> instances;
  std::string digest = config.digest();

  if (is_gsm(kind)) {
    auto dataset = load_dataset(in_path, kind);
    auto result = build_situational_gsm(dataset, config.perturbation, config.trigger);
    instances = std::move(result.instances);
    io.counts["base_instances"] = static_cast<std::int64_t>(dataset.size());
    io.counts["candidates"] = static_cast<std::int64_t>(result.stats.candidates);
    io.counts["retained"] = static_cast<std::int64_t>(result.stats.retained);
    io.counts["filtered_unchanged"] =
        static_cast<std::int64_t>(result.stats.filtered_unchanged);
    io.counts["inapplicable"] = static_cast<std::int64_t>(result.stats.inapplicable);
    std::cout << "candidates=" << result.stats.candidates
              << " retained=" << result.stats.retained
              << " filtered_unchanged=" << result.stats.filtered_unchanged
              << " inapplicable=" << result.stats.inapplicable << "\n";
  } else if (kind == TaskKind::triviaqa) {
    if (embeddings_path.empty())
      throw PipelineError("triviaqa generation needs --embeddings");
    io.inputs.push_back(embeddings_path);
    auto dataset = load_dataset(in_path, kind);
    auto embeddings = load_embeddings(embeddings_path);
    auto result = build_situational_trivia(dataset, embeddings, config.trigger,
                                           config.word_cap);
    instances = std::move(result.instances);
    io.counts["base_instances"] = static_cast<std::int64_t>(dataset.size());
    io.counts["retained"] = static_cast<std::int64_t>(instances.size());
    io.counts["skipped"] = static_cast<std::int64_t>(result.skipped.size());
    for (const auto& s : result.skipped)
      std::cerr << "skipped " << s.id << ": " << s.reason << "\n";
  } else if (is_crux(kind)) {
    if (config.endpoint_url.empty())
      throw PipelineError("cruxeval generation needs an --endpoint");
    auto dataset = load_dataset(in_path, kind);
    auto templates =
        TemplateSet::load(config.templates_dir + "/cruxeval", kCruxTemplates);
    digest = combined_digest(config, templates.digest());
    ModelClient client(make_backend(config.endpoint_url, config.endpoint_path),
                       config.retry);
    CommandExecutor executor(config.executor_command, config.executor_timeout_ms);
    auto result =
        build_situational_crux(dataset, client, executor, templates, config.trigger);
    instances = std::move(result.instances);
    io.counts["base_instances"] = static_cast<std::int64_t>(dataset.size());
    io.counts["retained"] = static_cast<std::int64_t>(instances.size());
    io.counts["skipped"] = static_cast<std::int64_t>(result.skipped.size());
    for (const auto& s : result.skipped)
      std::cerr << "skipped " << s.id << ": " << s.reason << "\n";
  } else {  // bbh
    if (config.endpoint_url.empty())
      throw PipelineError("bbh generation needs an --endpoint");
    auto dataset = load_dataset(in_path, kind);
    auto templates = TemplateSet::load(config.templates_dir + "/bbh", kBbhTemplates);
    digest = combined_digest(config, templates.digest());
    ModelClient client(make_backend(config.endpoint_url, config.endpoint_path),
                       config.retry);
    auto result = build_situational_bbh(dataset, client, templates, config.trigger,
                                        config.include_fewshot);
    instances = std::move(result.instances);
    io.counts["base_instances"] = static_cast<std::int64_t>(dataset.size());
    io.counts["retained"] = static_cast<std::int64_t>(instances.size());
    io.counts["skipped"] = static_cast<std::int64_t>(result.skipped.size());
  }

  std::string data_path = io.path(task + "_adv.jsonl");
  write_dataset(instances, data_path, task + "_adv", config.seed, digest);
  io.outputs.push_back(data_path);
  io.outputs.push_back(manifest_path_for(data_path));
  write_stage_manifest(io, config);
  std::cout << "wrote " << instances.size() << " instances to " << data_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- self-gen

int run_self_gen(const std::string& task, const std::string& in_path,
                 const std::string& records_path, const std::string& family,
                 const std::string& out_dir, RunConfig config) {
  TaskKind kind = task_kind_from_string(task);
  StageIo io{"self_gen", out_dir};
  fs::create_directories(io.out_dir);
  io.inputs = {in_path, records_path};

  auto base = load_dataset(in_path, kind);
  auto records = load_records(records_path);

  // final round of each attempt decides wrongness; the wrong CoT is the
  // model's own response
  std::map<std::string, std::map<std::string, EvalRecord>> final_by_checkpoint;
  for (const auto& r : records) {
    auto& slot = final_by_checkpoint[r.checkpoint][r.base_id];
    if (slot.base_id.empty() || r.round >= slot.round) slot = r;
  }
  SelfReflectionSource source;
  source.checkpoint_family = family;
  for (const auto& [checkpoint, by_id] : final_by_checkpoint) {
    for (const auto& [id, record] : by_id) {
      if (record.correct) continue;
      source.per_checkpoint_wrong[checkpoint][id] = {
          record.response, record.extracted.value_or("")};
    }
  }

  auto build = build_self_reflection(source, base, config.trigger);
  io.counts["intersection"] = static_cast<std::int64_t>(build.ids.size());
  for (const auto& [checkpoint, instances] : build.per_checkpoint) {
    std::string data_path = io.path(task + "_self_" + checkpoint + ".jsonl");
    write_dataset(instances, data_path, task + "_self_" + checkpoint, config.seed,
                  config.digest(), family);
    io.outputs.push_back(data_path);
    io.outputs.push_back(manifest_path_for(data_path));
    std::cout << checkpoint << ": " << instances.size() << " instances\n";
  }
  write_stage_manifest(io, config);
  return kExitOk;
}

// -------------------------------------------------------------------- eval

std::string strip_trigger(const AdversarialInstance& instance) {
  std::string prompt = instance.prompt;
  if (!instance.trigger.empty() && prompt.size() >= instance.trigger.size() &&
      prompt.compare(prompt.size() - instance.trigger.size(),
                     instance.trigger.size(), instance.trigger) == 0) {
    prompt.resize(prompt.size() - instance.trigger.size());
    while (!prompt.empty() &&
           std::isspace(static_cast<unsigned char>(prompt.back())))
      prompt.pop_back();
  }
  return prompt;
}

int run_eval(const std::string& endpoint, const std::string& dataset_path,
             const std::string& checkpoint_name, const std::string& out_dir,
             RunConfig config, const std::string& records_name,
             bool trigger_override, const std::string& override_text) {
  StageIo io{"eval", out_dir};
  fs::create_directories(io.out_dir);
  io.inputs.push_back(dataset_path);
  warn_on_digest_mismatch(dataset_path, config);

  auto instances = load_adversarial(dataset_path);
  ModelClient client(make_backend(endpoint, config.endpoint_path), config.retry);
  CommandExecutor executor(config.executor_command, config.executor_timeout_ms);

  std::vector<EvalRecord> all_records;
  for (int repeat = 0; repeat < config.repeats; ++repeat) {
    std::vector<std::string> prompts(instances.size());
    std::vector<std::string> accumulated(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (trigger_override) {
        std::string context = strip_trigger(instances[i]);
        prompts[i] = override_text.empty()
                         ? context
                         : context + config.trigger.separator + override_text;
      } else {
        prompts[i] = instances[i].prompt;
      }
    }
    const std::string round_trigger =
        trigger_override ? override_text : config.trigger.text;

    for (int round = 0; round < config.rounds; ++round) {
      std::vector<CompletionRequest> requests(instances.size());
      for (std::size_t i = 0; i < instances.size(); ++i) {
        requests[i].prompt = prompts[i];
        requests[i].max_new_tokens = config.max_new_tokens;
        requests[i].temperature = config.temperature;
        requests[i].stop_sequences = config.stop_sequences;
        if (config.temperature > 0) requests[i].seed = config.seed + repeat;
      }
      std::vector<Completion> completions;
      try {
        completions = client.batch_complete(requests, config.max_in_flight);
      } catch (const BatchError& e) {
        // preserve the successes, then fail the stage
        std::vector<EvalRecord> partial = all_records;
        for (std::size_t i = 0; i < instances.size(); ++i) {
          if (i < e.failure.partial.size() && e.failure.partial[i]) {
            std::string text = accumulated[i];
            if (!text.empty()) text += "\n";
            text += e.failure.partial[i]->text;
            EvalRecord r = score_instance(instances[i], text, &executor,
                                          config.scoring);
            r.checkpoint = checkpoint_name;
            r.repeat = repeat;
            r.round = round;
            r.response = text;
            r.word_count = word_count(text);
            r.cumulative_words = r.word_count;
            partial.push_back(std::move(r));
          }
        }
        write_records(partial, io.path(records_name + ".partial.jsonl"));
        io.outputs.push_back(io.path(records_name + ".partial.jsonl"));
        io.status = "partial";
        io.counts["failed_requests"] =
            static_cast<std::int64_t>(e.failure.failed_indices.size());
        write_stage_manifest(io, config);
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
      }

      for (std::size_t i = 0; i < instances.size(); ++i) {
        if (!accumulated[i].empty()) accumulated[i] += "\n";
        accumulated[i] += completions[i].text;
        EvalRecord r =
            score_instance(instances[i], accumulated[i], &executor, config.scoring);
        r.checkpoint = checkpoint_name;
        r.repeat = repeat;
        r.round = round;
        r.response = accumulated[i];
        r.word_count = word_count(accumulated[i]);
        r.cumulative_words = r.word_count;
        all_records.push_back(std::move(r));
        // budget forcing: extend the context and re-append the trigger
        if (round + 1 < config.rounds && !round_trigger.empty()) {
          prompts[i] += completions[i].text + config.trigger.separator +
                        round_trigger;
        } else if (round + 1 < config.rounds) {
          prompts[i] += completions[i].text;
        }
      }
    }
  }

  std::string records_path = io.path(records_name);
  write_records(all_records, records_path);
  io.outputs.push_back(records_path);
  io.counts["records"] = static_cast<std::int64_t>(all_records.size());
  io.counts["instances"] = static_cast<std::int64_t>(instances.size());
  write_stage_manifest(io, config);
  std::cout << "wrote " << all_records.size() << " records to " << records_path
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- classify

int run_classify(const std::string& records_path, const std::string& out_dir,
                 RunConfig config, const std::string& endpoint) {
  StageIo io{"classify", out_dir};
  fs::create_directories(io.out_dir);
  io.inputs.push_back(records_path);

  auto records = load_records(records_path);
  ClassifierMode mode = config.classifier_mode == "judge" ? ClassifierMode::judge
                                                          : ClassifierMode::lexical;
  std::vector<std::string> cues = config.cues_path ? load_cues(*config.cues_path)
                                                   : default_reflection_cues();
  std::optional<ModelClient> client;
  std::string judge_template;
  if (mode == ClassifierMode::judge) {
    if (endpoint.empty())
      throw PipelineError("judge classification needs an --endpoint");
    client.emplace(make_backend(endpoint, config.endpoint_path), config.retry);
    judge_template = read_file(config.templates_dir + "/judge/explicit_reflection.txt");
  }

  std::int64_t positives = 0;
  for (auto& r : records) {
    r.explicit_reflection =
        classify_explicit(r.response, mode, client ? &*client : nullptr, cues,
                          judge_template);
    positives += r.explicit_reflection;
  }

  fs::path in_name = fs::path(records_path).filename();
  std::string out_name = in_name.stem().string() + "_classified.jsonl";
  std::string out_path = io.path(out_name);
  write_records(records, out_path);
  io.outputs.push_back(out_path);
  io.counts["records"] = static_cast<std::int64_t>(records.size());
  io.counts["explicit"] = positives;
  write_stage_manifest(io, config);
  std::cout << "classified " << records.size() << " records, " << positives
            << " explicit -> " << out_path << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ metrics

std::map<std::string, std::vector<EvalRecord>> final_round_by_checkpoint(
    const std::vector<EvalRecord>& records) {
  std::map<std::string, std::vector<EvalRecord>> grouped;
  std::map<std::string, int> max_round;
  for (const auto& r : records)
    max_round[r.checkpoint] = std::max(max_round[r.checkpoint], r.round);
  for (const auto& r : records)
    if (r.round == max_round[r.checkpoint]) grouped[r.checkpoint].push_back(r);
  return grouped;
}

json metrics_to_json(const std::string& checkpoint, const MetricsReport& report) {
  json j;
  j["checkpoint"] = checkpoint;
  j["n"] = report.n;
  j["counts"] = {{"correct_explicit", report.counts.correct_explicit},
                 {"correct_implicit", report.counts.correct_implicit},
                 {"incorrect_explicit", report.counts.incorrect_explicit},
                 {"incorrect_implicit", report.counts.incorrect_implicit}};
  j["accuracy"] = {{"rational", report.accuracy().str()},
                   {"value", report.accuracy().to_double()}};
  j["explicit_rate"] = {{"rational", report.explicit_rate().str()},
                        {"value", report.explicit_rate().to_double()}};
  j["explicit_accuracy"] = {{"rational", report.explicit_accuracy().str()},
                            {"value", report.explicit_accuracy().to_double()}};
  j["implicit_accuracy"] = {{"rational", report.implicit_accuracy().str()},
                            {"value", report.implicit_accuracy().to_double()}};
  return j;
}

int run_metrics(const std::string& records_path, const std::string& out_dir,
                RunConfig config) {
  StageIo io{"metrics", out_dir};
  fs::create_directories(io.out_dir);
  io.inputs.push_back(records_path);

  auto grouped = final_round_by_checkpoint(load_records(records_path));
  if (grouped.empty()) throw ScoringError("no records in " + records_path);

  json all = json::array();
  for (const auto& [checkpoint, records] : grouped) {
    MetricsReport report = compute_metrics(records);
    all.push_back(metrics_to_json(checkpoint, report));
    std::cout << checkpoint << ": n=" << report.n
              << " accuracy=" << report.accuracy().to_double()
              << " explicit_rate=" << report.explicit_rate().to_double()
              << " explicit_accuracy=" << report.explicit_accuracy().to_double()
              << " implicit_accuracy=" << report.implicit_accuracy().to_double()
              << "\n";
  }
  io.emit("metrics.json", all.dump(2) + "\n");
  io.counts["checkpoints"] = static_cast<std::int64_t>(grouped.size());
  write_stage_manifest(io, config);
  return kExitOk;
}

// ------------------------------------------------------------------ analyze

int run_analyze(const std::vector<std::string>& record_paths,
                const std::string& checkpoints_path, const std::string& out_dir,
                RunConfig config, const std::string& task,
                const std::vector<long long>& targets,
                const std::string& ppl_dataset, const std::string& ppl_endpoint,
                const std::vector<std::string>& ablation_paths) {
  StageIo io{"analyze", out_dir};
  fs::create_directories(io.out_dir);
  for (const auto& p : record_paths) io.inputs.push_back(p);
  io.inputs.push_back(checkpoints_path);

  auto checkpoints = load_checkpoints(checkpoints_path);
  std::map<std::string, CheckpointMeta> meta_by_name;
  for (const auto& m : checkpoints) meta_by_name[m.name] = m;

  std::vector<EvalRecord> records;
  for (const auto& p : record_paths) {
    auto part = load_records(p);
    records.insert(records.end(), part.begin(), part.end());
  }

  auto grouped = final_round_by_checkpoint(records);
  std::vector<ComputePoint> points;
  std::string metrics_csv =
      "checkpoint,n_params,t_tokens,pretrain_flops,n,accuracy,explicit_rate,"
      "explicit_accuracy,implicit_accuracy\n";
  for (const auto& [checkpoint, group] : grouped) {
    auto it = meta_by_name.find(checkpoint);
    if (it == meta_by_name.end())
      throw AnalyticsError("no checkpoint metadata for " + checkpoint);
    MetricsReport report = compute_metrics(group);
    ComputePoint point = make_compute_point(it->second, report);
    metrics_csv += checkpoint + "," + std::to_string(it->second.n_params) + "," +
                   std::to_string(it->second.t_tokens) + "," +
                   format_double(point.pretrain_flops) + "," +
                   std::to_string(report.n) + "," +
                   format_double(point.metrics.at("accuracy")) + "," +
                   format_double(point.metrics.at("explicit_rate")) + "," +
                   format_double(point.metrics.at("explicit_accuracy")) + "," +
                   format_double(point.metrics.at("implicit_accuracy")) + "\n";
    points.push_back(std::move(point));
  }
  io.emit("metrics_by_checkpoint.csv", metrics_csv);

  std::string corr_csv = "task,metric,r,n_checkpoints\n";
  if (points.size() >= 2) {
    for (const std::string metric : {"accuracy", "explicit_rate",
                                     "explicit_accuracy", "implicit_accuracy"}) {
      try {
        double r = correlate_metric(points, metric);
        corr_csv += task + "," + metric + "," + format_double(r) + "," +
                    std::to_string(points.size()) + "\n";
      } catch (const AnalyticsError& e) {
        std::cerr << "correlation skipped for " << metric << ": " << e.what()
                  << "\n";
      }
    }
  } else {
    std::cerr << "correlations need at least two checkpoints; emitting header only\n";
  }
  io.emit("correlations.csv", corr_csv);

  if (!targets.empty()) {
    auto curves = tradeoff_curves(records, checkpoints, targets);
    std::string csv = "target,checkpoint,pretrain_flops,testtime_flops\n";
    for (const auto& curve : curves) {
      for (const auto& p : curve.points) {
        csv += std::to_string(curve.target) + "," + p.checkpoint + "," +
               format_double(p.pretrain_flops) + "," +
               format_double(p.testtime_flops) + "\n";
      }
    }
    io.emit("tradeoff.csv", csv);
  }

  if (ablation_paths.size() == 3) {
    auto wait_groups = final_round_by_checkpoint(load_records(ablation_paths[0]));
    auto b_groups = final_round_by_checkpoint(load_records(ablation_paths[1]));
    auto a_groups = final_round_by_checkpoint(load_records(ablation_paths[2]));
    std::string csv = "checkpoint,acc_wait,e_wait,acc_b,i_acc_a,residual\n";
    for (const auto& [checkpoint, wait_records] : wait_groups) {
      if (!b_groups.count(checkpoint) || !a_groups.count(checkpoint)) continue;
      AblationTriple triple = ablation_triple(
          compute_metrics(wait_records), compute_metrics(b_groups.at(checkpoint)),
          compute_metrics(a_groups.at(checkpoint)));
      csv += checkpoint + "," + format_double(triple.acc_wait) + "," +
             format_double(triple.e_wait) + "," + format_double(triple.acc_b) +
             "," + format_double(triple.i_acc_a) + "," +
             format_double(decomposition_residual(triple)) + "\n";
    }
    io.emit("ablation.csv", csv);
  }

  if (!ppl_dataset.empty()) {
    if (ppl_endpoint.empty())
      throw PipelineError("the perplexity probe needs --ppl-endpoint");
    ModelClient client(make_backend(ppl_endpoint, config.endpoint_path),
                       config.retry);
    auto instances = load_adversarial(ppl_dataset);
    std::string csv = "base_id,ppl_correct,ppl_incorrect,diff\n";
    for (const auto& instance : instances) {
      auto probe = perplexity_diff(client, instance.question,
                                   instance.adversarial_cot, instance.gold_answer,
                                   instance.adversarial_answer);
      csv += instance.base_id + "," + format_double(probe.ppl_correct) + "," +
             format_double(probe.ppl_incorrect) + "," + format_double(probe.diff) +
             "\n";
    }
    io.emit("ppl_diff.csv", csv);
    io.inputs.push_back(ppl_dataset);
  }

  io.counts["checkpoints"] = static_cast<std::int64_t>(grouped.size());
  io.counts["records"] = static_cast<std::int64_t>(records.size());
  write_stage_manifest(io, config);
  std::cout << "analysis written to " << out_dir << "\n";
  return kExitOk;
}

// ----------------------------------------------------------- validate-judge

int run_validate_judge(const std::string& predictions_path,
                       const std::string& gold_path, const std::string& out_dir,
                       RunConfig config) {
  StageIo io{"validate_judge", out_dir};
  fs::create_directories(io.out_dir);
  io.inputs = {predictions_path, gold_path};

  auto parse_labels = [](const std::string& path) {
    std::vector<std::pair<std::string, bool>> labels;
    for (const auto& line : read_lines(path)) {
      if (trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line);
      labels.emplace_back(j.at("id").get<std::string>(), j.at("label").get<bool>());
    }
    return labels;
  };

  GoldLabelSet gold;
  gold.labels = parse_labels(gold_path);
  ClassifierScore score = validate_classifier(parse_labels(predictions_path), gold);

  auto show = [](const std::optional<Rational>& r) {
    return r ? format_double(r->to_double()) : std::string("undefined");
  };
  std::cout << "tp=" << score.tp << " fp=" << score.fp << " fn=" << score.fn
            << " tn=" << score.tn << "\n";
  std::cout << "precision=" << show(score.precision)
            << " recall=" << show(score.recall) << " f1=" << show(score.f1) << "\n";

  json j;
  j["tp"] = score.tp;
  j["fp"] = score.fp;
  j["fn"] = score.fn;
  j["tn"] = score.tn;
  j["precision"] = score.precision ? json(score.precision->to_double()) : json();
  j["recall"] = score.recall ? json(score.recall->to_double()) : json();
  j["f1"] = score.f1 ? json(score.f1->to_double()) : json();
  io.emit("classifier_validation.json", j.dump(2) + "\n");
  write_stage_manifest(io, config);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial reflection dataset toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "flat key-value config file (JSON)");

  // generate
  auto* generate = app.add_subcommand("generate", "build a situational dataset");
  std::string g_task, g_in, g_out = "out", g_embeddings, g_endpoint, g_templates;
  std::int64_t g_seed = -1;
  std::string g_trigger;
  generate->add_option("--task", g_task, "task kind")->required();
  generate->add_option("--in", g_in, "base dataset (jsonl)")->required();
  generate->add_option("--out", g_out, "output directory");
  generate->add_option("--seed", g_seed, "generation seed");
  generate->add_option("--trigger", g_trigger, "trigger text");
  generate->add_option("--embeddings", g_embeddings, "doc embeddings (triviaqa)");
  generate->add_option("--endpoint", g_endpoint, "helper model endpoint (crux/bbh)");
  generate->add_option("--templates", g_templates, "prompt template directory");

  // self-gen
  auto* self_gen = app.add_subcommand("self-gen", "build self-reflection datasets");
  std::string s_task, s_in, s_records, s_family = "default", s_out = "out";
  self_gen->add_option("--task", s_task)->required();
  self_gen->add_option("--in", s_in, "base dataset")->required();
  self_gen->add_option("--records", s_records, "eval records (all checkpoints)")
      ->required();
  self_gen->add_option("--family", s_family, "checkpoint family name");
  self_gen->add_option("--out", s_out);

  // eval
  auto* eval = app.add_subcommand("eval", "run a checkpoint over a dataset");
  std::string e_endpoint, e_dataset, e_checkpoint = "checkpoint", e_out = "out";
  std::string e_records_name = "records.jsonl", e_trigger;
  bool e_has_trigger_override = false;
  int e_rounds = -1, e_repeats = -1, e_max_in_flight = -1;
  eval->add_option("--endpoint", e_endpoint, "http(s) URL or mock:<script>")
      ->required();
  eval->add_option("--dataset", e_dataset)->required();
  eval->add_option("--checkpoint", e_checkpoint, "checkpoint name for records");
  eval->add_option("--out", e_out);
  eval->add_option("--records-out", e_records_name, "records file name");
  eval->add_option("--rounds", e_rounds, "budget-forcing continuation rounds");
  eval->add_option("--repeats", e_repeats, "independent repetitions");
  eval->add_option("--max-in-flight", e_max_in_flight);
  eval->add_option("--trigger-override", e_trigger,
                   "replace the dataset trigger (empty string removes it)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { e_has_trigger_override = true; });

  // classify
  auto* classify = app.add_subcommand("classify", "fill explicit-reflection flags");
  std::string c_records, c_out = "out", c_mode, c_cues, c_endpoint, c_templates;
  classify->add_option("--records", c_records)->required();
  classify->add_option("--out", c_out);
  classify->add_option("--mode", c_mode, "lexical or judge");
  classify->add_option("--cues", c_cues, "cue list file (lexical mode)");
  classify->add_option("--endpoint", c_endpoint, "judge model endpoint");
  classify->add_option("--templates", c_templates, "prompt template directory");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "reflection metrics per checkpoint");
  std::string m_records, m_out = "out";
  metrics->add_option("--records", m_records)->required();
  metrics->add_option("--out", m_out);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "correlations and compute curves");
  std::vector<std::string> a_records;
  std::string a_checkpoints, a_out = "out", a_task = "task";
  std::vector<long long> a_targets;
  std::string a_ppl_dataset, a_ppl_endpoint;
  std::vector<std::string> a_ablation;
  analyze->add_option("--records", a_records, "records files")->required();
  analyze->add_option("--checkpoints", a_checkpoints, "checkpoint metadata jsonl")
      ->required();
  analyze->add_option("--out", a_out);
  analyze->add_option("--task", a_task, "task label for csv rows");
  analyze->add_option("--targets", a_targets, "correct-count targets")
      ->delimiter(',');
  analyze->add_option("--ppl-dataset", a_ppl_dataset,
                      "adversarial dataset for the perplexity probe");
  analyze->add_option("--ppl-endpoint", a_ppl_endpoint);
  analyze->add_option("--ablation", a_ablation,
                      "three records files: wait, admission trigger, no trigger");

  // validate-judge
  auto* validate = app.add_subcommand("validate-judge",
                                      "score classifier output against gold labels");
  std::string v_predictions, v_gold, v_out = "out";
  validate->add_option("--predictions", v_predictions)->required();
  validate->add_option("--gold", v_gold)->required();
  validate->add_option("--out", v_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    RunConfig config = load_config_or_defaults(config_path);

    if (*generate) {
      if (g_seed >= 0) {
        config.seed = g_seed;
        config.perturbation.seed = static_cast<std::uint64_t>(g_seed);
      }
      if (!g_trigger.empty()) config.trigger.text = g_trigger;
      if (!g_endpoint.empty()) config.endpoint_url = g_endpoint;
      if (!g_templates.empty()) config.templates_dir = g_templates;
      return run_generate(g_task, g_in, g_out, config, g_embeddings);
    }
    if (*self_gen) return run_self_gen(s_task, s_in, s_records, s_family, s_out, config);
    if (*eval) {
      if (e_rounds > 0) config.rounds = e_rounds;
      if (e_repeats > 0) config.repeats = e_repeats;
      if (e_max_in_flight > 0) config.max_in_flight = e_max_in_flight;
      return run_eval(e_endpoint, e_dataset, e_checkpoint, e_out, config,
                      e_records_name, e_has_trigger_override, e_trigger);
    }
    if (*classify) {
      if (!c_mode.empty()) config.classifier_mode = c_mode;
      if (!c_cues.empty()) config.cues_path = c_cues;
      if (!c_templates.empty()) config.templates_dir = c_templates;
      return run_classify(c_records, c_out, config, c_endpoint);
    }
    if (*metrics) return run_metrics(m_records, m_out, config);
    if (*analyze)
      return run_analyze(a_records, a_checkpoints, a_out, config, a_task, a_targets,
                         a_ppl_dataset, a_ppl_endpoint, a_ablation);
    if (*validate) return run_validate_judge(v_predictions, v_gold, v_out, config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
