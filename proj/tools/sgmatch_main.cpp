#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgmatch/checkpoint.hpp"
#include "sgmatch/config.hpp"
#include "sgmatch/dataset.hpp"
#include "sgmatch/evaluation.hpp"
#include "sgmatch/gradcheck.hpp"
#include "sgmatch/model.hpp"
#include "sgmatch/negsample.hpp"
#include "sgmatch/textgraph.hpp"
#include "sgmatch/training.hpp"

namespace {

constexpr const char* kVersion = "sgmatch 1.0.0";

// Exit codes: 0 success, 1 usage, 2 IO/format/parse-precondition,
// 3 numeric failure.
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

using namespace sgmatch;

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg.load_file(config_path);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw IoError("cannot write output file: " + path);
  return file;
}

int cmd_parse(const std::string& caption, const std::string& input,
              const std::string& lexicon_path, const std::string& out_path) {
  Lexicon lexicon = Lexicon::from_file(lexicon_path);
  std::ofstream out_file;
  std::ostream& out = open_out(out_file, out_path);
  auto emit = [&](const std::string& text) {
    SceneGraph sg = parse_scene_graph(text, lexicon);
    out << scene_graph_to_json(sg) << "\n";
  };
  if (!caption.empty()) {
    emit(caption);
    return 0;
  }
  std::ifstream in(input);
  if (!in) throw IoError("cannot open input file: " + input);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    emit(j.at("caption").get<std::string>());
  }
  return 0;
}

int cmd_negatives(const std::string& caption, const std::string& input,
                  const std::string& lexicon_path, const std::string& mode,
                  bool emit_all, uint64_t seed, const std::string& out_path) {
  Lexicon lexicon = Lexicon::from_file(lexicon_path);
  SeededRng rng(seed);
  std::ofstream out_file;
  std::ostream& out = open_out(out_file, out_path);

  auto emit_line = [&](const std::string& id, const std::string& src,
                       const std::optional<NegativeSample>& neg) {
    nlohmann::json j;
    j["id"] = id;
    j["caption"] = src;
    if (neg) {
      j["negative_caption"] = neg->negative_caption;
      j["swap_kind"] = swap_kind_name(neg->swap.kind);
      if (neg->swap.kind == SwapKind::RelationSwap)
        j["swap_detail"] = {{"relation_index", neg->swap.relation_index}};
      else
        j["swap_detail"] = {{"attr_i", neg->swap.attr_i},
                            {"attr_j", neg->swap.attr_j}};
    } else {
      j["negative_caption"] = nullptr;
      j["reason"] = "no swap candidate changes the caption";
    }
    out << j.dump() << "\n";
  };

  auto process = [&](const std::string& id, const std::string& text) {
    if (mode == "random") {
      emit_line(id, text, random_word_swap(text, rng));
      return;
    }
    SceneGraph sg = parse_scene_graph(text, lexicon);
    if (emit_all) {
      auto all = all_negatives(text, sg);
      if (all.empty()) {
        emit_line(id, text, std::nullopt);
        return;
      }
      for (const auto& n : all) emit_line(id, text, n);
      return;
    }
    emit_line(id, text, try_sample_negative(text, sg, rng));
  };

  if (!caption.empty()) {
    process("cli", caption);
    return 0;
  }
  std::ifstream in(input);
  if (!in) throw IoError("cannot open input file: " + input);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    std::string id = j.contains("id") ? j.at("id").get<std::string>()
                                      : std::to_string(line_no);
    process(id, j.at("caption").get<std::string>());
  }
  return 0;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_path,
                 const std::string& lexicon_out) {
  std::vector<Sample> samples = gen_synthetic(cfg.data);
  Lexicon lexicon = synthetic_lexicon(cfg.data);
  prepare_samples(samples, lexicon);
  write_dataset_jsonl(out_path, samples, /*with_scene_graph=*/true);
  std::string lex_path =
      lexicon_out.empty() ? out_path + ".lexicon.txt" : lexicon_out;
  std::ofstream lex(lex_path, std::ios::binary);
  if (!lex) throw IoError("cannot write lexicon file: " + lex_path);
  for (const auto& [word, tag] : lexicon.entries())
    lex << word << "\t" << to_string(tag) << "\n";
  std::cout << "wrote " << samples.size() << " samples to " << out_path
            << " (features dim " << cfg.data.feature_dim() << ")\n"
            << "wrote lexicon to " << lex_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg_in, const std::string& data_path,
              const std::string& lexicon_path, const std::string& mode,
              const std::string& checkpoint_out,
              const std::string& metrics_out) {
  RunConfig cfg = cfg_in;
  if (!mode.empty()) cfg.train_mode = sampler_mode_from_string(mode);

  Lexicon lexicon = Lexicon::from_file(lexicon_path);
  std::vector<Sample> dataset = read_dataset_jsonl(data_path);
  if (dataset.empty()) throw IoError("dataset is empty: " + data_path);
  prepare_samples(dataset, lexicon);

  ModelConfig mc = cfg.model;
  mc.image_dim = dataset.front().image_features.size();
  Model<float> model(mc, Vocab::from_lexicon(lexicon));
  model.init_params(mc.seed);

  auto log = train(model, dataset, lexicon, cfg.train_config(),
                   [](const StepLogEntry& e) {
                     if (e.step % 25 == 0)
                       std::cout << "step " << e.step << " final " << e.final_loss
                                 << " hinge " << e.hinge << " itcl " << e.itcl
                                 << "\n";
                   });
  save_checkpoint(checkpoint_out, model);
  if (!metrics_out.empty()) write_metrics_jsonl(metrics_out, log);
  std::cout << "trained " << log.size() << " steps (mode "
            << to_string(cfg.train_mode) << "), checkpoint " << checkpoint_out
            << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& lexicon_path, const std::string& report_path,
             uint64_t seed) {
  auto model = load_checkpoint<float>(checkpoint_path);
  Lexicon lexicon = Lexicon::from_file(lexicon_path);
  std::vector<Sample> dataset = read_dataset_jsonl(data_path);
  prepare_samples(dataset, lexicon);

  SeededRng rng(seed);
  EvalCases cases = build_eval_cases(dataset, rng);
  EvalReport disc = eval_swap_discrimination(*model, cases, lexicon);
  std::vector<std::size_t> ks;
  for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}})
    if (k <= dataset.size()) ks.push_back(k);
  RetrievalReport ret = eval_retrieval(*model, dataset, ks);

  nlohmann::json j;
  j["swap_discrimination"] = {
      {"overall_accuracy", disc.overall_accuracy},
      {"relation_accuracy", disc.relation_accuracy},
      {"attribute_accuracy", disc.attribute_accuracy},
      {"relation_count", disc.relation_count},
      {"attribute_count", disc.attribute_count},
      {"evaluated", disc.evaluated},
      {"skipped", disc.skipped},
      {"mean_margin", disc.mean_margin}};
  nlohmann::json jr;
  for (const auto& [k, v] : ret.image_to_text)
    jr["image_to_text"][std::to_string(k)] = v;
  for (const auto& [k, v] : ret.text_to_image)
    jr["text_to_image"][std::to_string(k)] = v;
  j["retrieval"] = jr;

  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + report_path);
    out << j.dump(2) << "\n";
  }
  std::cout << "swap discrimination: " << disc.overall_accuracy * 100.0
            << "% (relation " << disc.relation_accuracy * 100.0
            << "%, attribute " << disc.attribute_accuracy * 100.0
            << "%), skipped " << disc.skipped << "\n";
  for (const auto& [k, v] : ret.image_to_text)
    std::cout << "recall@" << k << " i2t " << v * 100.0 << "% t2i "
              << ret.text_to_image.at(k) * 100.0 << "%\n";
  return 0;
}

// Builds a small batch from the config's synthetic grammar and checks the
// analytic gradient of the full objective on randomly sampled parameters.
template <typename T>
double run_gradcheck(const RunConfig& cfg, double eps, int samples,
                     std::size_t batch) {
  SyntheticGenConfig data = cfg.data;
  data.n_attr = (batch + 1) / 2;
  data.n_rel = batch / 2;
  std::vector<Sample> dataset = gen_synthetic(data);
  Lexicon lexicon = synthetic_lexicon(data);
  prepare_samples(dataset, lexicon);

  ModelConfig mc = cfg.model;
  mc.image_dim = dataset.front().image_features.size();
  Model<T> model(mc, Vocab::from_lexicon(lexicon));
  model.init_params(mc.seed);

  auto batches = make_batches(dataset, dataset.size(), 0, cfg.train_seed,
                              SamplerMode::Semantic);
  BatchInput in = batch_input<T>(dataset, batches.front(), lexicon);
  auto loss_fn = [&](bool with_grad) {
    if (with_grad) model.params().zero_grads();
    return model_loss(model, in, cfg.loss, with_grad).final_loss;
  };
  SeededRng rng(cfg.train_seed + 17);
  return finite_diff_check<T>(loss_fn, model.params(), eps, samples, rng);
}

int cmd_gradcheck(const RunConfig& cfg, double eps, int samples,
                  std::size_t batch, bool real32) {
  double err = real32 ? run_gradcheck<float>(cfg, eps, samples, batch)
                      : run_gradcheck<double>(cfg, eps, samples, batch);
  std::cout << "max_rel_err " << err << " (eps " << eps << ", " << samples
            << " samples, " << (real32 ? "float32" : "float64") << ")\n";
  if (err < 1e-3) {
    std::cout << "max_rel_err < 1e-3\n";
    return 0;
  }
  std::cerr << "gradient check failed: max_rel_err >= 1e-3\n";
  return kExitNumeric;
}

int cmd_inspect(const std::string& checkpoint_path) {
  CheckpointManifest manifest = read_checkpoint_manifest(checkpoint_path);
  std::cout << "config: " << manifest.config.dump() << "\n";
  std::size_t total = 0;
  for (const auto& [name, shape] : manifest.tensors) {
    std::size_t n = 1;
    std::cout << name << " [";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      std::cout << (i ? "x" : "") << shape[i];
      n *= shape[i];
    }
    std::cout << "] (" << n << ")\n";
    total += n;
  }
  std::cout << "total parameters: " << total << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scene-graph-guided image-text matching toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config with flat dotted keys")
      ->envname("SGMATCH_CONFIG");
  app.add_option("--set", overrides, "override a config key, key=value");

  // parse
  auto* parse = app.add_subcommand("parse", "captions -> scene-graph JSON");
  std::string parse_caption, parse_input, parse_lexicon, parse_out;
  parse->add_option("--caption", parse_caption, "parse one caption");
  parse->add_option("--input", parse_input, "JSONL file with caption fields");
  parse->add_option("--lexicon", parse_lexicon, "word<TAB>TAG lexicon file")
      ->required();
  parse->add_option("--out", parse_out, "output path (default stdout)");

  // negatives
  auto* negatives =
      app.add_subcommand("negatives", "scene-graph-guided negative captions");
  std::string neg_caption, neg_input, neg_lexicon, neg_mode = "semantic",
              neg_out;
  bool neg_emit_all = false;
  uint64_t neg_seed = 1;
  negatives->add_option("--caption", neg_caption, "single caption");
  negatives->add_option("--input", neg_input, "JSONL input");
  negatives->add_option("--lexicon", neg_lexicon, "lexicon file")->required();
  negatives->add_option("--mode", neg_mode, "semantic|random")
      ->check(CLI::IsMember({"semantic", "random"}));
  negatives->add_flag("--emit-all", neg_emit_all,
                      "emit every candidate instead of sampling one");
  negatives->add_option("--seed", neg_seed, "sampling seed");
  negatives->add_option("--out", neg_out, "output path (default stdout)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "synthetic dataset + lexicon");
  std::string gen_out, gen_lexicon_out;
  gen->add_option("--out", gen_out, "dataset JSONL path")->required();
  gen->add_option("--out-lexicon", gen_lexicon_out,
                  "lexicon path (default <out>.lexicon.txt)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_data, train_lexicon, train_mode, train_ckpt,
      train_metrics;
  train_cmd->add_option("--data", train_data, "dataset JSONL")->required();
  train_cmd->add_option("--lexicon", train_lexicon, "lexicon file")
      ->required();
  train_cmd->add_option("--mode", train_mode, "semantic|random|none");
  train_cmd->add_option("--out-checkpoint", train_ckpt, "checkpoint path")
      ->required();
  train_cmd->add_option("--metrics", train_metrics, "metrics JSONL path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_lexicon, eval_report;
  uint64_t eval_seed_flag = 0;
  bool eval_seed_set = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")
      ->required();
  eval_cmd->add_option("--data", eval_data, "dataset JSONL")->required();
  eval_cmd->add_option("--lexicon", eval_lexicon, "lexicon file")->required();
  eval_cmd->add_option("--report", eval_report, "report JSON path");
  eval_cmd->add_option("--seed", eval_seed_flag, "eval case sampling seed")
      ->each([&](const std::string&) { eval_seed_set = true; });

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck",
                                  "finite-difference check of the full loss");
  double grad_eps = 1e-3;
  int grad_samples = 200;
  std::size_t grad_batch = 8;
  bool grad_real32 = false;
  grad->add_option("--eps", grad_eps, "central-difference step");
  grad->add_option("--samples", grad_samples, "sampled scalar parameters");
  grad->add_option("--batch", grad_batch, "batch size for the probe loss");
  grad->add_flag("--float32", grad_real32,
                 "check the float32 instantiation (default float64)");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print checkpoint manifest");
  std::string inspect_ckpt;
  inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg = load_run_config(config_path, overrides);
    if (parse->parsed()) {
      if (parse_caption.empty() == parse_input.empty()) {
        std::cerr << "parse: provide exactly one of --caption or --input\n";
        return kExitUsage;
      }
      return cmd_parse(parse_caption, parse_input, parse_lexicon, parse_out);
    }
    if (negatives->parsed()) {
      if (neg_caption.empty() == neg_input.empty()) {
        std::cerr << "negatives: provide exactly one of --caption or --input\n";
        return kExitUsage;
      }
      return cmd_negatives(neg_caption, neg_input, neg_lexicon, neg_mode,
                           neg_emit_all, neg_seed, neg_out);
    }
    if (gen->parsed()) return cmd_gen_data(cfg, gen_out, gen_lexicon_out);
    if (train_cmd->parsed())
      return cmd_train(cfg, train_data, train_lexicon, train_mode, train_ckpt,
                       train_metrics);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_data, eval_lexicon, eval_report,
                      eval_seed_set ? eval_seed_flag : cfg.eval_seed);
    if (grad->parsed())
      return cmd_gradcheck(cfg, grad_eps, grad_samples, grad_batch,
                           grad_real32);
    if (inspect->parsed()) return cmd_inspect(inspect_ckpt);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const EmptyCaption& e) {
    std::cerr << "parse precondition: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
