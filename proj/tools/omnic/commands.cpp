#include "commands.hpp"

#include <CLI11.hpp>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "omnic/adapt.hpp"
#include "omnic/align.hpp"
#include "omnic/augment.hpp"
#include "omnic/checkpoint.hpp"
#include "omnic/errors.hpp"
#include "omnic/eval.hpp"
#include "omnic/feature_cache.hpp"
#include "omnic/hash.hpp"
#include "omnic/pretrain.hpp"
#include "omnic/sample_store.hpp"
#include "omnic/tokenizer.hpp"

namespace fs = std::filesystem;

namespace omnic::cli {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) { return format_double(v); }

std::string store_name(Modality m, const char* split) { return std::string(modality_name(m)) + "_" + split + ".omns"; }

std::vector<ModalitySample> load_store(const RunConfig& rc, const std::string& file) {
  return read_sample_store(fs::path(rc.get("data_dir")) / file);
}

OmniEncoder<float> load_model(const RunConfig& rc, const std::string& command) {
  const auto ckpt = read_checkpoint(rc.require_path("checkpoint", command));
  return restore_encoder(ckpt);
}

void check_unchanged(const std::string& before, const OmniEncoder<float>& enc, const std::string& what) {
  if (parameter_hash(enc) != before) throw StateError(what + " modified the backbone");
}

// gen-data -------------------------------------------------------------------

void cmd_gen_data(const RunConfig& rc, const fs::path& out) {
  std::string summary = "file,modality,count,sha256\n";
  auto save = [&](const std::vector<ModalitySample>& samples, const std::string& file) {
    write_sample_store(samples, out / file);
    const std::string stem = file.substr(0, file.size() - 5);
    write_text(out / ("manifest_" + stem + ".csv"), corpus_manifest_csv(samples));
    summary += file + "," + (samples.empty() ? "none" : modality_name(samples.front().modality())) + "," +
               std::to_string(samples.size()) + "," + file_sha256(out / file) + "\n";
  };
  const double frac = rc.number("train_fraction");
  for (Modality m : kAllModalities) {
    const auto split = split_corpus(generate_corpus(rc.corpus_spec(m)), frac);
    save(split.train, store_name(m, "train"));
    save(split.held_out, store_name(m, "held"));
  }
  const auto paired = generate_paired_corpus(rc.paired_spec(), rc.grammar());
  const auto a = split_corpus(paired.side_a, frac);
  const auto b = split_corpus(paired.side_b, frac);
  save(a.train, "paired_a_train.omns");
  save(b.train, "paired_b_train.omns");
  save(a.held_out, "paired_a_held.omns");
  save(b.held_out, "paired_b_held.omns");
  write_text(out / "data_summary.csv", summary);
}

// pretrain -------------------------------------------------------------------

void cmd_pretrain(const RunConfig& rc, const fs::path& out) {
  ModalityStores stores;
  for (Modality m : kAllModalities) stores[static_cast<std::size_t>(m)] = load_store(rc, store_name(m, "train"));
  if (const std::size_t target = rc.size("balance_target"); target > 0) {
    std::mt19937_64 rng(rc.seed() ^ 0xBA1Au);
    stores = balance_datasets(stores, target, rng);
  }
  const PretrainConfig pc = rc.pretrain();
  std::ofstream log(out / "loss_log.csv", std::ios::trunc);
  if (!log) throw DataError("cannot write loss log");
  log << loss_log_header() << "\n";
  const auto result = run_pretraining(OmniEncoder<float>::init(rc.encoder(), rc.seed()), stores, pc,
                                      [&](const LossRecord& r) { log << format_loss_record(r) << "\n"; });
  log.close();
  const KeyValues meta{{"seed", std::to_string(rc.seed())},
                       {"epochs", std::to_string(pc.optim.total_epochs)},
                       {"diverged", result.diverged ? "1" : "0"}};
  write_checkpoint(make_checkpoint(result.model, meta), out / "model.omnc");

  std::string summary = "modality,first_epoch_loss,last_epoch_loss,ratio\n";
  if (!result.log.empty()) {
    const std::size_t last = result.log.back().epoch;
    const auto first_means = epoch_modality_means(result.log, 0);
    const auto last_means = epoch_modality_means(result.log, last);
    for (Modality m : kAllModalities) {
      const auto i = static_cast<std::size_t>(m);
      summary += std::string(modality_name(m)) + "," + num(first_means[i]) + "," + num(last_means[i]) + "," +
                 num(last_means[i] / first_means[i]) + "\n";
    }
  }
  write_text(out / "pretrain_summary.csv", summary);
  write_text(out / "model_sha256.txt", parameter_hash(result.model) + "\n");
  if (result.diverged) throw NumericError("pretraining diverged: " + result.message);
}

// knn ------------------------------------------------------------------------

void cmd_knn(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "knn");
  const std::string before = parameter_hash(enc);
  const KnnOptions opts = rc.knn();
  std::string csv = "modality,k,temperature,train_size,query_size,accuracy\n";
  for (Modality m : kAllModalities) {
    const auto train = load_store(rc, store_name(m, "train"));
    const auto held = load_store(rc, store_name(m, "held"));
    const auto pred = knn_classify(to_double(extract_features(enc, train)), sample_labels(train),
                                   to_double(extract_features(enc, held)), opts);
    csv += std::string(modality_name(m)) + "," + std::to_string(opts.k) + "," + num(opts.temperature) + "," +
           std::to_string(train.size()) + "," + std::to_string(held.size()) + "," +
           num(accuracy(pred, sample_labels(held))) + "\n";
  }
  check_unchanged(before, enc, "knn");
  write_text(out / "knn.csv", csv);
}

// probe ----------------------------------------------------------------------

void cmd_probe(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "probe");
  const std::string before = parameter_hash(enc);
  const ProbeConfig pc = rc.probe();
  std::string csv = "modality,train_accuracy,held_out_accuracy,final_loss\n";
  for (Modality m : kAllModalities) {
    const auto train = load_store(rc, store_name(m, "train"));
    const auto held = load_store(rc, store_name(m, "held"));
    const auto res = train_linear_probe(enc, train, held, pc);
    csv += std::string(modality_name(m)) + "," + num(res.train_accuracy) + "," + num(res.held_out_accuracy) + "," +
           (res.epoch_loss.empty() ? std::string("nan") : num(res.epoch_loss.back())) + "\n";
  }
  const std::string after = parameter_hash(enc);
  write_text(out / "probe.csv", csv);
  write_text(out / "backbone_hash.csv", "stage,sha256\nbefore," + before + "\nafter," + after + "\n");
  check_unchanged(before, enc, "probe");
}

// sbora ----------------------------------------------------------------------

void cmd_sbora(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "sbora");
  const SBoRATrainConfig sc = rc.sbora();
  std::string csv = "modality,rank,alpha,trainable_fraction,held_out_accuracy,max_merge_deviation\n";
  for (Modality m : rc.modalities("sbora_modalities")) {
    const auto train = load_store(rc, store_name(m, "train"));
    const auto held = load_store(rc, store_name(m, "held"));
    const auto res = train_sbora_classifier(enc, train, held, sc);
    const auto merged = merge_sbora(res.adapted);
    const auto fa = extract_features(res.adapted, held);
    const auto fm = extract_features(merged, held);
    double dev = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      for (std::size_t j = 0; j < fa[i].size(); ++j) dev = std::max(dev, static_cast<double>(std::abs(fa[i][j] - fm[i][j])));
    }
    csv += std::string(modality_name(m)) + "," + std::to_string(sc.adapter.rank) + "," + num(sc.adapter.alpha) + "," +
           num(count_trainable_fraction(res.adapted)) + "," + num(res.held_out_accuracy) + "," + num(dev) + "\n";
    const KeyValues meta{{"seed", std::to_string(rc.seed())}, {"sbora_modality", modality_name(m)}};
    write_checkpoint(make_checkpoint(res.adapted, meta), out / ("adapted_" + std::string(modality_name(m)) + ".omnc"));
    write_checkpoint(make_checkpoint(merged, meta), out / ("merged_" + std::string(modality_name(m)) + ".omnc"));
  }
  write_text(out / "sbora.csv", csv);
}

// align ----------------------------------------------------------------------

PairedFeatureCache load_or_cache(const OmniEncoder<float>& enc, const RunConfig& rc, const char* split,
                                 const fs::path& out) {
  const auto a = load_store(rc, std::string("paired_a_") + split + ".omns");
  const auto b = load_store(rc, std::string("paired_b_") + split + ".omns");
  auto cache = cache_features(enc, a, b);
  write_feature_cache(cache.a, out / (std::string("cache_a_") + split + ".omnf"));
  write_feature_cache(cache.b, out / (std::string("cache_b_") + split + ".omnf"));
  return cache;
}

std::vector<std::size_t> retrieval_ks(const RunConfig& rc) {
  std::vector<std::size_t> ks;
  std::stringstream ss(rc.get("retrieval_k"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto k = parse_size_value("retrieval_k", item);
    if (k == 0) throw ConfigError("key 'retrieval_k': entries must be positive");
    ks.push_back(k);
  }
  return ks;
}

void cmd_align(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "align");
  const std::string before = parameter_hash(enc);
  const auto train = load_or_cache(enc, rc, "train", out);
  const auto held = load_or_cache(enc, rc, "held", out);
  const auto head0 = AlignmentHead::init(enc.config.embed_dim, rc.size("align_dim"), rc.seed());
  const auto res = train_alignment(train, head0, rc.align());
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) loss += std::to_string(e) + "," + num(res.epoch_loss[e]) + "\n";
  write_text(out / "align_loss.csv", loss);
  std::string ret = "split,k,a_to_b,b_to_a\n";
  for (std::size_t k : retrieval_ks(rc)) {
    for (const auto& [name, cache] : {std::pair<const char*, const PairedFeatureCache*>{"train", &train},
                                      std::pair<const char*, const PairedFeatureCache*>{"held", &held}}) {
      if (k > cache->pairs()) continue;
      const auto r = retrieval_at_k(*cache, res.head, k);
      ret += std::string(name) + "," + std::to_string(k) + "," + num(r.a_to_b) + "," + num(r.b_to_a) + "\n";
    }
  }
  write_text(out / "retrieval.csv", ret);
  write_checkpoint(alignment_head_checkpoint(res.head, enc.config, {{"seed", std::to_string(rc.seed())}}),
                   out / "align_head.omnc");
  check_unchanged(before, enc, "align");
}

// zeroshot -------------------------------------------------------------------

void cmd_zeroshot(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "zeroshot");
  const std::string before = parameter_hash(enc);
  const auto head = restore_alignment_head(read_checkpoint(rc.require_path("align_head", "zeroshot")));
  const auto held = load_store(rc, "paired_a_held.omns");
  const CaptionGrammar g = rc.grammar();
  std::vector<std::string> prompts;
  for (std::size_t c = 0; c < rc.size("paired_classes"); ++c) {
    std::string p = rc.get("prompt_template");
    for (auto pos = p.find("{class}"); pos != std::string::npos; pos = p.find("{class}")) p.replace(pos, 7, g.class_name(c));
    prompts.push_back(p);
  }
  const auto pred = zero_shot_classify(to_double(extract_features(enc, held)), prompts, enc, head);
  const auto labels = sample_labels(held);
  std::string preds = "index,label,predicted\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    preds += std::to_string(i) + "," + std::to_string(labels[i]) + "," + std::to_string(pred[i]) + "\n";
  }
  write_text(out / "zeroshot_predictions.csv", preds);
  write_text(out / "zeroshot.csv", "classes,queries,top1\n" + std::to_string(prompts.size()) + "," +
                                       std::to_string(pred.size()) + "," + num(accuracy(pred, labels)) + "\n");
  check_unchanged(before, enc, "zeroshot");
}

// metrics --------------------------------------------------------------------

void cmd_metrics(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "metrics");
  const PretrainConfig pc = rc.pretrain();
  std::mt19937_64 rng(rc.seed() ^ 0x3E7Cu);
  std::string csv = "modality,samples,alignment,uniformity\n";
  std::array<FeatureMatrix, 3> per_modality;
  for (Modality m : rc.modalities("metric_modalities")) {
    const auto held = load_store(rc, store_name(m, "held"));
    std::vector<ModalitySample> v1, v2;
    for (const auto& s : held) {
      v1.push_back(augment(s, pc.augment, rng));
      v2.push_back(augment(s, pc.augment, rng));
    }
    const auto f1 = l2_normalize_rows(to_double(extract_features(enc, v1)));
    const auto f2 = l2_normalize_rows(to_double(extract_features(enc, v2)));
    MetricReport rep{m, held.size(), alignment_metric(f1, f2), uniformity_metric(f1)};
    csv += std::string(modality_name(m)) + "," + std::to_string(rep.samples) + "," + num(rep.alignment) + "," +
           num(rep.uniformity) + "\n";
    per_modality[static_cast<std::size_t>(m)] = to_double(extract_features(enc, held));
  }
  write_text(out / "metrics.csv", csv);
  std::size_t present = 0;
  for (const auto& f : per_modality) present += !f.empty();
  if (present >= 2) {
    write_text(out / "purity.csv", "head_mode,purity\n" + std::string(head_mode_name(enc.config.head_mode)) + "," +
                                       num(modality_centroid_purity(per_modality)) + "\n");
  }
}

// attn -----------------------------------------------------------------------

void cmd_attn(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "attn");
  std::string summary = "modality,samples,tokens,max_row_deviation\n";
  for (Modality m : rc.modalities("attn_modalities")) {
    auto held = load_store(rc, store_name(m, "held"));
    if (held.size() > rc.size("attn_samples")) held.resize(rc.size("attn_samples"));
    const auto map = average_attention_map(enc, held);
    std::string csv;
    for (std::size_t i = 0; i < map.size; ++i) {
      for (std::size_t j = 0; j < map.size; ++j) csv += (j ? "," : "") + num(map.values[i * map.size + j]);
      csv += "\n";
    }
    std::string header;
    for (std::size_t j = 0; j < map.size; ++j) header += (j ? "," : "") + (j == 0 ? std::string("cls") : "t" + std::to_string(j));
    write_text(out / ("attention_" + std::string(modality_name(m)) + ".csv"), header + "\n" + csv);
    summary += std::string(modality_name(m)) + "," + std::to_string(held.size()) + "," + std::to_string(map.size - 1) +
               "," + num(max_row_sum_deviation(map.values, map.size)) + "\n";
  }
  write_text(out / "attention_summary.csv", summary);
}

// export-emb -----------------------------------------------------------------

void cmd_export_emb(const RunConfig& rc, const fs::path& out) {
  const auto enc = load_model(rc, "export-emb");
  FeatureMatrix feats;
  std::vector<Modality> mods;
  std::vector<std::int32_t> labels;
  for (Modality m : kAllModalities) {
    const auto held = load_store(rc, store_name(m, "held"));
    for (auto& row : to_double(extract_features(enc, held))) feats.push_back(std::move(row));
    for (const auto& s : held) {
      mods.push_back(m);
      labels.push_back(s.label.value_or(-1));
    }
  }
  const auto rows = export_embeddings_2d(feats, mods, labels, parse_projection_method(rc.get("export_method")));
  write_text(out / "embeddings.csv", embeddings_csv(rows));
}

std::string usage_text() {
  std::string s =
      "usage: omnic <subcommand> [--config FILE] [--set key=value]... [--out DIR]\n\nsubcommands:\n";
  for (const auto& c : commands()) {
    s += "  " + c.name + std::string(c.name.size() < 12 ? 12 - c.name.size() : 1, ' ') + c.help + "\n";
  }
  s += "\nexit codes: 0 success, 1 usage or validation error, 2 runtime failure\n";
  s += "OMNIC_SEED sets the seed when neither the config file nor --set does\n";
  return s;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> kCommands{
      {"gen-data", "generate synthetic corpora into the run directory", cmd_gen_data},
      {"pretrain", "contrastive pretraining; writes model.omnc and loss_log.csv", cmd_pretrain},
      {"knn", "weighted kNN accuracy on frozen features", cmd_knn},
      {"probe", "linear probe on frozen CLS features", cmd_probe},
      {"sbora", "SBoRA fine-tuning with merge check", cmd_sbora},
      {"align", "cross-modal alignment head training and retrieval", cmd_align},
      {"zeroshot", "zero-shot classification with an alignment head", cmd_zeroshot},
      {"metrics", "alignment, uniformity and modality purity", cmd_metrics},
      {"attn", "average last-block attention maps", cmd_attn},
      {"export-emb", "2-D or raw embedding export", cmd_export_emb},
  };
  return kCommands;
}

int dispatch(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << usage_text();
    return 1;
  }
  const std::string name = argv[1];
  if (name == "-h" || name == "--help") {
    std::cout << usage_text();
    return 0;
  }
  const Command* cmd = nullptr;
  for (const auto& c : commands()) {
    if (c.name == name) cmd = &c;
  }
  if (!cmd) {
    std::cerr << "omnic: unknown subcommand '" << name << "'\n" << usage_text();
    return 1;
  }

  CLI::App app{cmd->help, "omnic " + name};
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "run";
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--set", sets, "override, key=value (repeatable)");
  app.add_option("--out", out_dir, "run directory");
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    KeyValues file;
    if (!config_path.empty()) file = parse_key_values(read_text(config_path));
    KeyValues overrides;
    for (const auto& s : sets) overrides.push_back(parse_override(s));
    std::optional<std::string> env_seed;
    if (const char* e = std::getenv("OMNIC_SEED"); e && *e) env_seed = e;
    const RunConfig rc = RunConfig::resolve(file, overrides, env_seed);

    const fs::path out(out_dir);
    fs::create_directories(out);
    write_text(out / "config.resolved", rc.dump());
    write_text(out / "seed.txt", std::to_string(rc.seed()) + "\n");
    cmd->run(rc, out);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "omnic " << name << ": invalid configuration: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "omnic " << name << ": " << e.what() << "\n";
    return 2;
  }
}

}  // namespace omnic::cli
