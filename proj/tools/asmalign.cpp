// asmalign: contrastive assembly-language alignment pipeline.
//
// Subcommands cover the full workflow: synthesize a paired corpus, train the
// tokenizer, run masked pre-training, run contrastive alignment, export
// embeddings, and evaluate (zero-shot, retrieval, linear probe, few-shot).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asmalign/align.hpp"
#include "asmalign/corpus.hpp"
#include "asmalign/encoder.hpp"
#include "asmalign/eval.hpp"
#include "asmalign/pretrain.hpp"
#include "asmalign/synth.hpp"
#include "asmalign/text_encoder.hpp"
#include "asmalign/tokenizer.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;
using namespace asmalign;

void write_manifest(const std::string& output_path, const std::string& command,
                    const json& options) {
  json m;
  m["tool"] = "asmalign";
  m["version"] = kVersion;
  m["command"] = command;
  m["options"] = options;
  std::ofstream os(output_path + ".manifest.json", std::ios::binary);
  if (!os) throw Error("cannot write manifest for " + output_path);
  os << m.dump(2) << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<PairedExample> load_pairs(const std::string& path) {
  std::vector<PairedExample> pairs;
  for (const auto& r : read_corpus(path)) pairs.push_back(paired_example_from_record(r));
  return pairs;
}

// Either an alignment checkpoint or a bare stage-1 encoder checkpoint.
struct LoadedModel {
  bool aligned = false;
  AlignModel<float> align;
  EncoderModel<float> encoder;

  const EncoderConfig& encoder_config() const {
    return aligned ? align.encoder_config : encoder.config;
  }

  Tensor<float> embed(const TokenSequence& seq) const {
    if (aligned) return align.embed_assembly(seq);
    return encode_function(seq, encoder);
  }
};

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  try {
    m.align = load_align<float>(path);
    m.aligned = true;
    return m;
  } catch (const IncompatibleCheckpoint&) {
  }
  m.encoder = load_encoder<float>(path);
  m.aligned = false;
  return m;
}

std::unique_ptr<TextEncoder<float>> make_text_encoder(const AlignModel<float>& model,
                                                      const std::string& embeddings_path) {
  if (model.align_config.text_encoder_kind == "bag")
    return std::make_unique<BagTextEncoder<float>>(&model.params, model.align_config.text_buckets,
                                                   model.align_config.text_dim);
  if (embeddings_path.empty())
    throw Error("model uses the precomputed text encoder; pass --text-embeddings");
  return std::make_unique<PrecomputedTextEncoder<float>>(embeddings_path);
}

struct EmbeddedCorpus {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> labels;
  std::vector<std::string> groups;
  Tensor<float> embeddings;
};

EmbeddedCorpus embed_corpus(const LoadedModel& model, const Vocab& vocab,
                            const std::vector<PairedExample>& pairs) {
  EmbeddedCorpus out;
  std::size_t d = model.encoder_config().hidden_dim;
  out.embeddings = Tensor<float>(pairs.size(), d);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto seq = encode(rebase(pairs[i].function), vocab, model.encoder_config().max_seq_len);
    Tensor<float> e = model.embed(seq);
    for (std::size_t j = 0; j < d; ++j) out.embeddings.at(i, j) = e.at(0, j);
    out.ids.push_back(pairs[i].id);
    out.labels.push_back(pairs[i].labels);
    out.groups.push_back(pairs[i].group);
  }
  return out;
}

// label at `index` within the record's label list, used as the class
int class_of(const std::vector<std::string>& labels, std::size_t index,
             const std::map<std::string, int>& classes) {
  if (index >= labels.size()) throw Error("record missing label index " + std::to_string(index));
  return classes.at(labels[index]);
}

std::map<std::string, int> class_set(const std::vector<std::vector<std::string>>& labels,
                                     std::size_t index) {
  std::set<std::string> names;
  for (const auto& l : labels) {
    if (index >= l.size()) throw Error("record missing label index " + std::to_string(index));
    names.insert(l[index]);
  }
  std::map<std::string, int> classes;
  int next = 0;
  for (const auto& n : names) classes[n] = next++;
  return classes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive assembly-language alignment toolkit"};
  app.set_config("--config")->envname("ASMALIGN_CONFIG");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic paired corpus");
  struct {
    std::string templates = "builtin";
    std::size_t variants = 6;
    std::uint64_t seed = 0;
    std::string output;
    std::size_t holdout_variants = 0;
    std::string holdout_output;
    bool no_rename = false, no_reorder = false, no_shuffle = false;
    double nop_rate = 0.08;
  } syn;
  synth->add_option("--templates", syn.templates, "template set (builtin)");
  synth->add_option("--variants", syn.variants, "variants per template")->check(CLI::PositiveNumber);
  synth->add_option("--seed", syn.seed, "generator seed")->required();
  synth->add_option("-o,--output", syn.output, "corpus output path")->required();
  synth->add_option("--holdout-variants", syn.holdout_variants,
                    "variants per template diverted to the holdout file");
  synth->add_option("--holdout-output", syn.holdout_output, "holdout corpus path");
  synth->add_flag("--no-register-rename", syn.no_rename);
  synth->add_flag("--no-reorder", syn.no_reorder);
  synth->add_flag("--no-block-shuffle", syn.no_shuffle);
  synth->add_option("--nop-rate", syn.nop_rate, "nop insertion rate");

  // ---- tok-train ----
  auto* tok = app.add_subcommand("tok-train", "train the WordPiece vocabulary");
  struct {
    std::string corpus;
    std::string output;
    std::size_t vocab_size = 4096;
    std::size_t min_freq = 2;
    std::size_t max_instructions = 64;
  } tk;
  tok->add_option("--corpus", tk.corpus)->required();
  tok->add_option("-o,--output", tk.output)->required();
  tok->add_option("--vocab-size", tk.vocab_size);
  tok->add_option("--min-freq", tk.min_freq);
  tok->add_option("--max-instructions", tk.max_instructions);

  // ---- pretrain ----
  auto* pre = app.add_subcommand("pretrain", "stage-1 masked pre-training (MLM + JTP)");
  struct {
    std::string corpus, vocab, output, curve, resume;
    std::uint64_t seed = 0;
    std::size_t steps = 600, batch = 16, ckpt_interval = 0;
    std::size_t dim = 64, layers = 2, heads = 4, max_seq_len = 256;
    double lr = 1e-3, mlm_rate = 0.15, jtp_rate = 0.15;
    std::uint64_t init_seed = 1;
  } pt;
  pre->add_option("--corpus", pt.corpus)->required();
  pre->add_option("--vocab", pt.vocab)->required();
  pre->add_option("-o,--output", pt.output, "checkpoint path")->required();
  pre->add_option("--curve", pt.curve, "loss curve CSV path");
  pre->add_option("--resume", pt.resume, "resume from checkpoint");
  pre->add_option("--seed", pt.seed, "training seed")->required();
  pre->add_option("--steps", pt.steps);
  pre->add_option("--batch", pt.batch);
  pre->add_option("--checkpoint-interval", pt.ckpt_interval);
  pre->add_option("--dim", pt.dim);
  pre->add_option("--layers", pt.layers);
  pre->add_option("--heads", pt.heads);
  pre->add_option("--max-seq-len", pt.max_seq_len);
  pre->add_option("--lr", pt.lr);
  pre->add_option("--mlm-rate", pt.mlm_rate);
  pre->add_option("--jtp-rate", pt.jtp_rate);
  pre->add_option("--init-seed", pt.init_seed, "parameter init seed");

  // ---- align ----
  auto* al = app.add_subcommand("align", "stage-2 contrastive alignment");
  struct {
    std::string corpus, vocab, output, curve, init_from, text_embeddings;
    std::uint64_t seed = 0;
    std::size_t steps = 600, batch = 32;
    double lr = 1e-3, temperature = 1.0;
    bool learnable_temp = false, no_normalize = false, symmetric = false;
    bool allow_group_repeats = false;
    std::string text_encoder = "bag";
    std::size_t text_dim = 64, text_buckets = 2048;
    std::size_t dim = 64, layers = 2, heads = 4, max_seq_len = 256;
    std::uint64_t init_seed = 1;
  } ac;
  al->add_option("--corpus", ac.corpus)->required();
  al->add_option("--vocab", ac.vocab)->required();
  al->add_option("-o,--output", ac.output, "checkpoint path")->required();
  al->add_option("--curve", ac.curve, "loss curve CSV path");
  al->add_option("--init-from", ac.init_from, "stage-1 encoder checkpoint to start from");
  al->add_option("--seed", ac.seed, "training seed")->required();
  al->add_option("--steps", ac.steps);
  al->add_option("--batch", ac.batch);
  al->add_option("--lr", ac.lr);
  al->add_option("--temperature", ac.temperature);
  al->add_flag("--learnable-temperature", ac.learnable_temp);
  al->add_flag("--no-normalize", ac.no_normalize,
               "raw dot products (the equation's literal form)");
  al->add_flag("--symmetric", ac.symmetric, "add the text-to-assembly direction");
  al->add_flag("--allow-group-repeats", ac.allow_group_repeats,
               "permit same-group examples in a batch when groups < batch");
  al->add_option("--text-encoder", ac.text_encoder, "bag | precomputed");
  al->add_option("--text-embeddings", ac.text_embeddings,
                 "embedding file for the precomputed text encoder");
  al->add_option("--text-dim", ac.text_dim);
  al->add_option("--text-buckets", ac.text_buckets);
  al->add_option("--dim", ac.dim);
  al->add_option("--layers", ac.layers);
  al->add_option("--heads", ac.heads);
  al->add_option("--max-seq-len", ac.max_seq_len);
  al->add_option("--init-seed", ac.init_seed);

  // ---- embed ----
  auto* em = app.add_subcommand("embed", "export function embeddings");
  struct {
    std::string corpus, vocab, model, output;
  } eb;
  em->add_option("--corpus", eb.corpus)->required();
  em->add_option("--vocab", eb.vocab)->required();
  em->add_option("--model", eb.model)->required();
  em->add_option("-o,--output", eb.output)->required();

  // ---- zeroshot ----
  auto* zs = app.add_subcommand("zeroshot", "prompt-based zero-shot classification");
  struct {
    std::string model, vocab, prompts, input, text_embeddings, output;
  } z;
  zs->add_option("--model", z.model)->required();
  zs->add_option("--vocab", z.vocab)->required();
  zs->add_option("--prompts", z.prompts, "label<TAB>template file")->required();
  zs->add_option("--input", z.input, "disassembly text file")->required();
  zs->add_option("--text-embeddings", z.text_embeddings);
  zs->add_option("-o,--output", z.output, "write the result JSON here too");

  // ---- eval-retrieval ----
  auto* er = app.add_subcommand("eval-retrieval", "MRR / Recall@1 with pool sampling");
  struct {
    std::string queries, candidates, vocab, model, output;
    std::size_t pool = 32, trials = 1, workers = 1;
    std::uint64_t seed = 0;
  } rv;
  er->add_option("--queries", rv.queries)->required();
  er->add_option("--candidates", rv.candidates)->required();
  er->add_option("--vocab", rv.vocab)->required();
  er->add_option("--model", rv.model)->required();
  er->add_option("--pool", rv.pool);
  er->add_option("--trials", rv.trials);
  er->add_option("--workers", rv.workers);
  er->add_option("--seed", rv.seed)->required();
  er->add_option("-o,--output", rv.output, "metrics JSON path");

  // ---- probe ----
  auto* pr = app.add_subcommand("probe", "linear probe on frozen embeddings");
  struct {
    std::string train, eval, vocab, model, output;
    std::size_t label_index = 0, epochs = 300;
    double lr = 0.1;
  } pb;
  pr->add_option("--train", pb.train)->required();
  pr->add_option("--eval", pb.eval)->required();
  pr->add_option("--vocab", pb.vocab)->required();
  pr->add_option("--model", pb.model)->required();
  pr->add_option("--label-index", pb.label_index, "which label column is the class");
  pr->add_option("--epochs", pb.epochs);
  pr->add_option("--lr", pb.lr);
  pr->add_option("-o,--output", pb.output);

  // ---- fewshot ----
  auto* fs = app.add_subcommand("fewshot", "k-shot linear probes, 5 trials per k");
  struct {
    std::string corpus, vocab, model, output;
    std::vector<std::size_t> ks = {1, 2, 4, 8, 16};
    std::size_t trials = 5, label_index = 0, epochs = 300;
    std::uint64_t seed = 0;
    double lr = 0.1;
  } fw;
  fs->add_option("--corpus", fw.corpus)->required();
  fs->add_option("--vocab", fw.vocab)->required();
  fs->add_option("--model", fw.model)->required();
  fs->add_option("--ks", fw.ks, "shot counts");
  fs->add_option("--trials", fw.trials);
  fs->add_option("--label-index", fw.label_index);
  fs->add_option("--epochs", fw.epochs);
  fs->add_option("--lr", fw.lr);
  fs->add_option("--seed", fw.seed)->required();
  fs->add_option("-o,--output", fw.output);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      if (syn.templates != "builtin") throw Error("unknown template set: " + syn.templates);
      PerturbationConfig pcfg;
      pcfg.register_rename = !syn.no_rename;
      pcfg.independent_reorder = !syn.no_reorder;
      pcfg.block_shuffle = !syn.no_shuffle;
      pcfg.nop_insertion_rate = syn.nop_rate;
      auto examples = generate_corpus(builtin_templates(), syn.variants, pcfg, syn.seed);
      auto records = to_records(examples);
      if (syn.holdout_variants > 0) {
        if (syn.holdout_output.empty()) throw Error("--holdout-output required with holdout");
        if (syn.holdout_variants >= syn.variants)
          throw Error("--holdout-variants must be < --variants");
        std::vector<CorpusRecord> main_records, holdout;
        std::size_t keep = syn.variants - syn.holdout_variants;
        for (std::size_t i = 0; i < records.size(); ++i)
          ((i % syn.variants) < keep ? main_records : holdout).push_back(records[i]);
        write_corpus(syn.output, main_records);
        write_corpus(syn.holdout_output, holdout);
        write_manifest(syn.holdout_output, "synth",
                       {{"seed", syn.seed}, {"role", "holdout"}});
      } else {
        write_corpus(syn.output, records);
      }
      json opts{{"templates", syn.templates}, {"variants", syn.variants},
                {"seed", syn.seed},           {"nop_rate", syn.nop_rate},
                {"register_rename", pcfg.register_rename},
                {"independent_reorder", pcfg.independent_reorder},
                {"block_shuffle", pcfg.block_shuffle},
                {"holdout_variants", syn.holdout_variants}};
      write_manifest(syn.output, "synth", opts);
      std::cerr << "wrote " << syn.output << "\n";
    } else if (*tok) {
      auto pairs = load_pairs(tk.corpus);
      std::vector<std::string> texts;
      for (const auto& p : pairs) texts.push_back(tokenizer_training_text(rebase(p.function)));
      Vocab v = train_wordpiece(texts, tk.vocab_size, tk.min_freq, tk.max_instructions);
      v.save(tk.output);
      write_manifest(tk.output, "tok-train",
                     {{"corpus", tk.corpus},
                      {"vocab_size", tk.vocab_size},
                      {"min_freq", tk.min_freq},
                      {"max_instructions", tk.max_instructions}});
      std::cerr << "wrote " << tk.output << " (" << v.size() << " tokens)\n";
    } else if (*pre) {
      auto pairs = load_pairs(pt.corpus);
      Vocab vocab = Vocab::load(pt.vocab);
      EncoderModel<float> model;
      if (!pt.resume.empty()) {
        model = load_encoder<float>(pt.resume);
      } else {
        EncoderConfig cfg;
        cfg.vocab_size = vocab.size();
        cfg.max_seq_len = pt.max_seq_len;
        cfg.max_instructions = vocab.max_instructions();
        cfg.hidden_dim = pt.dim;
        cfg.layers = pt.layers;
        cfg.heads = pt.heads;
        model = EncoderModel<float>::init(cfg, pt.init_seed);
      }
      std::vector<TokenSequence> seqs;
      for (const auto& p : pairs)
        seqs.push_back(encode(rebase(p.function), vocab, model.config.max_seq_len));
      PretrainConfig cfg;
      cfg.steps = pt.steps;
      cfg.batch_size = pt.batch;
      cfg.mlm_rate = pt.mlm_rate;
      cfg.jtp_rate = pt.jtp_rate;
      cfg.adam.lr = pt.lr;
      cfg.seed = pt.seed;
      cfg.checkpoint_interval = pt.ckpt_interval;
      cfg.checkpoint_path = pt.output;
      auto curve = run_pretraining(seqs, model, vocab, cfg);
      if (!pt.curve.empty()) write_loss_curve(pt.curve, curve);
      json opts{{"corpus", pt.corpus}, {"vocab", pt.vocab},     {"seed", pt.seed},
                {"steps", pt.steps},   {"batch", pt.batch},     {"lr", pt.lr},
                {"dim", pt.dim},       {"layers", pt.layers},   {"heads", pt.heads},
                {"mlm_rate", pt.mlm_rate}, {"jtp_rate", pt.jtp_rate},
                {"init_seed", pt.init_seed}, {"resume", pt.resume}};
      write_manifest(pt.output, "pretrain", opts);
      if (!curve.empty())
        std::cerr << "pretrain done: loss " << curve.front().total << " -> "
                  << curve.back().total << "\n";
    } else if (*al) {
      auto pairs = load_pairs(ac.corpus);
      Vocab vocab = Vocab::load(ac.vocab);
      EncoderModel<float> enc;
      if (!ac.init_from.empty()) {
        enc = load_encoder<float>(ac.init_from);
        enc.params.set_step_count(0);
      } else {
        EncoderConfig cfg;
        cfg.vocab_size = vocab.size();
        cfg.max_seq_len = ac.max_seq_len;
        cfg.max_instructions = vocab.max_instructions();
        cfg.hidden_dim = ac.dim;
        cfg.layers = ac.layers;
        cfg.heads = ac.heads;
        enc = EncoderModel<float>::init(cfg, ac.init_seed);
      }
      AlignConfig acfg;
      acfg.text_dim = ac.text_dim;
      acfg.text_buckets = ac.text_buckets;
      acfg.temperature = ac.temperature;
      acfg.learnable_temperature = ac.learnable_temp;
      acfg.normalize = !ac.no_normalize;
      acfg.symmetric = ac.symmetric;
      acfg.text_encoder_kind = ac.text_encoder;
      AlignModel<float> model = AlignModel<float>::init(enc, acfg, ac.init_seed);
      std::unique_ptr<TextEncoder<float>> text;
      if (acfg.text_encoder_kind == "bag") {
        text = std::make_unique<BagTextEncoder<float>>(&model.params, acfg.text_buckets,
                                                       acfg.text_dim);
      } else if (acfg.text_encoder_kind == "precomputed") {
        if (ac.text_embeddings.empty()) throw Error("--text-embeddings required");
        text = std::make_unique<PrecomputedTextEncoder<float>>(ac.text_embeddings);
      } else {
        throw Error("unknown text encoder: " + acfg.text_encoder_kind);
      }
      AlignTrainConfig tcfg;
      tcfg.steps = ac.steps;
      tcfg.batch_size = ac.batch;
      tcfg.adam.lr = ac.lr;
      tcfg.seed = ac.seed;
      tcfg.allow_group_repeats = ac.allow_group_repeats;
      tcfg.checkpoint_path = ac.output;
      auto curve = run_alignment(pairs, model, *text, vocab, tcfg);
      if (!ac.curve.empty()) write_align_curve(ac.curve, curve);
      json opts{{"corpus", ac.corpus},       {"vocab", ac.vocab},
                {"seed", ac.seed},           {"steps", ac.steps},
                {"batch", ac.batch},         {"lr", ac.lr},
                {"temperature", ac.temperature},
                {"learnable_temperature", ac.learnable_temp},
                {"normalize", !ac.no_normalize},
                {"symmetric", ac.symmetric}, {"text_encoder", ac.text_encoder},
                {"init_from", ac.init_from}, {"init_seed", ac.init_seed},
                {"allow_group_repeats", ac.allow_group_repeats}};
      write_manifest(ac.output, "align", opts);
      if (!curve.empty())
        std::cerr << "align done: loss " << curve.front().loss << " -> " << curve.back().loss
                  << ", in-batch recall@1 " << curve.back().in_batch_recall1 << "\n";
    } else if (*em) {
      auto pairs = load_pairs(eb.corpus);
      Vocab vocab = Vocab::load(eb.vocab);
      LoadedModel model = load_model(eb.model);
      auto embedded = embed_corpus(model, vocab, pairs);
      export_embeddings(embedded.ids, embedded.embeddings, eb.output);
      write_manifest(eb.output, "embed",
                     {{"corpus", eb.corpus}, {"vocab", eb.vocab}, {"model", eb.model}});
      std::cerr << "wrote " << eb.output << " (" << embedded.ids.size() << " rows)\n";
    } else if (*zs) {
      Vocab vocab = Vocab::load(z.vocab);
      AlignModel<float> model = load_align<float>(z.model);
      auto text = make_text_encoder(model, z.text_embeddings);
      auto entries = read_prompt_templates(z.prompts);
      auto ps = build_prompt_set(entries, model, *text);
      auto f = parse_disassembly(read_file(z.input));
      auto seq = encode(rebase(f), vocab, model.encoder_config.max_seq_len);
      Tensor<float> emb = model.embed_assembly(seq);
      auto result = zero_shot_classify(emb, ps);
      json out;
      out["label"] = ps.labels[result.label_index];
      json probs = json::object();
      for (std::size_t i = 0; i < ps.labels.size(); ++i)
        probs[ps.labels[i]] = result.probabilities[i];
      out["probabilities"] = probs;
      std::cout << out.dump(2) << "\n";
      if (!z.output.empty()) {
        std::ofstream os(z.output, std::ios::binary);
        os << out.dump(2) << "\n";
        write_manifest(z.output, "zeroshot",
                       {{"model", z.model}, {"prompts", z.prompts}, {"input", z.input}});
      }
    } else if (*er) {
      Vocab vocab = Vocab::load(rv.vocab);
      LoadedModel model = load_model(rv.model);
      auto queries = embed_corpus(model, vocab, load_pairs(rv.queries));
      auto candidates = embed_corpus(model, vocab, load_pairs(rv.candidates));
      auto to_items = [](const EmbeddedCorpus& c) {
        std::vector<EmbeddedItem<float>> items(c.ids.size());
        for (std::size_t i = 0; i < c.ids.size(); ++i) {
          items[i].id = c.ids[i];
          items[i].group = c.groups[i];
          items[i].embedding.assign(c.embeddings.data.begin() + i * c.embeddings.cols(),
                                    c.embeddings.data.begin() + (i + 1) * c.embeddings.cols());
        }
        return items;
      };
      RetrievalConfig cfg{rv.pool, rv.seed, rv.trials, rv.workers};
      auto report = retrieval_eval(to_items(queries), to_items(candidates), cfg);
      std::cout << report.to_json().dump(2) << "\n";
      if (!rv.output.empty()) {
        std::ofstream os(rv.output, std::ios::binary);
        os << report.to_json().dump(2) << "\n";
        write_manifest(rv.output, "eval-retrieval",
                       {{"queries", rv.queries},
                        {"candidates", rv.candidates},
                        {"pool", rv.pool},
                        {"seed", rv.seed},
                        {"trials", rv.trials}});
      }
    } else if (*pr) {
      Vocab vocab = Vocab::load(pb.vocab);
      LoadedModel model = load_model(pb.model);
      auto train = embed_corpus(model, vocab, load_pairs(pb.train));
      auto eval = embed_corpus(model, vocab, load_pairs(pb.eval));
      std::vector<std::vector<std::string>> all_labels = train.labels;
      all_labels.insert(all_labels.end(), eval.labels.begin(), eval.labels.end());
      auto classes = class_set(all_labels, pb.label_index);
      std::vector<int> ty, ey;
      for (const auto& l : train.labels) ty.push_back(class_of(l, pb.label_index, classes));
      for (const auto& l : eval.labels) ey.push_back(class_of(l, pb.label_index, classes));
      ProbeConfig pcfg{pb.epochs, pb.lr};
      double acc =
          linear_probe(train.embeddings, ty, eval.embeddings, ey, classes.size(), pcfg);
      MetricsReport report;
      report.accuracy = acc;
      report.breakdown["classes"] = static_cast<double>(classes.size());
      std::cout << report.to_json().dump(2) << "\n";
      if (!pb.output.empty()) {
        std::ofstream os(pb.output, std::ios::binary);
        os << report.to_json().dump(2) << "\n";
        write_manifest(pb.output, "probe",
                       {{"train", pb.train}, {"eval", pb.eval}, {"model", pb.model}});
      }
    } else if (*fs) {
      Vocab vocab = Vocab::load(fw.vocab);
      LoadedModel model = load_model(fw.model);
      auto corpus = embed_corpus(model, vocab, load_pairs(fw.corpus));
      auto classes = class_set(corpus.labels, fw.label_index);
      std::vector<int> y;
      for (const auto& l : corpus.labels) y.push_back(class_of(l, fw.label_index, classes));
      ProbeConfig pcfg{fw.epochs, fw.lr};
      auto report = few_shot_eval(corpus.embeddings, y, classes.size(), fw.ks, fw.trials,
                                  fw.seed, pcfg);
      std::cout << report.to_json().dump(2) << "\n";
      if (!fw.output.empty()) {
        std::ofstream os(fw.output, std::ios::binary);
        os << report.to_json().dump(2) << "\n";
        write_manifest(fw.output, "fewshot",
                       {{"corpus", fw.corpus},
                        {"model", fw.model},
                        {"seed", fw.seed},
                        {"trials", fw.trials}});
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
