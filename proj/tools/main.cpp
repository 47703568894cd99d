#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "commkit/graph.hpp"
#include "commkit/lpa.hpp"
#include "commkit/metrics.hpp"
#include "commkit/serialize.hpp"
#include "commkit/train.hpp"

namespace fs = std::filesystem;
using namespace commkit;

namespace {

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f.flush()) throw std::runtime_error("write failed for " + path.string());
}

struct TrainOptions {
  std::string edges, attrs, labels, out, truth;
  TrainConfig cfg;
  bool row_normalize = false;
  bool no_masking = false;
  std::vector<std::uint64_t> seeds;
};

std::string echo_train_config(const TrainOptions& opt, std::uint64_t seed) {
  std::string s = "# commkit train configuration echo\n";
  s += "edges=" + opt.edges + "\n";
  s += "attrs=" + opt.attrs + "\n";
  if (!opt.labels.empty()) s += "labels=" + opt.labels + "\n";
  s += "out=" + opt.out + "\n";
  s += "seed=" + std::to_string(seed) + "\n";
  s += "alpha=" + full_precision(opt.cfg.alpha) + "\n";
  s += "beta=" + full_precision(opt.cfg.beta) + "\n";
  s += "k-max=" + std::to_string(opt.cfg.k_max) + "\n";
  s += "mask-fraction=" + full_precision(opt.cfg.mask_fraction) + "\n";
  s += "max-epochs=" + std::to_string(opt.cfg.max_epochs) + "\n";
  s += "eval-every=" + std::to_string(opt.cfg.eval_every) + "\n";
  s += "lr=" + full_precision(opt.cfg.lr) + "\n";
  s += "weight-decay=" + full_precision(opt.cfg.weight_decay) + "\n";
  s += "hidden=" + std::to_string(opt.cfg.hidden_dim) + "\n";
  s += "heads=" + std::to_string(opt.cfg.n_heads) + "\n";
  s += "readout-hidden=" + std::to_string(opt.cfg.readout_hidden) + "\n";
  s += "dropout=" + full_precision(opt.cfg.dropout) + "\n";
  if (opt.cfg.bpr_mean) s += "bpr-mean=true\n";
  if (opt.no_masking) s += "no-masking=true\n";
  if (opt.row_normalize) s += "row-normalize-attrs=true\n";
  return s;
}

void run_one_fit(const AttributedGraph& g, TrainOptions opt, std::uint64_t seed,
                 const fs::path& out_dir) {
  opt.cfg.seed = seed;
  opt.cfg.masking = !opt.no_masking;
  fs::create_directories(out_dir);

  FitResult result = fit(g, opt.cfg);
  if (!result.any_valid)
    std::cerr << "warning: seed " << seed << ": no checkpoint reached K >= 2; best is epoch "
              << result.best.epoch << "\n";
  if (result.zero_norm_seen)
    std::cerr << "note: seed " << seed << ": zero-norm row guarded in the cosine loss\n";
  if (result.negatives_skipped > 0)
    std::cerr << "warning: seed " << seed << ": " << result.negatives_skipped
              << " negative draws hit the attempt cap and were skipped\n";

  write_partition((out_dir / "partition.txt").string(), result.best.partition);
  write_history((out_dir / "history.tsv").string(), result.history);

  ModelConfig mc = opt.cfg.model_config(g.n_features);
  save_checkpoint((out_dir / "checkpoint.bin").string(), mc, result.best.parameters);

  PartitionScores scores = result.best.scores;
  if (g.labels) scores = score_against_truth(g, result.best.partition, *g.labels, scores);
  write_file(out_dir / "report.txt", format_report(scores));
  write_file(out_dir / "config.echo", echo_train_config(opt, seed));

  std::string line = "seed=" + std::to_string(seed) + " epoch=" + std::to_string(result.best.epoch) +
                     " K=" + std::to_string(scores.k) +
                     " modularity=" + full_precision(scores.modularity) +
                     " semantic=" + full_precision(scores.calinski_harabasz) +
                     " product=" + full_precision(scores.product);
  if (scores.has_supervised)
    line += " nmi=" + full_precision(scores.nmi) + " edge=" + full_precision(scores.edge);
  std::cout << line << "\n";
}

int cmd_generate(const PlantedSpec& spec, const std::string& out) {
  AttributedGraph g = generate_planted_graph(spec);
  fs::path dir(out);
  fs::create_directories(dir);
  save_graph(g, (dir / "edges.txt").string(), (dir / "attrs.txt").string(),
             (dir / "labels.txt").string());
  std::string echo = "# commkit generate configuration echo\n";
  echo += "n=" + std::to_string(spec.n_nodes) + "\n";
  echo += "k=" + std::to_string(spec.k_true) + "\n";
  echo += "p-in=" + full_precision(spec.p_in) + "\n";
  echo += "p-out=" + full_precision(spec.p_out) + "\n";
  echo += "attr-dim=" + std::to_string(spec.attr_dim) + "\n";
  echo += "sep=" + full_precision(spec.attr_separation) + "\n";
  echo += "seed=" + std::to_string(spec.seed) + "\n";
  echo += "out=" + out + "\n";
  write_file(dir / "config.echo", echo);
  std::cout << "generated n=" << g.n_nodes << " edges=" << g.n_edges() << " k=" << spec.k_true
            << " attr_dim=" << spec.attr_dim << " sep=" << full_precision(spec.attr_separation)
            << " seed=" << spec.seed << " out=" << out << "\n";
  return 0;
}

int cmd_train(const TrainOptions& opt) {
  AttributedGraph g = load_graph(opt.edges, opt.attrs, opt.labels);
  if (opt.row_normalize) row_normalize_attributes(g);

  if (opt.seeds.size() <= 1) {
    std::uint64_t seed = opt.seeds.empty() ? opt.cfg.seed : opt.seeds[0];
    run_one_fit(g, opt, seed, fs::path(opt.out));
    return 0;
  }
  // independent fits, one thread per seed, outputs under seed_<s>/
  std::vector<std::thread> workers;
  std::vector<std::string> errors(opt.seeds.size());
  for (std::size_t i = 0; i < opt.seeds.size(); ++i) {
    workers.emplace_back([&, i]() {
      try {
        const std::uint64_t s = opt.seeds[i];
        run_one_fit(g, opt, s, fs::path(opt.out) / ("seed_" + std::to_string(s)));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const std::string& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  return 0;
}

struct EvalOptions {
  std::string edges, attrs, labels, partition, truth, out;
  bool row_normalize = false;
  bool lpa = false;
  std::uint64_t lpa_seed = 0;
};

int cmd_eval(const EvalOptions& opt) {
  AttributedGraph g = load_graph(opt.edges, opt.attrs, opt.labels);
  if (opt.row_normalize) row_normalize_attributes(g);

  std::vector<int> partition;
  if (opt.lpa)
    partition = label_propagation(g, opt.lpa_seed);
  else
    partition = read_partition(opt.partition, g.n_nodes);

  PartitionScores scores = evaluate_partition(g, partition);
  if (!opt.truth.empty()) {
    std::vector<int> truth = read_partition(opt.truth, g.n_nodes);
    scores = score_against_truth(g, partition, truth, scores);
  } else if (g.labels) {
    scores = score_against_truth(g, partition, *g.labels, scores);
  }

  std::string report = format_report(scores);
  std::cout << report;
  if (!opt.out.empty()) {
    fs::path dir(opt.out);
    fs::create_directories(dir);
    write_file(dir / "report.txt", report);
    std::string echo = "# commkit eval configuration echo\n";
    echo += "edges=" + opt.edges + "\n";
    echo += "attrs=" + opt.attrs + "\n";
    if (!opt.labels.empty()) echo += "labels=" + opt.labels + "\n";
    if (!opt.partition.empty()) echo += "partition=" + opt.partition + "\n";
    if (!opt.truth.empty()) echo += "truth=" + opt.truth + "\n";
    if (opt.lpa) echo += "lpa=true\nlpa-seed=" + std::to_string(opt.lpa_seed) + "\n";
    if (opt.row_normalize) echo += "row-normalize-attrs=true\n";
    echo += "out=" + opt.out + "\n";
    write_file(dir / "config.echo", echo);
  }
  return 0;
}

// Expands `--config FILE` (or --config=FILE) into --key=value tokens at the
// point of the flag; later command-line flags override with take-last policy.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw std::runtime_error("--config needs a file path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos || eq == 0)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected key=value");
      out.push_back("--" + line.substr(0, eq) + "=" + line.substr(eq + 1));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"community detection with adaptive community count"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_doc_sink;  // --config is expanded before parsing; declared for --help

  // generate
  auto* gen = app.add_subcommand("generate", "write a planted-partition attributed graph");
  PlantedSpec spec;
  std::string gen_out;
  gen->add_option("--n", spec.n_nodes, "node count")->required();
  gen->add_option("--k", spec.k_true, "planted community count")->required();
  gen->add_option("--p-in", spec.p_in, "intra-block edge probability")->required();
  gen->add_option("--p-out", spec.p_out, "inter-block edge probability")->required();
  gen->add_option("--attr-dim", spec.attr_dim, "attribute dimension");
  gen->add_option("--sep", spec.attr_separation, "distance between cluster attribute means");
  gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--config", config_doc_sink, "key=value config file; later flags override");

  // train
  auto* tr = app.add_subcommand("train", "fit the model and write the best partition");
  TrainOptions topt;
  std::string seeds_csv;
  tr->add_option("--edges", topt.edges, "edge list file")->required();
  tr->add_option("--attrs", topt.attrs, "attribute matrix file")->required();
  tr->add_option("--labels", topt.labels, "ground-truth label file (optional)");
  tr->add_option("--out", topt.out, "output directory")->required();
  tr->add_option("--seed", topt.cfg.seed, "training seed");
  tr->add_option("--seeds", seeds_csv, "comma-separated seed list; fits run concurrently");
  tr->add_option("--alpha", topt.cfg.alpha, "edge-ranking loss weight");
  tr->add_option("--beta", topt.cfg.beta, "group-sparsity loss weight");
  tr->add_option("--k-max", topt.cfg.k_max, "maximum community count");
  tr->add_option("--mask-fraction", topt.cfg.mask_fraction, "fraction of nodes masked per epoch");
  tr->add_option("--max-epochs", topt.cfg.max_epochs, "training epochs");
  tr->add_option("--eval-every", topt.cfg.eval_every, "checkpoint cadence in epochs");
  tr->add_option("--lr", topt.cfg.lr, "Adam learning rate");
  tr->add_option("--weight-decay", topt.cfg.weight_decay, "decoupled weight decay");
  tr->add_option("--hidden", topt.cfg.hidden_dim, "embedding width");
  tr->add_option("--heads", topt.cfg.n_heads, "attention heads per layer");
  tr->add_option("--readout-hidden", topt.cfg.readout_hidden, "readout hidden width (0 = hidden)");
  tr->add_option("--dropout", topt.cfg.dropout, "input-layer dropout rate");
  tr->add_flag("--bpr-mean", topt.cfg.bpr_mean, "normalize the ranking loss by |E|");
  tr->add_flag("--no-masking", topt.no_masking, "ablation: reconstruct clean attributes");
  tr->add_flag("--row-normalize-attrs", topt.row_normalize, "L1-normalize attribute rows on load");
  tr->add_option("--config", config_doc_sink, "key=value config file; later flags override");

  // eval
  auto* ev = app.add_subcommand("eval", "score a stored partition");
  EvalOptions eopt;
  ev->add_option("--edges", eopt.edges, "edge list file")->required();
  ev->add_option("--attrs", eopt.attrs, "attribute matrix file")->required();
  ev->add_option("--labels", eopt.labels, "ground-truth label file (optional)");
  auto* popt = ev->add_option("--partition", eopt.partition,
                              "partition file ('node community' or one label per line)");
  ev->add_option("--truth", eopt.truth, "reference partition file (overrides --labels)");
  ev->add_option("--out", eopt.out, "output directory (report + config echo)");
  auto* lpa_flag = ev->add_flag("--lpa", eopt.lpa, "score a label-propagation baseline instead");
  ev->add_option("--lpa-seed", eopt.lpa_seed, "label propagation seed");
  ev->add_flag("--row-normalize-attrs", eopt.row_normalize, "L1-normalize attribute rows on load");
  ev->add_option("--config", config_doc_sink, "key=value config file; later flags override");
  popt->excludes(lpa_flag);

  try {
    std::vector<std::string> args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11's vector overload wants reversed args
    app.parse(std::move(args));
    if (gen->parsed()) return cmd_generate(spec, gen_out);
    if (tr->parsed()) {
      if (!seeds_csv.empty()) {
        std::stringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) topt.seeds.push_back(std::stoull(tok));
      }
      return cmd_train(topt);
    }
    if (ev->parsed()) {
      if (!eopt.lpa && eopt.partition.empty())
        throw CLI::RequiredError("--partition (or --lpa)");
      return cmd_eval(eopt);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
