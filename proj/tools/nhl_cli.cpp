// Command-line front end: build/analyze/extract/train/eval/verify/compare
// plus the synth data writer and the expert-count helper.
// Exit codes: 0 success, 1 validation failure, 2 I/O error.

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "nhl/builders.hpp"
#include "nhl/checkpoint.hpp"
#include "nhl/cost.hpp"
#include "nhl/dataset.hpp"
#include "nhl/expert.hpp"
#include "nhl/train.hpp"
#include "nhl/verify.hpp"

namespace {

using namespace nhl;

Shape3 parse_shape(const std::string& text) {
  Shape3 s;
  char x1, x2;
  std::istringstream in(text);
  if (!(in >> s.c >> x1 >> s.h >> x2 >> s.w) || x1 != 'x' || x2 != 'x' || s.c < 1 || s.h < 1 || s.w < 1) {
    throw ValidationError("MalformedDocument", "expected CxHxW, got \"" + text + "\"");
  }
  return s;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("MalformedDocument", std::string(what) + ": bad integer \"" + item + "\"");
    }
  }
  if (out.empty()) {
    throw ValidationError("MalformedDocument", std::string(what) + ": empty list");
  }
  return out;
}

void write_text(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out.write(bytes.data(), static_cast<long>(bytes.size()))) {
    throw IoError("WriteFailed", "cannot write " + path);
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("FileOpenFailed", "cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset load_dataset(const std::string& dir, const std::string& kind) {
  if (kind == "cifar10") return load_cifar10_binary(dir);
  if (kind == "idx") {
    namespace fs = std::filesystem;
    Dataset train = load_idx(fs::path(dir) / "train-images-idx3-ubyte", fs::path(dir) / "train-labels-idx1-ubyte");
    const fs::path ti = fs::path(dir) / "t10k-images-idx3-ubyte";
    if (!fs::exists(ti)) return train;
    Dataset test = load_idx(ti, fs::path(dir) / "t10k-labels-idx1-ubyte");
    // Concatenate: train pair first, test pair as the val split.
    Dataset all;
    all.source = "idx";
    all.norm_mean = train.norm_mean;
    all.norm_std = train.norm_std;
    all.train_count = train.size();
    all.labels = train.labels;
    all.labels.insert(all.labels.end(), test.labels.begin(), test.labels.end());
    all.images = Tensor<float>({train.size() + test.size(), train.images.dim(1), train.images.dim(2),
                                train.images.dim(3)});
    std::copy(train.images.data.begin(), train.images.data.end(), all.images.data.begin());
    std::copy(test.images.data.begin(), test.images.data.end(),
              all.images.data.begin() + train.images.data.size());
    return all;
  }
  throw ValidationError("MalformedDocument", "unknown dataset kind \"" + kind + "\" (cifar10|idx)");
}

int run(int argc, char** argv) {
  CLI::App app{"Taxonomy-branched classification networks with extractable experts"};
  app.require_subcommand(1);

  // --- build -------------------------------------------------------------
  auto* build = app.add_subcommand("build", "Build a baseline or branched graph and write it as JSON");
  std::string build_backbone = "resnet50", build_tax, build_schedule, build_out;
  int baseline_classes = 0, blocks_per_node = 1, level1_stride = 2, reduction_div = 4;
  bool small_image = false;
  build->add_option("--backbone", build_backbone, "Backbone (resnet50)");
  build->add_option("--taxonomy", build_tax, "Taxonomy JSON driving the branch hierarchy");
  build->add_option("--baseline-classes", baseline_classes, "Emit the conventional baseline with K classes");
  build->add_option("--branch-schedule", build_schedule, "Per-level branch widths, e.g. 128,64,32");
  build->add_option("--blocks-per-node", blocks_per_node, "Residual units per branch node");
  build->add_option("--level1-stride", level1_stride, "Stride of the first level-1 branch unit");
  build->add_option("--bottleneck-reduction", reduction_div, "Mid-channel divisor inside branch units");
  build->add_flag("--small-image", small_image, "32x32 trunk variant (stride-1 stem, no stem pool)");
  build->add_option("--out", build_out, "Output graph path")->required();
  build->callback([&] {
    if (build_backbone != "resnet50") {
      throw ValidationError("UnsupportedBackbone", "only resnet50 is supported");
    }
    TrunkOptions opts{small_image};
    ComputeGraph g;
    if (baseline_classes > 0) {
      g = build_baseline_resnet50(baseline_classes, opts);
    } else {
      if (build_tax.empty()) {
        throw ValidationError("MalformedDocument", "--taxonomy or --baseline-classes is required");
      }
      BranchConfig cfg;
      cfg.blocks_per_node = blocks_per_node;
      cfg.level1_stride = level1_stride;
      cfg.bottleneck_reduction = reduction_div;
      if (!build_schedule.empty()) cfg.channel_schedule = parse_int_list(build_schedule, "--branch-schedule");
      g = build_nhl(build_trunk(Backbone::resnet50, opts), Taxonomy::load(build_tax), cfg);
    }
    g.save(build_out);
    const CostReport cost = analyze_cost(g, g.input_shape);
    std::cout << "wrote " << build_out << ": " << g.nodes().size() << " nodes, "
              << format_params_m(cost.total_params) << " params, " << format_gmacs(cost.total_macs)
              << " GMACs at " << g.input_shape.c << "x" << g.input_shape.h << "x" << g.input_shape.w
              << "\n";
  });

  // --- analyze -----------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Static parameter and MAC accounting for a graph");
  std::string an_graph, an_input, an_format = "json", an_out;
  bool an_elementwise = false;
  analyze->add_option("--graph", an_graph)->required();
  analyze->add_option("--input", an_input, "Input shape CxHxW (default: the graph's)");
  analyze->add_flag("--include-elementwise", an_elementwise,
                    "Count one MAC-equivalent per output element of norms/activations/pools/adds");
  analyze->add_option("--format", an_format)->check(CLI::IsMember({"json", "csv"}));
  analyze->add_option("--out", an_out, "Report path (default: stdout)");
  analyze->callback([&] {
    const ComputeGraph g = ComputeGraph::load(an_graph);
    const Shape3 shape = an_input.empty() ? g.input_shape : parse_shape(an_input);
    const CostReport r = analyze_cost(g, shape, Convention{an_elementwise});
    const std::string bytes =
        export_report(r, an_format == "csv" ? ReportFormat::csv : ReportFormat::json);
    if (an_out.empty()) {
      std::cout << bytes;
    } else {
      write_text(an_out, bytes);
      std::cout << "params " << r.total_params << " (" << format_params_m(r.total_params) << "), macs "
                << r.total_macs << " (" << format_gmacs(r.total_macs) << " GMACs)"
                << (an_elementwise ? " [elementwise included]" : "") << " -> " << an_out << "\n";
    }
  });

  // --- extract -----------------------------------------------------------
  auto* extract = app.add_subcommand("extract", "Extract an expert subgraph for a category subset");
  std::string ex_graph, ex_tax, ex_cats, ex_out;
  bool keep_whole_heads = false;
  extract->add_option("--graph", ex_graph)->required();
  extract->add_option("--taxonomy", ex_tax)->required();
  extract->add_option("--categories", ex_cats, "Comma-separated category indices")->required();
  extract->add_flag("--keep-whole-heads", keep_whole_heads, "Do not slice partially used head FCs");
  extract->add_option("--out", ex_out)->required();
  extract->callback([&] {
    const ComputeGraph full = ComputeGraph::load(ex_graph);
    const Taxonomy tax = Taxonomy::load(ex_tax);
    ExpertSpec spec{parse_int_list(ex_cats, "--categories")};
    const ComputeGraph expert = extract_expert(full, tax, spec, keep_whole_heads);
    expert.save(ex_out);
    const CostReport base = analyze_cost(full, full.input_shape);
    const CostReport variant = analyze_cost(expert, expert.input_shape);
    const ReductionReport red = reduction(base, variant);
    std::cout << "wrote " << ex_out << ": " << expert.nodes().size() << "/" << full.nodes().size()
              << " nodes, params " << format_params_m(variant.total_params) << " ("
              << format_reduction(red.param_reduction) << "), GMACs " << format_gmacs(variant.total_macs)
              << " (" << format_reduction(red.mac_reduction) << ")\n";
  });

  // --- train ---------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train a graph on a local dataset (desk scale)");
  std::string tr_graph, tr_data, tr_dataset = "cifar10", tr_out, tr_metrics, tr_opt = "sgd";
  TrainConfig tc;
  tr->add_option("--graph", tr_graph)->required();
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--dataset", tr_dataset)->check(CLI::IsMember({"cifar10", "idx"}));
  tr->add_option("--epochs", tc.epochs);
  tr->add_option("--batch", tc.batch_size);
  tr->add_option("--lr", tc.lr);
  tr->add_option("--optimizer", tr_opt)->check(CLI::IsMember({"sgd", "adam"}));
  tr->add_option("--momentum", tc.momentum);
  tr->add_option("--weight-decay", tc.weight_decay);
  tr->add_option("--seed", tc.seed);
  tr->add_option("--out", tc.checkpoint_path, "Checkpoint path (written every epoch)")->required();
  tr->add_option("--metrics", tr_metrics, "Write the metrics log CSV here");
  tr->callback([&] {
    const ComputeGraph g = infer_shapes(ComputeGraph::load(tr_graph));
    const Dataset data = load_dataset(tr_data, tr_dataset);
    tc.optimizer = tr_opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    const TrainResult result = train(g, data, tc, [](const EpochMetrics& m) {
      std::cout << "epoch " << m.epoch << ": train_loss " << m.train_loss << ", val_top1 " << m.val_top1
                << std::endl;
    });
    if (!tr_metrics.empty()) write_text(tr_metrics, metrics_csv(result.log));
    std::cout << "checkpoint -> " << tc.checkpoint_path << "\n";
  });

  // --- eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint on a dataset split");
  std::string ev_graph, ev_ckpt, ev_data, ev_dataset = "cifar10", ev_cats, ev_tax;
  bool ev_force = false, ev_train_split = false;
  ev->add_option("--graph", ev_graph, "Graph the checkpoint was trained for")->required();
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--dataset", ev_dataset)->check(CLI::IsMember({"cifar10", "idx"}));
  ev->add_option("--categories", ev_cats, "Restrict argmax and samples to this category subset");
  ev->add_option("--taxonomy", ev_tax, "With --categories: evaluate the extracted expert instead");
  ev->add_flag("--force", ev_force, "Skip the graph-hash check");
  ev->add_flag("--train-split", ev_train_split, "Evaluate on the train split instead of val");
  ev->callback([&] {
    ComputeGraph g = infer_shapes(ComputeGraph::load(ev_graph));
    Checkpoint ck = load_checkpoint(ev_ckpt);
    require_graph_match(ck, g, ev_force);
    const Dataset data = load_dataset(ev_data, ev_dataset);
    std::optional<ExpertSpec> subset;
    if (!ev_cats.empty()) subset = ExpertSpec{parse_int_list(ev_cats, "--categories")};
    if (subset && !ev_tax.empty()) {
      g = infer_shapes(extract_expert(g, Taxonomy::load(ev_tax), *subset));
    }
    const long long begin = ev_train_split ? 0 : data.train_count;
    const long long end = ev_train_split ? data.train_count : data.size();
    const double top1 = evaluate(g, ck.store, data, begin, end, subset);
    std::cout << "top1 " << top1 << " (" << (ev_train_split ? "train" : "val") << " split"
              << (subset ? ", restricted" : "") << ")\n";
  });

  // --- verify --------------------------------------------------------------
  auto* vf = app.add_subcommand("verify", "Check that an expert preserves the full model's logits");
  std::string vf_full, vf_expert, vf_ckpt, vf_out;
  int vf_samples = 16;
  double vf_tol = 1e-6;
  std::uint64_t vf_seed = 0;
  bool vf_random = false;
  vf->add_option("--full", vf_full)->required();
  vf->add_option("--expert", vf_expert)->required();
  vf->add_option("--checkpoint", vf_ckpt, "Trained checkpoint of the full graph");
  vf->add_flag("--random-init", vf_random, "Use seeded random parameters instead of a checkpoint");
  vf->add_option("--samples", vf_samples);
  vf->add_option("--tol", vf_tol);
  vf->add_option("--seed", vf_seed, "Seed for inputs (and --random-init parameters)");
  vf->add_option("--out", vf_out, "Also write the JSON report here");
  vf->callback([&] {
    const ComputeGraph full = infer_shapes(ComputeGraph::load(vf_full));
    const ComputeGraph expert = infer_shapes(ComputeGraph::load(vf_expert));
    ParameterStore<float> params;
    if (vf_random || vf_ckpt.empty()) {
      params = init_parameters<float>(full, vf_seed);
    } else {
      Checkpoint ck = load_checkpoint(vf_ckpt);
      require_graph_match(ck, full);
      params = std::move(ck.store);
    }
    std::vector<Tensor<float>> inputs;
    std::mt19937_64 rng(vf_seed ^ 0xabcdef1234567890ULL);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (int i = 0; i < vf_samples; ++i) {
      Tensor<float> x({1, full.input_shape.c, full.input_shape.h, full.input_shape.w});
      for (float& v : x.data) v = dist(rng);
      inputs.push_back(std::move(x));
    }
    const EquivalenceReport report = verify_logit_equivalence(full, expert, params, inputs, vf_tol);
    const std::string json = equivalence_report_json(report);
    std::cout << json << "\n";
    if (!vf_out.empty()) write_text(vf_out, json + "\n");
    if (!report.passed(vf_tol)) {
      throw ValidationError("LogitMismatch", "expert logits diverge from the full model");
    }
  });

  // --- compare ---------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "Reduction rows between two analyze reports");
  std::string cmp_base, cmp_variant, cmp_format = "table", cmp_out;
  cmp->add_option("--base", cmp_base)->required();
  cmp->add_option("--variant", cmp_variant)->required();
  cmp->add_option("--format", cmp_format)->check(CLI::IsMember({"table", "json", "csv"}));
  cmp->add_option("--out", cmp_out);
  cmp->callback([&] {
    const CostReport base = parse_cost_report(read_text(cmp_base));
    const CostReport variant = parse_cost_report(read_text(cmp_variant));
    const ReductionReport r = reduction(base, variant);
    std::string bytes;
    if (cmp_format == "table") {
      char line[160];
      bytes += "metric               base         variant      reduction\n";
      std::snprintf(line, sizeof(line), "%-20s %-12s %-12s %s\n", "GMACs",
                    format_gmacs(r.base.total_macs).c_str(), format_gmacs(r.variant.total_macs).c_str(),
                    format_reduction(r.mac_reduction).c_str());
      bytes += line;
      std::snprintf(line, sizeof(line), "%-20s %-12s %-12s %s\n", "Parameters",
                    format_params_m(r.base.total_params).c_str(),
                    format_params_m(r.variant.total_params).c_str(),
                    format_reduction(r.param_reduction).c_str());
      bytes += line;
    } else {
      bytes = export_report(r, cmp_format == "csv" ? ReportFormat::csv : ReportFormat::json);
    }
    if (cmp_out.empty()) {
      std::cout << bytes;
    } else {
      write_text(cmp_out, bytes);
    }
  });

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic dataset in CIFAR-10 binary format");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--classes", sc.classes)->check(CLI::Range(1, 10));
  synth->add_option("--train-per-class", sc.train_per_class);
  synth->add_option("--val-per-class", sc.val_per_class);
  synth->add_option("--seed", sc.seed);
  synth->add_option("--noise", sc.noise);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->callback([&] {
    write_cifar10_dir(sc, synth_out);
    std::cout << "wrote " << sc.classes * sc.train_per_class << " train + " << sc.classes * sc.val_per_class
              << " val records under " << synth_out << "\n";
  });

  // --- experts ---------------------------------------------------------------
  auto* exp = app.add_subcommand("experts", "Print the number of extractable experts (2^N - 1)");
  int exp_n = 0;
  exp->add_option("n", exp_n, "Number of trained categories")->required();
  exp->callback([&] { std::cout << expert_count(exp_n) << "\n"; });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const nhl::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nhl::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
