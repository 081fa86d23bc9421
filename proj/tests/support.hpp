#pragma once

// Shared fixtures: tiny trunks, random taxonomies and random small graphs
// for the property tests, plus a central-difference gradient checker.

#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "nhl/builders.hpp"
#include "nhl/graph.hpp"
#include "nhl/taxonomy.hpp"
#include "nhl/tensor.hpp"

namespace nhl::test {

// input -> conv(3->c1) -> bn -> relu -> conv(c1->c2, stride 2) -> bn -> relu
inline ComputeGraph tiny_trunk(int c1 = 8, int c2 = 8, int hw = 8) {
  ComputeGraph g;
  g.input_shape = {3, hw, hw};
  GraphNode in;
  in.id = "input";
  in.layer = InputAttrs{};
  g.add_node(in);
  auto add = [&](const std::string& id, LayerDescriptor layer, std::vector<std::string> preds) {
    GraphNode n;
    n.id = id;
    n.layer = std::move(layer);
    n.preds = std::move(preds);
    g.add_node(std::move(n));
    return id;
  };
  std::string cur = add("t.conv1", Conv2dAttrs{3, c1, 3, 3, 1, 1, 1, false}, {"input"});
  cur = add("t.bn1", BatchNorm2dAttrs{c1}, {cur});
  cur = add("t.relu1", ActivationAttrs{ActFn::relu}, {cur});
  cur = add("t.conv2", Conv2dAttrs{c1, c2, 3, 3, 2, 1, 1, false}, {cur});
  cur = add("t.bn2", BatchNorm2dAttrs{c2}, {cur});
  add("t.relu2", ActivationAttrs{ActFn::relu}, {cur});
  return g;
}

// Random taxonomy with every leaf under at least one internal level.
// Levels: 1..depth internal, leaves at depth+1. Small fanouts.
inline std::string random_taxonomy_json(std::mt19937_64& rng, int max_depth = 3, int max_fanout = 3) {
  std::uniform_int_distribution<int> depth_dist(1, max_depth);
  std::uniform_int_distribution<int> fan_dist(1, max_fanout);
  const int depth = depth_dist(rng);
  int next_index = 0;
  std::function<std::string(int, std::string)> emit = [&](int level, std::string name) -> std::string {
    std::ostringstream out;
    out << "{\"name\":\"" << name << "\",\"children\":[";
    const int fan = fan_dist(rng);
    for (int i = 0; i < fan; ++i) {
      if (i) out << ",";
      if (level == depth) {
        out << "{\"name\":\"leaf" << i << "\",\"class_index\":" << next_index++ << "}";
      } else {
        out << emit(level + 1, "n" + std::to_string(level) + "_" + std::to_string(i));
      }
    }
    out << "]}";
    return out.str();
  };
  std::ostringstream doc;
  doc << "{\"max_levels\":" << depth + 1 << ",\"root\":{\"name\":\"root\",\"children\":[";
  const int groups = fan_dist(rng);
  for (int i = 0; i < groups; ++i) {
    if (i) doc << ",";
    doc << emit(1, "g" + std::to_string(i));
  }
  doc << "]}}";
  return doc.str();
}

// Random chain-with-occasional-residual graph over small shapes, ending in
// gap + linear. Valid by construction (shapes tracked while sampling).
inline ComputeGraph random_small_graph(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ch_dist(1, 8);
  std::uniform_int_distribution<int> hw_dist(5, 16);
  std::uniform_int_distribution<int> op_dist(0, 9);
  ComputeGraph g;
  int c = ch_dist(rng), h = hw_dist(rng), w = hw_dist(rng);
  g.input_shape = {c, h, w};
  GraphNode in;
  in.id = "input";
  in.layer = InputAttrs{};
  g.add_node(in);
  std::string cur = "input";
  int seq = 0;
  auto add = [&](LayerDescriptor layer, std::vector<std::string> preds) {
    GraphNode n;
    n.id = "n" + std::to_string(seq++);
    n.layer = std::move(layer);
    n.preds = std::move(preds);
    g.add_node(n);
    return n.id;
  };
  const int ops = 2 + static_cast<int>(rng() % 6);
  for (int i = 0; i < ops; ++i) {
    switch (op_dist(rng)) {
      case 0:
      case 1:
      case 2: {  // conv, sometimes grouped/strided
        const int kh = 1 + static_cast<int>(rng() % 3);
        const int kw = 1 + static_cast<int>(rng() % 3);
        const int stride = 1 + static_cast<int>(rng() % 2);
        const int pad = static_cast<int>(rng() % 2);
        if (h + 2 * pad < kh || w + 2 * pad < kw) break;
        int groups = 1;
        int out_ch = ch_dist(rng);
        if (rng() % 4 == 0 && c % 2 == 0) {
          groups = 2;
          out_ch = 2 * ch_dist(rng);
        }
        cur = add(Conv2dAttrs{c, out_ch, kh, kw, stride, pad, groups, rng() % 2 == 0}, {cur});
        c = out_ch;
        h = (h + 2 * pad - kh) / stride + 1;
        w = (w + 2 * pad - kw) / stride + 1;
        break;
      }
      case 3:
        cur = add(BatchNorm2dAttrs{c}, {cur});
        break;
      case 4:
        cur = add(ActivationAttrs{rng() % 2 ? ActFn::relu : ActFn::gelu}, {cur});
        break;
      case 5: {
        const int k = 2 + static_cast<int>(rng() % 2);
        if (h < k || w < k) break;
        cur = add(MaxPool2dAttrs{k, k, 2, 0}, {cur});
        h = (h - k) / 2 + 1;
        w = (w - k) / 2 + 1;
        break;
      }
      case 6: {  // residual pair around a 1x1 conv
        const std::string a = add(Conv2dAttrs{c, c, 1, 1, 1, 0, 1, false}, {cur});
        cur = add(AddAttrs{}, {a, cur});
        break;
      }
      case 7:
        cur = add(LayerNormChannelsAttrs{c}, {cur});
        break;
      default: {  // depthwise conv
        if (h < 3 || w < 3) break;
        cur = add(Conv2dAttrs{c, c, 3, 3, 1, 1, c, false}, {cur});
        break;
      }
    }
  }
  cur = add(GlobalAvgPoolAttrs{}, {cur});
  const int classes = 2 + static_cast<int>(rng() % 5);
  cur = add(LinearAttrs{c, classes, true, {}}, {cur});
  for (int k = 0; k < classes; ++k) g.logit_layout.push_back({k, cur, k});
  return g;
}

// Max relative error between analytic gradient and central differences of a
// scalar-valued function, probing up to `max_probes` coordinates.
inline double fd_check(const std::function<double(const std::vector<double>&)>& f,
                       std::vector<double> x, const std::vector<double>& analytic, double eps,
                       std::mt19937_64& rng, size_t max_probes = 120) {
  std::vector<size_t> idx(x.size());
  for (size_t i = 0; i < x.size(); ++i) idx[i] = i;
  if (idx.size() > max_probes) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_probes);
  }
  double worst = 0.0;
  for (size_t i : idx) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic[i])});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace nhl::test
