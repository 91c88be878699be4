#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "presto/ablation.hpp"
#include "presto/checkpoint_io.hpp"
#include "presto/downstream.hpp"
#include "presto/pretrain.hpp"
#include "presto/pts_io.hpp"
#include "presto/synth.hpp"

using json = nlohmann::json;
using namespace presto;

namespace {

std::string fnv1a_hex(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoCode::Corrupt, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

// Every artifact-writing run leaves <out>.manifest.json beside its outputs.
void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const json& config, uint64_t seed,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["subcommand"] = subcommand;
  m["config"] = config;
  m["seed"] = seed;
  m["inputs"] = json::object();
  for (const auto& p : inputs) m["inputs"][p] = hash_file(p);
  m["outputs"] = outputs;
  std::ofstream f(out_path + ".manifest.json");
  f << m.dump(2) << "\n";
}

std::vector<MaskStrategy> parse_strategies(const std::string& csv) {
  std::vector<MaskStrategy> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    MaskStrategy s = mask_strategy_from_name(item);
    if (s == MaskStrategy::Combined)
      return {MaskStrategy::Random, MaskStrategy::ChannelGroups, MaskStrategy::Timesteps,
              MaskStrategy::ContiguousTimesteps};
    out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no masking strategies given");
  return out;
}

std::vector<uint64_t> parse_seeds(const std::string& csv) {
  std::vector<uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Masked-autoencoder pipeline for multi-sensor pixel timeseries"};
  app.require_subcommand(1);
  app.set_config("--config");

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate a synthetic PTS dataset");
  SyntheticWorldConfig sw;
  std::string synth_out;
  synth->add_option("--samples", sw.n_samples);
  synth->add_option("--classes", sw.n_classes);
  synth->add_option("--timesteps", sw.T);
  synth->add_option("--noise", sw.noise_sigma);
  synth->add_option("--dropout", sw.dropout);
  synth->add_option("--seed", sw.seed);
  synth->add_option("--out", synth_out)->required();

  // ---- pretrain ----
  auto* pre = app.add_subcommand("pretrain", "Masked-autoencoder pretraining");
  std::string pre_data, pre_out, pre_strategies = "combined";
  PretrainConfig pc;
  ModelConfig mc;
  pre->add_option("--data", pre_data)->required();
  pre->add_option("--out", pre_out)->required();
  pre->add_option("--epochs", pc.epochs);
  pre->add_option("--batch-size", pc.batch_size);
  pre->add_option("--mask-ratio", pc.mask_ratio);
  pre->add_option("--lambda", pc.lambda);
  pre->add_option("--lr", pc.lr_max);
  pre->add_option("--seed", pc.seed);
  pre->add_option("--mask-strategies,--strategies", pre_strategies);
  pre->add_option("--depth", mc.depth);
  pre->add_option("--width", mc.d_e);

  // ---- embed ----
  auto* emb = app.add_subcommand("embed", "Pooled embeddings to CSV");
  std::string emb_ckpt, emb_data, emb_out;
  emb->add_option("--ckpt", emb_ckpt)->required();
  emb->add_option("--data", emb_data)->required();
  emb->add_option("--out", emb_out)->required();

  // ---- probe ----
  auto* probe = app.add_subcommand("probe", "Shallow probe on pooled embeddings");
  std::string pr_ckpt, pr_data, pr_kind = "logistic", pr_out;
  int pr_k = 5;
  probe->add_option("--ckpt", pr_ckpt)->required();
  probe->add_option("--data", pr_data)->required();
  probe->add_option("--kind", pr_kind)->check(CLI::IsMember({"linear", "logistic", "knn"}));
  probe->add_option("--k", pr_k);
  probe->add_option("--out", pr_out);

  // ---- finetune ----
  auto* ft = app.add_subcommand("finetune", "Fine-tune encoder with a linear head");
  std::string ft_ckpt, ft_data, ft_seeds = "0", ft_out, ft_ckpt_out;
  FinetuneConfig fc;
  ft->add_option("--ckpt", ft_ckpt)->required();
  ft->add_option("--data", ft_data)->required();
  ft->add_option("--lr", fc.lr);
  ft->add_option("--epochs", fc.epochs);
  ft->add_option("--batch-size", fc.batch_size);
  ft->add_option("--seeds", ft_seeds);
  ft->add_option("--out", ft_out);
  ft->add_option("--ckpt-out", ft_ckpt_out);

  // ---- flops ----
  auto* fl = app.add_subcommand("flops", "Parameter and FLOP accounting row");
  int fl_depth = 2, fl_width = 128, fl_T = kDefaultT;
  std::string fl_groups = "full";
  fl->add_option("--depth", fl_depth);
  fl->add_option("--width", fl_width);
  fl->add_option("--timesteps", fl_T);
  fl->add_option("--groups", fl_groups)->check(CLI::IsMember({"full", "ms", "rgb"}));

  // ---- ablation ----
  auto* ab = app.add_subcommand("ablation", "Masking/scaling ablation report");
  std::string ab_kind, ab_data, ab_out;
  PretrainConfig ab_pc;
  ab_pc.epochs = 3;
  ab->add_option("--kind", ab_kind)->required()->check(CLI::IsMember({"masking", "scaling"}));
  ab->add_option("--data", ab_data)->required();
  ab->add_option("--out", ab_out)->required();
  ab->add_option("--epochs", ab_pc.epochs);
  ab->add_option("--batch-size", ab_pc.batch_size);
  ab->add_option("--seed", ab_pc.seed);

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    Dataset ds = generate_synthetic(sw);
    write_pts(synth_out, ds);
    json cfg = {{"samples", sw.n_samples}, {"classes", sw.n_classes},
                {"timesteps", sw.T},       {"noise", sw.noise_sigma},
                {"dropout", sw.dropout},   {"seed", sw.seed}};
    write_manifest(synth_out, "synth", cfg, sw.seed, {}, {synth_out});
    std::cout << "wrote " << ds.size() << " samples to " << synth_out << "\n";
    return 0;
  }

  if (pre->parsed()) {
    pc.strategies = parse_strategies(pre_strategies);
    Dataset ds = read_pts(pre_data);
    std::string loss_path = pre_out + ".loss.csv";
    std::ofstream loss(loss_path);
    loss << "epoch,mse,ce,total,lr\n";
    PretrainResult res =
        pretrain(ds, mc, pc, [&](int epoch, const LossReport& r, double lr) {
          loss << epoch << "," << r.mse << "," << r.ce << "," << r.total() << ","
               << lr << "\n";
          std::cout << "epoch " << epoch << " loss " << r.total() << "\n";
        });
    write_checkpoint(pre_out, res.ckpt);
    json cfg = {{"epochs", pc.epochs},       {"batch_size", pc.batch_size},
                {"mask_ratio", pc.mask_ratio}, {"lambda", pc.lambda},
                {"lr", pc.lr_max},           {"seed", pc.seed},
                {"strategies", pre_strategies}, {"depth", mc.depth},
                {"width", mc.d_e}};
    write_manifest(pre_out, "pretrain", cfg, pc.seed, {pre_data}, {pre_out, loss_path});
    return 0;
  }

  if (emb->parsed()) {
    Checkpoint ckpt = read_checkpoint(emb_ckpt);
    Dataset ds = read_pts(emb_data);
    auto e = embed_dataset(ckpt, ds);
    std::ofstream out(emb_out);
    out << "sample";
    for (size_t j = 0; j < e[0].size(); ++j) out << ",e" << j;
    out << "\n";
    for (size_t i = 0; i < e.size(); ++i) {
      out << i;
      for (float v : e[i]) out << "," << v;
      out << "\n";
    }
    write_manifest(emb_out, "embed", json::object(), 0, {emb_ckpt, emb_data}, {emb_out});
    return 0;
  }

  if (probe->parsed()) {
    Checkpoint ckpt = read_checkpoint(pr_ckpt);
    Dataset ds = read_pts(pr_data);
    auto e = embed_dataset(ckpt, ds);
    std::vector<std::vector<float>> train_x, test_x;
    std::vector<int32_t> train_y, test_y;
    for (size_t i = 0; i < e.size(); ++i) {
      if (i % 2 == 0) { train_x.push_back(e[i]); train_y.push_back(ds.labels[i]); }
      else { test_x.push_back(e[i]); test_y.push_back(ds.labels[i]); }
    }
    std::ostringstream report;
    report << "metric,value\n";
    if (pr_kind == "linear") {
      std::vector<float> ty(train_y.begin(), train_y.end()), vy(test_y.begin(), test_y.end());
      Probe p = fit_probe_real(train_x, ty);
      report << "rmse," << rmse(vy, predict_value(p, test_x)) << "\n";
    } else {
      ProbeSpec spec;
      spec.kind = pr_kind == "knn" ? ProbeSpec::Kind::Knn : ProbeSpec::Kind::Logistic;
      spec.k = pr_k;
      Probe p = fit_probe_class(train_x, train_y, spec);
      auto pred = predict_class(p, test_x);
      report << "accuracy," << accuracy(test_y, pred) << "\n";
      report << "macro_f1," << macro_f1(test_y, pred) << "\n";
    }
    if (pr_out.empty()) {
      std::cout << report.str();
    } else {
      std::ofstream(pr_out) << report.str();
      write_manifest(pr_out, "probe", {{"kind", pr_kind}, {"k", pr_k}}, 0,
                     {pr_ckpt, pr_data}, {pr_out});
    }
    return 0;
  }

  if (ft->parsed()) {
    Checkpoint ckpt = read_checkpoint(ft_ckpt);
    Dataset ds = read_pts(ft_data);
    std::ostringstream report;
    report << "seed,val_accuracy,best_epoch\n";
    bool saved = false;
    for (uint64_t seed : parse_seeds(ft_seeds)) {
      fc.seed = seed;
      FinetuneResult res = finetune(ckpt, ds, fc);
      report << seed << "," << res.val_accuracy << "," << res.best_epoch << "\n";
      if (!saved && !ft_ckpt_out.empty()) {
        write_checkpoint(ft_ckpt_out, res.ckpt);
        saved = true;
      }
    }
    if (ft_out.empty()) {
      std::cout << report.str();
    } else {
      std::ofstream(ft_out) << report.str();
      write_manifest(ft_out, "finetune",
                     {{"lr", fc.lr}, {"epochs", fc.epochs}, {"seeds", ft_seeds}}, 0,
                     {ft_ckpt, ft_data}, {ft_out});
    }
    return 0;
  }

  if (fl->parsed()) {
    ModelConfig cfg;
    cfg.depth = fl_depth;
    cfg.d_e = fl_width;
    std::vector<TokenInfo> tokens;
    if (fl_groups == "ms") tokens = ms_pixel_tokens();
    else if (fl_groups == "rgb") tokens = rgb_pixel_tokens();
    else tokens = full_input_tokens(fl_T);
    ParamStore params = init_params(cfg, 0);
    FlopCount enc_only = count_flops(cfg, tokens, {});
    FlopCount full = count_flops(cfg, tokens, tokens);
    std::cout << "depth,width,tokens,params_total,params_encoder,encode_mflops,pretrain_mflops\n"
              << cfg.depth << "," << cfg.d_e << "," << tokens.size() << ","
              << count_params(params) << "," << count_params_encoder_side(params) << ","
              << double(enc_only.total()) / 1e6 << "," << double(full.total()) / 1e6
              << "\n";
    return 0;
  }

  if (ab->parsed()) {
    Dataset ds = read_pts(ab_data);
    ModelConfig base;
    auto rows = run_ablation(ab_kind == "masking" ? AblationKind::Masking
                                                  : AblationKind::Scaling,
                             ds, base, ab_pc);
    std::ofstream out(ab_out);
    out << "name,depth,width,params,flops,macro_f1\n";
    for (const auto& r : rows)
      out << r.name << "," << r.depth << "," << r.width << "," << r.params << ","
          << r.flops << "," << r.f1 << "\n";
    write_manifest(ab_out, "ablation",
                   {{"kind", ab_kind}, {"epochs", ab_pc.epochs}, {"seed", ab_pc.seed}},
                   ab_pc.seed, {ab_data}, {ab_out});
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
