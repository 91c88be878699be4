#include "presto/ablation.hpp"

#include <stdexcept>

namespace presto {

namespace {

AblationRow eval_run(const std::string& name, const Dataset& labeled,
                     const ModelConfig& mcfg, const PretrainConfig& cfg) {
  PretrainResult pr = pretrain(labeled, mcfg, cfg);
  AblationRow row;
  row.name = name;
  row.depth = mcfg.depth;
  row.width = mcfg.d_e;
  row.params = count_params(pr.ckpt.params);
  auto tokens = full_input_tokens();
  row.flops = count_flops(mcfg, tokens, tokens).total();
  row.f1 = validate_probe(pr.ckpt, labeled);
  return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(AblationKind kind, const Dataset& labeled,
                                      const ModelConfig& base_model,
                                      const PretrainConfig& base_cfg) {
  if (labeled.samples.empty())
    throw std::invalid_argument(
        "ablation: no dataset; generate one with the synth subcommand first");
  std::vector<AblationRow> rows;
  if (kind == AblationKind::Masking) {
    const MaskStrategy singles[] = {MaskStrategy::Random, MaskStrategy::ChannelGroups,
                                    MaskStrategy::Timesteps,
                                    MaskStrategy::ContiguousTimesteps};
    for (MaskStrategy s : singles) {
      PretrainConfig cfg = base_cfg;
      cfg.strategies = {s};
      rows.push_back(eval_run(mask_strategy_name(s), labeled, base_model, cfg));
    }
    PretrainConfig cfg = base_cfg;
    cfg.strategies = {MaskStrategy::Random, MaskStrategy::ChannelGroups,
                      MaskStrategy::Timesteps, MaskStrategy::ContiguousTimesteps};
    rows.push_back(eval_run(mask_strategy_name(MaskStrategy::Combined), labeled,
                            base_model, cfg));
  } else {
    struct Variant {
      const char* name;
      int depth, width;
    };
    for (const Variant& v :
         {Variant{"2x128", 2, 128}, Variant{"4x128", 4, 128}, Variant{"2x256", 2, 256}}) {
      ModelConfig mcfg = base_model;
      mcfg.depth = v.depth;
      mcfg.d_e = v.width;
      rows.push_back(eval_run(v.name, labeled, mcfg, base_cfg));
    }
  }
  return rows;
}

}  // namespace presto
