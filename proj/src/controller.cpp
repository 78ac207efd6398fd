#include "specdraft/controller.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "specdraft/entropy.hpp"
#include "specdraft/errors.hpp"
#include "specdraft/verifier.hpp"

namespace specdraft {

void HeteroConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (top_n < 1) throw ConfigError("top_n must be >= 1");
  if (expand_width < 1) throw ConfigError("expand_width must be >= 1");
  if (alpha < 0) throw ConfigError("alpha must be >= 0");
  if (entropy_k < 1) throw ConfigError("entropy_k must be >= 1");
  for (double g : gamma) {
    if (!(g > 0.0 && g <= 1.0)) throw ConfigError("gamma entries must lie in (0, 1]");
  }
  for (std::size_t b : low_bins) {
    if (b > 7) throw ConfigError("low bins must lie in 0..7");
    if (b >= gamma.size()) throw ConfigError("no gamma multiplier for low bin " + std::to_string(b));
  }
}

Adaptation adapt(std::size_t bin, const HeteroConfig& config) {
  const bool low = std::find(config.low_bins.begin(), config.low_bins.end(), bin) != config.low_bins.end();
  if (!low) return {0, config.top_n};
  if (bin >= config.gamma.size()) throw ConfigError("no gamma multiplier for low bin " + std::to_string(bin));
  const int extra = std::max(0, config.alpha - static_cast<int>(bin));
  const double scaled = std::floor(config.gamma[bin] * static_cast<double>(config.top_n) + 0.5);
  const double n = std::max(1.0, scaled + extra);
  return {extra, static_cast<std::size_t>(n)};
}

namespace {

// Drops accepted nodes from position `keep` on; the first dropped token becomes
// the bonus (it is the target's own argmax at that position).
void truncate_acceptance(AcceptResult& r, std::size_t keep, const RerankedTree& selected) {
  if (keep >= r.accepted_len) return;
  r.bonus_token = r.accepted_tokens[keep];
  r.accepted_path.resize(keep);
  r.accepted_tokens.resize(keep);
  r.accepted_len = keep;
  r.deepest_accepted_rank = tcr(r, selected);
}

GenerationResult decode(const LanguageModel& target, const LanguageModel& draft, std::span<const TokenId> prompt,
                        const HeteroConfig& config, const BinningModel* bins, bool adaptive, const CostModel& cost) {
  config.validate();
  if (target.vocab_size() != draft.vocab_size()) {
    throw ConfigError("target and draft models use different vocabularies");
  }
  std::vector<std::size_t> low_bins;
  if (bins != nullptr) {
    const auto& meta = bins->metadata();
    if (meta.entropy_k != 0 && meta.entropy_k != config.entropy_k) {
      throw ConfigError("binning model was trained with a different entropy K");
    }
    if (meta.base_depth != 0 && meta.base_depth != config.depth) {
      throw ConfigError("binning model was trained at a different base depth");
    }
    const auto supported = bins->low_bins();
    for (std::size_t b : config.low_bins) {
      if (std::find(supported.begin(), supported.end(), b) != supported.end()) low_bins.push_back(b);
    }
  }
  HeteroConfig policy = config;
  policy.low_bins = low_bins;

  GenerationResult out;
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  while (out.tokens.size() < config.max_new_tokens) {
    IterationRecord rec;
    rec.index = out.records.size();

    DraftTree tree = expand(draft, context, config.depth, config.top_k, config.expand_width);
    const MetaPath meta = select_meta_path(tree);
    rec.entropy = cumulative_path_entropy(meta, config.entropy_k).nats;
    rec.meta_path_truncated = meta.truncated;

    Adaptation plan{0, config.top_n};
    if (bins != nullptr) {
      const std::size_t bin = bins->assign_bin(rec.entropy);
      rec.bin = static_cast<int>(bin);
      if (adaptive) plan = adapt(bin, policy);
    }
    if (plan.extra_layers > 0) {
      tree = extend(std::move(tree), draft, plan.extra_layers, config.top_k, config.expand_width);
    }
    const RerankedTree selected = rerank(tree, plan.top_n);
    AcceptResult result = verify_greedy(target, context, tree, selected);

    if (config.terminator) {
      const auto& acc = result.accepted_tokens;
      const auto it = std::find(acc.begin(), acc.end(), *config.terminator);
      truncate_acceptance(result, static_cast<std::size_t>(it - acc.begin()), selected);
    }
    const std::size_t remaining = config.max_new_tokens - out.tokens.size();
    truncate_acceptance(result, remaining - 1, selected);

    rec.depth_used = tree.depth();
    rec.budget = plan.top_n;
    rec.tree_size = tree.size();
    rec.accepted_len = result.accepted_len;
    rec.tcr = tcr(result, selected);
    rec.tokens_verified = result.tokens_verified;
    rec.meta_path_rank = selected.rank(meta.nodes.back()).value_or(selected.size() + 1);
    out.records.push_back(rec);

    out.tokens.insert(out.tokens.end(), result.accepted_tokens.begin(), result.accepted_tokens.end());
    out.tokens.push_back(result.bonus_token);
    context.insert(context.end(), result.accepted_tokens.begin(), result.accepted_tokens.end());
    context.push_back(result.bonus_token);
    if (config.terminator && result.bonus_token == *config.terminator) break;
  }
  if (!out.records.empty()) out.summary = summarize(out.records, cost);
  return out;
}

std::vector<GenerationResult> run_prompts(const LanguageModel& target, const LanguageModel& draft,
                                          std::span<const std::vector<TokenId>> prompts, const HeteroConfig& config,
                                          const BinningModel* bins, bool adaptive, const CostModel& cost,
                                          unsigned threads) {
  std::vector<GenerationResult> results(prompts.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        results[i] = decode(target, draft, prompts[i], config, bins, adaptive, cost);
        for (auto& r : results[i].records) r.prompt = i;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(prompts.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

GenerationResult merge(std::vector<GenerationResult> parts, const CostModel& cost) {
  GenerationResult out;
  for (auto& p : parts) {
    out.tokens.insert(out.tokens.end(), p.tokens.begin(), p.tokens.end());
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
  }
  if (!out.records.empty()) out.summary = summarize(out.records, cost);
  return out;
}

}  // namespace

GenerationResult decode_baseline(const LanguageModel& target, const LanguageModel& draft,
                                 std::span<const TokenId> prompt, const HeteroConfig& config,
                                 const BinningModel* bins, const CostModel& cost) {
  return decode(target, draft, prompt, config, bins, false, cost);
}

GenerationResult decode_adaptive(const LanguageModel& target, const LanguageModel& draft,
                                 std::span<const TokenId> prompt, const HeteroConfig& config,
                                 const BinningModel& bins, const CostModel& cost) {
  return decode(target, draft, prompt, config, &bins, true, cost);
}

std::vector<TokenId> decode_target_greedy(const LanguageModel& target, std::span<const TokenId> prompt,
                                          std::size_t max_new_tokens, std::optional<TokenId> terminator) {
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  while (out.size() < max_new_tokens) {
    const TokenId t = target.next_dist(context).argmax();
    out.push_back(t);
    context.push_back(t);
    if (terminator && t == *terminator) break;
  }
  return out;
}

GenerationResult run_arm(const LanguageModel& target, const LanguageModel& draft,
                         std::span<const std::vector<TokenId>> prompts, const HeteroConfig& config,
                         const BinningModel* bins, bool adaptive, const CostModel& cost, unsigned threads) {
  if (adaptive && bins == nullptr) throw ConfigError("adaptive decoding needs a binning model");
  return merge(run_prompts(target, draft, prompts, config, bins, adaptive, cost, threads), cost);
}

ComparisonResult run_comparison(const LanguageModel& target, const LanguageModel& draft,
                                std::span<const std::vector<TokenId>> prompts, const HeteroConfig& config,
                                const BinningModel& bins, const CostModel& cost, unsigned threads) {
  auto base = run_prompts(target, draft, prompts, config, &bins, false, cost, threads);
  auto adap = run_prompts(target, draft, prompts, config, &bins, true, cost, threads);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (base[i].tokens != adap[i].tokens) {
      throw OutputMismatch("baseline and adaptive outputs differ on prompt " + std::to_string(i));
    }
  }
  return {merge(std::move(base), cost), merge(std::move(adap), cost)};
}

}  // namespace specdraft
