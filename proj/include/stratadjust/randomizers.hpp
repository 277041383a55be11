#pragma once

#include <string>
#include <vector>

#include "stratadjust/rng.hpp"

namespace stratadjust {

enum class RandKind { simple, stratified_block, efron_biased_coin, minimization };

RandKind rand_kind_from_string(const std::string& s);
std::string to_string(RandKind k);

struct RandomizerConfig {
    RandKind kind = RandKind::simple;
    double pi = 0.5;
    int block_size = 6;          // stratified_block
    double coin_prob = 0.75;     // biased coin / minimization, in (0.5, 1]
    std::vector<double> weights; // minimization; empty = equal weights
};

// i.i.d. Bernoulli(pi) assignments.
std::vector<int> simple_randomize(int n, double pi, Rng& rng);

// Permuted blocks within each stratum, processed in arrival order. Every
// complete block of size cfg.block_size contains exactly block_size*pi
// treated units; a final incomplete block of size s draws round(s*pi)
// treated positions uniformly.
std::vector<int> stratified_block(const std::vector<int>& strata,
                                  const RandomizerConfig& cfg, Rng& rng);

// Efron's biased coin within each stratum (classic form, pi = 1/2 only):
// balanced history gets a fair coin, otherwise the under-represented arm
// is assigned with probability cfg.coin_prob.
std::vector<int> efron_biased_coin(const std::vector<int>& strata,
                                   const RandomizerConfig& cfg, Rng& rng);

// Pocock-Simon minimization over q stratification covariates given as level
// codes (n x q, levels are small nonnegative integers). Marginal imbalance
// of level l is |T_l/pi - C_l/(1-pi)|, summed over the arriving unit's
// levels with cfg.weights; the minimizing arm is assigned with probability
// cfg.coin_prob, ties with probability pi.
std::vector<int> pocock_simon_minimization(const std::vector<std::vector<int>>& z,
                                           const RandomizerConfig& cfg, Rng& rng);

// Dispatch on cfg.kind; strata doubles as the single minimization covariate.
std::vector<int> randomize(const std::vector<int>& strata,
                           const RandomizerConfig& cfg, Rng& rng);

}  // namespace stratadjust
