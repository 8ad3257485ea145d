// Copyright 2026 The dpwb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPWB_AGGREGATION_HPP
#define DPWB_AGGREGATION_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpwb/accounting.hpp"
#include "dpwb/mechanisms.hpp"
#include "dpwb/random.hpp"
#include "dpwb/types.hpp"

// Private aggregation protocols composed from the mechanism primitives:
// teacher-ensemble labeling, student-prompt construction, keyword-space
// aggregation, and per-token private generation.
//
// Ensembles are pluggable callbacks. Callers are responsible for building
// them over disjoint data shards; answers must be deterministic per seed and
// must lie inside the declared candidate domain. Every operation reports the
// privacy it spent, either through its result or through an optional ledger.
namespace dpwb::agg {

// Ensemble answering classification queries with a candidate index.
struct ClassificationEnsemble {
  int n_teachers = 0;
  CandidateDomain domain{1};
  std::function<Eigen::Index(int query, int teacher)> answer;
};

// Labels one query by Gaussian-noisy argmax over the teacher vote histogram.
// Charges one unit-sensitivity Gaussian RDP entry per call when a ledger is
// given (one added/removed record moves one vote count by one).
Eigen::Index pate_label(const ClassificationEnsemble& ensemble, int query,
                        double sigma, RngStream& rng,
                        acct::PrivacyLedger* ledger = nullptr);

struct LabeledShot {
  std::string input;
  std::string output;
  int query_index = 0;
};

// Few-shot prompt assembled from privately labeled public data. Outputs come
// only from private aggregation; provenance records which queries were used.
struct StudentPrompt {
  std::vector<LabeledShot> shots;
  std::vector<int> provenance;
};

using ShotScorer = std::function<double(const std::vector<LabeledShot>&)>;

struct StudentResult {
  StudentPrompt prompt;
  acct::PrivacyLedger ledger;
};

// Labels every public input via pate_label, then picks an n_shots subset by
// greedy forward selection under `scorer` (ties to the lowest index). The
// scorer sees only labeled public data, so shot selection costs no privacy
// beyond the labeling itself.
StudentResult promptpate_build_student(
    const ClassificationEnsemble& ensemble,
    const std::vector<std::string>& public_inputs, double sigma, int n_shots,
    const ShotScorer& scorer, RngStream& rng);

// Splits text into whitespace-separated keywords.
std::vector<std::string> whitespace_tokenize(const std::string& text);

struct KeywordExtraction {
  std::function<std::vector<std::string>(const std::string&)> tokenizer =
      whitespace_tokenize;
  // Each teacher contributes at most this many distinct keywords (count 1
  // each, first occurrence order), bounding per-teacher sensitivity.
  int max_keywords_per_teacher = 1;
};

// Clamped presence-count histogram over the union of extracted keywords.
// Keyword candidates are ordered lexicographically. Throws when no teacher
// produced any keyword.
VoteHistogram keyword_histogram(const std::vector<std::string>& teacher_texts,
                                const KeywordExtraction& extraction);

enum class KsaMethod { kPtr, kGumbelTopk };

struct KsaResult {
  // Keywords in (noisy) rank order; empty optional means Abstain.
  std::optional<std::vector<std::string>> keywords;
  bool abstained() const { return !keywords.has_value(); }
};

// Keyword-space aggregation: builds the clamped keyword histogram and
// selects the top-k privately with propose-test-release or Gumbel top-k.
// The full per-query budget is charged to the selection. k is clamped to
// the number of distinct keywords.
KsaResult ksa_select(const std::vector<std::string>& teacher_texts,
                     const KeywordExtraction& extraction, int k,
                     const PrivacyBudget& budget, KsaMethod method,
                     RngStream& rng, acct::PrivacyLedger* ledger = nullptr);

// Per-token generation budget: per_token_epsilon * t_max must fit inside
// the total budget under basic composition (checked at construction).
// t_max = 0 is allowed and generates nothing.
struct GenerationBudget {
  GenerationBudget(PrivacyBudget total_budget, double per_token_eps,
                   int max_tokens);

  PrivacyBudget total;
  double per_token_epsilon;
  int t_max;
};

// Selects the next token from per-subset proposals: for each disjoint
// private subset one candidate token, tallied into a histogram over the
// proposed tokens and selected by Gumbel top-1 at epsilon_token
// (per-subset sensitivity 1). Returns the winning token id.
Eigen::Index fewshotgen_next_token(
    std::span<const Eigen::Index> per_subset_candidates, double epsilon_token,
    RngStream& rng, acct::PrivacyLedger* ledger = nullptr);

// Ensemble proposing one next token per disjoint subset, given the shared
// prefix selected so far.
struct TokenEnsemble {
  int n_subsets = 0;
  std::function<Eigen::Index(int subset, std::span<const Eigen::Index> prefix)>
      next_token;
};

struct GenerationResult {
  std::vector<Eigen::Index> tokens;
  PrivacyBudget spent = PrivacyBudget::zero();
  acct::PrivacyLedger ledger;
  bool stopped_by_token = false;
};

// Generates up to t_max tokens, feeding each selected token back to every
// subset, stopping early when stop_token is selected (the stop token is not
// part of the output). Spent budget is (tokens emitted) * per_token_epsilon
// under basic composition. Subset callback failures surface as a
// ProtocolError naming the subset.
GenerationResult fewshotgen_generate(const TokenEnsemble& ensemble,
                                     const GenerationBudget& budget,
                                     std::optional<Eigen::Index> stop_token,
                                     RngStream& rng);

// Ensemble answering a query with a full text (the sequence-level contract
// used by keyword-space student construction).
struct SequenceEnsemble {
  int n_teachers = 0;
  std::function<std::string(int query, int teacher)> respond;
};

struct PategenResult {
  StudentPrompt prompt;
  PrivacyBudget spent = PrivacyBudget::zero();
  int queries_processed = 0;
  int queries_abstained = 0;
};

// Builds a student prompt for generation tasks: each public input is
// answered by ksa_select over the teacher texts; the keywords, joined in
// rank order, become the input's label. Abstaining queries are skipped (not
// retried) and still consume their per-query budget; processing stops after
// n_shots non-abstaining shots. Throws ProtocolError when every processed
// query abstained and shots were requested.
PategenResult promptpategen_build_student(
    const SequenceEnsemble& ensemble,
    const std::vector<std::string>& public_inputs,
    const KeywordExtraction& extraction, int k,
    const PrivacyBudget& per_query_budget, int n_shots, KsaMethod method,
    RngStream& rng);

}  // namespace dpwb::agg

#endif  // DPWB_AGGREGATION_HPP
