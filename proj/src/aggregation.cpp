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

#include "dpwb/aggregation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace dpwb::agg {

namespace {

Eigen::Index checked_answer(const ClassificationEnsemble& ensemble, int query,
                            int teacher) {
  Eigen::Index a;
  try {
    a = ensemble.answer(query, teacher);
  } catch (const std::exception& e) {
    throw ProtocolError("teacher " + std::to_string(teacher) +
                        " failed on query " + std::to_string(query) + ": " +
                        e.what());
  }
  if (a < 0 || a >= ensemble.domain.size()) {
    throw ProtocolError("teacher " + std::to_string(teacher) +
                        " answered outside the candidate domain");
  }
  return a;
}

}  // namespace

Eigen::Index pate_label(const ClassificationEnsemble& ensemble, int query,
                        double sigma, RngStream& rng,
                        acct::PrivacyLedger* ledger) {
  if (ensemble.n_teachers < 1) {
    throw InvalidInputError("pate_label: ensemble needs >= 1 teacher");
  }
  VoteHistogram hist(ensemble.domain,
                     CountVector::Zero(ensemble.domain.size()));
  for (int t = 0; t < ensemble.n_teachers; ++t) {
    hist.add_vote(checked_answer(ensemble, query, t));
  }
  const Eigen::Index label = mech::gnmax(hist, sigma, rng);
  if (ledger != nullptr) {
    ledger->charge_rdp("gnmax", acct::rdp_gaussian(sigma),
                       {{"sigma", sigma},
                        {"query", static_cast<double>(query)}});
  }
  return label;
}

StudentResult promptpate_build_student(
    const ClassificationEnsemble& ensemble,
    const std::vector<std::string>& public_inputs, double sigma, int n_shots,
    const ShotScorer& scorer, RngStream& rng) {
  if (public_inputs.empty()) {
    throw InvalidInputError("promptpate_build_student: empty public set");
  }
  if (n_shots < 0 ||
      static_cast<std::size_t>(n_shots) > public_inputs.size()) {
    throw InvalidInputError(
        "promptpate_build_student: n_shots must lie in [0, |public_inputs|]");
  }

  StudentResult result;
  std::vector<LabeledShot> labeled;
  labeled.reserve(public_inputs.size());
  for (std::size_t i = 0; i < public_inputs.size(); ++i) {
    RngStream query_rng = rng.substream(i);
    const Eigen::Index label = pate_label(ensemble, static_cast<int>(i), sigma,
                                          query_rng, &result.ledger);
    labeled.push_back(LabeledShot{public_inputs[i],
                                  ensemble.domain.label_of(label),
                                  static_cast<int>(i)});
  }

  // Greedy forward selection; the scorer only ever sees labeled public data.
  std::vector<bool> used(labeled.size(), false);
  for (int s = 0; s < n_shots; ++s) {
    int best = -1;
    double best_score = 0.0;
    for (std::size_t j = 0; j < labeled.size(); ++j) {
      if (used[j]) continue;
      std::vector<LabeledShot> candidate = result.prompt.shots;
      candidate.push_back(labeled[j]);
      const double score = scorer(candidate);
      if (best < 0 || score > best_score) {
        best = static_cast<int>(j);
        best_score = score;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    result.prompt.shots.push_back(labeled[static_cast<std::size_t>(best)]);
    result.prompt.provenance.push_back(best);
  }
  return result;
}

std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

VoteHistogram keyword_histogram(const std::vector<std::string>& teacher_texts,
                                const KeywordExtraction& extraction) {
  if (extraction.max_keywords_per_teacher < 1) {
    throw InvalidInputError("max_keywords_per_teacher must be >= 1");
  }
  std::map<std::string, std::int64_t> counts;
  for (const std::string& text : teacher_texts) {
    std::vector<std::string> raw = extraction.tokenizer(text);
    // Distinct keywords in first-occurrence order, clamped per teacher.
    std::vector<std::string> kept;
    std::set<std::string> seen;
    for (const std::string& kw : raw) {
      if (static_cast<int>(kept.size()) >= extraction.max_keywords_per_teacher)
        break;
      if (seen.insert(kw).second) kept.push_back(kw);
    }
    for (const std::string& kw : kept) ++counts[kw];
  }
  if (counts.empty()) {
    throw InvalidInputError("keyword_histogram: no keywords extracted");
  }
  std::vector<std::string> labels;
  CountVector tallies(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index i = 0;
  for (const auto& [kw, c] : counts) {  // std::map iterates lexicographically
    labels.push_back(kw);
    tallies[i++] = c;
  }
  return VoteHistogram(CandidateDomain(std::move(labels)), std::move(tallies));
}

KsaResult ksa_select(const std::vector<std::string>& teacher_texts,
                     const KeywordExtraction& extraction, int k,
                     const PrivacyBudget& budget, KsaMethod method,
                     RngStream& rng, acct::PrivacyLedger* ledger) {
  if (k < 1) throw InvalidInputError("ksa_select: k must be >= 1");
  const VoteHistogram hist = keyword_histogram(teacher_texts, extraction);
  const int k_eff = std::min<int>(k, static_cast<int>(hist.domain().size()));

  KsaResult result;
  if (method == KsaMethod::kGumbelTopk) {
    ScoreVector scores(hist.domain(), hist.counts_as_reals());
    const std::vector<Eigen::Index> picked =
        mech::gumbel_topk(scores, Sensitivity(1.0), budget.epsilon, k_eff,
                          rng);
    std::vector<std::string> keywords;
    for (Eigen::Index idx : picked) {
      keywords.push_back(hist.domain().label_of(idx));
    }
    result.keywords = std::move(keywords);
  } else {
    // Propose-test-release needs a (k+1)-th count; the keyword domain
    // conceptually contains every unseen keyword with count 0, so pad one
    // zero candidate when k covers all extracted keywords.
    const bool pad = k_eff >= hist.domain().size();
    const Eigen::Index n = hist.domain().size() + (pad ? 1 : 0);
    CountVector counts = CountVector::Zero(n);
    counts.head(hist.domain().size()) = hist.counts();
    VoteHistogram padded(CandidateDomain(n), std::move(counts));
    const auto outcome = mech::ptr_topk(padded, k_eff, budget, rng);
    if (std::holds_alternative<mech::Abstain>(outcome)) {
      result.keywords = std::nullopt;
    } else {
      std::vector<std::string> keywords;
      for (Eigen::Index idx :
           std::get<std::vector<Eigen::Index>>(outcome)) {
        keywords.push_back(hist.domain().label_of(idx));
      }
      result.keywords = std::move(keywords);
    }
  }

  if (ledger != nullptr) {
    const double charged_delta =
        method == KsaMethod::kPtr ? budget.delta : 0.0;
    ledger->charge_pure(
        method == KsaMethod::kPtr ? "ksa_select_ptr" : "ksa_select_gumbel",
        PrivacyBudget(budget.epsilon, charged_delta),
        {{"k", static_cast<double>(k_eff)}});
  }
  return result;
}

GenerationBudget::GenerationBudget(PrivacyBudget total_budget,
                                   double per_token_eps, int max_tokens)
    : total(total_budget), per_token_epsilon(per_token_eps),
      t_max(max_tokens) {
  if (!(per_token_epsilon > 0.0) || !std::isfinite(per_token_epsilon)) {
    throw InvalidInputError("per_token_epsilon must be finite and > 0");
  }
  if (t_max < 0) throw InvalidInputError("t_max must be >= 0");
  if (per_token_epsilon * t_max > total.epsilon * (1.0 + 1e-12)) {
    throw InvalidInputError(
        "per_token_epsilon * t_max exceeds the total generation budget");
  }
}

Eigen::Index fewshotgen_next_token(
    std::span<const Eigen::Index> per_subset_candidates, double epsilon_token,
    RngStream& rng, acct::PrivacyLedger* ledger) {
  if (per_subset_candidates.empty()) {
    throw InvalidInputError("fewshotgen_next_token: no subset candidates");
  }
  // The selection domain is restricted to the proposed tokens, in ascending
  // token-id order so the histogram layout is deterministic.
  std::vector<Eigen::Index> distinct(per_subset_candidates.begin(),
                                     per_subset_candidates.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (distinct.front() < 0) {
    throw InvalidInputError("fewshotgen_next_token: negative token id");
  }

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(distinct.size()));
  for (Eigen::Index token : per_subset_candidates) {
    const auto it = std::lower_bound(distinct.begin(), distinct.end(), token);
    counts[it - distinct.begin()] += 1.0;
  }

  const Eigen::Index n_candidates = counts.size();
  ScoreVector scores(CandidateDomain(n_candidates), std::move(counts));
  const Eigen::Index local =
      mech::gumbel_topk(scores, Sensitivity(1.0), epsilon_token, 1, rng)[0];
  if (ledger != nullptr) {
    ledger->charge_pure("fewshotgen_next_token",
                        PrivacyBudget(epsilon_token, 0.0));
  }
  return distinct[static_cast<std::size_t>(local)];
}

GenerationResult fewshotgen_generate(const TokenEnsemble& ensemble,
                                     const GenerationBudget& budget,
                                     std::optional<Eigen::Index> stop_token,
                                     RngStream& rng) {
  if (ensemble.n_subsets < 1) {
    throw InvalidInputError("fewshotgen_generate: needs >= 1 subset");
  }
  GenerationResult result;
  std::vector<Eigen::Index> candidates(
      static_cast<std::size_t>(ensemble.n_subsets));
  for (int step = 0; step < budget.t_max; ++step) {
    // Every subset sees the same selected prefix.
    for (int s = 0; s < ensemble.n_subsets; ++s) {
      try {
        candidates[static_cast<std::size_t>(s)] =
            ensemble.next_token(s, result.tokens);
      } catch (const std::exception& e) {
        throw ProtocolError("token ensemble subset " + std::to_string(s) +
                            " failed at step " + std::to_string(step) + ": " +
                            e.what());
      }
    }
    RngStream step_rng = rng.substream(static_cast<std::uint64_t>(step));
    const Eigen::Index token = fewshotgen_next_token(
        candidates, budget.per_token_epsilon, step_rng, nullptr);
    if (stop_token.has_value() && token == *stop_token) {
      result.stopped_by_token = true;
      break;
    }
    result.tokens.push_back(token);
    result.ledger.charge_pure("fewshotgen_next_token",
                              PrivacyBudget(budget.per_token_epsilon, 0.0),
                              {{"step", static_cast<double>(step)}});
  }
  result.spent = PrivacyBudget(
      budget.per_token_epsilon * static_cast<double>(result.tokens.size()),
      0.0);
  return result;
}

PategenResult promptpategen_build_student(
    const SequenceEnsemble& ensemble,
    const std::vector<std::string>& public_inputs,
    const KeywordExtraction& extraction, int k,
    const PrivacyBudget& per_query_budget, int n_shots, KsaMethod method,
    RngStream& rng) {
  if (n_shots < 0 ||
      static_cast<std::size_t>(n_shots) > public_inputs.size()) {
    throw InvalidInputError(
        "promptpategen_build_student: n_shots must lie in "
        "[0, |public_inputs|]");
  }
  if (ensemble.n_teachers < 1) {
    throw InvalidInputError("promptpategen_build_student: empty ensemble");
  }

  PategenResult result;
  for (std::size_t i = 0;
       i < public_inputs.size() &&
       static_cast<int>(result.prompt.shots.size()) < n_shots;
       ++i) {
    std::vector<std::string> texts;
    texts.reserve(static_cast<std::size_t>(ensemble.n_teachers));
    for (int t = 0; t < ensemble.n_teachers; ++t) {
      try {
        texts.push_back(ensemble.respond(static_cast<int>(i), t));
      } catch (const std::exception& e) {
        throw ProtocolError("sequence teacher " + std::to_string(t) +
                            " failed on query " + std::to_string(i) + ": " +
                            e.what());
      }
    }
    RngStream query_rng = rng.substream(i);
    const KsaResult selected = ksa_select(texts, extraction, k,
                                          per_query_budget, method, query_rng);
    ++result.queries_processed;
    if (selected.abstained()) {
      ++result.queries_abstained;
      continue;
    }
    std::string label;
    for (const std::string& kw : *selected.keywords) {
      if (!label.empty()) label += ' ';
      label += kw;
    }
    result.prompt.shots.push_back(
        LabeledShot{public_inputs[i], label, static_cast<int>(i)});
    result.prompt.provenance.push_back(static_cast<int>(i));
  }

  result.spent =
      acct::basic_composition(per_query_budget, result.queries_processed);
  if (n_shots > 0 && result.prompt.shots.empty()) {
    throw ProtocolError(
        "student construction failed: every processed query abstained");
  }
  return result;
}

}  // namespace dpwb::agg
