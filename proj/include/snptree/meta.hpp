#pragma once

#include <vector>

#include "snptree/dataset.hpp"
#include "snptree/multisplit.hpp"

namespace snptree {

enum class MetaMethod { tippett, stouffer };

MetaMethod meta_method_from_string(const std::string& s);
std::string to_string(MetaMethod m);

// Tippett's rule: 1 - (1 - min p)^m.
double tippett(const std::vector<double>& p);

// Stouffer's rule with weights sqrt(n_l / n); p-values are clamped away from
// {0,1} before the normal quantile, so a study at p=1 effectively vetoes.
double stouffer(const std::vector<double>& p, const std::vector<int>& n_per_study);

struct MetaConfig {
  MetaMethod method = MetaMethod::tippett;
  GammaConfig gamma;
};

double combine(const std::vector<double>& p, const std::vector<int>& n_per_study, MetaMethod m);

// Per study: intersect the group with the study's columns and compute the
// multisplit p-value (empty intersection gives 1), then aggregate across
// studies. group_per_study holds each study's x-column indices for the group.
double meta_group_pvalue(const std::vector<const PreparedSplits*>& per_study,
                         const std::vector<std::vector<int>>& group_per_study,
                         const MetaConfig& cfg = {});

// Pooling baseline: row-stacks the studies over their shared columns and adds
// m-1 study indicators to clvar (a different intercept per dataset). Only
// valid when every study measures the same columns.
Dataset pool_studies(const StudyCollection& studies);

}  // namespace snptree
