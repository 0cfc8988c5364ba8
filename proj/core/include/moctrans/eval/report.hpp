/*
 * Copyright 2026 The MO-CTranS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moctrans/eval/evaluate.hpp"

namespace moct::eval {

struct MethodResults {
  std::string method;
  std::vector<SubjectTaskResult> results;
};

struct ReportRow {
  std::string method;
  std::string dataset;
  int task_id = 0;
  bool eval_only = false;
  double mean_dice = 0;
  std::optional<double> mean_assd_mm;  // over subjects with any non-empty prediction
  int empty_predictions = 0;
  int n_subjects = 0;
  std::vector<std::string> subjects;   // sorted
  std::vector<double> subject_dice;    // aligned with `subjects`
};

struct PairRow {
  std::string method_a;
  std::string method_b;
  std::string dataset;
  int task_id = 0;
  std::optional<double> p_value;  // absent with fewer than 5 nonzero differences
  int n_pairs = 0;
};

struct MetricsReport {
  std::vector<ReportRow> rows;  // ordered by method input order, dataset, task
  std::vector<PairRow> pairs;
};

// Means per (method, dataset, task) and Wilcoxon tests on paired subject
// Dice between the reference method and every other method, over the
// (dataset, task) keys both cover. The reference is the first method named
// mo_ctrans, else the first method. Throws DataError when a paired key has
// different subject sets, or a method lists a (subject, task) twice.
MetricsReport aggregate_report(const std::vector<MethodResults>& methods);

// method,dataset,task,mean_dice,mean_assd_mm,empty_predictions,n_subjects
std::string report_csv(const MetricsReport& report);
// method_a,method_b,dataset,task,p_value,n_pairs
std::string pairwise_csv(const MetricsReport& report);

}  // namespace moct::eval
