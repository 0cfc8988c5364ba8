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

#include "moctrans/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "moctrans/error.hpp"
#include "moctrans/eval/wilcoxon.hpp"

namespace moct::eval {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

using Key = std::pair<std::string, int>;  // dataset, task

}  // namespace

MetricsReport aggregate_report(const std::vector<MethodResults>& methods) {
  MetricsReport report;
  std::vector<std::map<Key, std::size_t>> index(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::map<Key, std::vector<const SubjectTaskResult*>> groups;
    for (const SubjectTaskResult& r : methods[m].results) groups[{r.dataset, r.task_id}].push_back(&r);
    for (auto& [key, group] : groups) {
      std::sort(group.begin(), group.end(), [](const auto* a, const auto* b) { return a->subject < b->subject; });
      ReportRow row;
      row.method = methods[m].method;
      row.dataset = key.first;
      row.task_id = key.second;
      row.eval_only = group.front()->eval_only;
      double dice_sum = 0, assd_sum = 0;
      int assd_n = 0;
      for (const SubjectTaskResult* r : group) {
        if (!row.subjects.empty() && row.subjects.back() == r->subject)
          throw DataError("method '" + row.method + "' lists subject '" + r->subject + "' twice for " + key.first + " task " +
                          std::to_string(key.second));
        row.subjects.push_back(r->subject);
        row.subject_dice.push_back(r->dice);
        dice_sum += r->dice;
        row.empty_predictions += r->empty_predictions;
        if (r->assd_mm) {
          assd_sum += *r->assd_mm;
          ++assd_n;
        }
      }
      row.n_subjects = static_cast<int>(group.size());
      row.mean_dice = dice_sum / row.n_subjects;
      if (assd_n > 0) row.mean_assd_mm = assd_sum / assd_n;
      index[m][key] = report.rows.size();
      report.rows.push_back(std::move(row));
    }
  }
  if (methods.size() < 2) return report;
  std::size_t ref = 0;
  for (std::size_t m = 0; m < methods.size(); ++m)
    if (methods[m].method == "mo_ctrans") {
      ref = m;
      break;
    }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (m == ref) continue;
    for (const auto& [key, ri] : index[m]) {
      auto it = index[ref].find(key);
      if (it == index[ref].end()) continue;
      const ReportRow& a = report.rows[it->second];
      const ReportRow& b = report.rows[ri];
      if (a.subjects != b.subjects)
        throw DataError("methods '" + a.method + "' and '" + b.method + "' cover different subjects for " + key.first + " task " +
                        std::to_string(key.second));
      PairRow p;
      p.method_a = a.method;
      p.method_b = b.method;
      p.dataset = key.first;
      p.task_id = key.second;
      p.n_pairs = a.n_subjects;
      try {
        p.p_value = wilcoxon_signed_rank(a.subject_dice, b.subject_dice).p_value;
      } catch (const DataError&) {
        // Too few nonzero differences: reported as NA.
      }
      report.pairs.push_back(std::move(p));
    }
  }
  return report;
}

std::string report_csv(const MetricsReport& report) {
  std::string out = "method,dataset,task,mean_dice,mean_assd_mm,empty_predictions,n_subjects\n";
  for (const ReportRow& r : report.rows)
    out += r.method + "," + r.dataset + "," + std::to_string(r.task_id) + "," + fmt(r.mean_dice) + "," +
           (r.mean_assd_mm ? fmt(*r.mean_assd_mm) : std::string("NA")) + "," + std::to_string(r.empty_predictions) + "," +
           std::to_string(r.n_subjects) + "\n";
  return out;
}

std::string pairwise_csv(const MetricsReport& report) {
  std::string out = "method_a,method_b,dataset,task,p_value,n_pairs\n";
  for (const PairRow& p : report.pairs)
    out += p.method_a + "," + p.method_b + "," + p.dataset + "," + std::to_string(p.task_id) + "," +
           (p.p_value ? fmt(*p.p_value) : std::string("NA")) + "," + std::to_string(p.n_pairs) + "\n";
  return out;
}

}  // namespace moct::eval
