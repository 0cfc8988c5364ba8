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

#include "moctrans/synthdata/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace moct::data {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> DatasetRecord::train_organs() const {
  std::set<std::string> organs;
  for (const auto& s : subjects)
    for (const auto& [organ, path] : s.labels) organs.insert(organ);
  std::vector<std::string> out(organs.begin(), organs.end());
  std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    return organ_tasks.at(a) < organ_tasks.at(b);
  });
  return out;
}

const DatasetRecord& DatasetManifest::dataset(const std::string& name) const {
  for (const auto& d : datasets)
    if (d.name == name) return d;
  throw DataError("manifest has no dataset '" + name + "'");
}

const TaskSpec& DatasetManifest::task(int task_id) const {
  for (const auto& t : tasks)
    if (t.task_id == task_id) return t;
  throw DataError("manifest has no task " + std::to_string(task_id));
}

std::string DatasetManifest::resolve(const std::string& relative) const {
  return (std::filesystem::path(root) / relative).string();
}

std::vector<TaskSpec> DatasetManifest::tasks_for_view(const std::string& view) const {
  std::vector<TaskSpec> out;
  for (const auto& t : tasks)
    if (t.view == view) out.push_back(t);
  std::sort(out.begin(), out.end(), [](const TaskSpec& a, const TaskSpec& b) { return a.task_id < b.task_id; });
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::pair<std::string, std::string>> pairs;
  std::vector<int> ids;
  for (const auto& t : tasks) {
    if (!pairs.insert({t.view, t.organ}).second)
      throw DataError("manifest: duplicate task for view '" + t.view + "' organ '" + t.organ + "'");
    ids.push_back(t.task_id);
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != static_cast<int>(i) + 1) throw DataError("manifest: task ids must be contiguous from 1");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (!names.insert(d.name).second) throw DataError("manifest: duplicate dataset '" + d.name + "'");
    for (const auto& [organ, id] : d.organ_tasks) {
      const TaskSpec& t = task(id);
      if (t.view != d.view || t.organ != organ)
        throw DataError("manifest: dataset '" + d.name + "' maps organ '" + organ + "' to task " + std::to_string(id) +
                        " which is (" + t.view + ", " + t.organ + ")");
    }
    std::set<std::string> subject_ids;
    for (const auto& s : d.subjects) {
      if (!subject_ids.insert(s.id).second) throw DataError("manifest: duplicate subject '" + s.id + "'");
      for (const auto& [organ, path] : s.labels)
        if (d.organ_tasks.count(organ) == 0)
          throw DataError("manifest: subject '" + s.id + "' labels organ '" + organ + "' without a task");
      for (const auto& [organ, path] : s.eval_only) {
        if (d.organ_tasks.count(organ) == 0)
          throw DataError("manifest: subject '" + s.id + "' has eval-only organ '" + organ + "' without a task");
        if (s.labels.count(organ) != 0)
          throw DataError("manifest: organ '" + organ + "' of subject '" + s.id + "' is both a train and an eval-only label");
      }
    }
  }
}

void DatasetManifest::validate_paths() const {
  validate();
  auto exists = [&](const std::string& rel) {
    if (!std::filesystem::exists(resolve(rel))) throw DataError("manifest: missing file '" + resolve(rel) + "'");
  };
  for (const auto& d : datasets)
    for (const auto& s : d.subjects) {
      exists(s.image);
      for (const auto& [o, p] : s.labels) exists(p);
      for (const auto& [o, p] : s.eval_only) exists(p);
    }
}

std::string manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["seed"] = m.seed;
  j["scale"] = m.scale;
  j["tasks"] = ordered_json::array();
  for (const auto& t : m.tasks) j["tasks"].push_back({{"task_id", t.task_id}, {"view", t.view}, {"organ", t.organ}});
  j["datasets"] = ordered_json::array();
  for (const auto& d : m.datasets) {
    ordered_json dj{{"name", d.name}, {"view", d.view}};
    dj["organ_tasks"] = ordered_json::object();
    for (const auto& [o, id] : d.organ_tasks) dj["organ_tasks"][o] = id;
    dj["subjects"] = ordered_json::array();
    for (const auto& s : d.subjects) {
      ordered_json sj{{"id", s.id}, {"image", s.image}};
      sj["labels"] = ordered_json::object();
      for (const auto& [o, p] : s.labels) sj["labels"][o] = p;
      sj["eval_only"] = ordered_json::object();
      for (const auto& [o, p] : s.eval_only) sj["eval_only"][o] = p;
      dj["subjects"].push_back(std::move(sj));
    }
    j["datasets"].push_back(std::move(dj));
  }
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::string& root) {
  DatasetManifest m;
  m.root = root;
  try {
    const auto j = nlohmann::json::parse(text);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.scale = j.at("scale").get<std::string>();
    for (const auto& t : j.at("tasks"))
      m.tasks.push_back({t.at("task_id").get<int>(), t.at("view").get<std::string>(), t.at("organ").get<std::string>()});
    for (const auto& dj : j.at("datasets")) {
      DatasetRecord d;
      d.name = dj.at("name").get<std::string>();
      d.view = dj.at("view").get<std::string>();
      d.organ_tasks = dj.at("organ_tasks").get<std::map<std::string, int>>();
      for (const auto& sj : dj.at("subjects")) {
        SubjectRecord s;
        s.id = sj.at("id").get<std::string>();
        s.image = sj.at("image").get<std::string>();
        s.labels = sj.at("labels").get<std::map<std::string, std::string>>();
        s.eval_only = sj.at("eval_only").get<std::map<std::string, std::string>>();
        d.subjects.push_back(std::move(s));
      }
      m.datasets.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << manifest_to_json(m);
  if (!out) throw DataError("failed writing '" + path + "'");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace moct::data
